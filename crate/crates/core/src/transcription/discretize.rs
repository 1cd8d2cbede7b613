//! First-order-hold discretization of the time-normalized linearized dynamics.
//!
//! With `τ ∈ [0, 1]` and scaled final time `s`, the scaled state obeys
//! `dχ/dτ = s·t_c·f(χ, μ)`. About a nominal this gives, per interval,
//!
//! ```text
//! χ_{k+1} ≈ A_k χ_k + B⁻_k μ_k + B⁺_k μ_{k+1} + Σ_k s + ω_k
//! ```
//!
//! The transition matrix and the convolution terms are integrated together
//! in the forms `Ṗ = A(τ) P + B(τ) λ(τ)`, which avoids inverting `Φ`. Each
//! interval starts from its own nominal node, and `ω_k` is taken from the
//! propagated nominal so the model reproduces the nonlinear flow exactly at
//! the linearization point.

use nalgebra::{Vector3, Vector6};

use crate::dynamics::{Matrix6, Matrix6x3, PlayerModel};
use crate::error::{Error, Result};

/// RK4 substeps per interval.
pub const DEFAULT_SUBSTEPS: usize = 20;

/// Scaled dynamics `f(χ, μ)` per physical second and its Jacobians.
pub trait ScaledDynamics {
    fn rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> Vector6<f64>;
    fn rate_jacobians(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> (Matrix6, Matrix6x3);
    /// Seconds per unit of the scaled final-time variable.
    fn time_scale(&self) -> f64;
}

impl ScaledDynamics for PlayerModel<'_> {
    fn rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> Vector6<f64> {
        PlayerModel::rate(self, chi, mu)
    }

    fn rate_jacobians(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> (Matrix6, Matrix6x3) {
        self.scaled_jacobians(chi, mu)
    }

    fn time_scale(&self) -> f64 {
        self.scaling.time_scale
    }
}

/// Per-interval discrete model in scaled variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvModel {
    pub a: Vec<Matrix6>,
    pub b_minus: Vec<Matrix6x3>,
    pub b_plus: Vec<Matrix6x3>,
    pub sigma: Vec<Vector6<f64>>,
    pub omega: Vec<Vector6<f64>>,
    /// Nominal node `k` propagated through the nonlinear flow to `τ_{k+1}`.
    pub propagated: Vec<Vector6<f64>>,
}

impl LtvModel {
    pub fn intervals(&self) -> usize {
        self.a.len()
    }

    /// Model prediction of node `k + 1`.
    pub fn step(&self, k: usize, chi: &Vector6<f64>, mu0: &Vector3<f64>, mu1: &Vector3<f64>, s: f64) -> Vector6<f64> {
        self.a[k] * chi + self.b_minus[k] * mu0 + self.b_plus[k] * mu1 + self.sigma[k] * s + self.omega[k]
    }

    /// Largest node defect `‖χ_{k+1} − step(k, ·)‖` over the intervals.
    pub fn max_defect(&self, chi: &[Vector6<f64>], mu: &[Vector3<f64>], s: f64) -> f64 {
        (0..self.intervals())
            .map(|k| (chi[k + 1] - self.step(k, &chi[k], &mu[k], &mu[k + 1], s)).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy)]
struct Aug {
    x: Vector6<f64>,
    phi: Matrix6,
    bm: Matrix6x3,
    bp: Matrix6x3,
    sg: Vector6<f64>,
}

impl Aug {
    fn axpy(&self, h: f64, d: &Aug) -> Aug {
        Aug {
            x: self.x + d.x * h,
            phi: self.phi + d.phi * h,
            bm: self.bm + d.bm * h,
            bp: self.bp + d.bp * h,
            sg: self.sg + d.sg * h,
        }
    }

    fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.phi.iter().all(|v| v.is_finite())
            && self.bm.iter().all(|v| v.is_finite())
            && self.bp.iter().all(|v| v.is_finite())
            && self.sg.iter().all(|v| v.is_finite())
    }
}

/// Discretizes about the scaled nominal `(chi, mu, s)`.
pub fn discretize_foh<D: ScaledDynamics>(
    dynamics: &D,
    chi: &[Vector6<f64>],
    mu: &[Vector3<f64>],
    s: f64,
    substeps: usize,
) -> Result<LtvModel> {
    let k_nodes = chi.len();
    if k_nodes < 2 || mu.len() != k_nodes {
        return Err(Error::Dimension {
            expected: k_nodes.max(2),
            got: mu.len(),
        });
    }
    let intervals = k_nodes - 1;
    let dtau = 1.0 / intervals as f64;
    let h = dtau / substeps.max(1) as f64;
    let tc = dynamics.time_scale();
    let mut out = LtvModel {
        a: Vec::with_capacity(intervals),
        b_minus: Vec::with_capacity(intervals),
        b_plus: Vec::with_capacity(intervals),
        sigma: Vec::with_capacity(intervals),
        omega: Vec::with_capacity(intervals),
        propagated: Vec::with_capacity(intervals),
    };
    for k in 0..intervals {
        let (mu0, mu1) = (mu[k], mu[k + 1]);
        let deriv = |sigma: f64, y: &Aug| -> Aug {
            let u = mu0 * (1.0 - sigma) + mu1 * sigma;
            let f = dynamics.rate(&y.x, &u);
            let (ar, br) = dynamics.rate_jacobians(&y.x, &u);
            let a = ar * (s * tc);
            let b = br * (s * tc);
            Aug {
                x: f * (s * tc),
                phi: a * y.phi,
                bm: a * y.bm + b * (1.0 - sigma),
                bp: a * y.bp + b * sigma,
                sg: a * y.sg + f * tc,
            }
        };
        let mut y = Aug {
            x: chi[k],
            phi: Matrix6::identity(),
            bm: Matrix6x3::zeros(),
            bp: Matrix6x3::zeros(),
            sg: Vector6::zeros(),
        };
        let hs = h / dtau;
        for j in 0..substeps.max(1) {
            let sg0 = j as f64 * hs;
            let k1 = deriv(sg0, &y);
            let k2 = deriv(sg0 + hs / 2.0, &y.axpy(h / 2.0, &k1));
            let k3 = deriv(sg0 + hs / 2.0, &y.axpy(h / 2.0, &k2));
            let k4 = deriv(sg0 + hs, &y.axpy(h, &k3));
            y = y
                .axpy(h / 6.0, &k1)
                .axpy(h / 3.0, &k2)
                .axpy(h / 3.0, &k3)
                .axpy(h / 6.0, &k4);
        }
        if !y.is_finite() {
            return Err(Error::Discretization { interval: k });
        }
        let omega = y.x - y.phi * chi[k] - y.bm * mu0 - y.bp * mu1 - y.sg * s;
        out.a.push(y.phi);
        out.b_minus.push(y.bm);
        out.b_plus.push(y.bp);
        out.sigma.push(y.sg);
        out.omega.push(omega);
        out.propagated.push(y.x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f = Mχ + Nμ` with constant matrices.
    struct Linear {
        m: Matrix6,
        n: Matrix6x3,
    }

    impl ScaledDynamics for Linear {
        fn rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> Vector6<f64> {
            self.m * chi + self.n * mu
        }
        fn rate_jacobians(&self, _: &Vector6<f64>, _: &Vector3<f64>) -> (Matrix6, Matrix6x3) {
            (self.m, self.n)
        }
        fn time_scale(&self) -> f64 {
            10.0
        }
    }

    fn nominal(k: usize) -> (Vec<Vector6<f64>>, Vec<Vector3<f64>>) {
        let chi = (0..k).map(|i| Vector6::repeat(0.1 * i as f64 + 0.3)).collect();
        let mu = (0..k).map(|i| Vector3::new(0.2 * i as f64, -0.1, 0.05)).collect();
        (chi, mu)
    }

    #[test]
    fn zero_dynamics() {
        let sys = Linear {
            m: Matrix6::zeros(),
            n: Matrix6x3::zeros(),
        };
        let (chi, mu) = nominal(5);
        let ltv = discretize_foh(&sys, &chi, &mu, 1.3, DEFAULT_SUBSTEPS).unwrap();
        for k in 0..4 {
            assert_eq!(ltv.a[k], Matrix6::identity());
            assert!(ltv.b_minus[k].norm() == 0.0 && ltv.b_plus[k].norm() == 0.0);
            assert!(ltv.sigma[k].norm() == 0.0 && ltv.omega[k].norm() == 0.0);
        }
    }

    #[test]
    fn diagonal_lti_matches_exponential() {
        let diag = Vector6::new(-0.5, 0.3, -1.2, 0.0, 0.8, -0.05);
        let sys = Linear {
            m: Matrix6::from_diagonal(&diag),
            n: Matrix6x3::zeros(),
        };
        let (chi, mu) = nominal(11);
        let s = 0.7;
        let ltv = discretize_foh(&sys, &chi, &mu, s, DEFAULT_SUBSTEPS).unwrap();
        let dt = s * 10.0 / 10.0;
        for k in 0..10 {
            for i in 0..6 {
                for j in 0..6 {
                    let exact = if i == j { (diag[i] * dt).exp() } else { 0.0 };
                    assert!((ltv.a[k][(i, j)] - exact).abs() <= 1e-8 * exact.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn lti_with_inputs_reproduces_closed_form() {
        // scalar channels: ẋ = λx + u with u linear in time; exact solution by quadrature
        let diag = Vector6::new(-0.4, 0.2, 0.0, -1.0, 0.5, 0.1);
        let mut n = Matrix6x3::zeros();
        n[(0, 0)] = 1.0;
        n[(1, 1)] = 1.0;
        n[(2, 2)] = 1.0;
        n[(3, 0)] = 0.5;
        n[(4, 1)] = -2.0;
        n[(5, 2)] = 1.5;
        let sys = Linear {
            m: Matrix6::from_diagonal(&diag),
            n,
        };
        let k_nodes = 16;
        let s = 0.9;
        let t_final = s * 10.0;
        let mu: Vec<Vector3<f64>> = (0..k_nodes).map(|i| Vector3::new(1.0, -0.5 * i as f64, (i as f64).sin())).collect();
        let chi0 = Vector6::new(0.2, -0.1, 0.4, 1.0, 0.0, -0.3);
        // closed form per channel over each interval with linear input
        let h = t_final / (k_nodes - 1) as f64;
        let mut exact = vec![chi0];
        for k in 0..k_nodes - 1 {
            let prev = exact[k];
            let mut next = Vector6::zeros();
            for i in 0..6 {
                let l = diag[i];
                let g0 = (n.row(i) * mu[k])[0];
                let g1 = (n.row(i) * mu[k + 1])[0];
                // ∫₀ʰ e^{l(h−t)} (g0 + (g1−g0) t/h) dt
                let (i0, i1) = if l == 0.0 {
                    (h, h / 2.0)
                } else {
                    let e = (l * h).exp();
                    let i0 = (e - 1.0) / l;
                    let i1 = (e - 1.0 - l * h) / (l * l * h);
                    (i0, i1)
                };
                next[i] = (l * h).exp() * prev[i] + g0 * i0 + (g1 - g0) * i1;
            }
            exact.push(next);
        }
        // the model is global for a linear system, so any nominal will do
        let zeros_x = vec![Vector6::zeros(); k_nodes];
        let zeros_u = vec![Vector3::zeros(); k_nodes];
        let ltv = discretize_foh(&sys, &zeros_x, &zeros_u, s, DEFAULT_SUBSTEPS).unwrap();
        let mut x = chi0;
        for k in 0..k_nodes - 1 {
            x = ltv.step(k, &x, &mu[k], &mu[k + 1], s);
            for i in 0..6 {
                assert!(
                    (x[i] - exact[k + 1][i]).abs() <= 1e-8 * exact[k + 1][i].abs().max(1.0),
                    "node {} channel {i}: {} vs {}",
                    k + 1,
                    x[i],
                    exact[k + 1][i]
                );
            }
        }
    }
}
