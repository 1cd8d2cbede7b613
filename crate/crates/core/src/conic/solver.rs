//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.

use super::cones::{self, Scaling};
use super::kkt::KktSolver;
use super::problem::{ConicProblem, StandardForm};
use super::{ConicBackend, ConicSolution, Status};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub feastol: f64,
    /// Absolute and relative duality gap accepted as optimal.
    pub abstol: f64,
    pub reltol: f64,
    /// Gap the iteration keeps pushing towards once `abstol`/`reltol` hold;
    /// extra digits sharpen the minimizer on curved cone boundaries.
    pub gap_target: f64,
    /// Looser tolerances under which a stalled iterate is still returned as
    /// an approximate solution.
    pub feastol_inacc: f64,
    pub abstol_inacc: f64,
    pub reltol_inacc: f64,
    pub step_factor: f64,
    /// Prints one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            feastol: 1e-8,
            abstol: 1e-8,
            reltol: 1e-8,
            gap_target: 1e-12,
            feastol_inacc: 1e-4,
            abstol_inacc: 5e-5,
            reltol_inacc: 5e-5,
            step_factor: 0.99,
            verbose: false,
        }
    }
}

/// Reference backend.
#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub settings: SolverSettings,
}

impl InteriorPoint {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution> {
        problem.validate()?;
        let sf = problem.standard_form();
        let mut sol = solve_standard(&sf, &self.settings);
        sol.objective += problem.cost_offset;
        Ok(sol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Moves `v` into the cone interior by adding a multiple of the identity.
fn shift_into_cone(sf: &StandardForm, v: &mut [f64]) {
    let alpha = -cones::min_eig(&sf.cones, v);
    if alpha >= 0.0 {
        let e = cones::unit(&sf.cones);
        axpy(1.0 + alpha, &e, v);
    }
}

struct Residuals {
    rx: Vec<f64>,
    ry: Vec<f64>,
    rz: Vec<f64>,
    rtau: f64,
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    gap: f64,
    relgap: f64,
    /// Certificate measures: `‖Aᵀy + Gᵀz‖ / −(bᵀy + hᵀz)` and `(‖Ax‖ + ‖Gx + s‖) / −cᵀx`.
    infeas: f64,
    unbounded: f64,
    bty_htz: f64,
    ctx: f64,
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn residuals(sf: &StandardForm, it: &Iterate) -> Residuals {
    let (n, p, m) = (sf.c.len(), sf.b.len(), sf.h.len());
    let tau = it.tau;
    // Aᵀy + Gᵀz
    let mut aty_gtz = vec![0.0; n];
    sf.a.mul_t_add(1.0, &it.y, &mut aty_gtz);
    sf.g.mul_t_add(1.0, &it.z, &mut aty_gtz);
    let rx: Vec<f64> = aty_gtz.iter().zip(&sf.c).map(|(v, c)| -(v + c * tau)).collect();
    let mut ax = vec![0.0; p];
    sf.a.mul_add(1.0, &it.x, &mut ax);
    let ry: Vec<f64> = ax.iter().zip(&sf.b).map(|(v, b)| v - b * tau).collect();
    let mut gx_s = it.s.clone();
    sf.g.mul_add(1.0, &it.x, &mut gx_s);
    let rz: Vec<f64> = gx_s.iter().zip(&sf.h).map(|(v, h)| v - h * tau).collect();
    let ctx = dot(&sf.c, &it.x);
    let bty_htz = dot(&sf.b, &it.y) + dot(&sf.h, &it.z);
    let rtau = it.kappa + ctx + bty_htz;

    let bnorm = 1.0f64.max(norm_inf(&sf.b)).max(norm_inf(&sf.h));
    let cnorm = 1.0f64.max(norm_inf(&sf.c));
    let pres = norm_inf(&ry).max(norm_inf(&rz)) / tau / bnorm;
    let dres = norm_inf(&rx) / tau / cnorm;
    let pcost = ctx / tau;
    let dcost = -bty_htz / tau;
    let gap = dot(&it.s, &it.z) / (tau * tau);
    let relgap = if pcost < 0.0 {
        gap / -pcost
    } else if dcost > 0.0 {
        gap / dcost
    } else {
        f64::INFINITY
    };
    let infeas = if bty_htz < 0.0 {
        norm_inf(&aty_gtz) / -bty_htz
    } else {
        f64::INFINITY
    };
    let unbounded = if ctx < 0.0 {
        let mut gxs = it.s.clone();
        sf.g.mul_add(1.0, &it.x, &mut gxs);
        (norm_inf(&ax) + norm_inf(&gxs)) / -ctx
    } else {
        f64::INFINITY
    };
    let _ = (m, n);
    Residuals {
        rx,
        ry,
        rz,
        rtau,
        pres,
        dres,
        pcost,
        dcost,
        gap,
        relgap,
        infeas,
        unbounded,
        bty_htz,
        ctx,
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    sf: &StandardForm,
    sc: &Scaling,
    kkt: &KktSolver,
    it: &Iterate,
    res: &Residuals,
    d1: &(Vec<f64>, Vec<f64>, Vec<f64>),
    d_s: &[f64],
    d_kappa: f64,
    eta: f64,
) -> Direction {
    let m = sf.h.len();
    let layout = &sf.cones;
    let mut lam_div = vec![0.0; m];
    cones::jordan_div(layout, &sc.lambda, d_s, &mut lam_div);
    let mut w_lam_div = vec![0.0; m];
    sc.apply_w(&lam_div, &mut w_lam_div);
    let r1: Vec<f64> = res.rx.iter().map(|v| eta * v).collect();
    let r2: Vec<f64> = res.ry.iter().map(|v| -eta * v).collect();
    let r3: Vec<f64> = res.rz.iter().zip(&w_lam_div).map(|(r, w)| -eta * r - w).collect();
    let (x2, y2, z2) = kkt.solve(sf, sc, &r1, &r2, &r3);
    let (x1, y1, z1) = d1;
    let num = -eta * res.rtau - d_kappa / it.tau - dot(&sf.c, &x2) - dot(&sf.b, &y2) - dot(&sf.h, &z2);
    let den = dot(&sf.c, x1) + dot(&sf.b, y1) + dot(&sf.h, z1) - it.kappa / it.tau;
    let dtau = num / den;
    let mut dx = x2;
    axpy(dtau, x1, &mut dx);
    let mut dy = y2;
    axpy(dtau, y1, &mut dy);
    let mut dz = z2;
    axpy(dtau, z1, &mut dz);
    let mut w2dz = vec![0.0; m];
    sc.apply_w2(&dz, &mut w2dz);
    let ds: Vec<f64> = w_lam_div.iter().zip(&w2dz).map(|(a, b)| a - b).collect();
    let dkappa = (d_kappa - it.kappa * dtau) / it.tau;
    Direction {
        dx,
        dy,
        dz,
        ds,
        dtau,
        dkappa,
    }
}

fn step_length(sf: &StandardForm, it: &Iterate, d: &Direction) -> f64 {
    let mut alpha = cones::max_step(&sf.cones, &it.s, &d.ds).min(cones::max_step(&sf.cones, &it.z, &d.dz));
    if d.dtau < 0.0 {
        alpha = alpha.min(-it.tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / d.dkappa);
    }
    alpha
}

fn finish(sf: &StandardForm, it: &Iterate, status: Status, iterations: usize, approximate: bool) -> ConicSolution {
    let scale = match status {
        Status::Infeasible | Status::Unbounded => 1.0,
        _ => 1.0 / it.tau,
    };
    let x: Vec<f64> = it.x.iter().map(|v| v * scale).collect();
    let y: Vec<f64> = it.y.iter().map(|v| v * scale).collect();
    let z: Vec<f64> = it.z.iter().map(|v| v * scale).collect();
    let s: Vec<f64> = it.s.iter().map(|v| v * scale).collect();
    let objective = match status {
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => dot(&sf.c, &x),
    };
    let kkt = super::check_kkt_standard(sf, &x, &y, &z);
    ConicSolution {
        status,
        x,
        y,
        z,
        s,
        objective,
        iterations,
        approximate,
        kkt,
    }
}

/// Solves a problem already in standard form.
pub fn solve_standard(sf: &StandardForm, settings: &SolverSettings) -> ConicSolution {
    let (n, p, m) = (sf.c.len(), sf.b.len(), sf.h.len());
    let layout = &sf.cones;
    let degree = layout.degree() as f64;
    let mut kkt = KktSolver::new(sf);

    let ident = Scaling::identity(layout);
    if !kkt.factor(sf, &ident) {
        let it = Iterate {
            x: vec![0.0; n],
            y: vec![0.0; p],
            z: cones::unit(layout),
            s: cones::unit(layout),
            tau: 1.0,
            kappa: 1.0,
        };
        return finish(sf, &it, Status::NumericalError, 0, false);
    }
    let (x0, _, zp) = kkt.solve(sf, &ident, &vec![0.0; n], &sf.b, &sf.h);
    let mut s0: Vec<f64> = zp.iter().map(|v| -v).collect();
    shift_into_cone(sf, &mut s0);
    let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
    let (_, y0, mut z0) = kkt.solve(sf, &ident, &neg_c, &vec![0.0; p], &vec![0.0; m]);
    shift_into_cone(sf, &mut z0);
    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let e = cones::unit(layout);
    let mut best: Option<(f64, Iterate)> = None;
    for iter in 0..=settings.max_iter {
        let res = residuals(sf, &it);
        let converged = |ft: f64, at: f64, rt: f64| res.pres < ft && res.dres < ft && (res.gap < at || res.relgap < rt);
        if converged(settings.feastol, settings.gap_target, settings.gap_target) {
            return finish(sf, &it, Status::Optimal, iter, false);
        }
        if it.tau < it.kappa && res.bty_htz < 0.0 && res.infeas < settings.feastol {
            return finish(sf, &it, Status::Infeasible, iter, false);
        }
        if it.tau < it.kappa && res.ctx < 0.0 && res.unbounded < settings.feastol {
            return finish(sf, &it, Status::Unbounded, iter, false);
        }
        if settings.verbose {
            eprintln!(
                "{iter:3} pcost {:+.6e} dcost {:+.6e} gap {:.2e} pres {:.2e} dres {:.2e} tau {:.2e} kap {:.2e}",
                res.pcost, res.dcost, res.gap, res.pres, res.dres, it.tau, it.kappa
            );
        }
        let merit = res.pres.max(res.dres).max(res.gap.min(res.relgap));
        if converged(settings.feastol_inacc, settings.abstol_inacc, settings.reltol_inacc)
            && best.as_ref().map_or(true, |(b, _)| merit < *b)
        {
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    z: it.z.clone(),
                    s: it.s.clone(),
                    tau: it.tau,
                    kappa: it.kappa,
                },
            ));
        }
        let fallback = |best: Option<(f64, Iterate)>, it: &Iterate, status: Status| match best {
            Some((_, b)) => {
                let r = residuals(sf, &b);
                let ok = r.pres < settings.feastol
                    && r.dres < settings.feastol
                    && (r.gap < settings.abstol || r.relgap < settings.reltol);
                if ok {
                    finish(sf, &b, Status::Optimal, iter, false)
                } else {
                    finish(sf, &b, status, iter, true)
                }
            }
            None => finish(sf, it, status, iter, false),
        };
        if iter == settings.max_iter {
            return fallback(best, &it, Status::MaxIter);
        }
        let _ = (res.pcost, res.dcost);

        let Some(sc) = Scaling::compute(layout, &it.s, &it.z) else {
            return fallback(best, &it, Status::NumericalError);
        };
        if !kkt.factor(sf, &sc) {
            return fallback(best, &it, Status::NumericalError);
        }
        let d1 = kkt.solve(sf, &sc, &neg_c, &sf.b, &sf.h);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (degree + 1.0);

        // predictor
        let mut lam2 = vec![0.0; m];
        cones::jordan_product(layout, &sc.lambda, &sc.lambda, &mut lam2);
        let ds_aff: Vec<f64> = lam2.iter().map(|v| -v).collect();
        let aff = direction(sf, &sc, &kkt, &it, &res, &d1, &ds_aff, -it.tau * it.kappa, 1.0);
        let alpha_aff = step_length(sf, &it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let mut winv_ds = vec![0.0; m];
        sc.apply_w_inv(&aff.ds, &mut winv_ds);
        let mut w_dz = vec![0.0; m];
        sc.apply_w(&aff.dz, &mut w_dz);
        let mut cross = vec![0.0; m];
        cones::jordan_product(layout, &winv_ds, &w_dz, &mut cross);
        let ds_comb: Vec<f64> = (0..m).map(|i| -lam2[i] - cross[i] + sigma * mu * e[i]).collect();
        let dk_comb = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = direction(sf, &sc, &kkt, &it, &res, &d1, &ds_comb, dk_comb, 1.0 - sigma);
        let alpha = (settings.step_factor * step_length(sf, &it, &dir)).min(1.0);
        if settings.verbose {
            eprintln!("    sigma {sigma:.2e} alpha {alpha:.3e}");
        }
        if !(alpha > 1e-10) || dir.dx.iter().any(|v| !v.is_finite()) {
            return fallback(best, &it, Status::NumericalError);
        }
        axpy(alpha, &dir.dx, &mut it.x);
        axpy(alpha, &dir.dy, &mut it.y);
        axpy(alpha, &dir.dz, &mut it.z);
        axpy(alpha, &dir.ds, &mut it.s);
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }
    unreachable!("loop returns at max_iter")
}
