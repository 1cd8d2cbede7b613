//! First-order convexification of the nonconvex path constraints.

use nalgebra::{Vector3, Vector6};

use crate::atmosphere::AtmosphereModel;
use crate::conic::{Affine, SocConstraint};
use crate::dynamics::{mach, PlayerSpec, ScaledVars, State};
use crate::error::{Error, Result};

/// Affine row `g(x) = value + gradᵀ(x − nominal) ≤ 0` in physical state units.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub grad: Vector6<f64>,
    /// Nonlinear constraint residual at the nominal.
    pub value: f64,
    pub nominal: Vector6<f64>,
}

impl StateRow {
    pub fn eval(&self, state: &State) -> f64 {
        self.value + self.grad.dot(&(state.to_vector() - self.nominal))
    }

    /// The row as an affine form over the scaled state variables starting at
    /// index `offset`, divided by `normalizer`.
    pub fn to_affine(&self, scaling: &ScaledVars, offset: usize, normalizer: f64) -> Affine {
        // x = (χ − shift)·scale
        let mut e = Affine::constant((self.value - self.grad.dot(&self.nominal)) / normalizer);
        for i in 0..6 {
            let c = self.grad[i] * scaling.state_scale[i];
            e.constant -= c * scaling.state_shift[i] / normalizer;
            e.add_term(offset + i, c / normalizer);
        }
        e
    }
}

/// Nominal speeds below this make the Mach gradient meaningless, ft/s.
pub const MIN_SPEED_FOR_MACH_ROW: f64 = 1.0;

/// Linearization of `M_min − M(p, v) ≤ 0` about `nominal`.
pub fn convexify_min_mach(atm: &AtmosphereModel, nominal: &State, spec: &PlayerSpec, node: usize) -> Result<StateRow> {
    let speed = nominal.speed();
    if !(speed >= MIN_SPEED_FOR_MACH_ROW) {
        return Err(Error::DegenerateSpeed { node, speed });
    }
    let h = nominal.altitude();
    let a = atm.speed_of_sound.eval(h);
    let da = atm.speed_of_sound.eval_derivative(h);
    let m = mach(atm, nominal);
    let mut grad = Vector6::zeros();
    // ∂M/∂v = v/(‖v‖a), ∂M/∂h = −‖v‖a′/a²; the row is M_min − M
    for i in 0..3 {
        grad[3 + i] = -nominal.v[i] / (speed * a);
    }
    grad[2] = speed * da / (a * a);
    Ok(StateRow {
        grad,
        value: spec.mach_min - m,
        nominal: nominal.to_vector(),
    })
}

/// Supporting-hyperplane linearization of `‖p_P − p_E‖ ≥ r_e`:
/// `r_e − ‖Δ̄‖ − n̂ᵀ(p̄_E − p_E) ≤ 0` with `Δ̄ = p_P − p̄_E`, `n̂ = Δ̄/‖Δ̄‖`.
///
/// Returns the row and whether the nominal positions coincided, in which
/// case `n̂` falls back to `+z`.
pub fn convexify_evasion(nominal: &State, pursuer_pos: &Vector3<f64>, r_e: f64) -> (StateRow, bool) {
    let delta = pursuer_pos - nominal.p;
    let dist = delta.norm();
    let degenerate = !(dist > 0.0);
    let n = if degenerate { Vector3::z() } else { delta / dist };
    let mut grad = Vector6::zeros();
    for i in 0..3 {
        grad[i] = n[i];
    }
    (
        StateRow {
            grad,
            value: r_e - dist,
            nominal: nominal.to_vector(),
        },
        degenerate,
    )
}

/// `‖p − target‖ ≤ r_c` over the scaled position variables at `offset..offset+3`.
pub fn capture_constraint(scaling: &ScaledVars, offset: usize, target: &Vector3<f64>, r_c: f64) -> SocConstraint {
    let l = scaling.state_scale[0];
    let rest = (0..3)
        .map(|i| {
            let li = scaling.state_scale[i];
            // (χ − shift)·scale − target, divided by the common length scale
            Affine::var(offset + i)
                .term(offset + i, li / l - 1.0)
                .plus(-(scaling.state_shift[i] * li + target[i]) / l)
        })
        .map(|mut e| {
            e.compact();
            e
        })
        .collect();
    SocConstraint {
        head: Affine::constant(r_c / l),
        rest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tests::table1_player;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atm() -> AtmosphereModel {
        AtmosphereModel::bundled()
    }

    #[test]
    fn min_mach_anchor_and_sign() {
        let atm = atm();
        let spec = table1_player(State::new([0.0; 3], [1.0, 0.0, 0.0]), 7.0);
        let s = State::new([0.0, 0.0, 30_000.0], [2_000.0, 300.0, -100.0]);
        let row = convexify_min_mach(&atm, &s, &spec, 3).unwrap();
        assert!((row.eval(&s) - (spec.mach_min - mach(&atm, &s))).abs() < 1e-12);
        let faster = State { p: s.p, v: s.v * 1.01 };
        assert!(row.eval(&faster) < row.eval(&s));
        // active exactly when the nominal sits at M_min
        let a = atm.speed_of_sound.eval(30_000.0);
        let slow = State::new([0.0, 0.0, 30_000.0], [0.5 * a, 0.0, 0.0]);
        assert!(convexify_min_mach(&atm, &slow, &spec, 0).unwrap().eval(&slow).abs() < 1e-12);
        let still = State::new([0.0, 0.0, 30_000.0], [0.5, 0.0, 0.0]);
        assert!(matches!(
            convexify_min_mach(&atm, &still, &spec, 7),
            Err(Error::DegenerateSpeed { node: 7, .. })
        ));
    }

    #[test]
    fn min_mach_affine_matches_physical_row() {
        let atm = atm();
        let spec = table1_player(State::new([0.0; 3], [1.0, 0.0, 0.0]), 7.0);
        let scaling = ScaledVars::for_player(&spec);
        let s = State::new([-3_000.0, 100.0, 29_000.0], [2_500.0, 0.0, 40.0]);
        let row = convexify_min_mach(&atm, &s, &spec, 0).unwrap();
        let e = row.to_affine(&scaling, 2, 1.0);
        let probe = State::new([-2_900.0, 150.0, 29_500.0], [2_400.0, 30.0, -20.0]);
        let mut x = vec![0.0; 8];
        x[2..].copy_from_slice(scaling.state(&probe.to_vector()).as_slice());
        assert!((e.eval(&x) - row.eval(&probe)).abs() < 1e-12);
    }

    #[test]
    fn evasion_rows() {
        let e = State::new([0.0, 0.0, 30_000.0], [3_000.0, 0.0, 0.0]);
        let p = Vector3::new(500.0, 0.0, 30_000.0);
        let (row, deg) = convexify_evasion(&e, &p, 500.0);
        assert!(!deg && row.eval(&e).abs() < 1e-12);
        let (row, _) = convexify_evasion(&e, &Vector3::new(1_000.0, 0.0, 30_000.0), 500.0);
        assert!((row.eval(&e) + 500.0).abs() < 1e-12);
        let (_, deg) = convexify_evasion(&e, &e.p, 500.0);
        assert!(deg);
    }

    #[test]
    fn evasion_half_space_avoids_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r_e = 500.0;
        for _ in 0..20 {
            let e = State::new(
                [rng.gen_range(-2e3..2e3), rng.gen_range(-2e3..2e3), rng.gen_range(2.8e4..3.2e4)],
                [3_000.0, 0.0, 0.0],
            );
            let p = Vector3::new(rng.gen_range(-2e3..2e3), rng.gen_range(-2e3..2e3), rng.gen_range(2.8e4..3.2e4));
            let (row, _) = convexify_evasion(&e, &p, r_e);
            let n = Vector3::new(row.grad[0], row.grad[1], row.grad[2]);
            // a point on the boundary plane, then random in-plane offsets
            let base = e.p - n * row.value;
            let t1 = n.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or_else(|| n.cross(&Vector3::y()).normalize());
            let t2 = n.cross(&t1);
            for _ in 0..50 {
                let q = base + t1 * rng.gen_range(-5e3..5e3) + t2 * rng.gen_range(-5e3..5e3);
                let probe = State { p: q, v: e.v };
                assert!(row.eval(&probe).abs() < 1e-6);
                assert!((q - p).norm() >= r_e - 1e-6);
            }
        }
    }

    #[test]
    fn capture_cone_geometry() {
        let spec = table1_player(State::new([0.0; 3], [1.0, 0.0, 0.0]), 7.0);
        let scaling = ScaledVars::for_player(&spec);
        let target = Vector3::new(0.0, 0.0, 30_000.0);
        let soc = capture_constraint(&scaling, 0, &target, 1.0);
        let slack = |p: Vector3<f64>| {
            let x: Vec<f64> = (0..3).map(|i| p[i] / scaling.state_scale[i]).collect();
            let r: f64 = soc.rest.iter().map(|e| e.eval(&x).powi(2)).sum::<f64>().sqrt();
            (soc.head.eval(&x) - r) * scaling.state_scale[0]
        };
        assert!((slack(target) - 1.0).abs() < 1e-9);
        assert!(slack(target + Vector3::new(1.0, 0.0, 0.0)).abs() < 1e-9);
        assert!(slack(target + Vector3::new(2.0, 0.0, 0.0)) < 0.0);
    }
}
