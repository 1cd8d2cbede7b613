use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{run_engagement, EngagementResult, EngagementSettings, GuidanceLaw};
use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{state_deriv, PlayerSpec, ScaledVars, State};
use crate::error::{Error, Result};
use crate::ibr::Game;
use crate::transcription::{LtvModel, Trajectory};

/// Diagonal LQR weights on scaled states and inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrWeights {
    pub state: f64,
    pub input: f64,
    pub terminal: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            state: 1.0,
            input: 1.0,
            terminal: 1e3,
        }
    }
}

/// Time-indexed feedback about a reference trajectory: on interval `k` the
/// scaled input correction is `−K_k δχ`.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub gains: Vec<Matrix3x6<f64>>,
    pub reference: Trajectory,
    pub scaling: ScaledVars,
    /// Reference acceleration `u + d` at each node, for Hermite interpolation.
    ref_accel: Vec<Vector3<f64>>,
}

impl GainSchedule {
    /// Reference state at time `t`: cubic Hermite between nodes using the
    /// node velocities and accelerations.
    pub fn reference_state(&self, t: f64) -> State {
        let traj = &self.reference;
        let (k, f) = traj.locate(t);
        let h = traj.final_time / (traj.nodes() - 1) as f64;
        let (a, b) = (&traj.states[k], &traj.states[k + 1]);
        let (f2, f3) = (f * f, f * f * f);
        let h00 = 2.0 * f3 - 3.0 * f2 + 1.0;
        let h10 = f3 - 2.0 * f2 + f;
        let h01 = -2.0 * f3 + 3.0 * f2;
        let h11 = f3 - f2;
        State {
            p: a.p * h00 + a.v * (h10 * h) + b.p * h01 + b.v * (h11 * h),
            v: a.v * h00 + self.ref_accel[k] * (h10 * h) + b.v * h01 + self.ref_accel[k + 1] * (h11 * h),
        }
    }

    /// Reference input plus feedback; after the reference ends the last
    /// reference input is held without feedback.
    pub fn command(&self, t: f64, state: &State) -> Vector3<f64> {
        let traj = &self.reference;
        let u_ref = traj.input_at(t);
        if t >= traj.final_time {
            return u_ref;
        }
        let (k, _) = traj.locate(t);
        let dx = state.to_vector() - self.reference_state(t).to_vector();
        let dchi = dx.component_div(&self.scaling.state_scale);
        let dmu = -(self.gains[k] * dchi);
        u_ref + dmu.component_mul(&self.scaling.input_scale)
    }
}

/// Backward Riccati recursion over the model's intervals. The input
/// correction is held across each interval, so the interval input matrix is
/// `B⁻ + B⁺`.
pub fn lqr_track(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    ltv: &LtvModel,
    reference: &Trajectory,
    weights: &LqrWeights,
) -> Result<GainSchedule> {
    let n = ltv.intervals();
    if reference.nodes() != n + 1 {
        return Err(Error::Dimension {
            expected: n + 1,
            got: reference.nodes(),
        });
    }
    let q = Matrix6::identity() * weights.state;
    let r = Matrix3::identity() * weights.input;
    let mut p = Matrix6::identity() * weights.terminal;
    let mut gains = vec![Matrix3x6::zeros(); n];
    for k in (0..n).rev() {
        let a = &ltv.a[k];
        let b = ltv.b_minus[k] + ltv.b_plus[k];
        let btp = b.transpose() * p;
        let s = r + btp * b;
        let gain = s
            .cholesky()
            .ok_or_else(|| Error::Simulation(format!("Riccati step {k}: input weight not positive definite")))?
            .solve(&(btp * a));
        p = q + a.transpose() * p * (a - b * gain);
        p = (p + p.transpose()) * 0.5;
        if !gain.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("Riccati recursion diverged at interval {k}")));
        }
        gains[k] = gain;
    }
    let ref_accel = reference
        .states
        .iter()
        .zip(&reference.inputs)
        .map(|(s, u)| state_deriv(atm, s, u, spec).v)
        .collect();
    Ok(GainSchedule {
        gains,
        reference: reference.clone(),
        scaling: ScaledVars::for_player(spec),
        ref_accel,
    })
}

/// Nonlinear engagement with the evader tracking its reference under the
/// gain schedule. Commands are clipped at the evader's bound plus
/// `headroom` G.
pub fn simulate_closed_loop(
    atm: &AtmosphereModel,
    game: &Game,
    schedule: &GainSchedule,
    headroom: f64,
    laws: &[GuidanceLaw],
    settings: &EngagementSettings,
) -> Result<EngagementResult> {
    let mut tracking = game.evader.clone();
    tracking.u_max += headroom;
    let input = |t: f64, s: &State| schedule.command(t, s);
    run_engagement(atm, game, &tracking, &input, laws, settings)
}

/// Propagates the discrete model under the schedule's feedback from
/// `chi0`, with the reference inputs `mu_ref` and final time `s`.
pub fn propagate_model(
    ltv: &LtvModel,
    gains: &[Matrix3x6<f64>],
    chi_ref: &[Vector6<f64>],
    mu_ref: &[Vector3<f64>],
    s: f64,
    chi0: &Vector6<f64>,
) -> Vec<Vector6<f64>> {
    let mut out = vec![*chi0];
    for k in 0..ltv.intervals() {
        let chi = out[k];
        let dmu = -(gains[k] * (chi - chi_ref[k]));
        out.push(ltv.step(k, &chi, &(mu_ref[k] + dmu), &(mu_ref[k + 1] + dmu), s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tests::table1_player;
    use crate::transcription::{discretize_trajectory, DEFAULT_SUBSTEPS};

    fn setup() -> (AtmosphereModel, PlayerSpec, Trajectory, LtvModel) {
        let atm = AtmosphereModel::bundled();
        let spec = table1_player(State::new([-10_000.0, 0.0, 31_000.0], [3_000.0, 0.0, 0.0]), 7.0);
        let mut traj = Trajectory::straight_line(&spec.initial, &Vector3::new(0.0, 0.0, 30_000.0), 30).unwrap();
        for (k, u) in traj.inputs.iter_mut().enumerate() {
            *u = Vector3::new(-60.0, 20.0 * (k as f64 * 0.3).sin(), -30.0);
        }
        let (ltv, _) = discretize_trajectory(&atm, &spec, &traj, DEFAULT_SUBSTEPS).unwrap();
        (atm, spec, traj, ltv)
    }

    /// Reference chain that satisfies the discrete model exactly.
    fn model_reference(ltv: &LtvModel, chi0: Vector6<f64>, mu: &[Vector3<f64>], s: f64) -> Vec<Vector6<f64>> {
        let mut chi = vec![chi0];
        for k in 0..ltv.intervals() {
            let next = ltv.step(k, &chi[k], &mu[k], &mu[k + 1], s);
            chi.push(next);
        }
        chi
    }

    #[test]
    fn zero_state_weights_give_zero_gains() {
        let (atm, spec, traj, ltv) = setup();
        let w = LqrWeights {
            state: 0.0,
            input: 1.0,
            terminal: 0.0,
        };
        let sched = lqr_track(&atm, &spec, &ltv, &traj, &w).unwrap();
        assert!(sched.gains.iter().all(|g| g.amax() == 0.0));
    }

    #[test]
    fn exact_model_stays_on_reference() {
        let (atm, spec, traj, ltv) = setup();
        let scaling = ScaledVars::for_player(&spec);
        let mu = traj.scaled_inputs(&scaling);
        let s = scaling.time(traj.final_time);
        let chi_ref = model_reference(&ltv, scaling.state(&spec.initial.to_vector()), &mu, s);
        let sched = lqr_track(&atm, &spec, &ltv, &traj, &LqrWeights::default()).unwrap();
        let run = propagate_model(&ltv, &sched.gains, &chi_ref, &mu, s, &chi_ref[0]);
        let worst = run.iter().zip(&chi_ref).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn feedback_shrinks_terminal_deviation() {
        let (atm, spec, traj, ltv) = setup();
        let scaling = ScaledVars::for_player(&spec);
        let mu = traj.scaled_inputs(&scaling);
        let s = scaling.time(traj.final_time);
        let chi_ref = model_reference(&ltv, scaling.state(&spec.initial.to_vector()), &mu, s);
        let sched = lqr_track(&atm, &spec, &ltv, &traj, &LqrWeights::default()).unwrap();
        let kick = Vector6::new(0.01, -0.02, 0.01, 0.02, 0.0, -0.01);
        let closed = propagate_model(&ltv, &sched.gains, &chi_ref, &mu, s, &(chi_ref[0] + kick));
        let zero = vec![Matrix3x6::zeros(); ltv.intervals()];
        let open = propagate_model(&ltv, &zero, &chi_ref, &mu, s, &(chi_ref[0] + kick));
        let last = chi_ref.len() - 1;
        let err = |run: &[Vector6<f64>]| (run[last] - chi_ref[last]).norm();
        assert!(err(&closed) < 0.75 * err(&open));
        let stiff = LqrWeights {
            terminal: 1e6,
            ..LqrWeights::default()
        };
        let sched = lqr_track(&atm, &spec, &ltv, &traj, &stiff).unwrap();
        let closed = propagate_model(&ltv, &sched.gains, &chi_ref, &mu, s, &(chi_ref[0] + kick));
        assert!(err(&closed) < 0.01 * err(&open));
    }

    #[test]
    fn hermite_reference_hits_nodes() {
        let (atm, spec, traj, ltv) = setup();
        let sched = lqr_track(&atm, &spec, &ltv, &traj, &LqrWeights::default()).unwrap();
        for k in [0, 7, 28] {
            let r = sched.reference_state(traj.node_time(k));
            assert!((r.p - traj.states[k].p).norm() < 1e-8);
            assert!((r.v - traj.states[k].v).norm() < 1e-8);
        }
        let on_ref = sched.reference_state(3.3);
        assert!((sched.command(3.3, &on_ref) - traj.input_at(3.3)).norm() < 1e-9);
    }
}
