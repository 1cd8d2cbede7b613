//! Fixed-step nonlinear simulation of engagements: open-loop playback of a
//! planned evader trajectory against guided pursuers, and LQR tracking.

mod guidance;
mod lqr;

use std::path::Path;

use nalgebra::{SVector, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{mach, state_deriv, PlayerSpec, State, CHAR_LENGTH};
use crate::error::{Error, Result};
use crate::ibr::Game;
use crate::transcription::Trajectory;

pub use guidance::{clip_input, pn_accel, GuidanceKind, GuidanceLaw};
pub use lqr::{lqr_track, propagate_model, simulate_closed_loop, GainSchedule, LqrWeights};

/// Default integration step, s.
pub const DEFAULT_DT: f64 = 0.01;

/// One simulated instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    /// Applied (clipped) acceleration command, ft/s².
    pub input: Vector3<f64>,
}

fn rk4_step<const D: usize>(
    x: &SVector<f64, D>,
    t: f64,
    dt: f64,
    f: &dyn Fn(f64, &SVector<f64, D>) -> SVector<f64, D>,
) -> SVector<f64, D> {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &(x + k1 * (0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(x + k2 * (0.5 * dt)));
    let k4 = f(t + dt, &(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Simulation(format!("step must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(Error::Simulation(format!("empty time span [{t0}, {t1}]")));
    }
    Ok(((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize)
}

/// RK4 integration of one body from `t0` to `t1` (rounded up to whole
/// steps). Commands are clipped to the player's box bound.
pub fn integrate(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    initial: &State,
    input: &dyn Fn(f64, &State) -> Vector3<f64>,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Vec<Sample>> {
    let (t0, t1) = t_span;
    let steps = step_count(t0, t1, dt)?;
    let bound = spec.accel_bound();
    let command = |t: f64, s: &State| clip_input(&input(t, s), bound);
    let f = |t: f64, x: &Vector6<f64>| {
        let s = State::from_vector(x);
        state_deriv(atm, &s, &command(t, &s), spec).to_vector()
    };
    let mut x = initial.to_vector();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(Sample {
        t: t0,
        state: *initial,
        input: command(t0, initial),
    });
    for j in 0..steps {
        let t = t0 + j as f64 * dt;
        x = rk4_step(&x, t, dt, &f);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("non-finite state at t = {:.4} s", t + dt)));
        }
        let s = State::from_vector(&x);
        let tn = t0 + (j + 1) as f64 * dt;
        out.push(Sample {
            t: tn,
            state: s,
            input: command(tn, &s),
        });
    }
    Ok(out)
}

/// Closest approach of the segment `a → b` to the origin: `(distance, fraction)`.
pub(crate) fn segment_min(a: &Vector3<f64>, b: &Vector3<f64>) -> (f64, f64) {
    let d = b - a;
    let dd = d.norm_squared();
    let s = if dd > 0.0 { (-a.dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    ((a + d * s).norm(), s)
}

/// Largest node position error when the trajectory's inputs are replayed
/// with first-order hold through the nonlinear dynamics from its first node.
/// The step is shortened so node times fall on step boundaries.
pub fn reintegration_error(atm: &AtmosphereModel, spec: &PlayerSpec, traj: &Trajectory, dt: f64) -> Result<f64> {
    let intervals = traj.nodes() - 1;
    let h = traj.final_time / intervals as f64;
    let per = (h / dt).ceil().max(1.0) as usize;
    let step = h / per as f64;
    let input = |t: f64, _: &State| traj.input_at(t);
    let samples = integrate(atm, spec, &traj.states[0], &input, (0.0, traj.final_time), step)?;
    Ok((0..=intervals)
        .map(|k| (samples[(k * per).min(samples.len() - 1)].state.p - traj.states[k].p).norm())
        .fold(0.0, f64::max))
}

/// Engagement label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    EvaderReachesAsset,
    PursuerIntercepts,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::EvaderReachesAsset => "evader_reaches_asset",
            Outcome::PursuerIntercepts => "pursuer_intercepts",
            Outcome::Timeout => "timeout",
        }
    }

    /// Labels an engagement from its distances: any separation within the
    /// capture radius is an intercept, otherwise an asset miss within the
    /// capture radius plus `asset_slack` is an arrival.
    pub fn adjudicate(min_separations: &[f64], terminal_miss: f64, capture_radius: f64, asset_slack: f64) -> Self {
        if min_separations.iter().any(|&d| d <= capture_radius) {
            Outcome::PursuerIntercepts
        } else if terminal_miss <= capture_radius + asset_slack {
            Outcome::EvaderReachesAsset
        } else {
            Outcome::Timeout
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngagementSettings {
    /// Integration step, s.
    pub dt: f64,
    /// Allowance on top of the capture radius for the evader's asset miss, ft.
    pub asset_slack: f64,
}

impl Default for EngagementSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            asset_slack: 0.01 * CHAR_LENGTH,
        }
    }
}

/// One guided pursuer instance.
#[derive(Debug, Clone)]
pub struct PursuerRun {
    pub pursuer: usize,
    pub law: GuidanceLaw,
    pub samples: Vec<Sample>,
    pub min_separation: f64,
    pub closest_approach_time: f64,
    pub intercepted: bool,
}

#[derive(Debug, Clone)]
pub struct EngagementResult {
    pub evader: Vec<Sample>,
    pub pursuers: Vec<PursuerRun>,
    /// Closest evader–asset distance up to arrival or the end of the run, ft.
    pub terminal_miss: f64,
    pub arrival_time: f64,
    pub outcome: Outcome,
}

impl EngagementResult {
    pub fn intercepts(&self) -> usize {
        self.pursuers.iter().filter(|p| p.intercepted).count()
    }
}

type EvaderInput<'a> = dyn Fn(f64, &State) -> Vector3<f64> + Sync + 'a;

/// Evader flight alone, stopped once the asset distance has reached a local
/// minimum within the arrival tolerance. Returns the samples, the miss, and
/// the time of closest approach.
fn fly_evader(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    asset: &Vector3<f64>,
    input: &EvaderInput<'_>,
    horizon: f64,
    tolerance: f64,
    dt: f64,
) -> Result<(Vec<Sample>, f64, f64)> {
    let steps = step_count(0.0, horizon, dt)?;
    let bound = spec.accel_bound();
    let f = |t: f64, x: &Vector6<f64>| {
        let s = State::from_vector(x);
        state_deriv(atm, &s, &clip_input(&input(t, &s), bound), spec).to_vector()
    };
    let mut x = spec.initial.to_vector();
    let mut samples = vec![Sample {
        t: 0.0,
        state: spec.initial,
        input: clip_input(&input(0.0, &spec.initial), bound),
    }];
    let (mut miss, mut when) = ((spec.initial.p - asset).norm(), 0.0);
    for j in 0..steps {
        let t = j as f64 * dt;
        let prev = samples.last().unwrap().state.p - asset;
        x = rk4_step(&x, t, dt, &f);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("non-finite evader state at t = {:.4} s", t + dt)));
        }
        let s = State::from_vector(&x);
        let tn = (j + 1) as f64 * dt;
        samples.push(Sample {
            t: tn,
            state: s,
            input: clip_input(&input(tn, &s), bound),
        });
        let next = s.p - asset;
        let (d, frac) = segment_min(&prev, &next);
        if d < miss {
            miss = d;
            when = t + frac * dt;
        }
        if miss <= tolerance && next.norm() > d {
            break;
        }
    }
    Ok((samples, miss, when))
}

/// A pursuer under `law` chasing the evader; both integrated together so the
/// guidance sees the evader at every RK4 stage.
fn chase(
    atm: &AtmosphereModel,
    evader: &PlayerSpec,
    input: &EvaderInput<'_>,
    pursuer: &PlayerSpec,
    law: &GuidanceLaw,
    steps: usize,
    dt: f64,
    capture_radius: f64,
) -> Result<(Vec<Sample>, f64, f64)> {
    let e_bound = evader.accel_bound();
    let p_bound = pursuer.accel_bound();
    let command = |t: f64, e: &State, p: &State| -> (Vector3<f64>, Vector3<f64>) {
        let u_e = clip_input(&input(t, e), e_bound);
        let a_e = state_deriv(atm, e, &u_e, evader).v;
        let u_p = pn_accel(p, e, &a_e, law, p_bound).unwrap_or_else(|_| Vector3::zeros());
        (u_e, u_p)
    };
    let f = |t: f64, x: &SVector<f64, 12>| {
        let e = State::from_vector(&x.fixed_rows::<6>(0).into_owned());
        let p = State::from_vector(&x.fixed_rows::<6>(6).into_owned());
        let (u_e, u_p) = command(t, &e, &p);
        let mut dx = SVector::<f64, 12>::zeros();
        dx.fixed_rows_mut::<6>(0).copy_from(&state_deriv(atm, &e, &u_e, evader).to_vector());
        dx.fixed_rows_mut::<6>(6).copy_from(&state_deriv(atm, &p, &u_p, pursuer).to_vector());
        dx
    };
    let mut x = SVector::<f64, 12>::zeros();
    x.fixed_rows_mut::<6>(0).copy_from(&evader.initial.to_vector());
    x.fixed_rows_mut::<6>(6).copy_from(&pursuer.initial.to_vector());
    let mut samples = vec![Sample {
        t: 0.0,
        state: pursuer.initial,
        input: command(0.0, &evader.initial, &pursuer.initial).1,
    }];
    let mut rel = evader.initial.p - pursuer.initial.p;
    let (mut min_sep, mut when) = (rel.norm(), 0.0);
    for j in 0..steps {
        let t = j as f64 * dt;
        x = rk4_step(&x, t, dt, &f);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("non-finite pursuer state at t = {:.4} s", t + dt)));
        }
        let e = State::from_vector(&x.fixed_rows::<6>(0).into_owned());
        let p = State::from_vector(&x.fixed_rows::<6>(6).into_owned());
        let tn = (j + 1) as f64 * dt;
        samples.push(Sample {
            t: tn,
            state: p,
            input: command(tn, &e, &p).1,
        });
        let next = e.p - p.p;
        let (d, frac) = segment_min(&rel, &next);
        if d < min_sep {
            min_sep = d;
            when = t + frac * dt;
        }
        rel = next;
        if min_sep <= capture_radius {
            break;
        }
    }
    Ok((samples, min_sep, when))
}

/// Runs every (pursuer, law) instance against an evader flying `input`.
/// The run ends at the evader's arrival or at `T_hi`.
pub(crate) fn run_engagement(
    atm: &AtmosphereModel,
    game: &Game,
    evader: &PlayerSpec,
    input: &EvaderInput<'_>,
    laws: &[GuidanceLaw],
    settings: &EngagementSettings,
) -> Result<EngagementResult> {
    let dt = settings.dt;
    let tolerance = game.params.capture_radius + settings.asset_slack;
    let (evader_samples, terminal_miss, arrival_time) =
        fly_evader(atm, evader, &game.asset, input, game.params.time_upper, tolerance, dt)?;
    let steps = evader_samples.len() - 1;
    let instances: Vec<(usize, GuidanceLaw)> = (0..game.pursuers.len())
        .flat_map(|i| laws.iter().map(move |l| (i, *l)))
        .collect();
    let pursuers = instances
        .par_iter()
        .map(|(i, law)| {
            let (samples, min_separation, closest_approach_time) = chase(
                atm,
                evader,
                input,
                &game.pursuers[*i],
                law,
                steps,
                dt,
                game.params.capture_radius,
            )?;
            Ok(PursuerRun {
                pursuer: *i,
                law: *law,
                samples,
                min_separation,
                closest_approach_time,
                intercepted: min_separation <= game.params.capture_radius,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seps: Vec<f64> = pursuers.iter().map(|p| p.min_separation).collect();
    let outcome = Outcome::adjudicate(&seps, terminal_miss, game.params.capture_radius, settings.asset_slack);
    Ok(EngagementResult {
        evader: evader_samples,
        pursuers,
        terminal_miss,
        arrival_time,
        outcome,
    })
}

/// Replays the evader's planned inputs open loop (first-order hold between
/// nodes, last node held afterwards) against every pursuer under every law.
pub fn verify_open_loop(
    atm: &AtmosphereModel,
    game: &Game,
    evader: &Trajectory,
    laws: &[GuidanceLaw],
    settings: &EngagementSettings,
) -> Result<EngagementResult> {
    let input = |t: f64, _: &State| evader.input_at(t);
    run_engagement(atm, game, &game.evader, &input, laws, settings)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    p_x: f64,
    p_y: f64,
    p_z: f64,
    v_x: f64,
    v_y: f64,
    v_z: f64,
    u_x: f64,
    u_y: f64,
    u_z: f64,
    #[serde(rename = "Mach")]
    mach: f64,
}

/// Node samples of a planned trajectory.
pub fn trajectory_samples(traj: &Trajectory) -> Vec<Sample> {
    (0..traj.nodes())
        .map(|k| Sample {
            t: traj.node_time(k),
            state: traj.states[k],
            input: traj.inputs[k],
        })
        .collect()
}

/// Writes `t,p_x,p_y,p_z,v_x,v_y,v_z,u_x,u_y,u_z,Mach`.
pub fn write_samples_csv(path: &Path, atm: &AtmosphereModel, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in samples {
        w.serialize(CsvRow {
            t: s.t,
            p_x: s.state.p.x,
            p_y: s.state.p.y,
            p_z: s.state.p.z,
            v_x: s.state.v.x,
            v_y: s.state.v.y,
            v_z: s.state.v.z,
            u_x: s.input.x,
            u_y: s.input.y,
            u_z: s.input.z,
            mach: mach(atm, &s.state),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Sample>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_error(path, e))?;
            Ok(Sample {
                t: row.t,
                state: State::new([row.p_x, row.p_y, row.p_z], [row.v_x, row.v_y, row.v_z]),
                input: Vector3::new(row.u_x, row.u_y, row.u_z),
            })
        })
        .collect()
}

/// Rebuilds a planned trajectory from its node samples.
pub fn trajectory_from_samples(samples: &[Sample], converged: bool) -> Result<Trajectory> {
    let last = samples
        .last()
        .ok_or_else(|| Error::Other("trajectory file has no rows".into()))?;
    let mut traj = Trajectory::new(
        samples.iter().map(|s| s.state).collect(),
        samples.iter().map(|s| s.input).collect(),
        last.t,
    )?;
    traj.converged = converged;
    Ok(traj)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}
