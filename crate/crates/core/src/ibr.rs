//! Iterative best response: alternate pursuer and evader SCP solves and keep
//! a record of candidate winning strategies.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{PlayerSpec, CHAR_LENGTH, CHAR_SPEED};
use crate::error::{Error, Result};
use crate::scp::{scp_solve, ScpIteration, ScpProblem, ScpResult, ScpSettings, ScpStatus};
use crate::transcription::{GameParams, Trajectory};

/// Default number of best-response rounds.
pub const DEFAULT_IBR_ITERATIONS: usize = 20;

/// Tolerance under which the evader's change between rounds is reported as settled.
pub const IBR_TOLERANCE: f64 = 1e-2;

/// Everything the game loop needs about the players.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub evader: PlayerSpec,
    pub pursuers: Vec<PlayerSpec>,
    pub asset: Vector3<f64>,
    pub params: GameParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbrSettings {
    pub iterations: usize,
    pub scp: ScpSettings,
}

impl Default for IbrSettings {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_IBR_ITERATIONS,
            scp: ScpSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "index")]
pub enum Player {
    Evader,
    Pursuer(usize),
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::Evader => write!(f, "evader"),
            Player::Pursuer(i) => write!(f, "pursuer {i}"),
        }
    }
}

/// One player's best response within a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub trajectory: Trajectory,
    pub status: ScpStatus,
    pub history: Vec<ScpIteration>,
    pub notes: Vec<String>,
}

impl Response {
    pub fn converged(&self) -> bool {
        self.status == ScpStatus::Converged
    }
}

impl From<ScpResult> for Response {
    fn from(r: ScpResult) -> Self {
        Self {
            trajectory: r.trajectory,
            status: r.status,
            history: r.history,
            notes: r.notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbrIteration {
    pub iteration: usize,
    pub pursuers: Vec<Response>,
    /// Index into `pursuers` chosen to represent the team, with its final time.
    pub best_pursuer: Option<(usize, f64)>,
    pub evader: Response,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedWinner {
    /// Round in which the record rule fired.
    pub iteration: usize,
    /// Round that produced the trajectory.
    pub source_iteration: usize,
    pub player: Player,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbrRecord {
    pub initial_evader: Trajectory,
    pub initial_pursuers: Vec<Trajectory>,
    pub iterations: Vec<IbrIteration>,
    pub recorded_winners: Vec<RecordedWinner>,
    /// `‖E^i − E^{i−1}‖_F` in scaled units for `i ≥ 2`.
    pub frobenius_deltas: Vec<f64>,
}

impl IbrRecord {
    pub fn new(initial_evader: Trajectory, initial_pursuers: Vec<Trajectory>) -> Self {
        Self {
            initial_evader,
            initial_pursuers,
            iterations: Vec::new(),
            recorded_winners: Vec::new(),
            frobenius_deltas: Vec::new(),
        }
    }

    pub fn latest_evader(&self) -> &Trajectory {
        self.iterations
            .last()
            .map(|it| &it.evader.trajectory)
            .unwrap_or(&self.initial_evader)
    }

    pub fn latest_pursuers(&self) -> Vec<Trajectory> {
        match self.iterations.last() {
            Some(it) => it.pursuers.iter().map(|r| r.trajectory.clone()).collect(),
            None => self.initial_pursuers.clone(),
        }
    }

    fn latest_evader_converged(&self) -> bool {
        self.iterations.last().is_some_and(|it| it.evader.converged())
    }

    /// Most recent recorded evader trajectory.
    pub fn recorded_evader(&self) -> Option<&RecordedWinner> {
        self.recorded_winners.iter().rev().find(|w| w.player == Player::Evader)
    }

    /// First round after which every delta stays below `tol`.
    pub fn settled_at(&self, tol: f64) -> Option<usize> {
        let n = self.frobenius_deltas.len();
        let mut first = None;
        for j in (0..n).rev() {
            if self.frobenius_deltas[j] < tol {
                first = Some(j + 2);
            } else {
                break;
            }
        }
        first
    }
}

/// Frobenius norm of the node-wise state difference in scaled units.
pub fn frobenius_delta(prev: &Trajectory, curr: &Trajectory) -> Result<f64> {
    if prev.nodes() != curr.nodes() {
        return Err(Error::Dimension {
            expected: prev.nodes(),
            got: curr.nodes(),
        });
    }
    let mut sum = 0.0;
    for (a, b) in prev.states.iter().zip(&curr.states) {
        sum += ((a.p - b.p) / CHAR_LENGTH).norm_squared() + ((a.v - b.v) / CHAR_SPEED).norm_squared();
    }
    Ok(sum.sqrt())
}

/// The pursuer representing the team: the fastest converged one, or the
/// fastest overall when none converged. The flag tells whether it converged.
pub fn best_pursuer(results: &[Response]) -> Result<(usize, f64, bool)> {
    if results.is_empty() {
        return Err(Error::Other("best_pursuer needs at least one result".into()));
    }
    let pick = |only_converged: bool| {
        results
            .iter()
            .enumerate()
            .filter(|(_, r)| !only_converged || r.converged())
            .min_by(|a, b| a.1.trajectory.final_time.total_cmp(&b.1.trajectory.final_time))
            .map(|(i, r)| (i, r.trajectory.final_time))
    };
    match pick(true) {
        Some((i, t)) => Ok((i, t, true)),
        None => {
            let (i, t) = pick(false).unwrap();
            Ok((i, t, false))
        }
    }
}

/// Straight-line guess for a pursuer aimed at the point where it would meet
/// the evader's guess flying at its own initial speed, or at the evader's
/// initial position when no such point exists.
pub fn pursuer_initial_guess(spec: &PlayerSpec, evader_guess: &Trajectory) -> Result<Trajectory> {
    let speed = spec.initial.speed();
    let gap = |t: f64| (evader_guess.position_at(t) - spec.initial.p).norm() - speed * t;
    let horizon = evader_guess.final_time;
    let steps = 200;
    let mut target = None;
    let mut lo = 0.0;
    for j in 1..=steps {
        let hi = horizon * j as f64 / steps as f64;
        if gap(hi) <= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if gap(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            target = Some(evader_guess.position_at(b));
            break;
        }
        lo = hi;
    }
    let target = target.unwrap_or(evader_guess.states[0].p);
    Trajectory::straight_line(&spec.initial, &target, spec.nodes)
}

/// Straight-line guesses for every player.
pub fn initial_guesses(game: &Game) -> Result<(Trajectory, Vec<Trajectory>)> {
    let e = Trajectory::straight_line(&game.evader.initial, &game.asset, game.evader.nodes)?;
    let p = game
        .pursuers
        .iter()
        .map(|spec| pursuer_initial_guess(spec, &e))
        .collect::<Result<Vec<_>>>()?;
    Ok((e, p))
}

/// Runs `settings.iterations` rounds from the given guesses.
pub fn ibr_run(
    atm: &AtmosphereModel,
    game: &Game,
    evader0: Trajectory,
    pursuers0: Vec<Trajectory>,
    settings: &IbrSettings,
) -> Result<IbrRecord> {
    let mut record = IbrRecord::new(evader0, pursuers0);
    ibr_continue(atm, game, &mut record, settings, &mut |_| Ok(()))?;
    Ok(record)
}

/// Continues `record` until it holds `settings.iterations` rounds, calling
/// `on_iteration` after each one.
pub fn ibr_continue(
    atm: &AtmosphereModel,
    game: &Game,
    record: &mut IbrRecord,
    settings: &IbrSettings,
    on_iteration: &mut dyn FnMut(&IbrRecord) -> Result<()>,
) -> Result<()> {
    if settings.iterations == 0 {
        return Err(Error::validation("algorithm.n_ibr", "must be at least 1"));
    }
    if record.initial_pursuers.len() != game.pursuers.len() {
        return Err(Error::Dimension {
            expected: game.pursuers.len(),
            got: record.initial_pursuers.len(),
        });
    }
    while record.iterations.len() < settings.iterations {
        let i = record.iterations.len() + 1;
        let prev_e = record.latest_evader().clone();
        let prev_p = record.latest_pursuers();
        let prev_e_converged = record.latest_evader_converged();

        // (a) pursuers against E^{i−1}
        let pursuers: Vec<Response> = game
            .pursuers
            .par_iter()
            .zip(prev_p.par_iter())
            .enumerate()
            .map(|(j, (spec, nominal))| {
                let problem = ScpProblem::Pursuer {
                    index: j,
                    evader: &prev_e,
                };
                respond(atm, spec, problem, nominal, &game.params, &settings.scp)
            })
            .collect();
        for (j, r) in pursuers.iter().enumerate() {
            log::info!(
                "ibr {i}: pursuer {j} {} T = {:.3} s after {} scp iterations",
                r.status.as_str(),
                r.trajectory.final_time,
                r.history.len()
            );
            for n in &r.notes {
                log::debug!("ibr {i}: pursuer {j}: {n}");
            }
        }
        let best = if pursuers.is_empty() {
            None
        } else {
            let (j, t, _) = best_pursuer(&pursuers)?;
            Some((j, t))
        };
        let any_pursuer_converged = pursuers.iter().any(Response::converged);

        // (b) evader survived every pursuer response
        if !pursuers.is_empty() && !any_pursuer_converged && prev_e_converged {
            record.recorded_winners.push(RecordedWinner {
                iteration: i,
                source_iteration: i - 1,
                player: Player::Evader,
                trajectory: prev_e.clone(),
            });
            log::info!("ibr {i}: recorded evader from round {}", i - 1);
        }

        // (c) evader against P^i
        let p_traj: Vec<Trajectory> = pursuers.iter().map(|r| r.trajectory.clone()).collect();
        let problem = ScpProblem::Evader {
            pursuers: &p_traj,
            asset: game.asset,
        };
        let evader = respond(atm, &game.evader, problem, &prev_e, &game.params, &settings.scp);
        log::info!(
            "ibr {i}: evader {} T = {:.3} s after {} scp iterations",
            evader.status.as_str(),
            evader.trajectory.final_time,
            evader.history.len()
        );
        for n in &evader.notes {
            log::debug!("ibr {i}: evader: {n}");
        }

        // (d) a converged pursuer the evader could not answer
        if any_pursuer_converged && !evader.converged() {
            let (j, _, _) = best_pursuer(&pursuers)?;
            record.recorded_winners.push(RecordedWinner {
                iteration: i,
                source_iteration: i,
                player: Player::Pursuer(j),
                trajectory: pursuers[j].trajectory.clone(),
            });
            log::info!("ibr {i}: recorded pursuer {j}");
        }
        // no pursuers: the evader's answer goes unchallenged
        if pursuers.is_empty() && evader.converged() {
            record.recorded_winners.push(RecordedWinner {
                iteration: i,
                source_iteration: i,
                player: Player::Evader,
                trajectory: evader.trajectory.clone(),
            });
        }

        if i >= 2 {
            record
                .frobenius_deltas
                .push(frobenius_delta(&prev_e, &evader.trajectory)?);
        }
        record.iterations.push(IbrIteration {
            iteration: i,
            pursuers,
            best_pursuer: best,
            evader,
        });
        on_iteration(record)?;
    }
    Ok(())
}

fn respond(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    problem: ScpProblem<'_>,
    nominal: &Trajectory,
    params: &GameParams,
    settings: &ScpSettings,
) -> Response {
    match scp_solve(atm, spec, problem, nominal, params, settings) {
        Ok(r) => r.into(),
        Err(e) => {
            let mut trajectory = nominal.clone();
            trajectory.converged = false;
            Response {
                trajectory,
                status: ScpStatus::NumericalError,
                history: Vec::new(),
                notes: vec![e.to_string()],
            }
        }
    }
}
