//! Penalized-trust-region sequential convex programming for one player's
//! best response.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::conic::{ConicBackend, InteriorPoint, Status};
use crate::dynamics::PlayerSpec;
use crate::error::{Error, Result};
use crate::transcription::{
    assemble_evader_subproblem, assemble_pursuer_subproblem, GameParams, Subproblem, SubproblemWeights, Trajectory,
};

/// Default iteration cap.
pub const DEFAULT_SCP_ITERATIONS: usize = 20;

/// Which player's problem is solved and against what.
#[derive(Debug, Clone, Copy)]
pub enum ScpProblem<'a> {
    Evader {
        pursuers: &'a [Trajectory],
        asset: Vector3<f64>,
    },
    Pursuer {
        index: usize,
        evader: &'a Trajectory,
    },
}

impl ScpProblem<'_> {
    pub fn label(&self) -> String {
        match self {
            ScpProblem::Evader { .. } => "evader".into(),
            ScpProblem::Pursuer { index, .. } => format!("pursuer {index}"),
        }
    }

    fn assemble(
        &self,
        atm: &AtmosphereModel,
        spec: &PlayerSpec,
        nominal: &Trajectory,
        params: &GameParams,
        weights: &SubproblemWeights,
    ) -> Result<Subproblem> {
        match self {
            ScpProblem::Evader { pursuers, asset } => {
                assemble_evader_subproblem(atm, spec, nominal, pursuers, asset, params, weights)
            }
            ScpProblem::Pursuer { evader, .. } => assemble_pursuer_subproblem(atm, spec, nominal, evader, params, weights),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScpSettings {
    pub max_iterations: usize,
    pub weights: SubproblemWeights,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_SCP_ITERATIONS,
            weights: SubproblemWeights::default(),
        }
    }
}

/// How an SCP run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScpStatus {
    Converged,
    IterationLimit,
    /// A subproblem was reported infeasible.
    Infeasible,
    /// The pursuer's time window is empty before any solve.
    StructurallyInfeasible,
    NumericalError,
}

impl ScpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScpStatus::Converged => "converged",
            ScpStatus::IterationLimit => "iteration_limit",
            ScpStatus::Infeasible => "infeasible",
            ScpStatus::StructurallyInfeasible => "structurally_infeasible",
            ScpStatus::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpIteration {
    pub iteration: usize,
    pub objective: f64,
    #[serde(rename = "J_vc")]
    pub j_vc: f64,
    #[serde(rename = "J_tr")]
    pub j_tr: f64,
    /// Final time of the iterate, s.
    pub final_time: f64,
    pub status: Status,
    pub approximate: bool,
}

#[derive(Debug, Clone)]
pub struct ScpResult {
    /// The last iterate, or the nominal when no subproblem produced one.
    pub trajectory: Trajectory,
    pub status: ScpStatus,
    pub history: Vec<ScpIteration>,
    pub notes: Vec<String>,
}

impl ScpResult {
    pub fn converged(&self) -> bool {
        self.status == ScpStatus::Converged
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        write_history_csv(path, &self.history)
    }
}

/// Writes `iteration,objective,J_vc,J_tr,final_time,status,approximate`.
pub fn write_history_csv(path: &Path, history: &[ScpIteration]) -> Result<()> {
    let err = |e: csv::Error| Error::Other(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    if history.is_empty() {
        w.write_record(["iteration", "objective", "J_vc", "J_tr", "final_time", "status", "approximate"])
            .map_err(err)?;
    }
    for h in history {
        w.serialize(h).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history_csv(path: &Path) -> Result<Vec<ScpIteration>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().map(|row| row.map_err(err)).collect()
}

pub(crate) fn status_str(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
        Status::MaxIter => "max_iter",
        Status::NumericalError => "numerical_error",
    }
}

/// Runs SCP from `nominal` until `J_vc ≤ ε_vc` and `J_tr ≤ ε_tr` hold at the
/// same iterate or the iteration cap is reached.
pub fn scp_solve(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    problem: ScpProblem<'_>,
    nominal: &Trajectory,
    params: &GameParams,
    settings: &ScpSettings,
) -> Result<ScpResult> {
    scp_solve_with(atm, spec, problem, nominal, params, settings, &InteriorPoint::default())
}

pub fn scp_solve_with(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    problem: ScpProblem<'_>,
    nominal: &Trajectory,
    params: &GameParams,
    settings: &ScpSettings,
    backend: &dyn ConicBackend,
) -> Result<ScpResult> {
    if settings.max_iterations == 0 {
        return Err(Error::validation("max_iterations", "must be at least 1"));
    }
    if nominal.nodes() != spec.nodes {
        return Err(Error::Dimension {
            expected: spec.nodes,
            got: nominal.nodes(),
        });
    }
    if !nominal.is_finite() {
        return Err(Error::Other("nominal trajectory is not finite".into()));
    }
    let label = problem.label();
    let w = &settings.weights;
    let mut current = nominal.clone();
    current.converged = false;
    let mut result = ScpResult {
        trajectory: current.clone(),
        status: ScpStatus::IterationLimit,
        history: Vec::new(),
        notes: Vec::new(),
    };
    for it in 1..=settings.max_iterations {
        let sub = match problem.assemble(atm, spec, &current, params, w) {
            Ok(s) => s,
            Err(Error::StructurallyInfeasible { bound, lower }) => {
                result.status = ScpStatus::StructurallyInfeasible;
                result.notes.push(format!(
                    "iteration {it}: time bound {bound:.3} s at or below lower bound {lower:.3} s"
                ));
                break;
            }
            Err(e) => {
                result.status = ScpStatus::NumericalError;
                result.notes.push(format!("iteration {it}: {e}"));
                break;
            }
        };
        for n in &sub.notes {
            result.notes.push(format!("iteration {it}: {n}"));
        }
        let sol = match backend.solve(&sub.problem) {
            Ok(s) => s,
            Err(e) => {
                result.status = ScpStatus::NumericalError;
                result.notes.push(format!("iteration {it}: {e}"));
                break;
            }
        };
        match sol.status {
            Status::Infeasible => {
                result.history.push(ScpIteration {
                    iteration: it,
                    objective: f64::NAN,
                    j_vc: f64::NAN,
                    j_tr: f64::NAN,
                    final_time: current.final_time,
                    status: sol.status,
                    approximate: sol.approximate,
                });
                result.status = ScpStatus::Infeasible;
                result.notes.push(format!("iteration {it}: subproblem infeasible"));
                break;
            }
            _ if !sol.is_usable() => {
                result.history.push(ScpIteration {
                    iteration: it,
                    objective: f64::NAN,
                    j_vc: f64::NAN,
                    j_tr: f64::NAN,
                    final_time: current.final_time,
                    status: sol.status,
                    approximate: sol.approximate,
                });
                result.status = ScpStatus::NumericalError;
                result.notes.push(format!(
                    "iteration {it}: solver returned {} after {} iterations",
                    status_str(sol.status),
                    sol.iterations
                ));
                break;
            }
            _ => {}
        }
        let next = sub.extract(&sol.x);
        if !next.is_finite() {
            result.status = ScpStatus::NumericalError;
            result.notes.push(format!("iteration {it}: non-finite iterate"));
            break;
        }
        let j_vc = sub.virtual_control_cost(&sol.x);
        let j_tr = sub.trust_cost(&sol.x);
        log::debug!(
            "{label} scp {it}: T = {:.4} J = {:.6e} J_vc = {j_vc:.3e} J_tr = {j_tr:.3e} ({}, {} ipm its)",
            next.final_time,
            sol.objective,
            status_str(sol.status),
            sol.iterations
        );
        result.history.push(ScpIteration {
            iteration: it,
            objective: sol.objective,
            j_vc,
            j_tr,
            final_time: next.final_time,
            status: sol.status,
            approximate: sol.approximate,
        });
        current = next;
        if j_vc <= w.eps_vc && j_tr <= w.eps_tr {
            result.status = ScpStatus::Converged;
            break;
        }
    }
    current.converged = result.status == ScpStatus::Converged;
    result.trajectory = current;
    Ok(result)
}
