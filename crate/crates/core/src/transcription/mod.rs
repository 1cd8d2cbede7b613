//! Free-final-time optimal control problems transcribed into convex
//! subproblems about a nominal trajectory.

mod assemble;
mod convexify;
mod discretize;
mod trajectory;

pub use assemble::{
    assemble_evader_subproblem, assemble_pursuer_subproblem, GameParams, Layout, Subproblem, SubproblemWeights,
};
pub use convexify::{capture_constraint, convexify_evasion, convexify_min_mach, StateRow, MIN_SPEED_FOR_MACH_ROW};
pub use discretize::{discretize_foh, LtvModel, ScaledDynamics, DEFAULT_SUBSTEPS};
pub use trajectory::Trajectory;

use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{PlayerModel, PlayerSpec, ScaledVars};
use crate::error::Result;

/// Discretizes the player's dynamics about a physical nominal trajectory.
pub fn discretize_trajectory(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    nominal: &Trajectory,
    substeps: usize,
) -> Result<(LtvModel, ScaledVars)> {
    let scaling = ScaledVars::for_player(spec);
    let model = PlayerModel::new(atm, spec, &scaling);
    let chi = nominal.scaled_states(&scaling);
    let mu = nominal.scaled_inputs(&scaling);
    let ltv = discretize_foh(&model, &chi, &mu, scaling.time(nominal.final_time), substeps)?;
    Ok((ltv, scaling))
}
