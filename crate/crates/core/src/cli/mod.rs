//! Batch commands behind the `ibrscp` binary: solve, verify, report.

mod report;
mod rundir;
mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::STANDARD_GRAVITY;
use crate::error::{Error, Result};
use crate::ibr::{ibr_continue, initial_guesses, IbrRecord};
use crate::scenario::Scenario;
use crate::simulation::{
    lqr_track, simulate_closed_loop, verify_open_loop, write_samples_csv, EngagementResult, GuidanceKind,
    GuidanceLaw,
};
use crate::transcription::{discretize_trajectory, Trajectory};

pub use report::report;
pub use rundir::{summarize, RecordedSummary, RoundSummary, RunDir, RunSummary};

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub out: Option<PathBuf>,
    pub ibr_iterations: Option<usize>,
    pub scp_iterations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub run_dir: PathBuf,
    pub record: IbrRecord,
    pub summary: RunSummary,
    pub resumed_from: usize,
}

/// Default run directory for a scenario.
pub fn default_run_dir(scenario: &Scenario) -> PathBuf {
    scenario
        .resolved_output_dir()
        .unwrap_or_else(|| Path::new("runs").join(&scenario.name))
}

/// Runs the game on a scenario file, resuming an existing run directory
/// from its last completed round.
pub fn solve(scenario_path: &Path, opts: &SolveOptions) -> Result<SolveOutcome> {
    let mut scenario = Scenario::from_path(scenario_path)?;
    if let Some(n) = opts.ibr_iterations {
        scenario.algorithm.ibr_iterations = n;
    }
    if let Some(n) = opts.scp_iterations {
        scenario.algorithm.scp_iterations = n;
    }
    scenario.validate()?;
    let root = opts.out.clone().unwrap_or_else(|| default_run_dir(&scenario));
    solve_scenario(&scenario, &root)
}

pub fn solve_scenario(scenario: &Scenario, root: &Path) -> Result<SolveOutcome> {
    let started = Instant::now();
    let existing = RunDir::open(root).ok().filter(RunDir::has_rounds);
    let run = match existing {
        Some(run) => {
            let mut stored = run.scenario()?;
            let same = stored.game() == scenario.game()
                && stored.algorithm.weights == scenario.algorithm.weights
                && stored.algorithm.scp_iterations == scenario.algorithm.scp_iterations
                && stored.atmosphere_model()? == scenario.atmosphere_model()?;
            if !same {
                return Err(Error::validation(
                    "out",
                    format!("{} holds a run of a different scenario", root.display()),
                ));
            }
            stored.algorithm.ibr_iterations = scenario.algorithm.ibr_iterations;
            stored.verification = scenario.verification.clone();
            RunDir::create(root, &stored)?
        }
        None => RunDir::create(root, scenario)?,
    };
    let scenario = run.scenario()?;
    let atm = scenario.atmosphere_model()?;
    let game = scenario.game();
    let mut record = if run.has_rounds() {
        run.load_record(&game)?
    } else {
        let (e0, p0) = initial_guesses(&game)?;
        let record = IbrRecord::new(e0, p0);
        run.write_initial(&atm, &record)?;
        record
    };
    let resumed_from = record.iterations.len();
    if resumed_from > 0 {
        log::info!("resuming {} after round {resumed_from}", root.display());
    }
    let settings = scenario.ibr_settings();
    let name = scenario.name.clone();
    ibr_continue(&atm, &game, &mut record, &settings, &mut |r| {
        run.write_latest(&atm, &name, r)
    })?;
    if record.iterations.is_empty() {
        return Err(Error::Other("no rounds were run".into()));
    }
    run.write_latest(&atm, &name, &record)?;
    log::info!("solve finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(SolveOutcome {
        run_dir: root.to_path_buf(),
        summary: summarize(&name, &record),
        record,
        resumed_from,
    })
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub laws: Option<Vec<GuidanceKind>>,
    pub ratios: Option<Vec<f64>>,
    pub closed_loop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OpenLoop,
    ClosedLoop,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::OpenLoop => "open_loop",
            Mode::ClosedLoop => "closed_loop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRun {
    /// Index into the run's recorded winners.
    pub recorded: usize,
    pub source_iteration: usize,
    pub mode: Mode,
    pub outcome: String,
    pub instances: usize,
    pub intercepts: usize,
    pub min_separation: f64,
    pub terminal_miss: f64,
    pub arrival_time: f64,
    /// Largest applied evader acceleration component, G.
    pub max_input_g: f64,
    /// Largest planned evader acceleration component, G.
    pub reference_max_input_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub scenario: String,
    pub laws: Vec<String>,
    pub runs: Vec<VerificationRun>,
}

/// One row of `verification/engagements.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRow {
    pub recorded: usize,
    pub mode: Mode,
    pub pursuer: usize,
    pub law: GuidanceKind,
    pub ratio: f64,
    pub min_separation: f64,
    pub closest_approach_time: f64,
    pub intercepted: bool,
    pub outcome: String,
}

pub const VERIFICATION_DIR: &str = "verification";

fn max_component_g(inputs: impl Iterator<Item = nalgebra::Vector3<f64>>) -> f64 {
    inputs.map(|u| u.amax()).fold(0.0, f64::max) / STANDARD_GRAVITY
}

fn write_engagement(dir: &Path, atm: &crate::atmosphere::AtmosphereModel, res: &EngagementResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_samples_csv(&dir.join("evader.csv"), atm, &res.evader)?;
    for p in &res.pursuers {
        let name = format!("pursuer_{}_{}_{}.csv", p.pursuer, p.law.kind.as_str(), p.law.ratio);
        write_samples_csv(&dir.join(name), atm, &p.samples)?;
    }
    Ok(())
}

/// Replays every recorded evader against the guided pursuers, optionally
/// also under LQR tracking.
pub fn verify(run_dir: &Path, opts: &VerifyOptions) -> Result<VerificationSummary> {
    let run = RunDir::open(run_dir)?;
    let scenario = run.scenario()?;
    let atm = scenario.atmosphere_model()?;
    let game = scenario.game();
    let v = &scenario.verification;
    let kinds = opts.laws.clone().unwrap_or_else(|| v.laws.clone());
    let ratios = opts.ratios.clone().unwrap_or_else(|| v.ratios.clone());
    if kinds.is_empty() || ratios.is_empty() {
        return Err(Error::validation("laws", "at least one law and one ratio required"));
    }
    let laws = GuidanceLaw::sweep(&kinds, &ratios)?;
    let summary = run.summary()?;
    let evaders = run.recorded_evaders()?;
    if evaders.is_empty() {
        log::warn!("{}: no recorded evader to verify", run_dir.display());
    }
    let out = run.path(VERIFICATION_DIR);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut runs = Vec::new();
    let mut rows_out = Vec::new();
    for (n, (rec, traj)) in evaders.iter().enumerate() {
        let recorded = summary.recorded.iter().position(|r| r == rec).unwrap_or(n);
        let mut modes: Vec<(Mode, EngagementResult)> = vec![(
            Mode::OpenLoop,
            verify_open_loop(&atm, &game, traj, &laws, &v.engagement)?,
        )];
        if opts.closed_loop {
            modes.push((Mode::ClosedLoop, closed_loop(&scenario, traj, &laws)?));
        }
        for (mode, res) in modes {
            write_engagement(&out.join(format!("recorded_{recorded:02}_{}", mode.as_str())), &atm, &res)?;
            for p in &res.pursuers {
                rows_out.push(EngagementRow {
                    recorded,
                    mode,
                    pursuer: p.pursuer,
                    law: p.law.kind,
                    ratio: p.law.ratio,
                    min_separation: p.min_separation,
                    closest_approach_time: p.closest_approach_time,
                    intercepted: p.intercepted,
                    outcome: res.outcome.as_str().into(),
                });
            }
            let min_sep = res.pursuers.iter().map(|p| p.min_separation).fold(f64::INFINITY, f64::min);
            log::info!(
                "recorded {recorded} {}: {} with {} of {} intercepts, asset miss {:.2} ft",
                mode.as_str(),
                res.outcome.as_str(),
                res.intercepts(),
                res.pursuers.len(),
                res.terminal_miss
            );
            runs.push(VerificationRun {
                recorded,
                source_iteration: rec.source_iteration,
                mode,
                outcome: res.outcome.as_str().into(),
                instances: res.pursuers.len(),
                intercepts: res.intercepts(),
                min_separation: min_sep,
                terminal_miss: res.terminal_miss,
                arrival_time: res.arrival_time,
                max_input_g: max_component_g(res.evader.iter().map(|s| s.input)),
                reference_max_input_g: max_component_g(traj.inputs.iter().copied()),
            });
        }
    }
    let path = out.join("engagements.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Other(format!("{}: {e}", path.display())))?;
    if rows_out.is_empty() {
        w.write_record([
            "recorded",
            "mode",
            "pursuer",
            "law",
            "ratio",
            "min_separation",
            "closest_approach_time",
            "intercepted",
            "outcome",
        ])
        .map_err(|e| Error::Other(e.to_string()))?;
    }
    for row in &rows_out {
        w.serialize(row).map_err(|e| Error::Other(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let result = VerificationSummary {
        scenario: scenario.name.clone(),
        laws: laws.iter().map(|l| l.to_string()).collect(),
        runs,
    };
    let path = out.join("summary.toml");
    let text = toml::to_string_pretty(&result).map_err(|e| Error::Other(format!("verification summary: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(result)
}

/// LQR-tracked engagement for one planned evader trajectory.
pub fn closed_loop(scenario: &Scenario, traj: &Trajectory, laws: &[GuidanceLaw]) -> Result<EngagementResult> {
    let atm = scenario.atmosphere_model()?;
    let game = scenario.game();
    let v = &scenario.verification;
    let (ltv, _) = discretize_trajectory(&atm, &game.evader, traj, game.params.substeps)?;
    let schedule = lqr_track(&atm, &game.evader, &ltv, traj, &v.lqr)?;
    simulate_closed_loop(&atm, &game, &schedule, v.headroom, laws, &v.engagement)
}
