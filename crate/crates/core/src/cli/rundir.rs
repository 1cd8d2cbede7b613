//! On-disk layout of a solve: the scenario, one CSV per player per round,
//! SCP histories, round index files, and a summary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};
use crate::ibr::{best_pursuer, Game, IbrIteration, IbrRecord, Player, RecordedWinner, Response, IBR_TOLERANCE};
use crate::scenario::{AtmosphereEntry, Scenario};
use crate::scp::{read_history_csv, write_history_csv, ScpStatus};
use crate::simulation::{read_samples_csv, trajectory_from_samples, trajectory_samples, write_samples_csv};
use crate::transcription::Trajectory;

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const ROUNDS_FILE: &str = "ibr.csv";
pub const FROBENIUS_FILE: &str = "frobenius.csv";
pub const RECORDED_FILE: &str = "recorded.csv";
pub const SUMMARY_FILE: &str = "summary.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoundRow {
    iteration: usize,
    player: String,
    status: ScpStatus,
    final_time: f64,
    scp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FrobeniusRow {
    iteration: usize,
    delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordedRow {
    iteration: usize,
    source_iteration: usize,
    player: String,
    final_time: f64,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedSummary {
    pub iteration: usize,
    pub source_iteration: usize,
    pub player: String,
    pub final_time: f64,
    pub terminal_speed: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub iteration: usize,
    pub evader_status: ScpStatus,
    pub evader_final_time: f64,
    pub pursuer_status: Vec<ScpStatus>,
    pub pursuer_final_time: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_pursuer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frobenius_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub iterations_completed: usize,
    pub pursuers: usize,
    pub no_winner_recorded: bool,
    /// First round from which the evader's change stays below the tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settled_at: Option<usize>,
    pub tolerance: f64,
    #[serde(default)]
    pub recorded: Vec<RecordedSummary>,
    #[serde(default)]
    pub rounds: Vec<RoundSummary>,
}

fn player_key(p: Player) -> String {
    match p {
        Player::Evader => "evader".into(),
        Player::Pursuer(j) => format!("pursuer_{j}"),
    }
}

fn parse_player(s: &str) -> Result<Player> {
    if s == "evader" {
        return Ok(Player::Evader);
    }
    s.strip_prefix("pursuer_")
        .and_then(|j| j.parse().ok())
        .map(Player::Pursuer)
        .ok_or_else(|| Error::Other(format!("unknown player '{s}' in run directory")))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    }
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if rows.is_empty() {
        w.write_record(header).map_err(csv_err(path))?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// A run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Creates the directory and stores a self-contained copy of the
    /// scenario; custom atmosphere tables are copied alongside.
    pub fn create(root: &Path, scenario: &Scenario) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let mut stored = scenario.clone();
        stored.output_dir = None;
        if let Some(a) = &scenario.atmosphere {
            let dir = root.join("atmosphere");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let copy = |p: &Path, name: &str| -> Result<PathBuf> {
                let src = if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    scenario.base_dir.join(p)
                };
                let dst = dir.join(name);
                std::fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
                Ok(Path::new("atmosphere").join(name))
            };
            stored.atmosphere = Some(AtmosphereEntry {
                density: copy(&a.density, "density.dat")?,
                speed_of_sound: copy(&a.speed_of_sound, "speed_of_sound.dat")?,
                drag_coeff: copy(&a.drag_coeff, "drag_coeff.dat")?,
            });
        }
        stored.base_dir = root.to_path_buf();
        let path = root.join(SCENARIO_FILE);
        std::fs::write(&path, stored.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(SCENARIO_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_path(&self.root.join(SCENARIO_FILE))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn iteration_dir(&self, i: usize) -> PathBuf {
        self.root.join("iterations").join(format!("{i:03}"))
    }

    pub fn trajectory_file(&self, i: usize, player: Player) -> PathBuf {
        self.iteration_dir(i).join(format!("{}.csv", player_key(player)))
    }

    fn history_file(&self, i: usize, player: Player) -> PathBuf {
        self.iteration_dir(i).join(format!("{}_scp.csv", player_key(player)))
    }

    fn recorded_file(n: usize, w: &RecordedWinner) -> String {
        format!("recorded/{n:02}_{}.csv", player_key(w.player))
    }

    pub fn has_rounds(&self) -> bool {
        self.path(ROUNDS_FILE).exists()
    }

    fn write_round_files(&self, atm: &AtmosphereModel, i: usize, players: &[(Player, &Response)]) -> Result<()> {
        let dir = self.iteration_dir(i);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (p, r) in players {
            write_samples_csv(&self.trajectory_file(i, *p), atm, &trajectory_samples(&r.trajectory))?;
            write_history_csv(&self.history_file(i, *p), &r.history)?;
        }
        Ok(())
    }

    /// Writes the initial guesses as round 0.
    pub fn write_initial(&self, atm: &AtmosphereModel, record: &IbrRecord) -> Result<()> {
        let dir = self.iteration_dir(0);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_samples_csv(
            &self.trajectory_file(0, Player::Evader),
            atm,
            &trajectory_samples(&record.initial_evader),
        )?;
        for (j, t) in record.initial_pursuers.iter().enumerate() {
            write_samples_csv(&self.trajectory_file(0, Player::Pursuer(j)), atm, &trajectory_samples(t))?;
        }
        Ok(())
    }

    /// Writes the latest round's trajectories, then rewrites the index files
    /// and the summary so a crash leaves at most an unindexed round behind.
    pub fn write_latest(&self, atm: &AtmosphereModel, scenario_name: &str, record: &IbrRecord) -> Result<()> {
        let it = record
            .iterations
            .last()
            .ok_or_else(|| Error::Other("no rounds to write".into()))?;
        let mut players: Vec<(Player, &Response)> = vec![(Player::Evader, &it.evader)];
        players.extend(it.pursuers.iter().enumerate().map(|(j, r)| (Player::Pursuer(j), r)));
        self.write_round_files(atm, it.iteration, &players)?;

        let recorded_dir = self.path("recorded");
        if !record.recorded_winners.is_empty() {
            std::fs::create_dir_all(&recorded_dir).map_err(|e| Error::io(&recorded_dir, e))?;
        }
        let mut recorded = Vec::new();
        for (n, w) in record.recorded_winners.iter().enumerate() {
            let file = Self::recorded_file(n, w);
            write_samples_csv(&self.path(&file), atm, &trajectory_samples(&w.trajectory))?;
            recorded.push(RecordedRow {
                iteration: w.iteration,
                source_iteration: w.source_iteration,
                player: player_key(w.player),
                final_time: w.trajectory.final_time,
                file,
            });
        }
        write_rows(
            &self.path(RECORDED_FILE),
            &["iteration", "source_iteration", "player", "final_time", "file"],
            &recorded,
        )?;
        let frob: Vec<FrobeniusRow> = record
            .frobenius_deltas
            .iter()
            .enumerate()
            .map(|(j, d)| FrobeniusRow {
                iteration: j + 2,
                delta: *d,
            })
            .collect();
        write_rows(&self.path(FROBENIUS_FILE), &["iteration", "delta"], &frob)?;
        let rounds: Vec<RoundRow> = record
            .iterations
            .iter()
            .flat_map(|it| {
                std::iter::once((Player::Evader, &it.evader))
                    .chain(it.pursuers.iter().enumerate().map(|(j, r)| (Player::Pursuer(j), r)))
                    .map(|(p, r)| RoundRow {
                        iteration: it.iteration,
                        player: player_key(p),
                        status: r.status,
                        final_time: r.trajectory.final_time,
                        scp_iterations: r.history.len(),
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        write_rows(
            &self.path(ROUNDS_FILE),
            &["iteration", "player", "status", "final_time", "scp_iterations"],
            &rounds,
        )?;
        let summary = summarize(scenario_name, record);
        let path = self.path(SUMMARY_FILE);
        let text = toml::to_string_pretty(&summary).map_err(|e| Error::Other(format!("summary: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let path = self.path(SUMMARY_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path,
            line: 0,
            msg: e.message().to_string(),
        })
    }

    fn read_trajectory(&self, path: &Path, converged: bool) -> Result<Trajectory> {
        trajectory_from_samples(&read_samples_csv(path)?, converged)
    }

    /// Rebuilds the record from the indexed rounds.
    pub fn load_record(&self, game: &Game) -> Result<IbrRecord> {
        let initial_evader = self.read_trajectory(&self.trajectory_file(0, Player::Evader), false)?;
        let initial_pursuers = (0..game.pursuers.len())
            .map(|j| self.read_trajectory(&self.trajectory_file(0, Player::Pursuer(j)), false))
            .collect::<Result<Vec<_>>>()?;
        let mut record = IbrRecord::new(initial_evader, initial_pursuers);
        let rows: Vec<RoundRow> = read_rows(&self.path(ROUNDS_FILE))?;
        let rounds = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
        for i in 1..=rounds {
            let load = |p: Player| -> Result<Response> {
                let key = player_key(p);
                let row = rows
                    .iter()
                    .find(|r| r.iteration == i && r.player == key)
                    .ok_or_else(|| Error::Other(format!("round {i} has no entry for {key}")))?;
                let converged = row.status == ScpStatus::Converged;
                Ok(Response {
                    trajectory: self.read_trajectory(&self.trajectory_file(i, p), converged)?,
                    status: row.status,
                    history: read_history_csv(&self.history_file(i, p))?,
                    notes: Vec::new(),
                })
            };
            let pursuers = (0..game.pursuers.len())
                .map(|j| load(Player::Pursuer(j)))
                .collect::<Result<Vec<_>>>()?;
            let best_pursuer = if pursuers.is_empty() {
                None
            } else {
                let (j, t, _) = best_pursuer(&pursuers)?;
                Some((j, t))
            };
            record.iterations.push(IbrIteration {
                iteration: i,
                pursuers,
                best_pursuer,
                evader: load(Player::Evader)?,
            });
        }
        let frob: Vec<FrobeniusRow> = read_rows(&self.path(FROBENIUS_FILE))?;
        record.frobenius_deltas = frob.iter().map(|r| r.delta).collect();
        let recorded: Vec<RecordedRow> = read_rows(&self.path(RECORDED_FILE))?;
        for r in recorded {
            let player = parse_player(&r.player)?;
            record.recorded_winners.push(RecordedWinner {
                iteration: r.iteration,
                source_iteration: r.source_iteration,
                player,
                trajectory: self.read_trajectory(&self.path(&r.file), true)?,
            });
        }
        Ok(record)
    }

    /// Recorded evader trajectories with their summary rows.
    pub fn recorded_evaders(&self) -> Result<Vec<(RecordedSummary, Trajectory)>> {
        let summary = self.summary()?;
        summary
            .recorded
            .into_iter()
            .filter(|r| r.player == "evader")
            .map(|r| {
                let t = self.read_trajectory(&self.path(&r.file), true)?;
                Ok((r, t))
            })
            .collect()
    }
}

pub fn summarize(scenario_name: &str, record: &IbrRecord) -> RunSummary {
    let recorded = record
        .recorded_winners
        .iter()
        .enumerate()
        .map(|(n, w)| RecordedSummary {
            iteration: w.iteration,
            source_iteration: w.source_iteration,
            player: player_key(w.player),
            final_time: w.trajectory.final_time,
            terminal_speed: w.trajectory.terminal().speed(),
            file: RunDir::recorded_file(n, w),
        })
        .collect();
    let rounds = record
        .iterations
        .iter()
        .map(|it| RoundSummary {
            iteration: it.iteration,
            evader_status: it.evader.status,
            evader_final_time: it.evader.trajectory.final_time,
            pursuer_status: it.pursuers.iter().map(|r| r.status).collect(),
            pursuer_final_time: it.pursuers.iter().map(|r| r.trajectory.final_time).collect(),
            best_pursuer: it.best_pursuer.map(|(j, _)| j),
            frobenius_delta: it.iteration.checked_sub(2).and_then(|j| record.frobenius_deltas.get(j).copied()),
        })
        .collect();
    RunSummary {
        scenario: scenario_name.to_string(),
        iterations_completed: record.iterations.len(),
        pursuers: record.initial_pursuers.len(),
        no_winner_recorded: record.recorded_winners.is_empty(),
        settled_at: record.settled_at(IBR_TOLERANCE),
        tolerance: IBR_TOLERANCE,
        recorded,
        rounds,
    }
}
