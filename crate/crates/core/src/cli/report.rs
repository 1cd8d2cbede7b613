use std::path::{Path, PathBuf};

use super::rundir::RunDir;
use super::svg::{data_csv, render, Panel, Series, PALETTE};
use super::VERIFICATION_DIR;
use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{mach, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::ibr::{IbrRecord, IBR_TOLERANCE};
use crate::simulation::{read_samples_csv, Sample};
use crate::transcription::Trajectory;

const EVADER: &str = "#d62728";
const PURSUER: &str = "#1f77b4";
const AXES: [&str; 3] = ["x", "y", "z"];

fn xy(samples: &[Sample], a: usize, b: usize) -> Vec<(f64, f64)> {
    samples.iter().map(|s| (s.state.p[a], s.state.p[b])).collect()
}

fn nodes(t: &Trajectory) -> Vec<Sample> {
    crate::simulation::trajectory_samples(t)
}

fn grey(i: usize, n: usize) -> String {
    let level = 200 - (150 * i / n.max(1)) as u8;
    format!("#{level:02x}{level:02x}{level:02x}")
}

fn iterations_figure(record: &IbrRecord) -> Vec<Panel> {
    let n = record.iterations.len();
    let mut panels = Vec::new();
    for (a, b, title) in [(0, 2, "downrange vs altitude"), (0, 1, "downrange vs crossrange")] {
        let mut p = Panel::new(title, &format!("{} (ft)", AXES[a]), &format!("{} (ft)", AXES[b]));
        p = p.with(Series::new("initial evader", xy(&nodes(&record.initial_evader), a, b), "#999999").dashed());
        for it in &record.iterations {
            let last = it.iteration == n;
            let (label, color) = if last {
                (format!("evader round {}", it.iteration), EVADER.to_string())
            } else {
                (String::new(), grey(it.iteration, n))
            };
            p = p.with(Series::new(label, xy(&nodes(&it.evader.trajectory), a, b), &color));
            for (j, r) in it.pursuers.iter().enumerate() {
                let label = if last { format!("pursuer {j} round {}", it.iteration) } else { String::new() };
                let color = if last { PALETTE[1 + j % 7].to_string() } else { grey(it.iteration, n) };
                p = p.with(Series::new(label, xy(&nodes(&r.trajectory), a, b), &color).dashed());
            }
        }
        panels.push(p);
    }
    panels
}

/// The evader to plot (the latest recorded one, else the last round's) and
/// the pursuers it faced.
fn subject(record: &IbrRecord) -> Result<(String, Trajectory, Vec<Trajectory>)> {
    if let Some(w) = record.recorded_evader() {
        let faced = record
            .iterations
            .iter()
            .find(|it| it.iteration == w.iteration)
            .map(|it| it.pursuers.iter().map(|r| r.trajectory.clone()).collect())
            .unwrap_or_default();
        return Ok((
            format!("recorded evader (round {})", w.source_iteration),
            w.trajectory.clone(),
            faced,
        ));
    }
    let it = record
        .iterations
        .last()
        .ok_or_else(|| Error::Other("run has no rounds".into()))?;
    Ok((
        format!("evader (round {})", it.iteration),
        it.evader.trajectory.clone(),
        it.pursuers.iter().map(|r| r.trajectory.clone()).collect(),
    ))
}

fn projections_figure(label: &str, e: &Trajectory, ps: &[Trajectory]) -> Vec<Panel> {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| {
            let mut p = Panel::new(
                &format!("{}-{} projection", AXES[a], AXES[b]),
                &format!("{} (ft)", AXES[a]),
                &format!("{} (ft)", AXES[b]),
            )
            .with(Series::new(label, xy(&nodes(e), a, b), EVADER));
            for (j, t) in ps.iter().enumerate() {
                p = p.with(Series::new(format!("pursuer {j}"), xy(&nodes(t), a, b), PURSUER).dashed());
            }
            p
        })
        .collect()
}

fn states_figure(e: &Trajectory) -> Vec<Panel> {
    let s = nodes(e);
    let mut pos = Panel::new("position", "t (s)", "ft");
    let mut vel = Panel::new("velocity", "t (s)", "ft/s");
    for (i, axis) in AXES.iter().enumerate() {
        pos = pos.with(Series::new(*axis, s.iter().map(|x| (x.t, x.state.p[i])).collect(), PALETTE[i]));
        vel = vel.with(Series::new(*axis, s.iter().map(|x| (x.t, x.state.v[i])).collect(), PALETTE[i]));
    }
    vel = vel.with(Series::new("speed", s.iter().map(|x| (x.t, x.state.speed())).collect(), "#000000"));
    vec![pos, vel]
}

fn mach_figure(atm: &AtmosphereModel, e: &Trajectory, mach_min: f64) -> Vec<Panel> {
    let s = nodes(e);
    let m: Vec<(f64, f64)> = s.iter().map(|x| (x.t, mach(atm, &x.state))).collect();
    let cd: Vec<(f64, f64)> = m.iter().map(|&(t, mm)| (t, atm.drag_coeff.eval(mm))).collect();
    vec![
        Panel::new("Mach number", "t (s)", "M")
            .with(Series::new("evader", m, EVADER))
            .hline(mach_min, "M_min"),
        Panel::new("drag coefficient", "t (s)", "C_D").with(Series::new("evader", cd, EVADER)),
    ]
}

fn inputs_figure(e: &Trajectory, e_bound: f64, p: Option<(&Trajectory, f64)>) -> Vec<Panel> {
    let mut panels = Vec::new();
    let mut add = |title: &str, t: &Trajectory, bound: f64| {
        let s = nodes(t);
        let mut panel = Panel::new(title, "t (s)", "G")
            .hline(bound, "+u_max")
            .hline(-bound, "-u_max");
        for (i, axis) in AXES.iter().enumerate() {
            panel = panel.with(Series::new(
                format!("u_{axis}"),
                s.iter().map(|x| (x.t, x.input[i] / STANDARD_GRAVITY)).collect(),
                PALETTE[i],
            ));
        }
        panels.push(panel);
    };
    add("evader acceleration", e, e_bound);
    if let Some((t, b)) = p {
        add("fastest pursuer acceleration", t, b);
    }
    panels
}

fn frobenius_figure(record: &IbrRecord) -> Vec<Panel> {
    let pts = record
        .frobenius_deltas
        .iter()
        .enumerate()
        .map(|(j, d)| ((j + 2) as f64, d.max(1e-300).log10()))
        .collect();
    vec![Panel::new("evader change between rounds", "round", "log10 delta")
        .with(Series::new("delta", pts, EVADER))
        .hline(IBR_TOLERANCE.log10(), "tolerance")]
}

fn verification_figure(dir: &Path) -> Result<Vec<Panel>> {
    let mut panels = Vec::new();
    let mut runs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    runs.sort();
    for run in runs {
        let name = run.file_name().unwrap().to_string_lossy().to_string();
        let evader = read_samples_csv(&run.join("evader.csv"))?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&run)
            .map_err(|e| Error::io(&run, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("pursuer_"))
            })
            .collect();
        files.sort();
        for (a, b) in [(0, 2), (0, 1)] {
            let mut p = Panel::new(
                &format!("{name}: {}-{}", AXES[a], AXES[b]),
                &format!("{} (ft)", AXES[a]),
                &format!("{} (ft)", AXES[b]),
            )
            .with(Series::new("simulated evader", xy(&evader, a, b), EVADER));
            for f in &files {
                let s = read_samples_csv(f)?;
                p = p.with(Series::new("", xy(&s, a, b), PURSUER).dashed());
            }
            panels.push(p);
        }
    }
    Ok(panels)
}

/// Writes SVG figures and their plotted data under `report/`.
pub fn report(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let run = RunDir::open(run_dir)?;
    let scenario = run.scenario()?;
    run.summary()?;
    let atm = scenario.atmosphere_model()?;
    let game = scenario.game();
    let record = run.load_record(&game)?;
    let (label, e, ps) = subject(&record)?;
    let fastest = ps
        .iter()
        .zip(&game.pursuers)
        .min_by(|a, b| a.0.final_time.total_cmp(&b.0.final_time))
        .map(|(t, spec)| (t, spec.u_max));

    let mut figures: Vec<(&str, &str, Vec<Panel>, usize)> = vec![
        ("iterations", "trajectories by round", iterations_figure(&record), 2),
        ("projections", &label, projections_figure(&label, &e, &ps), 3),
        ("states", &label, states_figure(&e), 2),
        ("mach", &label, mach_figure(&atm, &e, game.evader.mach_min), 2),
        ("inputs", "commanded accelerations", inputs_figure(&e, game.evader.u_max, fastest), 2),
        ("frobenius", "round-to-round change", frobenius_figure(&record), 1),
    ];
    let vdir = run.path(VERIFICATION_DIR);
    if vdir.is_dir() {
        let panels = verification_figure(&vdir)?;
        if !panels.is_empty() {
            figures.push(("verification", "simulated engagements", panels, 2));
        }
    }
    let out = run.path("report");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written = Vec::new();
    for (name, title, panels, cols) in figures {
        let svg = out.join(format!("{name}.svg"));
        std::fs::write(&svg, render(title, &panels, cols)).map_err(|e| Error::io(&svg, e))?;
        let csv = out.join(format!("{name}.csv"));
        std::fs::write(&csv, data_csv(&panels)).map_err(|e| Error::io(&csv, e))?;
        written.push(svg);
        written.push(csv);
    }
    Ok(written)
}
