//! Command-line front end: `simulate`, `replay` and `check-gains`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{Mode, ObserverSelection, RunConfig};
use crate::error::{Error, Result};
use crate::observer_const::{check_gains, FeasibilityReport};
use crate::replay::{run_replay, ReplayRun};
use crate::sim::{simulate_with, FinalState, ObserverKind};
use crate::trace::{read_sensor_log_path, ReplayTraceWriter, SensorLogWriter, SimTraceWriter};
use crate::replay::SensorLogRow;

#[derive(Debug, Parser)]
#[command(name = "se3-observer", version, about = "Pose, velocity and IMU-bias observers on SE(3)")]
pub struct Cli {
    /// TOML configuration; defaults reproduce the reference simulation.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub observer: Option<ObserverSelection>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate truth, sensors and observers; write traces and a summary.
    Simulate {
        /// Run this many consecutive seeds in parallel, one subdirectory each.
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Run the observers over a recorded sensor log.
    Replay {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Added to every gyro and accelerometer sample.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        add_bias: Option<[f64; 3]>,
    },
    /// Report whether a constant gain triple lies in the feasible set.
    CheckGains {
        #[arg(long, allow_hyphen_values = true)]
        k3: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k4: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k5: Option<f64>,
        /// Angular-speed bound; defaults to the configured one.
        #[arg(long)]
        c: Option<f64>,
    },
}

pub fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("cannot parse `{p}` as a number"))?;
    }
    Ok(out)
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.observer {
        cfg.observer = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    match &cli.command {
        Command::Simulate { .. } => cfg.mode = Mode::Simulate,
        Command::Replay { log, add_bias } => {
            cfg.mode = Mode::Replay;
            if let Some(l) = log {
                cfg.replay.log = Some(l.clone());
            }
            if let Some(b) = add_bias {
                cfg.replay.add_bias = *b;
            }
        }
        Command::CheckGains { .. } => cfg.mode = Mode::CheckGains,
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate { batch: None } => {
            let files = run_simulation(&cfg)?;
            for f in files {
                writeln!(stdout, "wrote {}", f.display())?;
            }
        }
        Command::Simulate { batch: Some(n) } => {
            let dirs = run_batch(&cfg, *n)?;
            for d in dirs {
                writeln!(stdout, "wrote {}", d.display())?;
            }
        }
        Command::Replay { .. } => {
            let files = run_replay_files(&cfg)?;
            for f in files {
                writeln!(stdout, "wrote {}", f.display())?;
            }
        }
        Command::CheckGains { k3, k4, k5, c } => {
            cfg.validate()?;
            let g = &cfg.gains.constant;
            let c = c.or(g.c).unwrap_or_else(|| cfg.signal_spec().omega_bound);
            let report = check_gains(k3.unwrap_or(g.k3), k4.unwrap_or(g.k4), k5.unwrap_or(g.k5), c);
            write!(stdout, "{}", format_report(&report))?;
            writeln!(stdout, "{}", serde_json::to_string(&report).expect("report serializes"))?;
        }
    }
    Ok(())
}

pub fn format_report(r: &FeasibilityReport) -> String {
    let mut s = format!(
        "gains (k3, k4, k5) = ({}, {}, {}), c = {}\nin K(c): {}\nmin eig Y: {:.6e}\nmin eig Z: {:.6e}\n",
        r.k3,
        r.k4,
        r.k5,
        r.c,
        if r.in_k { "yes" } else { "no" },
        r.y_min_eig,
        r.z_min_eig
    );
    for c in &r.conditions {
        let mark = if c.holds() { "ok  " } else { "FAIL" };
        s.push_str(&format!("  [{mark}] {}  ({:.6e})\n", c.name, c.value));
    }
    s
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn final_json(kind: ObserverKind, f: &FinalState) -> serde_json::Value {
    let s = f.estimator.state();
    json!({
        "observer": kind.name(),
        "t": f.errors.t,
        "errors": f.errors,
        "gyro_bias": s.gyro_bias.as_slice(),
        "accel_bias": s.accel_bias.as_slice(),
        "position": s.position.as_slice(),
        "velocity": s.velocity.as_slice(),
        "p_min_eig": f.p_bounds.map(|b| b.0),
        "p_max_eig": f.p_bounds.map(|b| b.1),
    })
}

/// Writes `trace_<observer>.csv` per observer, `sensor_log.csv` and `summary.json`
/// into the configured output directory. Returns the written paths.
pub fn run_simulation(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let scenario = cfg.scenario()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    let mut finals = Vec::new();
    let log_path = cfg.out.join("sensor_log.csv");
    for (i, kind) in cfg.observer.kinds().into_iter().enumerate() {
        let path = cfg.out.join(format!("trace_{}.csv", kind.name()));
        let mut trace = SimTraceWriter::new(create(&path)?)?;
        // the sensor stream does not depend on the observer, so one copy suffices
        let mut log = if i == 0 { Some(SensorLogWriter::new(create(&log_path)?)?) } else { None };
        let last = simulate_with(&scenario, kind, |r| {
            trace.write(r)?;
            if let Some(l) = log.as_mut() {
                l.write(&SensorLogRow::from(&r.measurement.start))?;
            }
            Ok(())
        })?;
        trace.finish()?.flush()?;
        written.push(path);
        if let Some(l) = log {
            l.finish()?.flush()?;
            written.push(log_path.clone());
        }
        log::info!("{} observer: final error total {:.3e}", kind.name(), last.errors.total());
        finals.push(final_json(kind, &last));
    }
    let summary = json!({
        "seed": cfg.seed,
        "steps": scenario.steps(),
        "dt": scenario.dt,
        "omega_bound": scenario.signal.omega_bound,
        "gain_report": scenario.const_gains.report(),
        "true_gyro_bias": scenario.sensor.gyro_bias.as_slice(),
        "true_accel_bias": scenario.sensor.accel_bias.as_slice(),
        "runs": finals,
    });
    let summary_path = cfg.out.join("summary.json");
    write_json(&summary_path, &summary)?;
    written.push(summary_path);
    Ok(written)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs seeds `seed .. seed + n` on worker threads, each into `out/seed-<s>`.
pub fn run_batch(cfg: &RunConfig, n: usize) -> Result<Vec<PathBuf>> {
    if n == 0 {
        return Err(Error::ConfigInvalid("batch size must be positive".into()));
    }
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(n);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<PathBuf>)>> = Mutex::new(Vec::with_capacity(n));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let mut run_cfg = cfg.clone();
                run_cfg.seed = cfg.seed + i as u64;
                run_cfg.out = cfg.out.join(format!("seed-{}", run_cfg.seed));
                let r = run_simulation(&run_cfg).map(|_| run_cfg.out);
                results.lock().expect("no worker panics while holding the lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("workers finished");
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// Replays the configured log with each selected observer, writing
/// `replay_<observer>.csv` and `replay_summary.json`.
pub fn run_replay_files(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let log_path = cfg.replay.log.as_ref().ok_or_else(|| Error::ConfigInvalid("no log given".into()))?;
    let rows = read_sensor_log_path(log_path)?;
    let opts = cfg.replay_options()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for kind in cfg.observer.kinds() {
        let run: ReplayRun = run_replay(&rows, kind, &opts)?;
        let path = cfg.out.join(format!("replay_{}.csv", kind.name()));
        let mut w = ReplayTraceWriter::new(create(&path)?)?;
        for r in &run.records {
            w.write(r)?;
        }
        w.finish()?.flush()?;
        written.push(path);
        summaries.push(json!({ "observer": kind.name(), "summary": run.summary }));
    }
    let summary_path = cfg.out.join("replay_summary.json");
    write_json(
        &summary_path,
        &json!({
            "log": log_path,
            "rows": rows.len(),
            "add_bias": cfg.replay.add_bias,
            "tail_fraction": cfg.replay.tail_fraction,
            "runs": summaries,
        }),
    )?;
    written.push(summary_path);
    Ok(written)
}
