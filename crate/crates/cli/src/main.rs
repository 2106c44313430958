//! `sonic-guide`: render trajectories to audio, generate axis sweeps, analyze
//! recordings, serve live sessions and run the simulated operator.

// `!(a > b)` is deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sonic_guide::probes::{analyze, Decoder};
use sonic_guide::wav::{read_wav, write_wav, SampleFormat};
use sonic_guide::{
    parse_trajectory, render_trajectory, DisplacementVector, Mode, SynthConfig, Trajectory, TrajectorySample,
};
use sonic_guide_service::{run_simulated_operator, OperatorSummary, Server, ServerConfig};
use thiserror::Error;

use config::AppConfig;

#[derive(Debug, Error)]
enum CliError {
    /// Bad input: missing files, unparsable data, invalid configuration.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "sonic-guide", version, about = "Psychoacoustic auditory guidance toward a target")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::TwoD => Mode::TwoD,
            ModeArg::ThreeD => Mode::ThreeD,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a trajectory CSV (`t,x,y,z`) to a WAV file, earcons included.
    Render {
        #[arg(long, value_name = "FILE")]
        traj: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Navigation mode [default: from config, 3d]. In 2d all z must be 0.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Output length in seconds [default: last timestamp].
        #[arg(long)]
        duration: Option<f64>,
        /// Write 32-bit float samples instead of 16-bit PCM.
        #[arg(long)]
        float: bool,
    },
    /// Linear -1 → +1 sweep along one axis: writes FILE (WAV) and a CSV
    /// trajectory next to it.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
    },
    /// Measure perceptual features of a WAV per analysis window; prints
    /// JSON lines.
    Analyze {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Also decode each window back to a position.
        #[arg(long)]
        decode: bool,
        /// Window length, seconds (at least 1).
        #[arg(long, default_value_t = 1.0)]
        window: f64,
    },
    /// Run the guidance service until interrupted.
    Serve {
        /// Listen address [default: $SONIC_GUIDE_ADDR or 127.0.0.1:7853].
        #[arg(long)]
        addr: Option<String>,
        /// Write one JSON-lines log per session here.
        #[arg(long, value_name = "DIR")]
        log_dir: Option<PathBuf>,
    },
    /// Run seeded target-finding trials with the simulated operator.
    Agent {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Directory for per-trial trajectory CSVs [default: next to the report].
        #[arg(long, value_name = "DIR")]
        trajectories: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_long_help(config::keys_help());
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut cfg = AppConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path).map_err(CliError::Input)?;
    }
    for kv in &cli.set {
        cfg.apply_override(kv).map_err(input)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Render { traj, out, mode, duration, float } => {
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            cfg.validate().map_err(input)?;
            render(&cfg, &traj, &out, duration, float)
        }
        Command::Sweep { axis, out, duration } => {
            cfg.validate().map_err(input)?;
            sweep(&cfg, axis, &out, duration)
        }
        Command::Analyze { input: path, decode, window } => {
            cfg.validate().map_err(input)?;
            analyze_file(&cfg, &path, decode, window)
        }
        Command::Serve { addr, log_dir } => {
            if let Some(a) = addr {
                cfg.addr = a;
            }
            if let Some(d) = log_dir {
                cfg.log_dir = Some(d);
            }
            cfg.validate().map_err(input)?;
            serve(&cfg)
        }
        Command::Agent { trials, seed, report, mode, trajectories } => {
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            cfg.validate().map_err(input)?;
            agent(&cfg, trials, seed, &report, trajectories)
        }
    }
}

fn event_counts(events: &[sonic_guide::EarconEvent]) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for e in events {
        *counts.entry(e.kind.as_str()).or_insert(0) += 1;
    }
    counts
}

fn render(cfg: &AppConfig, traj: &Path, out: &Path, duration: Option<f64>, float: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(traj).map_err(|e| input(format!("{}: {e}", traj.display())))?;
    let parsed = parse_trajectory(&text).map_err(|e| input(format!("{}: {e}", traj.display())))?;
    let parsed = parsed.with_mode(cfg.mode).map_err(|e| input(format!("{}: {e}", traj.display())))?;
    if let Some(d) = duration {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(input(format!("--duration must be non-negative, got {d}")));
        }
    }
    let r = render_trajectory(&parsed, duration, &cfg.synth, &cfg.mapping).map_err(input)?;
    let format = if float { SampleFormat::Float32 } else { SampleFormat::Pcm16 };
    write_wav(&r.audio, out, format).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let summary = json!({
        "out": out.display().to_string(),
        "mode": cfg.mode,
        "duration": r.audio.duration(),
        "frames": r.audio.len(),
        "event_count": r.events.len(),
        "events": event_counts(&r.events),
        "event_times": r.events.iter().map(|e| json!({"kind": e.kind, "t": e.time})).collect::<Vec<_>>(),
    });
    println!("{summary}");
    Ok(())
}

fn sweep(cfg: &AppConfig, axis: Axis, out: &Path, duration: f64) -> Result<(), CliError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(input(format!("--duration must be positive, got {duration}")));
    }
    let at = |v: f32| match axis {
        Axis::X => DisplacementVector { x: v, y: 0.0, z: 0.0 },
        Axis::Y => DisplacementVector { x: 0.0, y: v, z: 0.0 },
        Axis::Z => DisplacementVector { x: 0.0, y: 0.0, z: v },
    };
    let traj = Trajectory::new(
        vec![TrajectorySample { t: 0.0, d: at(-1.0) }, TrajectorySample { t: duration, d: at(1.0) }],
        Mode::ThreeD,
    )
    .map_err(runtime)?;
    let csv = out.with_extension("csv");
    std::fs::write(&csv, traj.to_csv()).map_err(|e| runtime(format!("{}: {e}", csv.display())))?;
    let r = render_trajectory(&traj, None, &cfg.synth, &cfg.mapping).map_err(runtime)?;
    write_wav(&r.audio, out, SampleFormat::Pcm16).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    println!(
        "{}",
        json!({
            "wav": out.display().to_string(),
            "csv": csv.display().to_string(),
            "duration": r.audio.duration(),
            "events": event_counts(&r.events),
        })
    );
    Ok(())
}

fn analyze_file(cfg: &AppConfig, path: &Path, decode: bool, window: f64) -> Result<(), CliError> {
    if !(window >= 1.0 && window.is_finite()) {
        return Err(input(format!("--window must be at least 1 s, got {window}")));
    }
    let audio = read_wav(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let n = (window * audio.sample_rate as f64).round() as usize;
    if audio.len() < n {
        return Err(input(format!("{}: shorter than one {window} s window", path.display())));
    }
    let decoder =
        decode.then(|| Decoder::new(cfg.mapping, &SynthConfig { sample_rate: audio.sample_rate, ..cfg.synth }));
    let mut start = 0;
    while start + n <= audio.len() {
        let t0 = start as f64 / audio.sample_rate as f64;
        let chunk = sonic_guide::AudioBlock::new(audio.sample_rate, audio.frames[start..start + n].to_vec());
        let mut line = match analyze(&chunk, t0) {
            Ok(f) => json!({
                "t_start": f.t_start,
                "t_end": f.t_end,
                "chroma_rate": f.chroma_rate,
                "am_rate": f.am_rate,
                "am_depth": f.am_depth,
                "modulation_band": f.modulation_band,
                "spectral_centroid": f.spectral_centroid,
                "envelope_bandwidth": f.envelope_bandwidth,
            }),
            Err(e) => json!({ "t_start": t0, "t_end": t0 + window, "error": e.to_string() }),
        };
        if let Some(dec) = &decoder {
            line["decoded"] = match dec.decode(&chunk) {
                Ok(d) => json!([d.x, d.y, d.z]),
                Err(e) => json!({ "error": e.to_string() }),
            };
        }
        println!("{line}");
        start += n;
    }
    Ok(())
}

fn serve(cfg: &AppConfig) -> Result<(), CliError> {
    let server =
        Server::bind(ServerConfig { addr: cfg.addr.clone(), session: cfg.session(), log_dir: cfg.log_dir.clone() })
            .map_err(|e| runtime(format!("cannot listen on {}: {e}", cfg.addr)))?;
    let addr = server.local_addr().map_err(runtime)?;
    println!("listening on {addr}");
    server.run().map_err(runtime)
}

fn agent(cfg: &AppConfig, trials: usize, seed: u64, report: &Path, dir: Option<PathBuf>) -> Result<(), CliError> {
    if trials == 0 {
        return Err(input("--trials must be at least 1"));
    }
    let records = run_simulated_operator(&cfg.operator(trials, seed)).map_err(runtime)?;
    let summary = OperatorSummary::from_records(&records);
    let dir = dir.unwrap_or_else(|| {
        let stem = report.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
        report.parent().unwrap_or(Path::new(".")).join(format!("{stem}_trials"))
    });
    std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let csv = dir.join(format!("trial_{:03}.csv", r.trial));
        let traj = r.trajectory().map_err(runtime)?;
        std::fs::write(&csv, traj.to_csv()).map_err(|e| runtime(format!("{}: {e}", csv.display())))?;
        rows.push(json!({
            "trial": r.trial,
            "seed": r.seed,
            "outcome": r.outcome,
            "steps": r.steps,
            "time_to_target": r.time_to_target,
            "path_length": r.path_length,
            "start": r.start_position,
            "final": r.final_position().map(|d| [d.x, d.y, d.z]),
            "decoder_errors": r.decoder_errors,
            "trajectory": csv.display().to_string(),
        }));
    }
    let doc = json!({
        "trials": summary.trials,
        "hits": summary.hits,
        "hit_rate": summary.hit_rate,
        "median_steps": summary.median_steps,
        "median_time": summary.median_time,
        "decoder_errors": summary.decoder_errors,
        "mode": cfg.mode,
        "seed": seed,
        "target_radius": cfg.agent_target_radius,
        "start_distance": cfg.start_distance,
        "records": rows,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(runtime)?;
    std::fs::write(report, text + "\n").map_err(|e| runtime(format!("{}: {e}", report.display())))?;
    println!(
        "{}",
        json!({
            "trials": summary.trials,
            "hits": summary.hits,
            "hit_rate": summary.hit_rate,
            "median_steps": summary.median_steps,
            "median_time": summary.median_time,
        })
    );
    Ok(())
}
