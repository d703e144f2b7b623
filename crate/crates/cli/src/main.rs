mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use switchcert::lie_algebra::classify;
use switchcert::nalgebra::DVector;
use switchcert::nonlinear::{
    is_commuting_fields, poly_bracket, shim_lyapunov_detail, simulate_nonlinear, PolyVectorField,
};
use switchcert::report::{analyze, analyze_with_witness, default_witness_path, AnalyzeOptions, InputDigest};
use switchcert::simulation::{random_signal, simulate_exact, time_scale, worst_case_planar, SwitchingSignal, Trajectory};
use switchcert::{report_to_json, MatrixFamily, Problem, Verdict};

use config::{FileConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "switchcert", version, about = "Stability certificates for switched systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// RNG seed for searches and random signals.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of random-switching trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Simulation horizon (or the truncation time for `nonlinear shim`).
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Iteration budget of the quadratic Lyapunov search.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trajectory CSV destination.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// TOML file with default values for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the Lie algebra generated by the modes.
    Classify { problem: PathBuf },
    /// Run the full certification pipeline.
    Certify { problem: PathBuf },
    /// Simulate the linear system under a given or random signal.
    Simulate {
        problem: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Worst-case switching for a planar pair.
    WorstCase {
        problem: PathBuf,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        rotations: Option<usize>,
    },
    /// Certificate robustness radius.
    Robustness { problem: PathBuf },
    /// Polynomial vector field tools.
    #[command(subcommand)]
    Nonlinear(NonlinearCommand),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Segments as `mode:duration,...` with 1-based modes. Random if absent.
    #[arg(long)]
    signal: Option<String>,
    /// Initial state as comma-separated values. Defaults to the first unit vector.
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Debug, Subcommand)]
enum NonlinearCommand {
    /// Pairwise Lie brackets and the commuting test.
    Bracket { problem: PathBuf },
    /// Fixed-step simulation with finite-escape detection.
    Simulate {
        problem: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Evaluate the nested Lyapunov function at a point.
    Shim {
        problem: PathBuf,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        quad_points: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut flags = FileConfig {
        seed: cli.common.seed,
        trials: cli.common.trials,
        horizon: cli.common.horizon,
        max_iters: cli.common.max_iters,
        ..FileConfig::default()
    };
    match &cli.command {
        Command::WorstCase { rotations, .. } => flags.rotations = *rotations,
        Command::Nonlinear(NonlinearCommand::Simulate { dt, .. }) => flags.dt = *dt,
        Command::Nonlinear(NonlinearCommand::Shim { quad_points, .. }) => flags.quad_points = *quad_points,
        _ => {}
    }
    let settings = Settings::resolve(&flags, &file);
    let out = Output {
        json: cli.common.out.clone(),
        csv: cli.common.csv.clone(),
    };

    match cli.command {
        Command::Classify { problem } => {
            let family = load_linear(&problem)?;
            out.json(&json!({
                "input": InputDigest::of(&family),
                "classification": classify(&family),
            }))?;
            Ok(0)
        }
        Command::Certify { problem } => {
            let family = load_linear(&problem)?;
            let witness = out.csv.clone().unwrap_or_else(|| default_witness_path(&problem));
            let report = analyze_with_witness(&family, &analyze_options(&settings, true), &witness);
            out.text(&report_to_json(&report))?;
            Ok(report.exit_code() as u8)
        }
        Command::Robustness { problem } => {
            let family = load_linear(&problem)?;
            let report = analyze(&family, &analyze_options(&settings, false)).report;
            out.json(&json!({
                "input": report.input,
                "verdict": report.verdict,
                "provenance": report.certificate.as_ref().map(|c| c.provenance),
                "margins": report.certificate.as_ref().map(|c| &c.certificate.margins),
                "robustness_radius": report.robustness_radius,
                "errors": report.errors,
            }))?;
            Ok(if report.verdict == Verdict::GuesCertified { 0 } else { 2 })
        }
        Command::Simulate { problem, run } => {
            let family = load_linear(&problem)?;
            let horizon = settings.horizon.unwrap_or_else(|| 20.0 * time_scale(&family));
            let signal = signal_for(&run.signal, family.len(), horizon, time_scale(&family), settings.seed)?;
            let x0 = state_or_unit(&run.x0, family.n())?;
            let traj = simulate_exact(&family, &signal, &x0)?;
            out.trajectory(&traj)?;
            Ok(0)
        }
        Command::WorstCase { problem, x0, .. } => {
            let family = load_linear(&problem)?;
            if family.len() != 2 {
                bail!("worst-case switching needs exactly two modes, got {}", family.len());
            }
            let x0 = state_or_unit(&x0, family.n())?;
            let wc = worst_case_planar(family.mode(0), family.mode(1), &x0, settings.rotations)?;
            out.save_csv(&wc.trajectory)?;
            out.json(&json!({
                "contraction_per_rotation": wc.contraction_per_rotation,
                "ratios": wc.ratios,
                "switches": wc.trajectory.signal.segments().len().saturating_sub(1),
            }))?;
            Ok(0)
        }
        Command::Nonlinear(cmd) => run_nonlinear(cmd, &settings, &out),
    }
}

fn run_nonlinear(cmd: NonlinearCommand, settings: &Settings, out: &Output) -> Result<u8> {
    match cmd {
        NonlinearCommand::Bracket { problem } => {
            let fields = load_fields(&problem)?;
            let mut brackets = Vec::new();
            for i in 0..fields.len() {
                for j in (i + 1)..fields.len() {
                    let b = poly_bracket(&fields[i], &fields[j])?;
                    brackets.push(json!({ "i": i + 1, "j": j + 1, "terms": b.to_terms() }));
                }
            }
            out.json(&json!({
                "commuting": is_commuting_fields(&fields)?,
                "brackets": brackets,
            }))?;
            Ok(0)
        }
        NonlinearCommand::Simulate { problem, run, .. } => {
            let fields = load_fields(&problem)?;
            let n = fields[0].n();
            let horizon = settings.horizon.unwrap_or(10.0);
            let signal = signal_for(&run.signal, fields.len(), horizon, 1.0, settings.seed)?;
            let x0 = state_or_unit(&run.x0, n)?;
            let traj = simulate_nonlinear(&fields, &signal, &x0, settings.dt)?;
            if out.csv.is_some() || out.json.is_some() {
                out.save_csv(&traj)?;
                out.json(&json!({
                    "final_time": traj.final_time(),
                    "final_state": traj.final_state().as_slice(),
                    "max_norm": traj.max_norm(),
                    "escape": traj.escape,
                }))?;
            } else {
                print!("{}", traj.to_csv_string());
                if let Some(esc) = traj.escape {
                    eprintln!("finite escape in [{}, {}]", esc.lo, esc.hi);
                }
            }
            Ok(0)
        }
        NonlinearCommand::Shim { problem, x0, .. } => {
            let fields = load_fields(&problem)?;
            let x = state_or_unit(&x0, fields[0].n())?;
            let horizon = settings.horizon.unwrap_or(30.0);
            let v = shim_lyapunov_detail(&fields, &x, horizon, settings.quad_points)?;
            out.json(&json!({
                "value": v.value,
                "tail_estimate": finite_or_null(v.tail_estimate),
                "horizon": horizon,
                "quad_points": settings.quad_points,
            }))?;
            Ok(0)
        }
    }
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn analyze_options(settings: &Settings, falsify: bool) -> AnalyzeOptions {
    AnalyzeOptions {
        seed: settings.seed,
        trials: settings.trials,
        horizon: settings.horizon,
        max_iters: settings.max_iters,
        falsify,
    }
}

fn load_linear(path: &Path) -> Result<MatrixFamily> {
    Ok(Problem::load(path)?.into_linear()?)
}

fn load_fields(path: &Path) -> Result<Vec<PolyVectorField>> {
    Ok(Problem::load(path)?.into_nonlinear()?)
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number `{s}`")))
        .collect()
}

fn state_or_unit(text: &Option<String>, n: usize) -> Result<DVector<f64>> {
    match text {
        Some(t) => {
            let v = parse_vector(t)?;
            if v.len() != n {
                bail!("initial state has {} entries, expected {n}", v.len());
            }
            Ok(DVector::from_vec(v))
        }
        None => {
            let mut x = DVector::zeros(n);
            x[0] = 1.0;
            Ok(x)
        }
    }
}

fn parse_signal(text: &str, modes: usize) -> Result<SwitchingSignal> {
    let mut pairs = Vec::new();
    for item in text.split(',') {
        let (m, d) = item
            .split_once(':')
            .ok_or_else(|| anyhow!("segment `{item}` must look like mode:duration"))?;
        let m: usize = m.trim().parse().with_context(|| format!("bad mode `{m}`"))?;
        if m == 0 || m > modes {
            bail!("mode {m} out of range 1..={modes}");
        }
        let d: f64 = d.trim().parse().with_context(|| format!("bad duration `{d}`"))?;
        pairs.push((m - 1, d));
    }
    Ok(SwitchingSignal::from_pairs(&pairs)?)
}

fn signal_for(text: &Option<String>, modes: usize, horizon: f64, tau: f64, seed: u64) -> Result<SwitchingSignal> {
    match text {
        Some(t) => parse_signal(t, modes),
        None => Ok(random_signal(modes, horizon, (0.25 * tau, 2.5 * tau), seed)?),
    }
}

struct Output {
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
}

impl Output {
    fn text(&self, text: &str) -> Result<()> {
        match &self.json {
            Some(path) => std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                writeln!(stdout, "{text}")?;
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.text(&serde_json::to_string_pretty(value)?)
    }

    fn save_csv(&self, traj: &Trajectory) -> Result<()> {
        if let Some(path) = &self.csv {
            traj.save_csv(path)?;
        }
        Ok(())
    }

    /// CSV to `--csv` with a JSON summary, or CSV on stdout.
    fn trajectory(&self, traj: &Trajectory) -> Result<()> {
        if self.csv.is_none() && self.json.is_none() {
            print!("{}", traj.to_csv_string());
            return Ok(());
        }
        self.save_csv(traj)?;
        self.json(&json!({
            "final_time": traj.final_time(),
            "final_state": traj.final_state().as_slice(),
            "max_norm": traj.max_norm(),
            "segments": traj.signal.segments().len(),
        }))
    }
}
