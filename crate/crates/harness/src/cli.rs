//! Command-line front end. Exit codes: 0 success, 1 usage or config error,
//! 2 runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use samplize_core::estimators::{exact_tf, folklore_estimate, query_estimate, samplized_estimate, Estimate, Method};
use samplize_core::samplizer::{calibrate_rounds, lmr_error, state_hash, Calibrator, DEFAULT_ROUND_CAP};
use samplize_core::states::{haar_random, psi_x, PureState};

use crate::config::{ConfigError, ExperimentConfig, PairSpec, MAX_QUBITS};
use crate::experiment::{resolve_workers, run_experiment, ExperimentOutput, RunError};
use crate::fit::fit_scaling;
use crate::output::{gnuplot_script, metadata_line, read_csv, script_path, write_csv};

#[derive(Parser, Debug)]
#[command(name = "samplize-sim", version, about = "Pure-state trace distance and fidelity estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sweep described by a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`; without either the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit log(median samples) against log(epsilon) from a result CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        method: Method,
    },
    /// Calibrate LMR rounds for one state.
    Calibrate {
        /// zero, one, plus, psi_x:X, haar:N:SEED, or a JSON list of [re, im] pairs.
        #[arg(long)]
        state: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        controlled: bool,
        #[arg(long, default_value_t = DEFAULT_ROUND_CAP)]
        r_cap: u64,
    },
    /// Estimate the (|0>, |+>) pair with every method, then sweep epsilon.
    Demo {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 20)]
        trials: u64,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `argv` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run { config, out, workers } => cmd_run(&config, out, workers, stdout),
        Command::Fit { input, method } => cmd_fit(&input, method, stdout),
        Command::Calibrate { state, delta, controlled, r_cap } => cmd_calibrate(&state, delta, controlled, r_cap, stdout),
        Command::Demo { out, workers, trials } => cmd_demo(out, workers, trials, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn emit(cfg: &ExperimentConfig, out: Option<&Path>, result: &ExperimentOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let meta = metadata_line(cfg);
    match out {
        None => write_csv(&mut *stdout, &meta, &result.rows).map_err(runtime),
        Some(path) => {
            let file = File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            write_csv(BufWriter::new(file), &meta, &result.rows).map_err(runtime)?;
            std::fs::write(script_path(path), gnuplot_script(path, cfg.method.as_str())).map_err(runtime)?;
            if !result.calibrations.is_empty() {
                let json = serde_json::to_string_pretty(&result.calibrations).map_err(runtime)?;
                std::fs::write(path.with_extension("calibration.json"), json).map_err(runtime)?;
            }
            writeln!(stdout, "wrote {} rows to {}", result.rows.len(), path.display()).map_err(runtime)
        }
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>, workers: Option<usize>, stdout: &mut dyn Write) -> Result<(), CliError> {
    if workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let cfg = ExperimentConfig::from_path(config)?;
    let result = run_experiment(&cfg, resolve_workers(workers, &cfg))?;
    let out = out.or_else(|| cfg.output.clone());
    emit(&cfg, out.as_deref(), &result, stdout)
}

fn cmd_fit(input: &Path, method: Method, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = File::open(input).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
    let rows = read_csv(file).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
    let fit = fit_scaling(&rows, method).map_err(runtime)?;
    writeln!(stdout, "method={method} points={} slope={:.4} intercept={:.4} r2={:.6}", fit.points.len(), fit.slope, fit.intercept, fit.r_squared)
        .map_err(runtime)?;
    for (lx, ly) in &fit.points {
        writeln!(stdout, "  epsilon={:.4} median_samples={:.0}", lx.exp(), ly.exp()).map_err(runtime)?;
    }
    Ok(())
}

/// `zero`, `one`, `plus`, `psi_x:X`, `haar:N:SEED`, or JSON `[[re, im], …]`.
pub fn parse_state(spec: &str) -> Result<PureState, String> {
    let spec = spec.trim();
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
    let int = |s: &str| s.parse::<u64>().map_err(|e| format!("bad integer '{s}': {e}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let state = match parts.as_slice() {
        ["zero"] => Ok(PureState::zero()),
        ["one"] => Ok(PureState::one()),
        ["plus"] => Ok(PureState::plus()),
        ["psi_x", x] => psi_x(num(x)?).map_err(|e| e.to_string()),
        ["haar", n, seed] => {
            let n = int(n)? as usize;
            if n > MAX_QUBITS {
                return Err(format!("at most {MAX_QUBITS} qubits are supported"));
            }
            haar_random(n, int(seed)?).map_err(|e| e.to_string())
        }
        _ if spec.starts_with('[') => serde_json::from_str(spec).map_err(|e| e.to_string()),
        _ => Err(format!("unknown state '{spec}'")),
    }?;
    Ok(state)
}

fn cmd_calibrate(state: &str, delta: f64, controlled: bool, r_cap: u64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let psi = parse_state(state).map_err(CliError::Usage)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::Usage(format!("--delta must lie in (0, 1), got {delta}")));
    }
    let cfg = calibrate_rounds(&psi, delta, controlled, r_cap).map_err(runtime)?;
    let distance = lmr_error(&psi, cfg.rounds, controlled).map_err(runtime)?;
    let report = serde_json::json!({
        "state_hash": state_hash(&psi),
        "controlled": controlled,
        "delta": delta,
        "rounds": cfg.rounds,
        "delta_step": cfg.delta_step,
        "choi_distance": distance,
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report).map_err(runtime)?).map_err(runtime)
}

fn describe(e: &Estimate) -> String {
    let mut s = format!("T_hat={:.6} F_hat={:.6}", e.t_hat, e.f_hat);
    if let Some(g) = e.gamma_tilde {
        s += &format!(" gamma_tilde={g}");
    }
    if let Some(t) = e.t {
        s += &format!(" t={t}");
    }
    if let Some(q) = e.queries_per_oracle {
        s += &format!(" queries_per_oracle={q}");
    }
    if let Some(r) = e.rounds_per_query {
        s += &format!(" rounds_per_query={r}");
    }
    s + &format!(" ledger={}", serde_json::to_string(&e.ledger).unwrap_or_default())
}

fn cmd_demo(out: Option<PathBuf>, workers: Option<usize>, trials: u64, stdout: &mut dyn Write) -> Result<(), CliError> {
    if trials == 0 || workers == Some(0) {
        return Err(CliError::Usage("--trials and --workers must be at least 1".into()));
    }
    let (phi, psi) = (PureState::zero(), PureState::plus());
    let (t_true, f_true) = exact_tf(&phi, &psi).map_err(runtime)?;
    let seed = 2024;
    let calibrator = Calibrator::default();
    let lines = [
        "pair: phi = |0>, psi = |+>".to_string(),
        format!("T_true = {t_true:.10}  F_true = {f_true:.10}"),
        format!("query     (eps_fail=0.1, delta_err=0.05): {}", describe(&query_estimate(&phi, &psi, 0.1, 0.05, seed).map_err(runtime)?)),
        format!("samplized (eps=0.25): {}", describe(&samplized_estimate(&phi, &psi, 0.25, seed, &calibrator).map_err(runtime)?)),
        format!("folklore  (eps=0.25): {}", describe(&folklore_estimate(&phi, &psi, 0.25, seed).map_err(runtime)?)),
    ];
    for l in lines {
        writeln!(stdout, "{l}").map_err(runtime)?;
    }

    let cfg = ExperimentConfig {
        method: Method::Samplized,
        pair: PairSpec::ZeroPlus,
        epsilons: vec![0.4, 0.3, 0.2, 0.1],
        trials,
        seed,
        output: out.clone(),
        r_cap: DEFAULT_ROUND_CAP,
        workers,
        eps_fail: 0.1,
        record_timing: false,
    };
    let result = run_experiment(&cfg, resolve_workers(workers, &cfg))?;
    writeln!(stdout, "samplized sweep, {trials} trials per epsilon:").map_err(runtime)?;
    for &eps in &cfg.epsilons {
        let rows: Vec<_> = result.rows.iter().filter(|r| r.epsilon == eps).collect();
        let ok = rows.iter().filter(|r| r.success == Some(true)).count();
        let first = rows[0];
        writeln!(
            stdout,
            "  epsilon={eps} t={} rounds_per_query={} samples={} success={ok}/{}",
            first.t.unwrap_or(0),
            first.rounds_per_query.unwrap_or(0),
            first.samples_total.unwrap_or(0),
            rows.len()
        )
        .map_err(runtime)?;
    }
    let fit = fit_scaling(&result.rows, Method::Samplized).map_err(runtime)?;
    writeln!(stdout, "log-log slope of samples vs epsilon: {:.4} (r2={:.4})", fit.slope, fit.r_squared).map_err(runtime)?;
    if let Some(path) = out {
        emit(&cfg, Some(&path), &result, stdout)?;
    }
    Ok(())
}
