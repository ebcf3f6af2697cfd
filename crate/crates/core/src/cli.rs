//! The `oplax` command-line front end.
//!
//! Exit codes: 0 when everything passed, 1 for runtime or check failures
//! (including unwritable outputs), 2 for usage and configuration errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::Value;

use crate::error::Error;
use crate::lax::{evolve, format_number, IntegratorConfig};
use crate::multilinear::Operation;
use crate::operad::gerstenhaber_bracket;
use crate::oscillator::MuParams;
use crate::verify::{identities_suite, operad_suite, pde_suite, theorem_suite, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    VerifyOperad,
    VerifyTheorem,
    VerifyIdentities,
    PdeCheck,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::VerifyOperad => "verify-operad",
            Mode::VerifyTheorem => "verify-theorem",
            Mode::VerifyIdentities => "verify-identities",
            Mode::PdeCheck => "pde-check",
        }
    }

    pub fn parse(name: &str) -> Option<Mode> {
        [
            Mode::Simulate,
            Mode::VerifyOperad,
            Mode::VerifyTheorem,
            Mode::VerifyIdentities,
            Mode::PdeCheck,
        ]
        .into_iter()
        .find(|m| m.name() == name)
    }

    fn default_trials(self) -> usize {
        match self {
            Mode::VerifyOperad => 200,
            Mode::VerifyTheorem => 20,
            Mode::VerifyIdentities => 1000,
            Mode::Simulate | Mode::PdeCheck => 100,
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Mode::VerifyOperad => 1e-10,
            Mode::VerifyTheorem => 1e-6,
            Mode::VerifyIdentities => 1e-12,
            Mode::Simulate | Mode::PdeCheck => 1e-8,
        }
    }
}

/// A fully resolved run: flags over config file over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub omega: Option<f64>,
    pub q0: Option<f64>,
    pub p0: Option<f64>,
    pub c: Option<[f64; 8]>,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
}

impl RunConfig {
    /// The integrator configuration for `simulate`; every oscillator field is required.
    pub fn integrator(&self) -> Result<IntegratorConfig, ConfigError> {
        let need = |v: Option<f64>, field: &'static str| v.ok_or(ConfigError::Missing(field));
        let config = IntegratorConfig {
            dt: self.dt,
            t_end: self.t_end,
            omega: need(self.omega, "omega")?,
            q0: need(self.q0, "q0")?,
            p0: need(self.p0, "p0")?,
            params: MuParams { c: self.c.ok_or(ConfigError::Missing("c"))? },
            record_every: self.record_every,
        };
        config.validate().map_err(|e| ConfigError::Rejected(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("unknown field `{0}`")]
    Unknown(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("no mode given: pass a subcommand or set `mode` in the config file")]
    NoMode,
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Rejected(String),
}

/// Optional values from one source (flags or file), merged before defaults.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub q0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    /// Eight comma-separated family parameters C1..C8.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub c: Option<Vec<f64>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-end", global = true, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long = "record-every", global = true)]
    pub record_every: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub mode: Option<String>,
}

impl Overrides {
    fn or(self, lower: Overrides) -> Overrides {
        Overrides {
            omega: self.omega.or(lower.omega),
            q0: self.q0.or(lower.q0),
            p0: self.p0.or(lower.p0),
            c: self.c.or(lower.c),
            dt: self.dt.or(lower.dt),
            t_end: self.t_end.or(lower.t_end),
            record_every: self.record_every.or(lower.record_every),
            trials: self.trials.or(lower.trials),
            tol: self.tol.or(lower.tol),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            mode: self.mode.or(lower.mode),
        }
    }

    /// Applies defaults and validates every field that is present.
    pub fn resolve(self, mode: Option<Mode>) -> Result<RunConfig, ConfigError> {
        let mode = match (mode, self.mode.as_deref()) {
            (Some(m), _) => m,
            (None, Some(name)) => Mode::parse(name).ok_or_else(|| ConfigError::Invalid {
                field: "mode",
                message: format!("unknown mode {name:?}"),
            })?,
            (None, None) => return Err(ConfigError::NoMode),
        };
        let positive = |v: Option<f64>, field: &'static str, default: f64| match v {
            None => Ok(default),
            Some(x) if x.is_finite() && x > 0.0 => Ok(x),
            Some(x) => Err(ConfigError::Invalid { field, message: format!("must be > 0, got {x}") }),
        };
        let at_least_one = |v: Option<usize>, field: &'static str, default: usize| match v {
            None => Ok(default),
            Some(0) => Err(ConfigError::Invalid { field, message: "must be >= 1".into() }),
            Some(n) => Ok(n),
        };
        let finite = |v: Option<f64>, field: &'static str| match v {
            Some(x) if !x.is_finite() => {
                Err(ConfigError::Invalid { field, message: format!("must be finite, got {x}") })
            }
            other => Ok(other),
        };
        let c = match self.c {
            None => None,
            Some(v) => {
                let arr: [f64; 8] = v.as_slice().try_into().map_err(|_| ConfigError::Invalid {
                    field: "c",
                    message: format!("expected 8 values, got {}", v.len()),
                })?;
                if arr.iter().any(|x| !x.is_finite()) {
                    return Err(ConfigError::Invalid { field: "c", message: "values must be finite".into() });
                }
                Some(arr)
            }
        };
        let omega = match self.omega {
            Some(w) if !(w.is_finite() && w > 0.0) => {
                return Err(ConfigError::Invalid { field: "omega", message: format!("must be > 0, got {w}") })
            }
            other => other,
        };
        Ok(RunConfig {
            mode,
            omega,
            q0: finite(self.q0, "q0")?,
            p0: finite(self.p0, "p0")?,
            c,
            dt: positive(self.dt, "dt", 1e-3)?,
            t_end: positive(self.t_end, "t_end", 20.0)?,
            record_every: at_least_one(self.record_every, "record_every", 1)?,
            trials: at_least_one(self.trials, "trials", mode.default_trials())?,
            tol: positive(self.tol, "tol", mode.default_tol())?,
            seed: self.seed.unwrap_or(0),
            out_path: self.out,
        })
    }
}

/// Parses a flat JSON object of run fields. `out_path` is accepted as an
/// alias of `out`.
pub fn parse_config(text: &str) -> Result<Overrides, ConfigError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::Invalid { field: "<file>", message: e.to_string() })?;
    let Value::Object(map) = value else {
        return Err(ConfigError::Invalid { field: "<file>", message: "expected a JSON object".into() });
    };
    let mut out = Overrides::default();
    for (key, v) in map {
        fn take<T: serde::de::DeserializeOwned>(field: &'static str, v: Value) -> Result<Option<T>, ConfigError> {
            serde_json::from_value(v)
                .map(Some)
                .map_err(|e| ConfigError::Invalid { field, message: e.to_string() })
        }
        match key.as_str() {
            "mode" => out.mode = take("mode", v)?,
            "omega" => out.omega = take("omega", v)?,
            "q0" => out.q0 = take("q0", v)?,
            "p0" => out.p0 = take("p0", v)?,
            "c" => out.c = take("c", v)?,
            "dt" => out.dt = take("dt", v)?,
            "t_end" => out.t_end = take("t_end", v)?,
            "record_every" => out.record_every = take("record_every", v)?,
            "trials" => out.trials = take("trials", v)?,
            "tol" => out.tol = take("tol", v)?,
            "seed" => out.seed = take("seed", v)?,
            "out" | "out_path" => out.out = take("out", v)?,
            _ => return Err(ConfigError::Unknown(key)),
        }
    }
    Ok(out)
}

/// Reads and validates a config file on its own (no flag overrides).
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    read_overrides(path)?.resolve(None)
}

fn read_overrides(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

#[derive(Debug, Parser)]
#[command(name = "oplax", version, about = "Operadic Lax representation of the harmonic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Flat JSON file of run fields; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the coupled system and write the trajectory CSV.
    Simulate,
    /// Run a verification suite and write its JSON report.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Finite-difference residual of the transport equation on random states.
    PdeCheck,
    /// Gerstenhaber bracket of two operations read from JSON files.
    Bracket { f: PathBuf, g: PathBuf },
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Suite {
    Operad,
    Theorem,
    Identities,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mode = match &cli.command {
        Some(Command::Bracket { f, g }) => return cmd_bracket(f, g, cli.flags.out.as_deref()),
        Some(Command::Simulate) => Some(Mode::Simulate),
        Some(Command::PdeCheck) => Some(Mode::PdeCheck),
        Some(Command::Verify { suite }) => Some(match suite {
            Suite::Operad => Mode::VerifyOperad,
            Suite::Theorem => Mode::VerifyTheorem,
            Suite::Identities => Mode::VerifyIdentities,
        }),
        None => None,
    };
    let resolved = match &cli.config {
        Some(path) => read_overrides(path).map(|file| cli.flags.clone().or(file)),
        None => Ok(cli.flags.clone()),
    }
    .and_then(|merged| merged.resolve(mode));
    let config = match resolved {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    match config.mode {
        Mode::Simulate => cmd_simulate(&config),
        _ => cmd_verify(&config),
    }
}

fn usage_error(e: &ConfigError) -> i32 {
    eprintln!("error: {e}");
    eprintln!();
    eprintln!("{}", Cli::command().render_usage());
    EXIT_USAGE
}

pub fn cmd_simulate(config: &RunConfig) -> i32 {
    let integrator = match config.integrator() {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    let traj = match evolve(&integrator) {
        Ok(t) => t,
        Err(e @ Error::DegenerateState { .. }) => {
            return usage_error(&ConfigError::Degenerate(e.to_string()))
        }
        Err(e @ (Error::Validation(_) | Error::Dimension(_))) => {
            return usage_error(&ConfigError::Rejected(e.to_string()))
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let summary = format!(
        "records={} max_err_mu={} max_energy_drift={} max_g={}",
        traj.records.len(),
        format_number(traj.max_err_mu()),
        format_number(traj.max_energy_drift()),
        format_number(traj.max_g()),
    );
    let written = match &config.out_path {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            traj.write_csv(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            traj.write_csv(&mut w).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write trajectory: {e}");
        return EXIT_FAILURE;
    }
    if config.out_path.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    EXIT_OK
}

/// Runs the suite selected by `config.mode`.
pub fn run_suite(config: &RunConfig) -> crate::Result<VerificationReport> {
    let (trials, seed, tol) = (config.trials, config.seed, config.tol);
    match config.mode {
        Mode::VerifyOperad => operad_suite(trials, seed, tol),
        Mode::VerifyTheorem => theorem_suite(trials, seed, tol, config.dt, config.t_end),
        Mode::VerifyIdentities => identities_suite(trials, seed, tol),
        Mode::PdeCheck => pde_suite(trials, seed, tol),
        Mode::Simulate => Err(Error::Validation("simulate is not a verification suite".into())),
    }
}

pub fn cmd_verify(config: &RunConfig) -> i32 {
    let report = match run_suite(config) {
        Ok(r) => r,
        Err(e @ Error::Validation(_)) => {
            return usage_error(&ConfigError::Rejected(e.to_string()))
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = write_text(config.out_path.as_deref(), &json) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_FAILURE;
    }
    for check in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL {}: residual {} (seed {})",
            check.law_name,
            format_number(check.max_abs_residual),
            check.worst_case_seed
        );
    }
    if report.overall_pass {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn cmd_bracket(f: &Path, g: &Path, out: Option<&Path>) -> i32 {
    let read = |path: &Path| -> Result<Operation, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Operation::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    };
    let (f, g) = match (read(f), read(g)) {
        (Ok(f), Ok(g)) => (f, g),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let bracket = match gerstenhaber_bracket(&f, &g) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match write_text(out, &bracket.to_json()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write bracket: {e}");
            EXIT_FAILURE
        }
    }
}

fn write_text(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}")?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_example_is_valid() {
        let text = r#"{"mode":"simulate","omega":1,"q0":0,"p0":1,"dt":0.001,"t_end":20,"c":[0,0,0,0,1,0,0,0]}"#;
        let config = parse_config(text).unwrap().resolve(None).unwrap();
        assert_eq!(config.mode, Mode::Simulate);
        let integrator = config.integrator().unwrap();
        assert_eq!(integrator.dt, 1e-3);
        assert_eq!(integrator.params, MuParams::unit(5));
    }

    #[test]
    fn negative_dt_names_field() {
        let err = parse_config(r#"{"dt":-0.1}"#).unwrap().resolve(Some(Mode::Simulate)).unwrap_err();
        assert!(err.to_string().contains("`dt`"), "{err}");
        let err = parse_config(r#"{"trials":-3}"#).unwrap_err();
        assert!(err.to_string().contains("`trials`"), "{err}");
        let err = parse_config(r#"{"dtt":1}"#).unwrap_err();
        assert_eq!(err, ConfigError::Unknown("dtt".into()));
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config(r#"{"dt":0.001,"seed":9,"out_path":"a.csv"}"#).unwrap();
        let flags = Overrides { dt: Some(5e-4), ..Default::default() };
        let config = flags.or(file).resolve(Some(Mode::VerifyTheorem)).unwrap();
        assert_eq!(config.dt, 5e-4);
        assert_eq!(config.seed, 9);
        assert_eq!(config.out_path, Some(PathBuf::from("a.csv")));
    }

    #[test]
    fn mode_defaults() {
        let cfg = Overrides::default().resolve(Some(Mode::VerifyIdentities)).unwrap();
        assert_eq!((cfg.trials, cfg.tol, cfg.seed), (1000, 1e-12, 0));
        let cfg = Overrides::default().resolve(Some(Mode::VerifyOperad)).unwrap();
        assert_eq!((cfg.trials, cfg.tol), (200, 1e-10));
        assert_eq!(Overrides::default().resolve(None), Err(ConfigError::NoMode));
    }

    #[test]
    fn c_needs_eight_values() {
        let flags = Overrides { c: Some(vec![1.0; 7]), ..Default::default() };
        let err = flags.resolve(Some(Mode::Simulate)).unwrap_err();
        assert!(err.to_string().contains("`c`"));
    }

    #[test]
    fn missing_omega_is_usage_error() {
        let code = run(["oplax", "simulate", "--q0", "0", "--p0", "1", "--c", "0,0,0,0,1,0,0,0"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn degenerate_energy_is_usage_error() {
        let code = run(["oplax", "simulate", "--omega", "1", "--q0", "0", "--p0", "0", "--c", "0,0,0,0,1,0,0,0"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["oplax", "verify", "operad", "--bogus"]), EXIT_USAGE);
    }
}
