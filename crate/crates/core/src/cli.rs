//! The `smc` command-line tool.
//!
//! Standard output carries data only; progress goes to standard error. Every
//! output file starts with `#` comment lines echoing the resolved
//! configuration, and directory outputs also get a `manifest.json` that
//! `smc replay` re-runs to byte-identical data files.
//!
//! Exit codes: 0 success (or every chain reached its goal), 1 usage or input
//! error, 2 a chain hit `max_iterations`, 3 a chain froze.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::anneal::{run_realizations, AnnealConfig, Goal, InitialTemp, ProgressEvent, Termination};
use crate::diagnostics::{
    acf_panels, ar1_generate_with, folded_cdf_tsv, period_average, phase_diagram, sine_generate, Ar1Init,
    StochasticVolatility,
};
use crate::empirical::{EmpiricalDistribution, PlottingPosition};
use crate::error::{Result, SmcError};
use crate::features::{rho, FeatureSpec, ObjectiveMode};
use crate::ingest::{self, ColumnSelector, ReturnSeries};

#[derive(Debug, Parser)]
#[command(name = "smc", version, about = "Surrogate Monte Carlo time series generator")]
pub struct Cli {
    /// Suppress progress output on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the empirical distribution of a series and write its knot table.
    Fit(FitArgs),
    /// Draw i.i.d. values from a fitted distribution table.
    Sample(SampleArgs),
    /// Generate surrogate realizations by annealing.
    Surrogate(SurrogateArgs),
    /// Write comparison tables for a target and a surrogate series.
    Diagnose(DiagnoseArgs),
    /// Toy series generators.
    #[command(subcommand)]
    Toy(ToyCommand),
    /// Re-run the command recorded in a manifest into a fresh directory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct InputArgs {
    /// Delimited text file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding the prices (or returns with --returns): name or
    /// zero-based index. Defaults to `close`, or `value` with --returns.
    #[arg(long = "price-col")]
    price_col: Option<String>,
    /// Return interval in rows.
    #[arg(long, default_value_t = 1)]
    interval: usize,
    /// The column already holds returns; skip the log-return step.
    #[arg(long)]
    returns: bool,
}

impl InputArgs {
    fn column(&self) -> ColumnSelector {
        let default = if self.returns { "value" } else { "close" };
        self.price_col
            .as_deref()
            .unwrap_or(default)
            .parse()
            .expect("infallible")
    }

    fn load(&self) -> Result<(ReturnSeries, Option<f64>)> {
        if self.returns {
            return Ok((ingest::parse_return_csv(&self.input, &self.column())?, None));
        }
        let prices = ingest::parse_price_csv(&self.input, &self.column())?;
        let first = prices.prices()[0];
        Ok((ingest::log_returns(&prices, self.interval)?, Some(first)))
    }

    fn describe(&self, out: &mut String) {
        let _ = writeln!(out, "# input = {}", self.input.display());
        let _ = writeln!(out, "# column = {}", self.column());
        let _ = writeln!(out, "# returns = {}", self.returns);
        let _ = writeln!(out, "# interval = {}", self.interval);
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Distribution table written by `smc fit`.
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, env = "SMC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum Preset {
    /// Stylized facts with L = 40, K = 200.
    Sp500,
    /// Stylized facts with L from --L and K from --K.
    Stylized,
    /// Return autocorrelation up to --L.
    Acf,
}

#[derive(Debug, Args)]
struct SurrogateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Feature spec file (TOML).
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Short lag for the stylized and acf presets.
    #[arg(long = "L", default_value_t = 10)]
    short_lag: usize,
    /// Long lag for the stylized preset.
    #[arg(long = "K", default_value_t = 50)]
    long_lag: usize,
    /// Aggregate as |sum - sum| instead of per-lag absolute differences.
    #[arg(long = "paper-literal")]
    paper_literal: bool,
    #[arg(long = "n-real", default_value_t = 1)]
    n_real: usize,
    #[arg(long, env = "SMC_SEED", default_value_t = 0)]
    seed: u64,
    /// Surrogate length; defaults to the target length.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long = "max-iterations", default_value_t = 100_000_000)]
    max_iterations: u64,
    /// Objective value to stop at; by default stop when every lag is inside
    /// the 99% band.
    #[arg(long)]
    goal: Option<f64>,
    #[arg(long = "cooling-factor", default_value_t = 0.9)]
    cooling_factor: f64,
    /// Fixed starting temperature; automatic when omitted.
    #[arg(long = "initial-temp")]
    initial_temp: Option<f64>,
    #[arg(long = "log-every", default_value_t = 1_000_000)]
    log_every: u64,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    surrogate: PathBuf,
    #[arg(long = "L", default_value_t = 40)]
    short_lag: usize,
    #[arg(long = "K", default_value_t = 200)]
    long_lag: usize,
    /// Embedding lag of the phase diagram.
    #[arg(long = "phase-lag", default_value_t = 1)]
    phase_lag: usize,
    /// Also write the per-phase mean and spread for this period.
    #[arg(long)]
    period: Option<usize>,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum ToyCommand {
    /// AR(1) series z_t = p z_{t-1} + e_t.
    Ar1 {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "SMC_SEED", default_value_t = 0)]
        seed: u64,
        /// Start from zero and discard this many steps instead of starting
        /// from the stationary law.
        #[arg(long = "burn-in")]
        burn_in: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled sine wave sin(2 pi t / T).
    Sine {
        #[arg(long = "T")]
        period: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heteroskedastic returns from a log-volatility AR(1) with leverage.
    Sv {
        #[arg(long)]
        n: usize,
        #[arg(long, env = "SMC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        phi: f64,
        #[arg(long = "vol-of-vol", default_value_t = 0.35)]
        vol_of_vol: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = -0.6)]
        leverage: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

/// Directory-run manifest.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    command: String,
    /// Arguments after the program name, minus `--out-dir` and `--quiet`.
    argv: Vec<String>,
    config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    realizations: Vec<RealizationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RealizationRecord {
    index: usize,
    seed: u64,
    file: String,
    terminated_by: Termination,
    iterations: u64,
    accepted: u64,
    final_delta: f64,
    initial_temperature: f64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<i32> {
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Sample(a) => sample(a),
        Command::Surrogate(a) => surrogate(a, argv, cli.quiet),
        Command::Diagnose(a) => diagnose(a, argv),
        Command::Toy(t) => toy(t),
        Command::Replay(a) => replay(a, cli.quiet),
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| SmcError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| SmcError::io("<stdout>", e))
        }
    }
}

fn write_in(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| SmcError::io(path, e))
}

fn series_text(header: &str, values: &[f64]) -> String {
    let mut out = String::with_capacity(header.len() + 24 * values.len());
    out.push_str(header);
    out.push_str("value\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    write_in(dir, "manifest.json", &text)
}

fn fit(a: FitArgs) -> Result<i32> {
    let (returns, _) = a.input.load()?;
    let dist = crate::empirical::fit_empirical_cdf(&returns)?;
    let mut out = String::from("# smc fit\n");
    a.input.describe(&mut out);
    let _ = writeln!(out, "# plotting positions = (i + 0.5) / N");
    out.push_str(&dist.to_table_string());
    emit(a.out.as_deref(), &out)?;
    Ok(0)
}

fn sample(a: SampleArgs) -> Result<i32> {
    let dist = EmpiricalDistribution::read_table(&a.dist)?;
    let draw = dist.sample_iid(a.n, a.seed)?;
    let header = format!(
        "# smc sample\n# dist = {}\n# n = {}\n# seed = {}\n",
        a.dist.display(),
        a.n,
        a.seed
    );
    emit(a.out.as_deref(), &series_text(&header, &draw.values))?;
    Ok(0)
}

fn resolve_spec(a: &SurrogateArgs) -> Result<FeatureSpec> {
    let mut spec = match (&a.spec, a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| SmcError::io(path, e))?;
            FeatureSpec::from_toml(&text)?
        }
        (None, Some(Preset::Sp500)) => FeatureSpec::sp500(),
        (None, Some(Preset::Acf)) => FeatureSpec::autocorrelation(a.short_lag),
        (None, Some(Preset::Stylized) | None) => FeatureSpec::stylized_facts(a.short_lag, a.long_lag),
    };
    if a.paper_literal {
        spec.mode = ObjectiveMode::PaperLiteral;
    }
    Ok(spec)
}

fn surrogate(a: SurrogateArgs, argv: Vec<String>, quiet: bool) -> Result<i32> {
    let (returns, first_price) = a.input.load()?;
    let spec = resolve_spec(&a)?;
    let target_values = ingest::demean(&returns).into_values();
    let target = rho(&target_values, &spec)?;
    let dist = EmpiricalDistribution::fit(returns.values(), PlottingPosition::Midpoint)?;
    let n = a.length.unwrap_or(returns.len());
    let cfg = AnnealConfig {
        initial_temp: a
            .initial_temp
            .map_or(InitialTemp::Auto { probes: 1000 }, InitialTemp::Fixed),
        cooling_factor: a.cooling_factor,
        goal: a.goal.map_or(Goal::Band, Goal::Delta),
        max_iterations: a.max_iterations,
        log_every: a.log_every,
        seed: a.seed,
        ..AnnealConfig::default()
    };
    cfg.validate(n)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| SmcError::io(&a.out_dir, e))?;

    let (tx, rx) = mpsc::channel::<ProgressEvent>();
    let printer = std::thread::spawn(move || {
        for ev in rx {
            if !quiet {
                eprintln!(
                    "realization {} iteration {} delta {:.6e} temperature {:.3e}",
                    ev.realization, ev.iteration, ev.delta, ev.temperature
                );
            }
        }
    });
    let reports = run_realizations(a.n_real, a.seed, &dist, n, &target, &spec, &cfg, Some(&tx));
    drop(tx);
    let _ = printer.join();
    let reports = reports?;

    let mut config_header = String::from("# smc surrogate\n");
    a.input.describe(&mut config_header);
    let _ = writeln!(config_header, "# base seed = {}", a.seed);

    write_in(
        &a.out_dir,
        "target.txt",
        &series_text(&format!("{config_header}# target returns\n"), returns.values()),
    )?;
    write_in(&a.out_dir, "spec.toml", &spec.to_toml())?;

    let mut records = Vec::with_capacity(reports.len());
    let mut code = 0;
    for (k, r) in reports.iter().enumerate() {
        let file = format!("realization_{k}.txt");
        let header = format!(
            "{config_header}# realization = {k}\n# seed = {}\n# terminated_by = {:?}\n# iterations = {}\n# final_delta = {}\n",
            r.seed, r.terminated_by, r.iterations, r.final_delta
        );
        write_in(&a.out_dir, &file, &series_text(&header, &r.final_series))?;
        if let Some(p0) = first_price {
            let mut path = format!("# cumulative price path from the first input price\nstep\tprice\n0\t{p0}\n");
            let mut log_p = p0.ln();
            for (t, x) in r.final_series.iter().enumerate() {
                log_p += x;
                let _ = writeln!(path, "{}\t{}", t + 1, log_p.exp());
            }
            write_in(&a.out_dir, &format!("path_{k}.tsv"), &path)?;
        }
        code = code.max(r.terminated_by.exit_code());
        records.push(RealizationRecord {
            index: k,
            seed: r.seed,
            file,
            terminated_by: r.terminated_by,
            iterations: r.iterations,
            accepted: r.accepted,
            final_delta: r.final_delta,
            initial_temperature: r.initial_temperature,
        });
    }
    let manifest = Manifest {
        command: "surrogate".into(),
        argv: recorded_argv(&argv),
        config: serde_json::json!({
            "input": a.input,
            "spec": spec,
            "anneal": cfg,
            "n_real": a.n_real,
            "length": n,
            "seed_rule": "realization k uses derive_seed(base seed, k)",
        }),
        realizations: records,
        notes: vec!["99% band = 2.576 / sqrt(N - lag) under a white-noise null".into()],
    };
    write_manifest(&a.out_dir, &manifest)?;
    Ok(code)
}

fn diagnose(a: DiagnoseArgs, argv: Vec<String>) -> Result<i32> {
    let x = ingest::read_series_file(&a.target)?;
    let z = ingest::read_series_file(&a.surrogate)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| SmcError::io(&a.out_dir, e))?;

    let panels = acf_panels(&x, &z, a.short_lag, a.long_lag)?;
    write_in(&a.out_dir, "acf_abs.tsv", &panels.absolute.to_tsv())?;
    write_in(&a.out_dir, "acf_lev.tsv", &panels.leverage.to_tsv())?;
    write_in(&a.out_dir, "acf_ret.tsv", &panels.returns.to_tsv())?;

    let fold_x = EmpiricalDistribution::fit(&x, PlottingPosition::Midpoint)?.folded_cdf();
    let fold_z = EmpiricalDistribution::fit(&z, PlottingPosition::Midpoint)?.folded_cdf();
    write_in(
        &a.out_dir,
        "cdf_fold.tsv",
        &folded_cdf_tsv(&[("target", &fold_x), ("surrogate", &fold_z)]),
    )?;

    let mut phase = format!(
        "# phase diagram, embedding lag {}\nsource\tz_t\tz_t_plus_lag\n",
        a.phase_lag
    );
    for (name, series) in [("target", &x), ("surrogate", &z)] {
        for (p, q) in phase_diagram(series, a.phase_lag)?.points {
            let _ = writeln!(phase, "{name}\t{p}\t{q}");
        }
    }
    write_in(&a.out_dir, "phase.tsv", &phase)?;

    if let Some(period) = a.period {
        let (mean, sd) = period_average(&z, period)?;
        let mut out = format!("# surrogate mean and sd over complete periods of {period}\nphase\tmean\tsd\n");
        for k in 0..period {
            let _ = writeln!(out, "{k}\t{}\t{}", mean[k], sd[k]);
        }
        write_in(&a.out_dir, "period.tsv", &out)?;
    }

    let manifest = Manifest {
        command: "diagnose".into(),
        argv: recorded_argv(&argv),
        config: serde_json::json!({
            "target": a.target,
            "surrogate": a.surrogate,
            "L": a.short_lag,
            "K": a.long_lag,
            "phase_lag": a.phase_lag,
            "period": a.period,
        }),
        realizations: Vec::new(),
        notes: vec![
            "99% band = 2.576 / sqrt(N - lag) under a white-noise null".into(),
            "leverage panel correlates x_t with |x_{t+lag}|".into(),
        ],
    };
    write_manifest(&a.out_dir, &manifest)?;
    Ok(0)
}

fn toy(cmd: ToyCommand) -> Result<i32> {
    match cmd {
        ToyCommand::Ar1 {
            p,
            n,
            seed,
            burn_in,
            out,
        } => {
            let init = burn_in.map_or(Ar1Init::Stationary, Ar1Init::BurnIn);
            let z = ar1_generate_with(p, n, seed, init)?;
            let header = format!("# smc toy ar1\n# p = {p}\n# n = {n}\n# seed = {seed}\n# init = {init:?}\n");
            emit(out.as_deref(), &series_text(&header, &z))?;
        }
        ToyCommand::Sine { period, n, out } => {
            let y = sine_generate(period, n)?;
            let header = format!("# smc toy sine\n# T = {period}\n# n = {n}\n");
            emit(out.as_deref(), &series_text(&header, &y))?;
        }
        ToyCommand::Sv {
            n,
            seed,
            phi,
            vol_of_vol,
            leverage,
            out,
        } => {
            let model = StochasticVolatility {
                phi,
                vol_of_vol,
                leverage,
            };
            let x = model.generate(n, seed)?;
            let header = format!(
                "# smc toy sv\n# n = {n}\n# seed = {seed}\n# phi = {phi}\n# vol_of_vol = {vol_of_vol}\n# leverage = {leverage}\n"
            );
            emit(out.as_deref(), &series_text(&header, &x))?;
        }
    }
    Ok(0)
}

fn replay(a: ReplayArgs, quiet: bool) -> Result<i32> {
    let text = fs::read_to_string(&a.manifest).map_err(|e| SmcError::io(&a.manifest, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| SmcError::Config(e.to_string()))?;
    let mut full = vec!["smc".to_string()];
    if quiet {
        full.push("--quiet".into());
    }
    full.extend(manifest.argv);
    full.push("--out-dir".into());
    full.push(a.out_dir.to_string_lossy().into_owned());
    let cli = Cli::try_parse_from(&full).map_err(|e| SmcError::Config(e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(SmcError::Config("a manifest cannot replay another replay".into()));
    }
    dispatch(cli, full[1..].to_vec())
}

/// Arguments worth recording: everything except the output directory and
/// verbosity, neither of which changes what gets written.
fn recorded_argv(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out-dir" => {
                it.next();
            }
            "-q" | "--quiet" => {}
            a if a.starts_with("--out-dir=") => {}
            _ => out.push(arg.clone()),
        }
    }
    out
}
