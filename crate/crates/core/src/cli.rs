//! Command-line front end. The binary only parses arguments and maps errors
//! to exit codes; everything else lives here so it can be tested.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::adversary::{lhv_max_j, FateAssignment, Strategy};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::inequality::{epsilon_ab, normalized_eberhard_value};
use crate::martingale::{
    concentrate, default_streak, hoeffding_pvalue, plan_runtime, Analyzer, IncrementSpec, RuntimePlan,
};
use crate::optimizer::{critical_efficiency, optimize_j, CriticalEfficiency, OptimizationResult};
use crate::report::{to_json_string, AnalysisReport};
use crate::simulate::simulate;
use crate::spacetime::{validate_geometry, GeometryReport};
use crate::trial_csv::{open_trials_file, TrialWriter};

const YEAR: f64 = 365.25 * 86400.0;

#[derive(Debug, Parser)]
#[command(
    name = "bellstat",
    version,
    about = "Bell-test simulation and supermartingale analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trial CSV from the quantum model or an adversary.
    Simulate,
    /// Analyze a trial CSV and write a JSON report.
    Analyze,
    /// Run-time estimate with and without concentration.
    Plan,
    /// Optimize the CH-E value over state and angles.
    Optimize,
    /// Check the space-time arrangement.
    Spacetime,
    /// Run internal consistency checks.
    Selftest,
}

#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input trial CSV (analyze).
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub stream: Option<u64>,
    /// Predictability mode: communication-fraction, excess-predictability, beyond-half.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Streak length of the stopping rule.
    #[arg(long = "s", global = true)]
    pub streak: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
}

impl Opts {
    fn load_config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = self.seed {
            cfg.set("seed", v)?;
        }
        if let Some(v) = self.stream {
            cfg.set("stream", v)?;
        }
        if let Some(v) = &self.mode {
            cfg.set("mode", v)?;
        }
        if let Some(v) = self.streak {
            cfg.set("s", v)?;
        }
        if let Some(v) = self.trials {
            cfg.set("trials", v)?;
        }
        Ok(cfg)
    }
}

/// Runs one command, writing human-readable output to `stdout`, and returns
/// the process exit status.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Simulate => cmd_simulate(&cli.opts, stdout),
        Command::Analyze => cmd_analyze(&cli.opts, stdout),
        Command::Plan => cmd_plan(&cli.opts, stdout),
        Command::Optimize => cmd_optimize(&cli.opts, stdout),
        Command::Spacetime => cmd_spacetime(&cli.opts, stdout),
        Command::Selftest => cmd_selftest(stdout),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_all(out: &mut dyn Write, text: &str, path: &Path) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `text` to `--out` if given, otherwise to `stdout`.
fn emit(opts: &Opts, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match &opts.out {
        Some(path) => write_all(&mut create(path)?, text, path),
        None => write_all(stdout, text, Path::new("<stdout>")),
    }
}

/// Resolved configuration as `# key = value` comment lines.
fn config_comment(resolved: &BTreeMap<String, Value>) -> String {
    let mut s = String::new();
    for (k, v) in resolved {
        let v = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

fn cmd_simulate(opts: &Opts, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = opts.load_config()?;
    let source = cfg.trial_source()?;
    let seed = cfg.rng_seed()?;
    let n = cfg
        .opt_u64("trials")?
        .ok_or_else(|| Error::validation("`trials` is required"))?;
    let stream = simulate(&source, n, seed)?;
    eprint!("{}", config_comment(&cfg.resolved()));
    match &opts.out {
        Some(path) => {
            let mut w = TrialWriter::new(create(path)?)?;
            for t in stream {
                w.write(&t)?;
            }
            w.finish()?.flush().map_err(|e| Error::io(path, e))?;
        }
        None => {
            let mut w = TrialWriter::new(&mut *stdout)?;
            for t in stream {
                w.write(&t)?;
            }
            w.finish()?;
        }
    }
    Ok(0)
}

fn cmd_analyze(opts: &Opts, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = opts.load_config()?;
    let input = opts
        .input
        .as_deref()
        .ok_or_else(|| Error::validation("analyze needs --in <trials.csv>"))?;
    let profile = cfg.settings_profile()?;
    let name = cfg.parsed_or("increment", IncrementSpec::default_name_for(profile.mode))?;
    let spec = IncrementSpec::from_profile(&profile, name)?.with_guard(cfg.f64_or("guard", 0.0)?)?;
    let shift = spec.weights()?.shift;
    let streak = cfg.get("s")?.unwrap_or_else(|| default_streak(shift));
    let mut analyzer = Analyzer::new(spec, streak)?;
    for t in open_trials_file(input)? {
        analyzer.push(&t?)?;
    }
    let summary = analyzer.finish()?;
    let mut resolved = cfg.resolved();
    resolved.insert("in".into(), Value::String(input.display().to_string()));
    resolved.insert("s".into(), serde_json::json!(summary.s));
    let report = AnalysisReport::new(&summary, &profile, &resolved);
    let mut text = to_json_string(&report)?;
    text.push('\n');
    emit(opts, stdout, &text)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct PlanReport {
    #[serde(flatten)]
    plan: RuntimePlan,
    t_plain_years: f64,
    t_doob_hours: f64,
    config: BTreeMap<String, Value>,
}

fn cmd_plan(opts: &Opts, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = opts.load_config()?;
    let rate = cfg.f64_req("R")?;
    let j = cfg.f64_req("J")?;
    let eps_ab = match cfg.opt_f64("epsAB")? {
        Some(e) => e,
        None => {
            let profile = cfg.settings_profile()?;
            epsilon_ab(profile.eps_a, profile.eps_b)?
        }
    };
    let c = cfg.f64_or("c", 20.0)?;
    let f = cfg.f64_or("f", 1.0)?;
    let range = match cfg.opt_f64("range")? {
        Some(r) => r,
        None => crate::martingale::range(&IncrementSpec::plain(cfg.settings_profile()?.p_ij())?)?,
    };
    let streak = match cfg.get::<u64>("s")? {
        Some(s) => s,
        // Without a shift no streak is needed and none inflates the range.
        None if eps_ab == 0.0 => 0,
        None => default_streak(eps_ab),
    };
    let mut resolved = cfg.resolved();
    resolved.insert("epsAB".into(), serde_json::json!(eps_ab));
    resolved.insert("range".into(), serde_json::json!(range));
    resolved.insert("s".into(), serde_json::json!(streak));
    let plan = plan_runtime(rate, j, eps_ab, c, f, streak, range)?;

    let mut text = config_comment(&resolved);
    let _ = writeln!(text, "{:<14} {:>24} {:>14}", "quantity", "value", "human");
    let _ = writeln!(
        text,
        "{:<14} {:>24.16e} {:>11.2} yr",
        "t_plain",
        plan.t_plain,
        plan.t_plain / YEAR
    );
    let _ = writeln!(
        text,
        "{:<14} {:>24.16e} {:>12.2} h",
        "t_doob",
        plan.t_doob,
        plan.t_doob / 3600.0
    );
    let _ = writeln!(text, "{:<14} {:>24.16e} {:>14}", "c_adjusted", plan.c_adjusted, "");
    write_all(stdout, &text, Path::new("<stdout>"))?;
    if let Some(path) = &opts.out {
        let report = PlanReport {
            plan,
            t_plain_years: plan.t_plain / YEAR,
            t_doob_hours: plan.t_doob / 3600.0,
            config: resolved,
        };
        let mut json = to_json_string(&report)?;
        json.push('\n');
        write_all(&mut create(path)?, &json, path)?;
    }
    Ok(0)
}

fn optimize_row(r: &OptimizationResult) -> String {
    let a = r.angles_star;
    format!(
        "{:.6},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.eta, r.best_j, r.r_star, a[0], a[1], a[2], a[3]
    )
}

fn cmd_optimize(opts: &Opts, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = opts.load_config()?;
    let etas = cfg.f64_list("eta", &[1.0])?;
    let fixed_r = cfg.opt_f64("fixed_r")?;
    let visibility = cfg.f64_or("visibility", 1.0)?;
    let p_dark = cfg.f64_or("pDark", 0.0)?;
    let threshold = cfg.bool_or("threshold", false)?;
    let tol = cfg.f64_or("tol", 1e-3)?;
    if etas.is_empty() {
        return Err(Error::validation("`eta` lists no values"));
    }
    let rows = etas
        .iter()
        .map(|&eta| optimize_j(eta, fixed_r, visibility, p_dark))
        .collect::<Result<Vec<_>>>()?;
    let critical: Option<CriticalEfficiency> = if threshold {
        Some(critical_efficiency(fixed_r, visibility, p_dark, tol)?)
    } else {
        None
    };

    let header = "eta,best_j,r_star,alpha1,alpha2,beta1,beta2\n";
    let mut text = config_comment(&cfg.resolved());
    let _ = writeln!(
        text,
        "{:>8} {:>13} {:>9} {:>9} {:>9} {:>9} {:>9} {:>6}",
        "eta", "best_j", "r_star", "alpha1", "alpha2", "beta1", "beta2", "conv"
    );
    for r in &rows {
        let a = r.angles_star;
        let _ = writeln!(
            text,
            "{:>8.4} {:>13.6e} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>6}",
            r.eta, r.best_j, r.r_star, a[0], a[1], a[2], a[3], r.converged
        );
    }
    if let Some(c) = critical {
        let _ = writeln!(text, "critical eta = {:.6} (bracket [{:.6}, {:.6}])", c.eta, c.lo, c.hi);
    }
    write_all(stdout, &text, Path::new("<stdout>"))?;
    if let Some(path) = &opts.out {
        let mut csv = header.to_owned();
        for r in &rows {
            csv.push_str(&optimize_row(r));
            csv.push('\n');
        }
        write_all(&mut create(path)?, &csv, path)?;
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SpacetimeJson<'a> {
    #[serde(flatten)]
    report: &'a GeometryReport,
    config: BTreeMap<String, Value>,
}

fn cmd_spacetime(opts: &Opts, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = opts.load_config()?;
    let config = cfg.spacetime()?;
    let report = validate_geometry(&config)?;
    let mut json = to_json_string(&SpacetimeJson {
        report: &report,
        config: cfg.resolved(),
    })?;
    json.push('\n');

    let mut text = config_comment(&cfg.resolved());
    let _ = writeln!(text, "tau1 = {:.6e} s", report.limits.tau1);
    let _ = writeln!(text, "tau2 = {:.6e} s", report.limits.tau2);
    let _ = writeln!(text, "{:<20} {:>14} {:>4}", "constraint", "margin_s", "ok");
    for c in &report.constraints {
        let ok = if c.satisfied { "yes" } else { "NO" };
        let _ = writeln!(text, "{:<20} {:>14.6e} {:>4}", c.name, c.margin, ok);
    }
    let _ = writeln!(text, "feasible: {}", if report.feasible { "yes" } else { "no" });
    match &opts.out {
        Some(path) => write_all(&mut create(path)?, &json, path)?,
        None => text.push_str(&json),
    }
    write_all(stdout, &text, Path::new("<stdout>"))?;
    Ok(if report.feasible { 0 } else { 3 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The internal identities run by `bellstat selftest`.
pub fn selftest_checks() -> Vec<Check> {
    let mut checks = Vec::new();

    let lhv = lhv_max_j();
    let worst16 = Strategy::all().map(|s| s.j()).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "lhv-enumeration",
        passed: lhv.max_j == 0.0 && worst16 == 0.0,
        detail: format!("max J over 16 strategies = {worst16}"),
    });

    let worst81 = FateAssignment::all()
        .map(|f| normalized_eberhard_value(&f.probs()).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "three-outcome-enumeration",
        passed: worst81 <= 0.0,
        detail: format!("max over 81 assignments = {worst81}"),
    });

    let eps = 1e-3;
    let incs: Vec<f64> = (0..1000u32)
        .map(|k| match k % 7 {
            0 => 4.0 - eps,
            3 => -4.0 - eps,
            _ => -eps,
        })
        .collect();
    let conc = concentrate(incs.iter().copied(), 0, eps);
    let mut sum = 0.0;
    let identity = conc.m == incs.len() as u64
        && incs.iter().zip(&conc.stopped_values).all(|(k, z)| {
            sum += k;
            sum.to_bits() == z.to_bits()
        });
    checks.push(Check {
        name: "s0-concentration-identity",
        passed: identity,
        detail: format!("M = {} of N = {}", conc.m, incs.len()),
    });

    let want = (-12.5f64).exp();
    let (p1, p2) = (
        hoeffding_pvalue(20.0, 1, 8.0).unwrap_or(f64::NAN),
        hoeffding_pvalue(22.5, 1, 9.0).unwrap_or(f64::NAN),
    );
    checks.push(Check {
        name: "range-compensation-identity",
        passed: (p1 - want).abs() <= 1e-15 && (p2 - want).abs() <= 1e-15,
        detail: format!("p(20, 8) = {p1:e}, p(22.5, 9) = {p2:e}"),
    });
    checks
}

fn cmd_selftest(stdout: &mut dyn Write) -> Result<i32> {
    let checks = selftest_checks();
    let mut text = String::new();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "{status} {:<28} {}", c.name, c.detail);
    }
    write_all(stdout, &text, Path::new("<stdout>"))?;
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}
