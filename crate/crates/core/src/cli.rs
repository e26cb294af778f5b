//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::predicted_sweep;
use crate::config::RunConfig;
use crate::evolution::{interaction_exponential_circuit, Method};
use crate::io::{parse_sweep_csv, write_atomic};
use crate::model::SystemHamiltonian;
use crate::oracle::{compare_spectrum, diagonalize_system, explain_misses, ComparisonReport, DetectionContext, MissExplanation};
use crate::spectroscopy::{
    detect_peaks, effective_threshold, execute_refinement, plan_refinement, run_sweep, Expected, Peak,
    RefinementJob, SweepResult, DEFAULT_THRESHOLD_FLOOR,
};
use crate::verify::{gate_count_table, render_checks, run_verification, trotter_error_table};

// Stdout writes ignore a closed pipe (e.g. output piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn emit(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

/// Environment variable capping the number of sweep worker threads.
pub const THREADS_ENV: &str = "PROBE_SPEC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "probespec", version, about = "Probe-qubit spectroscopy of a system Hamiltonian")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sweep the probe frequency and compare detected peaks with the exact spectrum
    Sweep(RunArgs),
    /// Diagonalize the system and write the transition table
    Oracle(RunArgs),
    /// Evaluate the two-level lineshape prediction over the grid
    Predict(RunArgs),
    /// Plan (and optionally run) refinement sweeps for missing peaks
    Refine(RefineArgs),
    /// Run the built-in consistency checks; exit status 0 only if all pass
    Verify(RunArgs),
    /// Trotter error against slice count, and gate counts of the interaction circuit
    TrotterBench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Configuration file (same as --config)
    pub config_file: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Configuration file (same as --config)
    pub config_file: Option<PathBuf>,
    /// Evolution time for the error table; the sweep time is usually far outside
    /// the first-order regime
    #[arg(long, default_value_t = 1.0)]
    pub bench_tau: f64,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    /// `[CONFIG] SWEEP_CSV`: optional configuration file, then the sweep to refine
    #[arg(num_args = 1..=2, required = true)]
    pub paths: Vec<PathBuf>,
    /// Run the planned jobs, escalating per gap until it is resolved
    #[arg(long)]
    pub execute: bool,
    /// Expected number of peaks; defaults to the exact transition list
    #[arg(long)]
    pub expected_count: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Exact,
    Trotter,
    Circuit,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub trotter_slices: Option<usize>,
    /// Shots per frequency; 0 uses the exact decay probability
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Peak threshold as a fraction of the sweep maximum
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("omega_min", self.omega_min.map(|v| v.to_string()));
        put("omega_max", self.omega_max.map(|v| v.to_string()));
        put("intervals", self.intervals.map(|v| v.to_string()));
        put("c", self.c.map(|v| v.to_string()));
        put("tau", self.tau.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put(
            "method",
            self.method.map(|v| {
                match v {
                    MethodArg::Exact => "exact",
                    MethodArg::Trotter => "trotter",
                    MethodArg::Circuit => "circuit",
                }
                .to_string()
            }),
        );
        put("trotter_slices", self.trotter_slices.map(|v| v.to_string()));
        put("shots", self.shots.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("threshold", self.threshold.map(|v| v.to_string()));
        put("out_dir", self.out_dir.as_ref().map(|v| v.display().to_string()));
        m
    }

    fn load(&self, positional: Option<&Path>) -> anyhow::Result<RunConfig> {
        let path = match (positional, self.config.as_deref()) {
            (Some(_), Some(_)) => bail!("give the configuration either positionally or with --config, not both"),
            (p, q) => p.or(q),
        };
        RunConfig::load(path, &self.to_map()).context("invalid configuration")
    }
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn thread_cap() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
    }
}

fn in_pool<T: Send>(f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match thread_cap()? {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}

fn load_system(cfg: &RunConfig) -> anyhow::Result<SystemHamiltonian> {
    cfg.load_system().context("cannot load the system Hamiltonian")
}

fn advisories(cfg: &RunConfig) {
    let omega = cfg.grid.omega_min.abs().min(cfg.grid.omega_max.abs());
    if cfg.c >= 0.01 * omega {
        eprintln!(
            "warning: coupling c = {} is not small against probe frequencies near {omega}",
            cfg.c
        );
    }
    eprintln!("note: c * tau = {:.4}", cfg.c * cfg.tau);
}

#[derive(Serialize)]
struct ComparisonOutput<'a> {
    #[serde(flatten)]
    report: &'a ComparisonReport,
    explanations: &'a [MissExplanation],
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes all files or none of them: contents are rendered before the first write.
fn write_all(dir: &Path, files: &[(&str, String)]) -> anyhow::Result<()> {
    for (name, contents) in files {
        let path = dir.join(name);
        write_atomic(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn analyze(cfg: &RunConfig, sys: &SystemHamiltonian, result: &SweepResult) -> anyhow::Result<(Vec<Peak>, ComparisonReport, Vec<MissExplanation>)> {
    let threshold = effective_threshold(result, cfg.threshold, DEFAULT_THRESHOLD_FLOOR);
    let peaks = detect_peaks(result, threshold);
    let oracle = diagonalize_system(sys, cfg.alpha)?;
    let report = compare_spectrum(&peaks, &oracle, result.grid.delta());
    let ctx = DetectionContext {
        c: result.config.params.c,
        tau: result.config.params.tau,
        grid: result.grid,
        threshold,
    };
    let explanations = explain_misses(&report, &oracle, &ctx);
    Ok((peaks, report, explanations))
}

fn print_explanations(explanations: &[MissExplanation]) {
    for e in explanations {
        let causes: Vec<String> = e
            .causes
            .iter()
            .map(|c| serde_json::to_value(c).ok().and_then(|v| v["cause"].as_str().map(String::from)).unwrap_or_default())
            .collect();
        say!(
            "level {:>3} at {:.6} missed: {}",
            e.level,
            e.transition,
            if causes.is_empty() { "unexplained".to_string() } else { causes.join(", ") }
        );
    }
}

fn cmd_sweep(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.load(args.config_file.as_deref())?;
    let sys = load_system(&cfg)?;
    advisories(&cfg);
    let sc = cfg.sweep_config()?;
    let result = in_pool(|| run_sweep(&sys, &cfg.grid, &sc))??;
    let (peaks, report, explanations) = analyze(&cfg, &sys, &result)?;
    let comparison = ComparisonOutput {
        report: &report,
        explanations: &explanations,
    };
    write_all(
        &cfg.out_dir,
        &[
            ("sweep.csv", result.to_csv()),
            ("peaks.json", to_json(&peaks)?),
            ("comparison.json", to_json(&comparison)?),
        ],
    )?;
    emit(&report.to_table());
    print_explanations(&explanations);
    say!("wrote sweep.csv, peaks.json, comparison.json to {}", cfg.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.load(args.config_file.as_deref())?;
    let sys = load_system(&cfg)?;
    let table = diagonalize_system(&sys, cfg.alpha)?.transition_table(cfg.c);
    write_all(&cfg.out_dir, &[("oracle.csv", table.to_csv())])?;
    say!("{:>5}  {:>14}  {:>10}  {:>11}  {:>14}", "j", "E_j", "|sum_d|", "Q", "E_j - alpha");
    for r in &table.rows {
        say!(
            "{:>5}  {:>14.8}  {:>10.6}  {:>11.4e}  {:>14.8}",
            r.j,
            r.energy,
            r.sum_abs(),
            r.q,
            r.transition_freq
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.load(args.config_file.as_deref())?;
    let sys = load_system(&cfg)?;
    let table = diagonalize_system(&sys, cfg.alpha)?.transition_table(cfg.c);
    let pred = predicted_sweep(&table, &cfg.grid, cfg.tau);
    let mut csv = String::from("omega,p_decay,clipped\n");
    for ((w, p), c) in pred.omegas.iter().zip(&pred.decay).zip(&pred.clipped) {
        csv.push_str(&format!("{w:.10},{p:.10},{}\n", u8::from(*c)));
    }
    let result = SweepResult {
        grid: cfg.grid,
        decay: pred.decay.clone(),
        config: cfg.sweep_config()?,
        system_dim: sys.dim(),
        successes: None,
    };
    let threshold = effective_threshold(&result, cfg.threshold, DEFAULT_THRESHOLD_FLOOR);
    let peaks = detect_peaks(&result, threshold);
    write_all(&cfg.out_dir, &[("predict.csv", csv), ("predict_peaks.json", to_json(&peaks)?)])?;
    if pred.any_clipped() {
        eprintln!("warning: summed lineshapes exceeded 1 and were clipped");
    }
    say!("{} predicted peaks above {threshold:.4}", peaks.len());
    for p in &peaks {
        say!("  omega {:.6}  height {:.4}  energy {:.6}", p.omega_peak, p.height, p.estimated_energy);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct JobOutcome<'a> {
    job: &'a RefinementJob,
    file: String,
    peaks: &'a [Peak],
    resolved: bool,
}

fn cmd_refine(args: &RefineArgs) -> anyhow::Result<ExitCode> {
    let (config_path, sweep_path) = match args.paths.as_slice() {
        [csv] => (None, csv),
        [cfg, csv] => (Some(cfg.as_path()), csv),
        _ => bail!("expected [CONFIG] SWEEP_CSV"),
    };
    let cfg = args.overrides.load(config_path)?;
    let sys = load_system(&cfg)?;
    let text = std::fs::read_to_string(sweep_path).with_context(|| format!("reading {}", sweep_path.display()))?;
    let table = parse_sweep_csv(&text).with_context(|| format!("parsing {}", sweep_path.display()))?;
    let grid = table.grid(cfg.grid.delta())?;
    let result = SweepResult {
        grid,
        decay: table.decay.clone(),
        config: cfg.sweep_config()?,
        system_dim: sys.dim(),
        successes: table.shots.as_ref().map(|s| s.iter().map(|x| x.1).collect()),
    };
    let threshold = effective_threshold(&result, cfg.threshold, DEFAULT_THRESHOLD_FLOOR);
    let peaks = detect_peaks(&result, threshold);
    let expected = match args.expected_count {
        Some(n) => Expected::Count(n),
        None => Expected::Transitions(diagonalize_system(&sys, cfg.alpha)?.transitions),
    };
    let jobs = plan_refinement(&result, &peaks, &expected);
    let plan = to_json(&jobs)?;
    if !args.execute {
        write_all(&cfg.out_dir, &[("refine_plan.json", plan)])?;
        say!("{} peaks detected; {} refinement jobs planned", peaks.len(), jobs.len());
        return Ok(ExitCode::SUCCESS);
    }
    let sc = cfg.sweep_config()?;
    let outcomes = in_pool(|| execute_refinement(&sys, &sc, &jobs, cfg.threshold, grid.delta()))??;
    let mut files = vec![("refine_plan.json".to_string(), plan)];
    let mut summary = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        let name = format!("refine_job{i}.csv");
        files.push((name.clone(), o.result.to_csv()));
        summary.push(JobOutcome {
            job: &o.job,
            file: name,
            peaks: &o.peaks,
            resolved: o.resolved,
        });
        say!(
            "gap {} {:?}: [{:.4}, {:.4}] m={} c={} tau={} -> {} peaks, {}",
            o.job.gap,
            o.job.stage,
            o.job.omega_min,
            o.job.omega_max,
            o.job.intervals,
            o.job.c,
            o.job.tau,
            o.peaks.len(),
            if o.resolved { "resolved" } else { "unresolved" }
        );
    }
    files.push(("refine_results.json".to_string(), to_json(&summary)?));
    let borrowed: Vec<(&str, String)> = files.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    write_all(&cfg.out_dir, &borrowed)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.load(args.config_file.as_deref())?;
    let sys = load_system(&cfg)?;
    let checks = run_verification(&sys, cfg.c, cfg.alpha)?;
    emit(&render_checks(&checks));
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        say!("all {} checks passed", checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        say!("{failed} of {} checks failed", checks.len());
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_trotter_bench(args: &BenchArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.overrides.load(args.config_file.as_deref())?;
    let sys = load_system(&cfg)?;
    let mut params = cfg.params();
    params.omega = 0.5 * (cfg.grid.omega_min + cfg.grid.omega_max);
    if !(args.bench_tau.is_finite() && args.bench_tau > 0.0) {
        bail!("--bench-tau must be positive");
    }
    params.tau = args.bench_tau;
    let slices: Vec<usize> = (3..=10).map(|k| 1usize << k).collect();
    let errors = trotter_error_table(&sys, &params, &slices)?;
    let (counts, fit, resid) = gate_count_table(8);
    let mut csv = String::from("slices,operator_norm_error\n");
    say!("{:>7}  {:>12}  {:>7}", "L", "error", "ratio");
    for (i, (l, e)) in errors.iter().enumerate() {
        csv.push_str(&format!("{l},{e:.6e}\n"));
        let ratio = if i > 0 { format!("{:.3}", e / errors[i - 1].1) } else { "-".into() };
        say!("{l:>7}  {e:>12.4e}  {ratio:>7}");
    }
    let mut gates = String::from("n,elementary_gates\n");
    say!("{:>3}  {:>8}", "n", "gates");
    for (n, g) in &counts {
        gates.push_str(&format!("{n},{g}\n"));
        say!("{n:>3}  {g:>8}");
    }
    say!(
        "quadratic fit {:.2} n^2 + {:.2} n + {:.2}, relative residual {:.3e}",
        fit[0], fit[1], fit[2], resid
    );
    let slices_for_file = match cfg.method {
        Method::Trotter(l) | Method::Circuit(l) => l,
        Method::Exact => 64,
    };
    let circuit = interaction_exponential_circuit(sys.qubits(), cfg.c, cfg.tau / slices_for_file as f64);
    write_all(
        &cfg.out_dir,
        &[
            ("trotter_bench.csv", csv),
            ("gate_counts.csv", gates),
            ("interaction_circuit.txt", circuit.decompose().to_text()),
        ],
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Verify(a) => cmd_verify(a),
        Command::TrotterBench(a) => cmd_trotter_bench(a),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
