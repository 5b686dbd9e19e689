//! Batch front-end: parse an experiment config, dispatch the study, emit
//! CSV/JSON outputs and a one-line summary.
//!
//! Exit codes: 0 success, 2 validation failure (inadmissible problem),
//! 3 config error.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::exit;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{load_config, ExperimentConfig, StudyKind};
use emx_core::analysis::{
    convergence_metrics, occupation_study, reduce_error_table, with_worker_threads, Scheme,
};
use emx_core::randomness::{BrownianPath, SeedSpec};
use emx_core::schemes::em_continuous_on_fine;
use emx_core::transform::{GTransform, TransformedProblem};

#[derive(Parser)]
#[command(
    name = "emx",
    version,
    about = "Euler-Maruyama experiments for SDEs with discontinuous drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the problem against the admissibility assumptions.
    Validate(RunArgs),
    /// Emit a table of G, G', G'' and the inverse round trip on a grid.
    TransformCheck(RunArgs),
    /// Emit per-path fine-grid trajectories of the scheme.
    Simulate(RunArgs),
    /// Strong-error convergence study with rate fits.
    Convergence(RunArgs),
    /// Sign-change occupation-time study per breakpoint.
    Occupation(RunArgs),
}

impl Command {
    fn split(&self) -> (StudyKind, &RunArgs) {
        match self {
            Command::Validate(args) => (StudyKind::Validate, args),
            Command::TransformCheck(args) => (StudyKind::TransformCheck, args),
            Command::Simulate(args) => (StudyKind::Simulate, args),
            Command::Convergence(args) => (StudyKind::Convergence, args),
            Command::Occupation(args) => (StudyKind::Occupation, args),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (strict JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count; results are identical for any value.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: config's out_dir, else the working dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override a config entry, e.g. --override m=500 --override problem.x0=1.5
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            exit(code);
        }
    };
    let (kind, args) = cli.command.split();
    match run(kind, args) {
        Ok(code) => exit(code),
        Err(err) => {
            let code = match err.downcast_ref::<emx_core::Error>() {
                Some(emx_core::Error::InadmissibleProblem { .. }) => 2,
                _ => 3,
            };
            eprintln!("error: {err:#}");
            exit(code);
        }
    }
}

fn run(kind: StudyKind, args: &RunArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let mut config = load_config(&text, &args.overrides)?;
    if let Some(declared) = config.study {
        if declared != kind {
            bail!("config declares study {declared:?} but the subcommand is {kind}");
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = Some(dir.clone());
    }
    let out_dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let report = config.problem.validate(config.zero_tol);
    if !report.admissible() {
        print_report(&report);
        let failure = report.first_failure().expect("failing check");
        println!(
            "validate: inadmissible - {} ({})",
            failure.name, failure.detail
        );
        return Ok(2);
    }
    if kind == StudyKind::Validate {
        print_report(&report);
        println!("validate: admissible, K = {}", report.growth_constant);
        return Ok(0);
    }

    let summary = with_worker_threads(args.threads, || dispatch(kind, &config, &out_dir))?;
    println!("{summary}");
    Ok(0)
}

fn print_report(report: &emx_core::ValidationReport64) {
    for check in &report.checks {
        let mark = if check.passed { "ok  " } else { "FAIL" };
        println!("  [{mark}] {}: {}", check.name, check.detail);
    }
}

fn dispatch(kind: StudyKind, config: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    match kind {
        StudyKind::Validate => unreachable!("handled before dispatch"),
        StudyKind::TransformCheck => transform_check(config, out_dir),
        StudyKind::Simulate => simulate(config, out_dir),
        StudyKind::Convergence => convergence(config, out_dir),
        StudyKind::Occupation => occupation(config, out_dir),
    }
}

fn transform_check(config: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let transform = GTransform::build(&config.problem, config.nu_fraction)?;
    let grid = config.grid;
    if grid.min.is_nan() || grid.max.is_nan() || grid.min >= grid.max || grid.points < 1 {
        bail!("transform-check grid must have min < max and at least one interval");
    }
    let csv = output::transform_check_csv(&transform, grid.min, grid.max, grid.points);
    let path = out_dir.join("transform_check.csv");
    fs::write(&path, csv)?;
    let (lo, hi) = transform.gprime_bounds();
    Ok(format!(
        "transform-check: k = {}, nu = {}, G' in [{lo}, {hi}] -> {}",
        transform.breakpoints().len(),
        transform.nu(),
        path.display()
    ))
}

fn simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let study = config.study_config();
    study.validate(&config.problem)?;
    let n = *config.n_list.first().expect("validated non-empty n_list");
    let transform = GTransform::build(&config.problem, config.nu_fraction)?;
    let tp = TransformedProblem::new(&transform, &config.problem)?;
    let seed = SeedSpec::new(config.seed, "simulate");
    for index in 0..config.sim_paths {
        let path = BrownianPath::generate(&seed, index as u64, config.n_fine);
        let direct = em_continuous_on_fine(&config.problem, &path, n);
        let mut columns: Vec<(&str, &[f64])> = vec![("x_em", direct.values())];
        let mapped;
        if config.scheme == Scheme::TransformedEm {
            let z_cont = em_continuous_on_fine(&tp, &path, n);
            mapped = z_cont
                .values()
                .iter()
                .map(|&z| transform.g_inverse(z, tp.inverse_tol()))
                .collect::<Result<Vec<_>, _>>()?;
            columns.push(("x_transformed_em", &mapped));
        }
        let csv = output::simulate_csv(config.n_fine, &columns);
        fs::write(out_dir.join(format!("sim_path_{index}.csv")), csv)?;
    }
    Ok(format!(
        "simulate: wrote {} path(s) at n = {n}, n_fine = {} -> {}",
        config.sim_paths,
        config.n_fine,
        out_dir.display()
    ))
}

#[derive(Serialize)]
struct ConvergenceSummary {
    study: &'static str,
    seed: u64,
    m: usize,
    p: f64,
    q: String,
    scheme: String,
    reference: String,
    final_time: output::RateSummary,
    supnorm: output::RateSummary,
    path_lq: output::RateSummary,
}

fn convergence(config: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let study = config.study_config();
    let seed = SeedSpec::new(config.seed, "convergence");
    let metrics = convergence_metrics(&study, &config.problem, &seed)?;

    let tables = [
        ("final_time", &metrics.final_abs),
        ("supnorm", &metrics.sup_abs),
        ("path_lq", &metrics.lq),
    ]
    .map(|(name, samples)| (name, reduce_error_table(&metrics.n_list, samples, study.p)));
    for (name, table) in &tables {
        let csv = output::error_table_csv(table, study.p, study.q, study.scheme, study.reference);
        fs::write(out_dir.join(format!("{name}.csv")), csv)?;
        let skipped = table
            .rows
            .iter()
            .filter(|r| r.error <= 0.0 || r.error.is_nan())
            .count();
        if skipped > 0 {
            eprintln!("warning: {name}: {skipped} row(s) with non-positive error excluded from the rate fit");
        }
    }
    let summary = ConvergenceSummary {
        study: "convergence",
        seed: config.seed,
        m: study.m,
        p: study.p,
        q: study.q.to_string(),
        scheme: study.scheme.to_string(),
        reference: study.reference.to_string(),
        final_time: output::RateSummary::from_table(&tables[0].1),
        supnorm: output::RateSummary::from_table(&tables[1].1),
        path_lq: output::RateSummary::from_table(&tables[2].1),
    };
    let line = format!(
        "convergence: slopes final = {}, sup = {}, interpolant = {} (m = {}, reference = {})",
        summary.final_time.slope_label(),
        summary.supnorm.slope_label(),
        summary.path_lq.slope_label(),
        study.m,
        study.reference
    );
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(line)
}

#[derive(Serialize)]
struct OccupationSummary {
    study: &'static str,
    seed: u64,
    m: usize,
    p: f64,
    per_breakpoint: Vec<OccupationFit>,
}

#[derive(Serialize)]
struct OccupationFit {
    xi: f64,
    mean_rate: output::RateSummary,
    pmean_rate: output::RateSummary,
}

fn occupation(config: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let study = config.study_config();
    let seed = SeedSpec::new(config.seed, "occupation");
    let rows = occupation_study(&study, &config.problem, &seed)?;
    fs::write(
        out_dir.join("occupation.csv"),
        output::occupation_csv(&rows),
    )?;

    let mut fits = Vec::new();
    for &xi in config.problem.drift().breakpoints() {
        let make_table = |value: fn(&emx_core::analysis::OccupationRow<f64>) -> f64| {
            emx_core::analysis::ErrorTable {
                rows: rows
                    .iter()
                    .filter(|r| r.xi == xi)
                    .map(|r| emx_core::analysis::ErrorRow {
                        n: r.n,
                        error: value(r),
                        std_error: r.std_error,
                        m: r.m,
                    })
                    .collect(),
            }
        };
        fits.push(OccupationFit {
            xi,
            mean_rate: output::RateSummary::from_table(&make_table(|r| r.mean)),
            pmean_rate: output::RateSummary::from_table(&make_table(|r| r.pmean)),
        });
    }
    let line = format!(
        "occupation: mean slope(s) {} (m = {})",
        fits.iter()
            .map(|f| format!("xi = {}: {}", f.xi, f.mean_rate.slope_label()))
            .collect::<Vec<_>>()
            .join("; "),
        study.m
    );
    let summary = OccupationSummary {
        study: "occupation",
        seed: config.seed,
        m: study.m,
        p: study.p,
        per_breakpoint: fits,
    };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(line)
}
