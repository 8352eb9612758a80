//! Command-line harness binding the numerics modules into reproducible
//! verification runs.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage error,
//! 3 I/O or decode error.

mod config;
mod summary;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use diamondlab::bounds::{compute_bound_report, simulate_protocol_gap, ProtocolConfig};
use diamondlab::ensembles::{
    certify_ensemble, generate_ensemble, load_ensemble, save_ensemble, Case, EnsembleParams,
};
use diamondlab::haar::SeededRng;
use diamondlab::moments::{moment_suite, reports_to_csv};
use diamondlab::report::write_atomic;
use diamondlab::weingarten::weingarten_check;

use config::{resolve_seed, RunConfig};

const EXIT_OK: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_IO: i32 = 3;

#[derive(Parser)]
#[command(
    name = "diamondlab",
    about = "Seeded verification runs for channel-ensemble separation numerics",
    version
)]
struct Cli {
    /// Key-value TOML file supplying default parameter values; explicit
    /// flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel ensemble and write it as channel manifests.
    Construct(ConstructArgs),
    /// Check pairwise separation and closeness of a stored ensemble.
    Certify(CertifyArgs),
    /// Run the per-case moment verification battery.
    Moments(MomentsArgs),
    /// Evaluate the query-count lower-bound calculators.
    Bounds(BoundsArgs),
    /// Simulate the interleaved-query protocol and record per-step gaps.
    Simulate(SimulateArgs),
    /// Compare closed-form Haar moments against seeded Monte Carlo.
    #[command(name = "weingarten-check")]
    WeingartenCheck(WeingartenArgs),
    /// Consolidate the reports in a directory into one summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long = "dA")]
    d_a: Option<usize>,
    #[arg(long = "dB")]
    d_b: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long = "dA")]
    d_a: Option<usize>,
    #[arg(long = "dB")]
    d_b: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long = "dA")]
    d_a: Option<usize>,
    #[arg(long = "dB")]
    d_b: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "cEnsemble")]
    c_ensemble: Option<f64>,
    #[arg(long = "cPack")]
    c_pack: Option<f64>,
    #[arg(long = "logM")]
    log_m: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long = "N")]
    n_queries: Option<usize>,
    #[arg(long = "auxDim")]
    aux_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeingartenArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dir: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    std::process::exit(code);
}

fn classify(err: &anyhow::Error) -> i32 {
    if let Some(core) = err.downcast_ref::<diamondlab::Error>() {
        return match core {
            diamondlab::Error::Io(_) | diamondlab::Error::Parse { .. } => EXIT_IO,
            _ => EXIT_USAGE,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    // Context-wrapped decode/read failures land here.
    let text = format!("{err:#}");
    if text.contains("reading") || text.contains("decoding") || text.contains("corrupt") {
        EXIT_IO
    } else {
        EXIT_USAGE
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing required parameter {flag} (flag or config)"))
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Construct(args) => construct(args, &cfg),
        Command::Certify(args) => certify(args, &cfg),
        Command::Moments(args) => moments(args, &cfg),
        Command::Bounds(args) => bounds(args, &cfg),
        Command::Simulate(args) => simulate(args, &cfg),
        Command::WeingartenCheck(args) => weingarten(args, &cfg),
        Command::Report(args) => report(args, &cfg),
    }
}

#[allow(clippy::too_many_arguments)]
fn ensemble_params(
    case: Option<String>,
    d_a: Option<usize>,
    d_b: Option<usize>,
    r: Option<usize>,
    eps: Option<f64>,
    m: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<EnsembleParams> {
    let case = Case::parse(&need(case.or_else(|| cfg.case.clone()), "--case")?)?;
    let params = EnsembleParams {
        d_a: need(d_a.or(cfg.d_a), "--dA")?,
        d_b: need(d_b.or(cfg.d_b), "--dB")?,
        r: need(r.or(cfg.r), "--r")?,
        eps: need(eps.or(cfg.eps), "--eps")?,
        m,
        seed,
        case,
    };
    params.validate()?;
    Ok(params)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            write_atomic(path, contents).context("writing report")?;
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn construct(args: ConstructArgs, cfg: &RunConfig) -> Result<i32> {
    let seed = resolve_seed(args.seed, cfg.seed);
    let params = ensemble_params(
        args.case,
        args.d_a,
        args.d_b,
        args.r,
        args.eps,
        need(args.m.or(cfg.m), "--M")?,
        seed,
        cfg,
    )?;
    let out = need(args.out.or_else(|| cfg.out.clone()), "--out")?;
    let ensemble = generate_ensemble(&params)?;
    save_ensemble(&out, &ensemble)?;
    let frozen = RunConfig {
        command: Some("construct".into()),
        case: Some(params.case.as_str().into()),
        d_a: Some(params.d_a),
        d_b: Some(params.d_b),
        r: Some(params.r),
        eps: Some(params.eps),
        m: Some(params.m),
        seed: Some(seed),
        out: Some(out.clone()),
        ..RunConfig::default()
    };
    write_atomic(&out.join("run-config.toml"), &frozen.to_toml())?;
    println!(
        "constructed {} member(s), case={}, seed={} -> {}",
        params.m,
        params.case.as_str(),
        seed,
        out.display()
    );
    Ok(EXIT_OK)
}

fn certify(args: CertifyArgs, cfg: &RunConfig) -> Result<i32> {
    let input = need(args.input.or_else(|| cfg.input.clone()), "--in")?;
    let ensemble = load_ensemble(&input)?;
    let eta = args
        .eta
        .or(cfg.eta)
        .unwrap_or(2.0 * ensemble.params.eps);
    let report = certify_ensemble(&ensemble, args.threshold.or(cfg.threshold), eta);
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| input.join("certification.csv"));
    emit(Some(&out), &report.to_csv(&ensemble.params))?;
    println!(
        "certified {} pair(s): min separation {:.6}, max closeness {:.6}, verdict {}",
        report.pairs.len(),
        report.min_separation,
        report.max_closeness,
        report.verdict
    );
    Ok(if report.verdict.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn moments(args: MomentsArgs, cfg: &RunConfig) -> Result<i32> {
    let seed = resolve_seed(args.seed, cfg.seed);
    let params = ensemble_params(args.case, args.d_a, args.d_b, args.r, args.eps, 1, seed, cfg)?;
    let samples = args.samples.or(cfg.samples).unwrap_or(5000);
    let rng = SeededRng::new(seed);
    let reports = moment_suite(&params, samples, &rng)?;
    let comment = format!(
        "moments case={} dA={} dB={} r={} eps={} samples={} seed={}",
        params.case.as_str(),
        params.d_a,
        params.d_b,
        params.r,
        params.eps,
        samples,
        seed
    );
    let csv = reports_to_csv(&comment, &reports);
    emit(args.out.or_else(|| cfg.out.clone()).as_deref(), &csv)?;
    let all_pass = reports.iter().all(|r| r.verdict.passed());
    println!(
        "moments: {} quantities, verdict {}",
        reports.len(),
        if all_pass { "PASS" } else { "FAIL" }
    );
    Ok(if all_pass { EXIT_OK } else { EXIT_FAIL })
}

fn bounds(args: BoundsArgs, cfg: &RunConfig) -> Result<i32> {
    let report = compute_bound_report(
        need(args.d_a.or(cfg.d_a), "--dA")?,
        need(args.d_b.or(cfg.d_b), "--dB")?,
        need(args.r.or(cfg.r), "--r")?,
        need(args.eps.or(cfg.eps), "--eps")?,
        args.c_ensemble.or(cfg.c_ensemble).unwrap_or(1.0),
        args.c_pack.or(cfg.c_pack).unwrap_or(1.0),
        args.log_m.or(cfg.log_m),
        args.eta.or(cfg.eta),
    )?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    emit(args.out.or_else(|| cfg.out.clone()).as_deref(), &(json + "\n"))?;
    Ok(EXIT_OK)
}

fn simulate(args: SimulateArgs, cfg: &RunConfig) -> Result<i32> {
    let input = need(args.input.or_else(|| cfg.input.clone()), "--in")?;
    let ensemble = load_ensemble(&input)?;
    let config = ProtocolConfig {
        n_queries: args.n_queries.or(cfg.n_queries).unwrap_or(3),
        aux_dim: args.aux_dim.or(cfg.aux_dim).unwrap_or(1),
        seed: resolve_seed(args.seed, cfg.seed),
    };
    let trace = simulate_protocol_gap(&ensemble, &config)?;
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| input.join("protocol.csv"));
    emit(Some(&out), &trace.to_csv())?;
    let pass = trace.max_gap() <= trace.bound + 1e-9;
    println!(
        "simulated {} step(s): max gap {:.6} vs bound {:.6}, verdict {}",
        trace.n_queries,
        trace.max_gap(),
        trace.bound,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

fn weingarten(args: WeingartenArgs, cfg: &RunConfig) -> Result<i32> {
    let d = need(args.d.or(cfg.d), "--d")?;
    let samples = args.samples.or(cfg.samples).unwrap_or(100_000);
    let seed = resolve_seed(args.seed, cfg.seed);
    let report = weingarten_check(d, samples, seed)?;
    emit(args.out.or_else(|| cfg.out.clone()).as_deref(), &report.to_csv())?;
    let verdict = report.verdict();
    println!("weingarten-check: {} case(s), verdict {verdict}", report.rows.len());
    Ok(if verdict.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn report(args: ReportArgs, cfg: &RunConfig) -> Result<i32> {
    let dir = need(args.dir.or_else(|| cfg.dir.clone()), "--dir")?;
    let summary = summary::summarize(&dir)?;
    write_atomic(&dir.join("summary.csv"), &summary.csv).context("writing summary")?;
    print!("{}", summary.csv);
    eprintln!("summarized {} row(s)", summary.rows);
    Ok(if summary.all_pass { EXIT_OK } else { EXIT_FAIL })
}
