//! Command-line front end: verification, bound comparison, and the exact
//! oracle.
//!
//! Reports are JSON on stdout; diagnostics go to stderr. Exit codes:
//! 0 safe, 1 violated, 2 timeout, 3 solver failure, 64 usage errors,
//! 65 malformed data, 66 unreadable input files. Set
//! `NEURIFY_STYLE_LOG=debug` for per-task trace logging.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};

use relucheck_core::{
    exact_output_range_with_limit, nia_forward, parse_nnet, parse_property, region_to_box,
    sia_forward, slr_forward, verify, EngineConfig, ForcedMap, InputRegion, Network,
    OutputProperty, Verdict,
};
use report::{to_validated_json, verdict_exit_code, verdict_name, ConfigEcho, ReportWidths, RunReport};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOINPUT: u8 = 66;

#[derive(Parser)]
#[command(
    name = "relucheck",
    about = "Safety checking for feed-forward ReLU networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a safety property, returning a proof or a counterexample.
    Verify(VerifyArgs),
    /// Compare naive, symbolic-interval, and symbolic-relaxation bounds.
    Bounds(BoundsArgs),
    /// Print the exact output range by activation-pattern enumeration.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Network file (.nnet text or .json fixture).
    #[arg(long)]
    network: PathBuf,
    /// Property file (JSON).
    #[arg(long)]
    property: PathBuf,
    /// Map raw property bounds into normalized input space using the
    /// network's normalization metadata.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Split-depth cap; defaults to the ReLU count (node refinement) or 24
    /// (scalar bisection).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Echoed into the report; verification itself is seed-independent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which propagators to run.
    #[arg(long, default_value = "all", value_parser = ["all", "nia", "sia", "slr"])]
    mode: String,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Refuse networks with more ReLU nodes than this.
    #[arg(long, default_value_t = 16)]
    limit: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NEURIFY_STYLE_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's own help/version output still prints normally.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(EXIT_USAGE);
            }
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
    };
    let code = match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("relucheck: {message}");
            ExitCode::from(code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_NOINPUT, format!("cannot read {}: {e}", path.display())))?;
    let looks_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    let net = if looks_json {
        Network::from_json(&text)
    } else {
        parse_nnet(&text)
    };
    net.map_err(|e| fail(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn load_property(
    path: &Path,
    net: &Network,
    normalize: bool,
) -> Result<(InputRegion, OutputProperty), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_NOINPUT, format!("cannot read {}: {e}", path.display())))?;
    let (region, prop, already_normalized) =
        parse_property(&text).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", path.display())))?;
    if region.dim() != net.input_dim {
        return Err(fail(
            EXIT_DATA,
            format!(
                "region has {} inputs, network expects {}",
                region.dim(),
                net.input_dim
            ),
        ));
    }
    let region = if normalize {
        if already_normalized {
            return Err(fail(
                EXIT_USAGE,
                "--normalize given but the property file is marked \"normalized\": true",
            ));
        }
        normalize_region(&region, net).map_err(|m| fail(EXIT_DATA, m))?
    } else {
        region
    };
    Ok((region, prop))
}

/// Map a raw-unit region into normalized input space.
fn normalize_region(region: &InputRegion, net: &Network) -> Result<InputRegion, String> {
    let norm = net
        .normalization
        .as_ref()
        .ok_or("--normalize given but the network carries no normalization metadata")?;
    let uniform_range = norm
        .ranges
        .windows(2)
        .all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0].abs().max(1.0));
    match region {
        InputRegion::Box { lo, hi } => Ok(InputRegion::Box {
            lo: lo
                .iter()
                .enumerate()
                .map(|(i, &v)| norm.normalize_value(i, v))
                .collect(),
            hi: hi
                .iter()
                .enumerate()
                .map(|(i, &v)| norm.normalize_value(i, v))
                .collect(),
        }),
        InputRegion::LInf { center, eps } => Ok(InputRegion::Box {
            lo: center
                .iter()
                .enumerate()
                .map(|(i, &c)| norm.normalize_value(i, c - eps))
                .collect(),
            hi: center
                .iter()
                .enumerate()
                .map(|(i, &c)| norm.normalize_value(i, c + eps))
                .collect(),
        }),
        InputRegion::Brightness { center, eps } if uniform_range => Ok(InputRegion::Brightness {
            center: center
                .iter()
                .enumerate()
                .map(|(i, &c)| norm.normalize_value(i, c))
                .collect(),
            eps: eps / norm.ranges[0],
        }),
        InputRegion::L1 { center, eps } if uniform_range => Ok(InputRegion::L1 {
            center: center
                .iter()
                .enumerate()
                .map(|(i, &c)| norm.normalize_value(i, c))
                .collect(),
            eps: eps / norm.ranges[0],
        }),
        InputRegion::Contrast {
            center,
            lo_scale,
            hi_scale,
        } if norm.means.iter().all(|m| *m == 0.0) => Ok(InputRegion::Contrast {
            center: center
                .iter()
                .enumerate()
                .map(|(i, &c)| norm.normalize_value(i, c))
                .collect(),
            lo_scale: *lo_scale,
            hi_scale: *hi_scale,
        }),
        InputRegion::Brightness { .. } | InputRegion::L1 { .. } => Err(
            "--normalize for brightness/l1 regions needs uniform per-input ranges".to_string(),
        ),
        InputRegion::Contrast { .. } => {
            Err("--normalize for contrast regions needs all-zero means".to_string())
        }
    }
}

fn base_report(command: &str, config: ConfigEcho, started_at: String) -> RunReport {
    RunReport {
        command: command.to_string(),
        verdict: None,
        witness: None,
        outputs: None,
        stats: None,
        widths: None,
        improvement_pct: None,
        exact_range: None,
        config,
        started_at,
        finished_at: String::new(),
    }
}

fn emit(mut report: RunReport) -> Result<(), Failure> {
    report.finished_at = Utc::now().to_rfc3339();
    let text = to_validated_json(&report).map_err(|m| fail(EXIT_DATA, m))?;
    println!("{text}");
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let started_at = Utc::now().to_rfc3339();
    let net = load_network(&args.common.network)?;
    let (region, prop) = load_property(&args.common.property, &net, args.common.normalize)?;

    let cfg = EngineConfig {
        timeout: Duration::from_secs_f64(args.timeout),
        max_depth: args.max_depth,
        workers: args
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        ..EngineConfig::default()
    };
    let report_cfg = ConfigEcho {
        network: args.common.network.display().to_string(),
        property: Some(args.common.property.display().to_string()),
        timeout: Some(args.timeout),
        threads: Some(cfg.workers),
        max_depth: args.max_depth,
        seed: args.seed,
        normalized: args.common.normalize,
        mode: None,
        oracle_limit: None,
    };

    let outcome = verify(&net, &region, &prop, &cfg)
        .map_err(|e| fail(EXIT_DATA, e.to_string()))?;

    let mut report = base_report("verify", report_cfg, started_at);
    report.verdict = Some(verdict_name(&outcome.verdict).to_string());
    if let Verdict::Violated { witness, outputs } = &outcome.verdict {
        report.witness = Some(witness.clone());
        report.outputs = Some(outputs.clone());
    }
    report.stats = Some((&outcome.stats).into());
    emit(report)?;
    Ok(verdict_exit_code(&outcome.verdict))
}

fn cmd_bounds(args: BoundsArgs) -> Result<u8, Failure> {
    let started_at = Utc::now().to_rfc3339();
    let net = load_network(&args.common.network)?;
    let (region, _prop) = load_property(&args.common.property, &net, args.common.normalize)?;
    let enc = region_to_box(&region).map_err(|e| fail(EXIT_DATA, e.to_string()))?;
    let box_ = &enc.box_;

    let want = |m: &str| args.mode == "all" || args.mode == m;
    let mut widths = ReportWidths {
        nia: None,
        sia: None,
        slr: None,
    };
    if want("nia") {
        let nia = nia_forward(&net, box_).map_err(|e| fail(EXIT_DATA, e.to_string()))?;
        widths.nia = Some(nia.iter().map(|iv| iv.width()).collect());
    }
    if want("sia") {
        let sia = sia_forward(&net, box_).map_err(|e| fail(EXIT_DATA, e.to_string()))?;
        widths.sia = Some(sia.output_bounds().iter().map(|iv| iv.width()).collect());
    }
    if want("slr") {
        let slr = slr_forward(&net, box_, &ForcedMap::new())
            .map_err(|e| fail(EXIT_DATA, e.to_string()))?;
        widths.slr = Some(slr.output_bounds().iter().map(|iv| iv.width()).collect());
    }

    // Mean-width improvement of relaxation over naive intervals.
    let improvement = match (&widths.nia, &widths.slr) {
        (Some(nia), Some(slr)) if !nia.is_empty() => {
            let mean_nia: f64 = nia.iter().sum::<f64>() / nia.len() as f64;
            let mean_slr: f64 = slr.iter().sum::<f64>() / slr.len() as f64;
            if mean_slr > 1e-12 {
                Some(100.0 * (mean_nia - mean_slr) / mean_slr)
            } else {
                None
            }
        }
        _ => None,
    };

    let report_cfg = ConfigEcho {
        network: args.common.network.display().to_string(),
        property: Some(args.common.property.display().to_string()),
        timeout: None,
        threads: None,
        max_depth: None,
        seed: None,
        normalized: args.common.normalize,
        mode: Some(args.mode.clone()),
        oracle_limit: None,
    };
    let mut report = base_report("bounds", report_cfg, started_at);
    report.widths = Some(widths);
    report.improvement_pct = improvement;
    emit(report)?;
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<u8, Failure> {
    let started_at = Utc::now().to_rfc3339();
    let net = load_network(&args.common.network)?;
    let (region, _prop) = load_property(&args.common.property, &net, args.common.normalize)?;
    let enc = region_to_box(&region).map_err(|e| fail(EXIT_DATA, e.to_string()))?;
    if !enc.rows.is_empty() {
        return Err(fail(
            EXIT_USAGE,
            "oracle supports box-shaped regions only (linf or box)",
        ));
    }
    if net.relu_count() > args.limit {
        return Err(fail(
            EXIT_USAGE,
            format!(
                "network has {} ReLU nodes, oracle limit is {}",
                net.relu_count(),
                args.limit
            ),
        ));
    }
    let range = exact_output_range_with_limit(&net, &enc.box_, args.limit)
        .map_err(|e| fail(EXIT_DATA, e.to_string()))?;

    let report_cfg = ConfigEcho {
        network: args.common.network.display().to_string(),
        property: Some(args.common.property.display().to_string()),
        timeout: None,
        threads: None,
        max_depth: None,
        seed: None,
        normalized: args.common.normalize,
        mode: None,
        oracle_limit: Some(args.limit),
    };
    let mut report = base_report("oracle", report_cfg, started_at);
    report.exact_range = Some(range.iter().map(|iv| [iv.lo, iv.hi]).collect());
    emit(report)?;
    Ok(0)
}
