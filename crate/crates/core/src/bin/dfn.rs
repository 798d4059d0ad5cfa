use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dfn_core::bench::{run, MeshSettings, ReferenceMode, RowStatus, RunConfig, TestCase, DEFAULT_JITTER};
use dfn_core::solver::Variant;
use dfn_core::DfnError;

#[derive(Parser, Debug)]
#[command(name = "dfn", version, about = "Stabilized three-field DFN flow solver and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a sweep over mesh sizes and stabilization weights.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// test1, test2A or test2B; ignored when --network is given.
    #[arg(long, default_value = "test1")]
    test: String,
    /// Custom network description (JSON).
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, default_value = "natural")]
    variant: String,
    #[arg(long, value_delimiter = ',', default_value = "0.22,0.1,0.071,0.032,0.014")]
    deltas: Vec<f64>,
    /// Defaults to the experiment's grid.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `analytic` or `fine:<factor>`.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    jitter: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip condition number estimates.
    #[arg(long)]
    no_cond: bool,
    /// Record wall-clock times (makes the CSV non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    dump_meshes: bool,
    #[arg(long)]
    dump_matrix: bool,
}

fn parse_reference(s: &str) -> Result<ReferenceMode, DfnError> {
    if s.eq_ignore_ascii_case("analytic") {
        return Ok(ReferenceMode::Analytic);
    }
    s.strip_prefix("fine:")
        .and_then(|f| f.parse::<f64>().ok())
        .map(|factor| ReferenceMode::FineMesh { factor })
        .ok_or_else(|| DfnError::Config(format!("reference must be `analytic` or `fine:<factor>`, got `{s}`")))
}

fn config_from(args: RunArgs) -> Result<RunConfig, DfnError> {
    let test = match args.network {
        Some(p) => TestCase::Custom(p),
        None => args.test.parse()?,
    };
    let variant: Variant = args.variant.parse()?;
    let mut config = RunConfig::new(test, variant);
    config.deltas = args.deltas;
    if let Some(w) = args.weights {
        config.weights = w;
    }
    config.t = args.t;
    config.out_dir = args.out;
    config.reference = args.reference.as_deref().map(parse_reference).transpose()?;
    config.mesh = MeshSettings { jitter: args.jitter, seed: args.seed };
    config.compute_cond = !args.no_cond;
    config.record_timing = args.timing;
    config.dump_meshes = args.dump_meshes;
    config.dump_matrix = args.dump_matrix;
    config.validate()?;
    Ok(config)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run(args) = cli.command;
    let config = match config_from(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    println!("{} / {} / t = {}", report.test, report.variant, report.t);
    println!(
        "{:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}  status",
        "delta", "weight", "errL2", "errH1", "err1delta", "cond", "conserv"
    );
    for row in &report.rows {
        let r = row.report.as_ref();
        println!(
            "{:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}  {}{}",
            row.delta,
            row.weight,
            fmt_opt(r.map(|r| r.err_l2)),
            fmt_opt(r.map(|r| r.err_h1)),
            fmt_opt(r.map(|r| r.err_1delta)),
            fmt_opt(r.and_then(|r| r.cond)),
            fmt_opt(r.map(|r| r.conservation)),
            row.status,
            row.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default(),
        );
    }
    for rate in &report.rates {
        println!(
            "weight {}: L2 rates {:.2?} (fit {:.2}), H1 rates {:.2?} (fit {:.2})",
            rate.weight, rate.l2, rate.l2_fit, rate.h1, rate.h1_fit
        );
    }
    if report.rows.iter().any(|r| r.status == RowStatus::Failed) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
