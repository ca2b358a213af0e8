//! `coordsketch`: build coordinated weighted-sample summaries, answer
//! aggregate queries over them, and run the evaluation harness.
//!
//! Exit codes: 0 success, 2 configuration/contract error, 3 data error.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coordsketch_core::estimate::{
    colocated_generic_consistent, colocated_inclusive, dispersed_l1, dispersed_lset,
    dispersed_sset, ht_single, rc_single, subpop_estimate, L1Variant,
};
use coordsketch_core::rank::{RankSpec, SeedSource};
use coordsketch_core::sketch::{
    build_colocated_fixed_size, build_colocated_poisson, build_colocated_summary,
    build_dispersed_summary, poisson_taus_for_expected_size, SketchKind,
};
use coordsketch_core::{AggKind, Predicate, Summary};

use coordsketch::error::{Error, Result};
use coordsketch::harness::{
    self, family_from_str, load_dataset, mode_from_str, ratio_report, ExperimentConfig,
    VarianceReport,
};
use coordsketch::io;
use coordsketch::oracle::grid_oracle;
use coordsketch::parse::{parse_agg, parse_predicate};

#[derive(Parser)]
#[command(name = "coordsketch", version, about = "Coordinated weighted sampling sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Colocated,
    Dispersed,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Exp,
    Ipps,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Independent,
    #[value(name = "shared-seed")]
    SharedSeed,
    #[value(name = "indep-diff")]
    IndepDiff,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Ht,
    Rc,
    Inclusive,
    Generic,
    Sset,
    Lset,
}

#[derive(Args)]
struct SketchArgs {
    /// Data model of the input file.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Bottom-k sketch size per assignment.
    #[arg(long)]
    k: usize,
    /// Fix the distinct-key budget at |W|·k instead of the per-assignment k.
    #[arg(long, default_value_t = false)]
    fixed_size: bool,
    /// Rank family.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Rank coordination mode.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Hash salt; summaries built from the same salt are bit-identical.
    #[arg(long, default_value_t = 0)]
    salt: u64,
    /// Input CSV path.
    #[arg(long)]
    input: PathBuf,
    /// Output summary JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Test-only seed override file (`key,u` or `key,assignment,u`).
    #[arg(long)]
    seed_file: Option<PathBuf>,
    /// Build Poisson sketches with per-assignment thresholds chosen (two
    /// passes) for this expected size, instead of bottom-k sketches.
    #[arg(long)]
    poisson_expected_size: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Summary JSON produced by `sketch`.
    #[arg(long)]
    summary: PathBuf,
    /// Aggregate: single:b | max:R | min:R | l1:R | nth:R:l.
    #[arg(long)]
    agg: String,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Attribute predicate, e.g. "parity = even, grp != 1".
    #[arg(long = "where")]
    where_: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a summary (per-assignment sketches + union) from CSV data.
    Sketch(SketchArgs),
    /// Evaluate an aggregate estimator over a summary; prints
    /// `key,adjusted_weight` rows and a final TOTAL row.
    Estimate(EstimateArgs),
    /// Monte-Carlo evaluation harness.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// SV/nSV table for every estimator × aggregate × (mode, family, k).
    Sv(EvalArgs),
    /// Variance-ratio tables (independent vs coordinated, s-set vs l-set,
    /// inclusive vs plain) and sharing-index curves.
    Ratio(EvalArgs),
    /// Sharing-index curves only.
    Sharing(EvalArgs),
    /// Exact seed-grid oracle on a tiny instance.
    Oracle(EvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sketch(args) => sketch(args),
        Command::Estimate(args) => estimate(args),
        Command::Eval { what } => eval(what),
    }
}

fn rank_spec(args: &SketchArgs) -> Result<RankSpec> {
    let family = match args.family {
        FamilyArg::Exp => coordsketch_core::RankFamily::Exp,
        FamilyArg::Ipps => coordsketch_core::RankFamily::Ipps,
    };
    let mode = match args.mode {
        ModeArg::Independent => coordsketch_core::CoordMode::Independent,
        ModeArg::SharedSeed => coordsketch_core::CoordMode::SharedSeed,
        ModeArg::IndepDiff => coordsketch_core::CoordMode::IndependentDifferences,
    };
    Ok(RankSpec::new(family, mode, args.salt)?)
}

fn sketch(args: SketchArgs) -> Result<()> {
    let spec = rank_spec(&args)?;
    let source = match &args.seed_file {
        Some(path) => SeedSource::Table(io::read_seed_file(fs::File::open(path)?)?),
        None => SeedSource::Hashed,
    };
    let summary: Summary = match args.model {
        ModelArg::Colocated => {
            let ds = io::read_colocated_csv(fs::File::open(&args.input)?)?;
            if let Some(expected) = args.poisson_expected_size {
                let taus = poisson_taus_for_expected_size(&ds, expected, &spec)?;
                build_colocated_poisson(&ds, &taus, &spec, &source)?
            } else if args.fixed_size {
                build_colocated_fixed_size(&ds, args.k, &spec, &source)?
            } else {
                build_colocated_summary(&ds, args.k, &spec, &source)?
            }
        }
        ModelArg::Dispersed => {
            if args.fixed_size {
                return Err(Error::config(
                    "--fixed-size applies to colocated data only",
                ));
            }
            if args.poisson_expected_size.is_some() {
                return Err(Error::config(
                    "--poisson-expected-size applies to colocated data only",
                ));
            }
            let ds = io::read_dispersed_csv(fs::File::open(&args.input)?)?;
            build_dispersed_summary(&ds, args.k, &spec, &source)?
        }
    };
    fs::write(&args.out, io::summary_to_json(&summary)?)?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let summary = io::summary_from_json(&fs::read_to_string(&args.summary)?)?;
    let kind = parse_agg(&args.agg)?;
    let predicate = match &args.where_ {
        Some(w) => parse_predicate(w)?,
        None => Predicate::All,
    };
    let aw = match (args.estimator, &kind) {
        (EstimatorArg::Ht, AggKind::Single(b)) => {
            if summary.kind != SketchKind::Poisson {
                return Err(Error::config(
                    "ht estimates Poisson summaries; use rc for bottom-k sketches",
                ));
            }
            ht_single(&summary, b)?
        }
        (EstimatorArg::Ht, _) => {
            return Err(Error::config(
                "ht is a single-assignment estimator; use inclusive for multi-assignment \
                 aggregates over Poisson summaries",
            ))
        }
        (EstimatorArg::Rc, AggKind::Single(b)) => {
            if summary.kind != SketchKind::BottomK {
                return Err(Error::config("rc estimates bottom-k summaries; use ht for Poisson"));
            }
            rc_single(&summary, b)?
        }
        (EstimatorArg::Rc, _) => {
            return Err(Error::config(
                "rc is a single-assignment estimator; pick inclusive, sset, or lset",
            ))
        }
        (EstimatorArg::Inclusive, _) => colocated_inclusive(&summary, &kind)?,
        (EstimatorArg::Generic, _) => colocated_generic_consistent(&summary, &kind)?,
        (EstimatorArg::Sset, AggKind::L1(r)) => dispersed_l1(&summary, r, L1Variant::SSet)?,
        (EstimatorArg::Sset, _) => dispersed_sset(&summary, &kind)?,
        (EstimatorArg::Lset, AggKind::L1(r)) => dispersed_l1(&summary, r, L1Variant::LSet)?,
        (EstimatorArg::Lset, _) => dispersed_lset(&summary, &kind)?,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "key,adjusted_weight")?;
    let mut total = 0.0;
    for (key, value) in aw.iter() {
        let e = &summary.union[key];
        if predicate.matches(key, &e.attrs) {
            writeln!(out, "{key},{value:.16e}")?;
            total += value;
        }
    }
    debug_assert!((total - subpop_estimate(&aw, &summary, &predicate)).abs() <= 1e-9 * total.abs().max(1.0));
    writeln!(out, "TOTAL,{total:.16e}")?;
    Ok(())
}

fn eval(what: EvalCommand) -> Result<()> {
    let (args, which) = match &what {
        EvalCommand::Sv(a) => (a, "sv"),
        EvalCommand::Ratio(a) => (a, "ratio"),
        EvalCommand::Sharing(a) => (a, "sharing"),
        EvalCommand::Oracle(a) => (a, "oracle"),
    };
    let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    let ds = load_dataset(&cfg.dataset)?;
    fs::create_dir_all(&args.out)?;
    match which {
        "sv" => {
            let acc = harness::monte_carlo(&cfg, &ds)?;
            if !acc.audit_failures.is_empty() {
                return Err(Error::config(format!(
                    "invariant audit failed: {}",
                    acc.audit_failures.join("; ")
                )));
            }
            let report = VarianceReport::from_accum(&acc, &ds)?;
            fs::write(args.out.join("sv.csv"), report.to_csv())?;
            fs::write(args.out.join("sv.json"), serde_json::to_string_pretty(&report)?)?;
            println!("wrote {}", args.out.join("sv.csv").display());
        }
        "ratio" | "sharing" => {
            let (_, report) = ratio_report(&cfg, &ds)?;
            let rows: Vec<_> = if which == "sharing" {
                report.rows.iter().filter(|r| r.table == "sharing").cloned().collect()
            } else {
                report.rows.clone()
            };
            let filtered = harness::RatioReport { rows };
            let name = format!("{which}.csv");
            fs::write(args.out.join(&name), filtered.to_csv())?;
            fs::write(
                args.out.join(format!("{which}.json")),
                serde_json::to_string_pretty(&filtered)?,
            )?;
            println!("wrote {}", args.out.join(&name).display());
        }
        "oracle" => {
            let kinds: Vec<AggKind> = cfg
                .aggregates
                .iter()
                .map(|a| parse_agg(a))
                .collect::<Result<_>>()?;
            let mut all = Vec::new();
            for f in &cfg.families {
                for m in &cfg.modes {
                    let family = family_from_str(f)?;
                    let mode = mode_from_str(m)?;
                    if RankSpec::new(family, mode, 0).is_err() {
                        continue;
                    }
                    let k = *cfg.ks.first().ok_or_else(|| Error::config("ks must not be empty"))?;
                    let outcome =
                        grid_oracle(&ds, k, family, mode, &kinds, cfg.grid, cfg.oracle_budget)?;
                    all.extend(outcome.rows);
                }
            }
            let outcome = coordsketch::oracle::OracleOutcome {
                grid: cfg.grid,
                rows: all,
            };
            fs::write(args.out.join("oracle.csv"), outcome.to_csv())?;
            fs::write(
                args.out.join("oracle.json"),
                serde_json::to_string_pretty(&outcome)?,
            )?;
            println!("wrote {}", args.out.join("oracle.csv").display());
        }
        _ => unreachable!(),
    }
    Ok(())
}
