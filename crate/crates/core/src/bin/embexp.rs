//! Protocol-driven command line: run the design / balance / lock / analyze
//! stages separately against serialized artifacts, or the full pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embexp::balance::balance_report;
use embexp::canon::sha256_hex;
use embexp::dataset::{load_csv, summarize, DesignLock, SchemaMap};
use embexp::design::{freeze, unseal_outcomes, DesignResult};
use embexp::error::Error;
use embexp::protocol::{build_design, run_protocol, ProtocolConfig, ReportBundle};

#[derive(Parser)]
#[command(
    name = "embexp",
    about = "Embed an observational dataset in a hypothetical randomized experiment",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Protocol config file (TOML); the pre-registration artifact
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to config, then $EMBEXP_OUT_DIR, then ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config Monte-Carlo draw count
    #[arg(long)]
    draws: Option<usize>,
    /// Worker threads for Monte-Carlo loops
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Covariate and treatment summary of the input file (outcomes stay sealed)
    Summarize {
        /// Dataset CSV; reference schema (age, fev, ht, sex, smoke) unless
        /// --config provides a schema map
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the design stage and write design.json
    Design(CommonArgs),
    /// Balance diagnostics for an existing design (pre-lock, outcome-blind)
    Balance {
        #[command(flatten)]
        common: CommonArgs,
        /// design.json from the design stage
        #[arg(long)]
        design: PathBuf,
    },
    /// Freeze a design together with the protocol file into lock.json
    Lock {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        design: PathBuf,
    },
    /// Unseal outcomes behind a verified lock and run the analysis stage
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        lock: PathBuf,
    },
    /// Full pipeline: design, balance, lock, analyses, report bundle
    Run(CommonArgs),
}

fn out_dir(explicit: &Option<PathBuf>, cfg: &ProtocolConfig) -> PathBuf {
    explicit
        .clone()
        .or_else(|| cfg.run.out_dir.clone())
        .or_else(|| std::env::var_os("EMBEXP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: &Path, overrides: &CommonArgs) -> Result<(ProtocolConfig, String), Error> {
    let raw = std::fs::read_to_string(path)?;
    let mut cfg = ProtocolConfig::parse(&raw)?;
    if let Some(seed) = overrides.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(draws) = overrides.draws {
        cfg.run.draws = Some(draws);
    }
    if let Some(threads) = overrides.threads {
        cfg.run.threads = Some(threads);
    }
    // seed/draws overrides change the effective protocol, so they join the
    // lockable text; the worker count cannot affect any result and stays out
    let raw_effective = if overrides.seed.is_some() || overrides.draws.is_some() {
        format!(
            "{raw}\n# effective overrides: seed={:?} draws={:?}\n",
            cfg.run.seed, cfg.run.draws
        )
    } else {
        raw
    };
    Ok((cfg, raw_effective))
}

fn read_design(path: &Path) -> Result<DesignResult, Error> {
    let bytes = std::fs::read(path)?;
    let design: DesignResult = serde_json::from_slice(&bytes)?;
    design.validate()?;
    Ok(design)
}

fn cmd_summarize(input: &Path, config: &Option<PathBuf>) -> Result<(), Error> {
    let schema = match config {
        Some(p) => {
            let raw = std::fs::read_to_string(p)?;
            ProtocolConfig::parse(&raw)?.schema()
        }
        None => SchemaMap::default(),
    };
    let ds = load_csv(input, &schema)?;
    let s = summarize(&ds);
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn cmd_design(args: &CommonArgs) -> Result<(), Error> {
    let (cfg, _) = load_config(&args.config, args)?;
    let ds = load_csv(&cfg.input.path, &cfg.schema())?;
    let design = build_design(&cfg, &ds)?;
    let dir = out_dir(&args.out, &cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("design.json"), serde_json::to_vec_pretty(&design)?)?;
    eprintln!(
        "design: method {:?}, retained {} of {} units",
        design.method,
        design.retained.len(),
        ds.len()
    );
    Ok(())
}

fn cmd_balance(args: &CommonArgs, design_path: &Path) -> Result<(), Error> {
    let (cfg, _) = load_config(&args.config, args)?;
    let ds = load_csv(&cfg.input.path, &cfg.schema())?;
    let design = read_design(design_path)?;
    let report = balance_report(&design, &ds, cfg.alpha())?;
    let dir = out_dir(&args.out, &cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("balance.json"), serde_json::to_vec_pretty(&report)?)?;
    eprintln!(
        "balance: verdict {}",
        if report.verdict.plausible {
            "plausible"
        } else {
            "implausible"
        }
    );
    Ok(())
}

fn cmd_lock(args: &CommonArgs, design_path: &Path) -> Result<(), Error> {
    let (cfg, raw) = load_config(&args.config, args)?;
    let design = read_design(design_path)?;
    let lock = freeze(&design, &raw)?;
    let dir = out_dir(&args.out, &cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("lock.json"), serde_json::to_vec_pretty(&lock)?)?;
    eprintln!("lock: {}", lock.hash);
    Ok(())
}

fn cmd_analyze(args: &CommonArgs, design_path: &Path, lock_path: &Path) -> Result<(), Error> {
    let (cfg, raw) = load_config(&args.config, args)?;
    let design = read_design(design_path)?;
    let lock: DesignLock = serde_json::from_slice(&std::fs::read(lock_path)?)?;
    // refuse to run when the lock does not cover exactly this design + protocol
    let expect_protocol = sha256_hex(&[raw.as_bytes()]);
    if lock.protocol_hash != expect_protocol {
        return Err(Error::BlindingViolation(
            "lock was not taken over this protocol config (including overrides)".into(),
        ));
    }
    let ds = load_csv(&cfg.input.path, &cfg.schema())?;
    let ad = unseal_outcomes(&ds, &lock, &design, &raw).map_err(|e| match e {
        Error::Tamper(msg) => Error::BlindingViolation(msg),
        other => other,
    })?;
    let analyses = embexp::protocol::run_analyses(&cfg, &ad, cfg.run.threads.unwrap_or(1))?;
    let dir = out_dir(&args.out, &cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("inference.json"),
        serde_json::to_vec_pretty(&analyses)?,
    )?;
    eprintln!("analyze: {} analyses written", analyses.len());
    Ok(())
}

fn cmd_run(args: &CommonArgs) -> Result<(), Error> {
    let (cfg, raw) = load_config(&args.config, args)?;
    let bundle: ReportBundle = run_protocol(&cfg, &raw)?;
    let dir = out_dir(&args.out, &cfg);
    bundle.write_to(&dir)?;
    eprintln!(
        "run: bundle written to {} (lock {})",
        dir.display(),
        bundle.lock.hash
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Summarize { input, config } => cmd_summarize(input, config),
        Command::Design(args) => cmd_design(args),
        Command::Balance { common, design } => cmd_balance(common, design),
        Command::Lock { common, design } => cmd_lock(common, design),
        Command::Analyze {
            common,
            design,
            lock,
        } => cmd_analyze(common, design, lock),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
