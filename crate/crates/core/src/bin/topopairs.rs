use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use topopairs::commands::{self, Context, SweepAxis};
use topopairs::config::RunConfig;
use topopairs::{Error, Result};

/// Environment variable naming the curvature cache directory.
const CACHE_ENV: &str = "TOPOPAIRS_CACHE_DIR";

#[derive(Parser)]
#[command(
    name = "topopairs",
    version,
    about = "Topology-aware positive pair mining and joint GCN training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Single worker; results are bit-identical across runs.
    #[arg(long)]
    reproducible: bool,
    /// Configuration overrides as `--key value` or `--key=value`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Homophily index and neighbor-bias statistics.
    Stats(Common),
    /// Curvature, persistence diagrams and the persistence-image store.
    Extract(Common),
    /// Long-range positive pairs from the image store.
    Mine(Common),
    /// Joint training on the mined pairs.
    Train(Common),
    /// Train across one parameter axis and tabulate test accuracy.
    Sweep {
        /// One of delta, lambda, resolution, filtration.
        axis: String,
        /// Comma-separated values (defaults to the axis' standard grid).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Markdown summary of the artifacts in the output directory.
    Report(Common),
}

fn parse_overrides(raw: &[String], cfg: &mut RunConfig) -> Result<()> {
    let mut it = raw.iter();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected `--key value`, got {tok:?}")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("`--{key}` needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        cfg.set(&key.replace('-', "_"), &value)?;
    }
    Ok(())
}

/// Moves `--config`, `--threads` and `--reproducible` that appear after the
/// first override back into their fields.
fn lift_common(common: &mut Common) -> Result<()> {
    let mut rest = Vec::new();
    let mut it = std::mem::take(&mut common.overrides).into_iter();
    while let Some(tok) = it.next() {
        let (flag, inline) = match tok.split_once('=') {
            Some((f, v)) => (f.to_string(), Some(v.to_string())),
            None => (tok.clone(), None),
        };
        let mut value = |name: &str| {
            inline
                .clone()
                .or_else(|| it.next())
                .ok_or_else(|| Error::Config(format!("`{name}` needs a value")))
        };
        match flag.as_str() {
            "--reproducible" if inline.is_none() => common.reproducible = true,
            "--config" => common.config = Some(PathBuf::from(value("--config")?)),
            "--threads" => {
                let v = value("--threads")?;
                common.threads = Some(
                    v.parse()
                        .map_err(|_| Error::Config(format!("bad thread count {v:?}")))?,
                );
            }
            _ => rest.push(tok),
        }
    }
    common.overrides = rest;
    Ok(())
}

fn setup(common: &mut Common) -> Result<(RunConfig, Context)> {
    lift_common(common)?;
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    parse_overrides(&common.overrides, &mut cfg)?;
    let threads = if common.reproducible {
        Some(1)
    } else {
        common.threads
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cache_dir = std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output.join("cache"));
    Ok((
        cfg,
        Context {
            cache_dir: Some(cache_dir),
        },
    ))
}

fn print_pairs(kv: &[(String, String)]) {
    for (k, v) in kv {
        println!("{k}\t{v}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(mut c) => {
            let (cfg, ctx) = setup(&mut c)?;
            print_pairs(&commands::stats(&cfg, &ctx)?);
        }
        Command::Extract(mut c) => {
            let (cfg, ctx) = setup(&mut c)?;
            let wrote = commands::extract(&cfg, &ctx)?;
            println!(
                "{} {}",
                if wrote { "wrote" } else { "up to date:" },
                cfg.output.join(commands::PIS_FILE).display()
            );
        }
        Command::Mine(mut c) => {
            let (cfg, ctx) = setup(&mut c)?;
            let set = commands::mine(&cfg, &ctx)?;
            println!("pairs\t{}", set.len());
            println!("epsilon\t{}", set.epsilon);
            println!("pool_size\t{}", set.pool_size);
        }
        Command::Train(mut c) => {
            let (cfg, ctx) = setup(&mut c)?;
            print_pairs(&commands::train(&cfg, &ctx)?.to_key_values());
        }
        Command::Sweep {
            axis,
            values,
            mut common,
        } => {
            let (cfg, ctx) = setup(&mut common)?;
            let axis: SweepAxis = axis.parse()?;
            let rows = commands::sweep(&cfg, &ctx, axis, values)?;
            println!("{}\ttest_acc", axis.key());
            for r in rows {
                println!("{}\t{:.2}", r.label, 100.0 * r.metrics.test_acc);
            }
        }
        Command::Report(mut c) => {
            let (cfg, _) = setup(&mut c)?;
            print!("{}", commands::report(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let start = std::time::Instant::now();
    match run(cli) {
        Ok(()) => {
            info!("done in {:.2?}", start.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
