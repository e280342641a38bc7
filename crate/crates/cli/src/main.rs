//! `clickpoison`: run, compare and sweep click-poisoning experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clickpoison::attacks::Strategy;
use clickpoison::config::{self, ExperimentFile, Overrides, Resolved};
use clickpoison::harness::{self, OutputFormat, SweepParam};
use clickpoison::Error;

/// Fallback ratings file for MovieLens presets.
const RATINGS_VAR: &str = "CLICKPOISON_RATINGS";
/// Default output directory.
const OUT_VAR: &str = "CLICKPOISON_OUT";

#[derive(Parser)]
#[command(
    name = "clickpoison",
    version,
    about = "Click-poisoning attacks on online learning to rank"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first listed strategy.
    Run(ExperimentArgs),
    /// Run several strategies on paired seeds.
    Compare(ExperimentArgs),
    /// Run a one-parameter grid.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// `param=v1,v2,..` with param one of mu_target, delta0, x, epsilon.
        /// Defaults to the grids in the experiment file.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Print item means extracted from a MovieLens ratings file.
    Ingest {
        #[arg(long, env = RATINGS_VAR)]
        ratings: PathBuf,
        #[arg(long = "L", default_value_t = 100)]
        num_items: usize,
        #[arg(long, default_value_t = 4.0)]
        threshold: f64,
    },
    /// List presets, or print one.
    Presets {
        /// Print this preset's file.
        name: Option<String>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<u64>,
    #[arg(long = "L")]
    num_items: Option<usize>,
    #[arg(long = "K")]
    list_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, short = 'R')]
    replications: Option<u32>,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long, env = RATINGS_VAR)]
    ratings: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_VAR, default_value = "out")]
    out: PathBuf,
    /// Comma-separated subset of csv, json, plot.
    #[arg(long, value_delimiter = ',', default_value = "csv,json,plot")]
    formats: Vec<String>,
    /// Worker threads for replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the resolved experiment and stop.
    #[arg(long)]
    dry_run: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<Resolved, Error> {
        let file = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentFile::load(path)?,
            (None, Some(name)) => config::preset(name)?,
            (None, None) => return Err(Error::Config("give --config or --preset".into())),
        };
        let strategies = self
            .strategies
            .as_ref()
            .map(|names| {
                names
                    .iter()
                    .map(|n| Strategy::from_name(n))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let ov = Overrides {
            horizon: self.horizon,
            num_items: self.num_items,
            list_len: self.list_len,
            seed: self.seed,
            delta0: self.delta0,
            delta: self.delta,
            epsilon: self.epsilon,
            replications: self.replications,
            strategies,
            ratings: self.ratings.clone(),
        };
        let resolved = config::resolve(&file, &ov)?;
        println!(
            "{}",
            serde_json::to_string_pretty(&resolved).expect("spec serializes")
        );
        Ok(resolved)
    }

    fn formats(&self) -> Result<Vec<OutputFormat>, Error> {
        self.formats
            .iter()
            .map(|f| OutputFormat::from_name(f))
            .collect()
    }
}

fn parse_grid(text: &str) -> Result<(SweepParam, Vec<f64>), Error> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("grid `{text}` is not param=v1,v2,..")))?;
    let param = match name.trim() {
        "mu_target" => SweepParam::MuTarget,
        "delta0" => SweepParam::Delta0,
        "x" => SweepParam::X,
        "epsilon" => SweepParam::Epsilon,
        other => return Err(Error::Config(format!("cannot sweep `{other}`"))),
    };
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("grid value `{v}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((param, values))
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let r = args.resolve()?;
            if args.dry_run {
                return Ok(());
            }
            let result = harness::run_experiment(&r.spec, args.jobs)?;
            let s = &result.summary;
            eprintln!(
                "{}: chosen ratio {:.4}, cost {:.1}",
                r.spec.strategy, s.final_ratio_mean, s.final_cost_mean
            );
            report(&harness::emit_outputs(
                &result,
                &args.out,
                &args.formats()?,
            )?);
        }
        Command::Compare(args) => {
            let r = args.resolve()?;
            if args.dry_run {
                return Ok(());
            }
            let cmp = harness::compare(&r.spec, &r.strategies, args.jobs)?;
            for res in &cmp.results {
                eprintln!(
                    "{}: chosen ratio {:.4}, cost {:.1}",
                    res.spec.strategy, res.summary.final_ratio_mean, res.summary.final_cost_mean
                );
            }
            report(&harness::emit_comparison(
                &cmp,
                &args.out,
                &args.formats()?,
            )?);
        }
        Command::Sweep { exp, grid } => {
            let r = exp.resolve()?;
            let grids = match grid {
                Some(g) => vec![parse_grid(&g)?],
                None if r.sweeps.is_empty() => {
                    return Err(Error::Config(
                        "no grid: pass --grid or add a [[sweep]] table".into(),
                    ))
                }
                None => r.sweeps.clone(),
            };
            if exp.dry_run {
                return Ok(());
            }
            let formats = exp.formats()?;
            for (param, values) in grids {
                let s = harness::sweep(&r.spec, param, &values, &r.strategies, exp.jobs)?;
                report(&harness::emit_sweep(&s, &exp.out, &formats)?);
            }
        }
        Command::Ingest {
            ratings,
            num_items,
            threshold,
        } => {
            let means = harness::ingest_movielens(&ratings, num_items, threshold)?;
            println!("item,mean");
            for (i, m) in means.iter().enumerate() {
                println!("{},{m}", i + 1);
            }
        }
        Command::Presets { name: None } => {
            for (name, _) in config::PRESETS {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => print!("{}", config::preset_text(&name)?),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Invariant(_) | Error::InfeasibleFeedback(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
