//! `iwes` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iwes::runner::{self, parse_values, Resources, RunConfig, SweepAxis};
use iwes::{persist, Error};

#[derive(Parser)]
#[command(name = "iwes", version, about = "Evolution Strategies with importance-weighted batch reuse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` overrides applied on top of the file (values parsed as JSON).
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per configured seed.
    Train(ConfigArgs),
    /// Train every value of one axis and summarise steps-to-threshold.
    Sweep {
        /// K, hidden or lr.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time iterations for each (hidden, K) pair, normalised by K = 0.
    Bench {
        #[arg(long = "k-values", default_value = "0,2,4,5")]
        k_values: String,
        #[arg(long = "hidden-values", default_value = "64,512")]
        hidden_values: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Median evaluation return of a saved parameter file.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn counts(list: &str) -> Result<Vec<usize>, Error> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad count {s:?}: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.load()?;
            let out = runner::train(&cfg)?;
            if let Some(last) = out.aggregate.last() {
                println!(
                    "trained {} seed(s) for {} iterations; mean final median return {:.6}",
                    out.runs.len(),
                    cfg.iterations,
                    last.median_eval_return
                );
            }
            println!("artifacts in {}", out.out_dir.display());
        }
        Command::Sweep { axis, values, cfg } => {
            let cfg = cfg.load()?;
            let axis: SweepAxis = axis.parse()?;
            let values = parse_values(&values)?;
            let out = runner::sweep(&cfg, axis, &values)?;
            println!("{axis:>14} {:>16} {:>14}", "steps_to_thr", "best_return");
            for r in &out.summary {
                let steps = r.steps_to_threshold.map_or("never".to_string(), |s| format!("{s:.0}"));
                println!("{:>14} {steps:>16} {:>14.4}", r.value, r.best_return);
            }
            println!("summary in {}", cfg.out_dir.join("summary.csv").display());
        }
        Command::Bench {
            k_values,
            hidden_values,
            cfg,
        } => {
            let cfg = cfg.load()?;
            let res = Resources::new(cfg.workers)?;
            let rows = runner::bench_throughput(&cfg, &counts(&k_values)?, &counts(&hidden_values)?, &res)?;
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
                path: cfg.out_dir.clone(),
                source: e,
            })?;
            let path = cfg.out_dir.join("throughput.csv");
            runner::write_throughput(&path, &rows)?;
            println!("{:>7} {:>3} {:>12} {:>8}", "hidden", "K", "iter_ms", "ratio");
            for r in &rows {
                println!("{:>7} {:>3} {:>12.3} {:>8.3}", r.hidden, r.k, r.median_iter_ms, r.ratio);
            }
            println!("table in {}", path.display());
        }
        Command::Eval { params, cfg } => {
            let cfg = cfg.load()?;
            let theta = persist::load_params(&params)?;
            let ret = runner::evaluate_params(&cfg, &theta)?;
            println!("{ret}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes count as configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
