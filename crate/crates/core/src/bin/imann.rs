use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use imann::benchmarks::registry;
use imann::harness::{
    emit_csv, emit_plot_data, read_csv, run_experiment, select_best, ExperimentConfig, Method,
    Overrides, RunRecord,
};

#[derive(Parser)]
#[command(name = "imann", version, about = "Train and compare hybrid model/network predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best-of-k attempts for one formulation, method and dataset size.
    Run(Flags),
    /// Dataset-size sweep over formulations and methods.
    Sweep(Flags),
    /// Aggregate attempt CSVs into best-per-size tables and plot data.
    Report {
        /// Attempt CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Flags {
    /// TOML file with the same keys as the long flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// f1..f9 (sweep: all when omitted).
    #[arg(long)]
    formulation: Option<String>,
    /// imann or dnn (sweep: both when omitted).
    #[arg(long)]
    method: Option<String>,
    /// Layer widths, e.g. 1-5-5-1.
    #[arg(long)]
    arch: Option<String>,
    /// Comma-separated dataset sizes (2-D sizes must be perfect squares).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long)]
    cma_sigma: Option<f64>,
    #[arg(long)]
    cma_population: Option<usize>,
    #[arg(long)]
    cma_max_evals: Option<usize>,
    #[arg(long)]
    cma_target: Option<f64>,
    #[arg(long)]
    dnn_lr: Option<f64>,
    #[arg(long)]
    dnn_epochs: Option<usize>,
    #[arg(long)]
    dnn_patience: Option<usize>,
}

impl Flags {
    fn resolve(self) -> Result<Overrides> {
        let flags = Overrides {
            formulation: self.formulation,
            method: self.method,
            arch: self.arch,
            sizes: self.sizes,
            restarts: self.restarts,
            seed: self.seed,
            out: self.out,
            quad_points: self.quad_points,
            cma_sigma: self.cma_sigma,
            cma_population: self.cma_population,
            cma_max_evals: self.cma_max_evals,
            cma_target: self.cma_target,
            dnn_lr: self.dnn_lr,
            dnn_epochs: self.dnn_epochs,
            dnn_patience: self.dnn_patience,
        };
        Ok(match &self.config {
            Some(path) => flags.or(Overrides::load(path)?),
            None => flags,
        })
    }
}

fn print_best(best: &[RunRecord]) {
    println!(
        "{:<4} {:<6} {:<14} {:>6} {:>8} {:>14} {:>14} {:>8}",
        "f", "method", "arch", "size", "restart", "fitness", "R", "status"
    );
    for r in best {
        println!(
            "{:<4} {:<6} {:<14} {:>6} {:>8} {:>14.6e} {:>14.6e} {:>8}",
            r.formulation,
            r.method,
            r.arch,
            r.dataset_size,
            r.restart_index,
            r.fitness,
            r.error_integral,
            r.status
        );
    }
}

fn write_outputs(out: &std::path::Path, attempts: &[RunRecord], best: &[RunRecord]) -> Result<()> {
    emit_csv(attempts, &out.join("attempts.csv"))?;
    emit_csv(best, &out.join("best.csv"))?;
    let files = emit_plot_data(best, &out.join("plot"))?;
    eprintln!(
        "wrote {} and {} plot files",
        out.join("attempts.csv").display(),
        files.len()
    );
    Ok(())
}

fn run_one(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, Vec<RunRecord>)> {
    eprintln!(
        "{} {} {} sizes={:?} restarts={}",
        config.formulation, config.method, config.arch, config.sizes, config.restarts
    );
    let result = run_experiment(config)
        .with_context(|| format!("{} / {}", config.formulation, config.method))?;
    Ok((result.attempts, result.best))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(flags) => {
            let o = flags.resolve()?;
            let Some(f) = o.formulation.clone() else {
                bail!("run needs --formulation");
            };
            let Some(method) = o.method()? else {
                bail!("run needs --method");
            };
            let Some(sizes) = &o.sizes else {
                bail!("run needs --sizes with a single dataset size");
            };
            if sizes.len() != 1 {
                bail!("run takes a single dataset size; use sweep for several");
            }
            let config = o.experiment(&f, method)?;
            let (attempts, best) = run_one(&config)?;
            write_outputs(&config.out_dir, &attempts, &best)?;
            print_best(&best);
        }
        Command::Sweep(flags) => {
            let o = flags.resolve()?;
            let formulations: Vec<String> = match &o.formulation {
                Some(f) => vec![f.clone()],
                None => registry().iter().map(|f| f.id.to_string()).collect(),
            };
            let methods: Vec<Method> = match o.method()? {
                Some(m) => vec![m],
                None => Method::ALL.to_vec(),
            };
            if o.arch.is_some() && (formulations.len() > 1 || methods.len() > 1) {
                bail!("--arch only applies to a sweep over one formulation and one method");
            }
            let mut attempts = Vec::new();
            let mut best = Vec::new();
            let mut out_dir = None;
            for f in &formulations {
                for &m in &methods {
                    let config = o.experiment(f, m)?;
                    out_dir.get_or_insert_with(|| config.out_dir.clone());
                    let (a, b) = run_one(&config)?;
                    attempts.extend(a);
                    best.extend(b);
                }
            }
            let out = out_dir.expect("at least one experiment");
            write_outputs(&out, &attempts, &best)?;
            print_best(&best);
        }
        Command::Report { inputs, out } => {
            let mut attempts = Vec::new();
            for path in &inputs {
                attempts.extend(read_csv(path)?);
            }
            let best = select_best(&attempts);
            emit_csv(&best, &out.join("best.csv"))?;
            let files = emit_plot_data(&best, &out.join("plot"))?;
            eprintln!("{} attempts, {} plot files", attempts.len(), files.len());
            print_best(&best);
        }
    }
    Ok(())
}
