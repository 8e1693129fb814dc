use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernel_greedy::experiment::{reconstruction_grid, ExperimentConfig, ResultsTable};
use kernel_greedy::io::{value_window, write_candidates, write_pgm};
use kernel_greedy::newton::{ModelSnapshot, NewtonModel};
use kernel_greedy::phantom::sample_functionals;
use kernel_greedy::{verify, Error};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "kgreedy", version, about = "Greedy kernel interpolation of Radon data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random lines of the phantom's sinogram and write them as CSV.
    Sample(SampleArgs),
    /// Run the thinning experiment for every configured method.
    Run(RunArgs),
    /// Check closed-form pairings and sinograms against quadrature.
    Verify(VerifyArgs),
    /// Evaluate a saved model on a grid and write a PGM image.
    Reconstruct(ReconstructArgs),
    /// Merge per-method summary.json files into one CSV table.
    Table(TableArgs),
}

/// Experiment settings that override the config file.
#[derive(Args)]
struct Overrides {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated, e.g. `p,h,f,fp,psr,beta:0.25,random,direct`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "beta-weight")]
    beta_weight: Option<f64>,
    /// `modified-shepp-logan` or `shepp-logan`.
    #[arg(long)]
    phantom: Option<String>,
    /// Draw radii from [0, sqrt 2] only.
    #[arg(long)]
    positive_radii: bool,
}

impl Overrides {
    fn apply(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.methods {
            c.methods = v.clone();
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.beta_weight {
            c.weight_beta = Some(v);
        }
        if let Some(v) = &self.phantom {
            c.phantom = v.clone();
        }
        if self.positive_radii {
            c.positive_radii_only = true;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the methods concurrently.
    #[arg(long)]
    parallel_methods: bool,
    /// Record wall times in traces and the table (breaks bit-identical output).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random pairs per pairing kind and parameter choice.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Random lines for the sinogram checks.
    #[arg(long, default_value_t = 100)]
    lines: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ReconstructArgs {
    /// model.json written by `run`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
    /// Compare against this phantom: prints the MSR and uses its gray window.
    #[arg(long)]
    phantom: Option<String>,
}

#[derive(Args)]
struct TableArgs {
    /// Directory holding one subdirectory per method.
    dir: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn sample(args: SampleArgs) -> Result<u8, Error> {
    let c = args.overrides.apply()?;
    c.validate()?;
    let set = sample_functionals(&c.phantom()?, c.n, c.seed, c.positive_radii_only)?;
    write_candidates(output(&args.out)?, &set.functionals()?, Some(&set.values))?;
    Ok(0)
}

fn run(args: RunArgs) -> Result<u8, Error> {
    let mut c = args.overrides.apply()?;
    if let Some(out) = args.out {
        c.out = out;
    }
    c.parallel_methods |= args.parallel_methods;
    c.record_timing |= args.timing;
    let report = kernel_greedy::run_experiment(&c)?;
    report.table.write_csv(io::stdout().lock(), true)?;
    for o in report.outcomes.iter().filter(|o| !o.summary.is_ok()) {
        eprintln!(
            "{}: {}",
            o.summary.method,
            o.summary.error.as_deref().unwrap_or("failed")
        );
    }
    let code = if report.outcomes.iter().any(|o| o.numerical_failure) {
        EXIT_NUMERICAL
    } else if report.outcomes.iter().any(|o| !o.summary.is_ok()) {
        EXIT_CONFIG
    } else {
        0
    };
    Ok(code)
}

fn verify(args: VerifyArgs) -> Result<u8, Error> {
    let checks = verify::run_suite(args.instances, args.lines, args.seed)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {:40} n={:<4} max_err={:.3e} worst/tol={:.3}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.max_error,
            c.worst_ratio
        );
        failed += usize::from(!c.passed);
    }
    Ok(if failed > 0 { EXIT_VERIFY } else { 0 })
}

fn reconstruct(args: ReconstructArgs) -> Result<u8, Error> {
    if args.grid == 0 {
        return Err(Error::Config("grid must be positive".into()));
    }
    let text = fs::read_to_string(&args.model)?;
    let model = NewtonModel::from_snapshot(&ModelSnapshot::from_json(&text)?)?;
    let values = reconstruction_grid(model.engine(), model.selected(), model.expansion(), args.grid)?;
    let window = match &args.phantom {
        Some(name) => {
            let config = ExperimentConfig {
                phantom: name.clone(),
                ..ExperimentConfig::default()
            };
            let truth = config.phantom()?.grid(args.grid);
            let msr = truth
                .iter()
                .zip(&values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / values.len() as f64;
            println!("msr {msr:e}");
            value_window(&truth)
        }
        None => value_window(&values),
    };
    write_pgm(
        BufWriter::new(File::create(&args.out)?),
        args.grid,
        args.grid,
        &values,
        window,
    )?;
    Ok(0)
}

fn table(args: TableArgs) -> Result<u8, Error> {
    let table = ResultsTable::from_summaries(&args.dir)?;
    table.write_csv(output(&args.out)?, true)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Table(a) => table(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
