use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use adaclust_cli::commands::{self, to_json};
use adaclust_cli::{Algo, CliError, RunConfig};
use adaclust_core::hard::MomentForm;
use adaclust_core::soft::PriorStrength;
use adaclust_core::Mode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adaclust", version, about = "Clustering of heterogeneous data with adaptive exponential-family topologies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the detected attribute kind and family of every column.
    Detect {
        input: PathBuf,
        #[arg(long)]
        label_col: Option<String>,
    },
    /// Fit with restarts; writes model.json, assignments.csv, summary.json.
    Fit(FitArgs),
    /// Generate a synthetic heterogeneous mixture from a JSON spec.
    Generate {
        /// Generator spec; defaults are used when omitted.
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// NMI of an assignments file against ground truth.
    Eval {
        assignments: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Truth column name.
        #[arg(long, default_value = "label")]
        label_col: String,
    },
    /// Data quantiles against quantiles of a sample from a fitted model.
    Qq {
        data: PathBuf,
        model: PathBuf,
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long, default_value_t = 100)]
        quantiles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ml,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Centered,
    Raw,
}

#[derive(Args)]
struct FitArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "adacluster")]
    algo: Algo,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, value_enum, default_value = "map")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = PriorStrength::default().b_mu)]
    prior_b_mu: f64,
    #[arg(long, default_value_t = PriorStrength::default().a_kappa)]
    prior_a_kappa: f64,
    #[arg(long, default_value_t = PriorStrength::default().b_kappa)]
    prior_b_kappa: f64,
    /// Pseudo-samples per seed point (GMoM variants, MAP mode).
    #[arg(long, default_value_t = 1.0)]
    prior_weight: f64,
    /// Second moment condition of the GMoM variants.
    #[arg(long, value_enum, default_value = "centered")]
    moment_form: FormArg,
}

impl FitArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            algo: self.algo,
            k: self.k,
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            mode: match self.mode {
                ModeArg::Ml => Mode::Ml,
                ModeArg::Map => Mode::Map,
            },
            seed: self.seed,
            prior: PriorStrength {
                b_mu: self.prior_b_mu,
                a_kappa: self.prior_a_kappa,
                b_kappa: self.prior_b_kappa,
            },
            prior_weight: self.prior_weight,
            moment_form: match self.moment_form {
                FormArg::Centered => MomentForm::Centered,
                FormArg::Raw => MomentForm::Raw,
            },
            threads: self.threads,
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Detect { input, label_col } => Ok(to_json(&commands::detect(&input, label_col.as_deref())?)),
        Command::Fit(args) => {
            let out = commands::fit(&args.input, args.label_col.as_deref(), &args.config(), &args.out)?;
            for (r, msg) in &out.failures {
                eprintln!("restart {r} failed: {msg}");
            }
            if out.summary.failed_restarts > out.failures.len() {
                eprintln!("... {} failed restarts in total", out.summary.failed_restarts);
            }
            eprintln!("wall time {:.3} s", out.wall.as_secs_f64());
            Ok(to_json(&out.summary))
        }
        Command::Generate { spec, seed, out } => Ok(to_json(&commands::generate(spec.as_deref(), seed, &out)?)),
        Command::Eval {
            assignments,
            truth,
            label_col,
        } => Ok(to_json(&commands::eval(&assignments, &truth, &label_col)?)),
        Command::Qq {
            data,
            model,
            label_col,
            quantiles,
            seed,
            out,
        } => Ok(to_json(&commands::qq(&data, &model, label_col.as_deref(), quantiles, seed, &out)?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(doc) => {
            // a closed pipe on stdout is not an error worth reporting
            let _ = writeln!(std::io::stdout(), "{doc}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
