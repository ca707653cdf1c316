use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flexa::control::{Merit, SelectionRule};
use flexa::problems::io::{load_instance, save_instance};
use flexa::problems::libsvm::{dataset_info, read_libsvm};
use flexa::problems::{ncvxqp_analogue, ncvxqp_generate, nesterov_generate, Instance};
use flexa::solvers::Status;
use flexa::ProblemInstance;

use crate::run::{execute, Algo, RunSettings};
use crate::{suite, usage, NumericFailure};

#[derive(Debug, Parser)]
#[command(name = "flexa", version, about = "Generate instances, run solvers and compare them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random instance directory.
    Generate(GenerateArgs),
    /// Run one solver on one instance.
    Solve(SolveArgs),
    /// Run an experiment suite described by a TOML file.
    Compare {
        spec: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Lasso,
    Ncvxqp,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 900)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sparsity: f64,
    /// l1 weight. For `ncvxqp` with `--kappa` this is a multiple of `c̄`
    /// instead.
    #[arg(long)]
    pub c: Option<f64>,
    /// Concavity weight of the nonconvex QP.
    #[arg(long, conflicts_with = "kappa")]
    pub cbar: Option<f64>,
    /// Set `c̄` to this multiple of the mean squared column norm.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Half-width of the box of the nonconvex QP.
    #[arg(long = "box")]
    pub b_box: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["instance", "libsvm"]))]
pub struct SolveArgs {
    /// Instance directory written by `generate`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// LIBSVM file, solved as l1-regularized logistic regression.
    #[arg(long)]
    pub libsvm: Option<PathBuf>,
    /// l1 weight for `--libsvm`; looked up from the file name when omitted.
    #[arg(long, requires = "libsvm")]
    pub c: Option<f64>,
    #[arg(long, default_value = "flexa")]
    pub algo: Algo,
    #[arg(long, conflicts_with = "rho")]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// re, zinf or zbar; defaults to re when V* is known.
    #[arg(long)]
    pub merit: Option<Merit>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write 0 in the wall_seconds column so reruns give identical traces.
    #[arg(long)]
    pub no_wall_time: bool,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Solve(a) => solve(&a),
        Command::Compare { spec } => suite::compare(&spec),
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let mut extra = vec![
        ("seed".to_string(), a.seed.to_string()),
        ("sparsity".to_string(), format!("{:?}", a.sparsity)),
    ];
    let inst = match a.kind {
        Kind::Lasso => {
            if a.cbar.is_some() || a.kappa.is_some() || a.b_box.is_some() {
                return usage("--cbar, --kappa and --box only apply to --kind ncvxqp");
            }
            let c = a.c.unwrap_or(1.0);
            Instance::Lasso(nesterov_generate(a.m, a.n, a.sparsity, c, a.seed).map_err(input_error)?)
        }
        Kind::Ncvxqp => {
            let b_box = a.b_box.unwrap_or(1.0);
            let q = match (a.cbar, a.kappa) {
                (Some(cbar), None) => ncvxqp_generate(a.m, a.n, a.sparsity, a.c.unwrap_or(1.0), cbar, b_box, a.seed),
                (None, Some(kappa)) => {
                    let ratio = a.c.unwrap_or(0.1);
                    extra.push(("kappa".into(), format!("{kappa:?}")));
                    ncvxqp_analogue(a.m, a.n, a.sparsity, kappa, ratio, b_box, a.seed)
                }
                _ => return usage("--kind ncvxqp needs --cbar or --kappa"),
            };
            Instance::NcvxQp(q.map_err(input_error)?)
        }
    };
    save_instance(&a.out, &inst, &extra).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("wrote {} instance to {}", inst.kind(), a.out.display());
    Ok(())
}

fn input_error(e: flexa::Error) -> anyhow::Error {
    match e {
        flexa::Error::InvalidArgument(_) | flexa::Error::Dimension { .. } => crate::UsageError(e.to_string()).into(),
        e => e.into(),
    }
}

pub fn load_problem(instance: Option<&Path>, libsvm: Option<&Path>, c: Option<f64>) -> Result<ProblemInstance> {
    let inst = match (instance, libsvm) {
        (Some(dir), None) => load_instance(dir).with_context(|| format!("loading instance {}", dir.display()))?,
        (None, Some(file)) => {
            let c = match c {
                Some(c) => c,
                None => {
                    let stem = file.file_name().and_then(|s| s.to_str()).unwrap_or_default();
                    match dataset_info(stem) {
                        Some(d) => d.c,
                        None => return usage(format!("--c is required for `{}`", file.display())),
                    }
                }
            };
            Instance::Logistic(read_libsvm(file, c).with_context(|| format!("reading {}", file.display()))?)
        }
        _ => return usage("exactly one of --instance and --libsvm is required"),
    };
    Ok(inst.into_problem()?)
}

fn solve(a: &SolveArgs) -> Result<()> {
    let p = load_problem(a.instance.as_deref(), a.libsvm.as_deref(), a.c)?;
    let merit = a.merit.unwrap_or_else(|| Merit::default_for(&p));
    let mut s = RunSettings::new(a.algo, merit);
    if let Some(rho) = a.rho {
        s.selection = SelectionRule::TopRho(rho);
    } else if let Some(sigma) = a.sigma {
        s.selection = SelectionRule::Threshold(sigma);
    }
    s.workers = a.workers;
    s.tol = a.tol;
    s.max_iters = a.max_iters;
    s.seed = a.seed;
    s.time_limit = a.time_limit;
    s.record_wall_time = !a.no_wall_time;

    let out = execute(&p, &s)?;
    if let Some(path) = &a.trace {
        out.trace
            .save_csv(path)
            .with_context(|| format!("writing trace {}", path.display()))?;
    }
    println!("{}", out.summary());
    if let Status::Failed(msg) = &out.status {
        return Err(NumericFailure(msg.clone()).into());
    }
    Ok(())
}
