use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbmlab_cli::config::{DimensionSource, Experiment, ExperimentConfig, PhiChoice};
use sbmlab_cli::pipeline::run;
use sbmlab_cli::CliError;

#[derive(Parser, Debug)]
#[command(name = "sbmlab", version, about = "Very singular solution, killed OU spectrum and super-Brownian zero-set experiments")]
struct Cli {
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replicate and row parallelism
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Shoot for the profile F and tabulate it
    Profile {
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        y_max: Option<f64>,
    },
    /// Eigenpairs of the OU generator killed by 0, F/2 or F
    Spectrum {
        #[arg(long, value_parser = parse_phi)]
        phi: Option<PhiChoice>,
        #[arg(long)]
        domain_l: Option<f64>,
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Convergence rate of V^lambda(1,0) to V^infinity(1,0)
    PdeRate {
        #[arg(long)]
        t: Option<f64>,
        /// Comma-separated lambda ladder
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Particle approximation: density, tail counts and boundary points
    Simulate(SimArgs),
    /// Left-tail exponent of the density at the origin
    Tail {
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated a ladder
        #[arg(long, value_delimiter = ',')]
        a_ladder: Option<Vec<f64>>,
    },
    /// Box-counting dimension and Riesz energy of a point set
    Dimension {
        /// Points file, one number per line
        #[arg(long, group = "source")]
        input: Option<PathBuf>,
        /// Middle-thirds Cantor set of this depth
        #[arg(long, group = "source")]
        cantor: Option<u32>,
        /// Range of the subordinator with this index
        #[arg(long, group = "source")]
        subordinator: Option<f64>,
        /// Boundary of the zero set of the particle density
        #[arg(long, group = "source")]
        bz: bool,
        /// Comma-separated scale ladder
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Distribution-function bounds from Laplace-transform bounds
    Tauberian {
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        ulambda: Option<f64>,
    },
    /// profile, spectrum, pde-rate, simulate and tail, dimension; writes summary.json
    FullPipeline,
    /// The experiment named in the configuration file
    Run,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Initial measure, "delta:x[:mass]" or "lebesgue:[a,b]:mass"
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// Particles per unit mass
    #[arg(short = 'N', long = "N")]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
}

fn parse_phi(s: &str) -> Result<PhiChoice, String> {
    match s {
        "zero" => Ok(PhiChoice::Zero),
        "half-f" => Ok(PhiChoice::HalfF),
        "full-f" => Ok(PhiChoice::FullF),
        _ => Err(format!("expected zero, half-f or full-f, got {s}")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply(cli: Cli) -> Result<(ExperimentConfig, Experiment), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.output_dir, cli.out);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let experiment = match cli.command {
        Command::Profile { step, y_max } => {
            set(&mut cfg.profile.step, step);
            set(&mut cfg.profile.y_max, y_max);
            Experiment::Profile
        }
        Command::Spectrum { phi, domain_l, grid_step, n_max } => {
            set(&mut cfg.spectrum.phi, phi);
            set(&mut cfg.spectrum.domain_l, domain_l);
            set(&mut cfg.spectrum.grid_step, grid_step);
            set(&mut cfg.spectrum.n_max, n_max);
            Experiment::Spectrum
        }
        Command::PdeRate { t, lambdas } => {
            set(&mut cfg.pde_rate.t, t);
            set(&mut cfg.pde_rate.lambdas, lambdas);
            Experiment::PdeRate
        }
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(&mut s.x0, a.x0);
            set(&mut s.t, a.t);
            set(&mut s.n, a.n);
            set(&mut s.reps, a.reps);
            if a.bandwidth.is_some() {
                s.bandwidth = a.bandwidth;
            }
            Experiment::Simulate
        }
        Command::Tail { sim: a, a_ladder } => {
            let s = &mut cfg.tail;
            set(&mut s.x0, a.x0);
            set(&mut s.t, a.t);
            set(&mut s.n, a.n);
            set(&mut s.reps, a.reps);
            if a.bandwidth.is_some() {
                s.bandwidth = a.bandwidth;
            }
            set(&mut s.a_ladder, a_ladder);
            Experiment::Tail
        }
        Command::Dimension { input, cantor, subordinator, bz, scales, beta } => {
            let d = &mut cfg.dimension;
            if let Some(path) = input {
                d.source = DimensionSource::Input;
                d.input = Some(path);
            } else if let Some(depth) = cantor {
                d.source = DimensionSource::Cantor;
                d.cantor_depth = depth;
            } else if let Some(alpha) = subordinator {
                d.source = DimensionSource::Subordinator;
                d.alpha = Some(alpha);
            } else if bz {
                d.source = DimensionSource::Bz;
            }
            if scales.is_some() {
                d.scales = scales;
            }
            if beta.is_some() {
                d.beta = beta;
            }
            Experiment::Dimension
        }
        Command::Tauberian { c1, c2, p, ulambda } => {
            let q = &mut cfg.tauberian;
            set(&mut q.c1, c1);
            set(&mut q.c2, c2);
            set(&mut q.p, p);
            set(&mut q.ulambda, ulambda);
            Experiment::Tauberian
        }
        Command::FullPipeline => Experiment::FullPipeline,
        Command::Run => cfg
            .experiment
            .ok_or_else(|| CliError::Config("the configuration names no experiment".into()))?,
    };
    Ok((cfg, experiment))
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let (cfg, experiment) = apply(cli)?;
    cfg.validate()?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out = run(&cfg, experiment)?;
    out.write_all(&cfg.output_dir)?;
    let mut notes = out.notes;
    notes.push(format!("wrote {} files to {}", out.files.len() + 1, cfg.output_dir.display()));
    Ok(notes)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(notes) => {
            for line in notes {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sbmlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
