use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use safebo_core::benchmarks::{self, flood_fill, nearest_node};
use safebo_core::gp::{Channel, KernelSpec};
use safebo_core::harness::{output_dir, run_campaign, write_outputs, CampaignSummary, RunConfig, OUTPUT_DIR_ENV};
use safebo_core::safe_set::BetaSchedule;
use safebo_core::theory::{self, CPreset, RateFunction};

#[derive(Parser)]
#[command(name = "safebo", version, about = "Safe Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Theory diagnostics.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Benchmark registry.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// CSV of (N, gamma_N, beta_N, log condition) on a 1-D RBF grid, plus N_eps.
    Crossing(CrossingArgs),
    /// JSON expansion fixed point of a benchmark constraint on a grid.
    Expansion(ExpansionArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Exploration,
    Optimization,
}

#[derive(Args)]
struct CrossingArgs {
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Mean bound in eta; defaults to 2 beta.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.2)]
    lengthscale: f64,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 500)]
    n_max: usize,
    #[arg(long, value_enum, default_value_t = Preset::Exploration)]
    preset: Preset,
    /// Required for the optimization preset.
    #[arg(long)]
    phi: Option<f64>,
}

#[derive(Args)]
struct ExpansionArgs {
    #[arg(long, default_value = "synthetic1d")]
    benchmark: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// List registered benchmarks.
    List,
}

type CliResult = Result<ExitCode, String>;

fn run(config: PathBuf, out: Option<PathBuf>) -> CliResult {
    let text = std::fs::read_to_string(&config).map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| e.to_string())?;
    let campaign = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let dir = out.unwrap_or_else(|| output_dir(&cfg));
    let path = write_outputs(&campaign, &dir).map_err(|e| e.to_string())?;
    let summary = CampaignSummary::new(&campaign).map_err(|e| e.to_string())?;
    if let Some(agg) = &summary.aggregate {
        if let Some(last) = agg.final_regret() {
            println!("final regret {:.4} ± {:.4} over {} seeds", last.mean, last.stderr, agg.seeds);
        }
        println!("violations per run {}", agg.violation_row());
    }
    println!("summary written to {}", path.display());
    for s in summary.seeds.iter().filter(|s| s.error.is_some()) {
        eprintln!("seed {} failed: {}", s.seed, s.error.as_deref().unwrap_or_default());
    }
    Ok(if campaign.failed_seeds() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn crossing(a: CrossingArgs) -> CliResult {
    let beta = BetaSchedule::constant(a.beta);
    let m = a.m.unwrap_or(2.0 * a.beta);
    let (g, c) = match a.preset {
        Preset::Exploration => (RateFunction::Eta { m, noise_var: a.noise }, CPreset::Exploration { noise_var: a.noise }),
        Preset::Optimization => {
            let phi = a.phi.ok_or("--phi is required for the optimization preset")?;
            (RateFunction::B { m, noise_var: a.noise, phi }, CPreset::Optimization { noise_var: a.noise, phi, beta: a.beta })
        }
    };
    let c = c.value().map_err(|e| e.to_string())?;
    let grid: Vec<Vec<f64>> = (0..a.grid).map(|i| vec![i as f64 / (a.grid.max(2) - 1) as f64]).collect();
    let gamma = theory::empirical_gamma(&KernelSpec::isotropic(1, a.lengthscale, 1.0), &grid, a.noise, a.n_max)
        .map_err(|e| e.to_string())?;
    println!("n,gamma,beta,value");
    for row in theory::log_crossing(a.eps, &beta, &gamma, &g, c, a.n_max) {
        println!("{},{},{},{}", row.n, row.gamma, row.beta, row.value);
    }
    match theory::n_epsilon(a.eps, &beta, &gamma, &g, c, a.n_max).map_err(|e| e.to_string())? {
        Some(n) => eprintln!("N_eps = {n}"),
        None => eprintln!("N_eps not reached within {}", a.n_max),
    }
    Ok(ExitCode::SUCCESS)
}

fn expansion(a: ExpansionArgs) -> CliResult {
    let problem = benchmarks::by_name(&a.benchmark, a.seed).map_err(|e| e.to_string())?;
    let grid = problem.domain.grid(a.resolution);
    let values = grid.iter().map(|x| problem.constraint(x)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let x0 = nearest_node(&problem.domain, a.resolution, &problem.x0);
    let kernel = problem.kernel.channel_kernel(Channel::Constraint);
    let noise = problem.noise_variance(Channel::Constraint, &problem.x0);
    let state = theory::expansion_fixed_point(&kernel, &grid, &values, noise, x0, a.eps, a.beta).map_err(|e| e.to_string())?;
    let truth = flood_fill(&values, &vec![a.resolution; problem.dim()], x0);
    eprintln!(
        "fixed point: {} of {} reachable safe nodes after {} rounds, {} conditionings",
        state.safe_count(),
        truth.iter().filter(|b| **b).count(),
        state.rounds,
        state.conditionings
    );
    println!("{}", serde_json::to_string(&state).map_err(|e| e.to_string())?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => run(config, output_dir),
        Command::Theory(TheoryCommand::Crossing(a)) => crossing(a),
        Command::Theory(TheoryCommand::Expansion(a)) => expansion(a),
        Command::Bench(BenchCommand::List) => {
            for name in benchmarks::NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
