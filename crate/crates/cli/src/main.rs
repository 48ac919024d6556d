use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pbqaoa_cli::output::{read_json, write_json};
use pbqaoa_cli::{analyze_dir, generate, optimize_dir, run_pipeline, write_atomic, ExperimentConfig, RunReport};
use pbqaoa_core::angles::{default_sweep_values, write_sweep_csv};
use pbqaoa_core::interferometer::write_covariance_csv;
use pbqaoa_core::sim::{write_state_dump, StateDumpHeader};
use pbqaoa_core::*;

#[derive(Parser)]
#[command(
    name = "pbqaoa",
    version,
    about = "Pseudo-Boltzmann analysis of single-layer QAOA on random Ising ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the problem files of an ensemble.
    Generate(EnsembleArgs),
    /// Find optimal angles for a stored ensemble or a single problem.
    Optimize(OptimizeArgs),
    /// Prepare the QAOA state of one problem: amplitude dump and probability table.
    Simulate(SimulateArgs),
    /// Recompute every derived table of an ensemble directory from its problems and angles.
    Analyze(DirArgs),
    /// Hamming/energy covariance profile and covariance law of one problem.
    Covariance(CovarianceArgs),
    /// Compare beta_QAOA with the Metropolis fast-mixing threshold for one problem.
    McmcCompare(McmcArgs),
    /// Full pipeline: generate, optimize, simulate, analyze and compare.
    Replicate(EnsembleArgs),
    /// Energy, beta and enhancement along a cut through the optimal angles.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EnsembleArgs {
    /// Problem family: qubo, maxcut or random_ising.
    #[arg(long, default_value = "qubo")]
    family: Family,
    /// Coupling graph: gnm:<density> or regular:<degree>.
    #[arg(long, default_value = "gnm:0.9")]
    graph: GraphMeta,
    /// Comma-separated problem sizes.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Variance of the Gaussian couplings.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Replicas per size.
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Master seed; replica seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Phase of the longitudinal mixing term.
    #[arg(long, default_value_t = -FRAC_PI_2, allow_hyphen_values = true)]
    lambda: f64,
    /// Energy bins of the replica-averaged fit.
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Output directory.
    #[arg(long, env = "PBQAOA_OUT", default_value = "pbqaoa-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl EnsembleArgs {
    fn config(self) -> ExperimentConfig {
        ExperimentConfig {
            family: self.family,
            graph: self.graph,
            n_list: self.n_list,
            sigma2: self.sigma2,
            replicas: self.replicas,
            master_seed: self.seed,
            lambda: self.lambda,
            bins: self.bins,
            out: self.out,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct DirArgs {
    /// Ensemble directory.
    #[arg(long, env = "PBQAOA_OUT", default_value = "pbqaoa-out")]
    dir: PathBuf,
    /// Worker threads (0 = all cores); defaults to the recorded value.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Ensemble directory (ignored with --problem).
    #[arg(long, env = "PBQAOA_OUT", default_value = "pbqaoa-out")]
    dir: PathBuf,
    /// Single problem file instead of a directory.
    #[arg(long, requires = "output")]
    problem: Option<PathBuf>,
    /// Angles file written for --problem.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Phase of the longitudinal mixing term; defaults to the recorded value (or -pi/2).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

/// A problem plus the circuit angles to use on it.
#[derive(Args)]
struct ProblemAngles {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    /// Angles JSON written by `optimize`; when absent the angles are optimized on the fly.
    #[arg(long, conflicts_with_all = ["gamma", "theta"])]
    angles: Option<PathBuf>,
    /// Explicit cost-layer angle (with --theta).
    #[arg(long, requires = "theta", allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Explicit mixer rotation angle (with --gamma).
    #[arg(long, requires = "gamma", allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Phase of the longitudinal mixing term.
    #[arg(long, default_value_t = -FRAC_PI_2, allow_hyphen_values = true)]
    lambda: f64,
}

impl ProblemAngles {
    fn load(&self) -> Result<(IsingProblem, Spectrum, OptResult)> {
        let p =
            IsingProblem::read_json(&self.problem).with_context(|| format!("reading {}", self.problem.display()))?;
        let s = full_spectrum(&p)?;
        let opt = match (&self.angles, self.gamma, self.theta) {
            (Some(path), _, _) => read_json(path)?,
            (None, Some(gamma_opt), Some(theta_opt)) => {
                let params = CircuitParams::new(gamma_opt, theta_opt, self.lambda);
                OptResult {
                    gamma_opt,
                    theta_opt,
                    lambda: self.lambda,
                    energy_opt: analytic_expectation(&p, params),
                    evaluations: 0,
                    converged: false,
                }
            }
            _ => optimize_angles(&p, &s, self.lambda)?,
        };
        Ok((p, s, opt))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: ProblemAngles,
    /// Output stem: writes <stem>.bin, <stem>.json and <stem>.csv.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CovarianceArgs {
    #[command(flatten)]
    input: ProblemAngles,
    /// Profile CSV; the fitted law goes to the same path with a .json extension.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct McmcArgs {
    #[command(flatten)]
    input: ProblemAngles,
    /// Comparison CSV (seed, N, norm_J, beta_qaoa, product, threshold).
    #[arg(long)]
    output: PathBuf,
    /// Also sample at beta_QAOA with this many Metropolis sweeps and write
    /// the empirical and exact distributions next to the comparison.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Sweeps discarded before recording.
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    /// Chain seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fix {
    /// Hold theta at its optimum and vary gamma.
    Theta,
    /// Hold gamma at its optimum and vary theta.
    Gamma,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: ProblemAngles,
    /// Angle held at its optimum.
    #[arg(long, value_enum)]
    fix: Fix,
    /// Points along the cut.
    #[arg(long, default_value_t = 64)]
    points: usize,
    /// Output CSV (angle, energy, beta, beta_stderr, fit_r2, xi).
    #[arg(long)]
    output: PathBuf,
}

fn report(r: RunReport) -> i32 {
    for e in &r.manifest.ensembles {
        eprintln!("n = {}: {}/{} replicas, {:?}", e.n, e.completed, e.requested, e.status);
    }
    r.status.exit_code()
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (p, s, opt) = a.input.load()?;
    let state = prepare_state(&p, &s, opt.params())?;
    let header = StateDumpHeader {
        n: p.n(),
        params: opt.params(),
        problem_seed: p.seed(),
    };
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_state_dump(&a.output, &state, &header)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "energy", "probability"])?;
    for (x, (e, pr)) in s.energies().iter().zip(probabilities(&state)).enumerate() {
        w.write_record([x.to_string(), e.to_string(), pr.to_string()])?;
    }
    write_atomic(
        &a.output.with_extension("csv"),
        &w.into_inner().map_err(|e| anyhow!("{e}"))?,
    )?;
    let fit = fit_instance(&probabilities(&state), &s)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}

fn covariance(a: CovarianceArgs) -> Result<()> {
    let (p, s, opt) = a.input.load()?;
    let profile = covariance_all(&s, p.is_z2_symmetric())?;
    let law = fit_covariance_law(&profile.sigma_eh, &s, opt.params())?;
    let mut buf = Vec::new();
    write_covariance_csv(&mut buf, &s, &profile)?;
    write_atomic(&a.output, &buf)?;
    write_json(&a.output.with_extension("json"), &law)?;
    println!("{}", serde_json::to_string_pretty(&law)?);
    Ok(())
}

fn mcmc_compare(a: McmcArgs) -> Result<()> {
    let (p, s, opt) = a.input.load()?;
    let state = prepare_state(&p, &s, opt.params())?;
    let beta = fit_instance(&probabilities(&state), &s)?.beta;
    let comparison = compare(&p, beta)?;
    let mut buf = Vec::new();
    mcmc::write_comparison_csv(
        &mut buf,
        &[ComparisonRow {
            seed: p.seed(),
            n: p.n(),
            comparison,
        }],
    )?;
    write_atomic(&a.output, &buf)?;
    println!("{}", serde_json::to_string_pretty(&comparison)?);
    if let Some(sweeps) = a.sweeps {
        let set = metropolis_sample(&p, beta, sweeps, a.burn_in, a.seed);
        let empirical = set.histogram();
        let weights: Vec<f64> = s.energies().iter().map(|e| (-beta * (e - s.e_min())).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "energy", "empirical", "exact"])?;
        let mut tv = 0.0;
        for x in 0..s.dim() {
            let exact = weights[x] / z;
            tv += 0.5 * (empirical[x] - exact).abs();
            w.write_record([
                x.to_string(),
                s.energies()[x].to_string(),
                empirical[x].to_string(),
                exact.to_string(),
            ])?;
        }
        let path = a.output.with_file_name(format!(
            "{}_samples.csv",
            a.output
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        ));
        write_atomic(&path, &w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
        eprintln!(
            "total variation {tv:.4}, acceptance {:.3}, energy autocorrelation {:.1} sweeps",
            set.acceptance_rate(),
            set.energy_autocorrelation_time()
        );
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let (p, s, opt) = a.input.load()?;
    let held = match a.fix {
        Fix::Theta => HeldAngle::Theta,
        Fix::Gamma => HeldAngle::Gamma,
    };
    let points = sweep(&p, &s, &opt, held, &default_sweep_values(&opt, held, a.points))?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &points)?;
    write_atomic(&a.output, &buf)
}

fn optimize(a: OptimizeArgs) -> Result<i32> {
    match (a.problem, a.output) {
        (Some(problem), Some(output)) => {
            let p = IsingProblem::read_json(&problem)?;
            let s = full_spectrum(&p)?;
            let opt = optimize_angles(&p, &s, a.lambda.unwrap_or(-FRAC_PI_2))?;
            write_json(&output, &opt)?;
            println!("{}", serde_json::to_string_pretty(&opt)?);
            Ok(0)
        }
        _ => Ok(report(optimize_dir(&a.dir, a.lambda, a.threads)?)),
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Generate(a) => Ok(report(generate(&a.config())?)),
        Command::Replicate(a) => Ok(report(run_pipeline(&a.config())?)),
        Command::Analyze(a) => Ok(report(analyze_dir(&a.dir, a.threads)?)),
        Command::Optimize(a) => optimize(a),
        Command::Simulate(a) => simulate(a).map(|_| 0),
        Command::Covariance(a) => covariance(a).map(|_| 0),
        Command::McmcCompare(a) => mcmc_compare(a).map(|_| 0),
        Command::Sweep(a) => sweep_cmd(a).map(|_| 0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
