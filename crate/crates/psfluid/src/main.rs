//! Command-line entry point: reproducible scenario runs with CSV and JSON
//! outputs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 model-assumption
//! violation (overload or equal-rate requirements), 3 numerical failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use psfluid::fluid;
use psfluid::integral;
use psfluid::lyapunov::{self, CandidateKind, LyapunovConfig, Probe, Region, RoutedModelParams};
use psfluid::metrics::{self, FreelanceParams};
use psfluid::model::Trajectory;
use psfluid::report::RunReport;
use psfluid::scenario::ScenarioConfig;
use psfluid::sim::{self, SimResult};

#[derive(Parser)]
#[command(
    name = "psfluid",
    version,
    about = "Multistage processor-sharing queue with impatience: fluid analysis, simulation, and job-board analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the invariant fluid state and cross-check its norm
    Invariant(CommonArgs),
    /// Integrate the fluid ODE and export the trajectory
    Fluid(CommonArgs),
    /// Cross-check the ODE solution against the integral description
    VerifyIntegral(CommonArgs),
    /// Run stochastic replicas and compare them with the fluid trajectory
    Simulate(SimulateArgs),
    /// Scan a Lyapunov candidate for sign violations
    Lyapunov(LyapunovArgs),
    /// Closed-form job-board win probabilities
    JobProb(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which simulator to run
    #[arg(long, value_enum, default_value_t = Mode::Ps)]
    mode: Mode,
    /// Override the scenario replica count
    #[arg(long)]
    replicas: Option<usize>,
    /// Override the scenario fluid-scaling parameter
    #[arg(long)]
    scale_r: Option<f64>,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Candidate function to probe
    #[arg(long, value_enum, default_value_t = Candidate::Entropy)]
    candidate: Candidate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ps,
    Freelance,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Candidate {
    Entropy,
    Quadratic,
    TwoClass,
}

impl From<Candidate> for CandidateKind {
    fn from(c: Candidate) -> Self {
        match c {
            Candidate::Entropy => CandidateKind::Entropy,
            Candidate::Quadratic => CandidateKind::Quadratic,
            Candidate::TwoClass => CandidateKind::TwoClass,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Assumption(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Assumption(m) => write!(f, "model assumption violated: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<psfluid::ConfigError> for CliError {
    fn from(e: psfluid::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<fluid::FluidError> for CliError {
    fn from(e: fluid::FluidError) -> Self {
        match e {
            fluid::FluidError::NotOverloaded { .. } => CliError::Assumption(e.to_string()),
            fluid::FluidError::StepTooLarge(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<integral::IntegralError> for CliError {
    fn from(e: integral::IntegralError) -> Self {
        match e {
            integral::IntegralError::Fluid(inner) => inner.into(),
            integral::IntegralError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            integral::IntegralError::ZeroNormInterior { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<sim::SimError> for CliError {
    fn from(e: sim::SimError) -> Self {
        match e {
            sim::SimError::UnequalServiceRates => CliError::Assumption(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<lyapunov::LyapunovError> for CliError {
    fn from(e: lyapunov::LyapunovError) -> Self {
        match e {
            lyapunov::LyapunovError::NoInvariantPoint { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<metrics::MetricsError> for CliError {
    fn from(e: metrics::MetricsError) -> Self {
        match e {
            metrics::MetricsError::NotOverloaded { .. } => CliError::Assumption(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap already formats usage errors; keep exit code 1 for them.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let started = Instant::now();
    let result = match &cli.command {
        Command::Invariant(args) => cmd_invariant(args),
        Command::Fluid(args) => cmd_fluid(args),
        Command::VerifyIntegral(args) => cmd_verify_integral(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Lyapunov(args) => cmd_lyapunov(args),
        Command::JobProb(args) => cmd_job_prob(args),
    };
    match result {
        Ok(mut report) => {
            report.wall_time = started.elapsed().as_secs_f64();
            println!("wall time: {:.3}s", report.wall_time);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn prepare_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn finish_report(
    mut report: RunReport,
    out: &Path,
    summary: serde_json::Value,
    outputs: Vec<String>,
) -> Result<RunReport, CliError> {
    report.summary = summary;
    report.outputs = outputs;
    let path = out.join("report.json");
    report.write_json(&path)?;
    println!("report: {}", path.display());
    Ok(report)
}

fn sup_l1_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states()
        .iter()
        .zip(b.states())
        .map(|(x, y)| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn cmd_invariant(args: &CommonArgs) -> Result<RunReport, CliError> {
    let config = load_config(args)?;
    prepare_out_dir(&args.out)?;
    let point = fluid::invariant_point(&config.params)?;
    let fixed_point = fluid::fixed_point_norm(&config.params)?;
    let rhs_sup = fluid::fluid_rhs(&config.params, &point.z_star)
        .iter()
        .map(|d| d.abs())
        .fold(0.0, f64::max);

    println!("invariant state: {}", point.z_star);
    println!("norm: {}", point.norm);
    println!("norm-equation residual: {:e}", point.residual);
    println!(
        "fixed-point cross-check: {} (gap {:e})",
        fixed_point,
        (fixed_point - point.norm).abs()
    );

    let summary = json!({
        "z_star": point.z_star.as_slice(),
        "invariant_norm": point.norm,
        "f_residual": point.residual,
        "fixed_point_norm": fixed_point,
        "norm_gap": (fixed_point - point.norm).abs(),
        "rhs_sup": rhs_sup,
    });
    finish_report(
        RunReport::new("invariant", &config),
        &args.out,
        summary,
        vec![],
    )
}

fn cmd_fluid(args: &CommonArgs) -> Result<RunReport, CliError> {
    let config = load_config(args)?;
    prepare_out_dir(&args.out)?;
    let solution = fluid::integrate(
        &config.params,
        &config.initial_state,
        config.horizon,
        config.grid_step,
    )?;
    let refined = fluid::integrate(
        &config.params,
        &config.initial_state,
        config.horizon,
        config.grid_step / 2.0,
    )?;
    let richardson: f64 = solution
        .trajectory
        .last_state()
        .as_slice()
        .iter()
        .zip(refined.trajectory.last_state().as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let point = fluid::invariant_point(&config.params)?;
    let gap: f64 = solution
        .trajectory
        .last_state()
        .as_slice()
        .iter()
        .zip(point.z_star.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();

    let path = args.out.join("trajectory.csv");
    let mut buf = Vec::new();
    solution.trajectory.write_csv(&mut buf)?;
    fs::write(&path, buf)?;

    println!("final state: {}", solution.trajectory.last_state());
    println!("L1 distance to invariant state: {gap:e}");
    println!("step-halving shift of z(T): {richardson:e}");

    let summary = json!({
        "final_state": solution.trajectory.last_state().as_slice(),
        "invariant_norm": point.norm,
        "distance_to_invariant": gap,
        "max_clamp": solution.max_clamp,
        "richardson_l1_delta": richardson,
        "grid_points": solution.trajectory.len(),
    });
    finish_report(
        RunReport::new("fluid", &config),
        &args.out,
        summary,
        vec![path.display().to_string()],
    )
}

fn cmd_verify_integral(args: &CommonArgs) -> Result<RunReport, CliError> {
    let config = load_config(args)?;
    prepare_out_dir(&args.out)?;
    let params = &config.params;

    let coarse = fluid::integrate(
        params,
        &config.initial_state,
        config.horizon,
        config.grid_step,
    )?
    .trajectory;
    let fine = fluid::integrate(
        params,
        &config.initial_state,
        config.horizon,
        config.grid_step / 2.0,
    )?
    .trajectory;

    let residual_coarse = integral::representation_residual(params, &coarse)?;
    let residual_fine = integral::representation_residual(params, &fine)?;
    let order = (residual_coarse / residual_fine).log2();

    // Per-point residual table on the coarse grid.
    let path = args.out.join("residuals.csv");
    let mut csv = String::from("t,stage,z_ode,z_integral,abs_err\n");
    for t_idx in 0..coarse.len() {
        for stage in 0..params.stages() {
            let z_ode = coarse.states()[t_idx][stage];
            let z_int = integral::integral_rhs(params, &coarse, stage, t_idx)?;
            let t = coarse.times()[t_idx];
            csv.push_str(&format!(
                "{t},{},{z_ode},{z_int},{}\n",
                stage + 1,
                (z_ode - z_int).abs()
            ));
        }
    }
    fs::write(&path, csv)?;

    let picard = integral::norm_fixed_point_iteration(params, config.horizon, config.grid_step)?;
    let zero_start = fluid::integrate(
        params,
        &psfluid::model::StateVector::zeros(params.stages()),
        config.horizon,
        config.grid_step,
    )?
    .trajectory;
    let mut picard_gap: f64 = 0.0;
    for (a, b) in picard.trajectory.states().iter().zip(zero_start.states()) {
        picard_gap = picard_gap.max((a.l1_norm() - b.l1_norm()).abs());
    }
    let invariant = fluid::invariant_norm(params)?;
    let picard_tail = picard.trajectory.last_state().l1_norm();

    println!("representation residual: {residual_coarse:e} (h), {residual_fine:e} (h/2)");
    println!("measured convergence order: {order:.3}");
    println!(
        "norm iteration: {} iterations, sup gap to ODE norm {picard_gap:e}",
        picard.iterations
    );

    let summary = json!({
        "residual_h": residual_coarse,
        "residual_h_half": residual_fine,
        "measured_order": order,
        "picard_iterations": picard.iterations,
        "picard_sup_gap_to_ode_norm": picard_gap,
        "picard_tail_norm": picard_tail,
        "invariant_norm": invariant,
        "picard_tail_gap": (picard_tail - invariant).abs(),
    });
    finish_report(
        RunReport::new("verify-integral", &config),
        &args.out,
        summary,
        vec![path.display().to_string()],
    )
}

fn cmd_simulate(args: &SimulateArgs) -> Result<RunReport, CliError> {
    let mut config = load_config(&args.common)?;
    if let Some(replicas) = args.replicas {
        config.replicas = replicas;
    }
    if let Some(scale_r) = args.scale_r {
        config.scale_r = scale_r;
    }
    if config.replicas == 0 {
        return Err(CliError::Config("replicas must be at least 1".into()));
    }
    if !(config.scale_r > 0.0 && config.scale_r.is_finite()) {
        return Err(CliError::Config("scale_r must be positive".into()));
    }
    if args.mode == Mode::Freelance && config.scale_r != 1.0 {
        return Err(CliError::Config(
            "fluid scaling applies to the ps mode only; use scale_r = 1 with freelance".into(),
        ));
    }
    prepare_out_dir(&args.common.out)?;
    let out = &args.common.out;
    let r = config.scale_r;

    // One seeded replica per index; results keep the index order.
    enum ReplicaOutput {
        Scaled(Trajectory),
        Full(Box<SimResult>),
    }
    let replicas: Vec<ReplicaOutput> = (0..config.replicas)
        .into_par_iter()
        .map(|k| {
            let mut replica_config = config.clone();
            replica_config.seed = sim::replica_seed(config.seed, k as u64);
            match args.mode {
                Mode::Ps => {
                    if r == 1.0 {
                        sim::simulate_ps(&replica_config).map(|res| ReplicaOutput::Full(Box::new(res)))
                    } else {
                        sim::scaled_run(&replica_config, r).map(ReplicaOutput::Scaled)
                    }
                }
                Mode::Freelance => {
                    sim::simulate_freelance(&replica_config).map(|res| ReplicaOutput::Full(Box::new(res)))
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let mut outputs = Vec::new();
    let mut trajectories = Vec::with_capacity(replicas.len());
    let mut all_jobs = Vec::new();
    let mut max_flow_imbalance: f64 = 0.0;
    for (k, replica) in replicas.iter().enumerate() {
        let trajectory = match replica {
            ReplicaOutput::Scaled(t) => t,
            ReplicaOutput::Full(res) => {
                max_flow_imbalance = max_flow_imbalance.max(
                    res.flow_imbalance()
                        .iter()
                        .map(|g| g.abs())
                        .fold(0.0, f64::max),
                );
                if !res.jobs.is_empty() {
                    let path = out.join(format!("jobs_rep{k:03}.csv"));
                    let mut csv = String::from("arrival_time,applications,exit_cause\n");
                    for job in &res.jobs {
                        csv.push_str(&format!(
                            "{},{},{}\n",
                            job.arrival_time,
                            job.applications,
                            job.exit_cause.as_str()
                        ));
                    }
                    fs::write(&path, csv)?;
                    outputs.push(path.display().to_string());
                    all_jobs.extend(res.jobs.iter().cloned());
                }
                &res.trajectory
            }
        };
        let path = out.join(format!("trajectory_rep{k:03}.csv"));
        let mut buf = Vec::new();
        trajectory.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        outputs.push(path.display().to_string());
        trajectories.push(trajectory);
    }

    // Fluid comparison when the scenario is overloaded.
    let fluid_comparison = match fluid::integrate(
        &config.params,
        &config.initial_state,
        config.horizon,
        config.grid_step,
    ) {
        Ok(solution) => {
            let sups: Vec<f64> = trajectories
                .iter()
                .map(|t| sup_l1_distance(t, &solution.trajectory))
                .collect();
            let mean = sups.iter().sum::<f64>() / sups.len() as f64;
            println!("replica-mean sup distance to fluid trajectory: {mean}");
            json!({ "per_replica_sup_distance": sups, "mean_sup_distance": mean })
        }
        Err(fluid::FluidError::NotOverloaded { .. }) => {
            println!("scenario not overloaded; skipping fluid comparison");
            serde_json::Value::Null
        }
        Err(e) => return Err(e.into()),
    };

    let job_summary = if args.mode == Mode::Freelance {
        let pooled = SimResult {
            jobs: all_jobs,
            ..match &replicas[0] {
                ReplicaOutput::Full(res) => (**res).clone(),
                ReplicaOutput::Scaled(_) => unreachable!("freelance replicas are full results"),
            }
        };
        let stats = sim::job_outcome_stats(&pooled, config.params.stages())
            .expect("pooled freelance result keeps its mode");
        let closed_form = FreelanceParams::new(
            config.params.lambda(),
            config.params.mu()[0],
            config.params.nu(),
            config.params.stages(),
        )
        .ok()
        .and_then(|fp| metrics::p_limit(&fp).ok());
        println!(
            "completed jobs: {}, per-job win estimate: {}",
            stats.total_jobs, stats.per_job_estimate
        );
        json!({
            "total_jobs": stats.total_jobs,
            "exit_fractions": stats.exit_fractions,
            "per_job_estimate": stats.per_job_estimate,
            "per_job_se": stats.per_job_se,
            "per_freelancer_estimate": stats.per_freelancer_estimate,
            "closed_form_p_limit": closed_form,
        })
    } else {
        serde_json::Value::Null
    };

    let summary = json!({
        "mode": match args.mode { Mode::Ps => "ps", Mode::Freelance => "freelance" },
        "replicas": config.replicas,
        "scale_r": r,
        "fluid_comparison": fluid_comparison,
        "max_flow_imbalance": max_flow_imbalance,
        "jobs": job_summary,
    });
    finish_report(RunReport::new("simulate", &config), out, summary, outputs)
}

fn cmd_lyapunov(args: &LyapunovArgs) -> Result<RunReport, CliError> {
    let config = load_config(&args.common)?;
    prepare_out_dir(&args.common.out)?;
    let options = &config.lyapunov;

    let routed = if options.lambda_vec.is_some()
        || options.nu_vec.is_some()
        || options.routing.is_some()
    {
        let classes = config.params.stages();
        let tandem = RoutedModelParams::tandem(&config.params);
        RoutedModelParams::new(
            options
                .lambda_vec
                .clone()
                .unwrap_or_else(|| tandem.lambda().to_vec()),
            config.params.mu().to_vec(),
            options
                .nu_vec
                .clone()
                .unwrap_or_else(|| vec![config.params.nu(); classes]),
            options
                .routing
                .clone()
                .unwrap_or_else(|| tandem.routing().to_vec()),
        )?
    } else {
        RoutedModelParams::tandem(&config.params)
    };

    let lyap_config = LyapunovConfig { q: options.q };
    let probe = Probe::new(CandidateKind::from(args.candidate), &routed, &lyap_config)?;
    let z_star = probe.z_star().clone();

    let dim = routed.classes();
    let region = match (&options.region_lo, &options.region_hi) {
        (Some(lo), Some(hi)) => Region::new(lo.clone(), hi.clone())?,
        (None, None) => Region::cube(5.0 * z_star.l1_norm(), dim)?,
        _ => {
            return Err(CliError::Config(
                "region_lo and region_hi must be given together".into(),
            ))
        }
    };
    let samples = options.samples.unwrap_or(10_000);
    let report_data = lyapunov::sign_scan(&probe, &region, samples, config.seed)?;

    let path = args.common.out.join("scan.csv");
    let mut buf = Vec::new();
    report_data.write_csv(&mut buf, dim)?;
    fs::write(&path, buf)?;

    println!(
        "candidate {}: {} samples, max derivative {:?}, violations {}",
        probe.kind().as_str(),
        samples,
        report_data.max_derivative,
        report_data.violations
    );

    let summary = json!({
        "candidate": probe.kind().as_str(),
        "classes": dim,
        "z_star": z_star.as_slice(),
        "region_lo": region.lo(),
        "region_hi": region.hi(),
        "samples": samples,
        "max_derivative": report_data.max_derivative,
        "violations": report_data.violations,
    });
    finish_report(
        RunReport::new("lyapunov", &config),
        &args.common.out,
        summary,
        vec![path.display().to_string()],
    )
}

fn cmd_job_prob(args: &CommonArgs) -> Result<RunReport, CliError> {
    let config = load_config(args)?;
    prepare_out_dir(&args.out)?;
    if !config.params.has_equal_rates() {
        return Err(CliError::Assumption(
            "job-board analytics require equal service rates".into(),
        ));
    }
    let params = FreelanceParams::new(
        config.params.lambda(),
        config.params.mu()[0],
        config.params.nu(),
        config.params.stages(),
    )?;
    let u = metrics::solve_u(&params)?;
    let p_limit = metrics::p_limit(&params)?;
    let p_inf = metrics::p_infinity(&params);
    let limit = params.limit();

    // Exit fractions in the invariant regime: impatience exits with
    // i = 0..I-1 applications, then the full-application share u^I.
    let mut exit_fractions: Vec<f64> = (0..limit).map(|i| u.powi(i as i32) * (1.0 - u)).collect();
    exit_fractions.push(u.powi(limit as i32));

    println!("u: {u}");
    println!("P_{limit}: {p_limit}");
    println!("P_infinity: {p_inf}");

    let summary = json!({
        "u": u,
        "limit": limit,
        "p_limit": p_limit,
        "p_infinity": p_inf,
        "exit_fractions": exit_fractions,
    });
    finish_report(RunReport::new("job-prob", &config), &args.out, summary, vec![])
}
