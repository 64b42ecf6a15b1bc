//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a requested check found a violation or a
//! computation failed at runtime, 2 on configuration errors (bad flags, bad
//! config file, unusable output directory), 3 when the ensemble runner
//! aborted because too many work items failed.

use clap::{Args, Parser, Subcommand};
use spinbath_core::collision::{
    evolve_series, evolve_trajectories, find_n_epsilon, rk4_reference, total_hamiltonian,
    verify_convex_split, CollisionProcess,
};
use spinbath_core::ensemble::{kind_label, run_and_emit, ExperimentConfig};
use spinbath_core::linalg::{kron, trace_distance};
use spinbath_core::optimality::{
    check_esc, check_esc_exact, degenerate_gap_counterexample, sample_energy_preserving_channel,
    EscReport,
};
use spinbath_core::random::random_density;
use spinbath_core::rng::{derive_seed, SplitMix64};
use spinbath_core::{tol, DensityMatrix, Error, HermitianOperator};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spinbath",
    version,
    about = "Thermalization resources of collision-model baths: divergence curves, \
             bath-size bounds, optimality checks, and disorder ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the disordered-chain ensemble study and write CSV/JSON plot data
    Ensemble(EnsembleArgs),
    /// Check the square-root bath-size bound on one state pair
    ConvexSplit(ConvexSplitArgs),
    /// Scan bath sizes for the smallest epsilon-thermalizing bath
    NEpsilon(NEpsilonArgs),
    /// Check the energy subspace condition of an energy list
    Esc(EscArgs),
    /// Evaluate the equal-gap counterexample identity
    Counterexample(CounterexampleArgs),
    /// Cross-validate the series solution against RK4 and trajectories
    DynamicsCheck(DynamicsArgs),
}

#[derive(Args)]
struct EnsembleArgs {
    /// Config file (flat `key = value`); desk-scale defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the largest supported preset instead of the desk default
    #[arg(long, conflicts_with = "config")]
    full: bool,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker-thread count (0 = one per core)
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective config in the file format and exit
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ConvexSplitArgs {
    /// Subsystem dimension of the pair
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Check every bath size 1..=n-max
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    /// Seed for a random (rho, sigma) pair
    #[arg(long, conflicts_with = "canonical")]
    seed: Option<u64>,
    /// Use rho = |0><0|, sigma = I/d instead of a random pair
    #[arg(long)]
    canonical: bool,
}

#[derive(Args)]
struct NEpsilonArgs {
    /// Distance at which the bath counts as thermalizing
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Largest bath size to scan
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    /// Seed for a random diagonal qubit pair
    #[arg(long, conflicts_with = "canonical")]
    seed: Option<u64>,
    /// Use the canonical pair rho = |0><0|, sigma = I/2
    #[arg(long)]
    canonical: bool,
}

#[derive(Args)]
struct EscArgs {
    /// Energy levels, e.g. "0,0.3,0.9,1.2"
    #[arg(long, required_unless_present = "exact", conflicts_with = "exact")]
    energies: Option<String>,
    /// Rational energy levels for provable verdicts, e.g. "0/1,3/10,9/10,6/5"
    #[arg(long)]
    exact: Option<String>,
    /// Check compositions of every n up to this
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    /// Total-energy collision tolerance (float mode only)
    #[arg(long, default_value_t = tol::ESC_ENERGY)]
    tol: f64,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Inverse temperature of the swapped-in thermal pair
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Four ascending levels with equal outer gaps E1-E0 = E3-E2
    #[arg(long, default_value = "0,0.3,0.9,1.2")]
    energies: String,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Number of colliding qubits
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    /// Seed for the random energy-conserving process and initial state
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Evolution time
    #[arg(long, default_value_t = 3.0)]
    t: f64,
    /// Monte Carlo sample count (0 skips the trajectory comparison)
    #[arg(long, default_value_t = 100_000)]
    trajectories: usize,
    /// Allowed series-vs-trajectory trace distance
    #[arg(long, default_value_t = 5e-3)]
    mc_tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ensemble(args) => cmd_ensemble(args),
        Command::ConvexSplit(args) => cmd_convex_split(args),
        Command::NEpsilon(args) => cmd_n_epsilon(args),
        Command::Esc(args) => cmd_esc(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::DynamicsCheck(args) => cmd_dynamics(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Map error classes onto the documented exit codes.
fn classify(err: &Error) -> u8 {
    match err {
        Error::FailureThreshold { .. } => 3,
        Error::Config(_)
        | Error::Io { .. }
        | Error::BadEpsilon { .. }
        | Error::BadChainLength { .. }
        | Error::BadRegion { .. }
        | Error::BadDisorderStrength { .. } => 2,
        _ => 1,
    }
}

const PASS: ExitCode = ExitCode::SUCCESS;

fn cmd_ensemble(args: EnsembleArgs) -> Result<ExitCode, Error> {
    let mut cfg = match (&args.config, args.full) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, true) => ExperimentConfig::full_preset(),
        (None, false) => ExperimentConfig::desk_default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    if args.print_config {
        print!("{}", cfg.to_file_string());
        return Ok(PASS);
    }
    cfg.validate()?;
    println!(
        "ensemble: L = {}, {} deltas x {} realizations, targets = {}",
        cfg.sites,
        cfg.deltas.len(),
        cfg.realizations,
        cfg.targets
            .iter()
            .map(|k| kind_label(*k))
            .collect::<Vec<_>>()
            .join("+"),
    );
    let (result, files) = run_and_emit(&cfg)?;
    for row in &result.slopes {
        println!(
            "delta {:>6}: slope {:.6} +- {:.6} bits per site [{}]",
            row.delta,
            row.slope,
            row.slope_stderr,
            kind_label(row.kind)
        );
    }
    for (kind, est) in &result.transitions {
        match est {
            Some(t) => println!(
                "transition [{}]: delta* = {} (region {} .. {})",
                kind_label(*kind),
                t.delta_star,
                t.region.0,
                t.region.1
            ),
            None => println!(
                "transition [{}]: not estimated (needs >= 4 fitted deltas)",
                kind_label(*kind)
            ),
        }
    }
    println!("failures recorded: {}", result.failures.len());
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(PASS)
}

fn cmd_convex_split(args: ConvexSplitArgs) -> Result<ExitCode, Error> {
    if args.dim < 2 || args.n_max == 0 {
        return Err(Error::Config(
            "convex-split needs dim >= 2 and n-max >= 1".into(),
        ));
    }
    let (rho, sigma, label) = match args.seed {
        Some(seed) => {
            let mut rng = SplitMix64::new(seed);
            let rho = random_density(args.dim, &mut rng);
            let sigma = random_density(args.dim, &mut rng);
            (rho, sigma, format!("random pair (seed {seed})"))
        }
        None => {
            let mut probs = vec![0.0; args.dim];
            probs[0] = 1.0;
            let rho = DensityMatrix::from_probabilities(&probs)?;
            let sigma = DensityMatrix::maximally_mixed(args.dim);
            (rho, sigma, "canonical pair |0><0| vs I/d".to_string())
        }
    };
    println!("convex split on {label}, d = {}", args.dim);
    let mut all_hold = true;
    for n in 1..=args.n_max {
        let check = verify_convex_split(&rho, &sigma, n)?;
        all_hold &= check.holds;
        println!(
            "n = {:>3}: distance {:.6e} <= bound {:.6e} (dmax {:.6} bits) {}",
            n,
            check.measured,
            check.bound,
            check.dmax,
            if check.holds { "ok" } else { "VIOLATED" }
        );
    }
    if all_hold {
        println!("square-root bound holds for every n");
        Ok(PASS)
    } else {
        println!("square-root bound violated");
        Ok(ExitCode::from(1))
    }
}

fn cmd_n_epsilon(args: NEpsilonArgs) -> Result<ExitCode, Error> {
    let h = HermitianOperator::from_diagonal(&[0.0, 1.0]);
    let (omega, tau, label) = match args.seed {
        Some(seed) => {
            let mut rng = SplitMix64::new(seed);
            let p0 = 0.1 + 0.8 * rng.next_f64();
            let q0 = 0.2 + 0.6 * rng.next_f64();
            (
                DensityMatrix::from_probabilities(&[p0, 1.0 - p0])?,
                DensityMatrix::from_probabilities(&[q0, 1.0 - q0])?,
                format!("random diagonal qubit pair (seed {seed})"),
            )
        }
        None => (
            DensityMatrix::from_probabilities(&[1.0, 0.0])?,
            DensityMatrix::maximally_mixed(2),
            "canonical pair |0><0| vs I/2".to_string(),
        ),
    };
    println!(
        "bath-size scan on {label}, epsilon = {}, n <= {}",
        args.epsilon, args.n_max
    );
    let cert = find_n_epsilon(&omega, &tau, &h, args.epsilon, args.n_max)?;
    for point in &cert.points {
        match point.global {
            Some(g) => println!(
                "n = {:>4}: reduced {:.6e}  global {:.6e}",
                point.n, point.reduced, g
            ),
            None => println!("n = {:>4}: reduced {:.6e}  global (skipped)", point.n, point.reduced),
        }
    }
    println!("dmax = {:.6} bits", cert.dmax);
    match cert.n_epsilon {
        Some(n) => println!("smallest bath (per-copy reading): n = {n}"),
        None => println!("per-copy reading did not cross epsilon within the scan"),
    }
    match cert.n_epsilon_global {
        Some(n) => println!("smallest bath (product-space reading): n = {n}"),
        None => println!("product-space reading did not cross epsilon within the scan"),
    }
    match cert.theorem_upper_count {
        Some(n) => println!("guaranteed ceiling 2^dmax/eps^2 = {n}"),
        None => println!("guaranteed ceiling 2^dmax/eps^2 = {:.3e}", cert.theorem_upper),
    }
    match cert.corollary_lower {
        Some(lo) => println!("guaranteed floor 2^(smoothed dmax) = {lo:.6}"),
        None => println!("guaranteed floor unavailable (smoothing inapplicable)"),
    }
    println!(
        "spectrum condition verified: {}{}",
        cert.esc_verified,
        if cert.upper_bound_only {
            " (scan is an upper bound only)"
        } else {
            ""
        }
    );
    if cert.exhausted {
        println!("scan exhausted n-max before both readings crossed epsilon");
    }
    Ok(PASS)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse energy {v:?}")))
        })
        .collect()
}

fn parse_rational_list(s: &str) -> Result<Vec<(i64, i64)>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            let (num, den) = v
                .split_once('/')
                .ok_or_else(|| Error::Config(format!("expected num/den, got {v:?}")))?;
            let num = num
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("bad numerator in {v:?}")))?;
            let den = den
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("bad denominator in {v:?}")))?;
            Ok((num, den))
        })
        .collect()
}

fn print_esc_report(report: &EscReport) {
    for (i, ok) in report.verdicts.iter().enumerate() {
        let n = i + 1;
        if *ok {
            println!("n = {n}: no collision");
        } else {
            println!("n = {n}: COLLISION");
        }
    }
    for c in &report.collisions {
        println!(
            "  n = {}: {:?} and {:?} both total {:.12}",
            c.n, c.lhs, c.rhs, c.energy
        );
    }
    if !report.complete {
        println!(
            "enumeration stopped at n = {} (pair budget); verdicts above n = {} unchecked",
            report.checked_through, report.checked_through
        );
    }
    println!(
        "energy subspace condition {} through n = {}",
        if report.satisfied() { "holds" } else { "fails" },
        report.checked_through
    );
}

fn cmd_esc(args: EscArgs) -> Result<ExitCode, Error> {
    let report = match &args.exact {
        Some(spec) => {
            let energies = parse_rational_list(spec)?;
            println!("exact rational mode: {spec}");
            check_esc_exact(&energies, args.n_max)?
        }
        None => {
            let energies = parse_f64_list(args.energies.as_deref().unwrap())?;
            check_esc(&energies, args.n_max, args.tol)?
        }
    };
    print_esc_report(&report);
    Ok(PASS)
}

fn cmd_counterexample(args: CounterexampleArgs) -> Result<ExitCode, Error> {
    let levels = parse_f64_list(&args.energies)?;
    let energies: [f64; 4] = levels
        .try_into()
        .map_err(|_| Error::Config("counterexample needs exactly 4 energies".into()))?;
    let report = degenerate_gap_counterexample(&energies, args.beta)?;
    println!(
        "levels {:?}, beta = {}, thermal populations {:?}",
        report.energies, report.beta, report.populations
    );
    println!("uniform-swap output distance: {:.12}", report.channel_distance);
    println!("modified state distance:      {:.12}", report.modified_distance);
    println!(
        "improvement {:.12} (predicted {:.12}, residual {:.3e})",
        report.modified_distance - report.channel_distance,
        report.predicted_gap,
        report.identity_residual
    );
    println!("subspace weights preserved to {:.3e}", report.weight_residual);
    println!(
        "strict improvement below the channel optimum: {}",
        report.strict
    );
    Ok(PASS)
}

fn cmd_dynamics(args: DynamicsArgs) -> Result<ExitCode, Error> {
    if !(2..=3).contains(&args.qubits) {
        return Err(Error::Config("dynamics check supports 2 or 3 qubits".into()));
    }
    let h_site = HermitianOperator::from_diagonal(&[0.0, 1.0]);
    let h_total = total_hamiltonian(&h_site, args.qubits)?;
    let mut rng = SplitMix64::new(args.seed);
    let channel = sample_energy_preserving_channel(&h_total, &mut rng)?;
    let unitaries: Vec<_> = channel.pairs().iter().map(|(_, u)| u.clone()).collect();
    let rates: Vec<f64> = channel.pairs().iter().map(|(w, _)| 2.0 * w).collect();
    let process = CollisionProcess::new(h_site, args.qubits, unitaries, rates)?;

    let mut rho0_matrix = random_density(2, &mut rng).into_matrix();
    for _ in 1..args.qubits {
        rho0_matrix = kron(&rho0_matrix, random_density(2, &mut rng).matrix());
    }
    let rho0 = DensityMatrix::new(rho0_matrix)?;

    println!(
        "{} qubits, {} energy-conserving unitaries, t = {}, seed {}",
        args.qubits,
        process.unitaries().len(),
        args.t,
        args.seed
    );
    let series = evolve_series(&process, &rho0, args.t, None)?;
    println!(
        "series: truncation order {}, retained mass {:.12}",
        series.truncation, series.retained_mass
    );
    let rk4 = rk4_reference(&process, &rho0, args.t)?;
    let d_rk4 = trace_distance(series.state.matrix(), rk4.matrix())?;
    let rk4_ok = d_rk4 <= 1e-6;
    println!(
        "series vs RK4:          {:.3e} (tol 1e-6) {}",
        d_rk4,
        if rk4_ok { "ok" } else { "MISMATCH" }
    );
    let mut mc_ok = true;
    if args.trajectories > 0 {
        let mc = evolve_trajectories(
            &process,
            &rho0,
            args.t,
            args.trajectories,
            derive_seed(args.seed, 0, 3),
        )?;
        let d_mc = trace_distance(series.state.matrix(), mc.matrix())?;
        mc_ok = d_mc <= args.mc_tol;
        println!(
            "series vs {} trajectories: {:.3e} (tol {:.1e}) {}",
            args.trajectories,
            d_mc,
            args.mc_tol,
            if mc_ok { "ok" } else { "MISMATCH" }
        );
    } else {
        println!("trajectory comparison skipped");
    }
    if rk4_ok && mc_ok {
        Ok(PASS)
    } else {
        Ok(ExitCode::from(1))
    }
}
