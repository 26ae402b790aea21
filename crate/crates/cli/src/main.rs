//! Command-line frontend: instance generation, bound tabulation,
//! verification suites, and improvement runs with machine-readable
//! reports.
//!
//! Exit codes: 0 success, 2 usage or schema error, 3 generation failure,
//! 4 violated mathematical check.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use confmdp::bounds::{Comparison, SeminormMode};
use confmdp::generators::{random_instance, random_pair, GeneratorSpec, MetricKind};
use confmdp::improvement::{spci_run, SpciOptions};
use confmdp::metric::smooth_to_lipschitz;

use confmdp_cli::instance::InstanceFile;
use confmdp_cli::report::{
    BoundRow, BoundsReport, IdentityRow, ImproveReport, LemmaRow, ProfileRow, SupComparisonRow,
    SLACK_TOLERANCE, TOOLKIT_VERSION,
};
use confmdp_cli::verify::{run as run_verify, VerifyConfig};
use confmdp_cli::CliError;

#[derive(Parser)]
#[command(
    name = "confmdp",
    version,
    about = "Exact verification toolkit for configurable MDPs on finite metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Discrete,
    Line,
    RandomEmbedded,
}

impl From<MetricArg> for MetricKind {
    fn from(value: MetricArg) -> Self {
        match value {
            MetricArg::Discrete => MetricKind::Discrete,
            MetricArg::Line => MetricKind::Line,
            MetricArg::RandomEmbedded => MetricKind::RandomEmbedded,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Theoretical,
}

impl From<ModeArg> for SeminormMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Exact => SeminormMode::Exact,
            ModeArg::Theoretical => SeminormMode::Theoretical,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file with a candidate pair.
    Gen {
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        smoothing: f64,
        #[arg(long, value_enum, default_value_t = MetricArg::Line)]
        metric: MetricArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to this path instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every bound, the performance-difference identity, and the
    /// supporting lemmas on an instance file.
    Bounds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        /// Also write the flat table as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Seed for the random 1-Lipschitz witness functions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full property suite on generated instances.
    Verify {
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated instance sizes, e.g. 4x2,6x3.
        #[arg(long, default_value = "3x2,4x2,5x3,6x2")]
        sizes: String,
    },
    /// Run the safe policy-configuration improvement loop on an instance.
    Improve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long = "min-bound", default_value_t = 1e-12)]
        min_bound: f64,
        /// Write the trace report to this path instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_instance(path: &PathBuf) -> Result<(InstanceFile, confmdp_cli::instance::LoadedInstance), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::schema(format!("cannot read {}: {e}", path.display())))?;
    let file = InstanceFile::from_json(&text)?;
    let loaded = file.validate()?;
    Ok((file, loaded))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::schema(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_gen(
    states: usize,
    actions: usize,
    gamma: f64,
    smoothing: f64,
    metric: MetricArg,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(CliError::Usage(format!(
            "--gamma must lie in [0, 1), got {gamma}"
        )));
    }
    if !(0.0..=1.0).contains(&smoothing) {
        return Err(CliError::Usage(format!(
            "--smoothing must lie in [0, 1], got {smoothing}"
        )));
    }
    if states == 0 || actions == 0 {
        return Err(CliError::Usage(
            "--states and --actions must be positive".into(),
        ));
    }
    let spec = GeneratorSpec {
        n_states: states,
        n_actions: actions,
        gamma,
        smoothing,
        metric_kind: metric.into(),
        seed,
    };
    let (c, pi, p, mu) = random_instance(&spec).map_err(CliError::from_core_math)?;
    let (pi_new, p_new) = random_pair(&c, smoothing, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))
        .map_err(CliError::from_core_math)?;
    let file = InstanceFile::from_parts(&c, &pi, &p, &mu, Some((&pi_new, &p_new)));
    write_output(&out, &file.to_json())
}

fn cmd_bounds(
    input: PathBuf,
    mode: ModeArg,
    csv: Option<PathBuf>,
    seed: u64,
) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let (_, loaded) = read_instance(&input)?;
    let Some((pi_new, p_new)) = loaded.candidate.as_ref() else {
        return Err(CliError::schema(
            "instance file carries no candidate pair (policy_new / configuration_new)".into(),
        ));
    };
    let mode: SeminormMode = mode.into();
    let cmp = Comparison::new(
        &loaded.mdp,
        &loaded.policy,
        &loaded.configuration,
        pi_new,
        p_new,
        &loaded.initial,
    )
    .map_err(CliError::from_core_math)?;

    let bounds = vec![
        BoundRow::new(cmp.distribution_bound_coupled().map_err(CliError::from_core_math)?),
        BoundRow::new(cmp.distribution_bound_decoupled().map_err(CliError::from_core_math)?),
        BoundRow::new(cmp.pi_bound_coupled(mode)),
        BoundRow::new(cmp.pi_bound_decoupled(mode)),
    ];

    // identity computed from the evaluator pieces so the row exists even
    // when violated (the violation then drives the exit code)
    let lhs = cmp.expected_return_new() - cmp.expected_return_current();
    let rhs: f64 = (0..loaded.mdp.n_states())
        .map(|s| cmp.discounted_new().mass.mass(s) * cmp.relative().coupled_rel[s])
        .sum::<f64>()
        / (1.0 - loaded.mdp.gamma());
    let residual = (lhs - rhs).abs();
    let identity = IdentityRow {
        name: "performance_difference".into(),
        lhs,
        rhs,
        residual,
        pass: residual <= SLACK_TOLERANCE * (1.0 + lhs.abs().max(rhs.abs())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut smoothing_lhs = 0.0f64;
    let mut smoothing_rhs = f64::INFINITY;
    for _ in 0..3 {
        use rand::Rng;
        let scale = loaded.mdp.states().diameter().max(1.0);
        let raw: Vec<f64> = (0..loaded.mdp.n_states())
            .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let witness = smooth_to_lipschitz(loaded.mdp.states(), &raw);
        let (lhs, rhs) = cmp.verify_kernel_smoothing(witness.view());
        smoothing_lhs = smoothing_lhs.max(lhs);
        smoothing_rhs = smoothing_rhs.min(rhs);
    }
    let (decomp_lhs, decomp_rhs) = cmp.verify_advantage_decomposition();
    let (norm_lhs, norm_rhs) = cmp.verify_advantage_seminorm();
    let lemmas = vec![
        LemmaRow::new("kernel_smoothing", smoothing_lhs, smoothing_rhs),
        LemmaRow::new("advantage_decomposition", decomp_lhs, decomp_rhs),
        LemmaRow::new("coupled_advantage_seminorm", norm_lhs, norm_rhs),
    ];

    let (average, supremum) = cmp.sup_comparison();
    let report = BoundsReport {
        toolkit_version: TOOLKIT_VERSION.to_owned(),
        instance_digest: loaded.digest.clone(),
        mode: mode.label().to_owned(),
        seed,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        current_pair: ProfileRow::from(cmp.current_profile()),
        bounds,
        identity,
        lemmas,
        sup_comparison: SupComparisonRow {
            average,
            supremum,
            ratio: (supremum > 0.0).then(|| average / supremum),
        },
    };

    if let Some(path) = &csv {
        fs::write(path, report.to_csv())
            .map_err(|e| CliError::schema(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
    );
    if let Some(name) = report.failing_row() {
        return Err(CliError::Math(format!(
            "bound or identity check failed: {name}"
        )));
    }
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let mut sizes = Vec::new();
    for part in text.split(',') {
        let Some((s, a)) = part.trim().split_once(['x', 'X']) else {
            return Err(CliError::Usage(format!(
                "--sizes entries look like 4x2, got '{part}'"
            )));
        };
        let states: usize = s
            .parse()
            .map_err(|_| CliError::Usage(format!("bad state count in '{part}'")))?;
        let actions: usize = a
            .parse()
            .map_err(|_| CliError::Usage(format!("bad action count in '{part}'")))?;
        if states == 0 || actions == 0 {
            return Err(CliError::Usage(format!("sizes must be positive in '{part}'")));
        }
        sizes.push((states, actions));
    }
    Ok(sizes)
}

fn cmd_verify(trials: usize, seed: u64, sizes: String) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let config = VerifyConfig {
        trials,
        seed,
        sizes: parse_sizes(&sizes)?,
    };
    let report = run_verify(&config)?;
    eprint!("{}", report.human_table());
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
    );
    if let Some(failure) = report.first_failure() {
        return Err(CliError::Math(format!(
            "property {} failed (worst seed {}, min slack {:.3e})",
            failure.name, failure.worst_seed, failure.min_slack
        )));
    }
    Ok(())
}

fn cmd_improve(
    input: PathBuf,
    iters: usize,
    grid: usize,
    min_bound: f64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    if iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    if grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    if min_bound.is_nan() || min_bound < 0.0 {
        return Err(CliError::Usage("--min-bound must be nonnegative".into()));
    }
    let start = std::time::Instant::now();
    let (_, loaded) = read_instance(&input)?;
    let options = SpciOptions {
        max_iters: iters,
        grid,
        min_bound,
        exact_mixture_constants: true,
    };
    let trace = spci_run(
        &loaded.mdp,
        &loaded.policy,
        &loaded.configuration,
        &loaded.initial,
        &options,
    )
    .map_err(CliError::from_core_math)?;

    // accepted steps must realize their certificates
    for step in &trace.steps {
        if step.realized_improvement < step.predicted_bound - SLACK_TOLERANCE {
            return Err(CliError::Math(format!(
                "accepted step at alpha {} beta {} realized {} below certified {}",
                step.alpha, step.beta, step.realized_improvement, step.predicted_bound
            )));
        }
        if step.j_after < step.j_before {
            return Err(CliError::Math(
                "expected return decreased along the trace".into(),
            ));
        }
    }

    let report = ImproveReport {
        toolkit_version: TOOLKIT_VERSION.to_owned(),
        instance_digest: loaded.digest.clone(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        initial_j: trace.initial_j,
        final_j: trace.final_j,
        optimality_gap: trace.optimality_gap,
        terminated_reason: trace.terminated_reason,
        steps: trace.steps,
    };
    eprintln!(
        "initial J {:.6}, final J {:.6}, {} accepted steps, stop: {:?}, residual gap <= {:.6}",
        report.initial_j,
        report.final_j,
        report.steps.len(),
        report.terminated_reason,
        report.optimality_gap
    );
    write_output(
        &out,
        &serde_json::to_string_pretty(&report).expect("report serialization cannot fail"),
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            states,
            actions,
            gamma,
            smoothing,
            metric,
            seed,
            out,
        } => cmd_gen(states, actions, gamma, smoothing, metric, seed, out),
        Command::Bounds {
            input,
            mode,
            csv,
            seed,
        } => cmd_bounds(input, mode, csv, seed),
        Command::Verify {
            trials,
            seed,
            sizes,
        } => cmd_verify(trials, seed, sizes),
        Command::Improve {
            input,
            iters,
            grid,
            min_bound,
            out,
        } => cmd_improve(input, iters, grid, min_bound, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
