//! `pc0`: measure the zero-temperature critical disorder strength of the 2D
//! random-bond Ising model and 3D random-plaquette gauge model.
//!
//! Subcommands: `sweep` (failure-probability grids), `fit` (finite-size
//! scaling), `trial` (single decoded sample, optionally dumped as JSON),
//! `oracle-check` (matcher vs brute force), `nishimori` (coupling for a
//! disorder strength). Exit codes: 0 success, 1 runtime failure, 2 usage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use pc0_core::decoder::{run_trial, run_trial_record, TrialOptions};
use pc0_core::disorder::{nishimori_coupling, Model, Prob, RngPolicy};
use pc0_core::error::Error;
use pc0_core::fixtures;
use pc0_core::matcher::{brute_force_matching, min_weight_perfect_matching};
use pc0_core::montecarlo::{
    read_points_csv, run_sweep, DirectorySink, Manifest, PGrid, PfailPoint, SweepPlan,
};
use pc0_core::scaling::{
    add_bootstrap_errors, crossing_estimate, fit_corrected, fit_quadratic, slope_exponent,
    synthetic_points, Ansatz, AnsatzParams, CrossingEstimate, Parity, ScalingFit, SlopeExponent,
};

const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "pc0",
    about = "Zero-temperature threshold estimation for the 2D RBIM and 3D RPGM",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a failure-probability sweep over a (sizes x p) grid
    Sweep(SweepArgs),
    /// Fit the finite-size-scaling ansatz to a sweep CSV
    Fit(FitArgs),
    /// Decode a single sample and report the outcome
    Trial(TrialArgs),
    /// Cross-check the matcher against the brute-force oracle
    OracleCheck(OracleArgs),
    /// Print the Nishimori coupling for a disorder strength
    Nishimori(NishimoriArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Disorder model: rbim2d or rpgm3d
    #[arg(long)]
    model: Option<Model>,
    /// Comma-separated lattice sizes, e.g. 8,12,16
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Probability grid: a single value or min:max:step (exact decimals)
    #[arg(long)]
    p: Option<String>,
    /// Samples per grid point
    #[arg(long)]
    samples: Option<u64>,
    /// Master seed; drawn from system entropy (and recorded) when omitted
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $PC0_OUT_DIR or .)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores); never affects results
    #[arg(long)]
    threads: Option<usize>,
    /// Match each defect only to its N nearest neighbors (approximate!)
    #[arg(long)]
    prune: Option<usize>,
    /// Continue an interrupted sweep from its manifest
    #[arg(long)]
    resume: bool,
    /// Overwrite any existing sweep state in the output directory
    #[arg(long)]
    force: bool,
    /// Validate and size-estimate the plan without running it
    #[arg(long)]
    dry_run: bool,
    /// Re-run the exact plan recorded in an existing manifest
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV to fit
    #[arg(long, required_unless_present = "selftest")]
    input: Option<PathBuf>,
    /// Size parity to fit: even, odd, or all (pooling is flagged)
    #[arg(long, default_value = "all")]
    parity: Parity,
    /// Ansatz: quadratic or corrected (adds D*L^(-1/mu))
    #[arg(long, default_value = "quadratic")]
    ansatz: String,
    /// Drop rows with L below this cutoff before fitting
    #[arg(long)]
    lmin: Option<usize>,
    /// Bootstrap replicas for the second error estimate (0 = off)
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// Seed for the bootstrap resampling
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the JSON fit report (default: fit-report.json in
    /// $PC0_OUT_DIR or .)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also report the log-slope exponent cross-check and curve crossings
    #[arg(long)]
    slope: bool,
    /// Generate zero-noise synthetic ansatz data, fit it, and verify the
    /// injected parameters are recovered
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long)]
    model: Model,
    #[arg(long)]
    size: usize,
    /// Disorder strength (exact decimal)
    #[arg(long)]
    p: String,
    #[arg(long, default_value_t = 0)]
    sample_index: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prune: Option<usize>,
    /// Emit the full (E, defects, matching, E', D, class) record as JSON
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Random instances per model
    #[arg(long, default_value_t = 500)]
    instances: u64,
    /// Largest defect count per instance (brute-force bound: 14)
    #[arg(long, default_value_t = 12)]
    max_defects: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one model (default: both)
    #[arg(long)]
    model: Option<Model>,
}

#[derive(Args)]
struct NishimoriArgs {
    /// Disorder strength in (0, 1)
    #[arg(long)]
    p: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Trial(args) => cmd_trial(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
        Command::Nishimori(args) => cmd_nishimori(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidInput(_) | Error::TooLarge(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("PC0_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve_seed(seed: Option<u64>) -> (u64, bool) {
    match seed {
        Some(s) => (s, false),
        None => (rand::rng().random(), true),
    }
}

fn init_thread_pool(threads: Option<usize>) {
    if let Some(n) = threads {
        // ignore failure: the global pool can only be set once (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    init_thread_pool(args.threads);
    let plan = match &args.from_manifest {
        Some(path) => {
            let mut plan = Manifest::load(path)?.plan;
            plan.threads = args.threads;
            plan
        }
        None => {
            let model = args.model.ok_or_else(|| {
                Error::InvalidInput("--model is required (or use --from-manifest)".into())
            })?;
            let grid = args
                .p
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("--p is required".into()))?;
            if args.sizes.is_empty() {
                return Err(Error::InvalidInput("--sizes is required".into()));
            }
            let (seed, drawn) = resolve_seed(args.seed);
            if drawn {
                eprintln!("note: master seed drawn from entropy: {seed}");
            }
            SweepPlan {
                model,
                sizes: args.sizes.clone(),
                p_grid: PGrid::parse(grid)?,
                samples: args
                    .samples
                    .ok_or_else(|| Error::InvalidInput("--samples is required".into()))?,
                master_seed: seed,
                threads: args.threads,
                prune: args.prune,
            }
        }
    };
    plan.validate()?;
    if args.dry_run {
        println!("{}", plan.summary());
        return Ok(ExitCode::SUCCESS);
    }
    let dir = out_dir(args.out);
    let mut sink = if args.resume {
        DirectorySink::open_resume(&dir, &plan)?
    } else {
        if DirectorySink::manifest_exists(&dir) && !args.force {
            return Err(Error::InvalidInput(format!(
                "{} already contains a sweep manifest; pass --resume to continue it or --force to overwrite",
                dir.display()
            )));
        }
        DirectorySink::create(&dir, &plan)?
    };
    let points = run_sweep(&plan, &mut sink)?;
    if plan.prune.is_some() {
        eprintln!("note: matcher pruning enabled; results are approximate");
    }
    println!(
        "wrote {} points to {}",
        points.len(),
        dir.join(DirectorySink::csv_file_name()).display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct FitConfigEcho {
    input: String,
    parity: Parity,
    ansatz: Ansatz,
    lmin: Option<usize>,
    bootstrap: usize,
    bootstrap_seed: u64,
    rows_total: usize,
    rows_used: usize,
}

#[derive(Serialize)]
struct FitReport {
    schema_version: u32,
    config: FitConfigEcho,
    fit: ScalingFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_exponent: Option<SlopeExponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing: Option<CrossingEstimate>,
}

fn print_fit_summary(fit: &ScalingFit) {
    let boot = |p: &pc0_core::scaling::FitParam| match p.bootstrap_sigma {
        Some(b) => format!(" [bootstrap +-{b:.6}]"),
        None => String::new(),
    };
    println!(
        "p_c0 = {:.6} +- {:.6}{}",
        fit.p_c0.value,
        fit.p_c0.one_sigma,
        boot(&fit.p_c0)
    );
    println!(
        "nu0  = {:.4} +- {:.4}{}",
        fit.nu0.value,
        fit.nu0.one_sigma,
        boot(&fit.nu0)
    );
    println!(
        "A = {:.4} +- {:.4}, B = {:.4} +- {:.4}, C = {:.4} +- {:.4}",
        fit.a.value, fit.a.one_sigma, fit.b.value, fit.b.one_sigma, fit.c.value, fit.c.one_sigma
    );
    if let (Some(d), Some(mu)) = (&fit.d, &fit.mu) {
        println!(
            "D = {:.4} +- {:.4}, mu = {:.4} +- {:.4}",
            d.value, d.one_sigma, mu.value, mu.one_sigma
        );
    }
    println!(
        "chi2/dof = {:.2}/{} over {} points ({} parity)",
        fit.chi2, fit.dof, fit.points_used, fit.parity
    );
    if fit.trace.pooled_parities {
        println!("warning: even and odd sizes pooled; their finite-size corrections differ");
    }
}

fn cmd_fit(args: FitArgs) -> Result<ExitCode, Error> {
    let ansatz: Ansatz = args.ansatz.parse()?;
    if args.selftest {
        return fit_selftest(&args, ansatz);
    }
    let input = args.input.as_ref().expect("clap enforces input");
    let mut points = read_points_csv(input)?;
    let rows_total = points.len();
    if let Some(lmin) = args.lmin {
        points.retain(|pt| pt.l >= lmin);
    }
    let rows_used_parity = points
        .iter()
        .filter(|pt| args.parity.matches(pt.l))
        .count();
    println!(
        "{} rows read, {} after L >= {} filter, {} with {} parity",
        rows_total,
        points.len(),
        args.lmin.unwrap_or(0),
        rows_used_parity,
        args.parity
    );
    let mut fit = match ansatz {
        Ansatz::Quadratic => fit_quadratic(&points, args.parity)?,
        Ansatz::Corrected => fit_corrected(&points, args.parity)?,
    };
    let (boot_seed, _) = resolve_seed(args.seed);
    if args.bootstrap > 0 {
        add_bootstrap_errors(&mut fit, &points, args.bootstrap, boot_seed)?;
    }
    print_fit_summary(&fit);
    let (slope, crossing) = if args.slope {
        let parity_points: Vec<PfailPoint> = points
            .iter()
            .filter(|pt| args.parity.matches(pt.l))
            .cloned()
            .collect();
        let se = slope_exponent(&parity_points, fit.p_c0.value)?;
        println!("slope-exponent cross-check: nu0 = {:.4} +- {:.4}", se.nu0, se.error);
        (Some(se), Some(crossing_estimate(&parity_points)?))
    } else {
        (None, None)
    };
    let report = FitReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: FitConfigEcho {
            input: input.display().to_string(),
            parity: args.parity,
            ansatz,
            lmin: args.lmin,
            bootstrap: args.bootstrap,
            bootstrap_seed: boot_seed,
            rows_total,
            rows_used: fit.points_used,
        },
        fit,
        slope_exponent: slope,
        crossing,
    };
    let path = args
        .out
        .unwrap_or_else(|| out_dir(None).join("fit-report.json"));
    write_json(&path, &report)?;
    println!("report written to {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn fit_selftest(args: &FitArgs, ansatz: Ansatz) -> Result<ExitCode, Error> {
    let truth = AnsatzParams {
        a: 0.3,
        b: 5.0,
        c: 8.0,
        p_c0: 0.103,
        nu0: 1.46,
        correction: (ansatz == Ansatz::Corrected).then_some((0.165, 0.71)),
    };
    let sizes = [8usize, 12, 16, 24, 32];
    let grid = PGrid::parse("0.095:0.115:0.002")?;
    let points = synthetic_points(
        Model::Rbim2d,
        &truth,
        &sizes,
        &grid.values(),
        0.005,
        None,
    );
    let csv_path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir(None).join("selftest.csv"));
    std::fs::write(&csv_path, pc0_core::montecarlo::points_to_csv(&points))?;
    let fit = match ansatz {
        Ansatz::Quadratic => fit_quadratic(&points, Parity::Even)?,
        Ansatz::Corrected => fit_corrected(&points, Parity::Even)?,
    };
    print_fit_summary(&fit);
    let mut checks = vec![
        ("A", fit.a.value, truth.a),
        ("B", fit.b.value, truth.b),
        ("C", fit.c.value, truth.c),
        ("p_c0", fit.p_c0.value, truth.p_c0),
        ("nu0", fit.nu0.value, truth.nu0),
    ];
    if let Some((d, mu)) = truth.correction {
        checks.push(("D", fit.d.as_ref().unwrap().value, d));
        checks.push(("mu", fit.mu.as_ref().unwrap().value, mu));
    }
    let mut ok = true;
    for (name, got, want) in checks {
        let rel = (got - want).abs() / want.abs();
        let pass = rel <= 1e-3;
        ok &= pass;
        println!(
            "selftest {name}: injected {want}, recovered {got:.8} ({})",
            if pass { "ok" } else { "FAILED" }
        );
    }
    println!("synthetic data written to {}", csv_path.display());
    if ok {
        println!("selftest passed");
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::FitFailure {
            message: "selftest failed to recover injected parameters".into(),
            best_chi2: fit.chi2,
        })
    }
}

fn cmd_trial(args: TrialArgs) -> Result<ExitCode, Error> {
    let (seed, drawn) = resolve_seed(args.seed);
    if drawn {
        eprintln!("note: master seed drawn from entropy: {seed}");
    }
    let spec = args.model.lattice(args.size)?;
    let p = Prob::parse_decimal(&args.p)?;
    let rng = RngPolicy::new(seed);
    let opts = TrialOptions { prune: args.prune };
    if args.dump {
        let record = run_trial_record(&spec, args.model, p, args.sample_index, &rng, &opts)?;
        let doc = serde_json::json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "prune": args.prune,
            "record": record,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        let outcome = run_trial(&spec, args.model, p, args.sample_index, &rng, &opts)?;
        let doc = serde_json::json!({
            "schema_version": REPORT_SCHEMA_VERSION,
            "model": args.model.name(),
            "l": args.size,
            "p": p.to_decimal_string(),
            "sample_index": args.sample_index,
            "master_seed": seed,
            "prune": args.prune,
            "success": outcome.success,
            "cycle_class": outcome.cycle_class.parities(),
            "error_weight": outcome.error_weight,
            "recovery_weight": outcome.recovery_weight,
            "wall_us": outcome.timing.as_micros() as u64,
        });
        println!("{}", serde_json::to_string(&doc).expect("serializable"));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_check(args: OracleArgs) -> Result<ExitCode, Error> {
    if args.max_defects > 14 {
        return Err(Error::TooLarge(format!(
            "--max-defects {} exceeds the brute-force oracle bound of 14",
            args.max_defects
        )));
    }
    if args.max_defects < 2 {
        return Err(Error::InvalidInput("--max-defects must be >= 2".into()));
    }
    let (seed, drawn) = resolve_seed(args.seed);
    if drawn {
        eprintln!("note: seed drawn from entropy: {seed}");
    }
    if args.instances == 0 {
        eprintln!("warning: zero instances requested; vacuous pass");
        println!("checked 0 instances, 0 mismatches (seed {seed})");
        return Ok(ExitCode::SUCCESS);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let models: Vec<Model> = match args.model {
        Some(m) => vec![m],
        None => vec![Model::Rbim2d, Model::Rpgm3d],
    };
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for model in models {
        for i in 0..args.instances {
            let l = 4 + (rng.random_range(0..5u32) as usize); // L in 4..=8
            let spec = model.lattice(l)?;
            let defects = fixtures::random_defect_set(&spec, args.max_defects / 2, &mut rng);
            let fast = min_weight_perfect_matching(&defects, &spec, seed ^ i)?;
            let slow = brute_force_matching(&defects, &spec)?;
            checked += 1;
            if fast.total_weight() != slow.matching.total_weight() {
                mismatches += 1;
                eprintln!(
                    "mismatch: {model} L={l} defects {:?}: {} vs {}",
                    defects.sites(),
                    fast.total_weight(),
                    slow.matching.total_weight()
                );
            }
        }
    }
    println!("checked {checked} instances, {mismatches} mismatches (seed {seed})");
    if mismatches == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Error::ContractViolation(format!(
            "{mismatches} oracle mismatches"
        )))
    }
}

fn cmd_nishimori(args: NishimoriArgs) -> Result<ExitCode, Error> {
    let k = nishimori_coupling(args.p)?;
    let t_over_j = if k == 0.0 {
        "inf".to_string()
    } else {
        format!("{}", 1.0 / k)
    };
    println!("p = {}", args.p);
    println!("K_p = {k}");
    println!("T/J = {t_over_j}");
    Ok(ExitCode::SUCCESS)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<ExitCode, Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(ExitCode::SUCCESS)
}
