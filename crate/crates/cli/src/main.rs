use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use modetrain::datasets::{bars_and_stripes, random_support, shifting_bar};
use modetrain::diagnostics::{
    benchmark_solver_vs_cd, certainty_curve, distance_profile, energy_change_check,
    modal_correspondence, variance_scan, wilson_lower_bound, write_curve_csv, BenchConfig,
    CertaintyCurveConfig, SPECTRUM_CAP,
};
use modetrain::experiment::{run_experiment, DatasetSpec, ExperimentConfig, ModelShape, OUT_ENV};
use modetrain::io::{load_checkpoint, load_distribution, write_distribution};
use modetrain::rbm::convert_convention;
use modetrain::solvers::{
    exhaustive_ground_state, fold_biases_into_ghosts, frustration_index, gauge_transform,
    memcomputing_solve, rbm_to_max2sat, sample_mode, write_trajectory_csv, write_wcnf,
    MemcomputingParams, ModeMethod,
};
use modetrain::training::{evaluate, LearningRate, ModeSchedule, TrainConfig};
use modetrain::{Convention, RbmParams};

#[derive(Parser)]
#[command(name = "modetrain", version, about = "Mode-assisted RBM training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Train(TrainArgs),
    /// Exact log-likelihood and KL of a checkpoint.
    Eval(EvalArgs),
    /// Find the ground state of a checkpointed model.
    GroundState(GroundStateArgs),
    /// Energy-landscape and mode checks.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Memcomputing solver vs CD sampling at matched cost.
    Bench(BenchArgs),
    /// Export a synthetic dataset as JSON.
    MakeData(MakeDataArgs),
    /// PCD-1 baseline vs mode-assisted training on MNIST.
    Mnist(MnistArgs),
}

#[derive(Args)]
struct OutputRoot {
    /// Output root; the run goes to `<out>/<name>` unless the config sets
    /// `out_dir`.
    #[arg(long, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for replicates (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed_base`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `replicates`.
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    output: OutputRoot,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset JSON written by `make-data`.
    #[arg(long, conflicts_with = "config")]
    data: Option<PathBuf>,
    /// Take the dataset from an experiment config instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replicate seed used when the config's dataset depends on it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Memcomputing,
}

impl From<MethodArg> for ModeMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exhaustive => ModeMethod::Exhaustive,
            MethodArg::Memcomputing => ModeMethod::Memcomputing,
        }
    }
}

#[derive(Args)]
struct GroundStateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "exhaustive")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver settings as TOML (memcomputing only).
    #[arg(long)]
    solver_config: Option<PathBuf>,
    /// Write the solver trajectory (time, dt, unsat weight) as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Write the weighted MAX-2-SAT encoding.
    #[arg(long)]
    wcnf: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Diagnose {
    /// Gauge, frustration, distance profile and variance scan of a model.
    Model(DiagnoseModelArgs),
    /// Ensemble `r(v+)` curve under CD-1 on a shifting bar.
    Certainty(CertaintyArgs),
    /// Joint/marginal mode agreement over random models.
    Modal(ModalArgs),
}

#[derive(Args)]
struct DiagnoseModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory for CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 41)]
    grid: usize,
}

#[derive(Args)]
struct CertaintyArgs {
    #[arg(long, default_value_t = 15)]
    length: usize,
    #[arg(long, default_value_t = 7)]
    bar: usize,
    #[arg(long, default_value_t = 10)]
    hidden: usize,
    #[arg(long, default_value_t = 200)]
    models: usize,
    #[arg(long, default_value_t = 5000)]
    updates: usize,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModalArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 500)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    biases: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Euler steps (default 2·size).
    #[arg(long)]
    solver_steps: Option<usize>,
    /// Gibbs sweeps per Euler step; measured when absent.
    #[arg(long)]
    exchange_rate: Option<f64>,
    /// Per-seed CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    ShiftingBar,
    BarsAndStripes,
    RandomSupport,
}

#[derive(Args)]
struct MakeDataArgs {
    #[arg(long, value_enum)]
    kind: DataKind,
    #[arg(long, default_value_t = 9)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    bar: usize,
    #[arg(long)]
    inverted: bool,
    #[arg(long, default_value_t = 3)]
    side: usize,
    #[arg(long, default_value_t = 6)]
    n_visible: usize,
    #[arg(long, default_value_t = 10)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MnistArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    p_max: f64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Use only the first N images.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate every this many epochs.
    #[arg(long, default_value_t = 10)]
    eval_epochs: usize,
    #[command(flatten)]
    output: OutputRoot,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::GroundState(a) => cmd_ground_state(a),
        Command::Diagnose(Diagnose::Model(a)) => cmd_diagnose_model(a),
        Command::Diagnose(Diagnose::Certainty(a)) => cmd_certainty(a),
        Command::Diagnose(Diagnose::Modal(a)) => cmd_modal(a),
        Command::Bench(a) => cmd_bench(a),
        Command::MakeData(a) => cmd_make_data(a),
        Command::Mnist(a) => cmd_mnist(a),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load_model(path: &Path) -> Result<RbmParams> {
    load_checkpoint(path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)
        .with_context(|| format!("invalid config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        cfg.seed_base = seed;
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    let bundle = run_experiment(&cfg, &a.output.out, a.output.jobs)?;
    eprintln!("wrote {}", bundle.dir.display());
    print_json(&bundle.summary)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let rbm = load_model(&a.checkpoint)?;
    let data = match (&a.data, &a.config) {
        (Some(p), _) => modetrain::experiment::Dataset::Distribution(load_distribution(p)?),
        (None, Some(c)) => ExperimentConfig::load(c)?.dataset.build(a.seed)?,
        (None, None) => bail!("one of --data or --config is required"),
    };
    print_json(&evaluate(&rbm, data.as_training())?)
}

fn cmd_ground_state(a: GroundStateArgs) -> Result<()> {
    let rbm = load_model(&a.checkpoint)?;
    let mut params = match &a.solver_config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("invalid solver config {}", p.display()))?,
        None => MemcomputingParams::default(),
    };
    let (pm, offset) = convert_convention(&rbm, Convention::PlusMinus);
    if let Some(path) = &a.wcnf {
        let inst = rbm_to_max2sat(&pm)?;
        let mut out = create(path)?;
        write_wcnf(&inst, Some("weighted MAX-2-SAT encoding of an RBM"), &mut out)?;
        out.flush()?;
    }
    if let Some(path) = &a.trajectory {
        if !matches!(a.method, MethodArg::Memcomputing) {
            bail!("--trajectory needs --method memcomputing");
        }
        params.record_trajectory = true;
        let outcome = memcomputing_solve(&rbm_to_max2sat(&pm)?, &params, a.seed)?;
        let mut out = create(path)?;
        write_trajectory_csv(&outcome.stats, &mut out)?;
        out.flush()?;
        params.record_trajectory = false;
    }
    let gs = sample_mode(&rbm, a.method.into(), &params, a.seed)?;
    let pm_energy = match rbm.convention {
        Convention::ZeroOne => gs.energy + offset,
        Convention::PlusMinus => gs.energy,
    };
    print_json(&json!({
        "visible": gs.visible.to_vec(),
        "hidden": gs.hidden.to_vec(),
        "energy": gs.energy,
        "energy_pm": pm_energy,
        "exact": gs.exact,
    }))
}

/// Unbiased `±1` form of a model: biases become couplings to ghost units.
fn unbiased_pm(rbm: &RbmParams) -> Result<RbmParams> {
    let (pm, _) = convert_convention(rbm, Convention::PlusMinus);
    Ok(if pm.is_unbiased() {
        pm
    } else {
        fold_biases_into_ghosts(&pm)?
    })
}

fn cmd_diagnose_model(a: DiagnoseModelArgs) -> Result<()> {
    let rbm = load_model(&a.checkpoint)?;
    let base = unbiased_pm(&rbm)?;
    let (n, m) = (base.n_visible(), base.n_hidden());
    if n + m > SPECTRUM_CAP {
        bail!(
            "diagnostics enumerate 2^{} states; the cap is 2^{SPECTRUM_CAP}",
            n + m
        );
    }
    let gs = exhaustive_ground_state(&base)?;
    let gauged = gauge_transform(&base, &gs)?;
    let frustration = frustration_index(&gauged).ok();
    let profile = distance_profile(&gauged)?;
    let gamma_star = -gs.energy / (n * m) as f64;
    let change = energy_change_check(&gauged, gamma_star)?;
    let scan = variance_scan(&base, a.grid)?;
    let modal = modal_correspondence(&rbm).ok();
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let mut out = create(&dir.join("distance_profile.csv"))?;
        profile.write_csv(&mut out)?;
        out.flush()?;
        let mut out = create(&dir.join("variance_scan.csv"))?;
        writeln!(out, "gamma,variance")?;
        for (g, v) in scan.gammas.iter().zip(&scan.variances) {
            writeln!(out, "{g},{v}")?;
        }
        out.flush()?;
    }
    print_json(&json!({
        "ghost_units": !rbm.is_unbiased(),
        "e0": gs.energy,
        "frustration_index": frustration,
        "distance_law_max_error": profile.max_law_error(),
        "energy_change": change,
        "variance": {
            "initial": scan.initial_variance,
            "gamma_star": scan.gamma_star,
            "gamma_bound": scan.gamma_bound,
            "grid_minimizer": scan.grid_minimizer,
            "decreases_inside_bound": scan.decreases_inside_bound(),
            "minimizer_within_one_cell": scan.minimizer_within_one_cell(),
            "fit_residual": scan.fit_residual,
        },
        "modal_correspondence": modal,
    }))
}

fn cmd_certainty(a: CertaintyArgs) -> Result<()> {
    let cfg = CertaintyCurveConfig {
        length: a.length,
        bar: a.bar,
        n_hidden: a.hidden,
        models: a.models,
        n_updates: a.updates,
        eval_every: a.eval_every,
        learning_rate: a.lr,
        seed_base: a.seed,
        ..CertaintyCurveConfig::default()
    };
    let points = certainty_curve(&cfg)?;
    match &a.out {
        Some(p) => {
            let mut out = create(p)?;
            write_curve_csv(&points, &mut out)?;
            out.flush()?;
        }
        None => write_curve_csv(&points, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_modal(a: ModalArgs) -> Result<()> {
    let mut equal = 0;
    let mut r_sum = 0.0;
    for k in 0..a.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed + k as u64);
        let rbm = RbmParams::random(a.n, a.n, Convention::PlusMinus, a.sigma, a.biases, &mut rng);
        let mc = modal_correspondence(&rbm)?;
        equal += usize::from(mc.equal);
        r_sum += mc.r_at_marginal_mode;
    }
    print_json(&json!({
        "n": a.n,
        "sigma": a.sigma,
        "seeds": a.seeds,
        "equal": equal,
        "fraction": equal as f64 / a.seeds.max(1) as f64,
        "wilson_lower_95": wilson_lower_bound(equal, a.seeds, 1.96),
        "mean_r": r_sum / a.seeds.max(1) as f64,
    }))
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        size: a.size,
        seeds: a.seeds,
        seed_base: a.seed,
        solver_steps: a.solver_steps,
        exchange_rate: a.exchange_rate,
        ..BenchConfig::default()
    };
    let report = benchmark_solver_vs_cd(&cfg)?;
    if let Some(p) = &a.out {
        let mut out = create(p)?;
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    print_json(&json!({
        "size": report.size,
        "exchange_rate": report.exchange_rate,
        "exchange_rate_measured": report.exchange_rate_measured,
        "median_delta_pct": report.median_delta_pct,
        "mem_seconds": report.mem_seconds,
        "cd_seconds": report.cd_seconds,
    }))
}

fn cmd_make_data(a: MakeDataArgs) -> Result<()> {
    let data = match a.kind {
        DataKind::ShiftingBar => shifting_bar(a.length, a.bar, a.inverted)?,
        DataKind::BarsAndStripes => bars_and_stripes(a.side)?,
        DataKind::RandomSupport => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            random_support(a.n_visible, a.size, &mut rng)?
        }
    };
    match &a.out {
        Some(p) => {
            let mut out = create(p)?;
            write_distribution(&data, &mut out)?;
            out.flush()?;
        }
        None => write_distribution(&data, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_mnist(a: MnistArgs) -> Result<()> {
    if a.batch == 0 || a.epochs == 0 {
        bail!("--batch and --epochs must be positive");
    }
    let dataset = DatasetSpec::Mnist {
        images: a.images.clone(),
        labels: a.labels.clone(),
        threshold: a.threshold,
        limit: a.limit,
    };
    let rows = match dataset.build(a.seed)? {
        modetrain::experiment::Dataset::Rows(r) => r.nrows(),
        modetrain::experiment::Dataset::Distribution(d) => d.len(),
    };
    let per_epoch = rows.div_ceil(a.batch);
    let n_updates = per_epoch * a.epochs;
    let mut train = TrainConfig::new(a.hidden, n_updates, LearningRate::Constant { rate: a.lr });
    train.batch_size = Some(a.batch);
    train.persistent = true;
    train.eval_every = per_epoch * a.eval_epochs.max(1);
    let make = |name: &str, mode: Option<ModeSchedule>| ExperimentConfig {
        name: name.to_string(),
        dataset: dataset.clone(),
        model: ModelShape {
            n_visible: None,
            n_hidden: a.hidden,
        },
        train: TrainConfig {
            mode,
            ..train.clone()
        },
        replicates: 1,
        seed_base: a.seed,
        out_dir: None,
        report: vec!["table1-mnist".into()],
        checkpoint_every: None,
    };
    let baseline = make("mnist-pcd1", None);
    let assisted = make(
        "mnist-mode",
        Some(ModeSchedule::standard(a.p_max, n_updates, ModeMethod::Memcomputing)),
    );
    let mut finals = Vec::new();
    for cfg in [&baseline, &assisted] {
        eprintln!("running {} ({n_updates} updates)", cfg.name);
        let bundle = run_experiment(cfg, &a.output.out, a.output.jobs)?;
        finals.push(bundle.summary.runs[0].final_mean_log_likelihood);
    }
    let (Some(pcd), Some(mode)) = (finals[0], finals[1]) else {
        bail!("final log-likelihood unavailable");
    };
    print_json(&json!({
        "pcd1_mean_log_likelihood": pcd,
        "mode_mean_log_likelihood": mode,
        "mode_better": mode > pcd,
    }))
}
