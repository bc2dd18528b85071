mod config;

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use tsunami_detect::bayes::{run_sequence, LikelihoodModel, PosteriorState};
use tsunami_detect::detect::{self, Method};
use tsunami_detect::harness::{
    box_table, read_report_csv, run_sweep, write_boxstats_csv, write_report_csv,
    write_scatter_csv, ScatterKind,
};
use tsunami_detect::pod::{compute_basis_from_database, extract_coefficients, CoefficientSet, ModeRule};
use tsunami_detect::scenario::{ObservationWindow, ScenarioDatabase};
use tsunami_detect::store;
use tsunami_detect::synth::generate_database;

use config::RunConfig;

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

#[derive(Parser)]
#[command(name = "tsudet", version, about = "Tsunami scenario detection toolkit")]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "TSUDET_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario database.
    Gen(GenArgs),
    /// Compute the POD basis and per-scenario coefficients of a database.
    Decompose(DecomposeArgs),
    /// Forecast inundation from one observed record.
    Detect(DetectArgs),
    /// Cross-validated evaluation of every method and window.
    Sweep(SweepArgs),
    /// Turn report.csv into scatter and box-statistics tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    gauges: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    packets: Option<usize>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `threshold:<θ>` or `fixed:<r>`.
    #[arg(long, value_parser = config::parse_mode_rule)]
    mode_rule: Option<ModeRule>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    db: PathBuf,
    /// basis.bin from `decompose`, needed by the Bayesian methods; coeffs.bin
    /// beside it is reused when it matches the database.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// CSV with header `time,gauge_0,…`.
    #[arg(long)]
    observed: PathBuf,
    #[arg(long)]
    method: Method,
    /// Observation window (s).
    #[arg(long)]
    t_obs: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    target_gauge: Option<usize>,
    #[arg(long)]
    likelihood_scale: Option<f64>,
    /// Also write the posterior after every step.
    #[arg(long)]
    posterior_log: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated windows in seconds.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Observation noise standard deviation (m).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    target_gauge: Option<usize>,
    #[arg(long, value_parser = config::parse_mode_rule)]
    mode_rule: Option<ModeRule>,
    /// Add a full-horizon DTW case.
    #[arg(long)]
    full_history: bool,
    /// Write every predicted grid under `grids/`.
    #[arg(long)]
    save_grids: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// report.csv written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    Ok(())
}

fn gen(mut cfg: RunConfig, args: GenArgs) -> Result<()> {
    let g = &mut cfg.gen;
    g.seed = args.seed.unwrap_or(g.seed);
    g.n_scenarios = args.scenarios.unwrap_or(g.n_scenarios);
    g.n_gauges = args.gauges.unwrap_or(g.n_gauges);
    g.n_steps = args.steps.unwrap_or(g.n_steps);
    g.n_packets = args.packets.unwrap_or(g.n_packets);
    let db = generate_database(&cfg.gen)?;
    store::save_database(&db, &args.out)?;
    cfg.echo(&args.out)?;
    info!("wrote {} scenarios to {}", db.len(), args.out.display());
    Ok(())
}

fn decompose(mut cfg: RunConfig, args: DecomposeArgs) -> Result<()> {
    if let Some(rule) = args.mode_rule {
        cfg.detect.mode_rule = rule;
    }
    let db = store::load_database(&args.db)?;
    let basis = compute_basis_from_database(&db, cfg.detect.mode_rule)?;
    let coeffs = extract_coefficients(&basis, &db)?;
    create_dir(&args.out)?;
    store::save_basis(&args.out.join("basis.bin"), &basis)?;
    store::save_coefficients(&args.out.join("coeffs.bin"), &coeffs)?;
    store::write_contribution_csv(&args.out.join("contribution.csv"), &basis)?;
    cfg.echo(&args.out)?;
    println!("r = {}, c(r) = {:.6}", basis.rank(), basis.contribution()[basis.rank() - 1]);
    Ok(())
}

fn coefficients_for(
    basis_path: &Path,
    basis: &tsunami_detect::pod::PodBasis,
    db: &ScenarioDatabase,
) -> Result<CoefficientSet> {
    let path = basis_path.with_file_name("coeffs.bin");
    if path.exists() {
        let c = store::load_coefficients(&path)?;
        let ids: Vec<u64> = db.scenarios().iter().map(|s| s.scenario_id).collect();
        if c.ids() == ids && c.rank() == basis.rank() && c.n_steps() == db.n_steps() {
            return Ok(c);
        }
        log::warn!("{} does not match the database; recomputing", path.display());
    }
    Ok(extract_coefficients(basis, db)?)
}

fn run_detect(mut cfg: RunConfig, args: DetectArgs) -> Result<()> {
    if let Some(s) = args.likelihood_scale {
        cfg.detect.likelihood_scale = s;
    }
    if args.target_gauge.is_some() {
        cfg.detect.target_gauge = args.target_gauge;
    }
    let db = store::load_database(&args.db)?;
    let window = ObservationWindow::for_database(args.t_obs, &db)?;
    let steps = window.step_count();
    let observed = store::read_observation_csv(&args.observed, db.dt(), steps as f64 * db.dt())?;
    let target = cfg.detect.target_gauge.unwrap_or(db.n_gauges() - 1);

    let mut posterior = None;
    let prediction = if args.method.is_bayesian() {
        let basis_path = args
            .basis
            .as_deref()
            .ok_or_else(|| format!("--basis is required for {}", args.method))?;
        let basis = store::load_basis(basis_path)?;
        let coeffs = coefficients_for(basis_path, &basis, &db)?;
        let model = LikelihoodModel::from_basis(
            &basis,
            cfg.detect.likelihood_scale,
            cfg.detect.covariance_policy,
        )?;
        let mut prior = PosteriorState::uniform(db.len());
        if args.posterior_log {
            prior = prior.with_history();
        }
        let state = run_sequence(&coeffs, &basis, &observed, steps, &model, prior)?;
        let p = match args.method {
            Method::MostProbable => detect::most_probable(&state, &db, target, window.t_obs())?,
            _ => detect::weighted_mean(&state, &db, target, window.t_obs())?,
        };
        posterior = Some(state);
        p
    } else {
        detect::shortest_dtw(&db, &observed, &window, &cfg.detect.dtw, target)?
    };

    create_dir(&args.out)?;
    let summary = serde_json::to_string_pretty(&prediction.summary())?;
    fs::write(args.out.join("prediction.json"), summary + "\n")?;
    store::write_grid(&args.out.join("inundation.bin"), &prediction.inundation_pred)?;
    if let Some(history) = posterior.as_ref().and_then(|s| s.history()) {
        let ids: Vec<u64> = db.scenarios().iter().map(|s| s.scenario_id).collect();
        store::write_posterior_log(&args.out.join("posterior.csv"), &ids, history)?;
    }
    cfg.echo(&args.out)?;
    println!(
        "{}: eta_max {:.4} m, H_max {:.4} m{}",
        prediction.method,
        prediction.eta_max_pred,
        prediction.h_max_pred,
        prediction.chosen_id.map(|id| format!(", scenario {id}")).unwrap_or_default()
    );
    Ok(())
}

fn sweep(mut cfg: RunConfig, args: SweepArgs) -> Result<()> {
    let s = &mut cfg.sweep;
    s.folds = args.folds.unwrap_or(s.folds);
    s.seed = args.seed.unwrap_or(s.seed);
    if let Some(w) = args.windows {
        s.windows = w;
    }
    if let Some(m) = args.methods {
        s.methods = m;
    }
    s.noise_sigma = args.noise.unwrap_or(s.noise_sigma);
    if args.target_gauge.is_some() {
        s.target_gauge = args.target_gauge;
    }
    if let Some(rule) = args.mode_rule {
        s.mode_rule = rule;
    }
    s.full_history |= args.full_history;
    s.keep_grids |= args.save_grids;

    let db = store::load_database(&args.db)?;
    let report = run_sweep(&db, &cfg.sweep)?;
    create_dir(&args.out)?;
    write_report_csv(&args.out.join("report.csv"), &report.rows)?;
    let folds: Vec<_> = report
        .folds
        .iter()
        .map(|f| {
            json!({
                "fold": f.fold,
                "n_train": f.train_ids.len(),
                "test_ids": f.test_ids,
                "rank": f.rank,
                "basis_digest": f.basis_digest.map(|d| format!("{d:016x}")),
                "error": f.error,
            })
        })
        .collect();
    let meta = json!({
        "n_retained": report.n_retained,
        "target_gauge": report.target_gauge,
        "folds": folds,
    });
    fs::write(args.out.join("folds.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    if cfg.sweep.keep_grids {
        let dir = args.out.join("grids");
        create_dir(&dir)?;
        for g in &report.grids {
            let name = format!("f{}_s{:06}_{}_{}.bin", g.fold, g.scenario_id, g.method, g.t_obs);
            store::write_grid(&dir.join(name), &g.grid)?;
        }
    }
    cfg.echo(&args.out)?;
    let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{} rows ({} failed) over {} scenarios in {} folds",
        report.rows.len(),
        failed,
        report.n_retained,
        report.folds.len()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let rows = read_report_csv(&args.input)?;
    create_dir(&args.out)?;
    let table = box_table(&rows);
    write_boxstats_csv(&args.out.join("boxstats.csv"), &table)?;
    write_scatter_csv(&args.out.join("scatter_eta.csv"), &rows, ScatterKind::Eta)?;
    write_scatter_csv(&args.out.join("scatter_hmax.csv"), &rows, ScatterKind::Hmax)?;
    println!("{} rows, {} box groups", rows.len(), table.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match cli.command {
        Command::Gen(a) => gen(cfg, a),
        Command::Decompose(a) => decompose(cfg, a),
        Command::Detect(a) => run_detect(cfg, a),
        Command::Sweep(a) => sweep(cfg, a),
        Command::Report(a) => report(a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
