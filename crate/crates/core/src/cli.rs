//! Command-line front end: `simulate`, `sweep`, `compare`, `hyperopt` and `bounds`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bench::{analyze_bounds, estimate_friend_lipschitz, run_benchmark, steady_state_eta, BenchOutcome};
use crate::bounds::{build_bound_report, covering_radius, regulation_error_bound, uniform_error_bound, BoxDomain, CoveringMode};
use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::gp::{fit, log_marginal_likelihood, optimize_hyperparams, HyperoptOptions};
use crate::io::{
    self, dataset_rows, read_dataset_csv, read_trajectory_csv, rows_to_samples, write_dataset_csv,
    write_key_values, write_metrics_csv, write_trajectory_csv, Manifest, MetricsRow, TrajectoryLayout,
};
use crate::plots::{error_panels, feedforward_panel, transient_panel, PlotSeries};
use crate::regulator::IdentifierKind;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "REGUL_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "gpreg", about = "GP-based output regulation of the Van der Pol benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        identifier: Option<IdentifierKind>,
    },
    /// Run the GP regulator for several buffer sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        samples: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the least-squares baseline and the GP regulator at every configured N.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fit kernel length scales to a dataset by marginal-likelihood maximization.
    Hyperopt {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the uniform error bound of a dataset along a trajectory.
    Bounds {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "l-f")]
        l_f: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file; benchmark defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => parse_config(path),
            None => Ok(RunConfig::default()),
        }
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
///
/// Returns 0 on success, 1 for usage and configuration errors and 2 for
/// numerical failures.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common, identifier } => {
            let cfg = common.load()?;
            let kind = identifier.unwrap_or(cfg.identifier);
            let out = common.out_dir(&cfg);
            run_set(&cfg, &[(kind, cfg.n)], 1, &out)
        }
        Command::Sweep { common, samples, jobs } => {
            let cfg = common.load()?;
            let sizes = if samples.is_empty() { cfg.n_values.clone() } else { samples };
            if sizes.contains(&0) {
                return Err(Error::Config("--samples entries must be positive".into()));
            }
            let specs: Vec<_> = sizes.into_iter().map(|n| (IdentifierKind::Gp, n)).collect();
            run_set(&cfg, &specs, jobs, &common.out_dir(&cfg))
        }
        Command::Compare { common, jobs } => {
            let cfg = common.load()?;
            let largest = cfg.n_values.iter().copied().max().unwrap_or(cfg.n);
            let mut specs = vec![(IdentifierKind::Ls, largest)];
            specs.extend(cfg.n_values.iter().map(|n| (IdentifierKind::Gp, *n)));
            run_set(&cfg, &specs, jobs, &common.out_dir(&cfg))
        }
        Command::Hyperopt {
            dataset,
            common,
            starts,
            seed,
        } => hyperopt(&dataset, &common, starts, seed),
        Command::Bounds {
            dataset,
            trajectory,
            delta,
            l_f,
            common,
        } => bounds(&dataset, &trajectory, delta, l_f, &common),
    }
}

fn run_set(cfg: &RunConfig, specs: &[(IdentifierKind, usize)], jobs: usize, out: &Path) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<BenchOutcome> = pool.install(|| {
        specs
            .par_iter()
            .map(|(kind, n)| run_benchmark(cfg, *kind, *n))
            .collect::<Result<Vec<_>>>()
    })?;
    write_outputs(cfg, &outcomes, out)
}

/// Figures derived from a set of runs, shared by the writers and the tests.
#[derive(Debug, Clone)]
pub struct SetSummary {
    pub metrics: Vec<MetricsRow>,
    pub l_f: f64,
    pub bound_lines: Vec<(String, String)>,
}

/// Metrics and bound figures for a set of runs.
///
/// ρ* of every GP run is measured against one reference set: the steady-state
/// internal-model states of the largest-N GP run.
pub fn summarize(cfg: &RunConfig, outcomes: &[BenchOutcome]) -> Result<SetSummary> {
    let window = cfg.sim.ss_window;
    let reference_run = outcomes
        .iter()
        .filter(|o| o.identifier == IdentifierKind::Gp)
        .max_by_key(|o| o.capacity)
        .or_else(|| outcomes.first());
    let (reference, l_f) = match reference_run {
        Some(o) => (
            steady_state_eta(o.trajectory(), window),
            cfg.l_f.unwrap_or_else(|| estimate_friend_lipschitz(o.trajectory(), window)),
        ),
        None => (Vec::new(), cfg.l_f.unwrap_or(0.0)),
    };
    let mut bound_lines = vec![
        ("config_hash".to_string(), cfg.hash()),
        ("delta".to_string(), cfg.delta.to_string()),
        ("L_f".to_string(), l_f.to_string()),
        (
            "L_f_source".to_string(),
            if cfg.l_f.is_some() { "config" } else { "finite-difference" }.to_string(),
        ),
    ];
    let mut metrics = Vec::new();
    for o in outcomes {
        let label = o.label();
        let mut row = MetricsRow {
            identifier: label.clone(),
            n: o.capacity,
            max_abs_y_ss: o.metrics.max_abs_y,
            rms_y_ss: o.metrics.rms_y,
            max_friend_err: o.metrics.max_abs_friend_err,
            rho_star: None,
            claim2_bound: None,
        };
        bound_lines.push((format!("{label}.collect_jumps"), o.collect_jumps.to_string()));
        bound_lines.push((format!("{label}.saturation_fraction"), o.saturation_fraction.to_string()));
        if let Some(model) = o.gp().filter(|m| !m.is_empty() && !reference.is_empty()) {
            let a = analyze_bounds(model, &reference, cfg.delta, l_f)?;
            row.rho_star = Some(a.rho_star);
            row.claim2_bound = Some(a.claim_bound);
            for (k, v) in [
                ("N_data", model.len() as f64),
                ("rho_star", a.rho_star),
                ("beta", a.report.beta),
                ("alpha", a.report.alpha),
                ("L_mu", a.report.l_mean),
                ("L_var", a.report.l_var),
                ("claim2_bound", a.claim_bound),
                ("noise_floor", a.noise_floor),
            ] {
                bound_lines.push((format!("{label}.{k}"), v.to_string()));
            }
        }
        metrics.push(row);
    }
    Ok(SetSummary {
        metrics,
        l_f,
        bound_lines,
    })
}

fn write_outputs(cfg: &RunConfig, outcomes: &[BenchOutcome], out: &Path) -> Result<()> {
    let hash = cfg.hash();
    let mut manifest = Manifest::new(hash.clone());
    let summary = summarize(cfg, outcomes)?;

    let config_path = out.join("config.ini");
    io::write_text(&cfg.render(), &config_path)?;
    manifest.add(&config_path, io::count_lines(&config_path)?);

    let mut series = Vec::new();
    for o in outcomes {
        let label = o.label();
        let traj_path = out.join(format!("trajectory-{label}.csv"));
        let rows = write_trajectory_csv(o.trajectory(), &traj_path)?;
        manifest.add(&traj_path, rows);
        let data_path = out.join(format!("dataset-{label}.csv"));
        let data = dataset_rows(o.trajectory(), o.run.regulator.buffer().len());
        manifest.add(&data_path, write_dataset_csv(&data, &data_path)?);
        series.push(PlotSeries {
            file: format!("trajectory-{label}.csv"),
            title: label,
        });
    }

    let metrics_path = out.join("metrics.csv");
    manifest.add(&metrics_path, write_metrics_csv(&summary.metrics, &metrics_path)?);
    let bounds_path = out.join("bounds.txt");
    write_key_values(&summary.bound_lines, &bounds_path)?;
    manifest.add(&bounds_path, summary.bound_lines.len());

    let layout = outcomes
        .first()
        .and_then(|o| o.trajectory().records.first())
        .map_or_else(TrajectoryLayout::benchmark, TrajectoryLayout::of);
    let t_end = cfg.sim.horizon;
    let t_ss = t_end - cfg.sim.ss_window;
    for (name, script) in [
        ("plot_errors.gp", error_panels(&series, &layout, t_ss, t_end, &hash)),
        ("plot_transient.gp", transient_panel(&series, &layout, t_ss.min(20.0), &hash)),
        ("plot_feedforward.gp", feedforward_panel(&series, &layout, t_ss, t_end, &hash)),
    ] {
        let path = out.join(name);
        io::write_text(&script, &path)?;
        manifest.add(&path, script.lines().count());
    }
    manifest.write(out)?;

    for row in &summary.metrics {
        println!(
            "{:<8} N={:<4} max|y|={:.4e} rms={:.4e} friend_err={:.4e} rho*={} bound={}",
            row.identifier,
            row.n,
            row.max_abs_y_ss,
            row.rms_y_ss,
            row.max_friend_err,
            row.rho_star.map_or("-".into(), |v| format!("{v:.4}")),
            row.claim2_bound.map_or("-".into(), |v| format!("{v:.4e}")),
        );
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn hyperopt(dataset: &Path, common: &Common, starts: usize, seed: Option<u64>) -> Result<()> {
    let cfg = common.load()?;
    let samples = rows_to_samples(&read_dataset_csv(dataset)?)?;
    let init = cfg.hyperparams()?;
    let opts = HyperoptOptions {
        starts: starts.max(1),
        seed: seed.unwrap_or(cfg.seed),
        ..HyperoptOptions::default()
    };
    let before = log_marginal_likelihood(&samples, &init)?;
    let best = optimize_hyperparams(&samples, &init, &opts)?;
    let after = log_marginal_likelihood(&samples, &best)?;
    let scales: Vec<String> = best.length_scales().iter().map(|l| format!("{l:.6}")).collect();
    let lines = vec![
        ("samples".to_string(), samples.len().to_string()),
        ("log_likelihood_initial".to_string(), before.to_string()),
        ("log_likelihood".to_string(), after.to_string()),
        ("lengthscales".to_string(), scales.join(", ")),
        ("sigma_p2".to_string(), best.amplitude().to_string()),
        ("sigma_n2".to_string(), best.noise_variance().to_string()),
    ];
    for (k, v) in &lines {
        println!("{k} = {v}");
    }
    if common.out_dir.is_some() || cfg.out_dir.is_some() {
        let out = common.out_dir(&cfg);
        write_key_values(&lines, out.join("hyperopt.txt"))?;
    }
    Ok(())
}

fn bounds(dataset: &Path, trajectory: &Path, delta: Option<f64>, l_f: Option<f64>, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let delta = delta.unwrap_or(cfg.delta);
    let samples = rows_to_samples(&read_dataset_csv(dataset)?)?;
    let traj = read_trajectory_csv(trajectory)?;
    let model = fit(&samples, &cfg.hyperparams()?)?;
    let window = cfg.sim.ss_window.min(traj.final_time());
    let reference = steady_state_eta(&traj, window);
    if reference.is_empty() {
        return Err(Error::Argument(format!("{} has no flow records", trajectory.display())));
    }
    let l_f = l_f.or(cfg.l_f).unwrap_or_else(|| estimate_friend_lipschitz(&traj, window));
    let rho_star = covering_radius(model.samples(), &reference);
    let domain = BoxDomain::hull(reference.iter())
        .ok_or_else(|| Error::Argument("no points to span a domain".into()))?
        .inflate(0.05);
    let report = build_bound_report(&model, rho_star, delta, l_f, &domain, CoveringMode::DatasetSize)?;
    let (claim, floor) = regulation_error_bound(model.hyper(), rho_star, &report);

    let lines = vec![
        ("config_hash".to_string(), cfg.hash()),
        ("N".to_string(), model.len().to_string()),
        ("delta".to_string(), delta.to_string()),
        ("beta".to_string(), report.beta.to_string()),
        ("alpha".to_string(), report.alpha.to_string()),
        ("L_mu".to_string(), report.l_mean.to_string()),
        ("L_var".to_string(), report.l_var.to_string()),
        ("L_f".to_string(), l_f.to_string()),
        ("rho_star".to_string(), rho_star.to_string()),
        ("claim2_bound".to_string(), claim.to_string()),
        ("noise_floor".to_string(), floor.to_string()),
    ];
    for (k, v) in &lines {
        println!("{k} = {v}");
    }
    let out = common.out_dir(&cfg);
    let mut manifest = Manifest::new(cfg.hash());
    let bounds_path = out.join("bounds.txt");
    write_key_values(&lines, &bounds_path)?;
    manifest.add(&bounds_path, lines.len());

    let mut text = String::from("t,var,uniform_bound,abs_err\n");
    let mut rows = 0;
    for r in traj.window(window).filter(|r| !r.is_jump()) {
        let (mu, var) = model.posterior_predict(&r.eta)?;
        let bound = uniform_error_bound(&model, &r.eta, &report);
        let err = (&r.u_star - mu).amax();
        text.push_str(&format!("{:.9e},{:.9e},{:.9e},{:.9e}\n", r.t, var, bound, err));
        rows += 1;
    }
    let points_path = out.join("bounds_points.csv");
    io::write_text(&text, &points_path)?;
    manifest.add(&points_path, rows);
    manifest.write(&out)?;
    Ok(())
}

impl clap::ValueEnum for IdentifierKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[IdentifierKind::Gp, IdentifierKind::Ls]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}
