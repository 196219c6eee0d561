//! Command-line front end. Every subcommand reads one JSON config (or the
//! defaults) plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wimo_core::approx::{
    bass_ale_bound, decorrelation_ratio, effective_dim, effective_dim_max, ModalEntry,
};
use wimo_core::estimators::{describe_peaks, FtMap, Method};
use wimo_core::math::{db, deg_to_rad};

use crate::bench::{check_summary, run_bench, write_trials_csv};
use crate::config::{keys_help, ExperimentSpec};
use crate::error::{Result, WimoError};
use crate::io::{
    load_snapshots, sidecar_path, write_json, write_snapshots, write_snapshots_csv, Sidecar,
    SNAPSHOT_VERSION,
};
use crate::output::{write_ft_csv, write_spectrum_csv, EstimateReport};
use crate::pipeline::{estimate, Prepared};
use crate::simulator::simulate;
use crate::theory::{run_suite, Injection, SuiteOptions};

#[derive(Debug, Parser)]
#[command(
    name = "wimo",
    version,
    about = "Wideband DOA estimation with modal-orthogonality spectra"
)]
pub struct Cli {
    /// Worker threads; results are identical for any count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON experiment config; omitted keys take their defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set estimator.m=5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentSpec> {
        let base = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        base.with_overrides(&self.overrides)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SnapshotFormat {
    Bin,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one snapshot block and write it with a JSON sidecar.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "bin")]
        format: SnapshotFormat,
    },
    /// Estimate DOAs from a snapshot file: spectrum CSV and peaks JSON.
    Estimate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Snapshot file (`.csv` needs its sidecar for the sampling rate).
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Modal cache file, reused when it matches the config.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Approximate covariance model of one direction: spectrum, GSV and
    /// effective-dimension figures.
    Approx {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the numerical property suite; exits nonzero on any failure.
    CheckTheory {
        #[command(flatten)]
        config: ConfigArgs,
        /// Perturb every checked matrix so that the suite must fail.
        #[arg(long)]
        inject_failure: bool,
    },
    /// Monte Carlo sweep: trials CSV, summary JSON and timing JSON.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Evaluate the config's `check` assertions; exit nonzero on failure.
        #[arg(long)]
        check: bool,
        /// Directory for per-point modal caches.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Space-frequency map of a snapshot file (sf-* method, default sf-cbf).
    Sfmap {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Exit status of a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

pub fn parse<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = Cli::command()
        .after_long_help(keys_help())
        .try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WimoError::io(dir, e))
}

pub fn run(cli: Cli) -> Result<Status> {
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| WimoError::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<Status> {
    match command {
        Command::Simulate {
            config,
            out,
            format,
        } => cmd_simulate(&config.load()?, &out, format),
        Command::Estimate {
            config,
            input,
            out,
            cache,
        } => cmd_estimate(config.load()?, &input, &out, cache.as_deref()),
        Command::Approx { config, theta, out } => cmd_approx(&config.load()?, theta, &out),
        Command::CheckTheory {
            config,
            inject_failure,
        } => cmd_check_theory(&config.load()?, inject_failure),
        Command::Bench {
            config,
            out,
            check,
            cache_dir,
        } => cmd_bench(&config.load()?, &out, check, cache_dir.as_deref()),
        Command::Sfmap { config, input, out } => cmd_sfmap(config.load()?, &input, &out),
    }
}

fn cmd_simulate(spec: &ExperimentSpec, out: &Path, format: SnapshotFormat) -> Result<Status> {
    spec.validate()?;
    create_dir(out)?;
    let snap = simulate(&spec.scenario(0.0)?, spec.sampling.seed)?;
    let (path, name) = match format {
        SnapshotFormat::Bin => (out.join("snapshots.wimo"), "wimo-snapshots"),
        SnapshotFormat::Csv => (out.join("snapshots.csv"), "csv"),
    };
    match format {
        SnapshotFormat::Bin => write_snapshots(&path, &snap)?,
        SnapshotFormat::Csv => write_snapshots_csv(&path, &snap)?,
    }
    let sidecar = Sidecar {
        format_version: SNAPSHOT_VERSION,
        format: name.to_string(),
        n_sensors: snap.n_sensors(),
        n_snapshots: snap.n_snapshots(),
        fs: snap.fs(),
        seed: spec.sampling.seed,
        config: serde_json::to_value(spec)?,
        generated_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    write_json(&sidecar_path(&path), &sidecar)?;
    println!(
        "wrote {} ({} sensors x {} snapshots at {} Hz)",
        path.display(),
        snap.n_sensors(),
        snap.n_snapshots(),
        snap.fs()
    );
    Ok(Status::Ok)
}

fn load_input(spec: &mut ExperimentSpec, input: &Path) -> Result<wimo_core::stcm::SnapshotMatrix> {
    let snap = load_snapshots(input)?;
    // the file's sampling rate is authoritative
    spec.sampling.fs = snap.fs();
    spec.sampling.snapshots = snap.n_snapshots();
    Ok(snap)
}

fn cmd_estimate(
    mut spec: ExperimentSpec,
    input: &Path,
    out: &Path,
    cache: Option<&Path>,
) -> Result<Status> {
    let snap = load_input(&mut spec, input)?;
    let prep = Prepared::new(&spec, cache)?;
    let est = estimate(&prep, &snap)?;
    create_dir(out)?;
    write_spectrum_csv(&out.join("spectrum.csv"), &est.spectrum)?;
    let report = EstimateReport::new(&est);
    write_json(&out.join("peaks.json"), &report)?;
    if let Some(map) = &est.ft_map {
        write_ft_csv(&out.join("ft_map.csv"), map)?;
    }
    let d = &est.diagnostics;
    match d.order {
        Some(o) => eprintln!(
            "method {} m={} L={}: P_MDL={}{} P={} eps_max(1)={} mB/fs={:.2}",
            report.method,
            report.m,
            d.dim,
            o.p_mdl,
            if o.mdl_empty {
                " (no source detected)"
            } else {
                ""
            },
            o.p,
            d.eps_max_one,
            d.decorrelation_ratio
        ),
        None => eprintln!(
            "method {} m={} L={}: eps_max(1)={} mB/fs={:.2}",
            report.method, report.m, d.dim, d.eps_max_one, d.decorrelation_ratio
        ),
    }
    println!("peaks: {}", describe_peaks(&est.peaks));
    Ok(Status::Ok)
}

#[derive(Debug, Serialize)]
struct ApproxReport {
    theta_deg: f64,
    center_hz: f64,
    bandwidth_hz: f64,
    m: usize,
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvalues_db: Vec<f64>,
    rank: usize,
    /// Rank of the summed model over the config's sources.
    eps_hat_sources: usize,
    eps_max: usize,
    bound: usize,
    decorrelation_ratio: f64,
    gsv_re: Vec<f64>,
    gsv_im: Vec<f64>,
}

fn cmd_approx(spec: &ExperimentSpec, theta: f64, out: &Path) -> Result<Status> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let assumption = spec.assumption();
    let (m, dt, tol) = (spec.estimator.m, spec.dt(), spec.estimator.rank_tol);
    let entry = ModalEntry::compute(&geometry, theta, 0.0, &assumption, m, dt)?;
    let (fc, b) = (assumption.center(), assumption.bandwidth());
    let thetas: Vec<f64> = spec
        .sources
        .iter()
        .map(|s| deg_to_rad(s.theta_deg))
        .collect();
    let top = entry.sigma[0];
    let report = ApproxReport {
        theta_deg: theta,
        center_hz: fc,
        bandwidth_hz: b,
        m,
        dim: entry.sigma.len(),
        eigenvalues_db: entry.sigma.iter().map(|s| db(s.max(top * 1e-30))).collect(),
        rank: wimo_core::approx::numerical_rank(&entry.sigma, tol),
        eigenvalues: entry.sigma.clone(),
        eps_hat_sources: effective_dim(&geometry, &thetas, 0.0, fc, b, m, dt, tol)?,
        eps_max: effective_dim_max(&geometry, thetas.len(), fc, b, m, dt, tol)?,
        bound: bass_ale_bound(thetas.len(), m, geometry.n_sensors())?,
        decorrelation_ratio: decorrelation_ratio(m, b, spec.sampling.fs),
        gsv_re: entry.gsv.iter().map(|z| z.re).collect(),
        gsv_im: entry.gsv.iter().map(|z| z.im).collect(),
    };
    create_dir(out)?;
    write_json(&out.join("approx.json"), &report)?;
    let shown: Vec<String> = report
        .eigenvalues_db
        .iter()
        .take(8)
        .map(|v| format!("{v:.1}"))
        .collect();
    println!(
        "theta {theta} deg: rank {} of {}, leading eigenvalues (dB) {}; eps_hat {} eps_max {} bound {}",
        report.rank,
        report.dim,
        shown.join(" "),
        report.eps_hat_sources,
        report.eps_max,
        report.bound
    );
    Ok(Status::Ok)
}

fn cmd_check_theory(spec: &ExperimentSpec, inject_failure: bool) -> Result<Status> {
    spec.validate()?;
    let opts = SuiteOptions {
        seed: spec.sampling.seed,
        injection: if inject_failure {
            Injection::Perturb
        } else {
            Injection::None
        },
        ..SuiteOptions::default()
    };
    let outcomes = run_suite(spec, &opts)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    Ok(if failed == 0 {
        Status::Ok
    } else {
        Status::ChecksFailed
    })
}

fn cmd_bench(
    spec: &ExperimentSpec,
    out: &Path,
    check: bool,
    cache_dir: Option<&Path>,
) -> Result<Status> {
    if let Some(dir) = cache_dir {
        create_dir(dir)?;
    }
    let res = run_bench(spec, cache_dir)?;
    create_dir(out)?;
    write_trials_csv(&out.join("trials.csv"), &res.trials)?;
    write_json(&out.join("summary.json"), &res.summary)?;
    write_json(&out.join("timing.json"), &res.timing)?;
    for p in &res.summary.points {
        let at = p.sweep_value.map_or(String::new(), |v| format!("{v}: "));
        match (p.resolution_probability, p.resolution_std) {
            (Some(prob), Some(std)) => println!(
                "{at}P(resolve) {prob:.3} +- {std:.3}, RMSE over resolved {} ({} of {} trials)",
                p.rmse_resolved_deg
                    .map_or("none".to_string(), |r| format!("{r:.3} deg")),
                p.resolved,
                p.trials
            ),
            _ => println!("{at}no trials"),
        }
    }
    if !check {
        return Ok(Status::Ok);
    }
    let failures = check_summary(spec, &res.summary);
    for f in &failures {
        println!("CHECK FAILED {f}");
    }
    Ok(if failures.is_empty() {
        Status::Ok
    } else {
        Status::ChecksFailed
    })
}

fn cmd_sfmap(mut spec: ExperimentSpec, input: &Path, out: &Path) -> Result<Status> {
    if !matches!(
        spec.method(),
        Method::SfCbf | Method::SfMvdr | Method::SfMusic
    ) {
        spec.estimator.method = crate::config::MethodName::SfCbf;
    }
    let snap = load_input(&mut spec, input)?;
    let prep = Prepared::new(&spec, None)?;
    let est = estimate(&prep, &snap)?;
    let map: &FtMap = est.ft_map.as_ref().expect("sf methods produce a map");
    create_dir(out)?;
    write_ft_csv(&out.join("ft_map.csv"), map)?;
    println!(
        "{} map: {} frequencies x {} directions",
        map.method.as_str(),
        map.freqs.len(),
        map.thetas_deg.len()
    );
    Ok(Status::Ok)
}
