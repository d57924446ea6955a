use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dsse::bench::{run_bench, write_bench_csv};
use dsse::error::Context;
use dsse::generator::{gen_synthetic_profiles, CommunitySpec};
use dsse::io;
use dsse::networks::{bundled, CaseStudy, BUNDLED};
use dsse::scenario::{
    cmcgd_state_rows, embed_correlation, wls_state_rows, Method, NetworkSource, Scenario, ScenarioConfig,
};
use dsse::{HarnessError, Result};
use dsse_core::complexstats::{cr_from_profiles, nearest_pd_correlation, CorrelationMatrix};
use dsse_core::estimator::{Estimator, EstimatorConfig};
use dsse_core::netmodel::perturb_rx_ratio;
use dsse_core::wls::{WlsEstimator, WlsOptions};

#[derive(Parser)]
#[command(name = "dsse", version, about = "Distribution system state estimation by complex Gaussian conditioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Wls,
    Cs,
    Cst,
}

impl From<ModeArg> for Method {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Wls => Method::Wls,
            ModeArg::Cs => Method::Cs,
            ModeArg::Cst => Method::Cst,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic load profiles from a community spec.
    GenData {
        /// CommunitySpec JSON; built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write one `<id>_re,<id>_im` file instead of separate real and imaginary files.
        #[arg(long)]
        paired: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build a correlation matrix from load profiles.
    Corr {
        /// Paired profile CSV, or the real-part CSV when `--imag` is given.
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        imag: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        interval_min: f64,
        #[arg(long, default_value_t = 3)]
        nt: usize,
        /// Repair an indefinite matrix to the nearest correlation matrix.
        #[arg(long)]
        nearest_pd: bool,
        /// Spread the profiles over the loads of this network, in load order.
        #[arg(long)]
        network: Option<String>,
        #[arg(long, default_value = "out/correlation.csv")]
        out: PathBuf,
    },
    /// Estimate the states of one step from a network, correlation matrix and measurements.
    Estimate {
        /// Bundled network name or network JSON.
        #[arg(long)]
        network: String,
        /// Correlation CSV; uncorrelated when omitted.
        #[arg(long)]
        corr: Option<PathBuf>,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, value_enum, default_value = "cst")]
        mode: ModeArg,
        #[arg(long, default_value_t = 3)]
        nt: usize,
        /// One-based step; the last one when omitted.
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        rx_scale: f64,
        /// Add the full posterior covariance and pseudo-covariance to the JSON.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario and write its metrics report and per-state estimates.
    RunScenario {
        /// ScenarioConfig JSON; the six-bus defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        network: Option<String>,
        #[arg(long, value_enum)]
        mode: Vec<ModeArg>,
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rx_scale: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time the estimators on bundled networks.
    Bench {
        #[arg(long)]
        network: Vec<String>,
        #[arg(long, value_enum)]
        mode: Vec<ModeArg>,
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 11)]
        runs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn network_source(arg: &str) -> NetworkSource {
    if BUNDLED.contains(&arg) {
        NetworkSource::Bundled(arg.to_string())
    } else {
        NetworkSource::File(PathBuf::from(arg))
    }
}

fn load_case(arg: &str) -> Result<CaseStudy> {
    match network_source(arg) {
        NetworkSource::Bundled(name) => bundled(&name),
        NetworkSource::File(path) => io::read_case(&path),
    }
}

fn gen_data(spec: Option<PathBuf>, seed: Option<u64>, paired: bool, out: &Path) -> Result<()> {
    let mut spec: CommunitySpec = match spec {
        Some(path) => io::read_json(&path)?,
        None => CommunitySpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let profiles = gen_synthetic_profiles(&spec)?;
    if paired {
        io::write_profiles_paired(&out.join("profiles.csv"), &profiles)?;
    } else {
        io::write_profiles_split(&out.join("profiles_re.csv"), &out.join("profiles_im.csv"), &profiles)?;
    }
    println!("{} profiles of {} samples written to {}", profiles.len(), spec.samples, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn corr(
    profiles: &Path,
    imag: Option<PathBuf>,
    interval_min: f64,
    nt: usize,
    nearest_pd: bool,
    network: Option<String>,
    out: &Path,
) -> Result<()> {
    let profiles = match imag {
        Some(imag) => io::read_profiles_split(profiles, &imag, interval_min)?,
        None => io::read_profiles_paired(profiles, interval_min)?,
    };
    let mut cr = cr_from_profiles(&profiles, nt).context(|| "correlation from profiles".into())?;
    if cr.min_eigenvalue() < -1e-10 {
        if !nearest_pd {
            return Err(HarnessError::Input(format!(
                "correlation matrix is indefinite (min eigenvalue {:e}); rerun with --nearest-pd",
                cr.min_eigenvalue()
            )));
        }
        cr = nearest_pd_correlation(&cr);
    }
    if let Some(net) = network {
        let case = load_case(&net)?;
        if case.loads.len() != profiles.len() {
            return Err(HarnessError::Input(format!(
                "{} profiles for {} loads of {}",
                profiles.len(),
                case.loads.len(),
                case.name
            )));
        }
        let states = case.loads.iter().map(|l| case.state_of(l)).collect::<Result<Vec<_>>>()?;
        cr = embed_correlation(&cr, &states, case.network.state_len())?;
    }
    io::write_correlation(out, &cr)?;
    println!(
        "correlation over {} variables and {} steps written to {}",
        cr.n_vars(),
        cr.nt(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    network: &str,
    corr: Option<PathBuf>,
    measurements: &Path,
    mode: Method,
    nt: usize,
    step: Option<usize>,
    rx_scale: f64,
    full: bool,
    out: &Path,
) -> Result<()> {
    let mut case = load_case(network)?;
    if rx_scale != 1.0 {
        case.network = perturb_rx_ratio(&case.network, rx_scale).context(|| format!("rx_scale {rx_scale}"))?;
    }
    let net = &case.network;
    let set = io::read_measurements(measurements)?;
    let steps = set.steps.len();
    if steps == 0 {
        return Err(HarnessError::Input(format!("{} has no steps", measurements.display())));
    }
    let step = match step {
        None => steps,
        Some(k) if (1..=steps).contains(&k) => k,
        Some(k) => return Err(HarnessError::Input(format!("step {k} outside 1..={steps}"))),
    };
    match mode {
        Method::Wls => {
            let wls = WlsEstimator::new(net, WlsOptions::default()).context(|| "WLS setup".into())?;
            let res = wls.estimate(&set.steps[step - 1]).context(|| format!("WLS at step {step}"))?;
            if !res.converged {
                return Err(HarnessError::Core {
                    context: format!("WLS at step {step}"),
                    source: dsse_core::DsseError::NotConverged(format!("{} iterations", res.iterations)),
                });
            }
            let rows = wls_state_rows(net, step, &res);
            io::write_state_rows(&out.join("estimate.csv"), &rows)?;
            io::write_json(
                &out.join("estimate.json"),
                &serde_json::json!({
                    "mode": "WLS",
                    "quality": res.quality,
                    "iterations": res.iterations,
                    "states": rows,
                }),
            )?;
            println!("WLS: {} iterations, quality {:.3}", res.iterations, res.quality);
        }
        Method::Cs | Method::Cst => {
            let config = if mode == Method::Cs {
                EstimatorConfig::cs()
            } else {
                EstimatorConfig::cst(nt)
            };
            let cr = match corr {
                Some(path) => io::read_correlation(&path)?,
                None => CorrelationMatrix::identity(net.state_len(), config.window()),
            };
            let est = Estimator::new(net, &cr, config).context(|| format!("{} setup", mode.name()))?;
            let res = est.estimate(&set, step - 1).context(|| format!("{} at step {step}", mode.name()))?;
            let rows = cmcgd_state_rows(net, mode, step, &res);
            io::write_state_rows(&out.join("estimate.csv"), &rows)?;
            io::write_estimate_json(&out.join("estimate.json"), &res, &rows, est.flow_matrices(), full)?;
            println!("{}: window {}, quality {:.3}", mode.name(), res.nt, res.quality);
        }
    }
    println!("estimate written to {}", out.display());
    Ok(())
}

struct Overrides {
    network: Option<String>,
    modes: Vec<ModeArg>,
    nt: Option<usize>,
    seed: Option<u64>,
    rx_scale: Option<f64>,
}

impl Overrides {
    fn apply(self, cfg: &mut ScenarioConfig) {
        if let Some(net) = self.network {
            cfg.network = network_source(&net);
        }
        if !self.modes.is_empty() {
            cfg.modes = self.modes.into_iter().map(Method::from).collect();
        }
        if let Some(nt) = self.nt {
            cfg.nt = nt;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(rx) = self.rx_scale {
            cfg.rx_scale = rx;
        }
    }
}

fn run_scenario(config: Option<PathBuf>, overrides: Overrides, out: &Path) -> Result<()> {
    let mut cfg: ScenarioConfig = match config {
        Some(path) => io::read_json(&path)?,
        None => ScenarioConfig::default(),
    };
    overrides.apply(&mut cfg);
    let scenario = Scenario::build(&cfg)?;
    let output = scenario.run()?;
    io::write_measurements(&out.join("measurements.json"), &scenario.measurements)?;
    io::write_metrics_csv(&out.join("metrics.csv"), &output.report)?;
    io::write_metrics_json(&out.join("metrics.json"), &output.report)?;
    io::write_state_rows(&out.join("states.csv"), &output.states)?;
    println!("{:<4} {:>4} {:>8} {:>9} {:>9} {:>8} {:>10}", "mode", "step", "AMVE %", "AAVE deg", "quality", "iter", "time s");
    for r in &output.report.rows {
        println!(
            "{:<4} {:>4} {:>8.3} {:>9.4} {:>9.3} {:>8} {:>10.4}",
            r.mode.name(),
            r.step,
            r.errors.amve_pct,
            r.errors.aave_deg,
            r.quality,
            r.iterations,
            r.time_s
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn bench(
    networks: Vec<String>,
    modes: Vec<ModeArg>,
    nt: Option<usize>,
    seed: Option<u64>,
    runs: usize,
    out: &Path,
) -> Result<()> {
    let networks = if networks.is_empty() {
        vec!["six-bus".into(), "ieee123".into(), "lv23".into()]
    } else {
        networks
    };
    let mut cfg = ScenarioConfig {
        timing_runs: runs,
        ..ScenarioConfig::default()
    };
    Overrides {
        network: None,
        modes,
        nt,
        seed,
        rx_scale: None,
    }
    .apply(&mut cfg);
    let rows = run_bench(&networks, &cfg)?;
    write_bench_csv(&out.join("bench.csv"), &rows)?;
    println!("{:<10} {:<4} {:>7} {:>12} {:>5}", "case", "mode", "states", "time s", "iter");
    for r in &rows {
        println!("{:<10} {:<4} {:>7} {:>12.6} {:>5}", r.case, r.mode.name(), r.states, r.time_s, r.iterations);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            spec,
            seed,
            paired,
            out,
        } => gen_data(spec, seed, paired, &out),
        Command::Corr {
            profiles,
            imag,
            interval_min,
            nt,
            nearest_pd,
            network,
            out,
        } => corr(&profiles, imag, interval_min, nt, nearest_pd, network, &out),
        Command::Estimate {
            network,
            corr,
            measurements,
            mode,
            nt,
            step,
            rx_scale,
            full,
            out,
        } => estimate(&network, corr, &measurements, mode.into(), nt, step, rx_scale, full, &out),
        Command::RunScenario {
            config,
            network,
            mode,
            nt,
            seed,
            rx_scale,
            out,
        } => run_scenario(
            config,
            Overrides {
                network,
                modes: mode,
                nt,
                seed,
                rx_scale,
            },
            &out,
        ),
        Command::Bench {
            network,
            mode,
            nt,
            seed,
            runs,
            out,
        } => bench(network, mode, nt, seed, runs, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
