//! Case-study runs: truth from scaled nominal loads, noisy meters, nominal
//! pseudo measurements, and one estimate per requested method and step.

use std::path::PathBuf;
use std::time::Instant;

use dsse_core::complexstats::{cr_from_profiles, sd_from_error, CorrelationMatrix, LoadProfile};
use dsse_core::estimator::{
    Estimator, EstimatorConfig, Measurement, MeasurementSet, MeasurementStep, StateEstimate, StateKind, Target,
};
use dsse_core::netmodel::{
    build_flow_matrices, direct_power_flow, perturb_rx_ratio, BusId, FlowMatrices,
    RadialNetwork,
};
use dsse_core::wls::{WlsEstimator, WlsOptions, WlsResult};
use dsse_core::{estimator, CVector, Complex64};
use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Context, HarnessError, Result};
use crate::generator::{gen_synthetic_profiles, CommunitySpec, LoadType};
use crate::metrics::{error_metrics, ErrorMetrics};
use crate::networks::{bundled, CaseStudy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wls,
    Cs,
    Cst,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Wls => "WLS",
            Self::Cs => "CS",
            Self::Cst => "CST",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSource {
    Bundled(String),
    /// Network JSON with loads and meters.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationSource {
    /// One synthetic area per loaded state; `n_areas` and `area_types` are
    /// taken from the network and `seed` from the scenario.
    Generated(CommunitySpec),
    /// Correlation CSV over every state of the network.
    File(PathBuf),
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    Injection,
    Branch,
    Voltage,
}

impl From<MeterKind> for StateKind {
    fn from(kind: MeterKind) -> Self {
        match kind {
            MeterKind::Injection => StateKind::InjectedCurrent,
            MeterKind::Branch => StateKind::BranchCurrent,
            MeterKind::Voltage => StateKind::BusVoltage,
        }
    }
}

impl From<StateKind> for MeterKind {
    fn from(kind: StateKind) -> Self {
        match kind {
            StateKind::InjectedCurrent => MeterKind::Injection,
            StateKind::BranchCurrent => MeterKind::Branch,
            StateKind::BusVoltage => MeterKind::Voltage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterSpec {
    pub kind: MeterKind,
    pub bus: u32,
    #[serde(default)]
    pub phase: usize,
}

impl From<MeterSpec> for Target {
    fn from(m: MeterSpec) -> Self {
        Target::new(m.kind.into(), BusId(m.bus), m.phase)
    }
}

impl From<Target> for MeterSpec {
    fn from(t: Target) -> Self {
        Self {
            kind: t.kind.into(),
            bus: t.bus.0,
            phase: t.phase,
        }
    }
}

/// Generator settings for scenario correlation matrices: one-minute samples
/// over three days, own noise more persistent than the shared noise.
pub fn scenario_community() -> CommunitySpec {
    CommunitySpec {
        customers_per_area: 8,
        noise_sd: 1.0,
        common_component_weight: 0.5,
        cross_type_coupling: 0.9,
        shared_persistence: 0.9,
        idiosyncratic_persistence: 0.99,
        shape_jitter_h: 0.25,
        pv_penetration: 0.0,
        sample_interval_min: 1.0,
        samples: 3 * 1440,
        ..CommunitySpec::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkSource,
    pub correlation: CorrelationSource,
    /// Metered targets at every step; the network's own meters when absent.
    pub meters: Option<Vec<MeterSpec>>,
    /// Also meter the network's extra-measurement targets.
    pub extra_meters: bool,
    /// Fraction of nominal load at each step.
    pub loading: Vec<f64>,
    pub modes: Vec<Method>,
    pub nt: usize,
    pub epsilon_real: f64,
    pub epsilon_pseudo: f64,
    pub epsilon_vref: f64,
    pub rx_scale: f64,
    pub seed: u64,
    /// Weight WLS pseudo measurements with the spatial correlation.
    pub wls_correlated: bool,
    /// Repetitions of each timed estimator call; the median is reported.
    pub timing_runs: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            network: NetworkSource::Bundled("six-bus".into()),
            correlation: CorrelationSource::Generated(scenario_community()),
            meters: None,
            extra_meters: false,
            loading: vec![0.8, 0.6, 0.4],
            modes: vec![Method::Wls, Method::Cs, Method::Cst],
            nt: estimator::DEFAULT_WINDOW,
            epsilon_real: 3.0,
            epsilon_pseudo: 50.0,
            epsilon_vref: 3.0,
            rx_scale: 1.0,
            seed: 1,
            wls_correlated: false,
            timing_runs: 11,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loading.is_empty() || self.loading.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(HarnessError::Input("loading factors must be positive".into()));
        }
        if self.modes.is_empty() {
            return Err(HarnessError::Input("no estimation method requested".into()));
        }
        if self.nt == 0 || self.nt > estimator::MAX_WINDOW {
            return Err(HarnessError::Input(format!("nt = {} outside 1..={}", self.nt, estimator::MAX_WINDOW)));
        }
        for (name, v) in [
            ("epsilon_real", self.epsilon_real),
            ("epsilon_pseudo", self.epsilon_pseudo),
            ("epsilon_vref", self.epsilon_vref),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HarnessError::Input(format!("{name} = {v} must be non-negative")));
            }
        }
        if !(self.rx_scale > 0.0 && self.rx_scale.is_finite()) {
            return Err(HarnessError::Input(format!("rx_scale = {} must be positive", self.rx_scale)));
        }
        if self.timing_runs == 0 {
            return Err(HarnessError::Input("timing_runs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: Method,
    /// One-based step number.
    pub step: usize,
    pub loading: f64,
    #[serde(flatten)]
    pub errors: ErrorMetrics,
    pub quality: f64,
    pub time_s: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub case: String,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn row(&self, mode: Method, step: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.mode == mode && r.step == step)
    }

    pub fn amve(&self, mode: Method, step: usize) -> Option<f64> {
        self.row(mode, step).map(|r| r.errors.amve_pct)
    }

    /// Same report with every timing zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.time_s = 0.0;
        }
        out
    }
}

/// One state of an estimate, as written to the per-state CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub mode: Method,
    pub step: usize,
    /// Bus id; for a branch current, the downstream bus.
    pub id: u32,
    pub phase: usize,
    pub kind: MeterKind,
    pub mean_re: f64,
    pub mean_im: f64,
    pub var_mag: Option<f64>,
    pub var_ang: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub report: MetricsReport,
    pub states: Vec<StateRow>,
}

/// Everything a run needs, built once from a config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub case: CaseStudy,
    pub correlation: CorrelationMatrix,
    pub flow: FlowMatrices,
    pub vref: Vec<Complex64>,
    pub true_injections: Vec<CVector>,
    pub true_voltages: Vec<CVector>,
    pub measurements: MeasurementSet,
}

/// Places a correlation matrix over `states.len()` variables into one over
/// all `m` states; unlisted states are uncorrelated with unit variance.
pub fn embed_correlation(cr: &CorrelationMatrix, states: &[usize], m: usize) -> Result<CorrelationMatrix> {
    if states.len() != cr.n_vars() {
        return Err(HarnessError::Input(format!(
            "{} states for a correlation matrix over {} variables",
            states.len(),
            cr.n_vars()
        )));
    }
    let nt = cr.nt();
    let mut out = CorrelationMatrix::identity(m, nt).matrix().clone();
    let index = |q: bool, step: usize, var: usize, n: usize| (q as usize) * n * nt + step * n + var;
    let n = cr.n_vars();
    for qa in [false, true] {
        for qb in [false, true] {
            for a in 0..nt {
                for b in 0..nt {
                    for (u, &su) in states.iter().enumerate() {
                        for (v, &sv) in states.iter().enumerate() {
                            out[(index(qa, a, su, m), index(qb, b, sv, m))] =
                                cr.matrix()[(index(qa, a, u, n), index(qb, b, v, n))];
                        }
                    }
                }
            }
        }
    }
    CorrelationMatrix::new(nt, m, out).context(|| "embedded correlation matrix".into())
}

/// Synthetic correlation over the states of `case`.
pub fn generated_correlation(case: &CaseStudy, template: &CommunitySpec, nt: usize, seed: u64) -> Result<CorrelationMatrix> {
    if case.loads.is_empty() {
        return Ok(CorrelationMatrix::identity(case.network.state_len(), nt));
    }
    let mut states = Vec::with_capacity(case.loads.len());
    for load in &case.loads {
        let s = case.state_of(load)?;
        if states.contains(&s) {
            return Err(HarnessError::Input(format!(
                "two loads on bus {} phase {}",
                load.bus, load.phase
            )));
        }
        states.push(s);
    }
    let spec = CommunitySpec {
        n_areas: case.loads.len(),
        area_types: case.loads.iter().map(|l| l.load_type).collect(),
        seed,
        ..template.clone()
    };
    let vref = case.reference_voltage();
    let profiles: Vec<LoadProfile> = gen_synthetic_profiles(&spec)?
        .into_iter()
        .zip(&case.loads)
        .map(|(mut p, load)| {
            // Currents on other phases follow their phase voltage.
            let rot = vref[load.phase] / vref[load.phase].norm();
            for s in &mut p.samples {
                *s *= rot;
            }
            p
        })
        .collect();
    let cr = cr_from_profiles(&profiles, nt).context(|| "correlation of generated profiles".into())?;
    embed_correlation(&cr, &states, case.network.state_len())
}

fn noise_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d65_7465_725f_6e6f);
    rng.set_stream(step as u64 + 1);
    rng
}

fn noisy(rng: &mut ChaCha8Rng, truth: Complex64, epsilon: f64) -> Complex64 {
    let sd = sd_from_error(truth, epsilon);
    let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
    truth + Complex64::new(sd.re.abs() * a, sd.im.abs() * b)
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let case = match &config.network {
            NetworkSource::Bundled(name) => bundled(name)?,
            NetworkSource::File(path) => crate::io::read_case(path)?,
        };
        Self::from_case(case, config)
    }

    pub fn from_case(mut case: CaseStudy, config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        if config.rx_scale != 1.0 {
            case.network =
                perturb_rx_ratio(&case.network, config.rx_scale).context(|| format!("rx_scale {}", config.rx_scale))?;
        }
        let m = case.network.state_len();
        let correlation = match &config.correlation {
            CorrelationSource::Generated(spec) => generated_correlation(&case, spec, config.nt, config.seed)?,
            CorrelationSource::File(path) => crate::io::read_correlation(path)?,
            CorrelationSource::Identity => CorrelationMatrix::identity(m, config.nt),
        };
        if correlation.n_vars() != m {
            return Err(HarnessError::Input(format!(
                "correlation matrix covers {} variables, {} has {m} states",
                correlation.n_vars(),
                case.name
            )));
        }
        let flow = build_flow_matrices(&case.network);
        let vref = case.reference_voltage();
        let nominal = case.nominal_injections()?;

        let mut targets: Vec<Target> = match &config.meters {
            Some(list) => list.iter().map(|&m| m.into()).collect(),
            None => case.meters.clone(),
        };
        if config.extra_meters {
            targets.extend(case.extra_meters.iter().copied());
        }

        let mut true_injections = Vec::new();
        let mut true_voltages = Vec::new();
        let mut steps = Vec::new();
        for (k, &load) in config.loading.iter().enumerate() {
            let inj = &nominal * Complex64::new(load, 0.0);
            let (branch, voltages) =
                direct_power_flow(&flow, &inj, &vref).context(|| format!("truth at step {}", k + 1))?;
            let mut rng = noise_rng(config.seed, k);
            let mut step = MeasurementStep::new(vref.clone(), config.epsilon_vref);
            for bus in case.network.order() {
                if *bus == case.network.reference_bus() {
                    continue;
                }
                for phase in 0..case.network.phase_count() {
                    let s = case.network.state_index(*bus, phase).expect("ordered bus");
                    step.push(Measurement::pseudo(*bus, phase, nominal[s], config.epsilon_pseudo));
                }
            }
            for t in &targets {
                let truth = if t.kind == StateKind::BusVoltage && t.bus == case.network.reference_bus() {
                    vref.get(t.phase).copied()
                } else {
                    case.network.state_index(t.bus, t.phase).map(|s| match t.kind {
                        StateKind::InjectedCurrent => inj[s],
                        StateKind::BranchCurrent => branch[s],
                        StateKind::BusVoltage => voltages[s],
                    })
                };
                let truth = truth.ok_or_else(|| {
                    HarnessError::Input(format!("meter at bus {} phase {} is not in {}", t.bus, t.phase, case.name))
                })?;
                step.push(Measurement::real(*t, noisy(&mut rng, truth, config.epsilon_real), config.epsilon_real));
            }
            true_injections.push(inj);
            true_voltages.push(voltages);
            steps.push(step);
        }
        let measurements = MeasurementSet::new(steps);
        measurements
            .validate(&case.network)
            .context(|| format!("measurements of {}", case.name))?;
        Ok(Self {
            config: config.clone(),
            case,
            correlation,
            flow,
            vref,
            true_injections,
            true_voltages,
            measurements,
        })
    }

    pub fn steps(&self) -> usize {
        self.measurements.steps.len()
    }

    pub fn cmcgd_estimator(&self, method: Method) -> Result<Estimator> {
        let config = match method {
            Method::Cs => EstimatorConfig::cs(),
            Method::Cst => EstimatorConfig::cst(self.config.nt),
            Method::Wls => return Err(HarnessError::Input("WLS is not a CMCGD method".into())),
        };
        Estimator::new(&self.case.network, &self.correlation, config).context(|| format!("{} setup", method.name()))
    }

    pub fn wls_estimator(&self) -> Result<WlsEstimator> {
        let options = WlsOptions {
            correlation: self.config.wls_correlated.then(|| self.correlation.clone()),
            ..WlsOptions::default()
        };
        WlsEstimator::new(&self.case.network, options).context(|| "WLS setup".into())
    }

    pub fn run(&self) -> Result<ScenarioOutput> {
        let mut report = MetricsReport {
            case: self.case.name.clone(),
            rows: Vec::new(),
        };
        let mut states = Vec::new();
        for &method in &self.config.modes {
            match method {
                Method::Wls => {
                    let wls = self.wls_estimator()?;
                    for k in 0..self.steps() {
                        let ctx = || format!("WLS at step {}", k + 1);
                        let (res, time_s) =
                            timed(self.config.timing_runs, || wls.estimate(&self.measurements.steps[k]).context(ctx))?;
                        if !res.converged {
                            return Err(HarnessError::Core {
                                context: ctx(),
                                source: dsse_core::DsseError::NotConverged(format!(
                                    "{} iterations, last update {:e}",
                                    res.iterations, res.residual_norm
                                )),
                            });
                        }
                        let errors = self.errors(k, res.voltages.as_slice())?;
                        report.rows.push(self.row(method, k, errors, res.quality, time_s, res.iterations));
                        states.extend(wls_state_rows(&self.case.network, k + 1, &res));
                    }
                }
                Method::Cs | Method::Cst => {
                    let est = self.cmcgd_estimator(method)?;
                    for k in 0..self.steps() {
                        let ctx = || format!("{} at step {}", method.name(), k + 1);
                        let (res, time_s) =
                            timed(self.config.timing_runs, || est.estimate(&self.measurements, k).context(ctx))?;
                        let v = res.voltages(res.current_step());
                        let errors = self.errors(k, v.as_slice())?;
                        report.rows.push(self.row(method, k, errors, res.quality, time_s, res.iterations));
                        states.extend(cmcgd_state_rows(&self.case.network, method, k + 1, &res));
                    }
                }
            }
        }
        Ok(ScenarioOutput { report, states })
    }

    fn errors(&self, step: usize, estimated: &[Complex64]) -> Result<ErrorMetrics> {
        error_metrics(estimated, self.true_voltages[step].as_slice())
    }

    fn row(&self, mode: Method, k: usize, errors: ErrorMetrics, quality: f64, time_s: f64, iterations: usize) -> MetricsRow {
        MetricsRow {
            mode,
            step: k + 1,
            loading: self.config.loading[k],
            errors,
            quality,
            time_s,
            iterations,
        }
    }
}

/// (bus, phase) of every state in state order.
pub fn state_labels(net: &RadialNetwork) -> Vec<(u32, usize)> {
    net.order()
        .iter()
        .filter(|b| **b != net.reference_bus())
        .flat_map(|b| (0..net.phase_count()).map(move |p| (b.0, p)))
        .collect()
}

/// Every state of the last step of a CMCGD estimate.
pub fn cmcgd_state_rows(net: &RadialNetwork, mode: Method, step: usize, est: &StateEstimate) -> Vec<StateRow> {
    let current = est.current_step();
    let labels = state_labels(net);
    let mut rows = Vec::new();
    for kind in [StateKind::InjectedCurrent, StateKind::BranchCurrent, StateKind::BusVoltage] {
        for (s, &(id, phase)) in labels.iter().enumerate() {
            let i = est.index(kind, current, s);
            rows.push(StateRow {
                mode,
                step,
                id,
                phase,
                kind: kind.into(),
                mean_re: est.mu_ibv[i].re,
                mean_im: est.mu_ibv[i].im,
                var_mag: est.var_mag[i],
                var_ang: est.var_ang[i],
            });
        }
    }
    rows
}

/// Bus voltages of a WLS estimate with delta-method polar variances.
pub fn wls_state_rows(net: &RadialNetwork, step: usize, res: &WlsResult) -> Vec<StateRow> {
    let m = res.voltages.len();
    let base2 = net.base_voltage().powi(2);
    let cov = &res.voltage_covariance;
    state_labels(net)
        .into_iter()
        .enumerate()
        .map(|(s, (id, phase))| {
            let block = Matrix2::new(cov[(s, s)], cov[(s, m + s)], cov[(m + s, s)], cov[(m + s, m + s)]) * base2;
            let v = res.voltages[s];
            let var = estimator::polar_variance(v, &block);
            StateRow {
                mode: Method::Wls,
                step,
                id,
                phase,
                kind: MeterKind::Voltage,
                mean_re: v.re,
                mean_im: v.im,
                var_mag: var.map(|x| x.0),
                var_ang: var.map(|x| x.1),
            }
        })
        .collect()
}

/// Result of the first call and the median wall time over `runs` calls.
pub fn timed<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(runs);
    let start = Instant::now();
    let first = f()?;
    times.push(start.elapsed().as_secs_f64());
    for _ in 1..runs {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok((first, times[times.len() / 2]))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    Scenario::build(config)?.run()
}

/// Runs independent scenarios on all available cores; results keep the
/// order of `configs`. Timings measured this way share the machine.
pub fn run_scenarios(configs: &[ScenarioConfig]) -> Vec<Result<ScenarioOutput>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(configs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<ScenarioOutput>>> = (0..configs.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let out = run_scenario(cfg);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
            });
        }
    });
    results.into_iter().map(|r| r.expect("every index is claimed once")).collect()
}

/// Mean correlation between loaded states of the given types at lag 0 and
/// step 0, over distinct pairs.
pub fn mean_group_correlation(scenario: &Scenario, a: LoadType, b: LoadType) -> Option<f64> {
    let types = scenario.case.state_types().ok()?;
    let cr = &scenario.correlation;
    let mut total = 0.0;
    let mut count = 0;
    for (u, tu) in types.iter().enumerate() {
        for (v, tv) in types.iter().enumerate() {
            if u < v && ((*tu, *tv) == (Some(a), Some(b)) || (*tu, *tv) == (Some(b), Some(a))) {
                total += cr.matrix()[(cr.p_index(0, u), cr.p_index(0, v))];
                count += 1;
            }
        }
    }
    (count > 0).then(|| total / count as f64)
}
