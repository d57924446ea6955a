//! Synthetic community load profiles.
//!
//! Each customer draws
//! `shape(t) · (1 + noise_sd · (w · shared(t) + (1 − w) · own(t)))` kW,
//! minus a rooftop PV output, where `shared` is common to every customer of
//! the community (mixed with a per-load-type factor) and `own` belongs to the
//! customer. Both noises are unit-variance AR(1) processes with persistence
//! given per minute. Area profiles are sums over customers, converted to
//! injected current `(P − jQ) / V`.
//!
//! Every customer has its own ChaCha stream, so an area with `n` customers
//! is a prefix of the same area with more customers under the same seed.

use std::f64::consts::PI;

use dsse_core::complexstats::{empirical_correlation, LoadProfile};
use dsse_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Context, HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadType {
    #[default]
    Residential,
    Industrial,
}

impl LoadType {
    fn index(self) -> usize {
        match self {
            Self::Residential => 0,
            Self::Industrial => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySpec {
    pub n_areas: usize,
    pub customers_per_area: usize,
    /// Load type per area; empty means all residential.
    pub area_types: Vec<LoadType>,
    /// Daily shape sampled evenly over 24 h, replacing the built-in per-type shapes.
    pub base_profile: Option<Vec<f64>>,
    /// Standard deviation of the multiplicative noise, as a fraction of the shape.
    pub noise_sd: f64,
    /// Weight of the community-wide noise against the customer's own noise.
    pub common_component_weight: f64,
    /// Share of the common noise variance that is the same across load types.
    pub cross_type_coupling: f64,
    /// AR(1) coefficient per minute of the common noise.
    pub shared_persistence: f64,
    /// AR(1) coefficient per minute of each customer's own noise.
    pub idiosyncratic_persistence: f64,
    /// Standard deviation in hours of a per-area shift of the daily shape.
    pub shape_jitter_h: f64,
    /// Peak PV output as a fraction of twice the mean customer demand.
    pub pv_penetration: f64,
    pub power_factor: f64,
    pub mean_customer_kw: f64,
    pub nominal_voltage_v: f64,
    pub sample_interval_min: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        Self {
            n_areas: 2,
            customers_per_area: 10,
            area_types: Vec::new(),
            base_profile: None,
            noise_sd: 0.8,
            common_component_weight: 0.25,
            cross_type_coupling: 0.2,
            shared_persistence: 0.9,
            idiosyncratic_persistence: 0.98,
            shape_jitter_h: 0.0,
            pv_penetration: 0.15,
            power_factor: 0.95,
            mean_customer_kw: 1.0,
            nominal_voltage_v: 230.0,
            sample_interval_min: 30.0,
            samples: 48 * 28,
            seed: 1,
        }
    }
}

impl CommunitySpec {
    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(HarnessError::Input(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        if self.n_areas == 0 || self.customers_per_area == 0 {
            return Err(HarnessError::Input("community needs at least one area and one customer".into()));
        }
        if !self.area_types.is_empty() && self.area_types.len() != self.n_areas {
            return Err(HarnessError::Input(format!(
                "{} area types given for {} areas",
                self.area_types.len(),
                self.n_areas
            )));
        }
        fraction("common_component_weight", self.common_component_weight)?;
        fraction("cross_type_coupling", self.cross_type_coupling)?;
        if !(0.0..=0.25).contains(&self.pv_penetration) {
            return Err(HarnessError::Input(format!(
                "pv_penetration = {} is outside [0, 0.25]",
                self.pv_penetration
            )));
        }
        for (name, v) in [
            ("shared_persistence", self.shared_persistence),
            ("idiosyncratic_persistence", self.idiosyncratic_persistence),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(HarnessError::Input(format!("{name} = {v} is outside [0, 1)")));
            }
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(HarnessError::Input(format!("power_factor = {} is outside (0, 1]", self.power_factor)));
        }
        for (name, v) in [
            ("noise_sd", self.noise_sd),
            ("shape_jitter_h", self.shape_jitter_h),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HarnessError::Input(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        for (name, v) in [
            ("mean_customer_kw", self.mean_customer_kw),
            ("nominal_voltage_v", self.nominal_voltage_v),
            ("sample_interval_min", self.sample_interval_min),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Input(format!("{name} = {v} must be positive")));
            }
        }
        if self.samples < 2 {
            return Err(HarnessError::Input("at least two samples are needed".into()));
        }
        if let Some(shape) = &self.base_profile {
            if shape.is_empty() || shape.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(HarnessError::Input("base_profile needs finite non-negative values".into()));
            }
            if shape.iter().sum::<f64>() <= 0.0 {
                return Err(HarnessError::Input("base_profile is identically zero".into()));
            }
        }
        Ok(())
    }

    pub fn area_type(&self, area: usize) -> LoadType {
        self.area_types.get(area).copied().unwrap_or_default()
    }
}

fn circular_gauss(h: f64, centre: f64, width: f64) -> f64 {
    let d = (h - centre + 12.0).rem_euclid(24.0) - 12.0;
    (-(d / width).powi(2)).exp()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Built-in daily shape, unnormalised.
fn typical_shape(kind: LoadType, hour: f64) -> f64 {
    match kind {
        LoadType::Residential => {
            0.35 + 0.35 * circular_gauss(hour, 7.5, 1.5) + 0.6 * circular_gauss(hour, 19.0, 2.2)
        }
        LoadType::Industrial => {
            let h = hour.rem_euclid(24.0);
            0.3 + 0.7 * logistic(2.0 * (h - 7.0)) * logistic(-2.0 * (h - 17.0))
        }
    }
}

/// Daily shape with unit mean over the day.
struct DailyShape {
    points: Vec<f64>,
}

impl DailyShape {
    const RESOLUTION: usize = 1440;

    fn new(spec: &CommunitySpec, kind: LoadType) -> Self {
        let raw: Vec<f64> = (0..Self::RESOLUTION)
            .map(|k| {
                let hour = 24.0 * k as f64 / Self::RESOLUTION as f64;
                match &spec.base_profile {
                    Some(values) => interpolate(values, hour),
                    None => typical_shape(kind, hour),
                }
            })
            .collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Self {
            points: raw.into_iter().map(|v| v / mean).collect(),
        }
    }

    fn at(&self, hour: f64) -> f64 {
        let x = hour.rem_euclid(24.0) / 24.0 * Self::RESOLUTION as f64;
        let k = x.floor() as usize % Self::RESOLUTION;
        let f = x - x.floor();
        self.points[k] * (1.0 - f) + self.points[(k + 1) % Self::RESOLUTION] * f
    }
}

fn interpolate(values: &[f64], hour: f64) -> f64 {
    let n = values.len();
    let x = hour / 24.0 * n as f64;
    let k = x.floor() as usize % n;
    let f = x - x.floor();
    values[k] * (1.0 - f) + values[(k + 1) % n] * f
}

fn solar(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    if (6.0..18.0).contains(&h) {
        (PI * (h - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Unit-variance AR(1) series.
fn ar1(rng: &mut ChaCha8Rng, coefficient: f64, len: usize) -> Vec<f64> {
    let innovation = (1.0 - coefficient * coefficient).sqrt();
    let mut x: f64 = StandardNormal.sample(rng);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(x);
        let e: f64 = StandardNormal.sample(rng);
        x = coefficient * x + innovation * e;
    }
    out
}

const COMMON_STREAM: u64 = 1;
const CLOUD_STREAM: u64 = 2;
const TYPE_STREAM: u64 = 16;
const AREA_STREAM: u64 = 1 << 20;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn customer_stream(seed: u64, area: usize, customer: usize) -> ChaCha8Rng {
    stream(seed, ((area as u64 + 1) << 32) | customer as u64)
}

/// Area profiles of injected current in amperes.
pub fn gen_synthetic_profiles(spec: &CommunitySpec) -> Result<Vec<LoadProfile>> {
    spec.validate()?;
    let n = spec.samples;
    let per_sample = |persistence: f64| persistence.powf(spec.sample_interval_min);
    let shared_coef = per_sample(spec.shared_persistence);
    let own_coef = per_sample(spec.idiosyncratic_persistence);
    let hours: Vec<f64> = (0..n).map(|k| k as f64 * spec.sample_interval_min / 60.0).collect();

    let common = ar1(&mut stream(spec.seed, COMMON_STREAM), shared_coef, n);
    let by_type: Vec<Vec<f64>> = (0..2)
        .map(|t| {
            let own = ar1(&mut stream(spec.seed, TYPE_STREAM + t), shared_coef, n);
            let (a, b) = (spec.cross_type_coupling.sqrt(), (1.0 - spec.cross_type_coupling).sqrt());
            common.iter().zip(&own).map(|(c, o)| a * c + b * o).collect()
        })
        .collect();
    let clearness: Vec<f64> = ar1(&mut stream(spec.seed, CLOUD_STREAM), 0.98f64.powf(spec.sample_interval_min), n)
        .into_iter()
        .map(|g| 0.75 + 0.25 * g.tanh())
        .collect();
    let pv_peak = 2.0 * spec.pv_penetration * spec.mean_customer_kw;
    let tan_phi = spec.power_factor.acos().tan();
    let w = spec.common_component_weight;

    let mut profiles = Vec::with_capacity(spec.n_areas);
    for area in 0..spec.n_areas {
        let kind = spec.area_type(area);
        let shape = DailyShape::new(spec, kind);
        let shift = if spec.shape_jitter_h > 0.0 {
            let z: f64 = StandardNormal.sample(&mut stream(spec.seed, AREA_STREAM + area as u64));
            spec.shape_jitter_h * z
        } else {
            0.0
        };
        let shared = &by_type[kind.index()];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for customer in 0..spec.customers_per_area {
            let mut rng = customer_stream(spec.seed, area, customer);
            let own = ar1(&mut rng, own_coef, n);
            let own_q = ar1(&mut rng, own_coef, n);
            let pf_spread = 1.0 + 0.2 * (rng.random::<f64>() - 0.5);
            for k in 0..n {
                let level = shape.at(hours[k] + shift) * spec.mean_customer_kw;
                let demand = (level * (1.0 + spec.noise_sd * (w * shared[k] + (1.0 - w) * own[k]))).max(0.0);
                let reactive =
                    (demand * tan_phi * pf_spread + 0.5 * spec.noise_sd * level * tan_phi * own_q[k]).max(0.0);
                p[k] += demand - pv_peak * solar(hours[k]) * clearness[k];
                q[k] += reactive;
            }
        }
        let samples = p
            .iter()
            .zip(&q)
            .map(|(&p, &q)| Complex64::new(p, -q) * (1000.0 / spec.nominal_voltage_v))
            .collect();
        let id = format!("A{}", area + 1);
        profiles.push(
            LoadProfile::new(id.clone(), samples, spec.sample_interval_min).context(|| format!("profile {id}"))?,
        );
    }
    Ok(profiles)
}

/// Mean lag-0 correlation of the real parts over all area pairs.
pub fn mean_spatial_correlation(profiles: &[LoadProfile]) -> Result<f64> {
    if profiles.len() < 2 {
        return Err(HarnessError::Input("spatial correlation needs two areas".into()));
    }
    let series: Vec<Vec<f64>> = profiles.iter().map(LoadProfile::real_parts).collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            total += empirical_correlation(&series[a], &series[b], 0).context(|| "spatial correlation".into())?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Mean lag-1 autocorrelation of the real parts.
pub fn mean_lag1_correlation(profiles: &[LoadProfile]) -> Result<f64> {
    if profiles.is_empty() {
        return Err(HarnessError::Input("no profiles".into()));
    }
    let mut total = 0.0;
    for profile in profiles {
        let s = profile.real_parts();
        total += empirical_correlation(&s, &s, 1).context(|| format!("lag-1 correlation of {}", profile.area_id))?;
    }
    Ok(total / profiles.len() as f64)
}
