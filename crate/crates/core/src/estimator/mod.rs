//! Single-pass estimator: prior over injections from pseudo measurements and
//! the correlation matrix, one joint conditioning on every real measurement
//! of the window, then propagation to branch currents and bus voltages.
//!
//! The latent vector holds the stacked injections of the window followed by
//! the reference voltage of every step and phase. A real measurement of any
//! state kind is a linear image of that vector plus independent noise, so the
//! joint of latent and measurements is Gaussian and one conditioning gives
//! the posterior.
//!
//! [`Estimator::new`] does the work that does not depend on the data
//! (flow matrices, windowed correlation matrices); [`Estimator::estimate_window`]
//! runs per step.

mod angle;
mod measurements;
mod prior;
mod state;

use alloc::vec::Vec;

pub use angle::{pseudo_currents_from_power, AngleReference};
pub use measurements::{Measurement, MeasurementSet, MeasurementStep, StateKind, Target};
pub use prior::{build_prior, latent_prior, reference_prior, FALLBACK_PSEUDO_EPSILON};
pub use state::{
    composite_block, ibv_transform, magnitude_angle_variance, polar_variance, propagate_states,
    quality, quality_from_trace, state_polar_variance, StateEstimate,
};

use crate::cmcgd::condition_on_linear_observation;
use crate::complexstats::{sd_from_error, ComplexGaussian, CorrelationMatrix};
use crate::netmodel::{build_flow_matrices, FlowMatrices, RadialNetwork};
use crate::{CMatrix, CVector, Complex64, DsseError, Result};

pub const DEFAULT_WINDOW: usize = 3;
pub const MAX_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Spatial correlation only, one step.
    Cs,
    /// Spatial and temporal correlation over a rolling window.
    Cst,
}

/// Which states enter the quality index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum QualityScope {
    #[default]
    BusVoltages,
    AllStates,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub mode: Mode,
    /// Window length for [`Mode::Cst`]; ignored for [`Mode::Cs`].
    pub nt: usize,
    pub quality_scope: QualityScope,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Cst,
            nt: DEFAULT_WINDOW,
            quality_scope: QualityScope::BusVoltages,
        }
    }
}

impl EstimatorConfig {
    pub fn cs() -> Self {
        Self {
            mode: Mode::Cs,
            nt: 1,
            ..Self::default()
        }
    }

    pub fn cst(nt: usize) -> Self {
        Self {
            mode: Mode::Cst,
            nt,
            ..Self::default()
        }
    }

    /// Effective window length.
    pub fn window(&self) -> usize {
        match self.mode {
            Mode::Cs => 1,
            Mode::Cst => self.nt,
        }
    }
}

/// Real measurements of a window as `y = H z + e`.
struct Observations {
    h: CMatrix,
    values: CVector,
    /// Variances of the real and imaginary noise.
    noise: Vec<(f64, f64)>,
}

fn observations(net: &RadialNetwork, fm: &FlowMatrices, window: &[MeasurementStep]) -> Observations {
    let m = fm.state_len();
    let p = fm.phase_count();
    let nt = window.len();
    let l = (m + p) * nt;
    let one = Complex64::new(1.0, 0.0);
    let mut rows: Vec<CVector> = Vec::new();
    let mut values = Vec::new();
    let mut noise = Vec::new();
    for (k, step) in window.iter().enumerate() {
        for meas in step.real_measurements() {
            let t = meas.target;
            let mut row = CVector::zeros(l);
            let v0 = m * nt + k * p + t.phase;
            match net.state_index(t.bus, t.phase) {
                None => row[v0] = one,
                Some(s) => match t.kind {
                    StateKind::InjectedCurrent => row[k * m + s] = one,
                    StateKind::BranchCurrent => {
                        for j in 0..m {
                            row[k * m + j] = fm.bibc[(s, j)];
                        }
                    }
                    StateKind::BusVoltage => {
                        for j in 0..m {
                            row[k * m + j] = -fm.dlf[(s, j)];
                        }
                        row[v0] = one;
                    }
                },
            }
            let sd = sd_from_error(meas.value, meas.epsilon);
            rows.push(row);
            values.push(meas.value);
            noise.push((sd.re * sd.re, sd.im * sd.im));
        }
    }
    let h = CMatrix::from_fn(rows.len(), l, |i, j| rows[i][j]);
    Observations {
        h,
        values: CVector::from_vec(values),
        noise,
    }
}

/// Offline products for one network, correlation matrix and mode.
#[derive(Clone, Debug)]
pub struct Estimator {
    net: RadialNetwork,
    fm: FlowMatrices,
    config: EstimatorConfig,
    /// Correlation restricted to the last `w` steps, at index `w − 1`.
    cr_windows: Vec<CorrelationMatrix>,
}

impl Estimator {
    pub fn new(net: &RadialNetwork, cr: &CorrelationMatrix, config: EstimatorConfig) -> Result<Self> {
        let nt = config.window();
        if nt == 0 || nt > MAX_WINDOW {
            return Err(DsseError::InvalidInput(alloc::format!(
                "window length {nt} outside 1..={MAX_WINDOW}"
            )));
        }
        if cr.n_vars() != net.state_len() {
            return Err(DsseError::Dimension {
                context: "correlation variables",
                expected: net.state_len(),
                actual: cr.n_vars(),
            });
        }
        if cr.nt() < nt {
            return Err(DsseError::InvalidInput(alloc::format!(
                "correlation matrix spans {} steps, window needs {nt}",
                cr.nt()
            )));
        }
        if cr.min_eigenvalue() < -1e-10 {
            return Err(DsseError::NotPositiveSemidefinite {
                min_eigenvalue: cr.min_eigenvalue(),
            });
        }
        let cr_windows = (1..=nt).map(|w| cr.window(w)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            net: net.clone(),
            fm: build_flow_matrices(net),
            config,
            cr_windows,
        })
    }

    pub fn network(&self) -> &RadialNetwork {
        &self.net
    }

    pub fn flow_matrices(&self) -> &FlowMatrices {
        &self.fm
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    fn latent(&self, window: &[MeasurementStep]) -> Result<ComplexGaussian> {
        let w = window.len();
        if w == 0 || w > self.config.window() {
            return Err(DsseError::InvalidInput(alloc::format!(
                "window of {w} steps for an estimator with window length {}",
                self.config.window()
            )));
        }
        for (k, step) in window.iter().enumerate() {
            step.validate(&self.net, k)?;
        }
        let inj = build_prior(&self.net, window, &self.cr_windows[w - 1])?;
        latent_prior(&inj, &reference_prior(window)?)
    }

    fn finish(&self, latent: &ComplexGaussian, nt: usize, passes: usize) -> Result<StateEstimate> {
        let mut est = propagate_states(
            latent,
            &self.fm,
            nt,
            self.config.mode,
            self.net.base_voltage(),
            self.config.quality_scope,
        )?;
        est.conditioning_passes = passes;
        Ok(est)
    }

    /// Estimate for the last step of `window` (chronological, at most the
    /// configured window length; shorter windows use the matching truncated
    /// correlation matrix).
    pub fn estimate_window(&self, window: &[MeasurementStep]) -> Result<StateEstimate> {
        let latent = self.latent(window)?;
        let obs = observations(&self.net, &self.fm, window);
        let posterior = condition_on_linear_observation(&latent, &obs.h, &obs.noise, &obs.values)?;
        self.finish(&posterior, window.len(), 1)
    }

    /// Estimate at `step` of `set`, using the window that ends there.
    pub fn estimate(&self, set: &MeasurementSet, step: usize) -> Result<StateEstimate> {
        if step >= set.steps.len() {
            return Err(DsseError::InvalidInput(alloc::format!(
                "step {step} beyond a measurement set of {} steps",
                set.steps.len()
            )));
        }
        self.estimate_window(set.window_ending_at(step, self.config.window()))
    }

    /// The prior propagated to all states, ignoring real measurements.
    pub fn prior_estimate(&self, window: &[MeasurementStep]) -> Result<StateEstimate> {
        let latent = self.latent(window)?;
        self.finish(&latent, window.len(), 0)
    }
}

/// One-shot estimate at `step`; builds the offline products on every call.
pub fn estimate(
    net: &RadialNetwork,
    cr: &CorrelationMatrix,
    set: &MeasurementSet,
    step: usize,
    config: EstimatorConfig,
) -> Result<StateEstimate> {
    Estimator::new(net, cr, config)?.estimate(set, step)
}
