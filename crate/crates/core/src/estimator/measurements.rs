use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::netmodel::{BusId, RadialNetwork};
use crate::{Complex64, DsseError, Result};

/// Which section of the state vector a measurement refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateKind {
    InjectedCurrent,
    /// Current of the branch feeding `bus` from upstream.
    BranchCurrent,
    BusVoltage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target {
    pub kind: StateKind,
    pub bus: BusId,
    pub phase: usize,
}

impl Target {
    pub fn new(kind: StateKind, bus: BusId, phase: usize) -> Self {
        Self { kind, bus, phase }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub target: Target,
    pub value: Complex64,
    /// Error band in percent (three standard deviations).
    pub epsilon: f64,
    pub is_real: bool,
}

impl Measurement {
    pub fn real(target: Target, value: Complex64, epsilon: f64) -> Self {
        Self {
            target,
            value,
            epsilon,
            is_real: true,
        }
    }

    pub fn pseudo(bus: BusId, phase: usize, value: Complex64, epsilon: f64) -> Self {
        Self {
            target: Target::new(StateKind::InjectedCurrent, bus, phase),
            value,
            epsilon,
            is_real: false,
        }
    }
}

/// Everything known at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementStep {
    pub measurements: Vec<Measurement>,
    /// Reference-bus voltage, one entry per phase.
    pub vref: Vec<Complex64>,
    pub vref_epsilon: f64,
}

impl MeasurementStep {
    pub fn new(vref: Vec<Complex64>, vref_epsilon: f64) -> Self {
        Self {
            measurements: Vec::new(),
            vref,
            vref_epsilon,
        }
    }

    pub fn push(&mut self, m: Measurement) -> &mut Self {
        self.measurements.push(m);
        self
    }

    pub fn real_measurements(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| m.is_real)
    }

    pub fn pseudo_measurements(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.is_real)
    }

    /// Checks targets, error bands, duplicates and the reference voltage.
    /// `step` only labels error messages.
    pub fn validate(&self, net: &RadialNetwork, step: usize) -> Result<()> {
        if self.vref.len() != net.phase_count() {
            return Err(DsseError::Dimension {
                context: "reference voltage phases",
                expected: net.phase_count(),
                actual: self.vref.len(),
            });
        }
        if !(self.vref_epsilon.is_finite() && self.vref_epsilon >= 0.0) {
            return Err(DsseError::InvalidInput(format!(
                "step {step}: reference voltage error band {} is invalid",
                self.vref_epsilon
            )));
        }
        let mut seen = BTreeSet::new();
        for m in &self.measurements {
            let t = m.target;
            if !(m.epsilon.is_finite() && m.epsilon >= 0.0) {
                return Err(DsseError::InvalidInput(format!(
                    "step {step}: measurement at bus {} has error band {}",
                    t.bus, m.epsilon
                )));
            }
            if !(m.value.re.is_finite() && m.value.im.is_finite()) {
                return Err(DsseError::InvalidInput(format!(
                    "step {step}: measurement at bus {} is not finite",
                    t.bus
                )));
            }
            if !m.is_real && t.kind != StateKind::InjectedCurrent {
                return Err(DsseError::InvalidInput(format!(
                    "step {step}: pseudo measurement at bus {} must be an injected current",
                    t.bus
                )));
            }
            let on_reference = t.bus == net.reference_bus();
            let known = if on_reference {
                t.kind == StateKind::BusVoltage && t.phase < net.phase_count()
            } else {
                net.state_index(t.bus, t.phase).is_some()
            };
            if !known {
                return Err(DsseError::InvalidInput(format!(
                    "step {step}: no {:?} state at bus {} phase {}",
                    t.kind, t.bus, t.phase
                )));
            }
            if !seen.insert((t, m.is_real)) {
                return Err(DsseError::InvalidInput(format!(
                    "step {step}: duplicate {} measurement of {:?} at bus {} phase {}",
                    if m.is_real { "real" } else { "pseudo" },
                    t.kind,
                    t.bus,
                    t.phase
                )));
            }
        }
        Ok(())
    }
}

/// A sequence of measurement steps in chronological order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementSet {
    pub steps: Vec<MeasurementStep>,
}

impl MeasurementSet {
    pub fn new(steps: Vec<MeasurementStep>) -> Self {
        Self { steps }
    }

    pub fn validate(&self, net: &RadialNetwork) -> Result<()> {
        self.steps
            .iter()
            .enumerate()
            .try_for_each(|(k, s)| s.validate(net, k))
    }

    /// The `len` steps ending at `step` (inclusive), or fewer at the start of the set.
    pub fn window_ending_at(&self, step: usize, len: usize) -> &[MeasurementStep] {
        let end = (step + 1).min(self.steps.len());
        let start = end.saturating_sub(len);
        &self.steps[start..end]
    }
}
