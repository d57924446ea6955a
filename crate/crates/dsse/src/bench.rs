//! Wall-time table for the estimators on the bundled networks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::scenario::{timed, Method, NetworkSource, Scenario, ScenarioConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub case: String,
    pub mode: Method,
    pub states: usize,
    /// Median over the configured runs, at the last loading step.
    pub time_s: f64,
    pub iterations: usize,
}

/// Times every mode of `config` on each network. The network field of
/// `config` is replaced in turn.
pub fn run_bench(networks: &[String], config: &ScenarioConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for name in networks {
        let cfg = ScenarioConfig {
            network: NetworkSource::Bundled(name.clone()),
            ..config.clone()
        };
        rows.extend(bench_scenario(&Scenario::build(&cfg)?)?);
    }
    Ok(rows)
}

pub fn bench_scenario(scenario: &Scenario) -> Result<Vec<BenchRow>> {
    let runs = scenario.config.timing_runs;
    let last = scenario.steps() - 1;
    let states = scenario.case.network.state_len();
    let mut rows = Vec::new();
    for &mode in &scenario.config.modes {
        let (iterations, time_s) = match mode {
            Method::Wls => {
                let wls = scenario.wls_estimator()?;
                let step = &scenario.measurements.steps[last];
                timed(runs, || {
                    wls.estimate(step)
                        .map(|r| r.iterations)
                        .map_err(|source| HarnessError::Core {
                            context: "WLS".into(),
                            source,
                        })
                })?
            }
            Method::Cs | Method::Cst => {
                let est = scenario.cmcgd_estimator(mode)?;
                timed(runs, || {
                    est.estimate(&scenario.measurements, last)
                        .map(|r| r.iterations)
                        .map_err(|source| HarnessError::Core {
                            context: mode.name().into(),
                            source,
                        })
                })?
            }
        };
        rows.push(BenchRow {
            case: scenario.case.name.clone(),
            mode,
            states,
            time_s,
            iterations,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut text = String::from("case,mode,states,time_s,iterations\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{:.6},{}\n",
            r.case,
            r.mode.name(),
            r.states,
            r.time_s,
            r.iterations
        ));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
