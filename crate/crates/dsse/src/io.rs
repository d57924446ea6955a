//! File formats: network JSON and branch CSV, load profile CSV, correlation
//! CSV, measurement JSON, estimate and metrics output.

use std::fs;
use std::path::Path;

use dsse_core::complexstats::{CorrelationMatrix, LoadProfile};
use dsse_core::estimator::{Measurement, MeasurementSet, MeasurementStep, StateEstimate, Target};
use dsse_core::netmodel::{Branch, Bus, BusId, FlowMatrices, RadialNetwork};
use dsse_core::{CMatrix, Complex64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Context, HarnessError, Result};
use crate::generator::LoadType;
use crate::networks::{CaseStudy, Load};
use crate::scenario::{MeterSpec, MetricsReport, StateRow};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| HarnessError::parse(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::parse(path.display().to_string(), e))?;
    write_text(path, &text)
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::parse(path.display().to_string(), e)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

// ---------------------------------------------------------------------------
// Networks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusFile {
    pub id: u32,
    /// Defaults to the network phase count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchFile {
    pub from: u32,
    pub to: u32,
    /// Ohms, `phase_count × phase_count`.
    pub resistance: Vec<Vec<f64>>,
    pub reactance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadFile {
    pub bus: u32,
    #[serde(default)]
    pub phase: usize,
    /// Nominal current `[re, im]` in amperes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<[f64; 2]>,
    /// Nominal `[kW, kvar]`, converted at the nominal phase voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_kw: Option<[f64; 2]>,
    #[serde(default, rename = "type")]
    pub load_type: LoadType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default)]
    pub name: String,
    pub buses: Vec<BusFile>,
    pub branches: Vec<BranchFile>,
    pub reference_bus: u32,
    pub base_voltage_v: f64,
    pub phase_count: usize,
    #[serde(default)]
    pub loads: Vec<LoadFile>,
    #[serde(default)]
    pub meters: Vec<MeterSpec>,
    #[serde(default)]
    pub extra_meters: Vec<MeterSpec>,
}

fn impedance(context: &str, r: &[Vec<f64>], x: &[Vec<f64>], p: usize) -> Result<CMatrix> {
    let shape_ok = |m: &[Vec<f64>]| m.len() == p && m.iter().all(|row| row.len() == p);
    if !shape_ok(r) || !shape_ok(x) {
        return Err(HarnessError::Input(format!("{context}: impedance matrices must be {p}x{p}")));
    }
    Ok(CMatrix::from_fn(p, p, |i, j| Complex64::new(r[i][j], x[i][j])))
}

impl NetworkFile {
    pub fn into_case(self) -> Result<CaseStudy> {
        let p = self.phase_count;
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                id: BusId(b.id),
                phase_count: b.phases.unwrap_or(p),
            })
            .collect();
        let branches = self
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    from: BusId(b.from),
                    to: BusId(b.to),
                    impedance: impedance(&format!("branch {}->{}", b.from, b.to), &b.resistance, &b.reactance, p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let network = RadialNetwork::new(buses, branches, BusId(self.reference_bus), self.base_voltage_v)
            .context(|| "network file".into())?;
        let mut case = CaseStudy {
            name: if self.name.is_empty() { "network".into() } else { self.name },
            network,
            loads: Vec::new(),
            meters: self.meters.iter().map(|&m| m.into()).collect(),
            extra_meters: self.extra_meters.iter().map(|&m| m.into()).collect(),
        };
        let vref = case.reference_voltage();
        for l in &self.loads {
            let current = match (l.current, l.power_kw) {
                (Some([re, im]), None) => Complex64::new(re, im),
                (None, Some([kw, kvar])) => {
                    let v = vref.get(l.phase).copied().unwrap_or(vref[0]);
                    (Complex64::new(kw, kvar) * 1000.0 / v).conj()
                }
                _ => {
                    return Err(HarnessError::Input(format!(
                        "load at bus {} needs exactly one of current and power_kw",
                        l.bus
                    )))
                }
            };
            let load = Load {
                bus: BusId(l.bus),
                phase: l.phase,
                current,
                load_type: l.load_type,
            };
            case.state_of(&load)?;
            case.loads.push(load);
        }
        Ok(case)
    }

    pub fn from_case(case: &CaseStudy) -> Self {
        let net = &case.network;
        let part = |z: &CMatrix, f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..z.nrows()).map(|i| (0..z.ncols()).map(|j| f(&z[(i, j)])).collect()).collect()
        };
        Self {
            name: case.name.clone(),
            buses: net
                .buses()
                .iter()
                .map(|b| BusFile {
                    id: b.id.0,
                    phases: None,
                })
                .collect(),
            branches: net
                .branches()
                .iter()
                .map(|b| BranchFile {
                    from: b.from.0,
                    to: b.to.0,
                    resistance: part(&b.impedance, |z| z.re),
                    reactance: part(&b.impedance, |z| z.im),
                })
                .collect(),
            reference_bus: net.reference_bus().0,
            base_voltage_v: net.base_voltage(),
            phase_count: net.phase_count(),
            loads: case
                .loads
                .iter()
                .map(|l| LoadFile {
                    bus: l.bus.0,
                    phase: l.phase,
                    current: Some([l.current.re, l.current.im]),
                    power_kw: None,
                    load_type: l.load_type,
                })
                .collect(),
            meters: case.meters.iter().map(|&t| t.into()).collect(),
            extra_meters: case.extra_meters.iter().map(|&t| t.into()).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct BranchRow {
    from: u32,
    to: u32,
    r_ohm: f64,
    x_ohm: f64,
}

/// Single-phase branch list with header `from,to,r_ohm,x_ohm`. The
/// reference bus defaults to the `from` bus of the first row.
pub fn read_branch_csv(path: &Path, reference: Option<u32>, base_voltage_v: f64) -> Result<CaseStudy> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows = reader
        .deserialize::<BranchRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    let first = rows
        .first()
        .ok_or_else(|| HarnessError::parse(path.display().to_string(), "no branches"))?;
    let reference = reference.unwrap_or(first.from);
    let mut ids: Vec<u32> = rows.iter().flat_map(|r| [r.from, r.to]).collect();
    ids.sort_unstable();
    ids.dedup();
    let file = NetworkFile {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        buses: ids.into_iter().map(|id| BusFile { id, phases: None }).collect(),
        branches: rows
            .iter()
            .map(|r| BranchFile {
                from: r.from,
                to: r.to,
                resistance: vec![vec![r.r_ohm]],
                reactance: vec![vec![r.x_ohm]],
            })
            .collect(),
        reference_bus: reference,
        base_voltage_v,
        phase_count: 1,
        loads: Vec::new(),
        meters: Vec::new(),
        extra_meters: Vec::new(),
    };
    file.into_case()
}

pub fn read_case(path: &Path) -> Result<CaseStudy> {
    read_json::<NetworkFile>(path)?.into_case()
}

pub fn write_case(path: &Path, case: &CaseStudy) -> Result<()> {
    write_json(path, &NetworkFile::from_case(case))
}

// ---------------------------------------------------------------------------
// Load profiles

fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                HarnessError::parse(
                    format!("{} row {}", path.display(), line + 2),
                    format!("{field:?} is not a number"),
                )
            })?;
            columns[col].push(v);
        }
    }
    Ok((header, columns))
}

fn profiles_from(ids: Vec<String>, re: Vec<Vec<f64>>, im: Vec<Vec<f64>>, interval_min: f64) -> Result<Vec<LoadProfile>> {
    ids.into_iter()
        .zip(re.into_iter().zip(im))
        .map(|(id, (re, im))| {
            if re.len() != im.len() {
                return Err(HarnessError::Input(format!("area {id}: real and imaginary series differ in length")));
            }
            let samples = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            LoadProfile::new(id.clone(), samples, interval_min).context(|| format!("profile {id}"))
        })
        .collect()
}

/// Real and imaginary parts in two files with matching area headers.
pub fn read_profiles_split(real: &Path, imag: &Path, interval_min: f64) -> Result<Vec<LoadProfile>> {
    let (ids, re) = read_columns(real)?;
    let (ids_im, im) = read_columns(imag)?;
    if ids != ids_im {
        return Err(HarnessError::Input(format!(
            "{} and {} have different area headers",
            real.display(),
            imag.display()
        )));
    }
    profiles_from(ids, re, im, interval_min)
}

/// One file with `<id>_re,<id>_im` column pairs.
pub fn read_profiles_paired(path: &Path, interval_min: f64) -> Result<Vec<LoadProfile>> {
    let (header, mut columns) = read_columns(path)?;
    if header.len() % 2 != 0 {
        return Err(HarnessError::parse(path.display().to_string(), "expected column pairs"));
    }
    let mut ids = Vec::new();
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for (k, pair) in header.chunks(2).enumerate() {
        let id = pair[0].strip_suffix("_re");
        if id.is_none() || pair[1].strip_suffix("_im") != id {
            return Err(HarnessError::parse(
                path.display().to_string(),
                format!("columns {:?}, {:?} are not an <id>_re, <id>_im pair", pair[0], pair[1]),
            ));
        }
        ids.push(id.unwrap_or_default().to_string());
        re.push(std::mem::take(&mut columns[2 * k]));
        im.push(std::mem::take(&mut columns[2 * k + 1]));
    }
    profiles_from(ids, re, im, interval_min)
}

fn write_columns(path: &Path, header: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    let rows = columns.first().map_or(0, Vec::len);
    for k in 0..rows {
        w.write_record(columns.iter().map(|c| c[k].to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_profiles_split(real: &Path, imag: &Path, profiles: &[LoadProfile]) -> Result<()> {
    let ids: Vec<String> = profiles.iter().map(|p| p.area_id.clone()).collect();
    write_columns(real, &ids, &profiles.iter().map(LoadProfile::real_parts).collect::<Vec<_>>())?;
    write_columns(imag, &ids, &profiles.iter().map(LoadProfile::imag_parts).collect::<Vec<_>>())
}

pub fn write_profiles_paired(path: &Path, profiles: &[LoadProfile]) -> Result<()> {
    let mut header = Vec::new();
    let mut columns = Vec::new();
    for p in profiles {
        header.push(format!("{}_re", p.area_id));
        header.push(format!("{}_im", p.area_id));
        columns.push(p.real_parts());
        columns.push(p.imag_parts());
    }
    write_columns(path, &header, &columns)
}

// ---------------------------------------------------------------------------
// Correlation matrices

/// A `# nt=<steps> n_vars=<variables>` line followed by the matrix rows.
pub fn write_correlation(path: &Path, cr: &CorrelationMatrix) -> Result<()> {
    let mut text = format!("# nt={} n_vars={}\n", cr.nt(), cr.n_vars());
    let m = cr.matrix();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_correlation(path: &Path) -> Result<CorrelationMatrix> {
    let text = read_text(path)?;
    let ctx = || path.display().to_string();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .and_then(|l| l.trim().strip_prefix('#'))
        .ok_or_else(|| HarnessError::parse(ctx(), "missing '# nt=.. n_vars=..' header"))?;
    let (mut nt, mut n_vars) = (None, None);
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("nt", v)) => nt = v.parse::<usize>().ok(),
            Some(("n_vars", v)) => n_vars = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (nt, n_vars) = nt
        .zip(n_vars)
        .ok_or_else(|| HarnessError::parse(ctx(), "header needs nt and n_vars"))?;
    let dim = 2 * nt * n_vars;
    let mut values = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::parse(format!("{} row {}", ctx(), k + 1), e))?;
        if row.len() != dim {
            return Err(HarnessError::parse(
                format!("{} row {}", ctx(), k + 1),
                format!("{} values, expected {dim}", row.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != dim {
        return Err(HarnessError::parse(ctx(), format!("{rows} rows, expected {dim}")));
    }
    CorrelationMatrix::new(nt, n_vars, DMatrix::from_row_slice(dim, dim, &values)).context(ctx)
}

// ---------------------------------------------------------------------------
// Measurements

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    #[serde(flatten)]
    pub target: MeterSpec,
    pub value: [f64; 2],
    /// Percentage error.
    pub epsilon: f64,
    /// `false` for pseudo measurements.
    #[serde(default = "yes")]
    pub real: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFile {
    pub vref: Vec<[f64; 2]>,
    pub vref_epsilon: f64,
    pub measurements: Vec<MeasurementFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSetFile {
    pub steps: Vec<StepFile>,
}

impl From<&MeasurementSet> for MeasurementSetFile {
    fn from(set: &MeasurementSet) -> Self {
        Self {
            steps: set
                .steps
                .iter()
                .map(|s| StepFile {
                    vref: s.vref.iter().map(|v| [v.re, v.im]).collect(),
                    vref_epsilon: s.vref_epsilon,
                    measurements: s
                        .measurements
                        .iter()
                        .map(|m| MeasurementFile {
                            target: m.target.into(),
                            value: [m.value.re, m.value.im],
                            epsilon: m.epsilon,
                            real: m.is_real,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl From<MeasurementSetFile> for MeasurementSet {
    fn from(file: MeasurementSetFile) -> Self {
        MeasurementSet::new(
            file.steps
                .into_iter()
                .map(|s| {
                    let mut step = MeasurementStep::new(
                        s.vref.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
                        s.vref_epsilon,
                    );
                    for m in s.measurements {
                        step.push(Measurement {
                            target: Target::from(m.target),
                            value: Complex64::new(m.value[0], m.value[1]),
                            epsilon: m.epsilon,
                            is_real: m.real,
                        });
                    }
                    step
                })
                .collect(),
        )
    }
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    Ok(read_json::<MeasurementSetFile>(path)?.into())
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    write_json(path, &MeasurementSetFile::from(set))
}

// ---------------------------------------------------------------------------
// Estimates and metrics

pub fn write_state_rows(path: &Path, rows: &[StateRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["mode", "step", "id", "phase", "kind", "mean_re", "mean_im", "var_mag", "var_ang"])
        .map_err(|e| csv_error(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        w.write_record([
            r.mode.name().to_string(),
            r.step.to_string(),
            r.id.to_string(),
            r.phase.to_string(),
            kind,
            r.mean_re.to_string(),
            r.mean_im.to_string(),
            opt(r.var_mag),
            opt(r.var_ang),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn complex_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Serialize)]
struct EstimateJson<'a> {
    mode: &'static str,
    window: usize,
    quality: f64,
    iterations: usize,
    states: &'a [StateRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_ibv: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_ibv: Option<Vec<Vec<[f64; 2]>>>,
}

/// Estimate summary as JSON; `full` adds the posterior `Γ_IBV` and `C_IBV`
/// over the whole window.
pub fn write_estimate_json(
    path: &Path,
    est: &StateEstimate,
    rows: &[StateRow],
    fm: &FlowMatrices,
    full: bool,
) -> Result<()> {
    let (gamma, c) = if full {
        (
            Some(complex_rows(&est.gamma_ibv(fm).context(|| "posterior covariance".into())?)),
            Some(complex_rows(&est.c_ibv(fm).context(|| "posterior pseudo-covariance".into())?)),
        )
    } else {
        (None, None)
    };
    write_json(
        path,
        &EstimateJson {
            mode: match est.mode {
                dsse_core::estimator::Mode::Cs => "CS",
                dsse_core::estimator::Mode::Cst => "CST",
            },
            window: est.nt,
            quality: est.quality,
            iterations: est.iterations,
            states: rows,
            gamma_ibv: gamma,
            c_ibv: c,
        },
    )
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "case", "mode", "step", "loading", "amve_pct", "aave_deg", "mmve_pct", "mave_deg", "quality", "time_s",
        "iterations",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in &report.rows {
        w.write_record([
            report.case.clone(),
            r.mode.name().to_string(),
            r.step.to_string(),
            r.loading.to_string(),
            r.errors.amve_pct.to_string(),
            r.errors.aave_deg.to_string(),
            r.errors.mmve_pct.to_string(),
            r.errors.mave_deg.to_string(),
            r.quality.to_string(),
            format!("{:.3}", r.time_s),
            r.iterations.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<()> {
    write_json(path, report)
}
