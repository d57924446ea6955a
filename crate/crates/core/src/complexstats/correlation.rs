use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::min_symmetric_eigenvalue;
use crate::{Complex64, DsseError, Result};

/// A uniformly sampled complex series for one area (injected current or power).
#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    pub area_id: String,
    pub samples: Vec<Complex64>,
    /// Sample interval in minutes.
    pub interval_min: f64,
}

impl LoadProfile {
    pub fn new(area_id: impl Into<String>, samples: Vec<Complex64>, interval_min: f64) -> Result<Self> {
        let area_id = area_id.into();
        if samples.len() < 2 {
            return Err(DsseError::InvalidInput(format!(
                "profile {area_id} needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(t) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(DsseError::InvalidInput(format!(
                "profile {area_id} has a missing or non-finite sample at index {t}"
            )));
        }
        if !(interval_min.is_finite() && interval_min > 0.0) {
            return Err(DsseError::InvalidInput(format!(
                "profile {area_id} has non-positive sample interval {interval_min}"
            )));
        }
        Ok(Self {
            area_id,
            samples,
            interval_min,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.im).collect()
    }
}

/// Centered series scaled to unit sum of squares, or `None` for a constant series.
fn normalized(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if ss.is_nan() || ss <= (1e-12 * scale) * (1e-12 * scale) * n {
        return None;
    }
    let inv = 1.0 / libm::sqrt(ss);
    Some(x.iter().map(|v| (v - mean) * inv).collect())
}

fn lagged_dot(a: &[f64], b: &[f64], lag: usize) -> f64 {
    a[..a.len() - lag]
        .iter()
        .zip(&b[lag..])
        .map(|(x, y)| x * y)
        .sum()
}

/// Correlation between `a_t` and `b_{t+lag}`.
///
/// Means and standard deviations are taken over the full series with sample
/// `(N−1)` normalization; the lagged cross sum runs over the `N − lag`
/// overlapping pairs. With `a == b` this is the lag-`k` autocorrelation.
pub fn empirical_correlation(a: &[f64], b: &[f64], lag: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DsseError::Dimension {
            context: "correlated series",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(DsseError::InvalidInput("correlation needs at least 2 samples".into()));
    }
    if lag >= a.len() {
        return Err(DsseError::InvalidInput(format!(
            "lag {lag} must be below the series length {}",
            a.len()
        )));
    }
    let za = normalized(a).ok_or_else(|| DsseError::ZeroVariance("first series".into()))?;
    let zb = normalized(b).ok_or_else(|| DsseError::ZeroVariance("second series".into()))?;
    Ok(lagged_dot(&za, &zb, lag))
}

/// Correlation matrix over `nt` consecutive steps of `n_vars` complex
/// variables, laid out as `[[PP, PQ], [QP, QQ]]`.
///
/// Within each quadrant, rows and columns are ordered step-major
/// (chronological, the last step is the current one) with variables inner,
/// matching the stacked state vector of the estimator. `P` refers to the real
/// parts and `Q` to the imaginary parts of the modelled variables.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    nt: usize,
    n_vars: usize,
    matrix: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl CorrelationMatrix {
    /// Accepts any symmetric matrix with unit diagonal of size `2·n_vars·nt`.
    /// Entries outside `[−1, 1]` and indefinite matrices are allowed so they
    /// can be handed to [`nearest_pd_correlation`](super::nearest_pd_correlation).
    pub fn new(nt: usize, n_vars: usize, matrix: DMatrix<f64>) -> Result<Self> {
        if nt == 0 || n_vars == 0 {
            return Err(DsseError::InvalidInput("correlation matrix needs nt ≥ 1 and n_vars ≥ 1".into()));
        }
        let dim = 2 * n_vars * nt;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(DsseError::Dimension {
                context: "correlation matrix",
                expected: dim,
                actual: matrix.nrows().max(matrix.ncols()),
            });
        }
        let mut matrix = matrix;
        for i in 0..dim {
            if (matrix[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(DsseError::InvalidInput(format!(
                    "correlation matrix diagonal entry {i} is {}, expected 1",
                    matrix[(i, i)]
                )));
            }
            matrix[(i, i)] = 1.0;
            for j in (i + 1)..dim {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-9 {
                    return Err(DsseError::InvalidInput(format!(
                        "correlation matrix is not symmetric at ({i}, {j})"
                    )));
                }
                let avg = 0.5 * (a + b);
                matrix[(i, j)] = avg;
                matrix[(j, i)] = avg;
            }
        }
        let min_eigenvalue = min_symmetric_eigenvalue(&matrix);
        Ok(Self {
            nt,
            n_vars,
            matrix,
            min_eigenvalue,
        })
    }

    /// Uncorrelated variables.
    pub fn identity(n_vars: usize, nt: usize) -> Self {
        let dim = 2 * n_vars * nt;
        Self {
            nt,
            n_vars,
            matrix: DMatrix::identity(dim, dim),
            min_eigenvalue: 1.0,
        }
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Row of the real part of `var` at window step `step`.
    pub fn p_index(&self, step: usize, var: usize) -> usize {
        step * self.n_vars + var
    }

    /// Row of the imaginary part of `var` at window step `step`.
    pub fn q_index(&self, step: usize, var: usize) -> usize {
        self.n_vars * self.nt + step * self.n_vars + var
    }

    fn quadrant(&self, qr: usize, qc: usize) -> DMatrix<f64> {
        let h = self.n_vars * self.nt;
        self.matrix.view((qr * h, qc * h), (h, h)).into_owned()
    }

    pub fn pp(&self) -> DMatrix<f64> {
        self.quadrant(0, 0)
    }

    pub fn pq(&self) -> DMatrix<f64> {
        self.quadrant(0, 1)
    }

    pub fn qp(&self) -> DMatrix<f64> {
        self.quadrant(1, 0)
    }

    pub fn qq(&self) -> DMatrix<f64> {
        self.quadrant(1, 1)
    }

    /// Restriction to the last `steps` steps of the window.
    pub fn window(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.nt {
            return Err(DsseError::InvalidInput(format!(
                "window of {steps} steps requested from a correlation matrix spanning {}",
                self.nt
            )));
        }
        if steps == self.nt {
            return Ok(self.clone());
        }
        let first = self.nt - steps;
        let mut idx = Vec::with_capacity(2 * steps * self.n_vars);
        for step in first..self.nt {
            for v in 0..self.n_vars {
                idx.push(self.p_index(step, v));
            }
        }
        for step in first..self.nt {
            for v in 0..self.n_vars {
                idx.push(self.q_index(step, v));
            }
        }
        let sub = crate::linalg::select(&self.matrix, &idx, &idx);
        Self::new(steps, self.n_vars, sub)
    }

    /// Lag-0 correlations only.
    pub fn spatial(&self) -> Result<Self> {
        self.window(1)
    }
}

/// Builds the CR matrix from real-part (`p`) and imaginary-part (`q`) series.
///
/// The entry between variable `u` at window step `a` and variable `v` at step
/// `b ≥ a` is `empirical_correlation(u, v, b − a)`; the lower triangle mirrors
/// it, so `QP = PQᵀ` by construction.
pub fn build_cr_matrix(p: &[Vec<f64>], q: &[Vec<f64>], nt: usize) -> Result<CorrelationMatrix> {
    let n = p.len();
    if q.len() != n {
        return Err(DsseError::Dimension {
            context: "imaginary-part profiles",
            expected: n,
            actual: q.len(),
        });
    }
    if n == 0 || nt == 0 {
        return Err(DsseError::InvalidInput("need at least one profile and nt ≥ 1".into()));
    }
    let len = p[0].len();
    for s in p.iter().chain(q) {
        if s.len() != len {
            return Err(DsseError::Dimension {
                context: "profile length",
                expected: len,
                actual: s.len(),
            });
        }
    }
    if len < 2 || nt >= len {
        return Err(DsseError::InvalidInput(format!(
            "profiles of length {len} cannot support a {nt}-step window"
        )));
    }

    let mut series = Vec::with_capacity(2 * n);
    for (quad, set) in [("real part", p), ("imaginary part", q)] {
        for (v, s) in set.iter().enumerate() {
            series.push(
                normalized(s)
                    .ok_or_else(|| DsseError::ZeroVariance(format!("{quad} of variable {v}")))?,
            );
        }
    }

    // lagged[lag][i][j] = corr(series_i at t, series_j at t + lag)
    let ns = 2 * n;
    let mut lagged = alloc::vec![DMatrix::<f64>::zeros(ns, ns); nt];
    for (lag, table) in lagged.iter_mut().enumerate() {
        for i in 0..ns {
            for j in 0..ns {
                if lag == 0 && j < i {
                    table[(i, j)] = table[(j, i)];
                    continue;
                }
                table[(i, j)] = lagged_dot(&series[i], &series[j], lag);
            }
        }
    }

    let dim = 2 * n * nt;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let row = |quad: usize, step: usize, v: usize| quad * n * nt + step * n + v;
    for qa in 0..2 {
        for a in 0..nt {
            for u in 0..n {
                let i = row(qa, a, u);
                let si = qa * n + u;
                for qb in 0..2 {
                    for b in 0..nt {
                        for v in 0..n {
                            let j = row(qb, b, v);
                            let sj = qb * n + v;
                            m[(i, j)] = if b >= a {
                                lagged[b - a][(si, sj)]
                            } else {
                                lagged[a - b][(sj, si)]
                            };
                        }
                    }
                }
            }
        }
    }
    for i in 0..dim {
        m[(i, i)] = 1.0;
    }
    CorrelationMatrix::new(nt, n, m)
}

/// CR matrix from complex profiles, using real and imaginary parts as the two quadrants.
pub fn cr_from_profiles(profiles: &[LoadProfile], nt: usize) -> Result<CorrelationMatrix> {
    let p: Vec<Vec<f64>> = profiles.iter().map(LoadProfile::real_parts).collect();
    let q: Vec<Vec<f64>> = profiles.iter().map(LoadProfile::imag_parts).collect();
    build_cr_matrix(&p, &q, nt)
}
