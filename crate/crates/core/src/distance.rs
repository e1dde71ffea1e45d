//! Discrepancy measures between observed and simulated data: plain and
//! weighted statistic distances, the auxiliary-score distance, and the
//! raw-path squared-error discrepancy for planar series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PlanarSeries;

/// Dense symmetric matrix in row-major nested vectors (d is tiny, ≤ 8).
pub type Matrix = Vec<Vec<f64>>;

/// Which discrepancy a run uses. The weighted kinds carry their scaling
/// data; the engine resolves those from the simulated batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceSpec {
    /// ‖a − b‖₂ on statistic vectors. Raw, unscaled: the default.
    Euclidean,
    /// ‖(a − b) / σ̂‖₂ with σ̂ the per-component std of simulated statistics.
    DiagVarianceWeighted { sd: Vec<f64> },
    /// Mahalanobis distance with the simulated-statistic covariance.
    CovarianceWeighted { cov: Matrix },
    /// √(g′ Ω̂ g) with g the auxiliary-criterion gradient of the simulated
    /// series at the observed-data minimizer. Ω̂ defaults to the identity.
    ScoreOlsAr2 { omega: Option<Matrix> },
    /// (1/n)·Σ_j Σ_i (y_j(t_i) − z_j(t_i))²: squared error, not a metric.
    LvRawPath,
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

pub fn diag_weighted(a: &[f64], b: &[f64], sd: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    check_dims(a, sd)?;
    if sd.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidConfig(
            "diagonal weighting needs strictly positive stds".into(),
        ));
    }
    Ok(a.iter()
        .zip(b)
        .zip(sd)
        .map(|((x, y), s)| {
            let u = (x - y) / s;
            u * u
        })
        .sum::<f64>()
        .sqrt())
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let d = m.len();
    let not_pd = || Error::InvalidConfig("weight matrix is not positive definite".into());
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        if m[i].len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m[i].len() });
        }
        for j in 0..=i {
            if (m[i][j] - m[j][i]).abs() > 1e-9 * (1.0 + m[i][j].abs()) {
                return Err(Error::InvalidConfig("weight matrix is not symmetric".into()));
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = m[i][i] - s;
                if !(v > 0.0) {
                    return Err(not_pd());
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Solve L·L′·x = v given the Cholesky factor L.
fn chol_solve(l: &Matrix, v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (v[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Mahalanobis distance √((a−b)′ Σ⁻¹ (a−b)) given the Cholesky factor of Σ.
pub fn mahalanobis(a: &[f64], b: &[f64], chol_cov: &Matrix) -> Result<f64> {
    check_dims(a, b)?;
    if chol_cov.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: chol_cov.len() });
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let x = chol_solve(chol_cov, &diff);
    let q: f64 = diff.iter().zip(&x).map(|(d, xi)| d * xi).sum();
    // q = diff' Σ⁻¹ diff ≥ 0 up to roundoff for PD Σ.
    Ok(q.max(0.0).sqrt())
}

/// √(g′ Ω g); Ω = None means the identity.
pub fn score_norm(g: &[f64], omega: Option<&Matrix>) -> Result<f64> {
    match omega {
        None => Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt()),
        Some(m) => {
            if m.len() != g.len() {
                return Err(Error::DimensionMismatch { expected: g.len(), got: m.len() });
            }
            // Validates positive definiteness as a side effect.
            cholesky(m)?;
            let mut q = 0.0;
            for i in 0..g.len() {
                for j in 0..g.len() {
                    q += g[i] * m[i][j] * g[j];
                }
            }
            Ok(q.max(0.0).sqrt())
        }
    }
}

/// (1/n)·Σ over both coordinates and all times of squared deviations.
pub fn lv_raw_path_distance(y: &PlanarSeries, z: &PlanarSeries) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: z.len() });
    }
    if y.is_empty() {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }
    let n = y.len() as f64;
    let mut s = 0.0;
    for i in 0..y.len() {
        let d1 = y.x1[i] - z.x1[i];
        let d2 = y.x2[i] - z.x2[i];
        s += d1 * d1 + d2 * d2;
    }
    Ok(s / n)
}

/// Per-component std (divisor n) of a batch of statistic vectors, for the
/// diagonal weighting.
pub fn component_stds(stats: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = stats.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: n });
    }
    let d = stats[0].len();
    let mut mean = vec![0.0; d];
    for s in stats {
        check_dims(s, &mean)?;
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for s in stats {
        for j in 0..d {
            let u = s[j] - mean[j];
            var[j] += u * u;
        }
    }
    Ok(var.iter().map(|v| (v / n as f64).sqrt()).collect())
}

/// Covariance matrix (divisor n) of a batch of statistic vectors.
pub fn covariance(stats: &[Vec<f64>]) -> Result<Matrix> {
    let n = stats.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: n });
    }
    let d = stats[0].len();
    let mut mean = vec![0.0; d];
    for s in stats {
        check_dims(s, &mean)?;
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for s in stats {
        for i in 0..d {
            for j in 0..=i {
                cov[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= n as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}
