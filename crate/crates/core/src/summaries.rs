//! Summary statistics: lag autocovariances, raw moments, the AR(2) OLS
//! auxiliary estimator with its criterion gradient, and per-coordinate
//! mean/variance statistics for planar paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{PlanarSeries, Series, SimOutput};

/// One summary statistic. `OlsAr2` contributes two output values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Non-centered lag-j autocovariance, divisor T.
    Autocov(usize),
    Mean,
    ThirdMoment,
    /// Both coefficients of the AR(2) least-squares fit.
    OlsAr2,
    /// Sample mean of planar coordinate j ∈ {1, 2}.
    LvMean(usize),
    /// Divisor-n sample variance of planar coordinate j ∈ {1, 2}.
    LvVar(usize),
}

impl StatisticKind {
    pub fn dim(self) -> usize {
        match self {
            StatisticKind::OlsAr2 => 2,
            _ => 1,
        }
    }

    /// Name used in CLI configs: acov0..acovN, mean, third, ols_ar2,
    /// lv_mean1, lv_mean2, lv_var1, lv_var2.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown statistic {name:?}"));
        Ok(match name {
            "mean" => StatisticKind::Mean,
            "third" => StatisticKind::ThirdMoment,
            "ols_ar2" => StatisticKind::OlsAr2,
            "lv_mean1" => StatisticKind::LvMean(1),
            "lv_mean2" => StatisticKind::LvMean(2),
            "lv_var1" => StatisticKind::LvVar(1),
            "lv_var2" => StatisticKind::LvVar(2),
            _ => {
                let lag = name.strip_prefix("acov").ok_or_else(bad)?;
                StatisticKind::Autocov(lag.parse().map_err(|_| bad())?)
            }
        })
    }

    pub fn name(self) -> String {
        match self {
            StatisticKind::Autocov(j) => format!("acov{j}"),
            StatisticKind::Mean => "mean".into(),
            StatisticKind::ThirdMoment => "third".into(),
            StatisticKind::OlsAr2 => "ols_ar2".into(),
            StatisticKind::LvMean(j) => format!("lv_mean{j}"),
            StatisticKind::LvVar(j) => format!("lv_var{j}"),
        }
    }
}

/// Ordered, duplicate-free list of statistics with a display name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatisticSet {
    name: String,
    kinds: Vec<StatisticKind>,
}

impl StatisticSet {
    pub fn new(name: impl Into<String>, kinds: Vec<StatisticKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidConfig("statistic set must be nonempty".into()));
        }
        for (i, a) in kinds.iter().enumerate() {
            if kinds[..i].contains(a) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate statistic {:?} in set",
                    a.name()
                )));
            }
            if let StatisticKind::LvMean(j) | StatisticKind::LvVar(j) = a {
                if *j != 1 && *j != 2 {
                    return Err(Error::InvalidConfig("lv coordinate must be 1 or 2".into()));
                }
            }
        }
        Ok(StatisticSet { name: name.into(), kinds })
    }

    pub fn from_names(name: impl Into<String>, names: &[&str]) -> Result<Self> {
        let kinds = names
            .iter()
            .map(|n| StatisticKind::parse(n))
            .collect::<Result<Vec<_>>>()?;
        StatisticSet::new(name, kinds)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kinds(&self) -> &[StatisticKind] {
        &self.kinds
    }

    /// Output dimension (ols_ar2 counts twice).
    pub fn dim(&self) -> usize {
        self.kinds.iter().map(|k| k.dim()).sum()
    }

    /// True when `self`'s descriptor list is a proper or improper prefix of
    /// `other`'s: the nesting relation augmentation plans require.
    pub fn is_prefix_of(&self, other: &StatisticSet) -> bool {
        other.kinds.len() >= self.kinds.len() && other.kinds[..self.kinds.len()] == self.kinds[..]
    }

    /// The statistic-set ladders used throughout: autocovariance prefixes
    /// eta1..eta5 and the lag-2-free variants eta6..eta8.
    pub fn by_name(name: &str) -> Result<Self> {
        use StatisticKind::*;
        let kinds = match name {
            "eta1" => vec![Autocov(0), Autocov(1)],
            "eta2" => vec![Autocov(0), Autocov(1), Autocov(2)],
            "eta3" => vec![Autocov(0), Autocov(1), Autocov(2), Autocov(3)],
            "eta4" => vec![Autocov(0), Autocov(1), Autocov(2), Autocov(3), Mean],
            "eta5" => vec![Autocov(0), Autocov(1), Autocov(2), Autocov(3), Mean, ThirdMoment],
            "eta6" => vec![Autocov(0), Autocov(1), Autocov(3)],
            "eta7" => vec![Autocov(0), Autocov(1), Autocov(3), ThirdMoment],
            "eta8" => vec![Autocov(0), Autocov(1), Autocov(3), ThirdMoment, Autocov(2)],
            _ => return Err(Error::InvalidConfig(format!("unknown statistic set {name:?}"))),
        };
        StatisticSet::new(name, kinds)
    }
}

/// (1/T)·Σ_{t=lag+1..T} y_t·y_{t−lag}; non-centered, divisor T even though
/// the sum has T−lag terms.
pub fn autocov(series: &Series, lag: usize) -> Result<f64> {
    let y = series.values();
    let t = y.len();
    if lag >= t {
        return Err(Error::SeriesTooShort { need: lag + 1, got: t });
    }
    let s: f64 = (lag..t).map(|i| y[i] * y[i - lag]).sum();
    Ok(s / t as f64)
}

pub fn sample_mean(series: &Series) -> Result<f64> {
    series.require_len(1)?;
    let y = series.values();
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

pub fn sample_third_moment(series: &Series) -> Result<f64> {
    series.require_len(1)?;
    let y = series.values();
    Ok(y.iter().map(|v| v * v * v).sum::<f64>() / y.len() as f64)
}

/// Least-squares AR(2) fit of a scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryEstimate {
    pub beta: [f64; 2],
    pub criterion_value_at_min: f64,
}

/// Q(y;β) = (1/T)·Σ_{t=3..T} (y_t − β1·y_{t−1} − β2·y_{t−2})².
pub fn ols_ar2_criterion(series: &Series, beta: [f64; 2]) -> Result<f64> {
    series.require_len(5)?;
    let y = series.values();
    let s: f64 = (2..y.len())
        .map(|t| {
            let e = y[t] - beta[0] * y[t - 1] - beta[1] * y[t - 2];
            e * e
        })
        .sum();
    Ok(s / y.len() as f64)
}

/// Exact normal-equations minimizer of the AR(2) criterion.
pub fn ols_ar2_estimate(series: &Series) -> Result<AuxiliaryEstimate> {
    series.require_len(5)?;
    let y = series.values();
    let (mut m11, mut m12, mut m22, mut v1, mut v2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in 2..y.len() {
        let (a, b) = (y[t - 1], y[t - 2]);
        m11 += a * a;
        m12 += a * b;
        m22 += b * b;
        v1 += a * y[t];
        v2 += b * y[t];
    }
    let det = m11 * m22 - m12 * m12;
    // Scale-aware singularity test: det of a PSD Gram matrix vs its trace².
    if det.abs() <= 1e-12 * (m11 + m22) * (m11 + m22) {
        return Err(Error::DegenerateDesign);
    }
    let beta = [(v1 * m22 - v2 * m12) / det, (v2 * m11 - v1 * m12) / det];
    let q = ols_ar2_criterion(series, beta)?;
    Ok(AuxiliaryEstimate { beta, criterion_value_at_min: q })
}

/// ∂Q/∂β = (−2/T)·(Σ y_{t−1}·ê_t, Σ y_{t−2}·ê_t) at the given beta.
pub fn ols_ar2_criterion_gradient(series: &Series, beta: [f64; 2]) -> Result<[f64; 2]> {
    series.require_len(5)?;
    let y = series.values();
    let (mut g1, mut g2) = (0.0, 0.0);
    for t in 2..y.len() {
        let e = y[t] - beta[0] * y[t - 1] - beta[1] * y[t - 2];
        g1 += y[t - 1] * e;
        g2 += y[t - 2] * e;
    }
    let scale = -2.0 / y.len() as f64;
    Ok([scale * g1, scale * g2])
}

/// Closed-form least-squares statistics of a planar path:
/// (mean1, mean2, var1, var2) with divisor-n variances.
pub fn lv_olstats(series: &PlanarSeries) -> Result<[f64; 4]> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: n });
    }
    let stats = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        (mean, var)
    };
    let (m1, v1) = stats(&series.x1);
    let (m2, v2) = stats(&series.x2);
    Ok([m1, m2, v1, v2])
}

fn eval_one(kind: StatisticKind, output: &SimOutput, out: &mut Vec<f64>) -> Result<()> {
    let scalar = || {
        output.as_scalar().ok_or(Error::InvalidConfig(
            "scalar statistic applied to planar series".into(),
        ))
    };
    let planar = || {
        output.as_planar().ok_or(Error::InvalidConfig(
            "planar statistic applied to scalar series".into(),
        ))
    };
    match kind {
        StatisticKind::Autocov(j) => out.push(autocov(scalar()?, j)?),
        StatisticKind::Mean => out.push(sample_mean(scalar()?)?),
        StatisticKind::ThirdMoment => out.push(sample_third_moment(scalar()?)?),
        StatisticKind::OlsAr2 => {
            let est = ols_ar2_estimate(scalar()?)?;
            out.extend_from_slice(&est.beta);
        }
        StatisticKind::LvMean(j) | StatisticKind::LvVar(j) => {
            let s = lv_olstats(planar()?)?;
            let idx = match kind {
                StatisticKind::LvMean(_) => j - 1,
                _ => j + 1,
            };
            out.push(s[idx]);
        }
    }
    Ok(())
}

/// Concatenated statistic values in descriptor order.
pub fn evaluate_statistic_set(set: &StatisticSet, output: &SimOutput) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(set.dim());
    for &kind in set.kinds() {
        eval_one(kind, output, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(values: &[f64]) -> Series {
        Series::new(values.to_vec())
    }

    #[test]
    fn autocov_zeros_and_ones() {
        let z = scalar(&[0.0; 16]);
        assert_eq!(autocov(&z, 0).unwrap(), 0.0);
        assert_eq!(autocov(&z, 3).unwrap(), 0.0);
        let ones = scalar(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(autocov(&ones, 1).unwrap(), 0.75);
    }

    #[test]
    fn autocov_lag_bound() {
        let s = scalar(&[1.0, 2.0]);
        assert!(matches!(autocov(&s, 2), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn moments_small_cases() {
        let s = scalar(&[-1.0, 1.0]);
        assert_eq!(sample_mean(&s).unwrap(), 0.0);
        assert_eq!(sample_third_moment(&s).unwrap(), 0.0);
        let t = scalar(&[1.0, 2.0, 3.0]);
        assert_eq!(sample_mean(&t).unwrap(), 2.0);
        assert_eq!(sample_third_moment(&t).unwrap(), 12.0);
    }

    #[test]
    fn ols_interpolating_fit_is_exact() {
        // Built to satisfy y_t = 0.3 y_{t−1} + 0.1 y_{t−2} with zero residual.
        let mut y = vec![1.0, 2.0];
        for t in 2..40 {
            y.push(0.3 * y[t - 1] + 0.1 * y[t - 2]);
        }
        let est = ols_ar2_estimate(&scalar(&y)).unwrap();
        assert!((est.beta[0] - 0.3).abs() < 1e-9);
        assert!((est.beta[1] - 0.1).abs() < 1e-9);
        assert!(est.criterion_value_at_min < 1e-18);
    }

    #[test]
    fn ols_constant_series_degenerate() {
        let s = scalar(&[2.0; 50]);
        assert!(matches!(ols_ar2_estimate(&s), Err(Error::DegenerateDesign)));
    }

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let y: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let s = scalar(&y);
        let est = ols_ar2_estimate(&s).unwrap();
        let g = ols_ar2_criterion_gradient(&s, est.beta).unwrap();
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10, "gradient {g:?}");
    }

    #[test]
    fn gradient_of_zero_series_is_zero() {
        let s = scalar(&[0.0; 10]);
        let g = ols_ar2_criterion_gradient(&s, [0.4, -0.2]).unwrap();
        assert_eq!(g, [0.0, 0.0]);
    }

    #[test]
    fn lv_stats_constant_path() {
        let p = PlanarSeries {
            times: vec![1.0, 2.0, 3.0],
            x1: vec![1.0, 1.0, 1.0],
            x2: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(lv_olstats(&p).unwrap(), [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn ladder_dimensions() {
        let dims: Vec<usize> = (1..=8)
            .map(|i| StatisticSet::by_name(&format!("eta{i}")).unwrap().dim())
            .collect();
        assert_eq!(dims, vec![2, 3, 4, 5, 6, 3, 4, 5]);
    }

    #[test]
    fn ladder_prefix_nesting() {
        let names = ["eta1", "eta2", "eta3", "eta4", "eta5"];
        for w in names.windows(2) {
            let a = StatisticSet::by_name(w[0]).unwrap();
            let b = StatisticSet::by_name(w[1]).unwrap();
            assert!(a.is_prefix_of(&b));
            assert!(!b.is_prefix_of(&a));
        }
    }

    #[test]
    fn duplicate_statistics_rejected() {
        use StatisticKind::*;
        assert!(StatisticSet::new("x", vec![Mean, Mean]).is_err());
        assert!(StatisticSet::new("x", vec![]).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for n in ["acov0", "acov7", "mean", "third", "ols_ar2", "lv_mean2", "lv_var1"] {
            assert_eq!(StatisticKind::parse(n).unwrap().name(), n);
        }
        assert!(StatisticKind::parse("acovx").is_err());
        assert!(StatisticKind::parse("median").is_err());
    }

    #[test]
    fn statistic_type_mismatch_rejected() {
        let set = StatisticSet::by_name("eta1").unwrap();
        let p = PlanarSeries {
            times: vec![1.0, 2.0],
            x1: vec![1.0, 2.0],
            x2: vec![0.5, 0.4],
        };
        assert!(evaluate_statistic_set(&set, &SimOutput::Planar(p)).is_err());
    }
}
