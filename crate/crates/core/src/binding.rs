//! Large-sample limits of the summary statistics as functions of the
//! parameter, preimage solving for those limit maps, and two injectivity
//! checks: a dense analytic grid scan and a long-simulation verification
//! that needs no closed form.

use crate::error::{Error, Result};
use crate::model::{ma2_feasible, Model};
use crate::rng::{child_seed, compose};
use crate::series::{PlanarSeries, Series, SimOutput};
use crate::summaries::{evaluate_statistic_set, StatisticKind, StatisticSet};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Probability-limit map theta -> eta_infinity(theta) for the models with a
/// closed form. `eval_raw` is defined wherever the formulas make sense, so
/// roots outside the constraint region can still be located and reported;
/// `in_domain` is the separate feasibility question.
#[derive(Debug, Clone)]
pub enum BindingMap {
    /// Lag-1 autocovariance limit of the stationary AR(1): theta/(1-theta^2).
    Ar1Acov1,
    /// Componentwise limits of a statistic set under the MA(2) model.
    Ma2Stats(StatisticSet),
    /// Limit of the AR(2) least-squares fit applied to MA(2) data.
    OlsAr2OnMa2,
}

impl BindingMap {
    pub fn param_dim(&self) -> usize {
        match self {
            BindingMap::Ar1Acov1 => 1,
            BindingMap::Ma2Stats(_) | BindingMap::OlsAr2OnMa2 => 2,
        }
    }

    pub fn value_dim(&self) -> usize {
        match self {
            BindingMap::Ar1Acov1 => 1,
            BindingMap::Ma2Stats(set) => set.dim(),
            BindingMap::OlsAr2OnMa2 => 2,
        }
    }

    /// Evaluate the limit formulas without any region check. Errors only on
    /// dimension mismatch, a genuinely undefined denominator, or a statistic
    /// with no closed-form limit under the model.
    pub fn eval_raw(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                got: theta.len(),
            });
        }
        match self {
            BindingMap::Ar1Acov1 => {
                let t = theta[0];
                let den = 1.0 - t * t;
                if den == 0.0 {
                    return Err(Error::InvalidConfig(
                        "lag-1 limit undefined at |theta| = 1".into(),
                    ));
                }
                Ok(vec![t / den])
            }
            BindingMap::Ma2Stats(set) => {
                let mut out = Vec::with_capacity(set.dim());
                for kind in set.kinds() {
                    match kind {
                        StatisticKind::Autocov(j) => out.push(ma2_acov_limit(theta, *j)),
                        StatisticKind::Mean | StatisticKind::ThirdMoment => out.push(0.0),
                        StatisticKind::OlsAr2 => {
                            let beta = ols_ar2_limit(theta)?;
                            out.extend_from_slice(&beta);
                        }
                        StatisticKind::LvMean(_) | StatisticKind::LvVar(_) => {
                            return Err(Error::InvalidConfig(format!(
                                "no closed-form MA(2) limit for {}",
                                kind.name()
                            )));
                        }
                    }
                }
                Ok(out)
            }
            BindingMap::OlsAr2OnMa2 => ols_ar2_limit(theta).map(|b| b.to_vec()),
        }
    }

    /// Constraint-region membership for the map's parameter.
    pub fn in_domain(&self, theta: &[f64]) -> bool {
        if theta.len() != self.param_dim() || theta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            BindingMap::Ar1Acov1 => theta[0].abs() < 1.0,
            BindingMap::Ma2Stats(_) | BindingMap::OlsAr2OnMa2 => {
                ma2_feasible(theta[0], theta[1])
            }
        }
    }

    /// Region-checked evaluation.
    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if !self.in_domain(theta) {
            return Err(Error::OutsideRegion {
                theta: theta.to_vec(),
                region: self.region_name(),
            });
        }
        self.eval_raw(theta)
    }

    fn region_name(&self) -> &'static str {
        match self {
            BindingMap::Ar1Acov1 => "|theta| < 1",
            BindingMap::Ma2Stats(_) | BindingMap::OlsAr2OnMa2 => {
                "-2 < t1 < 2, t1 + t2 > -1, t1 - t2 < 1"
            }
        }
    }

    /// Box used by the grid stage of `solve_preimage` when the caller does
    /// not supply one. Wide enough to catch the known roots outside the
    /// constraint region.
    pub fn default_search_box(&self) -> Vec<[f64; 2]> {
        match self {
            BindingMap::Ar1Acov1 => vec![[-5.0, 5.0]],
            BindingMap::Ma2Stats(_) => vec![[-2.5, 2.5], [-2.0, 3.0]],
            BindingMap::OlsAr2OnMa2 => vec![[-4.0, 4.0], [-2.0, 6.0]],
        }
    }
}

/// Autocovariance limit of the unit-variance MA(2) at lag `j`.
fn ma2_acov_limit(theta: &[f64], j: usize) -> f64 {
    let (t1, t2) = (theta[0], theta[1]);
    match j {
        0 => 1.0 + t1 * t1 + t2 * t2,
        1 => t1 * (1.0 + t2),
        2 => t2,
        _ => 0.0,
    }
}

/// Limit of the least-squares AR(2) coefficients fitted to MA(2) data,
/// written exactly as the population projection equations solve out.
pub fn binding_ols_ar2_on_ma2(t1: f64, t2: f64) -> Result<[f64; 2]> {
    ols_ar2_limit(&[t1, t2])
}

fn ols_ar2_limit(theta: &[f64]) -> Result<[f64; 2]> {
    let g0 = ma2_acov_limit(theta, 0);
    let g1 = ma2_acov_limit(theta, 1);
    let g2 = ma2_acov_limit(theta, 2);
    let den = g0 - g1 * g1 / g0;
    // g0 >= 1 + t1^2 and |g1| <= (1 + t1^2)/2 + (t1^2 + t2^2)/2, so the
    // denominator is bounded away from zero; the guard is purely defensive.
    if den.abs() < 1e-12 * g0 {
        return Err(Error::InvalidConfig(
            "projection denominator vanished".into(),
        ));
    }
    let b1 = (g1 - g1 * g2 / g0) / den;
    let b2 = g2 / g0 - (g1 / g0) * b1;
    Ok([b1, b2])
}

/// Lag-1 limit of the stationary AR(1), with its domain check.
pub fn binding_ar1_acov1(theta: f64) -> Result<f64> {
    if theta.abs() >= 1.0 {
        return Err(Error::OutsideRegion {
            theta: vec![theta],
            region: "|theta| < 1",
        });
    }
    Ok(theta / (1.0 - theta * theta))
}

/// Componentwise MA(2) limits of a statistic set, with the domain check.
pub fn binding_ma2(t1: f64, t2: f64, set: &StatisticSet) -> Result<Vec<f64>> {
    BindingMap::Ma2Stats(set.clone()).eval(&[t1, t2])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PreimageMethod {
    AnalyticPolynomial,
    GridRefine,
}

/// Every parameter value found to map onto the target, split by region
/// membership. `suspects` holds grid candidates whose refinement did not
/// settle; they are reported rather than dropped.
#[derive(Debug, Clone, Serialize)]
pub struct PreimageResult {
    pub target: Vec<f64>,
    pub feasible: Vec<Vec<f64>>,
    pub infeasible: Vec<Vec<f64>>,
    pub suspects: Vec<Vec<f64>>,
    pub method: PreimageMethod,
}

impl PreimageResult {
    pub fn all_roots(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.feasible.iter().chain(self.infeasible.iter())
    }
}

/// Residual norm below which a refined point counts as an exact root.
fn root_tol(target: &[f64]) -> f64 {
    1e-8 * (1.0 + norm(target))
}

/// Find every solution of b(theta) = target.
///
/// Closed-form routes: the AR(1) map reduces to a quadratic and the MA(2)
/// pair (acov0, acov1) to a quartic in theta2, solved completely. Everything
/// else runs a 400-per-axis grid over `search` (default per map), keeps
/// local minima of the residual, and polishes each with a damped
/// least-squares Newton iteration.
pub fn solve_preimage(
    binding: &BindingMap,
    target: &[f64],
    search: Option<&[[f64; 2]]>,
) -> Result<PreimageResult> {
    if target.len() != binding.value_dim() {
        return Err(Error::DimensionMismatch {
            expected: binding.value_dim(),
            got: target.len(),
        });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("preimage target must be finite".into()));
    }
    match binding {
        BindingMap::Ar1Acov1 => Ok(preimage_ar1(target[0])),
        BindingMap::Ma2Stats(set)
            if set.kinds() == [StatisticKind::Autocov(0), StatisticKind::Autocov(1)] =>
        {
            Ok(preimage_ma2_two_stats(target[0], target[1]))
        }
        _ => preimage_grid_refine(binding, target, search),
    }
}

/// theta/(1-theta^2) = c rearranges to c theta^2 + theta - c = 0.
fn preimage_ar1(c: f64) -> PreimageResult {
    let roots = if c.abs() <= 1e-14 {
        vec![0.0]
    } else {
        let disc = (1.0 + 4.0 * c * c).sqrt();
        // Stable quadratic roots: q = -(1 + sign(1)*disc)/2 trick is overkill
        // here since the linear coefficient is exactly 1 and disc > 1.
        vec![(-1.0 + disc) / (2.0 * c), (-1.0 - disc) / (2.0 * c)]
    };
    let mut result = PreimageResult {
        target: vec![c],
        feasible: Vec::new(),
        infeasible: Vec::new(),
        suspects: Vec::new(),
        method: PreimageMethod::AnalyticPolynomial,
    };
    for r in roots {
        if r.abs() < 1.0 {
            result.feasible.push(vec![r]);
        } else {
            result.infeasible.push(vec![r]);
        }
    }
    result
}

/// The system 1 + t1^2 + t2^2 = a0, t1 (1 + t2) = a1 eliminates t1 via
/// t1 = a1/(1+t2) and leaves a quartic in u = t2:
///   u^4 + 2u^3 + (2-a0) u^2 + 2(1-a0) u + (1to-a0) + a1^2 = 0.
fn preimage_ma2_two_stats(a0: f64, a1: f64) -> PreimageResult {
    let target = vec![a0, a1];
    let tol = root_tol(&target);
    let mut roots: Vec<[f64; 2]> = Vec::new();
    if a1.abs() <= 1e-12 {
        // Degenerate product: either t1 = 0 with t2^2 = a0 - 1, or t2 = -1
        // with t1^2 = a0 - 2.
        if a0 >= 1.0 {
            let s = (a0 - 1.0).sqrt();
            roots.push([0.0, s]);
            if s > 0.0 {
                roots.push([0.0, -s]);
            }
        }
        if a0 >= 2.0 {
            let s = (a0 - 2.0).sqrt();
            roots.push([s, -1.0]);
            if s > 0.0 {
                roots.push([-s, -1.0]);
            }
        }
    } else {
        let coeffs = [
            (1.0 - a0) + a1 * a1,
            2.0 * (1.0 - a0),
            2.0 - a0,
            2.0,
            1.0,
        ];
        for u in real_polynomial_roots(&coeffs) {
            let den = 1.0 + u;
            if den.abs() <= 1e-9 {
                continue;
            }
            roots.push([a1 / den, u]);
        }
    }
    let mut result = PreimageResult {
        target,
        feasible: Vec::new(),
        infeasible: Vec::new(),
        suspects: Vec::new(),
        method: PreimageMethod::AnalyticPolynomial,
    };
    for r in roots {
        let b = [ma2_acov_limit(&r, 0) - a0, ma2_acov_limit(&r, 1) - a1];
        if norm(&b) > tol {
            result.suspects.push(r.to_vec());
        } else if ma2_feasible(r[0], r[1]) {
            result.feasible.push(r.to_vec());
        } else {
            result.infeasible.push(r.to_vec());
        }
    }
    dedupe_roots(&mut result.feasible);
    dedupe_roots(&mut result.infeasible);
    result
}

fn preimage_grid_refine(
    binding: &BindingMap,
    target: &[f64],
    search: Option<&[[f64; 2]]>,
) -> Result<PreimageResult> {
    let default_box = binding.default_search_box();
    let bounds: &[[f64; 2]] = search.unwrap_or(&default_box);
    if bounds.len() != binding.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: binding.param_dim(),
            got: bounds.len(),
        });
    }
    const GRID: usize = 400;
    let axes: Vec<Vec<f64>> = bounds.iter().map(|b| linspace(b[0], b[1], GRID)).collect();
    let dim = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();

    // Residual norm at every node; evaluation failures become +inf.
    let resid: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let theta = unflatten(flat, &axes);
            match binding.eval_raw(&theta) {
                Ok(b) => diff_norm(&b, target),
                Err(_) => f64::INFINITY,
            }
        })
        .collect();

    let coarse = 0.05 * (1.0 + norm(target));
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    'node: for flat in 0..total {
        if !(resid[flat] < coarse) {
            continue;
        }
        // Local minimum over the full neighbor stencil.
        let idx = multi_index(flat, &axes);
        for offset in neighbor_offsets(dim) {
            if offset.iter().all(|&o| o == 0) {
                continue;
            }
            let mut n_idx = idx.clone();
            let mut ok = true;
            for (d, &o) in offset.iter().enumerate() {
                let v = idx[d] as isize + o as isize;
                if v < 0 || v >= axes[d].len() as isize {
                    ok = false;
                    break;
                }
                n_idx[d] = v as usize;
            }
            if ok && resid[flatten(&n_idx, &axes)] < resid[flat] {
                continue 'node;
            }
        }
        candidates.push(unflatten(flat, &axes));
    }

    let tol = root_tol(target);
    let mut result = PreimageResult {
        target: target.to_vec(),
        feasible: Vec::new(),
        infeasible: Vec::new(),
        suspects: Vec::new(),
        method: PreimageMethod::GridRefine,
    };
    for start in candidates {
        match gauss_newton(&|t| binding.eval_raw(t).ok(), &start, target, 100) {
            RefineOutcome::Settled(theta, r) if r <= tol => {
                if binding.in_domain(&theta) {
                    result.feasible.push(theta);
                } else {
                    result.infeasible.push(theta);
                }
            }
            RefineOutcome::Settled(..) => {
                // A genuine local minimum of the residual that is not a
                // root: a feature of the landscape, not a solution.
            }
            RefineOutcome::Unsettled(theta) => result.suspects.push(theta),
        }
    }
    dedupe_roots(&mut result.feasible);
    dedupe_roots(&mut result.infeasible);
    dedupe_roots(&mut result.suspects);
    Ok(result)
}

/// Outcome of the damped least-squares refinement.
enum RefineOutcome {
    /// Iteration reached a stationary point; payload is (theta, residual).
    Settled(Vec<f64>, f64),
    /// Step limit hit while still moving.
    Unsettled(Vec<f64>),
}

/// Damped Gauss-Newton on ||f(theta) - target||, finite-difference Jacobian,
/// halving line search. Works for square and overdetermined value maps.
fn gauss_newton(
    f: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    start: &[f64],
    target: &[f64],
    max_iter: usize,
) -> RefineOutcome {
    let dim = start.len();
    let mut theta = start.to_vec();
    let mut r = match f(&theta) {
        Some(b) => sub(&b, target),
        None => return RefineOutcome::Unsettled(theta),
    };
    let mut rnorm = norm(&r);
    let tol = 1e-10 * (1.0 + norm(target));
    for _ in 0..max_iter {
        if rnorm <= tol {
            return RefineOutcome::Settled(theta, rnorm);
        }
        // Central-difference Jacobian, column per parameter.
        let m = r.len();
        let mut jac = vec![vec![0.0; dim]; m];
        for d in 0..dim {
            let h = 1e-6 * (1.0 + theta[d].abs());
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[d] += h;
            tm[d] -= h;
            match (f(&tp), f(&tm)) {
                (Some(bp), Some(bm)) => {
                    for i in 0..m {
                        jac[i][d] = (bp[i] - bm[i]) / (2.0 * h);
                    }
                }
                _ => return RefineOutcome::Settled(theta, rnorm),
            }
        }
        // Normal equations with a whisper of damping for conditioning.
        let mut ata = vec![vec![0.0; dim]; dim];
        let mut atr = vec![0.0; dim];
        for i in 0..dim {
            for j in 0..dim {
                ata[i][j] = (0..m).map(|k| jac[k][i] * jac[k][j]).sum();
            }
            atr[i] = (0..m).map(|k| jac[k][i] * r[k]).sum();
        }
        let trace: f64 = (0..dim).map(|i| ata[i][i]).sum();
        for i in 0..dim {
            ata[i][i] += 1e-12 * (1.0 + trace);
        }
        let step = match solve_dense(&mut ata, &atr) {
            Some(s) => s,
            None => return RefineOutcome::Settled(theta, rnorm),
        };
        // Halving line search on the residual norm.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t - alpha * s)
                .collect();
            if let Some(b) = f(&trial) {
                let tr = sub(&b, target);
                let tn = norm(&tr);
                if tn < rnorm {
                    theta = trial;
                    r = tr;
                    rnorm = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return RefineOutcome::Settled(theta, rnorm);
        }
    }
    if rnorm <= tol {
        RefineOutcome::Settled(theta, rnorm)
    } else {
        RefineOutcome::Unsettled(theta)
    }
}

/// Gaussian elimination with partial pivoting; `a` is clobbered.
fn solve_dense(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[col][col];
        for row in 0..col {
            x[row] -= a[row][col] * x[col];
        }
    }
    Some(x)
}

/// All real roots of a polynomial with ascending coefficients, by recursive
/// critical-point isolation: roots of the derivative split the line into
/// monotone pieces, each bisected. Even-multiplicity roots are caught at the
/// critical points themselves.
pub fn real_polynomial_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let trimmed: Vec<f64> = {
        let mut c = coeffs.to_vec();
        while c.len() > 1 && c.last().unwrap().abs() <= 1e-14 * scale {
            c.pop();
        }
        c
    };
    let deg = trimmed.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-trimmed[0] / trimmed[1]];
    }
    let eval = |x: f64| trimmed.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let deriv: Vec<f64> = trimmed
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect();
    let crits = real_polynomial_roots(&deriv);
    let lead = trimmed[deg].abs();
    let bound = 1.0 + trimmed[..deg].iter().map(|c| c.abs()).fold(0.0, f64::max) / lead;
    let mut points = vec![-bound];
    points.extend(crits.iter().copied().filter(|c| c.abs() < bound));
    points.push(bound);
    points.sort_by(f64::total_cmp);

    let near_zero = |x: f64| {
        let local: f64 = trimmed
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * x.abs().max(1.0).powi(i as i32))
            .sum();
        eval(x).abs() <= 1e-12 * local
    };
    let mut roots = Vec::new();
    for &c in &points[1..points.len() - 1] {
        if near_zero(c) {
            roots.push(c);
        }
    }
    for w in points.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        if hi - lo <= 1e-300 {
            continue;
        }
        // Nudge off endpoints that are themselves roots.
        let pad = (hi - lo) * 1e-9;
        let (mut flo, mut fhi) = (eval(lo + pad), eval(hi - pad));
        if flo == 0.0 {
            roots.push(lo + pad);
            continue;
        }
        if fhi == 0.0 {
            roots.push(hi - pad);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        lo += pad;
        hi -= pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = eval(mid);
            if fm == 0.0 || hi - lo < 1e-15 * (1.0 + mid.abs()) {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
                fhi = fm;
            }
        }
        let _ = fhi;
        roots.push(0.5 * (lo + hi));
    }
    roots.sort_by(f64::total_cmp);
    // Wide enough to absorb endpoint-pad artifacts around multiple roots.
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-7 * (1.0 + a.abs()));
    roots
}

fn dedupe_roots(roots: &mut Vec<Vec<f64>>) {
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find_map(|(x, y)| {
                let o = x.total_cmp(y);
                (o != std::cmp::Ordering::Equal).then_some(o)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(roots.len());
    for r in roots.drain(..) {
        if out.iter().all(|kept| diff_norm(kept, &r) > 1e-6) {
            out.push(r);
        }
    }
    *roots = out;
}

/// Rectangular grid region with an optional extra membership constraint.
#[derive(Debug, Clone)]
pub struct ThetaRegion {
    pub bounds: Vec<[f64; 2]>,
    pub constraint: RegionConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionConstraint {
    BoxOnly,
    /// Bounded sampling triangle: the three feasibility edges plus t2 < 1.
    Ma2Triangle,
    /// The three feasibility edges alone (open above in t2).
    Ma2Feasible,
}

impl ThetaRegion {
    pub fn interval(lo: f64, hi: f64) -> Self {
        ThetaRegion { bounds: vec![[lo, hi]], constraint: RegionConstraint::BoxOnly }
    }

    pub fn ma2_triangle() -> Self {
        ThetaRegion {
            bounds: vec![[-2.0, 2.0], [-1.0, 1.0]],
            constraint: RegionConstraint::Ma2Triangle,
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.bounds.len() {
            return false;
        }
        if theta
            .iter()
            .zip(self.bounds.iter())
            .any(|(t, b)| !t.is_finite() || *t < b[0] || *t > b[1])
        {
            return false;
        }
        match self.constraint {
            RegionConstraint::BoxOnly => true,
            RegionConstraint::Ma2Triangle => crate::model::ma2_in_triangle(theta[0], theta[1]),
            RegionConstraint::Ma2Feasible => ma2_feasible(theta[0], theta[1]),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionWitness {
    pub theta_a: Vec<f64>,
    pub theta_b: Vec<f64>,
    /// Distance between the two statistic values (post-polish when analytic).
    pub value_gap: f64,
    pub theta_gap: f64,
}

/// Preimage of a probe point's value, kept so companion roots outside the
/// region are visible in the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CompanionReport {
    pub probe: Vec<f64>,
    pub feasible: Vec<Vec<f64>>,
    pub infeasible: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InjectivityMethod {
    AnalyticGrid { points_per_dim: usize },
    Simulated { t_star: usize, k_star: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectivityVerdict {
    pub injective: bool,
    pub witness: Option<CollisionWitness>,
    pub points_checked: usize,
    pub rho_min: f64,
    pub tau: f64,
    #[serde(flatten)]
    pub method: InjectivityMethod,
    pub companions: Vec<CompanionReport>,
}

/// Scan a dense grid of the region for pairs at least `rho_min` apart in
/// parameter space whose map values land within `tau`, then polish each hit
/// into an exact collision or dismiss it. Probe points get a full preimage
/// solve so roots outside the region are reported alongside the verdict.
pub fn check_injectivity_analytic(
    binding: &BindingMap,
    region: &ThetaRegion,
    points_per_dim: usize,
    rho_min: f64,
    tau: f64,
    probes: &[Vec<f64>],
) -> Result<InjectivityVerdict> {
    if rho_min <= 0.0 || tau <= 0.0 {
        return Err(Error::InvalidConfig(
            "rho_min and tau must be positive".into(),
        ));
    }
    if region.bounds.len() != binding.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: binding.param_dim(),
            got: region.bounds.len(),
        });
    }
    if points_per_dim < 2 {
        return Err(Error::InvalidConfig("need at least 2 grid points per axis".into()));
    }
    let axes: Vec<Vec<f64>> = region
        .bounds
        .iter()
        .map(|b| linspace(b[0], b[1], points_per_dim))
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let points: Vec<Vec<f64>> = (0..total)
        .map(|flat| unflatten(flat, &axes))
        .filter(|t| region.contains(t) && binding.in_domain(t))
        .collect();
    let values: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|t| binding.eval_raw(t).ok())
        .collect();

    // Spatial hash on the map values, cell edge tau: near-equal values land
    // in the same or an adjacent cell.
    let vdim = binding.value_dim();
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            let key: Vec<i64> = v.iter().map(|x| (x / tau).floor() as i64).collect();
            cells.entry(key).or_default().push(i);
        }
    }
    let offsets = neighbor_offsets(vdim);
    let mut hits: Vec<(usize, usize, f64)> = Vec::new();
    for (key, members) in &cells {
        for off in &offsets {
            let nkey: Vec<i64> = key.iter().zip(off.iter()).map(|(k, o)| k + *o as i64).collect();
            // Visit each unordered cell pair once.
            if nkey < *key {
                continue;
            }
            let Some(others) = cells.get(&nkey) else { continue };
            for &i in members {
                for &j in others {
                    if nkey == *key && j <= i {
                        continue;
                    }
                    let (va, vb) = (values[i].as_ref().unwrap(), values[j].as_ref().unwrap());
                    if diff_norm(va, vb) <= tau {
                        let sep = diff_norm(&points[i], &points[j]);
                        if sep >= rho_min {
                            hits.push((i, j, sep));
                        }
                    }
                }
            }
        }
    }
    // Most-separated hits first: genuine distant collisions confirm fastest
    // and make the most informative witnesses.
    hits.sort_by(|a, b| b.2.total_cmp(&a.2));
    hits.truncate(100_000);

    let mut witness = None;
    for (i, j, _) in hits {
        let target = values[i].as_ref().unwrap().clone();
        let tol = root_tol(&target);
        // Cheap gate: refine from the partner point alone.
        let RefineOutcome::Settled(theta_b, r) =
            gauss_newton(&|t| binding.eval_raw(t).ok(), &points[j], &target, 100)
        else {
            continue;
        };
        if r > tol
            || diff_norm(&theta_b, &points[i]) < rho_min
            || !region.contains(&theta_b)
            || !binding.in_domain(&theta_b)
        {
            continue;
        }
        // Confirmed: pull the full preimage for a polished witness pair.
        let pre = solve_preimage(binding, &target, Some(&region.bounds))?;
        let in_region: Vec<&Vec<f64>> = pre
            .feasible
            .iter()
            .filter(|t| region.contains(t))
            .collect();
        let near = |anchor: &[f64]| {
            in_region
                .iter()
                .min_by(|a, b| diff_norm(a, anchor).total_cmp(&diff_norm(b, anchor)))
                .map(|t| (*t).clone())
        };
        let (Some(wa), Some(wb)) = (near(&points[i]), near(&theta_b)) else {
            continue;
        };
        let gap = diff_norm(&wa, &wb);
        if gap < rho_min {
            continue;
        }
        // Re-verify by direct evaluation before declaring the verdict.
        let (ba, bb) = (binding.eval_raw(&wa)?, binding.eval_raw(&wb)?);
        let value_gap = diff_norm(&ba, &bb);
        if value_gap > tau {
            continue;
        }
        witness = Some(CollisionWitness {
            theta_a: wa,
            theta_b: wb,
            value_gap,
            theta_gap: gap,
        });
        break;
    }

    let mut companions = Vec::with_capacity(probes.len());
    for probe in probes {
        let value = binding.eval(probe)?;
        let pre = solve_preimage(binding, &value, None)?;
        companions.push(CompanionReport {
            probe: probe.clone(),
            feasible: pre.feasible,
            infeasible: pre.infeasible,
        });
    }

    Ok(InjectivityVerdict {
        injective: witness.is_none(),
        witness,
        points_checked: points.len(),
        rho_min,
        tau,
        method: InjectivityMethod::AnalyticGrid { points_per_dim },
        companions,
    })
}

/// One long-trajectory statistic evaluation with a batch-means error bar.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatedBinding {
    pub value: Vec<f64>,
    pub std_err: Vec<f64>,
    pub batches: usize,
}

const BATCHES: usize = 20;

/// Approximate the limit map at `theta` by one simulation of length
/// `t_star`, with a standard error per component from 20 contiguous batches.
/// Noise-free dynamics shortcut to exact values with zero error.
pub fn simulate_binding(
    model: &Model,
    theta: &[f64],
    set: &StatisticSet,
    t_star: usize,
    seed: u64,
) -> Result<SimulatedBinding> {
    if t_star < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "simulated limit needs t_star >= 10000, got {t_star}"
        )));
    }
    let output = model.simulate(theta, t_star, seed)?;
    let value = evaluate_statistic_set(set, &output)?;
    if model_is_noise_free(model) {
        return Ok(SimulatedBinding { value, std_err: vec![0.0; set.dim()], batches: 1 });
    }
    let batch_values = batch_statistics(set, &output, BATCHES)?;
    let b = batch_values.len() as f64;
    let dim = set.dim();
    let mut std_err = vec![0.0; dim];
    for d in 0..dim {
        let mean = batch_values.iter().map(|v| v[d]).sum::<f64>() / b;
        let var = batch_values
            .iter()
            .map(|v| (v[d] - mean).powi(2))
            .sum::<f64>()
            / (b - 1.0);
        std_err[d] = (var / b).sqrt();
    }
    Ok(SimulatedBinding { value, std_err, batches: BATCHES })
}

fn model_is_noise_free(model: &Model) -> bool {
    match model {
        Model::Lv { config, mode, .. } => {
            *mode == crate::lv::LvMode::Deterministic
                || (config.noise_sd[0] == 0.0 && config.noise_sd[1] == 0.0)
        }
        _ => false,
    }
}

/// Statistic values over contiguous equal slices of the output.
fn batch_statistics(
    set: &StatisticSet,
    output: &SimOutput,
    batches: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = match output {
        SimOutput::Scalar(s) => s.len(),
        SimOutput::Planar(p) => p.times.len(),
    };
    let width = n / batches;
    if width < 5 {
        return Err(Error::SeriesTooShort { need: 5 * batches, got: n });
    }
    (0..batches)
        .map(|k| {
            let (lo, hi) = (k * width, (k + 1) * width);
            let piece = match output {
                SimOutput::Scalar(s) => {
                    SimOutput::Scalar(Series::new(s.values()[lo..hi].to_vec()))
                }
                SimOutput::Planar(p) => SimOutput::Planar(PlanarSeries {
                    times: p.times[lo..hi].to_vec(),
                    x1: p.x1[lo..hi].to_vec(),
                    x2: p.x2[lo..hi].to_vec(),
                }),
            };
            evaluate_statistic_set(set, &piece)
        })
        .collect()
}

/// Simulation-only injectivity verification: long trajectories at each of
/// the supplied parameter points, collision when two statistic vectors land
/// within max(tau, three combined standard errors). Only pairs at least
/// `rho_min` apart in parameter space count; this lets the probe set
/// cluster points around suspected preimage roots without the cluster's
/// own neighbors reading as collisions.
pub fn verify_one_to_one(
    model: &Model,
    set: &StatisticSet,
    theta_points: &[Vec<f64>],
    t_star: usize,
    tau: f64,
    rho_min: f64,
    seed: u64,
) -> Result<InjectivityVerdict> {
    if theta_points.len() < 2 {
        return Err(Error::InvalidConfig(
            "one-to-one verification needs at least two parameter points".into(),
        ));
    }
    if rho_min <= 0.0 || tau <= 0.0 {
        return Err(Error::InvalidConfig(
            "rho_min and tau must be positive".into(),
        ));
    }
    let stream = child_seed(seed, "one2one");
    let sims: Vec<SimulatedBinding> = theta_points
        .par_iter()
        .enumerate()
        .map(|(k, theta)| simulate_binding(model, theta, set, t_star, compose(stream, k as u64)))
        .collect::<Result<Vec<_>>>()?;

    // Pairs closer than rho_min in parameter space are one point at the
    // scan's resolution, never a collision. Among colliding pairs keep the
    // most separated: the strongest statement of global non-injectivity.
    let mut witness: Option<CollisionWitness> = None;
    for i in 0..sims.len() {
        for j in i + 1..sims.len() {
            if diff_norm(&theta_points[i], &theta_points[j]) < rho_min {
                continue;
            }
            let gap = diff_norm(&sims[i].value, &sims[j].value);
            let combined: f64 = (0..set.dim())
                .map(|d| sims[i].std_err[d].powi(2) + sims[j].std_err[d].powi(2))
                .sum::<f64>()
                .sqrt();
            if gap > tau.max(3.0 * combined) {
                continue;
            }
            let sep = diff_norm(&theta_points[i], &theta_points[j]);
            if witness.as_ref().is_none_or(|w| sep > w.theta_gap) {
                witness = Some(CollisionWitness {
                    theta_a: theta_points[i].clone(),
                    theta_b: theta_points[j].clone(),
                    value_gap: gap,
                    theta_gap: sep,
                });
            }
        }
    }
    Ok(InjectivityVerdict {
        injective: witness.is_none(),
        witness,
        points_checked: theta_points.len(),
        rho_min,
        tau,
        method: InjectivityMethod::Simulated { t_star, k_star: theta_points.len() },
        companions: Vec::new(),
    })
}

/// Inclusive evenly spaced grid, stable at the endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Row-major cartesian grid over a 2-D box, for building point lists.
pub fn grid_2d(bounds: &[[f64; 2]; 2], n: [usize; 2]) -> Vec<Vec<f64>> {
    let a0 = linspace(bounds[0][0], bounds[0][1], n[0]);
    let a1 = linspace(bounds[1][0], bounds[1][1], n[1]);
    let mut out = Vec::with_capacity(n[0] * n[1]);
    for x in &a0 {
        for y in &a1 {
            out.push(vec![*x, *y]);
        }
    }
    out
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1i8, 0, 1].into_iter().map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out
}

fn multi_index(mut flat: usize, axes: &[Vec<f64>]) -> Vec<usize> {
    let mut idx = vec![0; axes.len()];
    for d in (0..axes.len()).rev() {
        idx[d] = flat % axes[d].len();
        flat /= axes[d].len();
    }
    idx
}

fn flatten(idx: &[usize], axes: &[Vec<f64>]) -> usize {
    let mut flat = 0;
    for d in 0..axes.len() {
        flat = flat * axes[d].len() + idx[d];
    }
    flat
}

fn unflatten(flat: usize, axes: &[Vec<f64>]) -> Vec<f64> {
    multi_index(flat, axes)
        .into_iter()
        .zip(axes.iter())
        .map(|(i, axis)| axis[i])
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
