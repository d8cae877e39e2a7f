//! Eigenvalues of truncations and their comparison with the Julia set of
//! `R`; spectral dimension three ways.

use rayon::prelude::*;

use crate::caps::Caps;
use crate::decimation::{preimage_intervals, CubicMap};
use crate::error::{Error, Result};
use crate::julia::{backward_orbit_with, julia_cover_capped, DEDUP_TOL};
use crate::laplacian::{
    symmetric_truncation, Boundary, PqParams, SymmetricTridiagonal, TridiagonalOperator,
};

/// Eigenvalues at or below this count as the kernel when looking for λ₁.
pub const KERNEL_TOL: f64 = 1e-9;

/// Number of eigenvalues strictly below `lambda` (LDLᵀ pivot signs).
pub fn sturm_count(matrix: &SymmetricTridiagonal, lambda: f64) -> usize {
    let n = matrix.size();
    let mut count = 0;
    let mut pivot = 1.0;
    for i in 0..n {
        let coupling = if i == 0 {
            0.0
        } else {
            matrix.off[i - 1] * matrix.off[i - 1] / pivot
        };
        pivot = matrix.diag[i] - lambda - coupling;
        if pivot == 0.0 {
            pivot = -f64::EPSILON * (matrix.diag[i].abs() + lambda.abs()).max(f64::MIN_POSITIVE);
        }
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(matrix: &SymmetricTridiagonal) -> (f64, f64) {
    let n = matrix.size();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { matrix.off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { matrix.off[i].abs() } else { 0.0 };
        lo = lo.min(matrix.diag[i] - left - right);
        hi = hi.max(matrix.diag[i] + left + right);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count,
/// resolved to a few ulps.
pub fn kth_eigenvalue(matrix: &SymmetricTridiagonal, k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(matrix);
    let norm = lo.abs().max(hi.abs());
    let floor = f64::EPSILON * norm;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= floor.max(4.0 * f64::EPSILON * mid.abs()) || mid == lo || mid == hi {
            break;
        }
        if sturm_count(matrix, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All eigenvalues, ascending. Each eigenvalue is bisected independently,
/// so the output does not depend on thread scheduling.
pub fn tridiag_eigenvalues(matrix: &SymmetricTridiagonal) -> Vec<f64> {
    (0..matrix.size())
        .into_par_iter()
        .map(|k| kth_eigenvalue(matrix, k))
        .collect()
}

/// Like [`tridiag_eigenvalues`] but takes a general tridiagonal operator,
/// rejecting it unless its active block is symmetric.
pub fn operator_eigenvalues(op: &TridiagonalOperator) -> Result<Vec<f64>> {
    let sym = SymmetricTridiagonal::try_from(op)?;
    Ok(tridiag_eigenvalues(&sym))
}

pub fn truncation_spectrum(
    params: &PqParams,
    level: u32,
    boundary: Boundary,
    caps: &Caps,
) -> Result<Vec<f64>> {
    let sym = symmetric_truncation(params, level, boundary, caps)?;
    Ok(tridiag_eigenvalues(&sym))
}

/// Hausdorff distance between two finite sets of reals.
pub fn hausdorff_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    directed(&a, &b).max(directed(&b, &a))
}

fn directed(from: &[f64], to: &[f64]) -> f64 {
    from.iter()
        .map(|&x| nearest_distance(to, x))
        .fold(0.0, f64::max)
}

/// Distance from `x` to the nearest point of a sorted slice.
pub fn nearest_distance(sorted: &[f64], x: f64) -> f64 {
    let idx = sorted.partition_point(|&v| v < x);
    let mut best = f64::INFINITY;
    if idx < sorted.len() {
        best = best.min((sorted[idx] - x).abs());
    }
    if idx > 0 {
        best = best.min((x - sorted[idx - 1]).abs());
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumApproximation {
    pub level: u32,
    pub eigenvalues: Vec<f64>,
    /// Hausdorff distance to the endpoints of the level-m cover.
    pub hausdorff_to_cover: f64,
    /// Hausdorff distance to the depth-m backward orbit of `{0, 2}`.
    pub hausdorff_to_orbit: f64,
    /// Largest distance from an eigenvalue to the level-m cover.
    pub max_cover_distance: f64,
}

pub fn spectrum_approximation(
    params: &PqParams,
    level: u32,
    caps: &Caps,
) -> Result<SpectrumApproximation> {
    let eigenvalues = truncation_spectrum(params, level, Boundary::Reflecting, caps)?;
    let map = CubicMap::new(*params);
    let cover = julia_cover_capped(&map, level, caps)?;
    let orbit = backward_orbit_with(&map, &[0.0, 2.0], level, DEDUP_TOL, caps)?;
    let max_cover_distance = eigenvalues
        .iter()
        .map(|&z| cover.distance(z))
        .fold(0.0, f64::max);
    Ok(SpectrumApproximation {
        level,
        hausdorff_to_cover: hausdorff_distance(&eigenvalues, &cover.endpoints()),
        hausdorff_to_orbit: hausdorff_distance(&eigenvalues, &orbit.points),
        max_cover_distance,
        eigenvalues,
    })
}

/// Which inverse branches of each coarse eigenvalue show up one level down.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseLift {
    pub coarse: f64,
    /// Branch indices (0, 1, 2 from left to right) of the fine eigenvalues
    /// mapping onto `coarse`.
    pub branches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub level: u32,
    pub checked: usize,
    pub skipped_exceptional: usize,
    /// Largest `dist(R(z), coarse spectrum)` over non-exceptional `z`.
    pub max_distance: f64,
    pub lifts: Vec<CoarseLift>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn decimation_closure_check(
    params: &PqParams,
    level: u32,
    tolerance: f64,
    caps: &Caps,
) -> Result<ClosureReport> {
    if level == 0 {
        return Err(Error::InvalidArgument(
            "closure check needs level >= 1".into(),
        ));
    }
    let fine = truncation_spectrum(params, level, Boundary::Reflecting, caps)?;
    let coarse = truncation_spectrum(params, level - 1, Boundary::Reflecting, caps)?;
    let map = CubicMap::new(*params);
    let intervals = preimage_intervals(params);

    let mut lifts: Vec<CoarseLift> = coarse
        .iter()
        .map(|&c| CoarseLift {
            coarse: c,
            branches: Vec::new(),
        })
        .collect();
    let mut report = ClosureReport {
        level,
        checked: 0,
        skipped_exceptional: 0,
        max_distance: 0.0,
        lifts: Vec::new(),
        tolerance,
        passed: true,
    };
    for &z in &fine {
        if params.is_exceptional(z, 1e-9) {
            report.skipped_exceptional += 1;
            continue;
        }
        report.checked += 1;
        let image = map.eval(z);
        let idx = nearest_index(&coarse, image);
        report.max_distance = report.max_distance.max((coarse[idx] - image).abs());
        lifts[idx].branches.push(branch_of(&intervals, z));
    }
    report.passed = report.max_distance < tolerance;
    report.lifts = lifts;
    Ok(report)
}

fn nearest_index(sorted: &[f64], x: f64) -> usize {
    let idx = sorted.partition_point(|&v| v < x);
    match (idx.checked_sub(1), sorted.get(idx)) {
        (Some(i), Some(&right)) if (x - sorted[i]) <= (right - x) => i,
        (Some(i), None) => i,
        _ => idx,
    }
}

fn branch_of(intervals: &[(f64, f64); 3], z: f64) -> usize {
    (0..3)
        .min_by(|&i, &j| {
            let d = |k: usize| {
                let (a, b) = intervals[k];
                (a - z).max(z - b).max(0.0)
            };
            d(i).total_cmp(&d(j))
        })
        .unwrap_or(0)
}

/// Spectral dimension from the closed form, from the self-similar
/// resistance/measure scaling equation, and from eigenvalue scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    /// `log 9 / log(1 + 2/pq)`.
    pub ds_formula: f64,
    /// Root of `sum_j (r_j m_j)^{d/2} = 1`.
    pub ds_kigami_lapidus: f64,
    /// `sum_j (r_j m_j)^{d/2} - 1` at the root.
    pub kigami_lapidus_residual: f64,
    /// `2 log 3 / (-slope)` from the fit of `log λ₁` against the level.
    pub ds_empirical: f64,
    pub empirical_slope: f64,
    pub fit_levels: Vec<u32>,
}

pub fn ds_formula(params: &PqParams) -> f64 {
    9f64.ln() / (1.0 + 2.0 / params.pq()).ln()
}

/// Resistance factors `r_j` and measure factors `m_j` of the three cells.
pub fn scaling_factors(params: &PqParams) -> [(f64, f64); 3] {
    let (p, q) = (params.p(), params.q());
    let outer = (p / (1.0 + p), q / (1.0 + q));
    let middle = (q / (1.0 + p), p / (1.0 + q));
    [outer, middle, outer]
}

pub fn ds_kigami_lapidus(params: &PqParams) -> Result<(f64, f64)> {
    let products: Vec<f64> = scaling_factors(params).iter().map(|(r, m)| r * m).collect();
    let excess = |d: f64| products.iter().map(|c| c.powf(d / 2.0)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 3.0);
    if !(excess(lo) > 0.0 && excess(hi) < 0.0) {
        return Err(Error::Bracket("sum of (r_j m_j)^(d/2) = 1"));
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    Ok((root, excess(root)))
}

/// Smallest eigenvalue above [`KERNEL_TOL`] of the level-m reflecting
/// truncation.
pub fn lambda1(params: &PqParams, level: u32, caps: &Caps) -> Result<f64> {
    let sym = symmetric_truncation(params, level, Boundary::Reflecting, caps)?;
    let mut k = 0;
    loop {
        let value = kth_eigenvalue(&sym, k);
        if value > KERNEL_TOL || k + 1 >= sym.size() {
            return Ok(value);
        }
        k += 1;
    }
}

pub fn spectral_dimension(
    params: &PqParams,
    max_level: u32,
    caps: &Caps,
) -> Result<DimensionReport> {
    if max_level < 2 {
        return Err(Error::InvalidArgument(
            "spectral dimension fit needs max_level >= 2".into(),
        ));
    }
    let (ds_kl, residual) = ds_kigami_lapidus(params)?;
    let first = 3.min(max_level - 1);
    let fit_levels: Vec<u32> = (first..=max_level).collect();
    let logs = fit_levels
        .iter()
        .map(|&m| lambda1(params, m, caps).map(f64::ln))
        .collect::<Result<Vec<f64>>>()?;
    let slope = least_squares_slope(&fit_levels, &logs);
    Ok(DimensionReport {
        ds_formula: ds_formula(params),
        ds_kigami_lapidus: ds_kl,
        kigami_lapidus_residual: residual,
        ds_empirical: 2.0 * 3f64.ln() / -slope,
        empirical_slope: slope,
        fit_levels,
    })
}

fn least_squares_slope(xs: &[u32], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda1Row {
    pub level: u32,
    pub lambda1: f64,
    /// `λ₁(m) / λ₁(m+1)`; absent on the last row.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda1Table {
    pub rows: Vec<Lambda1Row>,
    /// `R'(0) = 1 + 2/pq`, the limit of the ratios.
    pub target: f64,
}

pub fn lambda1_scaling(params: &PqParams, levels: u32, caps: &Caps) -> Result<Lambda1Table> {
    if levels < 3 {
        return Err(Error::InvalidArgument(
            "lambda1 scaling needs levels >= 3".into(),
        ));
    }
    let values = (1..=levels)
        .map(|m| lambda1(params, m, caps))
        .collect::<Result<Vec<f64>>>()?;
    let rows = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Lambda1Row {
            level: i as u32 + 1,
            lambda1: v,
            ratio: values.get(i + 1).map(|next| v / next),
        })
        .collect();
    Ok(Lambda1Table {
        rows,
        target: CubicMap::new(*params).eval_prime(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub left: f64,
    pub right: f64,
    pub length: f64,
}

/// Gaps of the level-n cover, longest first.
pub fn gap_report(params: &PqParams, level: u32, caps: &Caps) -> Result<Vec<Gap>> {
    let cover = julia_cover_capped(&CubicMap::new(*params), level, caps)?;
    let mut gaps: Vec<Gap> = cover
        .gaps
        .iter()
        .map(|&(left, right)| Gap {
            left,
            right,
            length: right - left,
        })
        .collect();
    gaps.sort_by(|a, b| {
        b.length
            .total_cmp(&a.length)
            .then(a.left.total_cmp(&b.left))
    });
    Ok(gaps)
}
