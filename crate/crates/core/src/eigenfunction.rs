//! Formal eigenfunctions `Δf = z f` on the half-line, their lift through
//! one decimation step, and square-summability diagnostics.

use crate::decimation::{CubicMap, EXCEPTIONAL_TOL};
use crate::error::{Error, Result};
use crate::laplacian::{invariant_measure, transition_probabilities, InvariantMeasure, PqParams};

/// Distance from `1 ± p` within which an iterate flags the trace check.
pub const NEAR_EXCEPTIONAL: f64 = 1e-6;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenTrace {
    pub z: f64,
    /// `f_z(0..=N)` with `f_z(0) = 1`.
    pub values: Vec<f64>,
    /// `sum_{y <= x} f(y)^2`.
    pub l2_partials: Vec<f64>,
    /// `sum_{y <= x} f(y)^2 π(y)`.
    pub l2pi_partials: Vec<f64>,
    /// `f(3^n)` for every `3^n <= N`.
    pub power_trace: Vec<f64>,
}

/// Solves the eigen-equation forward from `f(0) = 1`, `f(1) = 1 - z`.
///
/// Row `x` gives `f(x+1) = f(x) + (a (f(x) - f(x-1)) - z f(x)) / b` with
/// `a + b = 1` the left/right jump probabilities; this arrangement keeps
/// `f_0 ≡ 1` and `f_2 = (-1)^x` exact in floating point.
pub fn extend_formal_eigenfunction(params: &PqParams, z: f64, extent: usize) -> EigenTrace {
    let extent = extent.max(1);
    let mut values = Vec::with_capacity(extent + 1);
    values.push(1.0);
    values.push(1.0 - z);
    for x in 1..extent {
        let (a, b) = transition_probabilities(params, x as u64);
        let (prev, cur) = (values[x - 1], values[x]);
        values.push(cur + (a * (cur - prev) - z * cur) / b);
    }

    let pi = invariant_measure(params, extent);
    let mut plain = CompensatedSum::default();
    let mut weighted = CompensatedSum::default();
    let mut l2_partials = Vec::with_capacity(extent + 1);
    let mut l2pi_partials = Vec::with_capacity(extent + 1);
    for (f, w) in values.iter().zip(&pi.values) {
        plain.add(f * f);
        weighted.add(f * f * w);
        l2_partials.push(plain.value());
        l2pi_partials.push(weighted.value());
    }

    let power_trace = powers_of_three(extent).map(|x| values[x]).collect();
    EigenTrace {
        z,
        values,
        l2_partials,
        l2pi_partials,
        power_trace,
    }
}

fn powers_of_three(limit: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(1usize), |x| x.checked_mul(3)).take_while(move |&x| x <= limit)
}

/// Largest relative residual of the interior rows `1..N` of `Δf = z f`.
pub fn eigen_equation_residual(params: &PqParams, trace: &EigenTrace) -> f64 {
    let f = &trace.values;
    let mut worst: f64 = 0.0;
    for x in 1..f.len() - 1 {
        let (a, b) = transition_probabilities(params, x as u64);
        let lhs = f[x] - a * f[x - 1] - b * f[x + 1];
        let scale = f[x - 1].abs().max(f[x].abs()).max(f[x + 1].abs()).max(1.0);
        worst = worst.max((lhs - trace.z * f[x]).abs() / scale);
    }
    worst
}

/// Comparison of `f_z(3^n)` with `1 - R∘n(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTraceCheck {
    /// `|f_z(3^n) - (1 - R∘n(z))|`.
    pub residuals: Vec<f64>,
    /// The same, divided by `max(1, |1 - R∘n(z)|)`.
    pub relative: Vec<f64>,
    /// Set when some `R∘k(z)`, `k < n`, came within
    /// [`NEAR_EXCEPTIONAL`] of `1 ± p`.
    pub near_exceptional: Vec<bool>,
}

pub fn trace_at_powers_of_three(trace: &EigenTrace, map: &CubicMap) -> PowerTraceCheck {
    let params = map.params();
    let mut iterate = trace.z;
    let mut flagged = false;
    let mut out = PowerTraceCheck {
        residuals: Vec::new(),
        relative: Vec::new(),
        near_exceptional: Vec::new(),
    };
    for &value in &trace.power_trace {
        let want = 1.0 - iterate;
        let residual = (value - want).abs();
        out.residuals.push(residual);
        out.relative.push(residual / want.abs().max(1.0));
        out.near_exceptional.push(flagged);
        flagged |= params.is_exceptional(iterate, NEAR_EXCEPTIONAL);
        iterate = map.eval(iterate);
    }
    out
}

/// Lifts an eigenfunction of the level-(m-1) truncation at `R(z)` to the
/// level-m truncation at `z`: coarse values land on multiples of three and
/// each pair `(3k+1, 3k+2)` solves its 2x2 block,
/// `f_fine = -(Q - z)^{-1} X f_coarse`.
pub fn lift_eigenfunction(
    params: &PqParams,
    level: u32,
    z: f64,
    coarse: &[f64],
) -> Result<Vec<f64>> {
    if level == 0 {
        return Err(Error::InvalidArgument("lift needs level >= 1".into()));
    }
    if params.is_exceptional(z, EXCEPTIONAL_TOL) {
        return Err(Error::Exceptional { z });
    }
    let blocks = 3usize.pow(level - 1);
    if coarse.len() != blocks + 1 {
        return Err(Error::DimensionMismatch {
            expected: blocks + 1,
            got: coarse.len(),
        });
    }
    let (p, q) = (params.p(), params.q());
    let w = 1.0 - z;
    let det = (w - p) * (w + p);
    let mut fine = vec![0.0; 3 * blocks + 1];
    for k in 0..blocks {
        let (left, right) = (coarse[k], coarse[k + 1]);
        fine[3 * k] = left;
        fine[3 * k + 1] = q * (w * left + p * right) / det;
        fine[3 * k + 2] = q * (p * left + w * right) / det;
    }
    fine[3 * blocks] = coarse[blocks];
    Ok(fine)
}

/// Evidence that a formal eigenfunction is not square summable.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// `f(3^n)^2 π(3^n)`.
    pub power_terms: Vec<f64>,
    pub pi_at_powers: Vec<f64>,
    /// Largest relative spread of `π(3^n)` over `n`.
    pub pi_spread: f64,
    pub min_abs_power: f64,
    /// The tail of `power_terms` keeps a term of at least a tenth of the
    /// largest one.
    pub power_non_cauchy: bool,
    /// `sum f(x)^2 π(x)` over `3^n <= x < 3^(n+1)`.
    pub block_terms: Vec<f64>,
    pub block_non_cauchy: bool,
    pub divergent: bool,
}

/// Fraction of the leading term a tail term must reach.
pub const CAUCHY_MARGIN: f64 = 0.1;

/// Terms at or below `floor` are rounding noise and never count.
fn non_cauchy(terms: &[f64], floor: f64) -> bool {
    if terms.len() < 2 {
        return false;
    }
    let leading = terms.iter().cloned().fold(0.0, f64::max);
    let tail = terms[terms.len() / 2..].iter().cloned().fold(0.0, f64::max);
    leading > floor && tail >= CAUCHY_MARGIN * leading
}

pub fn norm_divergence_report(
    trace: &EigenTrace,
    pi: &InvariantMeasure,
) -> Result<DivergenceReport> {
    let n = trace.values.len();
    if pi.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    let powers: Vec<usize> = powers_of_three(n - 1).collect();
    let pi_at_powers: Vec<f64> = powers.iter().map(|&x| pi.values[x]).collect();
    let power_terms: Vec<f64> = powers
        .iter()
        .map(|&x| trace.values[x] * trace.values[x] * pi.values[x])
        .collect();
    let pi_spread = match pi_at_powers.first() {
        Some(&base) => pi_at_powers
            .iter()
            .map(|v| (v - base).abs() / base)
            .fold(0.0, f64::max),
        None => 0.0,
    };
    let min_abs_power = powers
        .iter()
        .map(|&x| trace.values[x].abs())
        .fold(f64::INFINITY, f64::min);

    let block_terms: Vec<f64> = powers
        .iter()
        .filter(|&&x| 3 * x <= n)
        .map(|&x| {
            (x..3 * x)
                .map(|y| trace.values[y] * trace.values[y] * pi.values[y])
                .sum()
        })
        .collect();

    let magnitude = trace
        .values
        .iter()
        .zip(&pi.values)
        .map(|(f, w)| f * f * w)
        .fold(1.0, f64::max);
    let floor = 1e-20 * magnitude;
    let power_non_cauchy = non_cauchy(&power_terms, floor);
    let block_non_cauchy = non_cauchy(&block_terms, floor);
    Ok(DivergenceReport {
        power_terms,
        pi_at_powers,
        pi_spread,
        min_abs_power,
        power_non_cauchy,
        block_terms,
        block_non_cauchy,
        divergent: power_non_cauchy || block_non_cauchy,
    })
}
