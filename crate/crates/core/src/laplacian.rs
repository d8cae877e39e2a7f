//! The pq Laplacian on the half-line, its finite truncations and the
//! symmetrizing measure.
//!
//! Row `x` of the operator reads
//!
//! ```text
//! x = 0:                 f(0) - f(1)
//! residue(x) = 1:        f(x) - q f(x-1) - p f(x+1)
//! residue(x) = 2:        f(x) - p f(x-1) - q f(x+1)
//! ```
//!
//! where `residue(x)` is `x / 3^m(x) mod 3` and `3^m(x)` is the largest
//! power of three dividing `x`. The level-m truncation lives on the sites
//! `0..=3^m`.

use crate::caps::Caps;
use crate::error::{Error, Result};

/// Relative tolerance for detailed-balance checks.
pub const BALANCE_TOL: f64 = 1e-12;

/// The model parameter `p` together with `q = 1 - p`.
///
/// `p` is snapped on construction so that `p + q == 1` holds exactly in
/// binary64: `q` is rounded from `1 - p` and `p` is then recomputed as
/// `1 - q`, which is exact. The shift is below one ulp of `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqParams {
    p: f64,
    q: f64,
    pq: f64,
}

impl PqParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        let q = 1.0 - p;
        let p = 1.0 - q;
        Ok(Self { p, q, pq: p * q })
    }

    /// The parameter with `p <= 1/2` whose product `p(1-p)` equals `pq`.
    pub fn from_pq(pq: f64) -> Result<Self> {
        if !(pq > 0.0 && pq <= 0.25) {
            return Err(Error::InvalidProduct(pq));
        }
        // Stable small root of p^2 - p + pq = 0.
        let disc = (1.0 - 4.0 * pq).max(0.0).sqrt();
        Self::new(2.0 * pq / (1.0 + disc))
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn pq(&self) -> f64 {
        self.pq
    }

    /// The exceptional pair `(1 + p, 1 - p)`, the spectrum of the
    /// eliminated 2x2 blocks.
    pub fn exceptional(&self) -> (f64, f64) {
        (1.0 + self.p, self.q)
    }

    pub fn is_exceptional(&self, z: f64, tol: f64) -> bool {
        let (hi, lo) = self.exceptional();
        (z - hi).abs() <= tol || (z - lo).abs() <= tol
    }

    /// Parameters for `1 - p`. Exact: `p` and `q` trade places bitwise.
    pub fn swapped(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
            pq: self.q * self.p,
        }
    }
}

/// Which branch of the operator definition governs a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Residue {
    Boundary,
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteClass {
    pub site: u64,
    /// Largest `m` with `3^m | site`; zero at the origin.
    pub depth: u32,
    pub residue: Residue,
}

pub fn classify_site(x: u64) -> SiteClass {
    if x == 0 {
        return SiteClass {
            site: 0,
            depth: 0,
            residue: Residue::Boundary,
        };
    }
    let mut reduced = x;
    let mut depth = 0;
    while reduced.is_multiple_of(3) {
        reduced /= 3;
        depth += 1;
    }
    let residue = if reduced % 3 == 1 {
        Residue::One
    } else {
        Residue::Two
    };
    SiteClass {
        site: x,
        depth,
        residue,
    }
}

/// Coefficients of one row: `(Δf)(x) = sub f(x-1) + diag f(x) + sup f(x+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCoefficients {
    /// Absent at the origin.
    pub sub: Option<f64>,
    pub diag: f64,
    pub sup: f64,
}

pub fn row_coefficients(params: &PqParams, x: u64) -> RowCoefficients {
    let (p, q) = (params.p, params.q);
    match classify_site(x).residue {
        Residue::Boundary => RowCoefficients {
            sub: None,
            diag: 1.0,
            sup: -1.0,
        },
        Residue::One => RowCoefficients {
            sub: Some(-q),
            diag: 1.0,
            sup: -p,
        },
        Residue::Two => RowCoefficients {
            sub: Some(-p),
            diag: 1.0,
            sup: -q,
        },
    }
}

/// Jump probabilities `(P(x -> x-1), P(x -> x+1))` of the pq random walk.
pub fn transition_probabilities(params: &PqParams, x: u64) -> (f64, f64) {
    let row = row_coefficients(params, x);
    (-row.sub.unwrap_or(0.0), -row.sup)
}

/// Convention for the last row of a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Row `N` is `f(N) - f(N-1)`, mirroring the origin.
    Reflecting,
    /// Row `N` is the identity and site `N` is dropped from spectra.
    Dirichlet,
}

/// A tridiagonal matrix stored by rows. `sub[x]` couples `x` to `x - 1`
/// and `sup[x]` couples `x` to `x + 1`; `sub[0]` and `sup[n-1]` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
    pub sup: Vec<f64>,
    pub boundary: Boundary,
}

impl TridiagonalOperator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Number of sites that take part in spectral computations.
    pub fn active_size(&self) -> usize {
        match self.boundary {
            Boundary::Reflecting => self.size(),
            Boundary::Dirichlet => self.size() - 1,
        }
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        Ok((0..n)
            .map(|x| {
                let mut acc = self.diag[x] * f[x];
                if x > 0 {
                    acc += self.sub[x] * f[x - 1];
                }
                if x + 1 < n {
                    acc += self.sup[x] * f[x + 1];
                }
                acc
            })
            .collect())
    }

    /// Entry `(row, col)`; zero off the band.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if col + 1 == row {
            self.sub[row]
        } else if row + 1 == col {
            self.sup[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n)
            .map(|r| (0..n).map(|c| self.entry(r, c)).collect())
            .collect()
    }
}

pub fn build_truncation(
    params: &PqParams,
    level: u32,
    boundary: Boundary,
) -> Result<TridiagonalOperator> {
    build_truncation_capped(params, level, boundary, &Caps::default())
}

pub fn build_truncation_capped(
    params: &PqParams,
    level: u32,
    boundary: Boundary,
    caps: &Caps,
) -> Result<TridiagonalOperator> {
    if level > caps.max_level {
        return Err(Error::LevelCap {
            level,
            cap: caps.max_level,
        });
    }
    let last = 3usize.pow(level);
    let mut diag = vec![1.0; last + 1];
    let mut sub = vec![0.0; last + 1];
    let mut sup = vec![0.0; last + 1];
    for x in 0..last {
        let row = row_coefficients(params, x as u64);
        sub[x] = row.sub.unwrap_or(0.0);
        sup[x] = row.sup;
    }
    match boundary {
        Boundary::Reflecting => sub[last] = -1.0,
        Boundary::Dirichlet => diag[last] = 1.0,
    }
    Ok(TridiagonalOperator {
        diag,
        sub,
        sup,
        boundary,
    })
}

/// Positive weights with `π(0) = 1` making the walk reversible.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub values: Vec<f64>,
}

impl InvariantMeasure {
    /// Measure of the walk generated by a truncation's own rows, read off
    /// the active block.
    pub fn of_operator(op: &TridiagonalOperator) -> Self {
        let n = op.active_size();
        let mut values = Vec::with_capacity(n);
        values.push(1.0);
        for x in 0..n.saturating_sub(1) {
            let next = values[x] * op.sup[x] / op.sub[x + 1];
            values.push(next);
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest relative detailed-balance residual over the edges of `op`'s
    /// active block, together with the offending edge.
    pub fn balance_residual(&self, op: &TridiagonalOperator) -> (f64, usize) {
        let n = op.active_size().min(self.values.len());
        let mut worst = (0.0, 0);
        for x in 0..n.saturating_sub(1) {
            let forward = self.values[x] * -op.sup[x];
            let backward = self.values[x + 1] * -op.sub[x + 1];
            let scale = forward.abs().max(backward.abs()).max(f64::MIN_POSITIVE);
            let r = (forward - backward).abs() / scale;
            if r > worst.0 {
                worst = (r, x);
            }
        }
        worst
    }
}

/// Invariant measure of the infinite walk on sites `0..=extent`.
pub fn invariant_measure(params: &PqParams, extent: usize) -> InvariantMeasure {
    let mut values = Vec::with_capacity(extent + 1);
    values.push(1.0);
    for x in 0..extent {
        let (_, right) = transition_probabilities(params, x as u64);
        let (left_of_next, _) = transition_probabilities(params, x as u64 + 1);
        values.push(values[x] * right / left_of_next);
    }
    InvariantMeasure { values }
}

/// A real symmetric tridiagonal matrix: `diag` of length n, `off` of
/// length n - 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymmetricTridiagonal {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i];
            }
        }
        m
    }
}

impl TryFrom<&TridiagonalOperator> for SymmetricTridiagonal {
    type Error = Error;

    /// Accepts only operators whose active block is already symmetric.
    fn try_from(op: &TridiagonalOperator) -> Result<Self> {
        let n = op.active_size();
        for x in 0..n.saturating_sub(1) {
            let gap = (op.sup[x] - op.sub[x + 1]).abs();
            let scale = op.sup[x].abs().max(op.sub[x + 1].abs()).max(1.0);
            if gap > 1e-14 * scale {
                return Err(Error::NotSymmetric {
                    row: x,
                    col: x + 1,
                    gap,
                });
            }
        }
        Ok(Self {
            diag: op.diag[..n].to_vec(),
            off: op.sup[..n.saturating_sub(1)].to_vec(),
        })
    }
}

/// `D^{1/2} op D^{-1/2}` with `D = diag(π)`, restricted to the active block.
///
/// Off-diagonals become `-sqrt(P(x -> x+1) P(x+1 -> x))`, so the result
/// is symmetric and isospectral to `op`. Fails when `pi` does not satisfy
/// detailed balance for `op`.
pub fn symmetrize(op: &TridiagonalOperator, pi: &InvariantMeasure) -> Result<SymmetricTridiagonal> {
    let n = op.active_size();
    if pi.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pi.len(),
        });
    }
    let (residual, site) = pi.balance_residual(op);
    if residual > BALANCE_TOL {
        return Err(Error::DetailedBalance {
            site,
            next: site + 1,
            residual,
        });
    }
    let off = (0..n.saturating_sub(1))
        .map(|x| -(op.sup[x] * op.sub[x + 1]).sqrt())
        .collect();
    Ok(SymmetricTridiagonal {
        diag: op.diag[..n].to_vec(),
        off,
    })
}

/// Build, measure and symmetrize the level-m truncation in one step.
pub fn symmetric_truncation(
    params: &PqParams,
    level: u32,
    boundary: Boundary,
    caps: &Caps,
) -> Result<SymmetricTridiagonal> {
    let op = build_truncation_capped(params, level, boundary, caps)?;
    let pi = InvariantMeasure::of_operator(&op);
    symmetrize(&op, &pi)
}
