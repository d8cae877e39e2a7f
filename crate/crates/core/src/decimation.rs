//! The decimation polynomial `R`, the companion function `φ₀`, and the
//! Schur-complement identity that ties a level-m truncation to the
//! level-(m-1) one.
//!
//! Splitting the sites into multiples of three (coarse) and the rest
//! (fine), the truncation takes the block form
//!
//! ```text
//! Δ - z = | I0 - z   Xbar  |
//!         |   X     Q - z  |
//! ```
//!
//! and eliminating the fine block gives
//! `S(z) = (I0 - z) - Xbar (Q - z)^{-1} X = φ₀(z) (Δ⁺ - R(z))`, where `Δ⁺`
//! is the coarser truncation relabelled by `x -> 3x`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laplacian::{build_truncation, Boundary, PqParams, TridiagonalOperator};

/// Distance from `1 ± p` below which `z` counts as exceptional.
pub const EXCEPTIONAL_TOL: f64 = 1e-12;

/// `R(z) = z (z^2 - 3z + 2 + pq) / pq` and its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicMap {
    params: PqParams,
    /// Monomial coefficients, constant term first.
    coefficients: [f64; 4],
}

impl CubicMap {
    pub fn new(params: PqParams) -> Self {
        let pq = params.pq();
        Self {
            params,
            coefficients: [0.0, (2.0 + pq) / pq, -3.0 / pq, 1.0 / pq],
        }
    }

    pub fn params(&self) -> &PqParams {
        &self.params
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coefficients
    }

    /// Poles of `φ₀`, i.e. the exceptional set.
    pub fn phi0_poles(&self) -> (f64, f64) {
        self.params.exceptional()
    }

    /// Evaluates `R` as `z + z(z-1)(z-2)/pq`.
    ///
    /// Algebraically the same cubic as the monomial form, but exact at the
    /// fixed points 0, 1 and 2 so their forward orbits stay put.
    pub fn eval(&self, z: f64) -> f64 {
        self.eval_generic(z)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.eval_generic(z)
    }

    fn eval_generic<T>(&self, z: T) -> T
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + From<f64>,
    {
        let one = T::from(1.0);
        let two = T::from(2.0);
        z + z * (z - one) * (z - two) * T::from(1.0 / self.params.pq())
    }

    /// Horner evaluation of the monomial coefficients.
    pub fn eval_horner(&self, z: f64) -> f64 {
        self.horner_generic(z)
    }

    pub fn eval_horner_complex(&self, z: Complex64) -> Complex64 {
        self.horner_generic(z)
    }

    fn horner_generic<T>(&self, z: T) -> T
    where
        T: Copy + Add<Output = T> + Mul<Output = T> + From<f64>,
    {
        let c = self.coefficients;
        ((T::from(c[3]) * z + T::from(c[2])) * z + T::from(c[1])) * z + T::from(c[0])
    }

    /// `R'(z) = 1 + (3z^2 - 6z + 2)/pq`.
    pub fn eval_prime(&self, z: f64) -> f64 {
        self.prime_generic(z)
    }

    pub fn eval_prime_complex(&self, z: Complex64) -> Complex64 {
        self.prime_generic(z)
    }

    fn prime_generic<T>(&self, z: T) -> T
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + From<f64>,
    {
        let inner = T::from(3.0) * z * z - T::from(6.0) * z + T::from(2.0);
        T::from(1.0) + inner * T::from(1.0 / self.params.pq())
    }

    /// `R∘n(z)`.
    pub fn iterate(&self, z: f64, n: u32) -> f64 {
        (0..n).fold(z, |acc, _| self.eval(acc))
    }
}

/// `(1 - z)^2 - p^2`, factored for accuracy near the poles.
fn pole_factor(params: &PqParams, z: f64) -> f64 {
    let w = 1.0 - z;
    (w - params.p()) * (w + params.p())
}

/// `φ₀(z) = pq / ((1 - z)^2 - p^2)`; never zero, with poles at `1 ± p`.
pub fn eval_phi0(params: &PqParams, z: f64) -> Result<f64> {
    if params.is_exceptional(z, EXCEPTIONAL_TOL) {
        return Err(Error::Exceptional { z });
    }
    Ok(params.pq() / pole_factor(params, z))
}

/// `{1 + p, 1 - p}`, the spectrum of the eliminated block.
pub fn exceptional_set(params: &PqParams) -> [f64; 2] {
    let (hi, lo) = params.exceptional();
    [hi, lo]
}

/// The four blocks of the level-m reflecting truncation.
///
/// Coarse index `k` is site `3k`; fine index `2k` is site `3k+1` and
/// `2k+1` is site `3k+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurBlocks {
    pub level: u32,
    /// Diagonal of `I0`.
    pub i0: Vec<f64>,
    /// Row `k` of `Xbar`: couplings of site `3k` to `3k-1` and `3k+1`
    /// (zero where the neighbour is outside the truncation).
    pub xbar: Vec<[f64; 2]>,
    /// Per block `k`: `X(3k+1, 3k)` and `X(3k+2, 3k+3)`.
    pub x: Vec<[f64; 2]>,
    /// The 2x2 diagonal blocks of `Q` on `{3k+1, 3k+2}`.
    pub q: Vec<[[f64; 2]; 2]>,
}

impl SchurBlocks {
    pub fn coarse_len(&self) -> usize {
        self.i0.len()
    }

    pub fn fine_len(&self) -> usize {
        2 * self.q.len()
    }

    /// `Xbar` as a coarse-by-fine matrix.
    pub fn xbar_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.fine_len()]; self.coarse_len()];
        for (k, [left, right]) in self.xbar.iter().enumerate() {
            if k > 0 {
                m[k][2 * k - 1] = *left;
            }
            if k < self.q.len() {
                m[k][2 * k] = *right;
            }
        }
        m
    }

    /// `X` as a fine-by-coarse matrix.
    pub fn x_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.coarse_len()]; self.fine_len()];
        for (k, [left, right]) in self.x.iter().enumerate() {
            m[2 * k][k] = *left;
            m[2 * k + 1][k + 1] = *right;
        }
        m
    }

    pub fn q_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.fine_len()]; self.fine_len()];
        for (k, block) in self.q.iter().enumerate() {
            for (i, row) in block.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    m[2 * k + i][2 * k + j] = *v;
                }
            }
        }
        m
    }

    /// Closed-form inverse of the block `Q_k - z`.
    fn shifted_block_inverse(&self, k: usize, z: f64) -> Result<[[f64; 2]; 2]> {
        let [[a, b], [c, d]] = self.q[k];
        let (a, d) = (a - z, d - z);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Exceptional { z });
        }
        Ok([[d / det, -b / det], [-c / det, a / det]])
    }

    /// Nonzero entries of `Xbar (Q - z)^{-1} X`, keyed by coarse indices.
    pub fn coupling_product(&self, z: f64) -> Result<BTreeMap<(usize, usize), f64>> {
        let mut out = BTreeMap::new();
        for k in 0..self.q.len() {
            let inv = self.shifted_block_inverse(k, z)?;
            // Block k touches coarse k through fine 2k and coarse k+1
            // through fine 2k+1.
            let rows = [
                (k, self.xbar[k][1], 0usize),
                (k + 1, self.xbar[k + 1][0], 1),
            ];
            let cols = [(k, self.x[k][0], 0usize), (k + 1, self.x[k][1], 1)];
            for &(ci, xb, fi) in &rows {
                for &(cj, xv, fj) in &cols {
                    *out.entry((ci, cj)).or_insert(0.0) += xb * inv[fi][fj] * xv;
                }
            }
        }
        Ok(out)
    }

    /// Nonzero entries of `S(z) = (I0 - z) - Xbar (Q - z)^{-1} X`.
    pub fn schur_complement(&self, z: f64) -> Result<BTreeMap<(usize, usize), f64>> {
        let mut s: BTreeMap<(usize, usize), f64> = self
            .coupling_product(z)?
            .into_iter()
            .map(|(key, v)| (key, -v))
            .collect();
        for (k, d) in self.i0.iter().enumerate() {
            *s.entry((k, k)).or_insert(0.0) += d - z;
        }
        Ok(s)
    }
}

/// Partitions the level-m reflecting truncation into coarse and fine
/// blocks.
pub fn schur_blocks(params: &PqParams, level: u32) -> Result<SchurBlocks> {
    if level == 0 {
        return Err(Error::InvalidArgument(
            "schur blocks need level >= 1".into(),
        ));
    }
    let op = build_truncation(params, level, Boundary::Reflecting)?;
    Ok(blocks_of(&op, level))
}

fn blocks_of(op: &TridiagonalOperator, level: u32) -> SchurBlocks {
    let coarse = 3usize.pow(level - 1);
    let i0 = (0..=coarse).map(|k| op.diag[3 * k]).collect();
    let xbar = (0..=coarse)
        .map(|k| {
            let site = 3 * k;
            [op.sub[site], op.sup[site]]
        })
        .collect();
    let x = (0..coarse)
        .map(|k| [op.sub[3 * k + 1], op.sup[3 * k + 2]])
        .collect();
    let q = (0..coarse)
        .map(|k| {
            let (a, b) = (3 * k + 1, 3 * k + 2);
            [[op.diag[a], op.sup[a]], [op.sub[b], op.diag[b]]]
        })
        .collect();
    SchurBlocks {
        level,
        i0,
        xbar,
        x,
        q,
    }
}

/// Outcome of comparing `S(z)` against `φ₀(z)(Δ⁺ - R(z))` entrywise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecimationResidual {
    pub level: u32,
    pub z: f64,
    /// Largest deviation over rows `3k` with `0 < k < 3^(m-1)`.
    pub interior: f64,
    /// Largest deviation over the rows at both ends.
    pub boundary: f64,
    /// Largest magnitude among the compared entries.
    pub scale: f64,
}

pub fn verify_decimation_identity(
    params: &PqParams,
    level: u32,
    z: f64,
) -> Result<DecimationResidual> {
    let phi0 = eval_phi0(params, z)?;
    let blocks = schur_blocks(params, level)?;
    let s = blocks.schur_complement(z)?;
    let coarse_op = build_truncation(params, level - 1, Boundary::Reflecting)?;
    let r = CubicMap::new(*params).eval(z);

    let expected = |i: usize, j: usize| {
        let shift = if i == j { r } else { 0.0 };
        phi0 * (coarse_op.entry(i, j) - shift)
    };

    let last = blocks.coarse_len() - 1;
    let mut keys: Vec<(usize, usize)> = s.keys().copied().collect();
    for i in 0..=last {
        for j in i.saturating_sub(1)..=(i + 1).min(last) {
            keys.push((i, j));
        }
    }
    keys.sort_unstable();
    keys.dedup();

    let mut out = DecimationResidual {
        level,
        z,
        interior: 0.0,
        boundary: 0.0,
        scale: 0.0,
    };
    for (i, j) in keys {
        let got = s.get(&(i, j)).copied().unwrap_or(0.0);
        let want = expected(i, j);
        let dev = (got - want).abs();
        out.scale = out.scale.max(got.abs()).max(want.abs());
        if i == 0 || i == last {
            out.boundary = out.boundary.max(dev);
        } else {
            out.interior = out.interior.max(dev);
        }
    }
    Ok(out)
}

/// The three intervals whose union is `R^{-1}([0, 2])`, in increasing
/// order. Each is mapped monotonically onto `[0, 2]`.
pub fn preimage_intervals(params: &PqParams) -> [(f64, f64); 3] {
    let (small, large) = if params.p() <= 0.5 {
        (params.p(), params.q())
    } else {
        (params.q(), params.p())
    };
    [(0.0, small), (large, 1.0 + small), (1.0 + large, 2.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    fn params(p: f64) -> PqParams {
        PqParams::new(p).unwrap()
    }

    #[test]
    fn r_fixed_points_and_exceptional_images() {
        for p in [0.1, 0.3, 0.5, 0.8] {
            let map = CubicMap::new(params(p));
            assert_eq!(map.eval(0.0), 0.0);
            assert_eq!(map.eval(1.0), 1.0);
            assert_eq!(map.eval(2.0), 2.0);
            let (hi, lo) = map.phi0_poles();
            assert!((map.eval(lo) - 2.0).abs() < 1e-12);
            assert!(map.eval(hi).abs() < 1e-12);
        }
    }

    #[test]
    fn r_at_p_and_q() {
        let pp = params(0.3);
        let map = CubicMap::new(pp);
        assert!((map.eval(pp.p()) - 2.0).abs() < 1e-14);
        assert!((map.eval(pp.q()) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_case() {
        let map = CubicMap::new(params(0.5));
        assert_eq!(map.coefficients(), [0.0, 9.0, -12.0, 4.0]);
        for z in [0.0, 0.2, 0.5, 1.3, 2.0] {
            let want = 4.0 * z * z * z - 12.0 * z * z + 9.0 * z;
            assert!((map.eval(z) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn horner_agrees_with_factored_form() {
        let map = CubicMap::new(params(0.37));
        for i in 0..=40 {
            let z = -0.5 + 0.075 * i as f64;
            let (a, b) = (map.eval(z), map.eval_horner(z));
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn complex_evaluation() {
        let map = CubicMap::new(params(0.3));
        let z = Complex64::new(0.4, 0.2);
        let (a, b) = (map.eval_complex(z), map.eval_horner_complex(z));
        assert!((a - b).norm() < 1e-13);
        assert_eq!(
            map.eval_complex(Complex64::new(1.0, 0.0)),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn derivative_values() {
        let map = CubicMap::new(params(0.5));
        assert_eq!(map.eval_prime(0.0), 9.0);
        assert_eq!(map.eval_prime(1.0), -3.0);
        assert_eq!(map.eval_prime(2.0), 9.0);
        let pp = params(0.3);
        let map = CubicMap::new(pp);
        let want = (2.0 + pp.pq()) / pp.pq();
        assert!((map.eval_prime(0.0) - want).abs() < 1e-13);
        assert!((map.eval_prime(2.0) - want).abs() < 1e-13);
        assert!((map.eval_prime(1.0) - (1.0 - 1.0 / pp.pq())).abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let map = CubicMap::new(params(0.21));
        for i in 0..20 {
            let z = 0.1 * i as f64;
            let h = 1e-6;
            let fd = (map.eval(z + h) - map.eval(z - h)) / (2.0 * h);
            assert!((fd - map.eval_prime(z)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_in_p_and_q() {
        for p in [0.3, 0.125, 0.41] {
            let a = CubicMap::new(params(p));
            let b = CubicMap::new(params(p).swapped());
            assert_eq!(a.coefficients(), b.coefficients());
            assert_eq!(
                CubicMap::new(params(1.0 - p)).coefficients(),
                a.coefficients()
            );
        }
    }

    #[test]
    fn phi0_values() {
        let pp = params(0.3);
        let at0 = eval_phi0(&pp, 0.0).unwrap();
        assert!((at0 - pp.p() / (1.0 + pp.p())).abs() < 1e-15);
        let at1 = eval_phi0(&pp, 1.0).unwrap();
        assert!((at1 + pp.q() / pp.p()).abs() < 1e-14);
        assert!(matches!(
            eval_phi0(&pp, 1.0 + pp.p()),
            Err(Error::Exceptional { .. })
        ));
        assert!(matches!(
            eval_phi0(&pp, 1.0 - pp.p()),
            Err(Error::Exceptional { .. })
        ));
    }

    #[test]
    fn exceptional_pair() {
        let [a, b] = exceptional_set(&params(0.3));
        assert!((a - 1.3).abs() < 1e-15 && (b - 0.7).abs() < 1e-15);
        let [a, b] = exceptional_set(&params(0.5));
        assert_eq!((a, b), (1.5, 0.5));
        // Eigenvalues of [[1, -p], [-p, 1]] from trace and determinant.
        let p = 0.3;
        let det: f64 = 1.0 - p * p;
        let half_gap = (1.0 - det).sqrt();
        assert!((1.0 + half_gap - 1.3).abs() < 1e-15);
        assert!((1.0 - half_gap - 0.7).abs() < 1e-15);
    }

    #[test]
    fn block_entries() {
        let pp = params(0.3);
        let blocks = schur_blocks(&pp, 3).unwrap();
        assert!(blocks.i0.iter().all(|&d| d == 1.0));
        for block in &blocks.q {
            assert_eq!(*block, [[1.0, -pp.p()], [-pp.p(), 1.0]]);
        }
        assert_eq!(blocks.xbar[0], [0.0, -1.0]);
        // X(3k+1, 3k) = X(3k+2, 3k+3) = -q: X maps coarse to fine.
        assert!(blocks.x.iter().all(|&[a, b]| a == -pp.q() && b == -pp.q()));
        for (k, row) in blocks
            .xbar
            .iter()
            .enumerate()
            .skip(1)
            .take(blocks.q.len() - 1)
        {
            let want = match crate::laplacian::classify_site(3 * k as u64).residue {
                crate::laplacian::Residue::One => [-pp.q(), -pp.p()],
                _ => [-pp.p(), -pp.q()],
            };
            assert_eq!(*row, want);
        }
        assert!(schur_blocks(&pp, 0).is_err());
    }

    #[test]
    fn coupling_product_closed_forms() {
        let pp = params(0.3);
        let z = 0.11;
        let blocks = schur_blocks(&pp, 2).unwrap();
        let prod = blocks.coupling_product(z).unwrap();
        let d = (1.0 - z) * (1.0 - z) - pp.p() * pp.p();
        let diag = pp.q() * (1.0 - z) / d;
        let coarse = build_truncation(&pp, 1, Boundary::Reflecting).unwrap();
        let phi0 = eval_phi0(&pp, z).unwrap();
        for (&(i, j), &v) in &prod {
            if i == j {
                assert!((v - diag).abs() < 1e-14, "diag ({i},{i}) = {v}");
            } else {
                assert!((v + phi0 * coarse.entry(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_at_sample_point() {
        let res = verify_decimation_identity(&params(0.3), 2, 0.11).unwrap();
        assert!(res.interior < 1e-12, "{res:?}");
        assert!(res.boundary < 1e-12, "{res:?}");
        assert!(verify_decimation_identity(&params(0.3), 2, 1.3).is_err());
    }

    #[test]
    fn intervals() {
        let pp = params(1.0 / 3.0);
        let iv = preimage_intervals(&pp);
        let len: f64 = iv.iter().map(|(a, b)| b - a).sum();
        assert!((len - 4.0 / 3.0).abs() < 1e-15);
        assert!((iv[1].0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((iv[2].0 - 5.0 / 3.0).abs() < 1e-15);
        let half = preimage_intervals(&params(0.5));
        assert_eq!(half, [(0.0, 0.5), (0.5, 1.5), (1.5, 2.0)]);
        let map = CubicMap::new(params(0.8));
        for (a, b) in preimage_intervals(map.params()) {
            for e in [a, b] {
                let img = map.eval(e);
                assert!(img.abs() < 1e-13 || (img - 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn branches_monotone_onto_interval() {
        for p in [0.2, 0.35, 0.5, 0.7] {
            let map = CubicMap::new(params(p));
            for (a, b) in preimage_intervals(map.params()) {
                let images = [map.eval(a), map.eval(b)];
                let (lo, hi) = (images[0].min(images[1]), images[0].max(images[1]));
                assert!(lo.abs() < 1e-13 && (hi - 2.0).abs() < 1e-13);
                let sign = (images[1] - images[0]).signum();
                for i in 1..100 {
                    let z = a + (b - a) * i as f64 / 100.0;
                    assert!(map.eval_prime(z) * sign > 0.0);
                }
            }
        }
    }
}
