//! Backward iteration of `R`, interval covers of its Julia set, and
//! escape-time classification.
//!
//! `R^{-1}([0, 2])` is three disjoint closed intervals (they abut when
//! `p = 1/2`), each mapped monotonically onto `[0, 2]`. Pulling the
//! level-(n-1) cover back through the three inverse branches gives the
//! level-n cover of `3^n` intervals.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::caps::Caps;
use crate::decimation::CubicMap;
use crate::error::{Error, Result};

/// Default merge tolerance for backward-orbit points.
pub const DEDUP_TOL: f64 = 1e-9;

/// Real solutions of `R(z) = w`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Preimages {
    /// Roots with multiplicity: a double root appears twice.
    pub roots: Vec<f64>,
    /// Set when the discriminant vanishes.
    pub double_root: bool,
}

/// Solves `R(z) = w` over the reals.
///
/// With `z = 1 + t` the cubic becomes `t^3 + (pq - 1) t + pq (1 - w) = 0`.
/// Seeds 0 and 2 use the factorizations `{0, 1+p, 1+q}` and `{p, q, 2}`;
/// other seeds use the trigonometric form when all roots are real and the
/// hyperbolic form otherwise, followed by one Newton step per root.
pub fn cubic_preimages(map: &CubicMap, w: f64) -> Preimages {
    let params = map.params();
    let (p, q) = (params.p(), params.q());
    if w == 0.0 || w == 2.0 {
        let mut roots = if w == 0.0 {
            vec![0.0, 1.0 + p, 1.0 + q]
        } else {
            vec![p, q, 2.0]
        };
        roots.sort_by(f64::total_cmp);
        return Preimages {
            roots,
            double_root: p == q,
        };
    }

    let pq = params.pq();
    let lin = pq - 1.0;
    let constant = pq * (1.0 - w);
    // 4 P^3 + 27 C^2 <= 0 iff three real roots.
    let cube = 4.0 * lin * lin * lin;
    let square = 27.0 * constant * constant;
    let disc = cube + square;
    let scale = cube.abs().max(square);

    let (mut roots, double_root) = if disc.abs() <= 1e-14 * scale {
        let single = 3.0 * constant / lin;
        let double = -1.5 * constant / lin;
        (vec![1.0 + single, 1.0 + double, 1.0 + double], true)
    } else if disc < 0.0 {
        let amp = 2.0 * (-lin / 3.0).sqrt();
        let arg = (3.0 * constant / (lin * amp)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let roots = (0..3)
            .map(|k| 1.0 + amp * (theta - 2.0 * PI * k as f64 / 3.0).cos())
            .collect();
        (roots, false)
    } else {
        // One real root; lin < 0 always since pq <= 1/4.
        let amp = 2.0 * (-lin / 3.0).sqrt();
        let arg = (-3.0 * constant.abs() / (lin * amp)).max(1.0);
        let t = -constant.signum() * amp * (arg.acosh() / 3.0).cosh();
        (vec![1.0 + t], false)
    };

    if !double_root {
        for z in roots.iter_mut() {
            *z = newton_polish(map, *z, w);
        }
    }
    roots.sort_by(f64::total_cmp);
    Preimages { roots, double_root }
}

fn newton_polish(map: &CubicMap, z: f64, w: f64) -> f64 {
    let slope = map.eval_prime(z);
    if slope.abs() < 1e-8 {
        return z;
    }
    let before = map.eval(z) - w;
    let polished = z - before / slope;
    if (map.eval(polished) - w).abs() <= before.abs() {
        polished
    } else {
        z
    }
}

/// The preimage of `w ∈ [0, 2]` on inverse branch `branch ∈ {0, 1, 2}`
/// (branches ordered left to right).
pub fn inverse_branch(map: &CubicMap, w: f64, branch: usize) -> f64 {
    let pre = cubic_preimages(map, w.clamp(0.0, 2.0));
    pre.roots[branch.min(pre.roots.len() - 1)]
}

/// A periodic point of `R` with the given itinerary: `R^k(z)` lies in
/// branch interval `itinerary[k mod len]`. Found by iterating the
/// contracting composition of inverse branches.
pub fn periodic_point(map: &CubicMap, itinerary: &[usize]) -> f64 {
    let mut z = 1.0;
    for _ in 0..500 {
        let next = itinerary
            .iter()
            .rev()
            .fold(z, |w, &b| inverse_branch(map, w, b));
        if next == z {
            break;
        }
        z = next;
    }
    z
}

/// All solutions in `[0, 2]` of `R∘n(z) ∈ seeds`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOrbit {
    pub seeds: Vec<f64>,
    pub level: u32,
    /// Sorted, merged within the dedup tolerance.
    pub points: Vec<f64>,
}

impl BackwardOrbit {
    /// Tolerance for `|R∘n(z) - seed|` when iterating forward: backward
    /// iteration contracts, so forward error grows like `R'(0)^n`.
    pub fn forward_tolerance(map: &CubicMap, level: u32) -> f64 {
        (1e-14 * map.eval_prime(0.0).abs().powi(level as i32)).max(1e-8)
    }
}

pub fn backward_orbit(map: &CubicMap, seeds: &[f64], level: u32) -> Result<BackwardOrbit> {
    backward_orbit_with(map, seeds, level, DEDUP_TOL, &Caps::default())
}

pub fn backward_orbit_with(
    map: &CubicMap,
    seeds: &[f64],
    level: u32,
    dedup_tol: f64,
    caps: &Caps,
) -> Result<BackwardOrbit> {
    if level > caps.max_orbit_depth {
        return Err(Error::DepthCap {
            depth: level,
            cap: caps.max_orbit_depth,
        });
    }
    if let Some(&bad) = seeds.iter().find(|s| !(0.0..=2.0).contains(*s)) {
        return Err(Error::InvalidArgument(format!("seed {bad} outside [0, 2]")));
    }
    let mut points = dedup_sorted(seeds.to_vec(), dedup_tol);
    for _ in 0..level {
        let next: Vec<f64> = points
            .par_iter()
            .flat_map_iter(|&w| cubic_preimages(map, w).roots)
            .filter(|z| (-1e-12..=2.0 + 1e-12).contains(z))
            .map(|z| z.clamp(0.0, 2.0))
            .collect();
        points = dedup_sorted(next, dedup_tol);
    }
    Ok(BackwardOrbit {
        seeds: seeds.to_vec(),
        level,
        points,
    })
}

fn dedup_sorted(mut points: Vec<f64>, tol: f64) -> Vec<f64> {
    points.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    for z in points {
        match out.last() {
            Some(&last) if z - last <= tol => {}
            _ => out.push(z),
        }
    }
    out
}

/// A level-n union of closed intervals covering the Julia set.
#[derive(Debug, Clone, PartialEq)]
pub struct JuliaCover {
    pub level: u32,
    /// Sorted, pairwise disjoint; abutting intervals are merged.
    pub intervals: Vec<(f64, f64)>,
    pub total_length: f64,
    /// Open complementary intervals inside `[0, 2]`.
    pub gaps: Vec<(f64, f64)>,
}

impl JuliaCover {
    /// Distance from `z` to the nearest cover interval.
    pub fn distance(&self, z: f64) -> f64 {
        let idx = self.intervals.partition_point(|&(a, _)| a <= z);
        let mut best = f64::INFINITY;
        for i in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(&(a, b)) = self.intervals.get(i) {
                let d = if z < a {
                    a - z
                } else if z > b {
                    z - b
                } else {
                    0.0
                };
                best = best.min(d);
            }
        }
        best
    }

    pub fn contains(&self, z: f64, tol: f64) -> bool {
        self.distance(z) <= tol
    }

    /// All interval endpoints, sorted.
    pub fn endpoints(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|&(a, b)| [a, b]).collect()
    }
}

pub fn julia_cover(map: &CubicMap, level: u32) -> Result<JuliaCover> {
    julia_cover_capped(map, level, &Caps::default())
}

pub fn julia_cover_capped(map: &CubicMap, level: u32, caps: &Caps) -> Result<JuliaCover> {
    if level > caps.max_orbit_depth {
        return Err(Error::DepthCap {
            depth: level,
            cap: caps.max_orbit_depth,
        });
    }
    let mut intervals = vec![(0.0, 2.0)];
    for _ in 0..level {
        let mut next: Vec<(f64, f64)> = intervals
            .par_iter()
            .flat_map_iter(|&(a, b): &(f64, f64)| {
                let ra = cubic_preimages(map, a.clamp(0.0, 2.0)).roots;
                let rb = cubic_preimages(map, b.clamp(0.0, 2.0)).roots;
                (0..3).map(move |k| {
                    let (x, y) = (ra[k.min(ra.len() - 1)], rb[k.min(rb.len() - 1)]);
                    (x.min(y).clamp(0.0, 2.0), x.max(y).clamp(0.0, 2.0))
                })
            })
            .collect();
        next.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.total_cmp(&v.1)));
        intervals = next;
    }
    let intervals = merge_touching(intervals);
    let total_length = intervals.iter().map(|(a, b)| b - a).sum();
    let mut gaps = Vec::new();
    let mut cursor = 0.0;
    for &(a, b) in &intervals {
        if a > cursor {
            gaps.push((cursor, a));
        }
        cursor = b;
    }
    if cursor < 2.0 {
        gaps.push((cursor, 2.0));
    }
    Ok(JuliaCover {
        level,
        intervals,
        total_length,
        gaps,
    })
}

fn merge_touching(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (a, b) in sorted {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// Orbit stayed bounded for the whole budget.
    JuliaCandidate,
    /// `|R∘k(z)|` exceeded the escape radius at step `steps`.
    Escaping { steps: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeParams {
    pub max_iter: u32,
    pub escape_radius: f64,
}

impl Default for EscapeParams {
    fn default() -> Self {
        Self {
            max_iter: 256,
            escape_radius: 4.0,
        }
    }
}

pub fn classify_point(map: &CubicMap, z: f64, escape: EscapeParams) -> PointClass {
    let mut w = z;
    for k in 0..=escape.max_iter {
        if !w.is_finite() || w.abs() > escape.escape_radius {
            return PointClass::Escaping { steps: k };
        }
        if k < escape.max_iter {
            w = map.eval(w);
        }
    }
    PointClass::JuliaCandidate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Repelling,
    Attracting,
    Indifferent,
    Superattracting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    /// `f64::INFINITY` for the point at infinity.
    pub point: f64,
    /// `R'` at the point; zero at infinity.
    pub multiplier: f64,
    pub kind: FixedPointKind,
}

pub fn fixed_point_data(map: &CubicMap) -> Vec<FixedPoint> {
    let mut out: Vec<FixedPoint> = [0.0, 1.0, 2.0]
        .into_iter()
        .map(|z| {
            let multiplier = map.eval_prime(z);
            let kind = match multiplier.abs() {
                m if m > 1.0 => FixedPointKind::Repelling,
                m if m < 1.0 => FixedPointKind::Attracting,
                _ => FixedPointKind::Indifferent,
            };
            FixedPoint {
                point: z,
                multiplier,
                kind,
            }
        })
        .collect();
    out.push(FixedPoint {
        point: f64::INFINITY,
        multiplier: 0.0,
        kind: FixedPointKind::Superattracting,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::PqParams;

    fn map(p: f64) -> CubicMap {
        CubicMap::new(PqParams::new(p).unwrap())
    }

    #[test]
    fn preimages_of_zero_and_two() {
        let m = map(0.3);
        let zero = cubic_preimages(&m, 0.0);
        assert_eq!(zero.roots.len(), 3);
        for (got, want) in zero.roots.iter().zip([0.0, 1.3, 1.7]) {
            assert!((got - want).abs() < 1e-15);
        }
        let two = cubic_preimages(&m, 2.0);
        for (got, want) in two.roots.iter().zip([0.3, 0.7, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(!zero.double_root);
    }

    #[test]
    fn chebyshev_middle_root() {
        let m = map(0.5);
        let pre = cubic_preimages(&m, 1.0);
        assert_eq!(pre.roots.len(), 3);
        assert!((pre.roots[1] - 1.0).abs() < 1e-15);
        assert!(pre.roots.iter().all(|z| (0.0..=2.0).contains(z)));
        assert!(cubic_preimages(&m, 0.0).double_root);
    }

    #[test]
    fn trig_roots_forward_check() {
        for p in [0.1, 0.3, 0.45, 0.5] {
            let m = map(p);
            for i in 1..40 {
                let w = 2.0 * i as f64 / 40.0;
                let pre = cubic_preimages(&m, w);
                assert_eq!(pre.roots.len(), 3);
                for z in pre.roots {
                    assert!((m.eval(z) - w).abs() < 1e-12, "p={p} w={w} z={z}");
                }
            }
        }
    }

    #[test]
    fn single_real_root_outside_range() {
        let m = map(0.3);
        for w in [-1.0, 3.0, 50.0] {
            let pre = cubic_preimages(&m, w);
            assert_eq!(pre.roots.len(), 1);
            assert!((m.eval(pre.roots[0]) - w).abs() < 1e-10 * w.abs().max(1.0));
        }
    }

    #[test]
    fn orbit_examples() {
        let m = map(0.3);
        let orbit = backward_orbit(&m, &[0.0], 1).unwrap();
        assert_eq!(orbit.points.len(), 3);
        for (got, want) in orbit.points.iter().zip([0.0, 1.3, 1.7]) {
            assert!((got - want).abs() < 1e-15);
        }
        let orbit = backward_orbit(&m, &[0.0], 2).unwrap();
        assert_eq!(orbit.points.len(), 9);
        for z in &orbit.points {
            assert!(m.iterate(*z, 2).abs() < 1e-10);
        }
        let half = backward_orbit(&map(0.5), &[0.0], 1).unwrap();
        assert_eq!(half.points, vec![0.0, 1.5]);
    }

    #[test]
    fn orbit_caps_and_seed_checks() {
        let m = map(0.3);
        assert!(matches!(
            backward_orbit(&m, &[0.0], 13),
            Err(Error::DepthCap { depth: 13, cap: 12 })
        ));
        assert!(backward_orbit(&m, &[2.5], 1).is_err());
    }

    #[test]
    fn cover_level_one() {
        let cover = julia_cover(&map(1.0 / 3.0), 1).unwrap();
        assert_eq!(cover.intervals.len(), 3);
        assert!((cover.total_length - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(cover.gaps.len(), 2);
        assert!((cover.gaps[0].0 - 1.0 / 3.0).abs() < 1e-15);
        assert!((cover.gaps[1].1 - 5.0 / 3.0).abs() < 1e-15);

        let half = julia_cover(&map(0.5), 1).unwrap();
        assert_eq!(half.intervals, vec![(0.0, 2.0)]);
        assert!(half.gaps.is_empty());
    }

    #[test]
    fn cover_level_two_shrinks() {
        let m = map(1.0 / 3.0);
        let c2 = julia_cover(&m, 2).unwrap();
        assert_eq!(c2.intervals.len(), 9);
        assert!(c2.total_length < 4.0 / 3.0);
    }

    #[test]
    fn cover_endpoints_map_to_previous_level() {
        let m = map(0.27);
        let c2 = julia_cover(&m, 2).unwrap();
        let c3 = julia_cover(&m, 3).unwrap();
        let prev = c2.endpoints();
        for e in c3.endpoints() {
            let img = m.eval(e);
            let near = prev
                .iter()
                .map(|x| (x - img).abs())
                .fold(f64::MAX, f64::min);
            assert!(near < 1e-11, "{e} -> {img}");
        }
    }

    #[test]
    fn distance_to_cover() {
        let cover = julia_cover(&map(1.0 / 3.0), 1).unwrap();
        assert_eq!(cover.distance(0.1), 0.0);
        assert!((cover.distance(0.5) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(cover.distance(2.0), 0.0);
        assert!((cover.distance(-1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn classify_examples() {
        let m = map(1.0 / 3.0);
        let esc = EscapeParams::default();
        assert_eq!(classify_point(&m, 1.0, esc), PointClass::JuliaCandidate);
        assert_eq!(classify_point(&m, 0.0, esc), PointClass::JuliaCandidate);
        assert!(matches!(
            classify_point(&m, 3.0, esc),
            PointClass::Escaping { .. }
        ));
        let cover = julia_cover(&m, 5).unwrap();
        for &(a, b) in &cover.gaps {
            let mid = 0.5 * (a + b);
            assert!(matches!(
                classify_point(&m, mid, esc),
                PointClass::Escaping { steps } if steps <= 7
            ));
        }
    }

    #[test]
    fn fixed_points_repelling() {
        let data = fixed_point_data(&map(0.5));
        let mult: Vec<f64> = data.iter().map(|f| f.multiplier).collect();
        assert_eq!(mult, vec![9.0, -3.0, 9.0, 0.0]);
        assert_eq!(data[3].kind, FixedPointKind::Superattracting);
        for p in [0.01, 0.2, 0.5, 0.77] {
            let data = fixed_point_data(&map(p));
            assert!(data[..3]
                .iter()
                .all(|f| f.kind == FixedPointKind::Repelling));
            assert!(data[1].multiplier.abs() >= 3.0);
            let swapped = fixed_point_data(&map(1.0 - p));
            assert_eq!(data, swapped);
        }
    }

    #[test]
    fn period_two_point() {
        let m = map(0.3);
        let z = periodic_point(&m, &[0, 2]);
        let w = m.eval(z);
        assert!((m.eval(w) - z).abs() < 1e-12);
        assert!((w - z).abs() > 0.1);
        assert!(z > 0.0 && z < 0.3 && w > 1.7);
    }
}
