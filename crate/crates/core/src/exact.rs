//! Exact rational arithmetic for rational `p`.
//!
//! Mirrors the float routines for matrix assembly, the invariant measure
//! and the formal eigenfunction recursion so identities such as
//! `π(x) = π(3x)` can be checked with zero tolerance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::laplacian::{classify_site, Residue};

#[derive(Debug, Clone, PartialEq)]
pub struct ExactParams {
    p: BigRational,
    q: BigRational,
}

impl ExactParams {
    pub fn new(p: BigRational) -> Result<Self> {
        if p <= BigRational::zero() || p >= BigRational::one() {
            return Err(Error::InvalidArgument(format!("p = {p} is not in (0, 1)")));
        }
        let q = BigRational::one() - &p;
        Ok(Self { p, q })
    }

    /// Parses `"a/b"` or an integer-free decimal such as `"0.3"`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(parse_rational(text)?)
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn q(&self) -> &BigRational {
        &self.q
    }

    pub fn to_f64(&self) -> f64 {
        self.p.to_f64().unwrap_or(f64::NAN)
    }

    /// `(P(x -> x-1), P(x -> x+1))`.
    pub fn transition_probabilities(&self, x: u64) -> (BigRational, BigRational) {
        match classify_site(x).residue {
            Residue::Boundary => (BigRational::zero(), BigRational::one()),
            Residue::One => (self.q.clone(), self.p.clone()),
            Residue::Two => (self.p.clone(), self.q.clone()),
        }
    }
}

/// Parses a fraction `a/b`, an integer, or a plain decimal literal.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::InvalidArgument(format!("cannot parse {text:?} as a rational"));
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(num, den);
    Ok(if negative { -value } else { value })
}

/// Invariant measure of the infinite walk on `0..=extent`, `π(0) = 1`.
pub fn invariant_measure(params: &ExactParams, extent: usize) -> Vec<BigRational> {
    let mut values = Vec::with_capacity(extent + 1);
    values.push(BigRational::one());
    for x in 0..extent {
        let (_, right) = params.transition_probabilities(x as u64);
        let (left_of_next, _) = params.transition_probabilities(x as u64 + 1);
        let next = &values[x] * right / left_of_next;
        values.push(next);
    }
    values
}

/// Rows `(sub, diag, sup)` of the level-m reflecting truncation.
pub fn reflecting_rows(
    params: &ExactParams,
    level: u32,
) -> Vec<(BigRational, BigRational, BigRational)> {
    let last = 3u64.pow(level);
    (0..=last)
        .map(|x| {
            if x == last {
                return (-BigRational::one(), BigRational::one(), BigRational::zero());
            }
            let (left, right) = params.transition_probabilities(x);
            (-left, BigRational::one(), -right)
        })
        .collect()
}

/// Formal eigenfunction `f_z(0..=extent)` with `f_z(0) = 1`.
pub fn formal_eigenfunction(
    params: &ExactParams,
    z: &BigRational,
    extent: usize,
) -> Vec<BigRational> {
    let mut f = Vec::with_capacity(extent + 1);
    f.push(BigRational::one());
    if extent == 0 {
        return f;
    }
    f.push(BigRational::one() - z);
    let one_minus_z = BigRational::one() - z;
    for x in 1..extent {
        let (left, right) = params.transition_probabilities(x as u64);
        let next = (&one_minus_z * &f[x] - left * &f[x - 1]) / right;
        f.push(next);
    }
    f
}

/// `R(z) = z + z(z-1)(z-2)/pq` in exact arithmetic.
pub fn eval_r(params: &ExactParams, z: &BigRational) -> BigRational {
    let one = BigRational::one();
    let two = &one + &one;
    let pq = &params.p * &params.q;
    z + z * (z - &one) * (z - two) / pq
}
