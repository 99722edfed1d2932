//! Competing uniform samplers: C-vine, onion and the polar parametrization.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{packed_len, product_into, CorrelationMatrix};
use crate::random::RngStream;
use crate::sampler::oracle_sample;
use crate::special::BetaCdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Vine,
    Onion,
    Polar,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Vine => "vine",
            BaselineMethod::Onion => "onion",
            BaselineMethod::Polar => "polar",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BaselineMethod::Vine => "vine",
            BaselineMethod::Onion => "onion(direct)",
            BaselineMethod::Polar => "polar",
        }
    }

    pub fn sample(self, dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
        match self {
            BaselineMethod::Vine => vine_sample(dim, rng),
            BaselineMethod::Onion => onion_sample(dim, rng),
            BaselineMethod::Polar => polar_sample(dim, rng),
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vine" | "c-vine" => Ok(BaselineMethod::Vine),
            "onion" => Ok(BaselineMethod::Onion),
            "polar" => Ok(BaselineMethod::Polar),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// C-vine sampler.
///
/// The partial correlation of `(k, i)` given `1..k-1` is drawn as `2X - 1`
/// with `X ~ Beta(β_k, β_k)`, `β_k = 1 + (p - 1 - k)/2` for tree level `k`,
/// and converted to a plain correlation by peeling off one conditioning
/// variable at a time.
pub fn vine_sample(dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    if dim == 0 {
        return Err(Error::ZeroDimension(0));
    }
    let p = dim;
    let mut partial = vec![0.0; p * p];
    let mut out = CorrelationMatrix::identity(p).into_vec();
    for k in 0..p.saturating_sub(1) {
        let level = (k + 1) as f64;
        let beta = 1.0 + (p as f64 - 1.0 - level) / 2.0;
        for i in (k + 1)..p {
            let rho = 2.0 * rng.beta(beta, beta) - 1.0;
            partial[k * p + i] = rho;
            let mut r = rho;
            for l in (0..k).rev() {
                let a = partial[l * p + i];
                let b = partial[l * p + k];
                r = r * ((1.0 - a * a) * (1.0 - b * b)).sqrt() + a * b;
            }
            if !(r.abs() < 1.0) {
                return Err(Error::VineRecursion(r));
            }
            out[k * p + i] = r;
            out[i * p + k] = r;
        }
    }
    Ok(CorrelationMatrix::from_product_unchecked(p, out))
}

/// Onion sampler, realized in Cholesky coordinates as the direct row sampler.
pub fn onion_sample(dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    oracle_sample(dim, rng)
}

pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

/// Solves `cdf(θ) = u` on `[lo, hi]` by bisection.
fn invert_by_bisection<F: Fn(f64) -> f64>(cdf: F, u: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bisection(BISECTION_MAX_ITER))
}

/// CDF of the leading angle, density `∝ cos^i θ sin^{d-1} θ` on `(0, π/2)`:
/// `sin² θ ~ Beta(d/2, (i+1)/2)`.
struct LeadingAngle(BetaCdf);

impl LeadingAngle {
    fn new(exponent: usize, d: usize) -> Self {
        Self(BetaCdf::new(d as f64 / 2.0, (exponent as f64 + 1.0) / 2.0))
    }

    fn cdf(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.0.cdf(s * s)
    }
}

/// CDF of an interior angle, density `∝ sin^k θ` on `(0, π)`.
struct InteriorAngle(BetaCdf);

impl InteriorAngle {
    fn new(k: usize) -> Self {
        Self(BetaCdf::new(0.5, (k as f64 + 1.0) / 2.0))
    }

    fn cdf(&self, theta: f64) -> f64 {
        let c = theta.cos();
        let tail = 0.5 * self.0.cdf(c * c);
        if theta <= FRAC_PI_2 {
            0.5 - tail
        } else {
            0.5 + tail
        }
    }
}

/// Polar-parametrization sampler.
///
/// Row `i` (1-based) with `d = p - i` is written in spherical coordinates,
/// `u = (cos θ₁, sin θ₁ cos θ₂, …, sin θ₁ ⋯ sin θ_d)`. The leading angle has
/// density `∝ cos^i θ sin^{d-1} θ` on `(0, π/2)`, interior angle `m` has density
/// `∝ sin^{d-m} θ` on `(0, π)`, and the last angle is uniform on `[0, 2π)`
/// (for `d = 1` it is a random sign). Non-uniform angles are drawn by
/// numerically inverting their CDFs.
pub fn polar_sample(dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    if dim == 0 {
        return Err(Error::ZeroDimension(0));
    }
    let p = dim;
    let mut packed = Vec::with_capacity(packed_len(p));
    for i in 1..=p {
        let d = p - i;
        if d == 0 {
            packed.push(1.0);
            continue;
        }
        let leading = LeadingAngle::new(i, d);
        let u = rng.uniform();
        let theta1 = invert_by_bisection(|t| leading.cdf(t), u, 0.0, FRAC_PI_2)?;
        packed.push(theta1.cos());
        let mut sin_prod = theta1.sin();
        if d == 1 {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            packed.push(sign * sin_prod);
            continue;
        }
        for m in 2..d {
            let angle = InteriorAngle::new(d - m);
            let u = rng.uniform();
            let theta = invert_by_bisection(|t| angle.cdf(t), u, 0.0, PI)?;
            packed.push(sin_prod * theta.cos());
            sin_prod *= theta.sin();
        }
        let last = 2.0 * PI * rng.uniform();
        packed.push(sin_prod * last.cos());
        packed.push(sin_prod * last.sin());
    }
    let mut out = vec![0.0; p * p];
    product_into(p, &packed, &mut out);
    Ok(CorrelationMatrix::from_product_unchecked(p, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_dimension() {
        let mut rng = RngStream::new(0);
        for m in [
            BaselineMethod::Vine,
            BaselineMethod::Onion,
            BaselineMethod::Polar,
        ] {
            assert_eq!(m.sample(1, &mut rng).unwrap().as_slice(), &[1.0]);
            assert!(m.sample(0, &mut rng).is_err());
        }
    }

    #[test]
    fn outputs_are_valid() {
        let mut rng = RngStream::new(1);
        for m in [
            BaselineMethod::Vine,
            BaselineMethod::Onion,
            BaselineMethod::Polar,
        ] {
            for p in [2, 3, 7, 20] {
                for _ in 0..10 {
                    m.sample(p, &mut rng).unwrap().validate().unwrap();
                }
            }
        }
        for _ in 0..100 {
            onion_sample(50, &mut rng).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn polar_rows_are_unit() {
        let mut rng = RngStream::new(2);
        let m = polar_sample(12, &mut rng).unwrap();
        for i in 0..12 {
            assert!((m.get(i, i) - 1.0).abs() < 1e-15);
        }
        let u = crate::model::factor_correlation(&m).unwrap();
        u.validate().unwrap();
    }

    #[test]
    fn angle_cdfs_are_monotone_with_correct_ends() {
        let lead = LeadingAngle::new(3, 4);
        assert!(lead.cdf(0.0).abs() < 1e-15);
        assert!((lead.cdf(FRAC_PI_2) - 1.0).abs() < 1e-12);
        let inner = InteriorAngle::new(2);
        assert!(inner.cdf(0.0).abs() < 1e-12);
        assert!((inner.cdf(FRAC_PI_2) - 0.5).abs() < 1e-12);
        assert!((inner.cdf(PI) - 1.0).abs() < 1e-12);
        let mut prev = -1.0;
        for k in 0..=1000 {
            let t = PI * k as f64 / 1000.0;
            let f = inner.cdf(t);
            assert!(f >= prev - 1e-15);
            prev = f;
        }
        // sin θ on (0, π): F(θ) = (1 - cos θ)/2.
        let sine = InteriorAngle::new(1);
        for &t in &[0.3, 1.2, 2.5] {
            assert!((sine.cdf(t) - (1.0 - t.cos()) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bisection_inverts() {
        let t = invert_by_bisection(|x| x * x, 0.25, 0.0, 1.0).unwrap();
        assert!((t - 0.5).abs() < 1e-10);
    }

    #[test]
    fn names() {
        for m in [
            BaselineMethod::Vine,
            BaselineMethod::Onion,
            BaselineMethod::Polar,
        ] {
            assert_eq!(m.name().parse::<BaselineMethod>().unwrap(), m);
        }
        assert!(BaselineMethod::Onion.label().contains("direct"));
    }
}
