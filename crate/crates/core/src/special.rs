//! Special functions: log-gamma, log-beta, the Gaussian error function and
//! the regularized incomplete beta function.

/// Natural log of the gamma function for positive arguments.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Standard Gaussian CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 100_000;

/// Continued fraction for I_x(a, b), modified Lentz evaluation.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// The regularized incomplete beta function I_x(a, b) for x in [0, 1], a, b > 0.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    BetaCdf::new(a, b).cdf(x)
}

/// CDF of Beta(a, b) with the normalizing constant cached, for repeated
/// evaluation with fixed shape parameters.
#[derive(Clone, Copy, Debug)]
pub struct BetaCdf {
    a: f64,
    b: f64,
    ln_norm: f64,
}

impl BetaCdf {
    pub fn new(a: f64, b: f64) -> Self {
        debug_assert!(a > 0.0 && b > 0.0);
        Self {
            a,
            b,
            ln_norm: ln_beta(a, b),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let front = (a * x.ln() + b * (-x).ln_1p() - self.ln_norm).exp();
        let value = if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_continued_fraction(x, a, b) / a
        } else {
            1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
        };
        value.clamp(0.0, 1.0)
    }
}
