//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const MAX_SUBDIVISIONS: usize = 1_000_000;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Fails if more than [`MAX_SUBDIVISIONS`] panels are split or a panel
/// becomes narrower than the floating-point spacing at its endpoints.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    let mut splits = 0usize;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let delta = left + right - p.whole;
        // A few forced levels keep narrow peaks from being skipped.
        if p.depth >= 5 && delta.abs() <= 15.0 * p.tol {
            total += left + right + delta / 15.0;
            continue;
        }
        splits += 1;
        if splits > MAX_SUBDIVISIONS {
            return Err(Error::Quadrature(format!(
                "more than {MAX_SUBDIVISIONS} subdivisions on [{a}, {b}]"
            )));
        }
        if !(lm > p.a && m > lm && rm > m && p.b > rm) {
            return Err(Error::Quadrature(format!("panel collapsed near {m}")));
        }
        let half = 0.5 * p.tol;
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: half,
            depth: p.depth + 1,
        });
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: half,
            depth: p.depth + 1,
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let v = adaptive_simpson(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-12).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn narrow_peak() {
        let v =
            adaptive_simpson(|x: f64| (-(x - 1.0).powi(2) / 0.02).exp(), 0.0, 50.0, 1e-12).unwrap();
        assert!((v - (0.02 * PI).sqrt()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn empty_interval() {
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9).unwrap(), 0.0);
    }
}
