//! The single-row Metropolis kernel.
//!
//! Row `i` (1-based) of the upper factor of a `p × p` correlation matrix is a
//! point on the hemisphere of unit vectors in `d = p - i + 1` dimensions with
//! positive first coordinate. Under the uniform law on correlation matrices
//! the row has density proportional to `v₁^i` with respect to surface
//! measure. The chain proposes `(v + ε) / ‖v + ε‖` with `ε ~ N(0, σ² I)` and
//! accepts with probability `min(1, 1{ṽ₁ > 0} (ṽ₁ / v₁)^i)`; the projected
//! Gaussian proposal is symmetric, so no Hastings correction is needed.
//!
//! Besides the kernel, this module carries the analysis helpers used by the
//! test suites: the proposal density, its large-σ limit, the uniform
//! ergodicity bound and an exact direct sampler for the row target.

use std::f64::consts::{LN_2, PI};

use log::debug;

use crate::error::{Error, Result};
use crate::model::HemisphereVector;
use crate::quadrature::{adaptive_simpson, DEFAULT_ABS_TOL};
use crate::random::RngStream;
use crate::special::{erf, ln_beta, ln_gamma};

/// Perturbation deviation used in the timing experiments.
pub const DEFAULT_SIGMA_EPS: f64 = 0.01;
pub const DEFAULT_BURN_IN: u64 = 1000;

const MIN_PERTURBED_NORM: f64 = 1e-300;

/// Row `row_index` (1-based) of a `matrix_dim × matrix_dim` factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowTarget {
    matrix_dim: usize,
    row_index: usize,
    exponent: usize,
}

impl RowTarget {
    pub fn new(matrix_dim: usize, row_index: usize) -> Result<Self> {
        if row_index == 0 || row_index > matrix_dim {
            return Err(Error::InvalidArgument(format!(
                "row index {row_index} outside 1..={matrix_dim}"
            )));
        }
        Ok(Self {
            matrix_dim,
            row_index,
            exponent: row_index,
        })
    }

    /// Same row with a different density exponent. Only meant for mutation
    /// checks of the verification suite.
    #[doc(hidden)]
    pub fn with_exponent(mut self, exponent: usize) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    pub fn row_index(&self) -> usize {
        self.row_index
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    /// `p - i + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.matrix_dim - self.row_index + 1
    }

    /// Shape parameters of the exact law of `v₁²` under `f ∝ v₁^k`:
    /// `Beta((k+1)/2, (d-1)/2)`, which is `Beta((i+1)/2, (p-i)/2)` for `k = i`.
    pub fn first_coordinate_beta(&self) -> (f64, f64) {
        (
            (self.exponent as f64 + 1.0) / 2.0,
            (self.ambient_dim() - 1) as f64 / 2.0,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowChainConfig {
    pub sigma_eps: f64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
}

impl Default for RowChainConfig {
    fn default() -> Self {
        Self {
            sigma_eps: DEFAULT_SIGMA_EPS,
            burn_in: DEFAULT_BURN_IN,
            thin: 1,
            seed: 0,
        }
    }
}

impl RowChainConfig {
    pub fn new(sigma_eps: f64, burn_in: u64, thin: u64, seed: u64) -> Result<Self> {
        let c = Self {
            sigma_eps,
            burn_in,
            thin,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_eps must be positive, got {}",
                self.sigma_eps
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Read-only view of a chain's counters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainStats {
    pub steps_taken: u64,
    pub accepts: u64,
}

impl ChainStats {
    pub fn acceptance_ratio(&self) -> f64 {
        if self.steps_taken == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.steps_taken as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct RowChainState {
    current: HemisphereVector,
    ln_first: f64,
    steps_taken: u64,
    accepts: u64,
    scratch: Vec<f64>,
}

impl RowChainState {
    pub fn from_vector(current: HemisphereVector) -> Self {
        let d = current.ambient_dim();
        Self {
            ln_first: current.first().ln(),
            current,
            steps_taken: 0,
            accepts: 0,
            scratch: vec![0.0; d],
        }
    }

    pub fn current(&self) -> &HemisphereVector {
        &self.current
    }

    pub fn stats(&self) -> ChainStats {
        ChainStats {
            steps_taken: self.steps_taken,
            accepts: self.accepts,
        }
    }

    pub fn reset_counters(&mut self) {
        self.steps_taken = 0;
        self.accepts = 0;
    }
}

/// Writes `(v + ε) / ‖v + ε‖` into `out`. Returns `false` when the norm is
/// below `1e-300`, leaving `out` unspecified.
pub fn perturb_and_normalize(v: &[f64], eps: &[f64], out: &mut [f64]) -> bool {
    let mut norm2 = 0.0;
    for ((o, &x), &e) in out.iter_mut().zip(v).zip(eps) {
        *o = x + e;
        norm2 += *o * *o;
    }
    let norm = norm2.sqrt();
    if !(norm >= MIN_PERTURBED_NORM) {
        return false;
    }
    out.iter_mut().for_each(|o| *o /= norm);
    true
}

fn propose_into(v: &[f64], sigma_eps: f64, rng: &mut RngStream, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for (o, &x) in out.iter_mut().zip(v) {
            *o = x + sigma_eps * rng.normal();
            norm2 += *o * *o;
        }
        let norm = norm2.sqrt();
        if norm >= MIN_PERTURBED_NORM {
            out.iter_mut().for_each(|o| *o /= norm);
            return;
        }
        debug!("perturbed vector norm {norm:e} below threshold, redrawing");
    }
}

/// Candidate `(v + ε) / ‖v + ε‖` with `ε ~ N(0, σ² I)`. The first
/// coordinate of the result may be non-positive.
pub fn propose(v: &HemisphereVector, sigma_eps: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; v.ambient_dim()];
    propose_into(v.as_slice(), sigma_eps, rng, &mut out);
    out
}

/// `min(1, 1{ṽ₁ > 0} (ṽ₁ / v₁)^i)`, evaluated in log space.
#[inline]
pub fn acceptance_probability(v1: f64, v1_tilde: f64, exponent: usize) -> f64 {
    if !(v1_tilde > 0.0) {
        return 0.0;
    }
    let log_ratio = exponent as f64 * (v1_tilde.ln() - v1.ln());
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Starting state: a standard Gaussian vector with its first coordinate made
/// positive, normalized.
pub fn chain_init(target: &RowTarget, rng: &mut RngStream) -> RowChainState {
    let d = target.ambient_dim();
    if d == 1 {
        return RowChainState::from_vector(HemisphereVector::pole());
    }
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        v[0] = v[0].abs();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < MIN_PERTURBED_NORM || v[0] == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        return RowChainState::from_vector(HemisphereVector::from_unit_unchecked(v));
    }
}

/// One Metropolis transition. Returns whether the proposal was accepted.
#[inline]
pub fn chain_step(
    state: &mut RowChainState,
    target: &RowTarget,
    config: &RowChainConfig,
    rng: &mut RngStream,
) -> bool {
    propose_into(
        state.current.as_slice(),
        config.sigma_eps,
        rng,
        &mut state.scratch,
    );
    let delta = rng.uniform();
    let candidate_first = state.scratch[0];
    state.steps_taken += 1;
    if !(candidate_first > 0.0) {
        return false;
    }
    let ln_candidate = candidate_first.ln();
    let log_ratio = target.exponent() as f64 * (ln_candidate - state.ln_first);
    let accept = log_ratio >= 0.0 || delta <= log_ratio.exp();
    if accept {
        let coords = state.current.as_mut_slice();
        coords.swap_with_slice(&mut state.scratch);
        state.ln_first = ln_candidate;
        state.accepts += 1;
    }
    accept
}

/// Runs `burn_in` steps, then records every `thin`-th state until `n` have
/// been collected. With `thin = 1` the output is `t_b + 1, …, t_b + n`.
pub fn sample_row(
    target: &RowTarget,
    config: &RowChainConfig,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<HemisphereVector>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let mut state = chain_init(target, rng);
    for _ in 0..config.burn_in {
        chain_step(&mut state, target, config, rng);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..config.thin {
            chain_step(&mut state, target, config, rng);
        }
        out.push(state.current.clone());
    }
    Ok(out)
}

/// A chain bundled with its own random stream, for callers that keep rows
/// running across many matrices.
#[derive(Clone, Debug)]
pub struct RowChain {
    target: RowTarget,
    config: RowChainConfig,
    state: RowChainState,
    rng: RngStream,
}

impl RowChain {
    pub fn new(target: RowTarget, config: RowChainConfig, mut rng: RngStream) -> Self {
        let state = chain_init(&target, &mut rng);
        Self {
            target,
            config,
            state,
            rng,
        }
    }

    #[inline]
    pub fn step(&mut self) -> bool {
        chain_step(&mut self.state, &self.target, &self.config, &mut self.rng)
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn burn_in(&mut self) {
        self.advance(self.config.burn_in);
    }

    /// Advances `thin` steps and returns the new state.
    pub fn next_sample(&mut self) -> &HemisphereVector {
        self.advance(self.config.thin);
        &self.state.current
    }

    pub fn state(&self) -> &RowChainState {
        &self.state
    }

    pub fn stats(&self) -> ChainStats {
        self.state.stats()
    }

    pub fn reset_counters(&mut self) {
        self.state.reset_counters();
    }

    pub fn target(&self) -> &RowTarget {
        &self.target
    }
}

/// Density of the projected Gaussian proposal at `v_tilde` given `v`, with
/// respect to surface measure on the full unit sphere.
///
/// Depends on the arguments only through `a = vᵗṽ`. The radial integral
/// `∫₀^∞ s^{d-1} exp(-(s - a/σ)²/2) ds` is evaluated by adaptive Simpson
/// after factoring out the integrand's maximum.
pub fn proposal_density(v_tilde: &[f64], v: &[f64], sigma_eps: f64) -> Result<f64> {
    if v.len() != v_tilde.len() || v.is_empty() {
        return Err(Error::InvalidArgument(
            "vectors must share a positive dimension".into(),
        ));
    }
    if !(sigma_eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_eps must be positive, got {sigma_eps}"
        )));
    }
    let d = v.len();
    let a: f64 = v.iter().zip(v_tilde).map(|(x, y)| x * y).sum();
    let m = a / sigma_eps;
    let k = (d - 1) as f64;
    let log_integrand = |s: f64| {
        let radial = if k == 0.0 { 0.0 } else { k * s.ln() };
        radial - 0.5 * (s - m) * (s - m)
    };
    let peak = if k == 0.0 {
        m.max(0.0)
    } else {
        0.5 * (m + (m * m + 4.0 * k).sqrt())
    };
    let log_peak = log_integrand(peak);
    let upper = peak + 40.0;
    let scaled = adaptive_simpson(
        |s| {
            if s <= 0.0 && k > 0.0 {
                0.0
            } else {
                (log_integrand(s) - log_peak).exp()
            }
        },
        0.0,
        upper,
        DEFAULT_ABS_TOL * 1e-2,
    )?;
    if !(scaled > 0.0) {
        return Err(Error::Quadrature(format!(
            "radial integral vanished (a = {a}, sigma = {sigma_eps})"
        )));
    }
    let log_q = (a * a - 1.0) / (2.0 * sigma_eps * sigma_eps) - 0.5 * d as f64 * (2.0 * PI).ln()
        + log_peak
        + scaled.ln();
    Ok(log_q.exp())
}

/// `Γ(d/2) / (2 π^{d/2})`: the reciprocal surface area of the unit sphere in
/// `d` dimensions, the limit of the proposal density as `σ → ∞`.
pub fn limiting_uniform_density(ambient_dim: usize) -> f64 {
    let h = ambient_dim as f64 / 2.0;
    (ln_gamma(h) - LN_2 - h * PI.ln()).exp()
}

/// `P(ṽ₁ ≤ 0) = 1/2 - ∫₀^{v₁} N(s; 0, σ²) ds`, the first-coordinate
/// rejection mass of the proposal from a state with first coordinate `v1`.
pub fn stay_probability_lower_term(v1: f64, sigma_eps: f64) -> f64 {
    0.5 - 0.5 * erf(v1 / (sigma_eps * std::f64::consts::SQRT_2))
}

/// Constants of the uniform-ergodicity bound for one row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicBoundReport {
    /// Dominance constant `M` with `f ≤ M q`.
    pub m_constant: f64,
    /// Normalizing constant of `f(v) = c_f v₁^i` on the hemisphere.
    pub c_f: f64,
    /// Limiting (uniform on the full sphere) proposal density.
    pub c_q: f64,
    exponent: usize,
}

impl ErgodicBoundReport {
    /// `2 (1 - 1/M)^n`.
    pub fn tv_bound(&self, n: u64) -> f64 {
        2.0 * (1.0 - 1.0 / self.m_constant).powf(n as f64)
    }

    /// `1/M`, a lower bound on the expected acceptance probability of the
    /// large-σ chain.
    pub fn acceptance_lower_bound(&self) -> f64 {
        1.0 / self.m_constant
    }

    /// Normalized target density at a hemisphere point with first coordinate `v1`.
    pub fn target_density(&self, v1: f64) -> f64 {
        if v1 <= 0.0 {
            0.0
        } else {
            self.c_f * v1.powi(self.exponent as i32)
        }
    }

    /// Uniform density on the hemisphere, `2 c_q`.
    pub fn hemisphere_uniform_density(&self) -> f64 {
        2.0 * self.c_q
    }
}

/// Surface integral of `v₁^i` over the hemisphere in `d` dimensions, `d ≥ 2`.
pub fn hemisphere_moment(ambient_dim: usize, exponent: usize) -> f64 {
    let k = (ambient_dim - 1) as f64;
    let ln_area = LN_2 + 0.5 * k * PI.ln() - ln_gamma(0.5 * k);
    (ln_area - LN_2 + ln_beta((exponent as f64 + 1.0) / 2.0, k / 2.0)).exp()
}

/// Dominance and total-variation constants for row `i < p`.
///
/// `M = c_f / c_q` compares the target's peak density `c_f` with the
/// limiting proposal density `c_q` on the whole sphere.
pub fn ergodic_bound(target: &RowTarget) -> Result<ErgodicBoundReport> {
    if target.row_index() >= target.matrix_dim() {
        return Err(Error::InvalidArgument(
            "the ergodic bound needs row index < dimension".into(),
        ));
    }
    let d = target.ambient_dim();
    let c_q = limiting_uniform_density(d);
    let c_f = 1.0 / hemisphere_moment(d, target.exponent());
    Ok(ErgodicBoundReport {
        m_constant: c_f / c_q,
        c_f,
        c_q,
        exponent: target.exponent(),
    })
}

/// Exact draw from `f(v) ∝ v₁^i`: `v₁² ~ Beta((i+1)/2, (p-i)/2)`, the other
/// coordinates a uniform direction scaled by `√(1 - v₁²)`.
pub fn exact_row_sample(target: &RowTarget, rng: &mut RngStream) -> HemisphereVector {
    let d = target.ambient_dim();
    if d == 1 {
        return HemisphereVector::pole();
    }
    let (a, b) = target.first_coordinate_beta();
    let s = loop {
        let s = rng.beta(a, b);
        if s > 0.0 {
            break s;
        }
    };
    let mut v = vec![0.0; d];
    v[0] = s.sqrt();
    rng.unit_direction(&mut v[1..]);
    let radius = (1.0 - s).sqrt();
    v[1..].iter_mut().for_each(|x| *x *= radius);
    HemisphereVector::from_unit_unchecked(v)
}
