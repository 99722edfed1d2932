//! Goodness-of-fit machinery, analytic marginals, a brute-force uniformity
//! oracle and the acceptance-ratio sweep.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{factor_correlation, CorrelationMatrix};
use crate::random::{tag, RngStream};
use crate::row::{RowChain, RowChainConfig, RowTarget};
use crate::special::regularized_incomplete_beta;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// `n` for one sample, `n m / (n + m)` for two.
    pub n_effective: f64,
}

impl KsResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ exp(-(2k-1)² π² / (8 λ²)) converges fast here.
        let mut sum = 0.0;
        for k in 1..=100 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * PI * PI / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        return (1.0 - (2.0 * PI).sqrt() / lambda * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

fn p_value(d: f64, n_effective: f64) -> f64 {
    let root = n_effective.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * d)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "KS test needs at least one sample".into(),
        ));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n),
        n_effective: n,
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "KS test needs non-empty samples".into(),
        ));
    }
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, ne),
        n_effective: ne,
    })
}

/// Sup distance between the weighted ECDF of `(value, weight)` pairs and a CDF.
pub fn weighted_ks_distance<F: Fn(f64) -> f64>(samples: &[(f64, f64)], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no weighted samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let total: f64 = s.iter().map(|x| x.1).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for &(x, w) in &s {
        let f = cdf(x);
        d = d.max((f - below / total).abs());
        below += w;
        d = d.max((below / total - f).abs());
    }
    Ok(d)
}

/// CDF of one off-diagonal entry of a uniformly distributed `dim × dim`
/// correlation matrix: `(r + 1)/2 ~ Beta(dim/2, dim/2)`.
pub fn elliptope_marginal_cdf(r: f64, dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    regularized_incomplete_beta(((r + 1.0) / 2.0).clamp(0.0, 1.0), h, h)
}

/// Rejection sampler: strictly-upper entries i.i.d. uniform on (-1, 1),
/// kept when the result is positive definite.
#[derive(Clone, Debug)]
pub struct BruteForceSampler {
    dim: usize,
    tries: u64,
    accepted: u64,
}

impl BruteForceSampler {
    pub fn new(dim: usize) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "brute-force sampling is limited to 2 <= dim <= 4, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            tries: 0,
            accepted: 0,
        })
    }

    pub fn sample(&mut self, rng: &mut RngStream) -> CorrelationMatrix {
        let p = self.dim;
        loop {
            self.tries += 1;
            let mut m = CorrelationMatrix::identity(p).into_vec();
            for i in 0..p {
                for j in (i + 1)..p {
                    let r = 2.0 * rng.uniform() - 1.0;
                    m[i * p + j] = r;
                    m[j * p + i] = r;
                }
            }
            let candidate = CorrelationMatrix::from_product_unchecked(p, m);
            if candidate.off_diagonal().all(|(_, _, r)| r.abs() < 1.0)
                && factor_correlation(&candidate).is_ok()
            {
                self.accepted += 1;
                return candidate;
            }
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.tries as f64
    }
}

/// One exact uniform draw by rejection, for `dim ∈ {2, 3, 4}`.
pub fn brute_force_elliptope_sample(dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    Ok(BruteForceSampler::new(dim)?.sample(rng))
}

/// Non-increasing least-squares fit (pool adjacent violators).
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Largest absolute deviation from the non-increasing isotonic fit.
pub fn isotonic_residual(values: &[f64]) -> f64 {
    isotonic_nonincreasing(values)
        .iter()
        .zip(values)
        .map(|(f, v)| (f - v).abs())
        .fold(0.0, f64::max)
}

/// Parameters of an acceptance-ratio sweep over `(row, σ)` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub dim: usize,
    pub rows: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

pub const MIN_SWEEP_STEPS: u64 = 1000;
pub const DESK_SWEEP_DIM: usize = 100;
pub const LARGE_SWEEP_DIM: usize = 1000;

impl SweepConfig {
    /// Rows `{1, p/4, p/2, 3p/4, p-1}`, `σ = 1e-12` plus nine log-spaced
    /// values from `1e-4` to `1`.
    pub fn default_grid(dim: usize, seed: u64) -> Self {
        let mut rows = vec![1, dim / 4, dim / 2, 3 * dim / 4, dim.saturating_sub(1)];
        rows.retain(|&r| r >= 1 && r < dim);
        rows.dedup();
        let mut sigmas = vec![1e-12];
        sigmas.extend((0..=8).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)));
        Self {
            dim,
            rows,
            sigmas,
            steps: 20_000,
            burn_in: 1000,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsGrid {
    pub dim: usize,
    pub rows: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// `acceptance[r][s]` for `rows[r]` and `sigmas[s]`.
    pub acceptance: Vec<Vec<f64>>,
    pub steps_per_cell: u64,
}

pub const ACCEPTANCE_CSV_HEADER: &str = "p,row_index,sigma_eps,sigma_eps_sq,steps,accept_ratio";

impl DiagnosticsGrid {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{ACCEPTANCE_CSV_HEADER}")?;
        for (r, &row) in self.rows.iter().enumerate() {
            for (s, &sigma) in self.sigmas.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{:e},{:e},{},{}",
                    self.dim,
                    row,
                    sigma,
                    sigma * sigma,
                    self.steps_per_cell,
                    self.acceptance[r][s]
                )?;
            }
        }
        Ok(())
    }

    /// Per-row isotonic residual of acceptance against increasing σ.
    pub fn monotone_residuals(&self) -> Vec<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.sigmas.len()).collect();
        order.sort_by(|&a, &b| {
            self.sigmas[a]
                .partial_cmp(&self.sigmas[b])
                .unwrap_or(Ordering::Equal)
        });
        self.rows
            .iter()
            .zip(&self.acceptance)
            .map(|(&row, acc)| {
                let ordered: Vec<f64> = order.iter().map(|&k| acc[k]).collect();
                (row, isotonic_residual(&ordered))
            })
            .collect()
    }
}

/// Runs an independent chain per `(row, σ)` cell and records the fraction of
/// accepted proposals over `steps` post-burn-in iterations.
pub fn acceptance_sweep(config: &SweepConfig) -> Result<DiagnosticsGrid> {
    if config.steps < MIN_SWEEP_STEPS {
        return Err(Error::InvalidArgument(format!(
            "sweep needs at least {MIN_SWEEP_STEPS} steps per cell"
        )));
    }
    if let Some(&bad) = config.rows.iter().find(|&&r| r == 0 || r >= config.dim) {
        return Err(Error::InvalidArgument(format!(
            "row {bad} outside 1..{}",
            config.dim
        )));
    }
    let cells: Vec<(usize, usize)> = (0..config.rows.len())
        .flat_map(|r| (0..config.sigmas.len()).map(move |s| (r, s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(r, s)| {
            let row = config.rows[r];
            let target = RowTarget::new(config.dim, row)?;
            let chain_config =
                RowChainConfig::new(config.sigmas[s], config.burn_in, 1, config.seed)?;
            let rng = RngStream::substream(config.seed, tag::SWEEP, row as u64, s as u64);
            let mut chain = RowChain::new(target, chain_config, rng);
            chain.burn_in();
            chain.reset_counters();
            chain.advance(config.steps);
            Ok(chain.stats().acceptance_ratio())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut acceptance = vec![vec![0.0; config.sigmas.len()]; config.rows.len()];
    for (&(r, s), a) in cells.iter().zip(results) {
        acceptance[r][s] = a;
    }
    Ok(DiagnosticsGrid {
        dim: config.dim,
        rows: config.rows.clone(),
        sigmas: config.sigmas.clone(),
        acceptance,
        steps_per_cell: config.steps,
    })
}

/// One line of `ks.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct KsRecord {
    pub method: String,
    pub dim: usize,
    pub result: KsResult,
}

pub const KS_CSV_HEADER: &str = "method,p,statistic,p_value,n";

pub fn write_ks_csv<W: Write>(records: &[KsRecord], mut out: W) -> Result<()> {
    writeln!(out, "{KS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.method, r.dim, r.result.statistic, r.result.p_value, r.result.n_effective
        )?;
    }
    Ok(())
}
