//! The verification gates behind `elliptope verify`.
//!
//! Trust is chained: rejection sampling from the cube is uniform on the
//! elliptope by definition, so it validates the analytic marginal CDF at
//! `p = 3`; that CDF and the exact Beta law of a row's first coordinate then
//! serve as references for the Metropolis sampler and the baselines.

use crate::error::Result;
use crate::random::{tag, RngStream};
use crate::row::{exact_row_sample, RowChain, RowChainConfig, RowTarget};
use crate::sampler::{ChainMode, Method};
use crate::special::BetaCdf;
use crate::stats::{
    elliptope_marginal_cdf, ks_one_sample, ks_two_sample, BruteForceSampler, KsRecord,
};

pub const LEVEL: f64 = 0.001;

/// Chain settings for draws that must be close to independent.
pub fn thinned_config(seed: u64) -> RowChainConfig {
    RowChainConfig {
        sigma_eps: 0.05,
        burn_in: 1000,
        thin: 100,
        seed,
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub quick: bool,
    /// Added to every row exponent of the Metropolis chains in the row
    /// gate. Non-zero values deliberately break the sampler.
    pub exponent_shift: i64,
}

#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub name: &'static str,
    pub records: Vec<KsRecord>,
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.result.passes(LEVEL))
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub gates: Vec<GateOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(GateOutcome::passed)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.gates
            .iter()
            .filter(|g| !g.passed())
            .map(|g| g.name)
            .collect()
    }

    pub fn records(&self) -> Vec<KsRecord> {
        self.gates
            .iter()
            .flat_map(|g| g.records.iter().cloned())
            .collect()
    }
}

/// Brute-force `p = 3` draws against the analytic marginal of `r₁₂`.
pub fn marginal_gate(n: usize, seed: u64) -> Result<GateOutcome> {
    let mut sampler = BruteForceSampler::new(3)?;
    let mut rng = RngStream::substream(seed, tag::VERIFY, 1, 0);
    let r12: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).get(0, 1)).collect();
    let result = ks_one_sample(&r12, |r| elliptope_marginal_cdf(r, 3))?;
    Ok(GateOutcome {
        name: "marginal-cdf",
        records: vec![KsRecord {
            method: "bruteforce-vs-cdf".into(),
            dim: 3,
            result,
        }],
    })
}

/// Thinned Metropolis draws of `v₁²` for one row.
pub fn row_first_coordinate_squares(
    target: RowTarget,
    config: RowChainConfig,
    n: usize,
    replica: u64,
) -> Vec<f64> {
    let rng = RngStream::substream(
        config.seed,
        tag::VERIFY,
        100 + target.row_index() as u64,
        replica,
    );
    let mut chain = RowChain::new(target, config, rng);
    chain.burn_in();
    (0..n)
        .map(|_| chain.next_sample().first().powi(2))
        .collect()
}

/// Thinned Metropolis draws of `v₁²` against `Beta((i+1)/2, (p-i)/2)`.
pub fn row_oracle_gate(
    cases: &[(usize, usize)],
    n: usize,
    config: RowChainConfig,
    exponent_shift: i64,
) -> Result<GateOutcome> {
    let mut records = Vec::new();
    for &(p, i) in cases {
        let target = RowTarget::new(p, i)?;
        let exponent = (i as i64 + exponent_shift).max(0) as usize;
        let xs = row_first_coordinate_squares(target.with_exponent(exponent), config, n, 0);
        let (a, b) = target.first_coordinate_beta();
        let beta = BetaCdf::new(a, b);
        let result = ks_one_sample(&xs, |x| beta.cdf(x))?;
        records.push(KsRecord {
            method: format!("row-mh-i{i}-vs-beta"),
            dim: p,
            result,
        });
    }
    Ok(GateOutcome {
        name: "row-oracle",
        records,
    })
}

/// Two-sample comparison of thinned Metropolis rows against the exact row sampler.
pub fn row_two_sample_gate(
    cases: &[(usize, usize)],
    n: usize,
    config: RowChainConfig,
) -> Result<GateOutcome> {
    let mut records = Vec::new();
    for &(p, i) in cases {
        let target = RowTarget::new(p, i)?;
        let mh = row_first_coordinate_squares(target, config, n, 1);
        let mut rng = RngStream::substream(config.seed, tag::VERIFY, 200 + i as u64, p as u64);
        let exact: Vec<f64> = (0..n)
            .map(|_| exact_row_sample(&target, &mut rng).first().powi(2))
            .collect();
        records.push(KsRecord {
            method: format!("row-mh-i{i}-vs-exact"),
            dim: p,
            result: ks_two_sample(&mh, &exact)?,
        });
    }
    Ok(GateOutcome {
        name: "row-two-sample",
        records,
    })
}

/// Collects `n` matrices of a method and maps each through `f`.
fn collect_entries<F: Fn(&crate::model::CorrelationMatrix) -> Vec<f64>>(
    method: Method,
    dim: usize,
    n: usize,
    seed: u64,
    f: F,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in method.stream(dim, n, thinned_config(seed), ChainMode::ChainReuse)? {
        out.extend(f(&m?));
    }
    Ok(out)
}

/// Pooled off-diagonal entries of the (thinned) Metropolis sampler against
/// the analytic marginal.
pub fn uniformity_gate(dims: &[usize], n: usize, seed: u64) -> Result<GateOutcome> {
    let mut records = Vec::new();
    for &p in dims {
        let pooled = collect_entries(Method::Chol, p, n, seed, |m| {
            m.off_diagonal().map(|(_, _, r)| r).collect()
        })?;
        records.push(KsRecord {
            method: "chol-pooled-vs-cdf".into(),
            dim: p,
            result: ks_one_sample(&pooled, |r| elliptope_marginal_cdf(r, p))?,
        });
    }
    Ok(GateOutcome {
        name: "elliptope-uniformity",
        records,
    })
}

/// Pairwise two-sample tests on `r₁₂` between all four methods.
pub fn method_agreement_gate(dims: &[usize], n: usize, seed: u64) -> Result<GateOutcome> {
    let mut records = Vec::new();
    for &p in dims {
        let samples = Method::ALL
            .iter()
            .map(|&m| Ok((m, collect_entries(m, p, n, seed, |x| vec![x.get(0, 1)])?)))
            .collect::<Result<Vec<_>>>()?;
        for (a, (ma, xa)) in samples.iter().enumerate() {
            for (mb, xb) in samples.iter().skip(a + 1) {
                records.push(KsRecord {
                    method: format!("{}-vs-{}", ma.name(), mb.name()),
                    dim: p,
                    result: ks_two_sample(xa, xb)?,
                });
            }
        }
    }
    Ok(GateOutcome {
        name: "method-agreement",
        records,
    })
}

pub const ROW_CASES: [(usize, usize); 3] = [(5, 1), (5, 3), (10, 5)];

/// Runs every gate. `quick` shrinks sample sizes for a smoke run.
pub fn run(options: &VerifyOptions) -> Result<VerifyReport> {
    let seed = options.seed;
    let (n_brute, n_row, n_matrix) = if options.quick {
        (10_000, 5000, 2000)
    } else {
        (100_000, 5000, 5000)
    };
    let config = thinned_config(seed);
    let gates = vec![
        marginal_gate(n_brute, seed)?,
        row_oracle_gate(&ROW_CASES, n_row, config, options.exponent_shift)?,
        row_two_sample_gate(&ROW_CASES, n_row, config)?,
        uniformity_gate(&[3, 5], n_matrix, seed)?,
        method_agreement_gate(&[3, 5], n_matrix, seed)?,
    ];
    Ok(VerifyReport { gates })
}
