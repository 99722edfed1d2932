//! Whole-matrix sampling: one row chain per row index, mapped through `U ↦ U Uᵗ`.
//!
//! Two modes are provided. In [`ChainMode::ChainReuse`] every row keeps one
//! persistent chain across matrices, so burn-in is paid once and successive
//! matrices are correlated (consecutive chain states, possibly thinned). In
//! [`ChainMode::RestartPerMatrix`] every row of every matrix gets a fresh
//! chain with its own burn-in, giving independent draws at a much higher
//! cost.
//!
//! Rows are the unit of parallelism and every chain owns a random substream
//! keyed by `(seed, row, replica)`, so output is identical for any number of
//! worker threads. Matrices are produced in batches and streamed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{polar_sample, vine_sample, BaselineMethod};
use crate::error::{Error, Result};
use crate::model::{packed_len, product_into, CorrelationMatrix};
use crate::random::{tag, RngStream};
use crate::row::{exact_row_sample, sample_row, RowChain, RowChainConfig, RowTarget};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainMode {
    #[default]
    ChainReuse,
    RestartPerMatrix,
}

impl fmt::Display for ChainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainMode::ChainReuse => "chain-reuse",
            ChainMode::RestartPerMatrix => "restart",
        })
    }
}

impl FromStr for ChainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain-reuse" | "reuse" => Ok(ChainMode::ChainReuse),
            "restart" | "restart-per-matrix" => Ok(ChainMode::RestartPerMatrix),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixSamplerConfig {
    pub dim: usize,
    pub count: usize,
    pub row_config: RowChainConfig,
    pub mode: ChainMode,
}

impl MatrixSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::ZeroDimension(0));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        self.row_config.validate()
    }
}

/// Matrices per batch: about 32 MiB of output at most, never more than 256.
fn batch_size(dim: usize) -> usize {
    ((1usize << 22) / (dim * dim).max(1)).clamp(1, 256)
}

/// Every output is fully validated in debug builds; release builds validate
/// one matrix in a hundred.
fn should_validate(index: usize) -> bool {
    cfg!(debug_assertions) || index.is_multiple_of(100)
}

fn assemble(dim: usize, packed: &[f64], index: usize) -> Result<CorrelationMatrix> {
    let mut entries = vec![0.0; dim * dim];
    product_into(dim, packed, &mut entries);
    let m = CorrelationMatrix::from_product_unchecked(dim, entries);
    if should_validate(index) {
        m.validate()?;
    }
    Ok(m)
}

/// Streams `count` matrices from the row-wise Metropolis sampler.
pub struct MatrixStream {
    config: MatrixSamplerConfig,
    chains: Vec<RowChain>,
    burned_in: bool,
    produced: usize,
    ready: std::vec::IntoIter<Result<CorrelationMatrix>>,
}

/// Starts the row-wise Metropolis sampler.
pub fn sample_matrices(config: MatrixSamplerConfig) -> Result<MatrixStream> {
    config.validate()?;
    let p = config.dim;
    let chains = match config.mode {
        ChainMode::ChainReuse => (1..p)
            .map(|i| {
                let target = RowTarget::new(p, i)?;
                let rng = RngStream::substream(config.row_config.seed, tag::ROW_CHAIN, i as u64, 0);
                Ok(RowChain::new(target, config.row_config, rng))
            })
            .collect::<Result<Vec<_>>>()?,
        ChainMode::RestartPerMatrix => Vec::new(),
    };
    Ok(MatrixStream {
        config,
        chains,
        burned_in: false,
        produced: 0,
        ready: Vec::new().into_iter(),
    })
}

impl MatrixStream {
    /// Row chains of the chain-reuse mode (empty in restart mode).
    pub fn chains(&self) -> &[RowChain] {
        &self.chains
    }

    /// Row samples for `batch` matrices: `out[i - 1][b * d .. (b + 1) * d]`
    /// is row `i` of matrix `b`.
    fn row_batches(&mut self, first: usize, batch: usize) -> Result<Vec<Vec<f64>>> {
        let p = self.config.dim;
        match self.config.mode {
            ChainMode::ChainReuse => {
                let burn = !self.burned_in;
                self.burned_in = true;
                Ok(self
                    .chains
                    .par_iter_mut()
                    .map(|chain| {
                        if burn {
                            chain.burn_in();
                        }
                        let d = chain.target().ambient_dim();
                        let mut buf = Vec::with_capacity(batch * d);
                        for _ in 0..batch {
                            buf.extend_from_slice(chain.next_sample().as_slice());
                        }
                        buf
                    })
                    .collect())
            }
            ChainMode::RestartPerMatrix => {
                let row_config = self.config.row_config;
                (1..p)
                    .into_par_iter()
                    .map(|i| {
                        let target = RowTarget::new(p, i)?;
                        let mut buf = Vec::with_capacity(batch * (p - i + 1));
                        for b in 0..batch {
                            let replica = (first + b) as u64;
                            let mut rng = RngStream::substream(
                                row_config.seed,
                                tag::RESTART,
                                i as u64,
                                replica,
                            );
                            let v = sample_row(&target, &row_config, 1, &mut rng)?;
                            buf.extend_from_slice(v[0].as_slice());
                        }
                        Ok(buf)
                    })
                    .collect()
            }
        }
    }

    fn fill(&mut self) {
        let p = self.config.dim;
        let first = self.produced;
        let batch = batch_size(p).min(self.config.count - first);
        let rows = match self.row_batches(first, batch) {
            Ok(rows) => rows,
            Err(e) => {
                self.produced = self.config.count;
                self.ready = vec![Err(e)].into_iter();
                return;
            }
        };
        let out: Vec<Result<CorrelationMatrix>> = (0..batch)
            .into_par_iter()
            .map(|b| {
                let mut packed = Vec::with_capacity(packed_len(p));
                for (r, buf) in rows.iter().enumerate() {
                    let d = p - r;
                    packed.extend_from_slice(&buf[b * d..(b + 1) * d]);
                }
                packed.push(1.0);
                assemble(p, &packed, first + b)
            })
            .collect();
        self.produced += batch;
        self.ready = out.into_iter();
    }
}

impl Iterator for MatrixStream {
    type Item = Result<CorrelationMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(m) = self.ready.next() {
            return Some(m);
        }
        if self.produced >= self.config.count {
            return None;
        }
        self.fill();
        self.ready.next()
    }
}

/// Exact uniform draw assembled from the direct row sampler.
pub fn oracle_sample(dim: usize, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    if dim == 0 {
        return Err(Error::ZeroDimension(0));
    }
    let mut packed = Vec::with_capacity(packed_len(dim));
    for i in 1..=dim {
        packed.extend_from_slice(exact_row_sample(&RowTarget::new(dim, i)?, rng).as_slice());
    }
    let mut entries = vec![0.0; dim * dim];
    product_into(dim, &packed, &mut entries);
    Ok(CorrelationMatrix::from_product_unchecked(dim, entries))
}

type DrawFn = fn(usize, &mut RngStream) -> Result<CorrelationMatrix>;

/// Streams i.i.d. matrices from a direct generator; matrix `n` uses its own
/// substream so output does not depend on the thread count.
pub struct IidStream {
    dim: usize,
    count: usize,
    seed: u64,
    method_id: u64,
    draw: DrawFn,
    produced: usize,
    ready: std::vec::IntoIter<Result<CorrelationMatrix>>,
}

impl IidStream {
    fn new(dim: usize, count: usize, seed: u64, method_id: u64, draw: DrawFn) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension(0));
        }
        Ok(Self {
            dim,
            count,
            seed,
            method_id,
            draw,
            produced: 0,
            ready: Vec::new().into_iter(),
        })
    }
}

impl Iterator for IidStream {
    type Item = Result<CorrelationMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(m) = self.ready.next() {
            return Some(m);
        }
        if self.produced >= self.count {
            return None;
        }
        let first = self.produced;
        let batch = batch_size(self.dim).min(self.count - first);
        let (dim, seed, id, draw) = (self.dim, self.seed, self.method_id, self.draw);
        let out: Vec<Result<CorrelationMatrix>> = (first..first + batch)
            .into_par_iter()
            .map(|n| {
                let mut rng = RngStream::substream(seed, tag::MATRIX, id, n as u64);
                let m = draw(dim, &mut rng)?;
                if should_validate(n) {
                    m.validate()?;
                }
                Ok(m)
            })
            .collect();
        self.produced += batch;
        self.ready = out.into_iter();
        self.ready.next()
    }
}

/// `count` exact i.i.d. uniform matrices.
pub fn sample_matrices_oracle(dim: usize, count: usize, seed: u64) -> Result<IidStream> {
    IidStream::new(dim, count, seed, 0, oracle_sample)
}

/// Any of the four generators behind one interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Chol,
    Baseline(BaselineMethod),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Chol,
        Method::Baseline(BaselineMethod::Vine),
        Method::Baseline(BaselineMethod::Onion),
        Method::Baseline(BaselineMethod::Polar),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Chol => "chol",
            Method::Baseline(b) => b.name(),
        }
    }

    /// Label used in benchmark output; shows that onion runs the direct sampler.
    pub fn label(self) -> &'static str {
        match self {
            Method::Chol => "chol",
            Method::Baseline(b) => b.label(),
        }
    }

    /// Streams `count` matrices. `row_config` and `mode` only affect `chol`;
    /// the baselines take their seed from `row_config.seed`.
    pub fn stream(
        self,
        dim: usize,
        count: usize,
        row_config: RowChainConfig,
        mode: ChainMode,
    ) -> Result<Box<dyn Iterator<Item = Result<CorrelationMatrix>> + Send>> {
        let seed = row_config.seed;
        Ok(match self {
            Method::Chol => Box::new(sample_matrices(MatrixSamplerConfig {
                dim,
                count,
                row_config,
                mode,
            })?),
            Method::Baseline(BaselineMethod::Onion) => {
                Box::new(IidStream::new(dim, count, seed, 0, oracle_sample)?)
            }
            Method::Baseline(BaselineMethod::Vine) => {
                Box::new(IidStream::new(dim, count, seed, 1, vine_sample)?)
            }
            Method::Baseline(BaselineMethod::Polar) => {
                Box::new(IidStream::new(dim, count, seed, 2, polar_sample)?)
            }
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chol" => Ok(Method::Chol),
            other => other.parse().map(Method::Baseline),
        }
    }
}
