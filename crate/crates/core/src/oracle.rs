//! Operator evaluation with call accounting, deterministic or noisy.
//!
//! Noise draws come from ChaCha8 sub-streams keyed by `(seed, outer, inner)`,
//! so changing the batch size at one iteration never shifts the draws seen by
//! any other iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::point::Point;

/// Above this batch size the minibatch mean is drawn directly from its exact
/// distribution `N(0, σ₀²/n)` instead of summing `n` draws.
pub const EXPLICIT_BATCH_LIMIT: usize = 4096;

/// Source of (possibly noisy) evaluations of `F`.
pub trait Oracle {
    fn dim(&self) -> usize;

    /// One query of `F` at `z`.
    fn query(&mut self, z: &Point) -> Point;

    /// Total single-sample evaluations so far.
    fn calls(&self) -> u64;
}

/// Deterministic oracle counting one call per query.
#[derive(Debug)]
pub struct CountingField<'a> {
    field: &'a VectorField,
    calls: u64,
}

impl<'a> CountingField<'a> {
    pub fn new(field: &'a VectorField) -> Self {
        CountingField { field, calls: 0 }
    }

    pub fn field(&self) -> &VectorField {
        self.field
    }
}

impl Oracle for CountingField<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn query(&mut self, z: &Point) -> Point {
        self.calls += 1;
        self.field.eval(z)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Unbiased noisy oracle `F̂(z) = F(z) + ζ`, `ζ ~ N(0, σ₀² I)`, with minibatch
/// averaging.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    base: VectorField,
    sigma0: f64,
    seed: u64,
    calls: u64,
    outer: u64,
    inner: u64,
    batch: usize,
}

impl StochasticOracle {
    pub fn new(base: VectorField, sigma0: f64, seed: u64) -> Result<Self> {
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(Error::param(format!("sigma0 must be finite and >= 0, got {sigma0}")));
        }
        Ok(StochasticOracle {
            base,
            sigma0,
            seed,
            calls: 0,
            outer: 0,
            inner: 0,
            batch: 1,
        })
    }

    pub fn base(&self) -> &VectorField {
        &self.base
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Positions the stream cursor at outer iteration `k` and sets the batch
    /// used by [`Oracle::query`].
    pub fn begin_outer(&mut self, k: u64, batch: usize) {
        self.outer = k;
        self.inner = 0;
        self.batch = batch.max(1);
    }

    /// Calls actually charged for a request of `batch` samples.
    pub fn effective_batch(&self, batch: usize) -> usize {
        if self.sigma0 == 0.0 {
            1
        } else {
            batch.max(1)
        }
    }

    /// Mean of `batch` independent noisy samples at `z`, drawn from the
    /// sub-stream at the current cursor, which then advances.
    pub fn eval(&mut self, z: &Point, batch: usize) -> Point {
        let batch = self.effective_batch(batch);
        let out = self.sample_at(z, batch, self.outer, self.inner);
        self.inner += 1;
        self.calls += batch as u64;
        out
    }

    /// Pure sampling from the sub-stream `(outer, inner)`; does not count.
    pub fn sample_at(&self, z: &Point, batch: usize, outer: u64, inner: u64) -> Point {
        let mut value = self.base.eval(z);
        if self.sigma0 == 0.0 {
            return value;
        }
        let batch = batch.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(self.seed, outer, inner));
        let d = value.dim();
        let noise: Vec<f64> = if batch <= EXPLICIT_BATCH_LIMIT {
            let mut acc = vec![0.0; d];
            for _ in 0..batch {
                for a in acc.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *a += g;
                }
            }
            acc.into_iter()
                .map(|a| self.sigma0 * a / batch as f64)
                .collect()
        } else {
            let std = self.sigma0 / (batch as f64).sqrt();
            (0..d)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    std * g
                })
                .collect()
        };
        for (v, n) in value.coords_mut().iter_mut().zip(noise) {
            *v += n;
        }
        value
    }
}

impl Oracle for StochasticOracle {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn query(&mut self, z: &Point) -> Point {
        let batch = self.batch;
        self.eval(z, batch)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Minibatch evaluation as a free function.
pub fn oracle_eval(oracle: &mut StochasticOracle, z: &Point, batch: usize) -> Result<Point> {
    z.ensure_dim(oracle.dim())?;
    if batch == 0 {
        return Err(Error::param("batch must be >= 1"));
    }
    Ok(oracle.eval(z, batch))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn substream_seed(seed: u64, outer: u64, inner: u64) -> u64 {
    splitmix64(seed ^ splitmix64(outer ^ splitmix64(inner)))
}

/// Cap on total oracle calls for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalBudget {
    pub max_oracle_calls: u64,
    pub used: u64,
}

impl EvalBudget {
    pub fn new(max_oracle_calls: u64) -> Self {
        EvalBudget {
            max_oracle_calls,
            used: 0,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn remaining(&self) -> u64 {
        self.max_oracle_calls - self.used
    }

    pub fn can_spend(&self, calls: u64) -> bool {
        calls <= self.remaining()
    }

    /// Records `calls`; refuses (and records nothing) if it would overrun.
    pub fn spend(&mut self, calls: u64) -> bool {
        if self.can_spend(calls) {
            self.used += calls;
            true
        } else {
            false
        }
    }
}
