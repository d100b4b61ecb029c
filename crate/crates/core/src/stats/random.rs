//! Seeded random streams and the samplers used by the Monte Carlo oracles
//! and the experiment harness.
//!
//! Every stream is ChaCha8 keyed by a 64-bit seed, which is portable and
//! bit-reproducible across platforms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::cholesky;

/// Name of the generator behind every [`RngHandle`].
pub const RNG_ALGORITHM: &str = "chacha8";

/// A seeded, reproducible random stream.
///
/// Cloning a handle duplicates its position in the stream. Use [`RngHandle::derive`]
/// to obtain independent child streams (one per replicate, cell, ...).
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Child stream whose seed depends only on this handle's seed and `key`.
    pub fn derive(&self, key: u64) -> RngHandle {
        RngHandle::new(splitmix64(self.seed ^ splitmix64(key)))
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gamma(shape, 1) variate by Marsaglia–Tsang, boosted for shape < 1.
pub fn sample_gamma(shape: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::Domain(format!("gamma shape must be positive, got {shape}")));
    }
    Ok(gamma_unchecked(shape, rng))
}

fn gamma_unchecked(shape: f64, rng: &mut RngHandle) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.uniform();
        return gamma_unchecked(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// A point on the simplex drawn from Dir(alpha).
pub fn sample_dirichlet(alpha: &[f64], rng: &mut RngHandle) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::Domain("Dirichlet needs at least one component".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!("Dirichlet concentration must be positive, got {a}")));
    }
    let mut out = Vec::with_capacity(alpha.len());
    dirichlet_into(alpha, rng, &mut out);
    Ok(out)
}

pub(crate) fn dirichlet_into(alpha: &[f64], rng: &mut RngHandle, out: &mut Vec<f64>) {
    out.clear();
    let mut total = 0.0;
    for &a in alpha {
        let g = gamma_unchecked(a, rng);
        total += g;
        out.push(g);
    }
    for g in out.iter_mut() {
        *g /= total;
    }
}

/// Multivariate normal sampler holding the Cholesky factor of its covariance.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        let chol = cholesky(cov)?.l();
        Ok(Self { mean, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut RngHandle) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.standard_normal());
        &self.mean + &self.chol * z
    }
}

/// One draw from N(mean, cov).
pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngHandle) -> Result<DVector<f64>> {
    Ok(MvnSampler::new(mean.clone(), cov)?.sample(rng))
}

/// Categorical draw from probabilities `p` (assumed normalized).
pub fn sample_categorical(p: &[f64], rng: &mut RngHandle) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}
