//! Monte Carlo draws of normalized state matrices.
//!
//! Each sample's generator is derived from `(base_seed, sample_index)` alone:
//! a ChaCha8 key from the base seed and the sample index as the stream id.
//! Batches are therefore identical for any worker count.

use std::io::Write;

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ensembles::VarianceProfile;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct StateMatrixSample {
    /// `n_a x n_b` state matrix with unit Frobenius norm.
    pub c: Mat<c64>,
    pub sample_index: u64,
    pub seed: u64,
}

/// Generator for one sample.
pub fn sample_rng(base_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(sample_index);
    rng
}

/// Unnormalized Gaussian matrix: `Re` and `Im` of entry `(k, l)` have
/// variance `h_kl`. Two normals are consumed per cell even where `h = 0`, so
/// the stream layout does not depend on the profile.
pub fn draw_raw(profile: &VarianceProfile, base_seed: u64, sample_index: u64) -> Mat<c64> {
    let mut rng = sample_rng(base_seed, sample_index);
    let n_a = profile.n_a();
    let n_b = profile.n_b();
    let h = profile.variances();
    let b = profile.means();
    let mut c = Mat::<c64>::zeros(n_a, n_b);
    for k in 0..n_a {
        for l in 0..n_b {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let idx = k * n_b + l;
            let sd = h[idx].sqrt();
            c[(k, l)] = c64::new(b[idx] + sd * x, b[idx] + sd * y);
        }
    }
    c
}

/// One normalized sample.
pub fn draw_sample(
    profile: &VarianceProfile,
    base_seed: u64,
    sample_index: u64,
) -> Result<StateMatrixSample> {
    if profile.variances().iter().all(|&h| h == 0.0) && profile.means().iter().all(|&b| b == 0.0) {
        return Err(Error::DegenerateSample);
    }
    let mut c = draw_raw(profile, base_seed, sample_index);
    let norm = c.norm_l2();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!(
            "sample {sample_index} has Frobenius norm {norm}"
        )));
    }
    let inv = 1.0 / norm;
    for l in 0..c.ncols() {
        for k in 0..c.nrows() {
            c[(k, l)] *= inv;
        }
    }
    Ok(StateMatrixSample { c, sample_index, seed: base_seed })
}

/// Runs `f` on a pool with `workers` threads (a single thread runs inline).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Samples `0..count`, ordered by index.
pub fn draw_batch(
    profile: &VarianceProfile,
    base_seed: u64,
    count: usize,
    workers: usize,
) -> Result<Vec<StateMatrixSample>> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    with_workers(workers, || {
        (0..count as u64)
            .into_par_iter()
            .map(|i| draw_sample(profile, base_seed, i))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Raw dump: for each sample, `n_a * n_b` little-endian `(re, im)` f64 pairs
/// in row-major order. No header.
pub fn write_samples<W: Write>(out: &mut W, samples: &[StateMatrixSample]) -> std::io::Result<()> {
    for s in samples {
        for k in 0..s.c.nrows() {
            for l in 0..s.c.ncols() {
                let z = s.c[(k, l)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}
