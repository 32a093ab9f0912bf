//! Schmidt spectra and entropy functionals.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{c64, MatRef, Par};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, VarianceProfile};
use crate::error::{Error, Result};
use crate::sampler::{draw_sample, StateMatrixSample};

/// Eigenvalues below this are floored in `R0`.
pub const R0_FLOOR: f64 = 1e-300;

/// Eigenvalues of the reduced density matrix, descending, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    pub lambdas: Vec<f64>,
    /// `S_1` before renormalization.
    pub trace: f64,
}

impl SchmidtSpectrum {
    /// Wraps a descending, unit-sum spectrum.
    pub fn from_lambdas(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Numerical("spectrum must be finite and non-negative".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let trace: f64 = lambdas.iter().sum();
        if trace <= 0.0 {
            return Err(Error::Numerical("spectrum has zero trace".into()));
        }
        for x in &mut lambdas {
            *x /= trace;
        }
        Ok(SchmidtSpectrum { lambdas, trace })
    }

    /// `S_m = sum_n lambda_n^m`.
    pub fn moment(&self, m: i32) -> f64 {
        self.lambdas.iter().map(|x| x.powi(m)).sum()
    }
}

/// Squared singular values of `c` (`n_a <= n_b`), without forming `C C^dagger`.
pub fn schmidt_values(c: MatRef<'_, c64>) -> Result<SchmidtSpectrum> {
    let (m, n) = (c.nrows(), c.ncols());
    if m > n {
        return Err(Error::DimensionMismatch(format!(
            "state matrix is {m}x{n}; subsystem A must be the smaller side"
        )));
    }
    let par = Par::Seq;
    let mut s = Diag::<c64>::zeros(m);
    let scratch = svd::svd_scratch::<c64>(
        m,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        par,
        Default::default(),
    );
    let mut buf = MemBuffer::new(scratch);
    svd::svd(
        c,
        s.as_mut(),
        None,
        None,
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| {
        Error::Numerical(format!(
            "SVD of {m}x{n} matrix failed ({e:?}); Frobenius norm {:.6e}",
            c.norm_l2()
        ))
    })?;
    let lambdas: Vec<f64> = s.column_vector().iter().map(|z| z.re * z.re).collect();
    SchmidtSpectrum::from_lambdas(lambdas)
}

pub fn schmidt_spectrum(sample: &StateMatrixSample) -> Result<SchmidtSpectrum> {
    schmidt_values(sample.c.as_ref())
}

/// Entropies of one sample, in natural-log units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub q: f64,
    pub purity: f64,
    /// Eigenvalues that hit [`R0_FLOOR`].
    pub floored: u32,
}

pub fn entropies(spec: &SchmidtSpectrum) -> EntropyRecord {
    let mut r1 = 0.0;
    let mut r0 = 0.0;
    let mut s2 = 0.0;
    let mut floored = 0;
    for &x in &spec.lambdas {
        if x > 0.0 {
            r1 -= x * x.ln();
        }
        if x < R0_FLOOR {
            floored += 1;
        }
        r0 -= x.max(R0_FLOOR).ln();
        s2 += x * x;
    }
    EntropyRecord {
        r0,
        r1: r1.max(0.0),
        r2: (-s2.ln()).max(0.0),
        q: 1.0 / s2,
        purity: s2,
        floored,
    }
}

/// Draw, decompose and measure samples `0..count` on the ambient rayon pool.
/// Results are in sample order.
pub fn measure_batch(
    profile: &VarianceProfile,
    base_seed: u64,
    count: usize,
) -> Result<Vec<EntropyRecord>> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = draw_sample(profile, base_seed, i)?;
            Ok(entropies(&schmidt_spectrum(&s)?))
        })
        .collect()
}

/// Logarithm base used when reporting entropies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    /// Multiplier from nats.
    pub fn factor(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanErr {
    pub mean: f64,
    pub err: f64,
}

impl MeanErr {
    /// Mean and standard error (`std / sqrt(n)`, unbiased std).
    pub fn of(xs: impl ExactSizeIterator<Item = f64> + Clone) -> Self {
        let n = xs.len() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanErr { mean, err: (var / n).sqrt() }
    }

    fn scaled(self, f: f64) -> Self {
        MeanErr { mean: self.mean * f, err: self.err * f }
    }
}

/// Ensemble averages at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub spec: EnsembleSpec,
    pub lambda_value: f64,
    pub lambda_ent: Option<f64>,
    pub r0: MeanErr,
    pub r1: MeanErr,
    pub r2: MeanErr,
    pub q: MeanErr,
    pub sample_count: usize,
    pub seed: u64,
    pub floored: u64,
}

pub const CSV_HEADER: &str = "family,l_a,l_b,gamma,param,lambda,lambda_ent,r0_mean,r0_err,\
r1_mean,r1_err,r2_mean,r2_err,q_mean,q_err,n_samples,seed";

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl SweepPoint {
    /// Entropies in `base` units.
    pub fn in_base(&self, base: LogBase) -> SweepPoint {
        let f = base.factor();
        SweepPoint {
            r0: self.r0.scaled(f),
            r1: self.r1.scaled(f),
            r2: self.r2.scaled(f),
            ..self.clone()
        }
    }

    pub fn csv_row(&self) -> String {
        let ent = self.lambda_ent.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.spec.family,
            self.spec.l_a,
            self.spec.l_b,
            fmt_f64(self.spec.gamma),
            fmt_f64(self.spec.param()),
            fmt_f64(self.lambda_value),
            ent,
            fmt_f64(self.r0.mean),
            fmt_f64(self.r0.err),
            fmt_f64(self.r1.mean),
            fmt_f64(self.r1.err),
            fmt_f64(self.r2.mean),
            fmt_f64(self.r2.err),
            fmt_f64(self.q.mean),
            fmt_f64(self.q.err),
            self.sample_count,
            self.seed
        )
    }
}

/// Means and standard errors of a record set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub r0: MeanErr,
    pub r1: MeanErr,
    pub r2: MeanErr,
    pub q: MeanErr,
    pub floored: u64,
}

pub fn aggregate_records(records: &[EntropyRecord]) -> Result<Moments> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: records.len() });
    }
    Ok(Moments {
        r0: MeanErr::of(records.iter().map(|r| r.r0)),
        r1: MeanErr::of(records.iter().map(|r| r.r1)),
        r2: MeanErr::of(records.iter().map(|r| r.r2)),
        q: MeanErr::of(records.iter().map(|r| r.q)),
        floored: records.iter().map(|r| r.floored as u64).sum(),
    })
}

/// Sequential fold over records in sample order.
pub fn aggregate(
    records: &[EntropyRecord],
    spec: &EnsembleSpec,
    lambda_value: f64,
    seed: u64,
) -> Result<SweepPoint> {
    let m = aggregate_records(records)?;
    Ok(SweepPoint {
        spec: *spec,
        lambda_value,
        lambda_ent: None,
        r0: m.r0,
        r1: m.r1,
        r2: m.r2,
        q: m.q,
        sample_count: records.len(),
        seed,
        floored: m.floored,
    })
}
