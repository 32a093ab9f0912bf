//! Entropy against the cut position `l_a` of a fixed total size `L`, at a
//! fixed complexity parameter.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Warning};
use crate::ensembles::{solve_param, variance_profile, EnsembleSpec, Family, ParamBounds};
use crate::error::{Error, Result};
use crate::measures::{aggregate, measure_batch, MeanErr, SweepPoint};
use crate::sampler::with_workers;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutScanConfig {
    /// One template per family; its sizes are replaced by each cut.
    pub templates: Vec<EnsembleSpec>,
    pub total: u32,
    pub target_lambdas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub bounds: ParamBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutScanResult {
    pub family: Family,
    pub target_lambda: f64,
    pub l_a: Vec<u32>,
    pub params: Vec<f64>,
    pub r1: Vec<MeanErr>,
    pub r2: Vec<MeanErr>,
    pub r1_normalized: Vec<f64>,
    pub r2_normalized: Vec<f64>,
    /// Cut with the largest `<R1>`.
    pub l_m: Option<u32>,
    /// Cut with the largest `<R2>`.
    pub l_m_r2: Option<u32>,
    pub points: Vec<SweepPoint>,
    pub warnings: Vec<Warning>,
}

fn normalize(xs: &[f64]) -> (Vec<f64>, Option<usize>) {
    let mut arg = None;
    let mut top = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > top {
            top = x;
            arg = Some(i);
        }
    }
    if !(top > 0.0) {
        return (vec![0.0; xs.len()], arg);
    }
    (xs.iter().map(|x| x / top).collect(), arg)
}

pub fn cut_scan(config: &CutScanConfig, workers: usize) -> Result<Vec<CutScanResult>> {
    if config.total % 2 != 0 || config.total < 2 {
        return Err(Error::InvalidSpec(format!("total size L = {} must be even", config.total)));
    }
    if config.target_lambdas.is_empty() {
        return Err(Error::Domain("no target Lambda values".into()));
    }
    with_workers(workers, || {
        let mut out = Vec::new();
        for t in &config.templates {
            for &target in &config.target_lambdas {
                out.push(scan_one(config, t, target)?);
            }
        }
        Ok(out)
    })?
}

fn scan_one(config: &CutScanConfig, template: &EnsembleSpec, target: f64) -> Result<CutScanResult> {
    let mut res = CutScanResult {
        family: template.family,
        target_lambda: target,
        l_a: Vec::new(),
        params: Vec::new(),
        r1: Vec::new(),
        r2: Vec::new(),
        r1_normalized: Vec::new(),
        r2_normalized: Vec::new(),
        l_m: None,
        l_m_r2: None,
        points: Vec::new(),
        warnings: Vec::new(),
    };
    for l_a in 1..=config.total / 2 {
        let l_b = config.total - l_a;
        let ctx = format!("{} L_A={l_a} L_B={l_b} Lambda={target}", template.family);
        let spec = template.with_sizes(l_a, l_b)?;
        let point = solve_param(&spec, target, config.bounds).and_then(|p| {
            let s = spec.with_param(p)?;
            let seed = derive_seed(
                config.seed,
                &[template.family as u64, l_a as u64, l_b as u64, target.to_bits()],
            );
            let records = measure_batch(&variance_profile(&s)?, seed, config.samples)?;
            Ok((p, aggregate(&records, &s, target, seed)?))
        });
        match point {
            Ok((p, m)) => {
                res.l_a.push(l_a);
                res.params.push(p);
                res.r1.push(m.r1);
                res.r2.push(m.r2);
                res.points.push(m);
            }
            Err(e @ (Error::Unattainable { .. } | Error::Numerical(_) | Error::SingularTerm { .. })) => {
                warn!("{ctx}: skipped: {e}");
                res.warnings.push(Warning::new(ctx, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let (n1, a1) = normalize(&res.r1.iter().map(|m| m.mean).collect::<Vec<_>>());
    let (n2, a2) = normalize(&res.r2.iter().map(|m| m.mean).collect::<Vec<_>>());
    res.r1_normalized = n1;
    res.r2_normalized = n2;
    res.l_m = a1.map(|i| res.l_a[i]);
    res.l_m_r2 = a2.map(|i| res.l_a[i]);
    Ok(res)
}
