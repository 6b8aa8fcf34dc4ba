//! Naive simulation: draw the raw data, compute means and variances, run both
//! one-sided Welch tests.
//!
//! Replicate `r` draws its `n1 + n2` normals from `substream(seed, r)` by
//! inverting open uniforms, so results do not depend on the thread count.

use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::qrng::{open_uniform, substream};
use crate::special::norm_quantile;
use crate::tost::{rejects, summarize, DesignSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub spec: DesignSpec,
    pub n1: u64,
    pub n2: u64,
    pub m: usize,
    pub seed: u64,
    pub rejections: usize,
    pub power: f64,
}

/// Mean and `n - 1` variance by two passes.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

fn replicate(spec: &DesignSpec, n1: usize, n2: usize, seed: u64, r: u64, buf: &mut Vec<f64>) -> bool {
    let mut rng = substream(seed, r);
    buf.clear();
    // Group 1 has mean mu_diff and group 2 mean 0.
    buf.extend((0..n1).map(|_| spec.mu_diff + spec.sigma1 * norm_quantile(open_uniform(&mut rng))));
    buf.extend((0..n2).map(|_| spec.sigma2 * norm_quantile(open_uniform(&mut rng))));
    let (m1, v1) = mean_var(&buf[..n1]);
    let (m2, v2) = mean_var(&buf[n1..]);
    match summarize(m1 - m2, v1, v2, n1 as f64, n2 as f64) {
        Ok(stats) => rejects(&stats, spec),
        Err(_) => false,
    }
}

const CHUNK: usize = 256;

pub fn naive_run(spec: &DesignSpec, n1: u64, n2: u64, m: usize, seed: u64) -> Result<OracleRun> {
    spec.validate()?;
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument(format!(
            "both sample sizes must be at least 2, got ({n1}, {n2})"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let (a, b) = (n1 as usize, n2 as usize);
    let chunks = m.div_ceil(CHUNK);
    let counts = map_indices(chunks, |c| {
        let mut buf = Vec::with_capacity(a + b);
        (c * CHUNK..((c + 1) * CHUNK).min(m))
            .filter(|&r| replicate(spec, a, b, seed, r as u64, &mut buf))
            .count()
    });
    let rejections: usize = counts.into_iter().sum();
    Ok(OracleRun {
        spec: *spec,
        n1,
        n2,
        m,
        seed,
        rejections,
        power: rejections as f64 / m as f64,
    })
}

/// Rejection fraction over `m` simulated data sets.
pub fn naive_power(spec: &DesignSpec, n1: u64, n2: u64, m: usize, seed: u64) -> Result<f64> {
    Ok(naive_run(spec, n1, n2, m, seed)?.power)
}
