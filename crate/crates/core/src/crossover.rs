//! 2x2 crossover designs.
//!
//! Without carryover, the within-subject period differences of the two
//! sequences behave like two independent groups with standard deviations
//! `sigma_D1 / 2` and `sigma_D2 / 2` and mean difference `F`, the direct drug
//! effect. Sample sizes are per sequence.

use crate::curve::{power_curve, PowerCurve, SolverSettings};
use crate::error::{Error, Result};
use crate::special::t_quantile_unchecked;
use crate::tost::DesignSpec;
use serde::{Deserialize, Serialize};

const CHOW_MAX_N: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverSpec {
    /// Direct drug effect `F_T - F_R`, usually on the log scale.
    pub f: f64,
    pub sigma_d1: f64,
    pub sigma_d2: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub alpha: f64,
    pub q: f64,
}

impl CrossoverSpec {
    pub fn validate(&self) -> Result<()> {
        self.two_group_unchecked().validate()
    }

    fn two_group_unchecked(&self) -> DesignSpec {
        DesignSpec {
            mu_diff: self.f,
            sigma1: self.sigma_d1 / 2.0,
            sigma2: self.sigma_d2 / 2.0,
            delta_lower: self.delta_lower,
            delta_upper: self.delta_upper,
            alpha: self.alpha,
            q: self.q,
        }
    }
}

/// The equivalent two-group design.
pub fn to_two_group(cspec: &CrossoverSpec) -> Result<DesignSpec> {
    let spec = cspec.two_group_unchecked();
    spec.validate()?;
    Ok(spec)
}

/// Power curve and recommendation for the crossover design.
pub fn crossover_curve(
    cspec: &CrossoverSpec,
    target_power: f64,
    m: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PowerCurve> {
    power_curve(&to_two_group(cspec)?, target_power, m, seed, settings)
}

/// Recommended subjects per sequence, `(n1, n2)`.
pub fn crossover_sample_size(
    cspec: &CrossoverSpec,
    target_power: f64,
    m: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<(u64, u64)> {
    let c = crossover_curve(cspec, target_power, m, seed, settings)?;
    Ok((c.rec_n1, c.rec_n2))
}

/// Chow's conservative per-sequence size: the smallest `n >= 2` with
/// `n >= (t_{alpha, 2n-2} + t_{beta/2, 2n-2})^2 sigma_D^2 / (2 (delta_U - |F|)^2)`,
/// where `t_{a, df}` is the upper `a` quantile.
pub fn chow_sample_size(f: f64, sigma_d: f64, delta_upper: f64, alpha: f64, beta: f64) -> Result<u64> {
    if !(sigma_d > 0.0 && sigma_d.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma_D must be positive, got {sigma_d}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha and beta must lie in (0, 1), got ({alpha}, {beta})"
        )));
    }
    let room = delta_upper - f.abs();
    if !(room > 0.0) {
        return Err(Error::Infeasible(format!(
            "|F| = {} must be below delta_U = {delta_upper}",
            f.abs()
        )));
    }
    let scale = sigma_d * sigma_d / (2.0 * room * room);
    (2..=CHOW_MAX_N)
        .find(|&n| {
            let df = 2.0 * n as f64 - 2.0;
            let t = t_quantile_unchecked(1.0 - alpha, df) + t_quantile_unchecked(1.0 - beta / 2.0, df);
            n as f64 >= t * t * scale
        })
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "no sample size up to {CHOW_MAX_N} satisfies the inequality"
            ))
        })
}
