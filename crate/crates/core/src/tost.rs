//! The Welch-based TOST procedure and its power estimator on the unit cube.
//!
//! A point `u = (u1, u2, u3)` fixes one simulated sample through its
//! sufficient statistics:
//!
//! ```text
//! s_j^2 = sigma_j^2 * chisq_quantile(u_j; n_j - 1) / (n_j - 1)
//! d_bar = mu_diff + norm_quantile(u3) * sqrt(sigma_1^2 / n_1 + sigma_2^2 / n_2)
//! ```
//!
//! The TOST rejects when `t_{1-alpha}(nu) * se < min(d_bar - delta_L, delta_U - d_bar)`,
//! i.e. when `(d_bar, se)` lies inside the triangle with base `(delta_L, delta_U)`.

use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::qrng::{PointSet, SobolStream};
use crate::special::{chisq_quantile, norm_quantile, t_quantile_unchecked};
use serde::{Deserialize, Serialize};

/// Parameters of a two-group bioequivalence design. `q` is the allocation
/// ratio with `n1 = q * n2`; it only matters for power curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub mu_diff: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub alpha: f64,
    pub q: f64,
}

impl DesignSpec {
    pub fn new(
        mu_diff: f64,
        sigma1: f64,
        sigma2: f64,
        delta_lower: f64,
        delta_upper: f64,
        alpha: f64,
        q: f64,
    ) -> Result<Self> {
        let spec = Self {
            mu_diff,
            sigma1,
            sigma2,
            delta_lower,
            delta_upper,
            alpha,
            q,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.mu_diff.is_finite() {
            out.push(format!("mu_diff must be finite, got {}", self.mu_diff));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            out.push(format!("sigma1 must be positive, got {}", self.sigma1));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            out.push(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.delta_lower.is_finite() && self.delta_upper.is_finite())
            || self.delta_lower >= self.delta_upper
        {
            out.push(format!(
                "equivalence limits must satisfy delta_lower < delta_upper, got ({}, {})",
                self.delta_lower, self.delta_upper
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            out.push(format!("alpha must lie in (0, 0.5], got {}", self.alpha));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            out.push(format!("q must be positive, got {}", self.q));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }

    /// Power curves need the alternative to hold: `delta_lower < mu_diff < delta_upper`.
    pub fn require_alternative(&self) -> Result<()> {
        self.validate()?;
        if self.delta_lower < self.mu_diff && self.mu_diff < self.delta_upper {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "mu_diff = {} must lie strictly inside ({}, {})",
                self.mu_diff, self.delta_lower, self.delta_upper
            )))
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.delta_lower + self.delta_upper)
    }

    /// Multiplies every quantity in response units by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mu_diff: self.mu_diff * c,
            sigma1: self.sigma1 * c,
            sigma2: self.sigma2 * c,
            delta_lower: self.delta_lower * c,
            delta_upper: self.delta_upper * c,
            ..*self
        }
    }

    /// Translates the effect and both limits by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            mu_diff: self.mu_diff + c,
            delta_lower: self.delta_lower + c,
            delta_upper: self.delta_upper + c,
            ..*self
        }
    }
}

/// Sufficient statistics of one simulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub d_bar: f64,
    pub s1_sq: f64,
    pub s2_sq: f64,
    pub se: f64,
    pub nu: f64,
}

/// Welch-Satterthwaite degrees of freedom. Sample sizes may be real.
pub fn welch_df(s1_sq: f64, s2_sq: f64, n1: f64, n2: f64) -> Result<f64> {
    if !(n1 > 1.0 && n2 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample sizes must exceed 1, got ({n1}, {n2})"
        )));
    }
    if !(s1_sq >= 0.0 && s2_sq >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample variances must be nonnegative, got ({s1_sq}, {s2_sq})"
        )));
    }
    if s1_sq == 0.0 && s2_sq == 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(welch_df_unchecked(s1_sq, s2_sq, n1, n2))
}

#[inline]
fn welch_df_unchecked(s1_sq: f64, s2_sq: f64, n1: f64, n2: f64) -> f64 {
    let v1 = s1_sq / n1;
    let v2 = s2_sq / n2;
    let total = v1 + v2;
    total * total / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0))
}

/// Builds summary statistics from sample variances and the mean difference.
pub fn summarize(d_bar: f64, s1_sq: f64, s2_sq: f64, n1: f64, n2: f64) -> Result<SummaryStats> {
    let nu = welch_df(s1_sq, s2_sq, n1, n2)?;
    Ok(SummaryStats {
        d_bar,
        s1_sq,
        s2_sq,
        se: (s1_sq / n1 + s2_sq / n2).sqrt(),
        nu,
    })
}

/// Maps a unit-cube point to the summary statistics of a sample with sizes
/// `(n1, n2)`, which may be real.
pub fn stats_from_point(u: &[f64; 3], spec: &DesignSpec, n1: f64, n2: f64) -> Result<SummaryStats> {
    if !u.iter().all(|&x| x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "unit-cube point must be strictly interior, got {u:?}"
        )));
    }
    if !(n1 >= 2.0 && n2 >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "sample sizes must be at least 2, got ({n1}, {n2})"
        )));
    }
    Ok(stats_unchecked(u[0], u[1], norm_quantile(u[2]), spec, n1, n2))
}

/// `z3` is the normal quantile of the third coordinate, hoisted by callers
/// that evaluate the same point at many sample sizes.
#[inline]
pub(crate) fn stats_unchecked(
    u1: f64,
    u2: f64,
    z3: f64,
    spec: &DesignSpec,
    n1: f64,
    n2: f64,
) -> SummaryStats {
    let df1 = n1 - 1.0;
    let df2 = n2 - 1.0;
    let s1_sq = spec.sigma1 * spec.sigma1 * chisq_quantile(u1, df1) / df1;
    let s2_sq = spec.sigma2 * spec.sigma2 * chisq_quantile(u2, df2) / df2;
    let spread = (spec.sigma1 * spec.sigma1 / n1 + spec.sigma2 * spec.sigma2 / n2).sqrt();
    let d_bar = spec.mu_diff + z3 * spread;
    SummaryStats {
        d_bar,
        s1_sq,
        s2_sq,
        se: (s1_sq / n1 + s2_sq / n2).sqrt(),
        nu: welch_df_unchecked(s1_sq, s2_sq, n1, n2),
    }
}

/// Distance from `d_bar` to the nearer equivalence limit; nonpositive outside.
#[inline]
pub fn margin(d_bar: f64, spec: &DesignSpec) -> f64 {
    (d_bar - spec.delta_lower).min(spec.delta_upper - d_bar)
}

/// The two one-sided Welch statistics `(t_L, t_U)`.
pub fn t_statistics(stats: &SummaryStats, spec: &DesignSpec) -> (f64, f64) {
    (
        (stats.d_bar - spec.delta_lower) / stats.se,
        (spec.delta_upper - stats.d_bar) / stats.se,
    )
}

/// Critical value `t_{1-alpha}(nu)`.
#[inline]
pub fn critical_value(alpha: f64, nu: f64) -> f64 {
    t_quantile_unchecked(1.0 - alpha, nu)
}

/// Whether both one-sided tests reject at level `alpha`.
pub fn rejects(stats: &SummaryStats, spec: &DesignSpec) -> bool {
    let m = margin(stats.d_bar, spec);
    m > 0.0 && critical_value(spec.alpha, stats.nu) * stats.se < m
}

/// Rejection decisions for fixed `(spec, n1, n2)`.
///
/// Since `nu >= min(n1, n2) - 1`, the critical value lies between `z_{1-alpha}`
/// and `t_{1-alpha}(min(n1, n2) - 1)`; points outside that band are decided
/// without a t quantile. Decisions equal [`rejects`] exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RejectionRule {
    spec: DesignSpec,
    t_floor: f64,
    t_ceiling: f64,
}

impl RejectionRule {
    pub(crate) fn new(spec: &DesignSpec, n1: f64, n2: f64) -> Self {
        let nu_min = n1.min(n2) - 1.0;
        Self {
            spec: *spec,
            t_floor: norm_quantile(1.0 - spec.alpha),
            // Slightly lower df gives a strict upper bound despite rounding in nu.
            t_ceiling: critical_value(spec.alpha, nu_min * (1.0 - 1e-9)),
        }
    }

    #[inline]
    pub(crate) fn decide(&self, stats: &SummaryStats) -> bool {
        let m = margin(stats.d_bar, &self.spec);
        if !(m > 0.0) {
            return false;
        }
        if self.t_floor * stats.se >= m {
            return false;
        }
        if self.t_ceiling * stats.se < m {
            return true;
        }
        critical_value(self.spec.alpha, stats.nu) * stats.se < m
    }
}

/// Number of rejections among `m` evaluated points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub rejections: usize,
    pub m: usize,
}

impl PowerEstimate {
    pub fn power(&self) -> f64 {
        self.rejections as f64 / self.m as f64
    }
}

fn check_sizes(n1: u64, n2: u64) -> Result<()> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument(format!(
            "both sample sizes must be at least 2 to estimate variances, got ({n1}, {n2})"
        )));
    }
    Ok(())
}

const CHUNK: usize = 512;

/// Empirical power over an arbitrary set of unit-cube points.
pub fn empirical_power_on(spec: &DesignSpec, n1: u64, n2: u64, points: &PointSet) -> Result<PowerEstimate> {
    spec.validate()?;
    check_sizes(n1, n2)?;
    if points.dimension() < 3 || points.is_empty() {
        return Err(Error::InvalidArgument(
            "need a nonempty set of points with at least 3 coordinates".into(),
        ));
    }
    let (n1, n2) = (n1 as f64, n2 as f64);
    let rule = RejectionRule::new(spec, n1, n2);
    let m = points.len();
    let chunks = m.div_ceil(CHUNK);
    let counts = map_indices(chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(m))
            .filter(|&i| {
                let u = points.point(i);
                let stats = stats_unchecked(u[0], u[1], norm_quantile(u[2]), spec, n1, n2);
                rule.decide(&stats)
            })
            .count()
    });
    Ok(PowerEstimate {
        rejections: counts.into_iter().sum(),
        m,
    })
}

/// Empirical power at `(n1, n2)` from `m` randomized Sobol' points.
pub fn empirical_power(spec: &DesignSpec, n1: u64, n2: u64, m: usize, seed: u64) -> Result<f64> {
    spec.validate()?;
    check_sizes(n1, n2)?;
    let stream = SobolStream::new(3, m, seed)?;
    Ok(empirical_power_on(spec, n1, n2, &stream.points)?.power())
}
