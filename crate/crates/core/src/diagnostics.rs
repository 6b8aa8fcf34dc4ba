//! Integer-grid scans of the rejection gap and the standard error.
//!
//! A point is scanned at the pairs `(n, round(q n))`, with ties rounded to
//! even, starting at the smallest `n >= 2` whose partner size is also at least
//! 2. Sign changes of the gap between consecutive grid sizes are refined with
//! Brent's method along the segment joining the two pairs.
//!
//! The crossing list starts with the grid start when the point already rejects
//! there, followed by every refined sign change. A point has multiple
//! intersections when the list has at least two entries; it then leaves the
//! rejection region at some grid size (the departure) and may come back
//! `duration` sizes later.

use crate::curve::PointPath;
use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::qrng::SobolStream;
use crate::roots::{brent, Bracket};
use crate::special::{norm_quantile, t_quantile_unchecked};
use crate::tost::{critical_value, margin, stats_unchecked, DesignSpec};
use serde::{Deserialize, Serialize};

const REFINE_TOL: f64 = 1e-6;

/// Round half to even.
pub fn round_half_even(x: f64) -> f64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - x.signum()
    } else {
        r
    }
}

/// First grid size: the smallest `n >= 2` with `round(q n) >= 2`.
pub fn grid_start(q: f64) -> u64 {
    let mut n = 2u64;
    while round_half_even(q * n as f64) < 2.0 {
        n += 1;
    }
    n
}

/// `round(q n)`, the partner size on the diagnostics grid.
pub fn partner_size(q: f64, n: u64) -> f64 {
    round_half_even(q * n as f64)
}

struct GridPath<'a> {
    u1: f64,
    u2: f64,
    z3: f64,
    spec: &'a DesignSpec,
}

impl<'a> GridPath<'a> {
    fn new(u: &[f64; 3], spec: &'a DesignSpec) -> Self {
        Self {
            u1: u[0],
            u2: u[1],
            z3: norm_quantile(u[2]),
            spec,
        }
    }

    fn gap_at(&self, n1: f64, n2: f64) -> f64 {
        let s = stats_unchecked(self.u1, self.u2, self.z3, self.spec, n1, n2);
        critical_value(self.spec.alpha, s.nu) * s.se - margin(s.d_bar, self.spec)
    }

    fn se_at(&self, n1: f64, n2: f64) -> f64 {
        stats_unchecked(self.u1, self.u2, self.z3, self.spec, n1, n2).se
    }

    /// Gap along the segment from `(k, n2(k))` to `(k + 1, n2(k + 1))`.
    fn gap_between(&self, k: u64, x: f64) -> f64 {
        let a = partner_size(self.spec.q, k);
        let b = partner_size(self.spec.q, k + 1);
        let t = x - k as f64;
        self.gap_at(x, a + t * (b - a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub point_index: usize,
    /// Ascending: the grid start if the point rejects there, then every sign
    /// change of the gap.
    pub crossings: Vec<f64>,
    /// Smallest grid size at which the point is outside the rejection region
    /// after being inside it at the previous size.
    pub departure_n: Option<u64>,
    /// Smallest `zeta >= 1` such that the point rejects again at
    /// `departure_n + zeta`; `None` if that does not happen by `n_max`.
    pub duration: Option<u64>,
}

impl IntersectionReport {
    pub fn is_nonunique(&self) -> bool {
        self.crossings.len() >= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SePeakReport {
    pub point_index: usize,
    pub argmax_n: u64,
}

fn check_scan(spec: &DesignSpec, u: &[f64; 3], n_max: u64) -> Result<u64> {
    spec.require_alternative()?;
    if !u.iter().all(|&x| x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "unit-cube point must be strictly interior, got {u:?}"
        )));
    }
    let start = grid_start(spec.q);
    if n_max < start {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} is below the first admissible grid size {start}"
        )));
    }
    Ok(start)
}

fn intersections(path: &GridPath, start: u64, n_max: u64, index: usize) -> IntersectionReport {
    let q = path.spec.q;
    let mut crossings = Vec::new();
    let mut departure = None;
    let mut duration = None;
    let mut g_prev = path.gap_at(start as f64, partner_size(q, start));
    if g_prev <= 0.0 {
        crossings.push(start as f64);
    }
    for n in start + 1..=n_max {
        let g = path.gap_at(n as f64, partner_size(q, n));
        if (g <= 0.0) != (g_prev <= 0.0) {
            let k = n - 1;
            let (outside, g_out, inside, g_in) = if g > 0.0 {
                (n as f64, g, k as f64, g_prev)
            } else {
                (k as f64, g_prev, n as f64, g)
            };
            let b = brent(
                |x| path.gap_between(k, x),
                Bracket {
                    outside,
                    g_outside: g_out,
                    inside,
                    g_inside: g_in,
                },
                REFINE_TOL,
                200,
            );
            crossings.push(b.inside);
            match (departure, g > 0.0) {
                (None, true) => departure = Some(n),
                (Some(d), false) if duration.is_none() => duration = Some(n - d),
                _ => {}
            }
        }
        g_prev = g;
    }
    IntersectionReport {
        point_index: index,
        crossings,
        departure_n: departure,
        duration,
    }
}

fn se_peak(path: &GridPath, start: u64, n_max: u64, index: usize) -> SePeakReport {
    let q = path.spec.q;
    let mut best = (start, path.se_at(start as f64, partner_size(q, start)));
    for n in start + 1..=n_max {
        let se = path.se_at(n as f64, partner_size(q, n));
        if se > best.1 {
            best = (n, se);
        }
    }
    SePeakReport {
        point_index: index,
        argmax_n: best.0,
    }
}

/// Scans the gap on the grid `start..=n_max` for one point.
pub fn scan_intersections(u: &[f64; 3], spec: &DesignSpec, n_max: u64) -> Result<IntersectionReport> {
    let start = check_scan(spec, u, n_max)?;
    Ok(intersections(&GridPath::new(u, spec), start, n_max, 0))
}

/// Grid size in `start..=n_max` with the largest standard error (first on ties).
pub fn scan_se_peak(u: &[f64; 3], spec: &DesignSpec, n_max: u64) -> Result<SePeakReport> {
    let start = check_scan(spec, u, n_max)?;
    Ok(se_peak(&GridPath::new(u, spec), start, n_max, 0))
}

/// Large-sample limit of the threshold, `min(mu - delta_L, delta_U - mu) / z_{1-alpha}`.
pub fn lambda_limit(spec: &DesignSpec) -> f64 {
    margin(spec.mu_diff, spec) / norm_quantile(1.0 - spec.alpha)
}

/// Standard error with chi-square quantiles replaced by Fisher's
/// `(z + sqrt(2 k))^2 / 2` approximation, `k` the degrees of freedom.
pub fn se_fisher_approx(u: &[f64; 3], spec: &DesignSpec, n: f64) -> f64 {
    let q = spec.q;
    let a = norm_quantile(u[0]) + (2.0 * (n - 1.0)).sqrt();
    let b = norm_quantile(u[1]) + (2.0 * (q * n - 1.0)).sqrt();
    let inner = spec.sigma1 * spec.sigma1 / (n - 1.0) * a * a
        + spec.sigma2 * spec.sigma2 / (q * (q * n - 1.0)) * b * b;
    (inner / (2.0 * n)).sqrt()
}

/// Sample size at which the mean difference of the point sits at the centre
/// of the limits; `None` when it never does.
pub fn center_crossing_n(u: &[f64; 3], spec: &DesignSpec) -> Option<f64> {
    let z = norm_quantile(u[2]);
    let gap = spec.midpoint() - spec.mu_diff;
    if z == 0.0 || gap == 0.0 || z.signum() != gap.signum() {
        return None;
    }
    Some(z * z * (spec.sigma1 * spec.sigma1 + spec.sigma2 * spec.sigma2 / spec.q) / (gap * gap))
}

/// Large-`n` approximation of the threshold when the mean difference
/// approaches the effect from the centre side:
/// `Lambda* + |z3| / z_{1-alpha} * se`.
pub fn lambda_large_n_approx(u: &[f64; 3], spec: &DesignSpec, se: f64) -> f64 {
    lambda_limit(spec) + norm_quantile(u[2]).abs() / norm_quantile(1.0 - spec.alpha) * se
}

/// Threshold from the point's statistics at real `(n1, n2)`; zero outside the limits.
pub fn lambda_at(u: &[f64; 3], spec: &DesignSpec, n1: f64, n2: f64) -> f64 {
    let s = stats_unchecked(u[0], u[1], norm_quantile(u[2]), spec, n1, n2);
    let m = margin(s.d_bar, spec);
    if m > 0.0 {
        m / t_quantile_unchecked(1.0 - spec.alpha, s.nu)
    } else {
        0.0
    }
}

/// Aggregates of one scan over many points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub points: usize,
    pub nonunique: usize,
    /// Fraction of points with multiple intersections.
    pub prevalence: f64,
    /// Mean departure over points with multiple intersections.
    pub mean_departure: Option<f64>,
    /// Mean duration over points that re-enter by `n_max`.
    pub mean_duration: Option<f64>,
    pub mean_argmax: f64,
    pub frac_argmax_gt5: f64,
    pub frac_argmax_gt10: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

pub fn summarize(reports: &[IntersectionReport], peaks: &[SePeakReport]) -> ScanSummary {
    let points = reports.len();
    let nonunique = reports.iter().filter(|r| r.is_nonunique()).count();
    let m = peaks.len() as f64;
    ScanSummary {
        points,
        nonunique,
        prevalence: nonunique as f64 / points as f64,
        mean_departure: mean(reports.iter().filter_map(|r| r.departure_n.map(|d| d as f64))),
        mean_duration: mean(reports.iter().filter_map(|r| r.duration.map(|d| d as f64))),
        mean_argmax: peaks.iter().map(|p| p.argmax_n as f64).sum::<f64>() / m,
        frac_argmax_gt5: peaks.iter().filter(|p| p.argmax_n > 5).count() as f64 / m,
        frac_argmax_gt10: peaks.iter().filter(|p| p.argmax_n > 10).count() as f64 / m,
    }
}

/// Scans every point of one randomized Sobol' sequence.
pub fn scan_stream(
    spec: &DesignSpec,
    n_max: u64,
    m: usize,
    seed: u64,
) -> Result<(Vec<IntersectionReport>, Vec<SePeakReport>)> {
    check_scan(spec, &[0.5; 3], n_max)?;
    let start = grid_start(spec.q);
    let stream = SobolStream::new(3, m, seed)?;
    let both = map_indices(m, |i| {
        let path = GridPath::new(&stream.points.cube_point(i), spec);
        (
            intersections(&path, start, n_max, i),
            se_peak(&path, start, n_max, i),
        )
    });
    Ok(both.into_iter().unzip())
}

/// One row of the scenario table: means over `reps` sequences of length `m`,
/// replicate `r` shifted with seed `seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: Scenario,
    pub reps: usize,
    pub m: usize,
    /// Multiple-intersection points over all replicates.
    pub nonunique: usize,
    pub total_points: usize,
    pub prevalence: f64,
    pub mean_departure: Option<f64>,
    pub mean_duration: Option<f64>,
    pub mean_argmax: f64,
    pub frac_argmax_gt5: f64,
    pub frac_argmax_gt10: f64,
}

pub fn run_scenario(scenario: &Scenario, m: usize, reps: usize, seed: u64) -> Result<ScenarioRow> {
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one repetition".into()));
    }
    let spec = scenario.spec();
    let mut reports = Vec::with_capacity(m * reps);
    let mut peaks = Vec::with_capacity(m * reps);
    for r in 0..reps {
        let (a, b) = scan_stream(&spec, scenario.n_max, m, seed.wrapping_add(r as u64))?;
        reports.extend(a);
        peaks.extend(b);
    }
    let s = summarize(&reports, &peaks);
    Ok(ScenarioRow {
        scenario: scenario.clone(),
        reps,
        m,
        nonunique: s.nonunique,
        total_points: s.points,
        prevalence: s.prevalence,
        mean_departure: s.mean_departure,
        mean_duration: s.mean_duration,
        mean_argmax: s.mean_argmax,
        frac_argmax_gt5: s.frac_argmax_gt5,
        frac_argmax_gt10: s.frac_argmax_gt10,
    })
}

/// A built-in scenario: the motivating design with a different effect,
/// standard deviations and allocation ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// 1, 2 or 3 for `(16.5, 16.5)`, `(18, 15)`, `(19.5, 13)`.
    pub group: u8,
    pub mu_diff: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub q: f64,
    pub n_max: u64,
}

impl Scenario {
    pub fn spec(&self) -> DesignSpec {
        DesignSpec {
            mu_diff: self.mu_diff,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            delta_lower: -19.2,
            delta_upper: 19.2,
            alpha: 0.05,
            q: self.q,
        }
    }
}

/// The 35 built-in scenarios, named `mu<effect>-s<group>-<q label>`, e.g.
/// `mu0-s1-q1` or `mu-8-s3-q1/1.5`.
pub fn scenario_presets() -> Vec<Scenario> {
    let effects: [(f64, u64); 5] = [(0.0, 100), (-4.0, 100), (-8.0, 200), (-12.0, 500), (-16.0, 2500)];
    let combos: [(u8, f64, f64, f64, &str); 7] = [
        (1, 16.5, 16.5, 1.0, "1"),
        (2, 18.0, 15.0, 1.0, "1"),
        (2, 18.0, 15.0, 15.0 / 18.0, "1/1.2"),
        (2, 18.0, 15.0, 18.0 / 15.0, "1.2"),
        (3, 19.5, 13.0, 1.0, "1"),
        (3, 19.5, 13.0, 13.0 / 19.5, "1/1.5"),
        (3, 19.5, 13.0, 19.5 / 13.0, "1.5"),
    ];
    let mut out = Vec::with_capacity(35);
    for &(mu, n_max) in &effects {
        for &(group, s1, s2, q, label) in &combos {
            out.push(Scenario {
                name: format!("mu{}-s{group}-q{label}", mu as i64),
                group,
                mu_diff: mu,
                sigma1: s1,
                sigma2: s2,
                q,
                n_max,
            });
        }
    }
    out
}

pub fn scenario_by_name(name: &str) -> Option<Scenario> {
    scenario_presets().into_iter().find(|s| s.name == name)
}

/// Continuous-`n` gap of a point, for plotting scans next to the grid values.
pub fn continuous_gap(u: &[f64; 3], spec: &DesignSpec, n: f64) -> Result<f64> {
    Ok(PointPath::new(u, spec)?.gap(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motivating() -> DesignSpec {
        DesignSpec::new(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 1.0).unwrap()
    }

    #[test]
    fn rounding_ties_to_even() {
        assert_eq!(round_half_even(2.5), 2.0);
        assert_eq!(round_half_even(3.5), 4.0);
        assert_eq!(round_half_even(1.6667), 2.0);
        assert_eq!(round_half_even(-2.5), -2.0);
        assert_eq!(round_half_even(2.4), 2.0);
    }

    #[test]
    fn grid_starts() {
        assert_eq!(grid_start(1.0), 2);
        assert_eq!(grid_start(1.0 / 1.2), 2);
        assert_eq!(grid_start(13.0 / 19.5), 3);
        assert_eq!(grid_start(1.5), 2);
    }

    #[test]
    fn presets() {
        let all = scenario_presets();
        assert_eq!(all.len(), 35);
        let names: std::collections::HashSet<_> = all.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names.len(), 35);
        let s = scenario_by_name("mu-16-s3-q1/1.5").unwrap();
        assert_eq!(s.n_max, 2500);
        assert_eq!(s.sigma2, 13.0);
        assert_eq!(scenario_by_name("mu-4-s2-q1").unwrap().spec(), motivating());
    }

    #[test]
    fn tiny_variance_point_has_one_crossing_at_start() {
        let r = scan_intersections(&[1e-9, 1e-9, 0.5], &motivating(), 100).unwrap();
        assert_eq!(r.crossings, vec![2.0]);
        assert_eq!(r.departure_n, None);
        assert_eq!(r.duration, None);
    }

    #[test]
    fn upper_tail_variances_peak_at_start() {
        let r = scan_se_peak(&[0.9, 0.9, 0.3], &motivating(), 100).unwrap();
        assert_eq!(r.argmax_n, 2);
    }

    #[test]
    fn lambda_limit_of_motivating_design() {
        assert!((lambda_limit(&motivating()) - 15.2 / 1.6448536269514729).abs() < 1e-12);
    }

    #[test]
    fn center_crossing() {
        let spec = motivating();
        assert_eq!(center_crossing_n(&[0.5, 0.5, 0.3], &spec), None);
        let n = center_crossing_n(&[0.5, 0.5, 0.8], &spec).unwrap();
        let z = norm_quantile(0.8);
        let s = stats_unchecked(0.5, 0.5, z, &spec, n, n);
        assert!(s.d_bar.abs() < 1e-9);
    }

    #[test]
    fn fisher_approximation_is_close_for_moderate_n() {
        let spec = motivating();
        let u = [0.3, 0.6, 0.5];
        let exact = PointPath::new(&u, &spec).unwrap().stats(40.0).se;
        assert!((se_fisher_approx(&u, &spec, 40.0) / exact - 1.0).abs() < 0.02);
    }
}
