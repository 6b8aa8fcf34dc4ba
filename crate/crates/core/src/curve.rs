//! Power curves from per-point crossing sample sizes.
//!
//! For a fixed unit-cube point, the allocation `n1 = n`, `n2 = q n` is treated
//! as continuous and the point rejects at `n` iff
//! `g(n) = t_{1-alpha}(nu(n)) * se(n) - min(d_bar(n) - delta_L, delta_U - d_bar(n))`
//! is negative. `g` has the sign of `se(n) - Lambda(n)` but stays continuous
//! where `d_bar(n)` leaves the limits, which suits Brent's method.
//!
//! [`power_curve`] finds the smallest crossing of every point, takes the
//! requested quantile of the crossings, re-solves points whose crossing
//! disagrees with the sign of `g` at that quantile, and recommends
//! `(ceil(n*), ceil(q n*))`.

use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::qrng::{PointSet, SobolStream};
use crate::roots::{brent, Bracket};
use crate::special::{norm_quantile, t_quantile_unchecked};
use crate::tost::{critical_value, margin, stats_unchecked, DesignSpec, SummaryStats};
use serde::{Deserialize, Serialize};

const MAX_BRENT_ITER: usize = 200;
const MAX_SAFEGUARD_ROUNDS: usize = 3;

/// Root-finding settings: the censoring bound `B` and the tolerance in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub bound: f64,
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            bound: 65536.0,
            tol: 1e-6,
        }
    }
}

impl SolverSettings {
    fn validate(&self, n_min: f64) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(self.bound >= n_min && self.bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bound B = {} must be finite and at least the smallest sample size {n_min}",
                self.bound
            )));
        }
        Ok(())
    }
}

/// Smallest `n` with both `n >= 2` and `q n >= 2`.
pub fn min_sample_size(q: f64) -> f64 {
    2f64.max(2.0 / q)
}

fn check_n(spec: &DesignSpec, n: f64) -> Result<()> {
    if !(n >= 2.0 && spec.q * n >= 2.0 && n.is_finite()) {
        return Err(Error::Domain(format!(
            "need n >= 2 and q n >= 2, got n = {n}, q = {}",
            spec.q
        )));
    }
    Ok(())
}

fn check_point(u: &[f64; 3]) -> Result<()> {
    if u.iter().all(|&x| x > 0.0 && x < 1.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "unit-cube point must be strictly interior, got {u:?}"
        )))
    }
}

/// The sample path of one unit-cube point as a function of continuous `n`.
#[derive(Debug, Clone, Copy)]
pub struct PointPath<'a> {
    u1: f64,
    u2: f64,
    z3: f64,
    spec: &'a DesignSpec,
}

impl<'a> PointPath<'a> {
    pub fn new(u: &[f64; 3], spec: &'a DesignSpec) -> Result<Self> {
        check_point(u)?;
        Ok(Self::new_unchecked(u, spec))
    }

    fn new_unchecked(u: &[f64], spec: &'a DesignSpec) -> Self {
        Self {
            u1: u[0],
            u2: u[1],
            z3: norm_quantile(u[2]),
            spec,
        }
    }

    /// Summary statistics at `(n, q n)`; `n` is not range-checked.
    pub fn stats(&self, n: f64) -> SummaryStats {
        stats_unchecked(self.u1, self.u2, self.z3, self.spec, n, self.spec.q * n)
    }

    /// The signed rejection gap; nonpositive iff the point rejects at `n`
    /// (up to the measure-zero boundary).
    pub fn gap(&self, n: f64) -> f64 {
        let s = self.stats(n);
        critical_value(self.spec.alpha, s.nu) * s.se - margin(s.d_bar, self.spec)
    }
}

/// Standard error of the point's sample at `(n, q n)`.
pub fn se_of_n(u: &[f64; 3], spec: &DesignSpec, n: f64) -> Result<f64> {
    check_n(spec, n)?;
    Ok(PointPath::new(u, spec)?.stats(n).se)
}

/// The rejection threshold for the standard error at `(n, q n)`; zero when
/// the mean difference falls outside the limits.
pub fn lambda_of_n(u: &[f64; 3], spec: &DesignSpec, n: f64) -> Result<f64> {
    spec.require_alternative()?;
    check_n(spec, n)?;
    let s = PointPath::new(u, spec)?.stats(n);
    let m = margin(s.d_bar, spec);
    Ok(if m > 0.0 {
        m / t_quantile_unchecked(1.0 - spec.alpha, s.nu)
    } else {
        0.0
    })
}

/// `se(n) - Lambda(n)`.
pub fn se_minus_lambda(u: &[f64; 3], spec: &DesignSpec, n: f64) -> Result<f64> {
    Ok(se_of_n(u, spec, n)? - lambda_of_n(u, spec, n)?)
}

/// Where a point first enters the rejection region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    At(f64),
    /// No entry found on the bracket grid up to the bound.
    Censored,
}

impl Crossing {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Crossing::At(n) => Some(n),
            Crossing::Censored => None,
        }
    }

    /// Sort key with censored points above every finite crossing.
    pub fn key(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub point_index: usize,
    pub crossing: Crossing,
    /// Whether the safeguard re-solved this point.
    pub reinitialized: bool,
    /// Number of evaluations of `g`, including any re-solves.
    pub evaluations: usize,
}

/// The bracket grid `{n_min} ∪ {3, 4, 6, 8, 12, 16, ...} ∪ {B}`, ascending.
pub fn bracket_grid(n_min: f64, bound: f64) -> Vec<f64> {
    let mut grid = vec![n_min];
    let mut k = 0u32;
    loop {
        let base = 2f64.powi(k as i32 + 1);
        for n in [1.5 * base, 2.0 * base] {
            if n >= bound {
                if bound > *grid.last().unwrap() {
                    grid.push(bound);
                }
                return grid;
            }
            if n > n_min {
                grid.push(n);
            }
        }
        k += 1;
    }
}

struct Counted<'a, 'b> {
    path: &'b PointPath<'a>,
    evaluations: usize,
}

impl Counted<'_, '_> {
    fn g(&mut self, n: f64) -> f64 {
        self.evaluations += 1;
        self.path.gap(n)
    }

    /// Brent on the bracket, then one extra split so that no integer lies
    /// strictly inside the final bracket. This keeps `crossing <= k` and
    /// `g(k) <= 0` in agreement for integer `k`.
    fn solve(&mut self, b: Bracket, tol: f64) -> f64 {
        let mut b = brent(|n| self.g(n), b, tol, MAX_BRENT_ITER);
        let (lo, hi) = if b.outside < b.inside {
            (b.outside, b.inside)
        } else {
            (b.inside, b.outside)
        };
        let k = lo.floor() + 1.0;
        if k < hi {
            let gk = self.g(k);
            if gk <= 0.0 {
                b.inside = k;
            } else {
                b.outside = k;
            }
        }
        b.inside
    }
}

fn ascending_crossing(c: &mut Counted, grid: &[f64], start: f64, g_start: f64, tol: f64) -> Crossing {
    let (mut prev, mut g_prev) = (start, g_start);
    for &n in grid.iter().filter(|&&n| n > start) {
        let gn = c.g(n);
        if gn <= 0.0 {
            let b = Bracket {
                outside: prev,
                g_outside: g_prev,
                inside: n,
                g_inside: gn,
            };
            return Crossing::At(c.solve(b, tol));
        }
        prev = n;
        g_prev = gn;
    }
    Crossing::Censored
}

/// Smallest crossing of one point, as a `CurvePoint` with index 0.
pub fn smallest_crossing(u: &[f64; 3], spec: &DesignSpec, settings: &SolverSettings) -> Result<CurvePoint> {
    spec.require_alternative()?;
    let n_min = min_sample_size(spec.q);
    settings.validate(n_min)?;
    let path = PointPath::new(u, spec)?;
    let grid = bracket_grid(n_min, settings.bound);
    Ok(solve_point(&path, &grid, settings.tol, 0))
}

fn solve_point(path: &PointPath, grid: &[f64], tol: f64, index: usize) -> CurvePoint {
    let mut c = Counted { path, evaluations: 0 };
    let g0 = c.g(grid[0]);
    let crossing = if g0 <= 0.0 {
        Crossing::At(grid[0])
    } else {
        ascending_crossing(&mut c, grid, grid[0], g0, tol)
    };
    CurvePoint {
        point_index: index,
        crossing,
        reinitialized: false,
        evaluations: c.evaluations,
    }
}

/// Re-solves a point whose crossing disagrees with `g(at)`. With `g(at) > 0`
/// the result is the smallest crossing above `at`; otherwise it is the largest
/// sign change at or below `at`, found by walking the bracket grid downward.
fn resolve_from(
    path: &PointPath,
    grid: &[f64],
    tol: f64,
    at: f64,
    g_at: f64,
    evaluations: &mut usize,
) -> Crossing {
    let mut c = Counted { path, evaluations: 0 };
    let out = if g_at > 0.0 {
        ascending_crossing(&mut c, grid, at, g_at, tol)
    } else {
        let (mut prev, mut g_prev) = (at, g_at);
        let mut found = Crossing::At(grid[0]);
        for &n in grid.iter().rev().filter(|&&n| n < at) {
            let gn = c.g(n);
            if gn > 0.0 {
                let b = Bracket {
                    outside: n,
                    g_outside: gn,
                    inside: prev,
                    g_inside: g_prev,
                };
                found = Crossing::At(c.solve(b, tol));
                break;
            }
            prev = n;
            g_prev = gn;
        }
        found
    };
    *evaluations += c.evaluations;
    out
}

/// Index (0-based) of the type-1 quantile among `m` sorted values: the
/// smallest `k` with `(k + 1) / m >= p`.
pub fn type1_rank(p: f64, m: usize) -> usize {
    let mut k = (p * m as f64).ceil() as usize;
    while k > 1 && (k - 1) as f64 / m as f64 >= p {
        k -= 1;
    }
    while (k as f64) / (m as f64) < p {
        k += 1;
    }
    k.clamp(1, m) - 1
}

/// Type-1 quantile of the crossings, censored points counted as `+inf`.
pub fn crossing_quantile(points: &[CurvePoint], p: f64, bound: f64) -> Result<f64> {
    let mut keys: Vec<f64> = points.iter().map(|c| c.crossing.key()).collect();
    keys.sort_by(f64::total_cmp);
    let v = keys[type1_rank(p, keys.len())];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BoundTooSmall {
            bound,
            censored: keys.iter().filter(|k| k.is_infinite()).count(),
            total: keys.len(),
            target: p,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub solutions: Vec<CurvePoint>,
    pub q: f64,
    pub target_power: f64,
    pub settings: SolverSettings,
    /// Quantile of the crossings before the safeguard.
    pub n_star_initial: f64,
    /// Quantile after the last safeguard round.
    pub n_star_final: f64,
    pub rec_n1: u64,
    pub rec_n2: u64,
    /// Number of point re-solves across all rounds.
    pub reinitializations: usize,
    pub safeguard_rounds: usize,
    /// False when the quantile still moved after the last allowed round.
    pub safeguard_converged: bool,
}

impl PowerCurve {
    pub fn m(&self) -> usize {
        self.solutions.len()
    }

    pub fn censored(&self) -> usize {
        self.solutions
            .iter()
            .filter(|c| c.crossing == Crossing::Censored)
            .count()
    }

    /// ECDF of the crossings at `n`.
    pub fn power_at(&self, n: f64) -> f64 {
        let hits = self.solutions.iter().filter(|c| c.crossing.key() <= n).count();
        hits as f64 / self.m() as f64
    }

    /// `(n, ECDF(n))` at every distinct finite crossing, ascending.
    pub fn ecdf_steps(&self) -> Vec<(f64, f64)> {
        let mut finite: Vec<f64> = self.solutions.iter().filter_map(|c| c.crossing.value()).collect();
        finite.sort_by(f64::total_cmp);
        let m = self.m() as f64;
        let mut steps: Vec<(f64, f64)> = Vec::new();
        for (i, &n) in finite.iter().enumerate() {
            let p = (i + 1) as f64 / m;
            match steps.last_mut() {
                Some(last) if last.0 == n => last.1 = p,
                _ => steps.push((n, p)),
            }
        }
        steps
    }

    pub fn total_evaluations(&self) -> usize {
        self.solutions.iter().map(|c| c.evaluations).sum()
    }
}

fn check_target(target_power: f64) -> Result<()> {
    if target_power > 0.0 && target_power < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "target power must lie in (0, 1), got {target_power}"
        )))
    }
}

/// Power curve from `m` randomized Sobol' points.
pub fn power_curve(
    spec: &DesignSpec,
    target_power: f64,
    m: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PowerCurve> {
    spec.require_alternative()?;
    check_target(target_power)?;
    let stream = SobolStream::new(3, m, seed)?;
    power_curve_from_points(spec, target_power, &stream.points, settings)
}

/// Power curve over an arbitrary point set (first three coordinates used).
pub fn power_curve_from_points(
    spec: &DesignSpec,
    target_power: f64,
    points: &PointSet,
    settings: &SolverSettings,
) -> Result<PowerCurve> {
    spec.require_alternative()?;
    check_target(target_power)?;
    let n_min = min_sample_size(spec.q);
    settings.validate(n_min)?;
    if points.dimension() < 3 || points.is_empty() {
        return Err(Error::InvalidArgument(
            "need a nonempty set of points with at least 3 coordinates".into(),
        ));
    }
    if !points.iter().all(|p| p[..3].iter().all(|&x| x > 0.0 && x < 1.0)) {
        return Err(Error::Domain("unit-cube points must be strictly interior".into()));
    }
    let grid = bracket_grid(n_min, settings.bound);
    let tol = settings.tol;
    let path = |i: usize| PointPath::new_unchecked(points.point(i), spec);

    let mut solutions = map_indices(points.len(), |i| solve_point(&path(i), &grid, tol, i));
    let n_star_initial = crossing_quantile(&solutions, target_power, settings.bound)?;

    let mut n_star = n_star_initial;
    let mut reinitializations = 0;
    let mut rounds = 0;
    let mut converged = false;
    while rounds < MAX_SAFEGUARD_ROUNDS {
        rounds += 1;
        let repairs: Vec<Option<(Crossing, usize)>> = map_indices(solutions.len(), |i| {
            let p = path(i);
            let g_at = p.gap(n_star);
            let below = solutions[i].crossing.key() <= n_star;
            if below == (g_at <= 0.0) {
                return None;
            }
            let mut evals = 1;
            let crossing = resolve_from(&p, &grid, tol, n_star, g_at, &mut evals);
            Some((crossing, evals))
        });
        for (sol, repair) in solutions.iter_mut().zip(&repairs) {
            // The evaluation of g at the quantile is part of every round.
            sol.evaluations += 1;
            if let Some((crossing, evals)) = *repair {
                sol.crossing = crossing;
                sol.reinitialized = true;
                sol.evaluations += evals - 1;
                reinitializations += 1;
            }
        }
        let next = crossing_quantile(&solutions, target_power, settings.bound)?;
        if next == n_star {
            converged = true;
            break;
        }
        n_star = next;
    }

    Ok(PowerCurve {
        solutions,
        q: spec.q,
        target_power,
        settings: *settings,
        n_star_initial,
        n_star_final: n_star,
        rec_n1: n_star.ceil() as u64,
        rec_n2: (spec.q * n_star).ceil() as u64,
        reinitializations,
        safeguard_rounds: rounds,
        safeguard_converged: converged,
    })
}
