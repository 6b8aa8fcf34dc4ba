mod common;

use bioeq_core::qrng::PointSet;
use bioeq_core::tost::{
    critical_value, empirical_power, empirical_power_on, rejects, stats_from_point, summarize, t_statistics,
    welch_df, DesignSpec, SummaryStats,
};
use bioeq_core::Error;

fn motivating() -> DesignSpec {
    DesignSpec::new(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn welch_symmetric_case() {
    assert!((welch_df(100.0, 100.0, 12.0, 12.0).unwrap() - 22.0).abs() < 1e-12);
}

#[test]
fn welch_motivating_variances() {
    // (324/20 + 225/20)^2 / ((324/20)^2/19 + (225/20)^2/19), evaluated by hand.
    let v1 = 324.0 / 20.0;
    let v2 = 225.0 / 20.0;
    let hand = (v1 + v2) * (v1 + v2) / (v1 * v1 / 19.0 + v2 * v2 / 19.0);
    assert!(rel(hand, 36.80322748568454) < 1e-14);
    assert!(rel(welch_df(324.0, 225.0, 20.0, 20.0).unwrap(), 36.80322748568454) < 1e-14);
}

#[test]
fn welch_single_group_limit() {
    assert!((welch_df(50.0, 0.0, 9.0, 30.0).unwrap() - 8.0).abs() < 1e-12);
    assert!((welch_df(0.0, 50.0, 9.0, 30.0).unwrap() - 29.0).abs() < 1e-12);
}

#[test]
fn welch_degenerate() {
    assert!(matches!(
        welch_df(0.0, 0.0, 5.0, 5.0),
        Err(Error::DegenerateSample)
    ));
}

// Oracle values for a worked example point, recomputed
// with the bisection kernels in `common` and frozen.
const FIG_S1_SQ: f64 = 401.166432998430;
const FIG_S2_SQ: f64 = 88.868341309041;
const FIG_D_BAR: f64 = -1.342531595758;
const FIG_SE: f64 = 4.949923101966;

#[test]
fn worked_point_oracle() {
    let u = [0.785, 0.009, 0.694];
    let s1 = 18.0f64.powi(2) * common::inv_chisq(u[0], 19.0) / 19.0;
    let s2 = 15.0f64.powi(2) * common::inv_chisq(u[1], 19.0) / 19.0;
    let d = -4.0 + common::inv_norm(u[2]) * (324.0f64 / 20.0 + 225.0 / 20.0).sqrt();
    let se = (s1 / 20.0 + s2 / 20.0).sqrt();
    assert!(rel(s1, FIG_S1_SQ) < 1e-11);
    assert!(rel(s2, FIG_S2_SQ) < 1e-11);
    assert!(rel(d, FIG_D_BAR) < 1e-11);
    assert!(rel(se, FIG_SE) < 1e-11);
}

#[test]
fn worked_point() {
    let st = stats_from_point(&[0.785, 0.009, 0.694], &motivating(), 20.0, 20.0).unwrap();
    assert!(rel(st.s1_sq, FIG_S1_SQ) < 1e-9);
    assert!(rel(st.s2_sq, FIG_S2_SQ) < 1e-9);
    assert!(rel(st.d_bar, FIG_D_BAR) < 1e-9);
    assert!(rel(st.se, FIG_SE) < 1e-9);
    assert!(rel(st.nu, welch_df(FIG_S1_SQ, FIG_S2_SQ, 20.0, 20.0).unwrap()) < 1e-9);
    // Well inside the triangle at n = 20.
    assert!(rejects(&st, &motivating()));
}

#[test]
fn median_draw_keeps_the_mean() {
    let st = stats_from_point(&[0.3, 0.8, 0.5], &motivating(), 12.0, 17.0).unwrap();
    assert_eq!(st.d_bar, -4.0);
}

#[test]
fn matching_draws_give_matching_variances() {
    let spec = DesignSpec::new(0.0, 3.0, 3.0, -5.0, 5.0, 0.05, 1.0).unwrap();
    let med = common::chisq_cdf(9.0 - 2.0 / 3.0, 9.0);
    let st = stats_from_point(&[med, med, 0.4], &spec, 10.0, 10.0).unwrap();
    assert_eq!(st.s1_sq, st.s2_sq);
}

#[test]
fn stats_invariants() {
    let spec = motivating();
    for &(n1, n2) in &[(2.0, 2.0), (5.0, 12.0), (40.0, 3.0), (7.5, 11.25)] {
        for &u in &[[0.1, 0.9, 0.3], [0.999, 0.001, 0.5], [0.5, 0.5, 0.99]] {
            let st = stats_from_point(&u, &spec, n1, n2).unwrap();
            assert!(rel(st.se * st.se, st.s1_sq / n1 + st.s2_sq / n2) < 1e-14);
            assert!(st.nu >= f64::min(n1, n2) - 1.0 - 1e-12);
            assert!(st.nu <= n1 + n2 - 2.0 + 1e-12);
        }
    }
}

#[test]
fn apex_interior() {
    let st = summarize(0.0, 1e-12, 1e-12, 20.0, 20.0).unwrap();
    assert!(rejects(&st, &motivating()));
}

#[test]
fn outside_the_limits_never_rejects() {
    let spec = motivating();
    for d in [-19.2, -25.0, 19.2, 40.0] {
        for se in [1e-9, 1.0, 10.0] {
            let v = se * se * 10.0;
            let st = summarize(d, v, v, 20.0, 20.0).unwrap();
            assert!(!rejects(&st, &spec), "d = {d}, se = {se}");
        }
    }
}

#[test]
fn rejection_equals_both_t_tests() {
    let spec = motivating();
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / 9_007_199_254_740_992.0
    };
    for _ in 0..10_000 {
        let d = -30.0 + 60.0 * next();
        let s1 = 800.0 * next() + 1e-6;
        let s2 = 800.0 * next() + 1e-6;
        let n1 = 2.0 + (60.0 * next()).floor();
        let n2 = 2.0 + (60.0 * next()).floor();
        let st = summarize(d, s1, s2, n1, n2).unwrap();
        let (tl, tu) = t_statistics(&st, &spec);
        let t = critical_value(spec.alpha, st.nu);
        // Ties have probability zero under continuous draws.
        assert_eq!(rejects(&st, &spec), tl > t && tu > t);
    }
}

#[test]
fn table_one_single_runs() {
    let spec = motivating();
    let p20 = empirical_power(&spec, 20, 20, 65536, 7).unwrap();
    assert!((p20 - 0.8815).abs() <= 0.0005, "n = 20: {p20}");
    let p3 = empirical_power(&spec, 3, 3, 65536, 7).unwrap();
    assert!((p3 - 0.0414).abs() <= 0.0005, "n = 3: {p3}");
}

#[test]
fn hopeless_design_has_no_power() {
    let spec = DesignSpec::new(50.0, 0.1, 0.1, -19.2, 19.2, 0.05, 1.0).unwrap();
    assert!(empirical_power(&spec, 50, 50, 4096, 1).unwrap() <= 0.001);
}

#[test]
fn power_is_a_count_fraction() {
    let spec = motivating();
    for m in [1, 3, 100, 1000] {
        let p = empirical_power(&spec, 10, 14, m, 3).unwrap();
        assert!((0.0..=1.0).contains(&p));
        let count = p * m as f64;
        assert!((count - count.round()).abs() < 1e-9);
    }
}

#[test]
fn sizes_below_two_rejected() {
    assert!(matches!(
        empirical_power(&motivating(), 1, 20, 16, 0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        empirical_power(&motivating(), 20, 1, 16, 0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn invalid_specs_list_every_problem() {
    let bad = DesignSpec {
        mu_diff: 0.0,
        sigma1: -1.0,
        sigma2: 0.0,
        delta_lower: 1.0,
        delta_upper: -1.0,
        alpha: 0.6,
        q: 0.0,
    };
    assert!(bad.violations().len() >= 5);
    assert!(bad.validate().is_err());
}

#[test]
fn batched_equals_pointwise() {
    let spec = motivating();
    let stream = bioeq_core::qrng::SobolStream::new(3, 2048, 11).unwrap();
    for &(n1, n2) in &[(3u64, 3u64), (8, 12), (20, 20), (45, 30)] {
        let batched = empirical_power_on(&spec, n1, n2, &stream.points).unwrap();
        let pointwise = stream
            .points
            .iter()
            .filter(|u| {
                let st: SummaryStats =
                    stats_from_point(&[u[0], u[1], u[2]], &spec, n1 as f64, n2 as f64).unwrap();
                rejects(&st, &spec)
            })
            .count();
        assert_eq!(batched.rejections, pointwise, "({n1}, {n2})");
    }
    let single = PointSet::repeated(&[0.5, 0.5, 0.5], 10).unwrap();
    assert_eq!(empirical_power_on(&spec, 20, 20, &single).unwrap().rejections, 10);
}
