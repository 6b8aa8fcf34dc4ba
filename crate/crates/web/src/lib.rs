//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns either a number or a JSON
//! string, so the page needs no generated TypeScript types.

use bioeq_core::crossover::{chow_sample_size, crossover_curve, CrossoverSpec};
use bioeq_core::curve::{power_curve, SolverSettings};
use bioeq_core::plot::{ecdf_svg, rejection_svg};
use bioeq_core::qrng::SobolStream;
use bioeq_core::tost::{critical_value, empirical_power_on, rejects, stats_from_point, DesignSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest point set the page may request; keeps the tab responsive.
pub const MAX_POINTS: usize = 1 << 16;
const MAX_SCATTER: usize = 2048;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn point_count(m: u32, cap: usize) -> Result<usize, JsValue> {
    let m = m as usize;
    if m == 0 || m > cap {
        return Err(js_err(format!("m must lie in 1..={cap}, got {m}")));
    }
    Ok(m)
}

fn spec(
    mu_diff: f64,
    sigma1: f64,
    sigma2: f64,
    delta_lower: f64,
    delta_upper: f64,
    alpha: f64,
    q: f64,
) -> Result<DesignSpec, JsValue> {
    DesignSpec::new(mu_diff, sigma1, sigma2, delta_lower, delta_upper, alpha, q).map_err(js_err)
}

/// Power at `(n1, n2)` from `m` randomized Sobol' points.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn power(
    mu_diff: f64,
    sigma1: f64,
    sigma2: f64,
    delta_lower: f64,
    delta_upper: f64,
    alpha: f64,
    n1: u32,
    n2: u32,
    m: u32,
    seed: u32,
) -> Result<f64, JsValue> {
    let s = spec(mu_diff, sigma1, sigma2, delta_lower, delta_upper, alpha, 1.0)?;
    let points = SobolStream::new(3, point_count(m, MAX_POINTS)?, seed as u64)
        .map_err(js_err)?
        .points;
    Ok(empirical_power_on(&s, n1 as u64, n2 as u64, &points)
        .map_err(js_err)?
        .power())
}

/// Recommendation and ECDF plot for a target power, as JSON with keys
/// `rec_n1`, `rec_n2`, `n_star`, `power_at_rec`, `reinitializations`, `svg`.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn curve(
    mu_diff: f64,
    sigma1: f64,
    sigma2: f64,
    delta_lower: f64,
    delta_upper: f64,
    alpha: f64,
    q: f64,
    target: f64,
    m: u32,
    seed: u32,
) -> Result<String, JsValue> {
    let s = spec(mu_diff, sigma1, sigma2, delta_lower, delta_upper, alpha, q)?;
    let c = power_curve(
        &s,
        target,
        point_count(m, MAX_POINTS)?,
        seed as u64,
        &SolverSettings::default(),
    )
    .map_err(js_err)?;
    let svg = ecdf_svg(
        &c.ecdf_steps(),
        Some(target),
        &format!("power curve, target {target}"),
    );
    Ok(json!({
        "rec_n1": c.rec_n1,
        "rec_n2": c.rec_n2,
        "n_star": c.n_star_final,
        "power_at_rec": c.power_at(c.rec_n1 as f64),
        "censored": c.censored(),
        "reinitializations": c.reinitializations,
        "svg": svg,
    })
    .to_string())
}

/// Scatter of simulated `(mean difference, standard error)` pairs at
/// `n1 = n2 = n` over the rejection triangle, as JSON with `power` and `svg`.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn rejection_scatter(
    mu_diff: f64,
    sigma1: f64,
    sigma2: f64,
    delta_lower: f64,
    delta_upper: f64,
    alpha: f64,
    n: u32,
    m: u32,
    seed: u32,
) -> Result<String, JsValue> {
    let s = spec(mu_diff, sigma1, sigma2, delta_lower, delta_upper, alpha, 1.0)?;
    if n < 2 {
        return Err(js_err("n must be at least 2"));
    }
    let m = point_count(m, MAX_SCATTER)?;
    let stream = SobolStream::new(3, m, seed as u64).map_err(js_err)?;
    let nf = n as f64;
    let mut hits = 0usize;
    let mut pts = Vec::with_capacity(m);
    for i in 0..m {
        let st = stats_from_point(&stream.points.cube_point(i), &s, nf, nf).map_err(js_err)?;
        let inside = rejects(&st, &s);
        hits += usize::from(inside);
        pts.push((st.d_bar, st.se, inside));
    }
    // The region's apex varies with the Welch df; draw it at the pooled df.
    let apex = 0.5 * (delta_upper - delta_lower) / critical_value(alpha, 2.0 * nf - 2.0);
    Ok(json!({
        "power": hits as f64 / m as f64,
        "svg": rejection_svg(&pts, delta_lower, delta_upper, apex),
    })
    .to_string())
}

/// Crossover recommendation next to Chow's formula, as JSON with `n`,
/// `chow_n` and `svg`.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn crossover_vs_chow(
    f: f64,
    sigma_d: f64,
    delta_lower: f64,
    delta_upper: f64,
    alpha: f64,
    target: f64,
    m: u32,
    seed: u32,
) -> Result<String, JsValue> {
    let cs = CrossoverSpec {
        f,
        sigma_d1: sigma_d,
        sigma_d2: sigma_d,
        delta_lower,
        delta_upper,
        alpha,
        q: 1.0,
    };
    let c = crossover_curve(
        &cs,
        target,
        point_count(m, MAX_POINTS)?,
        seed as u64,
        &SolverSettings::default(),
    )
    .map_err(js_err)?;
    let room = (delta_upper - f).min(f - delta_lower);
    let chow = chow_sample_size(f, sigma_d, room + f.abs(), alpha, 1.0 - target).map_err(js_err)?;
    Ok(json!({
        "n": c.rec_n1,
        "chow_n": chow,
        "svg": ecdf_svg(&c.ecdf_steps(), Some(target), "crossover power curve"),
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motivating_example_power() {
        let p = power(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 20, 20, 65536, 7).unwrap();
        assert!((p - 0.8815).abs() < 0.001, "{p}");
    }

    #[test]
    fn curve_json() {
        let text = curve(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 1.0, 0.8, 1024, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let n = v["rec_n1"].as_u64().unwrap();
        assert!((15..=18).contains(&n), "{n}");
        assert!(v["svg"].as_str().unwrap().starts_with("<svg"));
    }

    #[test]
    fn scatter_power_matches_the_batch_engine() {
        let text = rejection_scatter(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 10, 1024, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let p = power(-4.0, 18.0, 15.0, -19.2, 19.2, 0.05, 10, 10, 1024, 3).unwrap();
        assert_eq!(v["power"].as_f64().unwrap(), p);
    }

    #[test]
    fn crossover_example() {
        let text = crossover_vs_chow(0.05, 0.4, -0.223, 0.223, 0.05, 0.8, 1024, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!((v["n"].as_u64(), v["chow_n"].as_u64()), (Some(18), Some(24)));
    }
}
