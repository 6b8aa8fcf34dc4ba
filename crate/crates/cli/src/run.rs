//! Dispatch to the engines and write the results.

use crate::config::{Command, Engine, RunConfig};
use anyhow::{Context, Result};
use bioeq_core::crossover::{chow_sample_size, crossover_curve, to_two_group};
use bioeq_core::curve::{power_curve, PowerCurve};
use bioeq_core::diagnostics::{run_scenario, ScenarioRow};
use bioeq_core::oracle::{mean_var, naive_run};
use bioeq_core::plot::ecdf_svg;
use bioeq_core::qrng::SobolStream;
use bioeq_core::tost::empirical_power_on;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn record(cfg: &RunConfig, results: Value, started: Instant) -> String {
    let v = json!({
        "command": cfg.name(),
        "engine": cfg.engine(),
        "seed": cfg.seed,
        "inputs": cfg.inputs(),
        "results": results,
        "meta": {
            "version": env!("CARGO_PKG_VERSION"),
            "elapsed_seconds": started.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        },
    });
    let mut text = serde_json::to_string_pretty(&v).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// `n,power` rows at every distinct finite crossing.
pub fn curve_csv(curve: &PowerCurve) -> String {
    let mut out = String::from("n,power\n");
    for (n, p) in curve.ecdf_steps() {
        let _ = writeln!(out, "{n},{p}");
    }
    out
}

fn curve_results(curve: &PowerCurve) -> Value {
    let m = curve.m();
    json!({
        "target_power": curve.target_power,
        "n_star_initial": curve.n_star_initial,
        "n_star": curve.n_star_final,
        "rec_n1": curve.rec_n1,
        "rec_n2": curve.rec_n2,
        "power_at_rec": curve.power_at(curve.rec_n1 as f64),
        "points": m,
        "censored": curve.censored(),
        "reinitializations": curve.reinitializations,
        "safeguard_rounds": curve.safeguard_rounds,
        "safeguard_converged": curve.safeguard_converged,
        "evaluations_per_point": curve.total_evaluations() as f64 / m as f64,
    })
}

pub fn scenario_csv(rows: &[ScenarioRow]) -> String {
    let mut out = String::from(
        "scenario,group,mu_diff,sigma1,sigma2,q,n_max,reps,m,prevalence_pct,mean_departure,mean_duration,mean_argmax,pct_argmax_gt5,pct_argmax_gt10\n",
    );
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.4}"));
    for r in rows {
        let s = &r.scenario;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{},{},{},{:.4},{},{},{:.4},{:.4},{:.4}",
            s.name,
            s.group,
            s.mu_diff,
            s.sigma1,
            s.sigma2,
            s.q,
            s.n_max,
            r.reps,
            r.m,
            100.0 * r.prevalence,
            opt(r.mean_departure),
            opt(r.mean_duration),
            r.mean_argmax,
            100.0 * r.frac_argmax_gt5,
            100.0 * r.frac_argmax_gt10,
        );
    }
    out
}

struct BenchRow {
    n: u64,
    segment: (f64, f64),
    naive: Option<(f64, f64)>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, v.sqrt())
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let seed = cfg.seed;
    let out = &cfg.outputs;
    match &cfg.command {
        Command::Power {
            spec,
            n1,
            n2,
            m,
            engine,
        } => {
            let (rejections, points) = match engine {
                Engine::Segment => {
                    let stream = SobolStream::new(3, *m, seed)?;
                    let est = empirical_power_on(spec, *n1, *n2, &stream.points)?;
                    (est.rejections, est.m)
                }
                Engine::Naive => {
                    let run = naive_run(spec, *n1, *n2, *m, seed)?;
                    (run.rejections, run.m)
                }
            };
            let results = json!({
                "power": rejections as f64 / points as f64,
                "rejections": rejections,
                "m": points,
            });
            write_or_print(out.json.as_deref(), &record(cfg, results, started))
        }
        Command::Curve {
            spec,
            target,
            m,
            settings,
        } => {
            let curve = power_curve(spec, *target, *m, seed, settings)?;
            if let Some(p) = &out.csv {
                write_file(p, &curve_csv(&curve))?;
            }
            if let Some(p) = &out.svg {
                let title = format!("power curve, target {target}");
                write_file(p, &ecdf_svg(&curve.ecdf_steps(), Some(*target), &title))?;
            }
            write_or_print(out.json.as_deref(), &record(cfg, curve_results(&curve), started))
        }
        Command::Crossover {
            spec,
            target,
            m,
            settings,
            compare_chow,
        } => {
            let curve = crossover_curve(spec, *target, *m, seed, settings)?;
            let mut results = curve_results(&curve);
            results["two_group_design"] = serde_json::to_value(to_two_group(spec)?)?;
            if *compare_chow {
                // Chow assumes one sigma_D and symmetric limits; use the pooled
                // SD and the limit nearest to F.
                let sigma_d = (0.5 * (spec.sigma_d1.powi(2) + spec.sigma_d2.powi(2))).sqrt();
                let room = (spec.delta_upper - spec.f).min(spec.f - spec.delta_lower);
                let chow = chow_sample_size(spec.f, sigma_d, room + spec.f.abs(), spec.alpha, 1.0 - target)?;
                results["chow_n"] = json!(chow);
            }
            if let Some(p) = &out.svg {
                let title = format!("crossover power curve, target {target}");
                write_file(p, &ecdf_svg(&curve.ecdf_steps(), Some(*target), &title))?;
            }
            write_or_print(out.json.as_deref(), &record(cfg, results, started))
        }
        Command::Diagnose { scenarios, m, reps } => {
            let rows = scenarios
                .iter()
                .map(|s| run_scenario(s, *m, *reps, seed))
                .collect::<bioeq_core::Result<Vec<_>>>()?;
            write_or_print(out.csv.as_deref(), &scenario_csv(&rows))?;
            if let Some(p) = &out.json {
                write_file(p, &record(cfg, serde_json::to_value(&rows)?, started))?;
            }
            Ok(())
        }
        Command::Bench {
            spec,
            sizes,
            reps,
            naive_reps,
            m,
        } => {
            let mut runs = vec![Vec::with_capacity(*reps); sizes.len()];
            // One point set per repetition, shared by every size.
            for r in 0..*reps as u64 {
                let points = SobolStream::new(3, *m, seed.wrapping_add(r))?.points;
                for (k, &n) in sizes.iter().enumerate() {
                    runs[k].push(empirical_power_on(spec, n, n, &points)?.power());
                }
            }
            let mut rows = Vec::with_capacity(sizes.len());
            for (k, &n) in sizes.iter().enumerate() {
                let naive = if *naive_reps > 0 {
                    let xs = (0..*naive_reps as u64)
                        .map(|r| Ok(naive_run(spec, n, n, *m, seed.wrapping_add(r))?.power))
                        .collect::<Result<Vec<_>>>()?;
                    Some(mean_sd(&xs))
                } else {
                    None
                };
                rows.push(BenchRow {
                    n,
                    segment: mean_sd(&runs[k]),
                    naive,
                });
            }
            let mut csv = String::from("n,segment_mean,segment_sd,naive_mean,naive_sd\n");
            for r in &rows {
                let naive = r
                    .naive
                    .map_or(",".to_string(), |(a, b)| format!("{a:.6},{b:.3e}"));
                let _ = writeln!(csv, "{},{:.6},{:.3e},{naive}", r.n, r.segment.0, r.segment.1);
            }
            write_or_print(out.csv.as_deref(), &csv)?;
            if let Some(p) = &out.json {
                let results: Vec<Value> = rows
                    .iter()
                    .map(|r| {
                        json!({
                            "n": r.n,
                            "segment_mean": r.segment.0,
                            "segment_sd": r.segment.1,
                            "naive_mean": r.naive.map(|x| x.0),
                            "naive_sd": r.naive.map(|x| x.1),
                        })
                    })
                    .collect();
                write_file(p, &record(cfg, Value::Array(results), started))?;
            }
            Ok(())
        }
    }
}
