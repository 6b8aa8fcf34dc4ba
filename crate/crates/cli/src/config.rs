//! Run configuration: command-line flags merged over an optional flat
//! `key = value` file, then checked as a whole so that every problem is
//! reported at once.

use bioeq_core::crossover::CrossoverSpec;
use bioeq_core::curve::SolverSettings;
use bioeq_core::diagnostics::{scenario_by_name, scenario_presets, Scenario};
use bioeq_core::tost::DesignSpec;
use serde_json::{json, Map, Value};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub switch: bool,
}

const fn key(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        switch: false,
    }
}

const MU_DIFF: Key = key("mu-diff", "True mean difference mu1 - mu2");
const SIGMA1: Key = key("sigma1", "Standard deviation of group 1");
const SIGMA2: Key = key("sigma2", "Standard deviation of group 2");
const DELTA: Key = key(
    "delta",
    "Symmetric limits: sets delta-l = -delta and delta-u = delta",
);
const DELTA_L: Key = key("delta-l", "Lower equivalence limit");
const DELTA_U: Key = key("delta-u", "Upper equivalence limit");
const ALPHA: Key = key("alpha", "Size of each one-sided test [default: 0.05]");
const Q: Key = key("q", "Allocation ratio n2 / n1 [default: 1]");
const TARGET: Key = key("target", "Target power [default: 0.8]");
const SEED: Key = key("seed", "Seed for the randomized point set (required)");
const BOUND: Key = key("bound", "Largest sample size searched [default: 65536]");
const TOL: Key = key("tol", "Root-finding tolerance [default: 1e-6]");
const OUT: Key = key("out", "Write the JSON record here instead of stdout");
const SVG: Key = key("svg", "Write an SVG plot to this path");

pub const POWER_KEYS: &[Key] = &[
    MU_DIFF,
    SIGMA1,
    SIGMA2,
    DELTA,
    DELTA_L,
    DELTA_U,
    ALPHA,
    key("n1", "Size of group 1"),
    key("n2", "Size of group 2"),
    key("m", "Number of points or simulated samples [default: 65536]"),
    SEED,
    key(
        "engine",
        "segment (Sobol' points) or naive (simulated data) [default: segment]",
    ),
    OUT,
];

pub const CURVE_KEYS: &[Key] = &[
    MU_DIFF,
    SIGMA1,
    SIGMA2,
    DELTA,
    DELTA_L,
    DELTA_U,
    ALPHA,
    Q,
    TARGET,
    key("m", "Number of points [default: 1024]"),
    SEED,
    BOUND,
    TOL,
    OUT,
    key("csv", "Write the power curve (n,power) to this path"),
    key("svg", "Write the power curve as SVG to this path"),
];

pub const CROSSOVER_KEYS: &[Key] = &[
    key("f", "Direct drug effect F"),
    key("sigma-d1", "SD of period differences, sequence 1"),
    key("sigma-d2", "SD of period differences, sequence 2"),
    DELTA,
    DELTA_L,
    DELTA_U,
    ALPHA,
    Q,
    TARGET,
    key("m", "Number of points [default: 1024]"),
    SEED,
    BOUND,
    TOL,
    Key {
        name: "compare-chow",
        help: "Also report Chow's conservative sample size",
        switch: true,
    },
    OUT,
    SVG,
];

pub const DIAGNOSE_KEYS: &[Key] = &[
    key(
        "scenario",
        "Built-in scenario name, comma-separated list or `all` [default: all]",
    ),
    key("m", "Points per replicate [default: 1024]"),
    key("reps", "Replicates per scenario [default: 10]"),
    SEED,
    OUT,
    key("csv", "Write the table here instead of stdout"),
];

pub const BENCH_KEYS: &[Key] = &[
    MU_DIFF,
    SIGMA1,
    SIGMA2,
    DELTA,
    DELTA_L,
    DELTA_U,
    ALPHA,
    key(
        "sizes",
        "Comma-separated n1 = n2 values [default: 3,5,8,10,15,20,30,40,50,60]",
    ),
    key("reps", "Repetitions per size [default: 100]"),
    key(
        "naive-reps",
        "Repetitions of the naive simulation per size, 0 to skip [default: 0]",
    ),
    key("m", "Points per repetition [default: 65536]"),
    SEED,
    OUT,
    key("csv", "Write the table here instead of stdout"),
];

/// Keys that name output files; they are not echoed as inputs.
const OUTPUT_KEYS: [&str; 3] = ["out", "csv", "svg"];

pub fn keys_for(command: &str) -> &'static [Key] {
    match command {
        "power" => POWER_KEYS,
        "curve" => CURVE_KEYS,
        "crossover" => CROSSOVER_KEYS,
        "diagnose" => DIAGNOSE_KEYS,
        "bench" => BENCH_KEYS,
        _ => &[],
    }
}

/// Every violated constraint, one per line.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped,
/// and underscores in keys are read as hyphens.
pub fn parse_config_text(text: &str, allowed: &[Key], errors: &mut Vec<String>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("config line {}: expected `key = value`", i + 1));
            continue;
        };
        let k = k.trim().replace('_', "-");
        let v = v.trim().trim_matches('"').to_string();
        if !allowed.iter().any(|a| a.name == k) {
            errors.push(format!("config line {}: unknown key `{k}`", i + 1));
        } else {
            match out.entry(k) {
                Entry::Occupied(e) => {
                    errors.push(format!("config line {}: duplicate key `{}`", i + 1, e.key()));
                }
                Entry::Vacant(e) => {
                    e.insert(v);
                }
            }
        }
    }
    out
}

pub fn read_config_file(path: &Path, allowed: &[Key], errors: &mut Vec<String>) -> BTreeMap<String, String> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_config_text(&text, allowed, errors),
        Err(e) => {
            errors.push(format!("cannot read config file {}: {e}", path.display()));
            BTreeMap::new()
        }
    }
}

/// Raw values with typed accessors that record failures instead of
/// stopping at the first one.
pub struct Values {
    map: BTreeMap<String, String>,
    pub errors: Vec<String>,
}

impl Values {
    pub fn new(map: BTreeMap<String, String>, errors: Vec<String>) -> Self {
        Self { map, errors }
    }

    fn raw(&self, k: &str) -> Option<&str> {
        self.map.get(k).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&mut self, k: &str, what: &str) -> Option<T> {
        let raw = self.raw(k)?.to_string();
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{k} must be {what}, got `{raw}`"));
                None
            }
        }
    }

    fn num(&mut self, k: &str) -> Option<f64> {
        let x = self.parse::<f64>(k, "a number")?;
        if x.is_finite() {
            Some(x)
        } else {
            self.errors.push(format!("{k} must be finite, got {x}"));
            None
        }
    }

    fn f64_or(&mut self, k: &str, default: f64) -> f64 {
        self.num(k).unwrap_or(default)
    }

    fn req_f64(&mut self, k: &str) -> f64 {
        if self.raw(k).is_none() {
            self.errors.push(format!("missing required value `{k}`"));
        }
        self.num(k).unwrap_or(f64::NAN)
    }

    fn u64_or(&mut self, k: &str, default: u64) -> u64 {
        self.parse(k, "a nonnegative integer").unwrap_or(default)
    }

    fn req_u64(&mut self, k: &str) -> u64 {
        if self.raw(k).is_none() {
            self.errors.push(format!("missing required value `{k}`"));
        }
        self.parse(k, "a nonnegative integer").unwrap_or(0)
    }

    fn switch(&mut self, k: &str) -> bool {
        match self.raw(k) {
            None => false,
            Some("true" | "1" | "yes") => true,
            Some("false" | "0" | "no") => false,
            Some(other) => {
                let msg = format!("{k} must be true or false, got `{other}`");
                self.errors.push(msg);
                false
            }
        }
    }

    fn path(&self, k: &str) -> Option<PathBuf> {
        self.raw(k).map(PathBuf::from)
    }

    /// `delta` gives symmetric limits; `delta-l` and `delta-u` override it.
    fn limits(&mut self) -> (f64, f64) {
        let delta = self.num("delta");
        let lo = self.num("delta-l").or(delta.map(|d| -d));
        let hi = self.num("delta-u").or(delta);
        if self.raw("delta").is_none() {
            for (k, v) in [("delta-l", lo), ("delta-u", hi)] {
                if v.is_none() && self.raw(k).is_none() {
                    self.errors
                        .push(format!("missing required value `{k}` (or `delta`)"));
                }
            }
        }
        (lo.unwrap_or(f64::NAN), hi.unwrap_or(f64::NAN))
    }

    fn positive_count(&mut self, k: &str, default: u64) -> usize {
        let v = self.u64_or(k, default);
        if v == 0 {
            self.errors.push(format!("{k} must be at least 1"));
        }
        v as usize
    }

    fn finish<T>(self, value: T) -> Result<T, ConfigError> {
        if self.errors.is_empty() {
            Ok(value)
        } else {
            Err(ConfigError(self.errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Segment,
    Naive,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Segment => "segment",
            Engine::Naive => "naive",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Command {
    Power {
        spec: DesignSpec,
        n1: u64,
        n2: u64,
        m: usize,
        engine: Engine,
    },
    Curve {
        spec: DesignSpec,
        target: f64,
        m: usize,
        settings: SolverSettings,
    },
    Crossover {
        spec: CrossoverSpec,
        target: f64,
        m: usize,
        settings: SolverSettings,
        compare_chow: bool,
    },
    Diagnose {
        scenarios: Vec<Scenario>,
        m: usize,
        reps: usize,
    },
    Bench {
        spec: DesignSpec,
        sizes: Vec<u64>,
        reps: usize,
        naive_reps: usize,
        m: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub outputs: Outputs,
}

fn design(v: &mut Values, with_q: bool) -> DesignSpec {
    let (delta_lower, delta_upper) = v.limits();
    let spec = DesignSpec {
        mu_diff: v.req_f64("mu-diff"),
        sigma1: v.req_f64("sigma1"),
        sigma2: v.req_f64("sigma2"),
        delta_lower,
        delta_upper,
        alpha: v.f64_or("alpha", 0.05),
        q: if with_q { v.f64_or("q", 1.0) } else { 1.0 },
    };
    push_violations(v, &spec);
    spec
}

/// Missing or malformed values are already reported and left as NaN, so
/// violations mentioning NaN would only repeat them.
fn push_violations(v: &mut Values, spec: &DesignSpec) {
    for e in spec.violations() {
        if !e.contains("NaN") {
            v.errors.push(e.replace("mu_diff", "mu-diff"));
        }
    }
}

fn solver(v: &mut Values) -> SolverSettings {
    let s = SolverSettings {
        bound: v.f64_or("bound", 65536.0),
        tol: v.f64_or("tol", 1e-6),
    };
    if !(s.tol > 0.0 && s.tol.is_finite()) {
        v.errors.push(format!("tol must be positive, got {}", s.tol));
    }
    if !(s.bound >= 2.0 && s.bound.is_finite()) {
        v.errors
            .push(format!("bound must be a finite number >= 2, got {}", s.bound));
    }
    s
}

fn target(v: &mut Values) -> f64 {
    let t = v.f64_or("target", 0.8);
    if !(t > 0.0 && t < 1.0) {
        v.errors.push(format!("target must lie in (0, 1), got {t}"));
    }
    t
}

fn require_alternative(v: &mut Values, mu: f64, lo: f64, hi: f64, name: &str) {
    if mu.is_finite() && lo < hi && !(lo < mu && mu < hi) {
        v.errors.push(format!(
            "{name} = {mu} must lie strictly inside the limits ({lo}, {hi}) for a power curve"
        ));
    }
}

/// Builds a validated configuration for `command` from the merged values.
pub fn build(command: &str, mut v: Values) -> Result<RunConfig, ConfigError> {
    let seed = v.req_u64("seed");
    let outputs = Outputs {
        json: v.path("out"),
        csv: v.path("csv"),
        svg: v.path("svg"),
    };
    let cmd = match command {
        "power" => {
            let spec = design(&mut v, false);
            let n1 = v.req_u64("n1");
            let n2 = v.req_u64("n2");
            for (k, n) in [("n1", n1), ("n2", n2)] {
                if v.raw(k).is_some() && n < 2 {
                    v.errors.push(format!("{k} must be at least 2, got {n}"));
                }
            }
            let m = v.positive_count("m", 65536);
            let engine = match v.raw("engine").unwrap_or("segment") {
                "segment" => Engine::Segment,
                "naive" => Engine::Naive,
                other => {
                    v.errors
                        .push(format!("engine must be `segment` or `naive`, got `{other}`"));
                    Engine::Segment
                }
            };
            Command::Power {
                spec,
                n1,
                n2,
                m,
                engine,
            }
        }
        "curve" => {
            let spec = design(&mut v, true);
            require_alternative(
                &mut v,
                spec.mu_diff,
                spec.delta_lower,
                spec.delta_upper,
                "mu-diff",
            );
            Command::Curve {
                spec,
                target: target(&mut v),
                m: v.positive_count("m", 1024),
                settings: solver(&mut v),
            }
        }
        "crossover" => {
            let (delta_lower, delta_upper) = v.limits();
            let spec = CrossoverSpec {
                f: v.req_f64("f"),
                sigma_d1: v.req_f64("sigma-d1"),
                sigma_d2: v.req_f64("sigma-d2"),
                delta_lower,
                delta_upper,
                alpha: v.f64_or("alpha", 0.05),
                q: v.f64_or("q", 1.0),
            };
            for (k, s) in [("sigma-d1", spec.sigma_d1), ("sigma-d2", spec.sigma_d2)] {
                if !s.is_nan() && !(s > 0.0 && s.is_finite()) {
                    v.errors.push(format!("{k} must be positive, got {s}"));
                }
            }
            // The standard deviations were checked above under their own names.
            let probe = DesignSpec {
                mu_diff: spec.f,
                sigma1: 1.0,
                sigma2: 1.0,
                delta_lower,
                delta_upper,
                alpha: spec.alpha,
                q: spec.q,
            };
            let before = v.errors.len();
            push_violations(&mut v, &probe);
            for e in &mut v.errors[before..] {
                *e = e.replace("mu-diff", "f");
            }
            require_alternative(&mut v, spec.f, delta_lower, delta_upper, "f");
            Command::Crossover {
                spec,
                target: target(&mut v),
                m: v.positive_count("m", 1024),
                settings: solver(&mut v),
                compare_chow: v.switch("compare-chow"),
            }
        }
        "diagnose" => {
            let names = v.raw("scenario").unwrap_or("all").to_string();
            let scenarios = if names == "all" {
                scenario_presets()
            } else {
                let mut out = Vec::new();
                for name in names.split(',').map(str::trim) {
                    match scenario_by_name(name) {
                        Some(s) => out.push(s),
                        None => v.errors.push(format!("unknown scenario `{name}`")),
                    }
                }
                out
            };
            Command::Diagnose {
                scenarios,
                m: v.positive_count("m", 1024),
                reps: v.positive_count("reps", 10),
            }
        }
        "bench" => {
            let spec = design(&mut v, false);
            let raw = v.raw("sizes").unwrap_or("3,5,8,10,15,20,30,40,50,60").to_string();
            let mut sizes = Vec::new();
            for part in raw.split(',').map(str::trim) {
                match part.parse::<u64>() {
                    Ok(n) if n >= 2 => sizes.push(n),
                    _ => v
                        .errors
                        .push(format!("sizes must be integers >= 2, got `{part}`")),
                }
            }
            let reps = v.positive_count("reps", 100);
            let naive_reps = v.u64_or("naive-reps", 0) as usize;
            if naive_reps == 1 {
                v.errors.push("naive-reps must be 0 or at least 2".into());
            }
            if reps < 2 {
                v.errors.push("reps must be at least 2".into());
            }
            Command::Bench {
                spec,
                sizes,
                reps,
                naive_reps,
                m: v.positive_count("m", 65536),
            }
        }
        other => {
            v.errors.push(format!("unknown command `{other}`"));
            return Err(ConfigError(v.errors));
        }
    };
    v.finish(RunConfig {
        command: cmd,
        seed,
        outputs,
    })
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Power { .. } => "power",
            Command::Curve { .. } => "curve",
            Command::Crossover { .. } => "crossover",
            Command::Diagnose { .. } => "diagnose",
            Command::Bench { .. } => "bench",
        }
    }

    pub fn engine(&self) -> &'static str {
        match self.command {
            Command::Power { engine, .. } => engine.name(),
            _ => "segment",
        }
    }

    /// Resolved inputs under their config keys. Writing them back as a
    /// config file reproduces the run.
    pub fn inputs(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            debug_assert!(!OUTPUT_KEYS.contains(&k));
            m.insert(k.to_string(), v);
        };
        let design = |put: &mut dyn FnMut(&str, Value), s: &DesignSpec| {
            put("mu-diff", json!(s.mu_diff));
            put("sigma1", json!(s.sigma1));
            put("sigma2", json!(s.sigma2));
            put("delta-l", json!(s.delta_lower));
            put("delta-u", json!(s.delta_upper));
            put("alpha", json!(s.alpha));
        };
        match &self.command {
            Command::Power {
                spec,
                n1,
                n2,
                m: points,
                engine,
            } => {
                design(&mut put, spec);
                put("n1", json!(n1));
                put("n2", json!(n2));
                put("m", json!(points));
                put("engine", json!(engine.name()));
            }
            Command::Curve {
                spec,
                target,
                m: points,
                settings,
            } => {
                design(&mut put, spec);
                put("q", json!(spec.q));
                put("target", json!(target));
                put("m", json!(points));
                put("bound", json!(settings.bound));
                put("tol", json!(settings.tol));
            }
            Command::Crossover {
                spec,
                target,
                m: points,
                settings,
                compare_chow,
            } => {
                put("f", json!(spec.f));
                put("sigma-d1", json!(spec.sigma_d1));
                put("sigma-d2", json!(spec.sigma_d2));
                put("delta-l", json!(spec.delta_lower));
                put("delta-u", json!(spec.delta_upper));
                put("alpha", json!(spec.alpha));
                put("q", json!(spec.q));
                put("target", json!(target));
                put("m", json!(points));
                put("bound", json!(settings.bound));
                put("tol", json!(settings.tol));
                put("compare-chow", json!(compare_chow));
            }
            Command::Diagnose {
                scenarios,
                m: points,
                reps,
            } => {
                let names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
                put("scenario", json!(names.join(",")));
                put("m", json!(points));
                put("reps", json!(reps));
            }
            Command::Bench {
                spec,
                sizes,
                reps,
                naive_reps,
                m: points,
            } => {
                design(&mut put, spec);
                let sizes: Vec<String> = sizes.iter().map(u64::to_string).collect();
                put("sizes", json!(sizes.join(",")));
                put("reps", json!(reps));
                put("naive-reps", json!(naive_reps));
                put("m", json!(points));
            }
        }
        put("seed", json!(self.seed));
        Value::Object(m)
    }
}
