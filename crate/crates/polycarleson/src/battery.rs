//! The pinned acceptance battery: run specs, budgets, seeds and targets.

use polycarleson_core::carleson::{beta_uniformity_probe, BetaProbe};
use polycarleson_core::criteria::{Decision, TridiscReport};
use polycarleson_core::exec::Executor;
use polycarleson_core::inequality_lab::{upper_bound_battery, PropertyReport};
use polycarleson_core::symbols::{catalog, wrap_angle, Polynomial, TorusPoint};
use polycarleson_core::Complex64;
use serde::Serialize;

use crate::config::{ExperimentConfig, Tolerances};
use crate::error::{AppError, AppResult};
use crate::output;
use crate::runs::{
    run_cap_scaling, run_carleson, run_decide, run_exponent, run_identity_boxes, run_properties, CarlesonRun,
    DecideResult, ExponentRun,
};
use crate::symbols::SymbolSpec;

pub const BATTERY_SEED: u64 = 0x00c0_ffee_2024;

pub const TITLES: [&str; 11] = [
    "product-symbol exponent",
    "power-sum exponent",
    "sandwich bounds",
    "disc-cap scaling",
    "sharpness thresholds",
    "bidisc criterion",
    "tridisc criterion",
    "sufficient-not-necessary separation",
    "beta-uniformity probe",
    "property battery",
    "determinism",
];

pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

fn named(s: &str) -> SymbolSpec {
    SymbolSpec::Named(s.into())
}

fn exponent(symbol: &str, beta: f64, budget: u64, seed: u64) -> ExponentRun {
    ExponentRun {
        symbol: named(symbol),
        component: 0,
        eta_angle: 0.0,
        beta,
        deltas: dyadic(4, 9),
        budget,
        seed,
    }
}

fn carleson(symbol: &str, betas: Vec<f64>, deltas: Vec<f64>, budget: u64, seed: u64) -> CarlesonRun {
    CarlesonRun {
        symbol: named(symbol),
        contact_point: None,
        center: None,
        shrink: None,
        betas,
        deltas,
        budget,
        seed,
    }
}

/// `(n, β, run)` for the product symbols `z1⋯zn`.
pub fn product_runs() -> Vec<(usize, f64, ExponentRun)> {
    [(1, 0.0), (2, 0.0), (3, 0.0), (2, 1.0), (2, -0.5)]
        .into_iter()
        .enumerate()
        .map(|(k, (n, b))| (n, b, exponent(&format!("product{n}"), b, 10_000_000, BATTERY_SEED + 100 + k as u64)))
        .collect()
}

pub fn power_sum_runs() -> Vec<(usize, f64, ExponentRun)> {
    [(2, 0.0), (3, 0.0)]
        .into_iter()
        .enumerate()
        .map(|(k, (n, b))| (n, b, exponent(&format!("powersum{n}"), b, 10_000_000, BATTERY_SEED + 200 + k as u64)))
        .collect()
}

/// Scalar symbols with positive Julia–Carathéodory derivatives at `1⃗`,
/// where each takes the value `1`.
pub fn sandwich_cases() -> Vec<(&'static str, Polynomial)> {
    vec![
        ("product2", catalog::product(2)),
        ("product3", catalog::product(3)),
        ("powersum2", catalog::power_sum(2)),
        ("powersum3", catalog::power_sum(3)),
        ("mean2", catalog::mean(2)),
        ("mean3", catalog::mean(3)),
    ]
}

pub const SANDWICH_BUDGET: u64 = 2_000_000;
pub const SANDWICH_SLACK: f64 = 0.2;
pub const CAP_BETAS: [f64; 3] = [-0.5, 0.0, 1.0];

pub fn cap_deltas() -> Vec<f64> {
    dyadic(6, 14)
}

pub fn sharpness_runs() -> Vec<(usize, CarlesonRun)> {
    vec![
        (3, carleson("repeated-product3", vec![0.0], dyadic(4, 9), 2_000_000, BATTERY_SEED + 500)),
        (4, carleson("repeated-product4", vec![0.0], dyadic(4, 9), 4_000_000, BATTERY_SEED + 501)),
    ]
}

/// `(symbol, expected decision)` for the bidisc criterion.
pub const BIDISC_CASES: [(&str, &str); 4] = [
    ("identity2", "Bounded"),
    ("square-second", "Bounded"),
    ("damped-pair", "Bounded"),
    ("diagonal-pair", "Unbounded"),
];

pub fn bidisc_scan() -> CarlesonRun {
    carleson("diagonal-pair", vec![0.0], dyadic(4, 9), 2_000_000, BATTERY_SEED + 600)
}

pub const TRIDISC_CASES: [(&str, &str); 2] = [("repeated-product3", "Bounded"), ("rank-one-triple", "Unbounded")];

pub fn tridisc_scan() -> CarlesonRun {
    carleson("rank-one-triple", vec![0.0], dyadic(4, 9), 2_000_000, BATTERY_SEED + 700)
}

pub const PROBE_BETAS: [f64; 3] = [-0.9, -0.5, -0.1];
pub const PROBE_BUDGET: u64 = 1_000_000;

pub fn probe_deltas() -> Vec<f64> {
    dyadic(3, 7)
}

pub const PROPERTY_SEED: u64 = BATTERY_SEED + 1000;
pub const IDENTITY_BOXES: usize = 20;
pub const IDENTITY_BOX_BUDGET: u64 = 200_000;

/// `(F, F, 0)` with gradients parallel at some pair contact point, passing
/// the tridisc test through nonvanishing partials.
pub fn bounded_via_entries(report: &TridiscReport, entry_tol: f64) -> bool {
    matches!(report.decision, Decision::Bounded)
        && report.evidence[1..]
            .iter()
            .any(|e| e.samples > e.rank_passes && e.min_entry.is_some_and(|m| m > entry_tol))
}

/// The witness of an Unbounded bidisc decision lies on the diagonal.
pub fn diagonal_witness(d: &Decision) -> bool {
    match d {
        Decision::Unbounded(w) => {
            let a = w.point.angles();
            a.len() == 2 && wrap_angle(a[0] - a[1]).abs() < 1e-6
        }
        _ => false,
    }
}

/// One measured number with its target interval.
#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub passes: bool,
}

impl Measurement {
    pub fn band(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::window(label, value, target - tol, target + tol)
    }

    pub fn window(label: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            value,
            lo,
            hi,
            passes: value >= lo && value <= hi,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub label: String,
    pub found: String,
    pub expected: String,
    pub passes: bool,
}

impl Check {
    fn new(label: impl Into<String>, found: impl Into<String>, expected: impl Into<String>) -> Self {
        let (found, expected) = (found.into(), expected.into());
        Self {
            label: label.into(),
            passes: found == expected,
            found,
            expected,
        }
    }

    pub fn flag(label: impl Into<String>, ok: bool) -> Self {
        Self::new(label, ok.to_string(), "true")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub checks: Vec<Check>,
    pub properties: Vec<PropertyReport>,
    pub untrusted: usize,
    pub warnings: Vec<String>,
    /// `(file name, CSV)`.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl CriterionResult {
    fn new(id: u32) -> Self {
        Self {
            id,
            title: TITLES[id as usize - 1],
            passed: false,
            measurements: Vec::new(),
            checks: Vec::new(),
            properties: Vec::new(),
            untrusted: 0,
            warnings: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn seal(mut self) -> Self {
        self.passed = self.measurements.iter().all(|m| m.passes)
            && self.checks.iter().all(|c| c.passes)
            && self.properties.iter().all(|p| p.passes);
        self
    }

    pub fn summary(&self) -> String {
        let mut parts: Vec<String> = self
            .measurements
            .iter()
            .map(|m| format!("{} = {:.4} in [{:.3}, {:.3}]", m.label, m.value, m.lo, m.hi))
            .collect();
        parts.extend(self.checks.iter().map(|c| format!("{} = {}", c.label, c.found)));
        let failed: Vec<&str> = self.properties.iter().filter(|p| !p.passes).map(|p| p.property.as_str()).collect();
        if !self.properties.is_empty() {
            parts.push(format!("{} properties, failed {:?}", self.properties.len(), failed));
        }
        parts.join("; ")
    }
}

fn slope_or_nan(fit: Option<f64>) -> f64 {
    fit.unwrap_or(f64::NAN)
}

fn exponent_criterion<E: Executor>(
    exec: &E,
    id: u32,
    runs: Vec<(usize, f64, ExponentRun)>,
    target: impl Fn(f64, f64) -> f64,
    tol: f64,
    t: &Tolerances,
) -> AppResult<CriterionResult> {
    let mut out = CriterionResult::new(id);
    for (n, b, run) in runs {
        let r = run_exponent(exec, &run, t)?;
        let label = format!("{} beta={b}", run.symbol.label());
        out.measurements
            .push(Measurement::band(&label, slope_or_nan(r.slope()), target(n as f64, b), tol));
        out.untrusted += r.untrusted;
        out.warnings.extend(r.warnings.iter().map(|w| format!("{label}: {w}")));
        out.tables.push((format!("c{id}_{}_beta{b}.csv", run.symbol.label()), r.csv()?));
    }
    Ok(out)
}

fn decide_check(label: &str, r: &DecideResult, expected: &str) -> Check {
    Check::new(label, r.decision().unwrap_or("none"), expected)
}

fn carleson_measure<E: Executor>(
    exec: &E,
    out: &mut CriterionResult,
    run: &CarlesonRun,
    target: f64,
    tol: f64,
    t: &Tolerances,
) -> AppResult<()> {
    let r = run_carleson(exec, run, t)?;
    let label = format!("{} ratio slope", run.symbol.label());
    let slope = r.scans[0].fit.as_ref().map(|f| f.slope);
    out.measurements.push(Measurement::band(&label, slope_or_nan(slope), target, tol));
    out.untrusted += r.untrusted;
    out.warnings.extend(r.warnings.iter().map(|w| format!("{label}: {w}")));
    out.tables.push((format!("c{}_{}.csv", out.id, run.symbol.label()), r.csv()?));
    Ok(())
}

/// Square-second probe at `β ∈ PROBE_BETAS` and its `β = 0` reference.
pub fn square_second_probe<E: Executor>(exec: &E, t: &Tolerances) -> AppResult<(BetaProbe, BetaProbe)> {
    let phi = catalog::square_second();
    let center = TorusPoint::ones(2);
    let cfg = ExperimentConfig {
        budget: PROBE_BUDGET,
        seed: BATTERY_SEED + 900,
        tolerances: t.clone(),
        ..Default::default()
    };
    let opts = cfg.carleson_options();
    let probe = beta_uniformity_probe(exec, &phi, &center, &[true, true], &PROBE_BETAS, &probe_deltas(), &opts)?;
    let reference = beta_uniformity_probe(exec, &phi, &center, &[true, true], &[0.0], &probe_deltas(), &opts)?;
    Ok((probe, reference))
}

pub fn probe_csv(probe: &BetaProbe) -> AppResult<String> {
    output::carleson_csv(probe.scans.iter().map(|s| (s.beta, s.points.as_slice())))
}

pub fn run_criterion<E: Executor>(exec: &E, id: u32, t: &Tolerances) -> AppResult<CriterionResult> {
    let result = match id {
        1 => exponent_criterion(exec, 1, product_runs(), |n, b| n * (b + 1.0) + 1.0, 0.15, t)?,
        2 => exponent_criterion(exec, 2, power_sum_runs(), |n, b| n * (b + 1.0) + (n + 1.0) / 2.0, 0.2, t)?,
        3 => {
            let mut out = CriterionResult::new(3);
            let cfg = ExperimentConfig {
                budget: SANDWICH_BUDGET,
                tolerances: t.clone(),
                ..Default::default()
            };
            for (k, (name, f)) in sandwich_cases().into_iter().enumerate() {
                let opts = ExperimentConfig {
                    seed: BATTERY_SEED + 300 + k as u64,
                    ..cfg.clone()
                }
                .sublevel_options();
                let zeta = TorusPoint::ones(f.n_vars());
                let mut r = upper_bound_battery(exec, &f, &zeta, Complex64::new(1.0, 0.0), &dyadic(4, 9), SANDWICH_SLACK, &opts)?;
                r.property = format!("{}/{name}", r.property);
                out.properties.push(r);
            }
            out
        }
        4 => {
            let mut out = CriterionResult::new(4);
            for b in CAP_BETAS {
                let s = run_cap_scaling(b, &cap_deltas())?;
                out.measurements
                    .push(Measurement::band(format!("cap slope beta={b}"), s.fit.slope, b + 2.0, 0.05));
            }
            out
        }
        5 => {
            let mut out = CriterionResult::new(5);
            for (n, run) in sharpness_runs() {
                let (target, tol) = if n <= 3 { (0.0, 0.1) } else { (-1.0, 0.2) };
                carleson_measure(exec, &mut out, &run, target, tol, t)?;
            }
            out
        }
        6 => {
            let mut out = CriterionResult::new(6);
            for (name, expected) in BIDISC_CASES {
                let r = run_decide(exec, &named(name), 0.0, t)?;
                out.checks.push(decide_check(name, &r, expected));
                if expected == "Unbounded" {
                    let d = &r.bidisc.as_ref().expect("bidisc report").decision;
                    out.checks.push(Check::flag(format!("{name} diagonal witness"), diagonal_witness(d)));
                }
            }
            carleson_measure(exec, &mut out, &bidisc_scan(), -0.5, 0.2, t)?;
            out
        }
        7 => {
            let mut out = CriterionResult::new(7);
            for (name, expected) in TRIDISC_CASES {
                let r = run_decide(exec, &named(name), 0.0, t)?;
                out.checks.push(decide_check(name, &r, expected));
                if expected == "Bounded" {
                    let rep = r.tridisc.as_ref().expect("tridisc report");
                    out.checks
                        .push(Check::flag(format!("{name} via entries"), bounded_via_entries(rep, t.entry_tol)));
                }
            }
            carleson_measure(exec, &mut out, &tridisc_scan(), -1.0, 0.2, t)?;
            out
        }
        8 => {
            let mut out = CriterionResult::new(8);
            let r = run_decide(exec, &named("repeated-product3"), 0.0, t)?;
            out.checks.push(Check::new("check_dagger", r.dagger_label(), "NecessityFails"));
            out.checks.push(decide_check("decide_tridisc", &r, "Bounded"));
            out
        }
        9 => {
            let mut out = CriterionResult::new(9);
            let (probe, reference) = square_second_probe(exec, t)?;
            let base = reference.max_ratio;
            out.measurements
                .push(Measurement::window("max ratio / beta=0 max ratio", probe.max_ratio / base, 0.0, 10.0));
            for s in probe.scans.iter().chain(&reference.scans) {
                out.measurements
                    .push(Measurement::band(format!("slope beta={}", s.beta), s.fit.slope, 0.0, 0.1));
                out.untrusted += s.points.iter().filter(|p| !p.trusted).count();
                out.warnings.extend(s.warnings.iter().cloned());
            }
            out.tables.push(("c9_square-second_probe.csv".into(), probe_csv(&probe)?));
            out.tables.push(("c9_square-second_reference.csv".into(), probe_csv(&reference)?));
            out
        }
        10 => {
            let mut out = CriterionResult::new(10);
            out.properties = run_properties(exec, PROPERTY_SEED, t)?;
            let boxes = run_identity_boxes(exec, IDENTITY_BOXES, IDENTITY_BOX_BUDGET, PROPERTY_SEED + 50, t)?;
            out.checks.push(Check::new(
                "identity boxes within 3 sigma",
                format!("{}/{}", boxes.within_3_sigma, boxes.ratios.len()),
                format!("{IDENTITY_BOXES}/{IDENTITY_BOXES}"),
            ));
            out
        }
        11 => return Err(AppError::Usage("criterion 11 compares whole runs; use `battery --threads`".into())),
        _ => return Err(AppError::Usage(format!("no criterion {id}; the battery has 1 to 11"))),
    };
    Ok(result.seal())
}
