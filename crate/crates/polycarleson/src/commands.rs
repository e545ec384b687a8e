//! Subcommand bodies. Each returns an exit code after writing its artifacts.

use std::io::Write as _;

use polycarleson_core::exec::Executor;

use crate::battery::{self, Check, CriterionResult};
use crate::config::{ExperimentConfig, Format, SlopeBand};
use crate::error::{exit, AppError, AppResult};
use crate::exec::RayonExecutor;
use crate::output::{self, Artifacts};
use crate::runs::{run_carleson, run_contact, run_decide, run_exponent, run_properties, CarlesonRun, ExponentRun};
use crate::symbols::SymbolSpec;

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn executor(cfg: &ExperimentConfig) -> AppResult<RayonExecutor> {
    RayonExecutor::new(cfg.resolve_threads()?).map_err(|e| AppError::Config(e.to_string()))
}

fn named_symbol(cfg: &ExperimentConfig) -> Option<&str> {
    match &cfg.symbol {
        Some(SymbolSpec::Named(n)) => Some(n),
        _ => None,
    }
}

/// Slope band implied by a named symbol at weight `β`, if one is known.
pub fn default_exponent_band(name: &str, beta: f64) -> Option<SlopeBand> {
    let n = |prefix: &str| name.strip_prefix(prefix).and_then(|s| s.parse::<f64>().ok());
    if let Some(n) = n("product") {
        return Some(SlopeBand {
            slope: n * (beta + 1.0) + 1.0,
            tol: 0.15,
        });
    }
    if let Some(n) = n("powersum") {
        return Some(SlopeBand {
            slope: n * (beta + 1.0) + (n + 1.0) / 2.0,
            tol: 0.2,
        });
    }
    None
}

/// Ratio-growth slope band of a named self-map at `ζ = 1⃗`.
pub fn default_carleson_band(name: &str, beta: f64) -> Option<SlopeBand> {
    let band = |slope, tol| Some(SlopeBand { slope, tol });
    match name {
        "identity2" | "identity3" | "square-second" | "damped-pair" | "swap" | "rotation" => band(0.0, 0.1),
        "diagonal-pair" => band(-0.5, 0.2),
        "rank-one-triple" => band(-1.0, 0.2),
        // (f, …, f, 0) with f = z1⋯zn is bounded iff n ≤ β + 3.
        "repeated-product3" if beta == 0.0 => band(0.0, 0.1),
        "repeated-product4" if beta == 0.0 => band(-1.0, 0.2),
        _ => None,
    }
}

fn status(failed: bool, untrusted: bool) -> u8 {
    if failed {
        exit::PROPERTY_FAILED
    } else if untrusted {
        exit::UNTRUSTED
    } else {
        exit::OK
    }
}

fn write_config(art: &mut Artifacts, cfg: &ExperimentConfig) -> AppResult<()> {
    if cfg.wants(Format::Json) {
        art.write("config.json", &cfg.to_json())?;
    }
    Ok(())
}

fn finish(art: Artifacts) -> AppResult<()> {
    for p in art.finish()? {
        say!("wrote {}", p.display());
    }
    Ok(())
}

pub fn decide(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let symbol = cfg
        .symbol
        .as_ref()
        .ok_or_else(|| AppError::Usage("decide needs --symbol".into()))?;
    let r = run_decide(&exec, symbol, cfg.beta, &cfg.tolerances)?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    for ev in &r.dagger.evidence {
        art.warn_all("decide", &ev.warnings);
    }
    art.write_json("decide.json", &r)?;
    say!("check_dagger: {}", r.dagger_label());
    if let Some(d) = r.decision() {
        say!("decision: {d}");
    }
    let failed = match &cfg.expect_verdict {
        Some(v) => v != r.dagger_label() && Some(v.as_str()) != r.decision(),
        None => false,
    };
    finish(art)?;
    Ok(status(failed, r.inconclusive()))
}

fn check_band(label: &str, band: Option<SlopeBand>, slope: Option<f64>) -> bool {
    match (band, slope) {
        (Some(b), Some(s)) => {
            let ok = b.contains(s);
            say!(
                "{label}: slope {s:.4}, expected {} ± {}: {}",
                b.slope,
                b.tol,
                if ok { "ok" } else { "OUT OF BAND" }
            );
            !ok
        }
        (None, Some(s)) => {
            say!("{label}: slope {s:.4}");
            false
        }
        (_, None) => {
            say!("{label}: no fit");
            false
        }
    }
}

pub fn exponent(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let run = ExponentRun::from_config(cfg)?;
    let r = run_exponent(&exec, &run, &cfg.tolerances)?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    art.warn_all("exponent", &r.warnings);
    if let Some(e) = &r.fit_error {
        art.warn("exponent", e.clone());
    }
    if cfg.wants(Format::Csv) {
        art.write("exponent.csv", &r.csv()?)?;
    }
    if cfg.wants(Format::Json) {
        art.write_json("exponent.json", &r)?;
    }
    if cfg.wants(Format::Svg) {
        art.write("exponent.svg", &r.svg())?;
    }
    say!("proposal plan: {}", r.plan);
    let band = cfg
        .expect_slope
        .or_else(|| named_symbol(cfg).and_then(|n| default_exponent_band(n, run.beta)));
    let failed = check_band(&run.symbol.label(), band, r.slope());
    finish(art)?;
    Ok(status(failed, r.untrusted > 0 || r.fit.is_none()))
}

pub fn carleson(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let run = CarlesonRun::from_config(cfg)?;
    let r = run_carleson(&exec, &run, &cfg.tolerances)?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    art.warn_all("carleson", &r.warnings);
    if cfg.wants(Format::Csv) {
        art.write("carleson.csv", &r.csv()?)?;
    }
    if cfg.wants(Format::Json) {
        art.write_json("carleson.json", &r)?;
    }
    if cfg.wants(Format::Svg) {
        art.write("carleson.svg", &r.svg())?;
    }
    let mut failed = false;
    let mut no_fit = false;
    for s in &r.scans {
        if let Some(e) = &s.fit_error {
            art.warn("carleson", format!("β = {}: {e}", s.beta));
            no_fit = true;
        }
        let band = cfg
            .expect_slope
            .or_else(|| named_symbol(cfg).and_then(|n| default_carleson_band(n, s.beta)));
        failed |= check_band(
            &format!("{} β = {}", run.symbol.label(), s.beta),
            band,
            s.fit.as_ref().map(|f| f.slope),
        );
    }
    say!("max ratio {:.4}", r.max_ratio());
    finish(art)?;
    Ok(status(failed, r.untrusted > 0 || no_fit))
}

pub fn contact(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let phi = cfg
        .symbol
        .as_ref()
        .ok_or_else(|| AppError::Usage("contact needs --symbol".into()))?
        .build()?;
    let indices: Vec<usize> = match &cfg.indices {
        Some(ix) => ix
            .iter()
            .map(|&i| {
                if i == 0 || i > phi.n_out() {
                    Err(AppError::Config(format!("component index {i} outside 1..={}", phi.n_out())))
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<AppResult<_>>()?,
        None => (0..phi.n_out()).collect(),
    };
    let set = run_contact(&exec, &phi, &indices, &cfg.tolerances)?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    art.warn_all("contact", &set.warnings);
    if cfg.wants(Format::Csv) {
        art.write("contact.csv", &output::contact_csv(&set)?)?;
    }
    if cfg.wants(Format::Json) {
        art.write_json("contact.json", &set)?;
    }
    say!("contact set: {} ({} points)", set.kind.label(), set.kind.points().len());
    finish(art)?;
    Ok(exit::OK)
}

fn file_stem(property: &str) -> String {
    property.replace(['/', ' '], "_")
}

pub fn check_props(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let reports = run_properties(&exec, cfg.seed, &cfg.tolerances)?;
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    let mut failed = false;
    for r in &reports {
        art.write_json(&format!("{}.json", file_stem(&r.property)), r)?;
        art.warn_all("check-props", &r.notes.iter().filter(|_| !r.passes).cloned().collect::<Vec<_>>());
        say!("{}: {}", r.property, if r.passes { "pass" } else { "FAIL" });
        failed |= !r.passes;
    }
    finish(art)?;
    Ok(status(failed, false))
}

/// Tables whose bytes must not depend on the thread count.
pub fn determinism_tables<E: Executor>(exec: &E, t: &crate::config::Tolerances) -> AppResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    let (_, _, run) = battery::product_runs().swap_remove(1);
    out.push(("product2.csv".into(), run_exponent(exec, &run, t)?.csv()?));
    for (n, run) in battery::sharpness_runs() {
        out.push((format!("sharpness{n}.csv"), run_carleson(exec, &run, t)?.csv()?));
    }
    let (probe, reference) = battery::square_second_probe(exec, t)?;
    out.push(("probe.csv".into(), battery::probe_csv(&probe)?));
    out.push(("reference.csv".into(), battery::probe_csv(&reference)?));
    let phi = crate::symbols::lookup("diagonal-pair").expect("named").symbol();
    out.push(("contact.csv".into(), output::contact_csv(&run_contact(exec, &phi, &[0, 1], t)?)?));
    Ok(out)
}

pub const DETERMINISM_THREADS: [usize; 3] = [1, 4, 8];

fn determinism(t: &crate::config::Tolerances) -> AppResult<CriterionResult> {
    let mut runs = Vec::new();
    for threads in DETERMINISM_THREADS {
        runs.push(determinism_tables(&RayonExecutor::new(threads).map_err(|e| AppError::Config(e.to_string()))?, t)?);
    }
    let mut checks = Vec::new();
    for (k, (name, bytes)) in runs[0].iter().enumerate() {
        let same = runs[1..].iter().all(|r| r[k].1 == *bytes);
        checks.push(Check::flag(format!("{name} identical across threads"), same));
    }
    let passed = checks.iter().all(|m| m.passes);
    Ok(CriterionResult {
        id: 11,
        title: battery::TITLES[10],
        passed,
        measurements: Vec::new(),
        checks,
        properties: Vec::new(),
        untrusted: 0,
        warnings: Vec::new(),
        tables: runs.swap_remove(0),
    })
}

pub fn run_battery(cfg: &ExperimentConfig) -> AppResult<u8> {
    let exec = executor(cfg)?;
    let ids: Vec<u32> = if cfg.only.is_empty() { (1..=11).collect() } else { cfg.only.clone() };
    let mut art = Artifacts::new(&cfg.out_dir)?;
    write_config(&mut art, cfg)?;
    let mut results = Vec::new();
    for id in ids {
        let r = if id == 11 {
            determinism(&cfg.tolerances)?
        } else {
            battery::run_criterion(&exec, id, &cfg.tolerances)?
        };
        say!(
            "criterion {:>2} {:<36} {}  {}",
            r.id,
            r.title,
            if r.passed { "PASS" } else { "FAIL" },
            r.summary()
        );
        art.warn_all(&format!("criterion {id}"), &r.warnings);
        if cfg.wants(Format::Csv) {
            for (name, csv) in &r.tables {
                art.write(&format!("c{id}_{}", name.trim_start_matches(&format!("c{id}_"))), csv)?;
            }
        }
        results.push(r);
    }
    if cfg.wants(Format::Json) {
        art.write_json("battery.json", &results)?;
    }
    let failed = results.iter().any(|r| !r.passed);
    let untrusted = results.iter().any(|r| r.untrusted > 0);
    finish(art)?;
    Ok(status(failed, untrusted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands_follow_the_exponent_formulas() {
        let b = default_exponent_band("product3", 1.0).unwrap();
        assert_eq!((b.slope, b.tol), (7.0, 0.15));
        let b = default_exponent_band("powersum3", 0.0).unwrap();
        assert_eq!(b.slope, 5.0);
        assert!(default_exponent_band("swap", 0.0).is_none());
        assert_eq!(default_carleson_band("repeated-product4", 0.0).unwrap().slope, -1.0);
        assert!(default_carleson_band("repeated-product4", 1.0).is_none());
    }

    #[test]
    fn failure_outranks_untrusted() {
        assert_eq!(status(true, true), exit::PROPERTY_FAILED);
        assert_eq!(status(false, true), exit::UNTRUSTED);
        assert_eq!(status(false, false), exit::OK);
    }
}
