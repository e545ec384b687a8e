//! Typed experiment runs shared by the subcommands and the battery.

use polycarleson_core::carleson::{
    contact_pattern, fit_ratios, scan_ratios, RatioPoint, SlopeEvidence, FULL_RADIUS,
};
use polycarleson_core::contact::{find_contact_set, jc_check, slice_gradient_constancy, ContactSet, SliceOptions};
use polycarleson_core::criteria::{check_dagger, decide_bidisc, decide_tridisc, BidiscReport, TridiscReport, Verdict};
use polycarleson_core::exec::Executor;
use polycarleson_core::fit::{loglog, LineFit};
use polycarleson_core::inequality_lab::{
    linearization_bound_check, mobius_margin_check, schwarz_product_check, FixedPolynomial, MobiusShift,
    PropertyReport,
};
use polycarleson_core::measure::{disc_cap_measure, WeightParam};
use polycarleson_core::sublevel::{default_deltas, scan_sublevel, SublevelPoint};
use polycarleson_core::symbols::{catalog, PolySymbol, Polynomial, TorusPoint};
use polycarleson_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Tolerances};
use crate::error::{AppError, AppResult};
use crate::output;
use crate::svg::{Plot, Series};
use crate::symbols::{unit, SymbolSpec};

fn weight(beta: f64) -> AppResult<WeightParam> {
    WeightParam::new(beta).map_err(|e| AppError::Config(e.to_string()))
}

/// Sublevel volumes of one component over a `δ` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRun {
    pub symbol: SymbolSpec,
    pub component: usize,
    pub eta_angle: f64,
    pub beta: f64,
    pub deltas: Vec<f64>,
    pub budget: u64,
    pub seed: u64,
}

impl ExponentRun {
    pub fn from_config(cfg: &ExperimentConfig) -> AppResult<Self> {
        Ok(Self {
            symbol: cfg
                .symbol
                .clone()
                .ok_or_else(|| AppError::Usage("exponent needs a symbol".into()))?,
            component: cfg.component,
            eta_angle: cfg.eta_angle,
            beta: cfg.beta,
            deltas: cfg.deltas.clone().unwrap_or_else(default_deltas),
            budget: cfg.budget,
            seed: cfg.seed,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentResult {
    pub run: ExponentRun,
    pub plan: String,
    pub points: Vec<SublevelPoint>,
    pub fit: Option<LineFit>,
    pub fit_error: Option<String>,
    pub untrusted: usize,
    pub warnings: Vec<String>,
}

impl ExponentResult {
    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    pub fn csv(&self) -> AppResult<String> {
        output::sublevel_csv(&self.points)
    }

    pub fn svg(&self) -> String {
        Plot {
            title: format!(
                "sublevel volume, {} (component {}), β = {}",
                self.run.symbol.label(),
                self.run.component + 1,
                self.run.beta
            ),
            x_label: "δ".into(),
            y_label: "V_β(|f − η| ≤ δ)".into(),
            series: vec![Series {
                label: self.run.symbol.label(),
                points: self
                    .points
                    .iter()
                    .map(|p| (p.delta, p.estimate.value, p.estimate.stderr))
                    .collect(),
                fit: self.fit.as_ref().map(|f| (f.slope, f.intercept)),
            }],
        }
        .render()
    }
}

pub fn run_exponent<E: Executor>(exec: &E, run: &ExponentRun, tol: &Tolerances) -> AppResult<ExponentResult> {
    let phi = run.symbol.build()?;
    if run.component >= phi.n_out() {
        return Err(AppError::Config(format!(
            "component {} out of range for a map with {} components",
            run.component,
            phi.n_out()
        )));
    }
    let f = phi.component(run.component);
    let cfg = ExperimentConfig {
        budget: run.budget,
        seed: run.seed,
        tolerances: tol.clone(),
        ..Default::default()
    };
    let (points, plan, warnings) = scan_sublevel(
        exec,
        f,
        unit(run.eta_angle),
        weight(run.beta)?,
        &run.deltas,
        &cfg.sublevel_options(),
    )?;
    let untrusted = points.iter().filter(|p| !p.estimate.trusted).count();
    let (fit, fit_error) = match polycarleson_core::sublevel::fit_points(points.clone()) {
        Ok(f) => (
            Some(LineFit {
                slope: f.slope,
                intercept: f.intercept,
                slope_stderr: f.slope_stderr,
                max_abs_residual: f.max_abs_residual,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ExponentResult {
        run: run.clone(),
        plan: plan.label().into(),
        points,
        fit,
        fit_error,
        untrusted,
        warnings,
    })
}

/// Carleson ratio scans, one per weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonRun {
    pub symbol: SymbolSpec,
    /// Domain point `ζ`; `None` means `1⃗`.
    pub contact_point: Option<Vec<f64>>,
    /// Box center `ξ`; `None` means the image of `ζ`.
    pub center: Option<Vec<f64>>,
    pub shrink: Option<Vec<bool>>,
    pub betas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub budget: u64,
    pub seed: u64,
}

impl CarlesonRun {
    pub fn from_config(cfg: &ExperimentConfig) -> AppResult<Self> {
        Ok(Self {
            symbol: cfg
                .symbol
                .clone()
                .ok_or_else(|| AppError::Usage("carleson needs a symbol".into()))?,
            contact_point: cfg.contact_point.clone(),
            center: cfg.center.clone(),
            shrink: cfg.shrink.clone(),
            betas: if cfg.betas.is_empty() { vec![cfg.beta] } else { cfg.betas.clone() },
            deltas: cfg.deltas.clone().unwrap_or_else(default_deltas),
            budget: cfg.budget,
            seed: cfg.seed,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub beta: f64,
    pub points: Vec<RatioPoint>,
    pub fit: Option<LineFit>,
    pub fit_error: Option<String>,
    pub evidence: Option<SlopeEvidence>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonResult {
    pub run: CarlesonRun,
    pub center: Vec<f64>,
    pub shrink: Vec<bool>,
    pub scans: Vec<ScanResult>,
    pub untrusted: usize,
    pub warnings: Vec<String>,
}

impl CarlesonResult {
    pub fn max_ratio(&self) -> f64 {
        self.scans
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.ratio))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn csv(&self) -> AppResult<String> {
        output::carleson_csv(self.scans.iter().map(|s| (s.beta, s.points.as_slice())))
    }

    pub fn svg(&self) -> String {
        Plot {
            title: format!("Carleson ratio, {}", self.run.symbol.label()),
            x_label: "δ".into(),
            y_label: "V_β(Φ⁻¹(S)) / V_β(S)".into(),
            series: self
                .scans
                .iter()
                .map(|s| Series {
                    label: format!("β = {}", s.beta),
                    points: s.points.iter().map(|p| (p.delta, p.ratio, p.stderr)).collect(),
                    fit: s.fit.as_ref().map(|f| (f.slope, f.intercept)),
                })
                .collect(),
        }
        .render()
    }
}

pub fn run_carleson<E: Executor>(exec: &E, run: &CarlesonRun, tol: &Tolerances) -> AppResult<CarlesonResult> {
    let phi = run.symbol.build()?;
    let n = phi.n_in();
    if phi.n_out() != n {
        return Err(AppError::Config("carleson needs a self-map of one polydisc".into()));
    }
    let zeta = TorusPoint::new(run.contact_point.clone().unwrap_or_else(|| vec![0.0; n]));
    if zeta.dim() != n {
        return Err(AppError::Config(format!("contact point must have {n} angles")));
    }
    let shrink = match &run.shrink {
        Some(s) => s.clone(),
        None => contact_pattern(&phi, &zeta, tol.contact.contact_tol)?,
    };
    if shrink.len() != n {
        return Err(AppError::Config(format!("shrink pattern must have {n} entries")));
    }
    let center = match &run.center {
        Some(c) => c.clone(),
        None => {
            let v = phi.eval(&zeta.point())?;
            v.iter()
                .zip(&shrink)
                .map(|(w, &s)| if s { w.arg() } else { 0.0 })
                .collect()
        }
    };
    let center_pt = TorusPoint::new(center.clone());
    if center_pt.dim() != n {
        return Err(AppError::Config(format!("center must have {n} angles")));
    }
    let cfg = ExperimentConfig {
        budget: run.budget,
        seed: run.seed,
        tolerances: tol.clone(),
        ..Default::default()
    };
    let opts = cfg.carleson_options();
    let mut scans = Vec::new();
    let mut warnings = Vec::new();
    for &b in &run.betas {
        let (points, w) = scan_ratios(exec, &phi, &center_pt, &shrink, weight(b)?, &run.deltas, &opts)?;
        warnings.extend(w);
        let (fit, fit_error) = match fit_ratios(&points) {
            Ok((f, _)) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        scans.push(ScanResult {
            beta: b,
            evidence: fit.as_ref().map(|f| SlopeEvidence::classify(f.slope)),
            points,
            fit,
            fit_error,
        });
    }
    warnings.sort();
    warnings.dedup();
    let untrusted = scans.iter().flat_map(|s| &s.points).filter(|p| !p.trusted).count();
    Ok(CarlesonResult {
        run: run.clone(),
        center,
        shrink,
        scans,
        untrusted,
        warnings,
    })
}

/// Verdicts of every decider that applies to the symbol's dimension.
#[derive(Clone, Debug, Serialize)]
pub struct DecideResult {
    pub symbol: String,
    pub dagger: Verdict,
    pub bidisc: Option<BidiscReport>,
    /// Classical Bergman space only.
    pub tridisc: Option<TridiscReport>,
    pub tolerances: Tolerances,
}

impl DecideResult {
    /// `Bounded`/`Unbounded`/`Inconclusive` from the exact criterion when
    /// one applies.
    pub fn decision(&self) -> Option<&'static str> {
        self.bidisc
            .as_ref()
            .map(|b| b.decision.label())
            .or_else(|| self.tridisc.as_ref().map(|t| t.decision.label()))
    }

    pub fn dagger_label(&self) -> &'static str {
        use polycarleson_core::criteria::Outcome;
        match self.dagger.outcome {
            Outcome::SufficiencyHolds => "SufficiencyHolds",
            Outcome::NecessityFails(_) => "NecessityFails",
            Outcome::Inconclusive(_) => "Inconclusive",
        }
    }

    pub fn inconclusive(&self) -> bool {
        self.dagger_label() == "Inconclusive" || self.decision() == Some("Inconclusive")
    }
}

pub fn run_decide<E: Executor>(exec: &E, symbol: &SymbolSpec, beta: f64, tol: &Tolerances) -> AppResult<DecideResult> {
    let phi = symbol.build()?;
    if phi.n_in() != phi.n_out() {
        return Err(AppError::Config("decide needs a self-map of one polydisc".into()));
    }
    let cfg = ExperimentConfig {
        tolerances: tol.clone(),
        ..Default::default()
    };
    let opts = cfg.criteria_options();
    let dagger = check_dagger(exec, &phi, &opts)?;
    let bidisc = match phi.n_in() {
        2 => Some(decide_bidisc(exec, &phi, weight(beta)?, &opts)?),
        _ => None,
    };
    let tridisc = match phi.n_in() {
        3 => Some(decide_tridisc(exec, &phi, &opts)?),
        _ => None,
    };
    Ok(DecideResult {
        symbol: symbol.label(),
        dagger,
        bidisc,
        tridisc,
        tolerances: tol.clone(),
    })
}

/// Contact set of the components `indices` (0-based).
pub fn run_contact<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    indices: &[usize],
    tol: &Tolerances,
) -> AppResult<ContactSet> {
    Ok(find_contact_set(exec, phi, indices, &tol.contact)?)
}

/// Deterministic quadrature slope of `δ ↦ A_β(D(1,δ) ∩ D)`.
#[derive(Clone, Debug, Serialize)]
pub struct CapScaling {
    pub beta: f64,
    pub deltas: Vec<f64>,
    pub measures: Vec<f64>,
    pub fit: LineFit,
}

pub fn run_cap_scaling(beta: f64, deltas: &[f64]) -> AppResult<CapScaling> {
    let w = weight(beta)?;
    let measures = deltas
        .iter()
        .map(|&d| disc_cap_measure(Complex64::new(1.0, 0.0), d, w))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = loglog(deltas, &measures, &vec![0.0; deltas.len()])?;
    Ok(CapScaling {
        beta,
        deltas: deltas.to_vec(),
        measures,
        fit,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn jc_report(name: &str, f: &Polynomial, zeta: &TorusPoint, eta: Complex64, tol: &Tolerances) -> AppResult<PropertyReport> {
    let r = jc_check(f, zeta, eta, tol.contact.contact_tol, tol.jc_tol)?;
    let margin = r
        .values
        .iter()
        .map(|v| (tol.jc_tol - v.im.abs()).min(v.re + tol.jc_tol))
        .fold(f64::INFINITY, f64::min);
    Ok(PropertyReport {
        property: format!("jc_check/{name}"),
        samples: 1,
        excluded: 0,
        worst_margin: margin,
        empirical_constant: r.values.iter().map(|v| v.re).reduce(f64::min),
        worst: None,
        seed: 0,
        passes: r.passes,
        notes: vec![format!("derivatives {:?}", r.values)],
    })
}

fn slice_report(name: &str, psi: &Polynomial, m: usize, tail: &TorusPoint, z0: &[Complex64], seed: u64) -> AppResult<PropertyReport> {
    let opts = SliceOptions {
        seed,
        ..Default::default()
    };
    let r = slice_gradient_constancy(psi, m, tail, z0, &opts)?;
    Ok(PropertyReport {
        property: format!("slice_gradient_constancy/{name}"),
        samples: r.samples as u64,
        excluded: 0,
        worst_margin: opts.slice_tol - r.max_deviation,
        empirical_constant: Some(r.max_deviation),
        worst: None,
        seed,
        passes: r.passes,
        notes: vec![format!("gradient {:?}", r.gradient)],
    })
}

fn named(mut r: PropertyReport, name: &str) -> PropertyReport {
    r.property = format!("{}/{name}", r.property);
    r
}

/// The pinned property battery.
pub fn run_properties<E: Executor>(exec: &E, seed: u64, tol: &Tolerances) -> AppResult<Vec<PropertyReport>> {
    let ones2 = TorusPoint::ones(2);
    let one = c(1.0, 0.0);
    let deltas = [0.2, 0.1, 0.05, 0.01, 0.001];
    let radii = [0.2, 0.1, 0.05];
    let ks: Vec<f64> = (0..=9).map(|i| 0.1 * i as f64).collect();
    let z = Polynomial::variable(1, 0);
    let z_sq = Polynomial::monomial(one, &[2]);
    let linear = Polynomial::from_terms(2, [(vec![1, 0], c(0.3, 0.0)), (vec![0, 1], c(0.7, 0.0))])?;
    let mut out = vec![
        named(mobius_margin_check(&FixedPolynomial(z.clone()), &[0.0], &deltas, 256)?, "identity"),
        named(mobius_margin_check(&FixedPolynomial(z_sq.clone()), &[0.0], &deltas, 256)?, "square"),
        named(mobius_margin_check(&MobiusShift, &ks, &deltas, 256)?, "shift"),
        named(
            linearization_bound_check(exec, &linear, &ones2, one, &radii, 20_000, seed, tol.contact.contact_tol)?,
            "linear",
        ),
        named(
            linearization_bound_check(exec, &catalog::product(2), &ones2, one, &radii, 20_000, seed + 1, tol.contact.contact_tol)?,
            "product2",
        ),
        named(
            linearization_bound_check(exec, &z_sq, &TorusPoint::ones(1), one, &radii, 20_000, seed + 2, tol.contact.contact_tol)?,
            "square",
        ),
        named(
            schwarz_product_check(exec, &catalog::identity(2), &ones2, 0.3, 1.0, 100_000, seed + 3)?,
            "identity",
        ),
        named(
            schwarz_product_check(exec, &catalog::square_second(), &ones2, 0.05, 1.9, 100_000, seed + 4)?,
            "square-second",
        ),
        named(schwarz_product_check(exec, &catalog::swap(), &ones2, 0.3, 1.0, 100_000, seed + 5)?, "swap"),
    ];
    out.push(slice_report(
        "z2",
        &Polynomial::variable(2, 1),
        1,
        &TorusPoint::ones(1),
        &[c(0.0, 0.0)],
        seed + 6,
    )?);
    out.push(slice_report(
        "z2z3",
        &Polynomial::monomial(one, &[0, 1, 1]),
        1,
        &TorusPoint::ones(2),
        &[c(0.0, 0.3)],
        seed + 7,
    )?);
    let pi = std::f64::consts::PI;
    out.push(jc_report("product2", &catalog::product(2), &ones2, one, tol)?);
    out.push(jc_report("product3", &catalog::product(3), &TorusPoint::new(vec![0.0, pi, pi]), one, tol)?);
    out.push(jc_report("square", &z_sq, &TorusPoint::new(vec![pi / 2.0]), c(-1.0, 0.0), tol)?);
    out.push(jc_report("powersum2", &catalog::power_sum(2), &TorusPoint::new(vec![pi, 0.0]), one, tol)?);
    out.push(jc_report("mean2", &catalog::mean(2), &ones2, one, tol)?);
    let _ = z;
    Ok(out)
}

/// Identity-map ratios on random boxes.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityBoxes {
    pub ratios: Vec<(f64, f64, f64)>,
    pub within_3_sigma: usize,
}

pub fn run_identity_boxes<E: Executor>(
    exec: &E,
    count: usize,
    budget: u64,
    seed: u64,
    tol: &Tolerances,
) -> AppResult<IdentityBoxes> {
    use polycarleson_core::carleson::preimage_box_ratio;
    use polycarleson_core::measure::CarlesonBox;
    use polycarleson_core::rng::batch_rng;
    use rand::Rng;

    let mut rng = batch_rng(seed, &[0x424f_5845], 0);
    let phi = catalog::identity(2);
    let mut ratios = Vec::with_capacity(count);
    let mut within = 0;
    for k in 0..count {
        let center = TorusPoint::new(vec![rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU)]);
        let radii = vec![rng.gen_range(0.05..1.5), rng.gen_range(0.05..1.5)];
        let beta = [-0.5, 0.0, 1.0][k % 3];
        let cfg = ExperimentConfig {
            budget,
            seed: seed.wrapping_add(k as u64),
            tolerances: tol.clone(),
            ..Default::default()
        };
        let bx = CarlesonBox::new(center, radii)?;
        let p = preimage_box_ratio(exec, &phi, &bx, weight(beta)?, &cfg.carleson_options())?;
        if (p.ratio - 1.0).abs() <= 3.0 * p.stderr {
            within += 1;
        }
        ratios.push((beta, p.ratio, p.stderr));
    }
    Ok(IdentityBoxes {
        ratios,
        within_3_sigma: within,
    })
}

/// `1.0` in every slot, used for the radius of non-shrinking components in
/// reports.
pub const NON_SHRINKING_RADIUS: f64 = FULL_RADIUS;
