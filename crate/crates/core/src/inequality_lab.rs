//! Sampled checks of the auxiliary inequalities behind the sublevel and
//! Carleson estimates: the Möbius margin, the linearization bound near a
//! contact point, the Schwarz product inequality, and the upper/lower
//! sublevel exponent sandwich.
//!
//! Every check runs on an explicit sample set drawn from a recorded seed
//! and reports its worst sample so the number can be recomputed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::contact::jc_check;
use crate::exec::Executor;
use crate::measure::WeightParam;
use crate::rng::batch_rng;
use crate::sublevel::{fit_exponent, SublevelOptions};
use crate::symbols::{PolySymbol, Polynomial, TorusPoint};
use crate::{Error, Result};

const TAG_LAB: u64 = 0x4c41_4221;
const BATCH: usize = 4096;

/// Share of excluded samples above which a report fails.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;
/// Allowed growth of the linearization constant as the radius shrinks.
pub const STABILITY_SLACK: f64 = 1.05;
/// Denominators below this are excluded from the linearization ratio.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// The sample that determines a report's constant.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorstSample {
    pub z: Vec<Complex64>,
    /// Check-specific parameters, e.g. `[k, δ]` for the Möbius margin.
    pub params: Vec<f64>,
    /// The per-sample quantity at `z`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropertyReport {
    pub property: String,
    pub samples: u64,
    pub excluded: u64,
    /// Smallest slack of the asserted inequality; negative means violated.
    pub worst_margin: f64,
    /// Constant found where the inequality leaves it unspecified.
    pub empirical_constant: Option<f64>,
    pub worst: Option<WorstSample>,
    pub seed: u64,
    pub passes: bool,
    pub notes: Vec<String>,
}

/// A one-parameter family `x ↦ φ(x, k)` of disc self-maps.
pub trait DiscFamily: Sync {
    fn eval(&self, x: Complex64, k: f64) -> Complex64;

    /// `|φ(0, k)|`.
    fn origin_modulus(&self, k: f64) -> f64 {
        self.eval(Complex64::new(0.0, 0.0), k).norm()
    }
}

/// A fixed one-variable polynomial; `k` is ignored.
#[derive(Clone, Debug)]
pub struct FixedPolynomial(pub Polynomial);

impl DiscFamily for FixedPolynomial {
    fn eval(&self, x: Complex64, _: f64) -> Complex64 {
        self.0.eval(&[x])
    }
}

/// `x ↦ (x + k)/(1 + k x)` for real `k ∈ (−1, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MobiusShift;

impl DiscFamily for MobiusShift {
    fn eval(&self, x: Complex64, k: f64) -> Complex64 {
        (x + k) / (1.0 + k * x)
    }
}

/// `(1 − |φ(x,k)|)/δ` at a point with `|x| = 1 − δ`.
pub fn mobius_sample<F: DiscFamily + ?Sized>(family: &F, x: Complex64, k: f64, delta: f64) -> f64 {
    (1.0 - family.eval(x, k).norm()) / delta
}

/// Empirical `C(K)` in `|x| ≤ 1 − δ ⟹ |φ(x,k)| ≤ 1 − C(K)δ`, minimized over
/// `angles` points on each circle `|x| = 1 − δ` and every `k`.
///
/// The margin compares it with the floor `(1 − max_k |φ(0,k)|)/2`.
pub fn mobius_margin_check<F: DiscFamily + ?Sized>(
    family: &F,
    params: &[f64],
    deltas: &[f64],
    angles: usize,
) -> Result<PropertyReport> {
    if params.is_empty() || deltas.is_empty() || angles == 0 {
        return Err(Error::InvalidArgument("empty parameter, radius or angle grid".into()));
    }
    if let Some(&d) = deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::InvalidArgument(format!("δ = {d} outside (0, 1)")));
    }
    for &k in params {
        // maximum principle: the circle bounds the disc
        let m = (0..angles.max(1024))
            .map(|i| family.eval(Complex64::cis(TAU * i as f64 / angles.max(1024) as f64), k).norm())
            .fold(0.0, f64::max);
        if m > 1.0 + 1e-9 {
            return Err(Error::SymbolNotSelfMap {
                component: 0,
                modulus: m,
                angles: vec![k],
            });
        }
    }
    let floor = (1.0 - params.iter().map(|&k| family.origin_modulus(k)).fold(0.0, f64::max)) / 2.0;
    let mut worst: Option<WorstSample> = None;
    let mut samples = 0;
    for &k in params {
        for &d in deltas {
            for i in 0..angles {
                let x = Complex64::from_polar(1.0 - d, TAU * i as f64 / angles as f64);
                let c = mobius_sample(family, x, k, d);
                samples += 1;
                if worst.as_ref().is_none_or(|w| c < w.value) {
                    worst = Some(WorstSample {
                        z: vec![x],
                        params: vec![k, d],
                        value: c,
                    });
                }
            }
        }
    }
    let c = worst.as_ref().map_or(f64::NAN, |w| w.value);
    let margin = c - floor;
    Ok(PropertyReport {
        property: "mobius_margin".into(),
        samples,
        excluded: 0,
        worst_margin: margin,
        empirical_constant: Some(c),
        worst,
        seed: 0,
        passes: c > 0.0 && margin >= -1e-12,
        notes: vec![format!("analytic floor (1 − max|φ(0,k)|)/2 = {floor}")],
    })
}

/// Uniform point of `D(c, r) ∩ D` per coordinate, by rejection.
fn near_sample<R: Rng + ?Sized>(center: &[Complex64], radius: f64, rng: &mut R, out: &mut [Complex64]) {
    for (o, c) in out.iter_mut().zip(center) {
        loop {
            let u = Complex64::from_polar(radius * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>());
            let z = c + u;
            if z.norm_sqr() < 1.0 {
                *o = z;
                break;
            }
        }
    }
}

/// `|f(z) − f(ζ)| / |Σ_j ∂f/∂z_j(ζ)(z_j − ζ_j)|`, or `None` when the
/// denominator is below [`DENOMINATOR_FLOOR`].
pub fn linearization_ratio(f: &Polynomial, grad: &[Complex64], zeta: &[Complex64], z: &[Complex64]) -> Option<f64> {
    let num = (f.eval(z) - f.eval(zeta)).norm();
    let den = grad
        .iter()
        .zip(z.iter().zip(zeta))
        .map(|(g, (a, b))| g * (a - b))
        .sum::<Complex64>()
        .norm();
    (den >= DENOMINATOR_FLOOR).then(|| num / den)
}

/// Largest ratio over `samples` points of `D^n ∩ {|z_j − ζ_j| < r}`, for each
/// radius in `radii` (largest first). Passes when the maximum is finite, does
/// not grow by more than [`STABILITY_SLACK`] from one radius to the next,
/// and at most 1% of samples were excluded.
#[allow(clippy::too_many_arguments)]
pub fn linearization_bound_check<E: Executor>(
    exec: &E,
    f: &Polynomial,
    zeta: &TorusPoint,
    eta: Complex64,
    radii: &[f64],
    samples: usize,
    seed: u64,
    contact_tol: f64,
) -> Result<PropertyReport> {
    if zeta.dim() != f.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: f.n_vars(),
            got: zeta.dim(),
        });
    }
    if radii.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument("need at least one radius and one sample".into()));
    }
    let z0 = zeta.point();
    let residual = (f.eval(&z0) - eta).norm();
    if !(residual <= contact_tol) {
        return Err(Error::ContactRequired {
            residual,
            tol: contact_tol,
        });
    }
    let grad: Vec<Complex64> = (0..f.n_vars()).map(|j| f.derivative(j).eval(&z0)).collect();
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut worst: Option<WorstSample> = None;
    let mut excluded = 0u64;
    for (ri, &r) in radii.iter().enumerate() {
        let tasks = samples.div_ceil(BATCH);
        let parts = exec.run(tasks, |b| {
            let mut rng = batch_rng(seed, &[TAG_LAB, 1, ri as u64], b as u64);
            let mut z = vec![Complex64::new(0.0, 0.0); z0.len()];
            let mut best: Option<(f64, Vec<Complex64>)> = None;
            let mut skipped = 0u64;
            for _ in 0..BATCH.min(samples - b * BATCH) {
                near_sample(&z0, r, &mut rng, &mut z);
                match linearization_ratio(f, &grad, &z0, &z) {
                    Some(c) if best.as_ref().is_none_or(|(m, _)| c > *m) => best = Some((c, z.clone())),
                    Some(_) => {}
                    None => skipped += 1,
                }
            }
            (best, skipped)
        });
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for (b, s) in parts {
            excluded += s;
            if let Some((c, z)) = b {
                if best.as_ref().is_none_or(|(m, _)| c > *m) {
                    best = Some((c, z));
                }
            }
        }
        let c = best.as_ref().map_or(f64::NAN, |b| b.0);
        per_radius.push(c);
        if let Some((c, z)) = best {
            if worst.as_ref().is_none_or(|w| c > w.value) {
                worst = Some(WorstSample {
                    z,
                    params: vec![r],
                    value: c,
                });
            }
        }
    }
    let total = (samples * radii.len()) as u64;
    let margin = per_radius
        .windows(2)
        .map(|w| STABILITY_SLACK * w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    let finite = per_radius.iter().all(|c| c.is_finite());
    let excluded_ok = excluded as f64 <= MAX_EXCLUDED_FRACTION * total as f64;
    let notes = vec![
        format!("max ratio per radius {radii:?}: {per_radius:?}"),
        "stabilization across shrinking radii stands in for the unspecified neighborhood".into(),
    ];
    Ok(PropertyReport {
        property: "linearization_bound".into(),
        samples: total,
        excluded,
        worst_margin: margin,
        empirical_constant: worst.as_ref().map(|w| w.value),
        worst,
        seed,
        passes: finite && excluded_ok && margin >= 0.0,
        notes,
    })
}

/// `∏(1 − |Φ_i(z)|²) / ∏(1 − |z_i|²)`.
pub fn schwarz_ratio(phi: &PolySymbol, z: &[Complex64]) -> Result<f64> {
    let v = phi.eval(z)?;
    let num: f64 = v.iter().map(|w| 1.0 - w.norm_sqr()).product();
    let den: f64 = z.iter().map(|w| 1.0 - w.norm_sqr()).product();
    Ok(num / den)
}

/// `(C_floor/k!)^k`.
pub fn schwarz_constant(k: usize, c_floor: f64) -> f64 {
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    (c_floor / fact).powi(k as i32)
}

/// Checks `∏(1 − |Φ_i|²) ≥ (C/k!)^k ∏(1 − |z_i|²)` on `samples` points of
/// `D^k ∩ {|z_j − ζ_j| < radius}`, after verifying `|det d_zΦ| ≥ C` there.
pub fn schwarz_product_check<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    center: &TorusPoint,
    radius: f64,
    c_floor: f64,
    samples: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let k = phi.n_in();
    if phi.n_out() != k || center.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: if phi.n_out() != k { phi.n_out() } else { center.dim() },
        });
    }
    if !(radius > 0.0) || !(c_floor > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument("radius, floor and sample count must be positive".into()));
    }
    let z0 = center.point();
    let bound = schwarz_constant(k, c_floor);
    let tasks = samples.div_ceil(BATCH);
    let parts = exec.run(tasks, |b| -> Result<(f64, Option<WorstSample>)> {
        let mut rng = batch_rng(seed, &[TAG_LAB, 2], b as u64);
        let mut z = vec![Complex64::new(0.0, 0.0); k];
        let mut min_det = f64::INFINITY;
        let mut worst: Option<WorstSample> = None;
        for _ in 0..BATCH.min(samples - b * BATCH) {
            near_sample(&z0, radius, &mut rng, &mut z);
            let det = phi.jacobian(&z)?.determinant().norm();
            min_det = min_det.min(det);
            let r = schwarz_ratio(phi, &z)?;
            if worst.as_ref().is_none_or(|w| r < w.value) {
                worst = Some(WorstSample {
                    z: z.clone(),
                    params: vec![radius],
                    value: r,
                });
            }
        }
        Ok((min_det, worst))
    });
    let mut min_det = f64::INFINITY;
    let mut worst: Option<WorstSample> = None;
    for part in parts {
        let (d, w) = part?;
        min_det = min_det.min(d);
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|c| w.value < c.value) {
                worst = Some(w);
            }
        }
    }
    if !(min_det >= c_floor) {
        return Err(Error::JacobianFloor {
            found: min_det,
            floor: c_floor,
        });
    }
    let c = worst.as_ref().map_or(f64::NAN, |w| w.value);
    Ok(PropertyReport {
        property: "schwarz_product".into(),
        samples: samples as u64,
        excluded: 0,
        worst_margin: c - bound,
        empirical_constant: Some(c),
        worst,
        seed,
        passes: c >= bound,
        notes: vec![format!("min |det dΦ| = {min_det}, asserted constant (C/k!)^k = {bound}")],
    })
}

/// Fits the sublevel exponent of `f` at `η` for `β = 0` and checks it
/// against the sandwich `[n+1, (3n+1)/2]`, widened by `slack`.
///
/// Requires `f(ζ) = η` with every Julia–Carathéodory derivative at `ζ`
/// real and positive.
pub fn upper_bound_battery<E: Executor>(
    exec: &E,
    f: &Polynomial,
    zeta: &TorusPoint,
    eta: Complex64,
    deltas: &[f64],
    slack: f64,
    opts: &SublevelOptions,
) -> Result<PropertyReport> {
    let jc_tol = 1e-6;
    let jc = jc_check(f, zeta, eta, opts.contact.contact_tol, jc_tol)?;
    if !jc.passes || jc.values.iter().any(|v| !(v.re > jc_tol)) {
        return Err(Error::InvalidArgument(format!(
            "Julia–Carathéodory derivatives {:?} are not all positive",
            jc.values
        )));
    }
    let n = f.n_vars() as f64;
    let (lo, hi) = (n + 1.0 - slack, (3.0 * n + 1.0) / 2.0 + slack);
    let fit = fit_exponent(exec, f, eta, WeightParam::lebesgue(), deltas, opts)?;
    let margin = (fit.slope - lo).min(hi - fit.slope);
    Ok(PropertyReport {
        property: "sublevel_sandwich".into(),
        samples: fit.points.iter().map(|p| p.estimate.samples).sum(),
        excluded: fit.used.iter().filter(|u| !**u).count() as u64,
        worst_margin: margin,
        empirical_constant: Some(fit.slope),
        worst: None,
        seed: opts.estimator.seed,
        passes: margin >= 0.0,
        notes: vec![format!(
            "slope {:.4} ± {:.4}, window [{lo}, {hi}]",
            fit.slope, fit.slope_stderr
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::EstimatorConfig;
    use crate::exec::Sequential;
    use crate::symbols::catalog::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn deltas() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.01, 0.001]
    }

    #[test]
    fn mobius_identity_has_constant_one() {
        let fam = FixedPolynomial(Polynomial::variable(1, 0));
        let r = mobius_margin_check(&fam, &[0.0], &deltas(), 64).unwrap();
        assert!((r.empirical_constant.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.passes);
    }

    #[test]
    fn mobius_square_at_least_one() {
        let fam = FixedPolynomial(Polynomial::monomial(c(1.0), &[2]));
        let r = mobius_margin_check(&fam, &[0.0], &deltas(), 64).unwrap();
        let k = r.empirical_constant.unwrap();
        // 1 − (1−δ)² = δ(2 − δ)
        assert!((k - (2.0 - 0.2)).abs() < 1e-9, "{k}");
        assert!(r.passes);
    }

    #[test]
    fn mobius_shift_beats_floor() {
        let ks: Vec<f64> = (0..=9).map(|i| 0.1 * i as f64).collect();
        let r = mobius_margin_check(&MobiusShift, &ks, &deltas(), 128).unwrap();
        let k = r.empirical_constant.unwrap();
        assert!(k >= 0.05, "{k}");
        assert!(r.worst_margin >= 0.0);
        assert!(r.passes);
        let w = r.worst.unwrap();
        let again = mobius_sample(&MobiusShift, w.z[0], w.params[0], w.params[1]);
        assert!((again - k).abs() < 1e-10);
        assert!((again - 0.05 - r.worst_margin).abs() < 1e-10);
    }

    #[test]
    fn mobius_rejects_non_self_map() {
        let fam = FixedPolynomial(Polynomial::monomial(c(1.2), &[1]));
        assert!(matches!(
            mobius_margin_check(&fam, &[0.0], &deltas(), 16),
            Err(Error::SymbolNotSelfMap { .. })
        ));
    }

    #[test]
    fn linearization_linear_is_exact() {
        let f = Polynomial::from_terms(2, [(vec![1, 0], c(0.3)), (vec![0, 1], c(0.7))]).unwrap();
        let r = linearization_bound_check(&Sequential, &f, &TorusPoint::ones(2), c(1.0), &[0.2, 0.1, 0.05], 5000, 1, 1e-8)
            .unwrap();
        assert!((r.empirical_constant.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.passes);
    }

    #[test]
    fn linearization_product_stabilizes() {
        let r = linearization_bound_check(
            &Sequential,
            &product(2),
            &TorusPoint::ones(2),
            c(1.0),
            &[0.2, 0.1, 0.05],
            20_000,
            2,
            1e-8,
        )
        .unwrap();
        let k = r.empirical_constant.unwrap();
        assert!(k.is_finite() && k < 10.0, "{k}");
        assert!(r.passes, "{:?}", r.notes);
        let w = r.worst.unwrap();
        let grad = vec![c(1.0), c(1.0)];
        let again = linearization_ratio(&product(2), &grad, &TorusPoint::ones(2).point(), &w.z).unwrap();
        assert!((again - k).abs() < 1e-10);
    }

    #[test]
    fn linearization_square_is_finite() {
        let f = Polynomial::monomial(c(1.0), &[2]);
        let r = linearization_bound_check(&Sequential, &f, &TorusPoint::ones(1), c(1.0), &[0.2, 0.1, 0.05], 20_000, 3, 1e-8)
            .unwrap();
        // |z² − 1| / |2(z − 1)| = |z + 1|/2 < 1 on D
        assert!(r.empirical_constant.unwrap() <= 1.0);
        assert!(r.passes);
    }

    #[test]
    fn linearization_needs_contact() {
        let err = linearization_bound_check(&Sequential, &product(2), &TorusPoint::ones(2), c(-1.0), &[0.1], 10, 0, 1e-8);
        assert!(matches!(err, Err(Error::ContactRequired { .. })));
    }

    #[test]
    fn schwarz_identity_and_swap_are_equalities() {
        for phi in [identity(2), swap()] {
            let r = schwarz_product_check(&Sequential, &phi, &TorusPoint::ones(2), 0.3, 1.0, 10_000, 4).unwrap();
            assert!((r.empirical_constant.unwrap() - 1.0).abs() < 1e-9);
            assert!(r.passes);
            assert!((r.worst_margin - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn schwarz_square_second_holds() {
        let phi = square_second();
        let r = schwarz_product_check(&Sequential, &phi, &TorusPoint::ones(2), 0.05, 1.9, 100_000, 5).unwrap();
        assert!(r.passes);
        // (1 − |z2|⁴)/(1 − |z2|²) = 1 + |z2|² ≥ 1.9 here
        assert!(r.empirical_constant.unwrap() >= 1.9);
        let w = r.worst.unwrap();
        assert!((schwarz_ratio(&phi, &w.z).unwrap() - r.empirical_constant.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn schwarz_rejects_low_jacobian() {
        let err = schwarz_product_check(&Sequential, &square_second(), &TorusPoint::ones(2), 0.5, 1.9, 1000, 5);
        assert!(matches!(err, Err(Error::JacobianFloor { .. })));
    }

    #[test]
    fn sandwich_for_product() {
        let opts = SublevelOptions {
            estimator: EstimatorConfig {
                budget: 200_000,
                seed: 6,
                ..Default::default()
            },
            ..Default::default()
        };
        let d: Vec<f64> = (4..10).map(|k| 2f64.powi(-k)).collect();
        let r = upper_bound_battery(&Sequential, &product(2), &TorusPoint::ones(2), c(1.0), &d, 0.2, &opts).unwrap();
        assert!(r.passes, "{:?}", r.notes);
        assert!((r.empirical_constant.unwrap() - 3.0).abs() < 0.15);
    }

    #[test]
    fn sandwich_requires_positive_jc() {
        // ∂/∂z2 vanishes
        let f = Polynomial::from_terms(2, [(vec![1, 0], c(1.0))]).unwrap();
        let err = upper_bound_battery(
            &Sequential,
            &f,
            &TorusPoint::ones(2),
            c(1.0),
            &deltas(),
            0.2,
            &SublevelOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
