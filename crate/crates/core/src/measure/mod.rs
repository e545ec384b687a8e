//! The weighted area measure `dA_β = (β+1)(1−|z|²)^β dA` on the unit disc
//! (with `dA` normalized so `A(D) = 1`), its product `dV_β` on `Dⁿ`, and
//! Carleson boxes `S(ξ,δ) = {z : |z_j − ξ_j| < δ_j}`.

pub mod quad;
pub mod region;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::symbols::TorusPoint;
use crate::{Error, Result};

pub use region::{restricted_sample, AngleSpec, CoordRegion, Region, RegionUnion};

/// Default absolute tolerance for the cap quadrature.
pub const QUAD_TOL: f64 = 1e-8;

/// Smallest supported weight exponent.
pub const MIN_BETA: f64 = -0.95;

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_MAX_PANELS: usize = 4000;

/// The Bergman weight `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct WeightParam {
    beta: f64,
}

impl WeightParam {
    /// Accepts `β ∈ [−0.95, ∞)`, finite.
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta >= MIN_BETA {
            Ok(Self { beta })
        } else {
            Err(Error::InvalidWeight(beta))
        }
    }

    /// The unweighted (Lebesgue) case `β = 0`.
    pub fn lebesgue() -> Self {
        Self { beta: 0.0 }
    }

    pub fn beta(self) -> f64 {
        self.beta
    }

    /// `β + 1`, the exponent of the band mass.
    pub fn order(self) -> f64 {
        self.beta + 1.0
    }

    /// `A_β({1 − |z|² ≤ t})` = `t^{β+1}`.
    pub fn band_mass(self, t: f64) -> f64 {
        t.clamp(0.0, 1.0).powf(self.order())
    }
}

impl TryFrom<f64> for WeightParam {
    type Error = Error;
    fn try_from(beta: f64) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<WeightParam> for f64 {
    fn from(w: WeightParam) -> f64 {
        w.beta
    }
}

/// Inverse CDF of the radial marginal of `dA_β`:
/// `r = sqrt(1 − (1−u)^{1/(β+1)})`.
pub fn radial_sample(w: WeightParam, u: f64) -> f64 {
    (1.0 - (1.0 - u).powf(1.0 / w.order())).max(0.0).sqrt()
}

/// Draws `r ∈ [1−s, 1)` from `dA_β` conditioned on that band, given
/// `t0 = 1 − (1−s)²`.
#[inline]
pub(crate) fn band_radius(w: WeightParam, t0: f64, u: f64) -> f64 {
    let t = t0 * (1.0 - u).powf(1.0 / w.order());
    (1.0 - t).max(0.0).sqrt()
}

/// Fills `out` with one `V_β`-distributed point of `Dⁿ`.
pub fn sample_polydisc_into<R: Rng + ?Sized>(w: WeightParam, rng: &mut R, out: &mut [Complex64]) {
    for z in out.iter_mut() {
        let r = radial_sample(w, rng.gen::<f64>());
        *z = Complex64::from_polar(r, TAU * rng.gen::<f64>());
    }
}

pub fn sample_polydisc<R: Rng + ?Sized>(n: usize, w: WeightParam, rng: &mut R) -> Vec<Complex64> {
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n];
    sample_polydisc_into(w, rng, &mut out);
    out
}

/// `A_β(D(a,δ) ∩ D)` with the default tolerance.
pub fn disc_cap_measure(a: Complex64, delta: f64, w: WeightParam) -> Result<f64> {
    disc_cap_measure_tol(a, delta, w, QUAD_TOL)
}

/// `A_β(D(a,δ) ∩ D)`.
///
/// With `t = (1−r²)^{β+1}` the weight becomes uniform and the measure is
/// `∫₀¹ p(r(t)) dt`, where `p(r)` is the fraction of the circle `|z| = r`
/// inside `D(a,δ)`, known in closed form. The remaining 1-D integral is
/// adaptive Gauss–Kronrod with breakpoints where the circle enters and
/// leaves the cap. The error target is `min(quad_tol, 1e−10·|I|)` so that
/// tiny caps are still resolved to relative accuracy.
pub fn disc_cap_measure_tol(a: Complex64, delta: f64, w: WeightParam, quad_tol: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidBox(format!("radius {delta} must be positive and finite")));
    }
    let rho = a.norm();
    if rho >= 1.0 + delta {
        return Ok(0.0);
    }
    if delta >= rho + 1.0 {
        return Ok(1.0);
    }
    if rho < 1e-300 {
        return Ok(w.band_mass(1.0) - w.band_mass(1.0 - delta * delta));
    }
    let order = w.order();
    let fraction = |r: f64| -> f64 {
        let x = (delta - r + rho) * (delta + r - rho) / (4.0 * r * rho);
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            2.0 * FRAC_1_PI * x.sqrt().asin()
        }
    };
    let r_of_t = |t: f64| (1.0 - t.powf(1.0 / order)).max(0.0).sqrt();
    let t_of_r = |r: f64| (1.0 - r * r).max(0.0).powf(order);
    let integrand = |t: f64| fraction(r_of_t(t));

    // The cap meets the circles with r in (|ρ−δ|, ρ+δ); full circles lie
    // inside when r < δ − ρ.
    let r_lo = (rho - delta).abs();
    let r_hi = (rho + delta).min(1.0);
    let t_lo = t_of_r(r_hi);
    let t_hi = t_of_r(r_lo);
    let full_inner = if delta > rho { t_of_r(0.0) - t_hi } else { 0.0 };
    let crude = (t_hi - t_lo).abs();
    let tol = quad_tol.min(QUAD_REL_TOL * crude.max(f64::MIN_POSITIVE));
    let part = quad::integrate(integrand, t_lo, t_hi, &[], tol, QUAD_REL_TOL, QUAD_MAX_PANELS)?;
    Ok(part + full_inner)
}

/// A Carleson box `S(ξ,δ)`. Radii `δ_j ≥ 2` cover the whole disc.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CarlesonBox {
    center: TorusPoint,
    radii: Vec<f64>,
}

impl CarlesonBox {
    pub fn new(center: TorusPoint, radii: Vec<f64>) -> Result<Self> {
        if center.dim() != radii.len() {
            return Err(Error::DimensionMismatch {
                expected: center.dim(),
                got: radii.len(),
            });
        }
        if let Some(&d) = radii.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidBox(format!("radius {d} must be positive and finite")));
        }
        Ok(Self { center, radii })
    }

    pub fn center(&self) -> &TorusPoint {
        &self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    /// Strict membership `|z_j − ξ_j| < δ_j` for all `j`.
    pub fn contains(&self, z: &[Complex64]) -> bool {
        z.iter()
            .zip(self.center.angles())
            .zip(&self.radii)
            .all(|((zj, &t), &d)| (zj - Complex64::cis(t)).norm_sqr() < d * d)
    }
}

/// `V_β(S(ξ,δ)) = ∏_j A_β(D(ξ_j,δ_j) ∩ D)`.
pub fn carleson_box_measure(bx: &CarlesonBox, w: WeightParam) -> Result<f64> {
    carleson_box_measure_tol(bx, w, QUAD_TOL)
}

pub fn carleson_box_measure_tol(bx: &CarlesonBox, w: WeightParam, quad_tol: f64) -> Result<f64> {
    bx.center
        .point()
        .iter()
        .zip(&bx.radii)
        .try_fold(1.0, |acc, (&xi, &d)| Ok(acc * disc_cap_measure_tol(xi, d, w, quad_tol)?))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(beta: f64) -> WeightParam {
        WeightParam::new(beta).unwrap()
    }

    /// Midpoint indicator sum over the cap's bounding square, `m × m` cells.
    pub(crate) fn grid_cap_oracle(a: Complex64, delta: f64, m: usize) -> f64 {
        let (x0, y0) = (a.re - delta, a.im - delta);
        let h = 2.0 * delta / m as f64;
        let mut count = 0u64;
        for i in 0..m {
            let x = x0 + (i as f64 + 0.5) * h;
            for j in 0..m {
                let y = y0 + (j as f64 + 0.5) * h;
                let z = Complex64::new(x, y);
                if z.norm_sqr() < 1.0 && (z - a).norm_sqr() < delta * delta {
                    count += 1;
                }
            }
        }
        count as f64 * h * h * FRAC_1_PI
    }

    #[test]
    fn weight_range() {
        assert!(WeightParam::new(-0.95).is_ok());
        assert_eq!(WeightParam::new(-0.96), Err(Error::InvalidWeight(-0.96)));
        assert!(WeightParam::new(-1.0).is_err());
        assert!(WeightParam::new(f64::NAN).is_err());
    }

    #[test]
    fn radial_sample_examples() {
        assert_eq!(radial_sample(w(0.0), 0.0), 0.0);
        assert!((radial_sample(w(0.0), 0.75) - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((radial_sample(w(1.0), 0.75) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cap_examples() {
        let a0 = Complex64::new(0.0, 0.0);
        assert!((disc_cap_measure(a0, 0.5, w(0.0)).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(disc_cap_measure(Complex64::new(2.0, 0.0), 0.5, w(0.3)).unwrap(), 0.0);
        let a1 = Complex64::new(1.0, 0.0);
        let exact = disc_cap_measure(a1, 0.25, w(0.0)).unwrap();
        let oracle = grid_cap_oracle(a1, 0.25, 2048);
        assert!((exact - oracle).abs() < 1e-4, "{exact} vs {oracle}");
    }

    #[test]
    fn interior_caps_are_exact_discs() {
        for &(a, d) in &[(Complex64::new(0.3, 0.2), 0.4), (Complex64::new(-0.1, 0.5), 0.3), (Complex64::new(0.0, 0.7), 0.29)] {
            let v = disc_cap_measure(a, d, w(0.0)).unwrap();
            assert!((v - d * d).abs() < QUAD_TOL, "{v} vs {}", d * d);
        }
    }

    #[test]
    fn off_center_caps_match_grid_oracle_for_weights() {
        // Weighted grid oracle with the density evaluated at cell centers.
        let a = Complex64::from_polar(0.9, 0.7);
        let d = 0.35;
        for &beta in &[-0.5, 1.0] {
            let m = 1500;
            let h = 2.0 * d / m as f64;
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let z = Complex64::new(a.re - d + (i as f64 + 0.5) * h, a.im - d + (j as f64 + 0.5) * h);
                    let q = 1.0 - z.norm_sqr();
                    if q > 0.0 && (z - a).norm() < d {
                        acc += (beta + 1.0) * q.powf(beta);
                    }
                }
            }
            let oracle = acc * h * h * FRAC_1_PI;
            let v = disc_cap_measure(a, d, w(beta)).unwrap();
            assert!((v - oracle).abs() / v < 2e-2, "β={beta}: {v} vs {oracle}");
        }
    }

    #[test]
    fn cap_is_monotone_in_radius() {
        let a = Complex64::new(1.0, 0.0);
        for &beta in &[-0.9, -0.5, 0.0, 1.0, 3.0] {
            let mut last = 0.0;
            for k in 1..=60 {
                let d = k as f64 * 0.035;
                let v = disc_cap_measure(a, d, w(beta)).unwrap();
                assert!(v >= last - 1e-12, "β={beta}, δ={d}");
                last = v;
            }
            assert!((last - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_cap_scaling_slope() {
        for &beta in &[-0.5, 0.0, 1.0] {
            let pts: Vec<(f64, f64)> = (3..=9)
                .map(|k| {
                    let d = 2f64.powi(-k);
                    (d.ln(), disc_cap_measure(Complex64::new(1.0, 0.0), d, w(beta)).unwrap().ln())
                })
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            assert!((sxy / sxx - (beta + 2.0)).abs() < 0.05);
        }
    }

    #[test]
    fn box_measure_examples() {
        let one = TorusPoint::ones(1);
        let mut last = 0.0;
        for k in 1..=10 {
            let d = k as f64 * 0.1;
            let v = carleson_box_measure(&CarlesonBox::new(one.clone(), alloc::vec![d]).unwrap(), w(0.0)).unwrap();
            assert!(v > last && v < 1.0);
            last = v;
        }
        let full = CarlesonBox::new(TorusPoint::new(alloc::vec![0.3, 2.0, 5.0]), alloc::vec![2.0; 3]).unwrap();
        assert_eq!(carleson_box_measure(&full, w(-0.5)).unwrap(), 1.0);
        let two = CarlesonBox::new(TorusPoint::ones(2), alloc::vec![0.25, 0.25]).unwrap();
        let single = grid_cap_oracle(Complex64::new(1.0, 0.0), 0.25, 2048);
        assert!((carleson_box_measure(&two, w(0.0)).unwrap() - single * single).abs() < 1e-4);
        assert!(CarlesonBox::new(TorusPoint::ones(2), alloc::vec![0.0, 0.5]).is_err());
    }

    fn mean_sq_modulus(beta: f64, samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let z = sample_polydisc(1, w(beta), &mut rng);
            let x = z[0].norm_sqr();
            s += x;
            s2 += x * x;
        }
        let m = s / samples as f64;
        let var = s2 / samples as f64 - m * m;
        (m, (var / samples as f64).sqrt())
    }

    #[test]
    fn sampler_moments() {
        let (m, se) = mean_sq_modulus(0.0, 1_000_000, 1);
        assert!((m - 0.5).abs() < 3.0 * se);
        // 1-D quadrature oracle of ∫ r²·2(β+1) r (1−r²)^β dr at β = 1.
        let oracle = quad::integrate(|r| r * r * 4.0 * r * (1.0 - r * r), 0.0, 1.0, &[], 1e-14, 0.0, 50).unwrap();
        assert!((oracle - 1.0 / 3.0).abs() < 1e-13);
        let (m, se) = mean_sq_modulus(1.0, 1_000_000, 2);
        assert!((m - oracle).abs() < 3.0 * se);
    }

    #[test]
    fn sampler_matches_box_measure() {
        let bx = CarlesonBox::new(TorusPoint::ones(2), alloc::vec![0.5, 0.5]).unwrap();
        let exact = carleson_box_measure(&bx, w(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| bx.contains(&sample_polydisc(2, w(0.0), &mut rng))).count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact}");
    }
}
