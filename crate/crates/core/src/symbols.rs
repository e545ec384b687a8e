//! Polynomial self-maps of the polydisc.
//!
//! A [`Polynomial`] stores its terms sparsely as `(multi-index, coefficient)`
//! pairs; a [`PolySymbol`] is a vector of them sharing one input dimension.
//! Derivatives are exact coefficient shifts, never finite differences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::torus::{self, SecondOrder, SumOfSquares};
use crate::{Error, Result};

/// Default tolerance of the self-map certificate.
pub const CERT_TOL: f64 = 1e-9;

const CERT_GRID: usize = 64;
const CERT_MAX_POINTS: usize = 1 << 22;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    } else if y <= -PI {
        y += TAU;
    }
    y
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(x: f64) -> f64 {
    let y = x % TAU;
    if y < 0.0 {
        let y = y + TAU;
        if y >= TAU {
            0.0
        } else {
            y
        }
    } else {
        y
    }
}

/// A point `ζ = (e^{iθ₁}, …, e^{iθₙ})` of the torus `Tⁿ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TorusPoint {
    angles: Vec<f64>,
}

impl TorusPoint {
    pub fn new(angles: Vec<f64>) -> Self {
        Self {
            angles: angles.into_iter().map(normalize_angle).collect(),
        }
    }

    /// The point `(1, …, 1)`.
    pub fn ones(n: usize) -> Self {
        Self { angles: vec![0.0; n] }
    }

    /// Projects nonzero complex numbers radially onto the torus.
    pub fn from_complex(z: &[Complex64]) -> Self {
        Self::new(z.iter().map(|w| w.arg()).collect())
    }

    pub fn dim(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn point(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&t| Complex64::cis(t)).collect()
    }

    /// Max-norm distance in angle space, respecting periodicity.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| wrap_angle(a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn ipow(z: Complex64, e: u32) -> Complex64 {
    match e {
        0 => Complex64::new(1.0, 0.0),
        1 => z,
        2 => z * z,
        3 => z * z * z,
        _ => z.powu(e),
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A sparse polynomial in `n_vars` complex variables.
///
/// Terms are kept sorted by multi-index with like terms merged and exact
/// zeros dropped, so structural equality is polynomial equality.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    /// Term-major exponents, `n_vars` per term.
    exps: Vec<u32>,
    coeffs: Vec<Complex64>,
}

/// `f(z) = Σ_k c_k (z^direction)^k`: a polynomial in one monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Collinear {
    /// Primitive exponent vector of the underlying monomial.
    pub direction: Vec<u32>,
    /// The univariate profile `h` as `(power, coefficient)` pairs.
    pub profile: Vec<(u32, Complex64)>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            exps: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn constant(n_vars: usize, c: Complex64) -> Self {
        Self::monomial(c, &vec![0; n_vars])
    }

    /// The coordinate function `z_var`.
    pub fn variable(n_vars: usize, var: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[var] = 1;
        Self::monomial(Complex64::new(1.0, 0.0), &e)
    }

    pub fn monomial(coeff: Complex64, exps: &[u32]) -> Self {
        let mut p = Self {
            n_vars: exps.len(),
            exps: exps.to_vec(),
            coeffs: vec![coeff],
        };
        p.normalize();
        p
    }

    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let mut p = Self::zero(n_vars);
        for (e, c) in terms {
            if e.len() != n_vars {
                return Err(Error::DimensionMismatch {
                    expected: n_vars,
                    got: e.len(),
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidLiteral(format!("non-finite coefficient {c}")));
            }
            p.exps.extend_from_slice(&e);
            p.coeffs.push(c);
        }
        p.normalize();
        Ok(p)
    }

    fn normalize(&mut self) {
        let n = self.n_vars;
        let mut order: Vec<usize> = (0..self.coeffs.len()).collect();
        order.sort_by(|&a, &b| self.exps[a * n..(a + 1) * n].cmp(&self.exps[b * n..(b + 1) * n]));
        let mut exps: Vec<u32> = Vec::with_capacity(self.exps.len());
        let mut coeffs: Vec<Complex64> = Vec::with_capacity(self.coeffs.len());
        for i in order {
            let e = &self.exps[i * n..(i + 1) * n];
            let c = self.coeffs[i];
            match coeffs.len() {
                k if k > 0 && &exps[(k - 1) * n..k * n] == e => coeffs[k - 1] += c,
                _ => {
                    exps.extend_from_slice(e);
                    coeffs.push(c);
                }
            }
        }
        let mut keep_e = Vec::with_capacity(exps.len());
        let mut keep_c = Vec::with_capacity(coeffs.len());
        for (k, c) in coeffs.into_iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                keep_e.extend_from_slice(&exps[k * n..(k + 1) * n]);
                keep_c.push(c);
            }
        }
        self.exps = keep_e;
        self.coeffs = keep_c;
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Complex64)> + '_ {
        let n = self.n_vars;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &c)| (&self.exps[k * n..(k + 1) * n], c))
    }

    /// Direct monomial sum. `z` must have length `n_vars`.
    #[inline]
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.n_vars);
        let n = self.n_vars;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            let mut m = c;
            for (j, &e) in self.exps[k * n..(k + 1) * n].iter().enumerate() {
                if e != 0 {
                    m *= ipow(z[j], e);
                }
            }
            acc += m;
        }
        acc
    }

    /// `∂/∂z_var`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        let n = self.n_vars;
        let mut out = Self::zero(n);
        for (e, c) in self.terms() {
            if e[var] > 0 {
                let mut d = e.to_vec();
                d[var] -= 1;
                out.exps.extend_from_slice(&d);
                out.coeffs.push(c * e[var] as f64);
            }
        }
        out.normalize();
        out
    }

    /// Substitutes `fixed[j]` for every `j` where it is `Some`, returning a
    /// polynomial in the remaining variables (in their original order).
    pub fn restrict(&self, fixed: &[Option<Complex64>]) -> Result<Polynomial> {
        if fixed.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                got: fixed.len(),
            });
        }
        let free = fixed.iter().filter(|v| v.is_none()).count();
        let mut out = Self::zero(free);
        for (e, c) in self.terms() {
            let mut coeff = c;
            for (j, v) in fixed.iter().enumerate() {
                if let Some(v) = v {
                    coeff *= ipow(*v, e[j]);
                }
            }
            out.exps
                .extend(e.iter().zip(fixed).filter(|(_, v)| v.is_none()).map(|(&x, _)| x));
            out.coeffs.push(coeff);
        }
        out.normalize();
        Ok(out)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms().map(|(e, _)| e[var]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    /// `Σ |c_α|`, an upper bound for the modulus on the closed polydisc.
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Per-angle Lipschitz constants of `θ ↦ p(e^{iθ})`: `Σ |c_α| α_j`.
    pub fn angle_lipschitz(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars];
        for (e, c) in self.terms() {
            for (j, &x) in e.iter().enumerate() {
                out[j] += c.norm() * x as f64;
            }
        }
        out
    }

    /// Detects `f = h(z^α)` for a single primitive multi-index `α`.
    pub fn collinear(&self) -> Option<Collinear> {
        let mut direction: Option<Vec<u32>> = None;
        let mut profile = Vec::new();
        for (e, c) in self.terms() {
            let g = e.iter().fold(0, |g, &x| gcd(g, x));
            if g == 0 {
                profile.push((0, c));
                continue;
            }
            let prim: Vec<u32> = e.iter().map(|&x| x / g).collect();
            match &direction {
                None => direction = Some(prim),
                Some(d) if *d == prim => {}
                Some(_) => return None,
            }
            profile.push((g, c));
        }
        let direction = direction?;
        profile.sort_by_key(|t| t.0);
        Some(Collinear { direction, profile })
    }
}

/// A polynomial map `C^{n_in} → C^{n_out}`, normally a certified self-map
/// of the polydisc.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySymbol {
    n_in: usize,
    components: Vec<Polynomial>,
    /// `gradient[i][j] = ∂Φ_i/∂z_j`.
    gradient: Vec<Vec<Polynomial>>,
}

impl PolySymbol {
    /// Builds the map and certifies `|Φ_i| ≤ 1 + CERT_TOL` on the torus.
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        Self::with_cert_tol(components, CERT_TOL)
    }

    pub fn with_cert_tol(components: Vec<Polynomial>, cert_tol: f64) -> Result<Self> {
        let s = Self::without_certificate(components)?;
        s.certify(cert_tol)?;
        Ok(s)
    }

    /// Builds the map without the self-map certificate (derivative maps,
    /// restrictions and test fixtures).
    pub fn without_certificate(components: Vec<Polynomial>) -> Result<Self> {
        let n_in = match components.first() {
            Some(p) => p.n_vars(),
            None => return Err(Error::InvalidLiteral("symbol has no components".into())),
        };
        if let Some(bad) = components.iter().find(|p| p.n_vars() != n_in) {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: bad.n_vars(),
            });
        }
        let gradient = components
            .iter()
            .map(|p| (0..n_in).map(|j| p.derivative(j)).collect())
            .collect();
        Ok(Self {
            n_in,
            components,
            gradient,
        })
    }

    /// Parses the literal format: one list per component, each row
    /// `[re, im, α_1, …, α_n]`. Exponents must be nonnegative integers.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::from_rows_with_cert_tol(rows, CERT_TOL)
    }

    pub fn from_rows_with_cert_tol(rows: &[Vec<Vec<f64>>], cert_tol: f64) -> Result<Self> {
        let n_in = rows
            .iter()
            .flatten()
            .map(|r| r.len())
            .next()
            .ok_or_else(|| Error::InvalidLiteral("no terms: cannot infer the input dimension".into()))?;
        if n_in < 3 {
            return Err(Error::InvalidLiteral(format!(
                "row of length {n_in}; expected [re, im, α_1, …, α_n] with n ≥ 1"
            )));
        }
        let n_in = n_in - 2;
        let mut components = Vec::with_capacity(rows.len());
        for comp in rows {
            let mut terms = Vec::with_capacity(comp.len());
            for row in comp {
                if row.len() != n_in + 2 {
                    return Err(Error::InvalidLiteral(format!(
                        "row {row:?} has length {}, expected {}",
                        row.len(),
                        n_in + 2
                    )));
                }
                let exps = row[2..]
                    .iter()
                    .map(|&a| {
                        if a >= 0.0 && a.fract() == 0.0 && a <= u32::MAX as f64 {
                            Ok(a as u32)
                        } else {
                            Err(Error::InvalidLiteral(format!("exponent {a} is not a nonnegative integer")))
                        }
                    })
                    .collect::<Result<Vec<u32>>>()?;
                terms.push((exps, Complex64::new(row[0], row[1])));
            }
            components.push(Polynomial::from_terms(n_in, terms)?);
        }
        Self::with_cert_tol(components, cert_tol)
    }

    /// Inverse of [`PolySymbol::from_rows`].
    pub fn to_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.components
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(e, c)| {
                        let mut row = vec![c.re, c.im];
                        row.extend(e.iter().map(|&x| x as f64));
                        row
                    })
                    .collect()
            })
            .collect()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    /// `∂Φ_i/∂z_j` as a polynomial.
    pub fn partial(&self, i: usize, j: usize) -> &Polynomial {
        &self.gradient[i][j]
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.n_in {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n_in,
                got: len,
            })
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(z.len())?;
        Ok(self.components.iter().map(|p| p.eval(z)).collect())
    }

    /// Allocation-free evaluation for sampling loops. Panics on length
    /// mismatch.
    #[inline]
    pub fn eval_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(z.len(), self.n_in);
        for (o, p) in out.iter_mut().zip(&self.components) {
            *o = p.eval(z);
        }
    }

    /// The complex Jacobian `(∂Φ_i/∂z_j)`, `n_out × n_in`.
    pub fn jacobian(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>> {
        self.check_dim(z.len())?;
        Ok(DMatrix::from_fn(self.n_out(), self.n_in, |i, j| self.gradient[i][j].eval(z)))
    }

    /// Jacobian rows restricted to the component indices `rows`.
    pub fn jacobian_rows(&self, z: &[Complex64], rows: &[usize]) -> Result<DMatrix<Complex64>> {
        self.check_dim(z.len())?;
        Ok(DMatrix::from_fn(rows.len(), self.n_in, |r, j| self.gradient[rows[r]][j].eval(z)))
    }

    /// Fixes the variables where `fixed[j]` is `Some`.
    pub fn restrict(&self, fixed: &[Option<Complex64>]) -> Result<PolySymbol> {
        self.check_dim(fixed.len())?;
        if fixed.iter().all(|v| v.is_some()) {
            return Err(Error::InvalidArgument("restriction must leave at least one free variable".into()));
        }
        let comps = self
            .components
            .iter()
            .map(|p| p.restrict(fixed))
            .collect::<Result<Vec<_>>>()?;
        Self::without_certificate(comps)
    }

    /// The sub-map `Φ_I`.
    pub fn select(&self, indices: &[usize]) -> Result<PolySymbol> {
        let comps = indices
            .iter()
            .map(|&i| {
                self.components.get(i).cloned().ok_or(Error::DimensionMismatch {
                    expected: self.n_out(),
                    got: i + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::without_certificate(comps)
    }

    /// Checks `max_{Tⁿ} |Φ_i| ≤ 1 + cert_tol` for every component.
    ///
    /// Components with `Σ|c_α| ≤ 1 + cert_tol` pass outright. The others
    /// are scanned on a torus grid (64 points per angle, fewer when `64ⁿ`
    /// exceeds 2²² points); grid points that are local maxima and whose
    /// per-cell Lipschitz bound could exceed the threshold are refined by
    /// Newton ascent.
    pub fn certify(&self, cert_tol: f64) -> Result<()> {
        let limit = 1.0 + cert_tol;
        let n = self.n_in;
        for (i, p) in self.components.iter().enumerate() {
            if p.coeff_l1() <= limit {
                continue;
            }
            let per = grid_points_per_angle(n);
            let h = TAU / per as f64;
            let reach: f64 = p.angle_lipschitz().iter().map(|l| l * h / 2.0).sum();
            let cis: Vec<Complex64> = (0..per).map(|k| Complex64::cis(k as f64 * h)).collect();
            let mut idx = vec![0usize; n];
            let mut z = vec![Complex64::new(1.0, 0.0); n];
            let modulus_at = |idx: &[usize], z: &mut [Complex64]| {
                for (zj, &k) in z.iter_mut().zip(idx) {
                    *zj = cis[k];
                }
                p.eval(z).norm()
            };
            let so = SumOfSquares::new(vec![SecondOrder::new(p)]);
            loop {
                let m = modulus_at(&idx, &mut z);
                let angles = || idx.iter().map(|&k| k as f64 * h).collect::<Vec<_>>();
                if m > limit {
                    return Err(Error::SymbolNotSelfMap {
                        component: i,
                        modulus: m,
                        angles: angles(),
                    });
                }
                if m + reach > limit && is_grid_local_max(&idx, per, m, |nb| modulus_at(nb, &mut z.clone())) {
                    let (theta, val) = torus::maximize(&so, &angles(), 60);
                    let peak = val.max(0.0).sqrt();
                    if peak > limit {
                        return Err(Error::SymbolNotSelfMap {
                            component: i,
                            modulus: peak,
                            angles: theta.into_iter().map(normalize_angle).collect(),
                        });
                    }
                }
                if !odometer(&mut idx, per) {
                    break;
                }
            }
        }
        Ok(())
    }
}

fn grid_points_per_angle(n: usize) -> usize {
    let mut per = CERT_GRID;
    while per > 2 && per.checked_pow(n as u32).is_none_or(|t| t > CERT_MAX_POINTS) {
        per -= 1;
    }
    per
}

/// Advances a base-`per` counter; returns false after the last index.
pub(crate) fn odometer(idx: &mut [usize], per: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < per {
            return true;
        }
        *d = 0;
    }
    false
}

fn is_grid_local_max(idx: &[usize], per: usize, m: f64, mut value: impl FnMut(&[usize]) -> f64) -> bool {
    let mut nb = idx.to_vec();
    for j in 0..idx.len() {
        for step in [1, per - 1] {
            nb[j] = (idx[j] + step) % per;
            if value(&nb) > m {
                return false;
            }
        }
        nb[j] = idx[j];
    }
    true
}

/// Named symbols used throughout the tests and the experiment battery.
pub mod catalog {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit(n: usize, j: usize, power: u32) -> Vec<u32> {
        let mut e = vec![0; n];
        e[j] = power;
        e
    }

    /// `z ↦ z` on `Dⁿ`.
    pub fn identity(n: usize) -> PolySymbol {
        PolySymbol::new((0..n).map(|j| Polynomial::variable(n, j)).collect()).expect("identity is a self-map")
    }

    /// The scalar `f(z) = z_1 ⋯ z_n`.
    pub fn product(n: usize) -> Polynomial {
        Polynomial::monomial(c(1.0), &vec![1; n])
    }

    /// The scalar `g(z) = (z_1^n + … + z_n^n)/n`.
    pub fn power_sum(n: usize) -> Polynomial {
        Polynomial::from_terms(n, (0..n).map(|j| (unit(n, j, n as u32), c(1.0 / n as f64))))
            .expect("dimensions agree")
    }

    /// The scalar `(z_1 + … + z_n)/n`.
    pub fn mean(n: usize) -> Polynomial {
        Polynomial::from_terms(n, (0..n).map(|j| (unit(n, j, 1), c(1.0 / n as f64)))).expect("dimensions agree")
    }

    /// `(φ, …, φ, 0)` with `n = φ.n_vars()` components.
    pub fn repeated(phi: &Polynomial) -> PolySymbol {
        let n = phi.n_vars();
        let mut comps = vec![phi.clone(); n.saturating_sub(1)];
        comps.push(Polynomial::zero(n));
        PolySymbol::new(comps).expect("repeated self-map")
    }

    /// A scalar polynomial as a one-component symbol.
    pub fn scalar(f: &Polynomial) -> PolySymbol {
        PolySymbol::new(vec![f.clone()]).expect("scalar self-map")
    }

    /// `((z_1 + z_2)/2, z_1 z_2)`: contact along the diagonal of `T²`.
    pub fn diagonal_pair() -> PolySymbol {
        PolySymbol::new(vec![mean(2), product(2)]).expect("self-map")
    }

    /// `(z_1, z_2²)`.
    pub fn square_second() -> PolySymbol {
        PolySymbol::new(vec![Polynomial::variable(2, 0), Polynomial::monomial(c(1.0), &[0, 2])]).expect("self-map")
    }

    /// `(z_1 z_2, z_1 z_2 / 2)`: the second component never reaches `T`.
    pub fn damped_product_pair() -> PolySymbol {
        PolySymbol::new(vec![product(2), Polynomial::monomial(c(0.5), &[1, 1])]).expect("self-map")
    }

    /// `(z_1 z_2, z_1 z_2, 0)` on `D³`.
    pub fn rank_one_triple() -> PolySymbol {
        let p = Polynomial::monomial(c(1.0), &[1, 1, 0]);
        PolySymbol::new(vec![p.clone(), p, Polynomial::zero(3)]).expect("self-map")
    }

    /// `(z_2, z_1)`.
    pub fn swap() -> PolySymbol {
        PolySymbol::new(vec![Polynomial::variable(2, 1), Polynomial::variable(2, 0)]).expect("self-map")
    }

    /// `(α z_1, z_2)` with `α = e^{i angle}`.
    pub fn rotation(angle: f64) -> PolySymbol {
        PolySymbol::new(vec![
            Polynomial::monomial(Complex64::cis(angle), &[1, 0]),
            Polynomial::variable(2, 1),
        ])
        .expect("self-map")
    }

    /// `(z_1/2, z_2/2)`.
    pub fn half_scaling() -> PolySymbol {
        PolySymbol::new(vec![
            Polynomial::monomial(c(0.5), &[1, 0]),
            Polynomial::monomial(c(0.5), &[0, 1]),
        ])
        .expect("self-map")
    }

    /// `(z_1/2, z_2)`.
    pub fn half_first() -> PolySymbol {
        PolySymbol::new(vec![Polynomial::monomial(c(0.5), &[1, 0]), Polynomial::variable(2, 1)]).expect("self-map")
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let id = identity(2);
        assert_eq!(id.eval(&[cx(0.5, 0.0), cx(0.5, 0.0)]).unwrap(), vec![cx(0.5, 0.0), cx(0.5, 0.0)]);

        let f = scalar(&product(2));
        let v = f.eval(&[cx(0.0, 1.0), cx(0.0, 1.0)]).unwrap();
        assert!((v[0] - cx(-1.0, 0.0)).norm() < 1e-15);

        let g = scalar(&power_sum(2));
        let v = g.eval(&[cx(1.0, 0.0), cx(1.0, 0.0)]).unwrap();
        assert!((v[0] - cx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let id = identity(2);
        assert_eq!(
            id.eval(&[cx(0.0, 0.0)]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(id.jacobian(&[cx(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let id = identity(3);
        let z = [cx(0.1, 0.2), cx(-0.3, 0.0), cx(0.0, 0.5)];
        let j = id.jacobian(&z).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_eq!(j[(r, c)], cx(expect, 0.0));
            }
        }

        let f = scalar(&product(2));
        let (a, b) = (Complex64::cis(0.4), Complex64::cis(-1.1));
        let j = f.jacobian(&[a, b]).unwrap();
        assert!((j[(0, 0)] - b).norm() < 1e-15);
        assert!((j[(0, 1)] - a).norm() < 1e-15);
    }

    #[test]
    fn restrict_examples() {
        let f = product(2);
        let r = f.restrict(&[None, Some(cx(1.0, 0.0))]).unwrap();
        assert_eq!(r, Polynomial::variable(1, 0));
        let r = f.restrict(&[None, Some(cx(0.0, 0.0))]).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn restrict_power_sum_matches_fold_oracle() {
        // g(z1, i) = z1²/2 − 1/2, checked against direct evaluation at 20 points.
        let g = power_sum(2);
        let r = g.restrict(&[None, Some(cx(0.0, 1.0))]).unwrap();
        let expected =
            Polynomial::from_terms(1, [(vec![2], cx(0.5, 0.0)), (vec![0], cx(-0.5, 0.0))]).unwrap();
        assert_eq!(r, expected);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let w = cx(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
            let lhs = r.eval(&[w]);
            let rhs = g.eval(&[w, cx(0.0, 1.0)]);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn like_terms_merge_and_cancel() {
        let p = Polynomial::from_terms(
            2,
            [
                (vec![1, 0], cx(0.5, 0.0)),
                (vec![0, 1], cx(0.25, 0.0)),
                (vec![1, 0], cx(-0.5, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p, Polynomial::monomial(cx(0.25, 0.0), &[0, 1]));
    }

    #[test]
    fn rows_round_trip() {
        let phi = diagonal_pair();
        let rows = phi.to_rows();
        assert_eq!(PolySymbol::from_rows(&rows).unwrap(), phi);
        let zero_comp = repeated(&product(3));
        assert_eq!(PolySymbol::from_rows(&zero_comp.to_rows()).unwrap(), zero_comp);
    }

    #[test]
    fn literal_rejects_bad_rows() {
        assert!(matches!(
            PolySymbol::from_rows(&[vec![vec![1.0, 0.0, 0.5]]]),
            Err(Error::InvalidLiteral(_))
        ));
        assert!(matches!(
            PolySymbol::from_rows(&[vec![vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0]]]),
            Err(Error::InvalidLiteral(_))
        ));
    }

    #[test]
    fn certificate_rejects_non_self_maps() {
        // 0.7 z1 + 0.7 z2 reaches 1.4 at (1, 1).
        let p = Polynomial::from_terms(2, [(vec![1, 0], cx(0.7, 0.0)), (vec![0, 1], cx(0.7, 0.0))]).unwrap();
        assert!(matches!(PolySymbol::new(vec![p]), Err(Error::SymbolNotSelfMap { .. })));
    }

    #[test]
    fn certificate_accepts_maps_with_large_coefficient_sum() {
        // Σ|c| = 1.2 but the maximum on the circle is about 0.89.
        let q = Polynomial::from_terms(
            1,
            [(vec![0], cx(0.5, 0.0)), (vec![1], cx(0.5, 0.0)), (vec![2], cx(-0.2, 0.0))],
        )
        .unwrap();
        let max = (0..20000)
            .map(|k| q.eval(&[Complex64::cis(k as f64 * TAU / 20000.0)]).norm())
            .fold(0.0, f64::max);
        assert!(max < 0.9);
        assert!(PolySymbol::new(vec![q.clone()]).is_ok());
        // 0.4 + 0.7z − 0.1z² touches modulus 1 at z = 1 and nowhere exceeds it.
        let touching = Polynomial::from_terms(
            1,
            [(vec![0], cx(0.4, 0.0)), (vec![1], cx(0.7, 0.0)), (vec![2], cx(-0.1, 0.0))],
        )
        .unwrap();
        assert!(PolySymbol::new(vec![touching]).is_ok());
        // (z1 + z2 + z1 z2 − 1)/2 exceeds 1 along the diagonal near (1, 1).
        let p = Polynomial::from_terms(
            2,
            [
                (vec![1, 0], cx(0.5, 0.0)),
                (vec![0, 1], cx(0.5, 0.0)),
                (vec![1, 1], cx(0.5, 0.0)),
                (vec![0, 0], cx(-0.5, 0.0)),
            ],
        )
        .unwrap();
        assert!(matches!(PolySymbol::new(vec![p]), Err(Error::SymbolNotSelfMap { .. })));
        // q(z1)·z2 in two variables.
        let qz: Vec<(Vec<u32>, Complex64)> = [(0u32, 0.5), (1, 0.5), (2, -0.2)]
            .iter()
            .map(|&(k, c)| (vec![k, 1], cx(c, 0.0)))
            .collect();
        assert!(PolySymbol::new(vec![Polynomial::from_terms(2, qz).unwrap()]).is_ok());
    }

    #[test]
    fn collinear_structure() {
        let c = product(3).collinear().unwrap();
        assert_eq!(c.direction, vec![1, 1, 1]);
        assert_eq!(c.profile, vec![(1, cx(1.0, 0.0))]);
        let sq = Polynomial::from_terms(2, [(vec![2, 4], cx(0.5, 0.0)), (vec![0, 0], cx(0.5, 0.0))]).unwrap();
        let c = sq.collinear().unwrap();
        assert_eq!(c.direction, vec![1, 2]);
        assert_eq!(c.profile, vec![(0, cx(0.5, 0.0)), (2, cx(0.5, 0.0))]);
        assert!(power_sum(2).collinear().is_none());
        assert!(mean(2).collinear().is_none());
    }

    #[test]
    fn angle_helpers() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((normalize_angle(-PI / 2.0) - 3.0 * PI / 2.0).abs() < 1e-15);
        let a = TorusPoint::new(vec![0.01, TAU - 0.01]);
        let b = TorusPoint::new(vec![TAU - 0.01, 0.02]);
        assert!((a.distance(&b) - 0.03).abs() < 1e-12);
    }

    fn random_poly(rng: &mut ChaCha8Rng, n: usize) -> Polynomial {
        let terms = (0..rng.gen_range(1..6))
            .map(|_| {
                let e: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
                (e, cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .filter(|(e, _)| e.iter().sum::<u32>() <= 5)
            .collect::<Vec<_>>();
        Polynomial::from_terms(n, terms).unwrap()
    }

    fn random_disc_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(rng.gen::<f64>().sqrt() * 0.999, rng.gen_range(0.0..TAU)))
            .collect()
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for trial in 0..1000 {
            let n = 1 + trial % 3;
            let sym = PolySymbol::without_certificate(vec![random_poly(&mut rng, n), random_poly(&mut rng, n)])
                .unwrap();
            let z = random_disc_point(&mut rng, n);
            let jac = sym.jacobian(&z).unwrap();
            for j in 0..n {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += h;
                zm[j] -= h;
                let fp = sym.eval(&zp).unwrap();
                let fm = sym.eval(&zm).unwrap();
                for i in 0..2 {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let exact = jac[(i, j)];
                    let scale = exact.norm().max(1.0);
                    assert!((fd - exact).norm() / scale <= 1e-6, "trial {trial}: {fd} vs {exact}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn restriction_commutes_with_evaluation(seed in 0u64..10_000, mask in 1u32..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let p = random_poly(&mut rng, n);
            let z = random_disc_point(&mut rng, n);
            let fixed: Vec<Option<Complex64>> =
                (0..n).map(|j| if mask & (1 << j) != 0 { Some(z[j]) } else { None }).collect();
            prop_assume!(fixed.iter().any(|v| v.is_none()));
            let r = p.restrict(&fixed).unwrap();
            let rest: Vec<Complex64> = (0..n).filter(|&j| fixed[j].is_none()).map(|j| z[j]).collect();
            prop_assert!((r.eval(&rest) - p.eval(&z)).norm() <= 1e-12);
        }
    }
}
