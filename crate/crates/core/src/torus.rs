//! Second-order calculus in angle coordinates on `Tⁿ` and a damped Newton
//! maximizer for smooth real objectives built from polynomials.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::symbols::Polynomial;

/// A polynomial with its first and second `z`-derivatives.
#[derive(Clone, Debug)]
pub(crate) struct SecondOrder {
    value: Polynomial,
    grad: Vec<Polynomial>,
    /// Row-major `n × n`.
    hess: Vec<Polynomial>,
}

/// `P`, `∂P/∂θ_j` and `∂²P/∂θ_j∂θ_k` at `ζ = e^{iθ}`.
pub(crate) struct AngleJet {
    pub value: Complex64,
    pub d: Vec<Complex64>,
    pub dd: Vec<Complex64>,
}

impl SecondOrder {
    pub fn new(p: &Polynomial) -> Self {
        let n = p.n_vars();
        let grad: Vec<Polynomial> = (0..n).map(|j| p.derivative(j)).collect();
        let hess = (0..n * n).map(|k| grad[k / n].derivative(k % n)).collect();
        Self {
            value: p.clone(),
            grad,
            hess,
        }
    }

    pub fn n(&self) -> usize {
        self.value.n_vars()
    }

    /// With `ζ_j = e^{iθ_j}`: `∂_j P = iζ_j p_j` and
    /// `∂_j∂_k P = −ζ_jζ_k p_jk − δ_jk ζ_j p_j`.
    pub fn jet(&self, theta: &[f64]) -> AngleJet {
        let n = self.n();
        let z: Vec<Complex64> = theta.iter().map(|&t| Complex64::cis(t)).collect();
        let i = Complex64::new(0.0, 1.0);
        let p1: Vec<Complex64> = self.grad.iter().map(|g| g.eval(&z)).collect();
        let d = (0..n).map(|j| i * z[j] * p1[j]).collect();
        let mut dd = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in j..n {
                let mut v = -z[j] * z[k] * self.hess[j * n + k].eval(&z);
                if j == k {
                    v -= z[j] * p1[j];
                }
                dd[j * n + k] = v;
                dd[k * n + j] = v;
            }
        }
        AngleJet {
            value: self.value.eval(&z),
            d,
            dd,
        }
    }
}

/// A smooth real function of the angles with gradient and Hessian.
pub(crate) trait Objective {
    fn n(&self) -> usize;
    fn eval(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>);
}

/// `Σ_i |P_i(e^{iθ})|²`.
pub(crate) struct SumOfSquares {
    parts: Vec<SecondOrder>,
}

impl SumOfSquares {
    pub fn new(parts: Vec<SecondOrder>) -> Self {
        Self { parts }
    }
}

impl Objective for SumOfSquares {
    fn n(&self) -> usize {
        self.parts[0].n()
    }

    fn eval(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut f = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for part in &self.parts {
            let jet = part.jet(theta);
            let p = jet.value;
            f += p.norm_sqr();
            for j in 0..n {
                g[j] += 2.0 * (p.conj() * jet.d[j]).re;
                for k in 0..n {
                    h[(j, k)] += 2.0 * (jet.d[j].conj() * jet.d[k] + p.conj() * jet.dd[j * n + k]).re;
                }
            }
        }
        (f, g, h)
    }
}

/// `Re(w · P(e^{iθ}))` for a fixed unimodular `w`.
pub(crate) struct RealPart {
    part: SecondOrder,
    w: Complex64,
}

impl RealPart {
    pub fn new(part: SecondOrder, w: Complex64) -> Self {
        Self { part, w }
    }
}

impl Objective for RealPart {
    fn n(&self) -> usize {
        self.part.n()
    }

    fn eval(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let jet = self.part.jet(theta);
        let f = (self.w * jet.value).re;
        let g = DVector::from_fn(n, |j, _| (self.w * jet.d[j]).re);
        let h = DMatrix::from_fn(n, n, |j, k| (self.w * jet.dd[j * n + k]).re);
        (f, g, h)
    }
}

/// Levenberg-damped Newton ascent from `theta0`. Returns the final angles
/// and objective value; never decreases the objective.
pub(crate) fn maximize<O: Objective>(obj: &O, theta0: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = obj.n();
    let mut theta = DVector::from_column_slice(theta0);
    let (mut f, mut g, mut h) = obj.eval(theta.as_slice());
    let mut mu = 1e-6;
    for _ in 0..max_iter {
        if g.amax() < 1e-15 {
            break;
        }
        let mut accepted = false;
        while mu < 1e12 {
            let a = -&h + DMatrix::identity(n, n) * mu;
            if let Some(ch) = a.cholesky() {
                let step = ch.solve(&g);
                let cand = &theta + &step;
                let (fc, gc, hc) = obj.eval(cand.as_slice());
                if fc >= f {
                    let small = step.amax() < 1e-15;
                    theta = cand;
                    f = fc;
                    g = gc;
                    h = hc;
                    mu = (mu * 0.25).max(1e-12);
                    accepted = !small;
                    break;
                }
            }
            mu *= 8.0;
        }
        if !accepted {
            break;
        }
    }
    (theta.as_slice().to_vec(), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::TAU;

    fn cx(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = Polynomial::from_terms(
            2,
            [
                (vec![2, 1], Complex64::new(0.3, -0.2)),
                (vec![0, 3], cx(0.5)),
                (vec![1, 0], Complex64::new(0.0, 0.4)),
            ],
        )
        .unwrap();
        let so = SecondOrder::new(&p);
        let theta = [0.3, -1.2];
        let jet = so.jet(&theta);
        let h = 1e-5;
        for j in 0..2 {
            let mut tp = theta;
            let mut tm = theta;
            tp[j] += h;
            tm[j] -= h;
            let (jp, jm) = (so.jet(&tp), so.jet(&tm));
            let fd = (jp.value - jm.value) / (2.0 * h);
            assert!((fd - jet.d[j]).norm() < 1e-8);
            for k in 0..2 {
                let fd2 = (jp.d[k] - jm.d[k]) / (2.0 * h);
                assert!((fd2 - jet.dd[j * 2 + k]).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn maximizes_modulus_of_mean() {
        // |(z1 + z2)/2|² peaks at 1 on the diagonal.
        let p = Polynomial::from_terms(2, [(vec![1, 0], cx(0.5)), (vec![0, 1], cx(0.5))]).unwrap();
        let obj = SumOfSquares::new(vec![SecondOrder::new(&p)]);
        let (theta, f) = maximize(&obj, &[0.4, -0.3], 50);
        assert!((f - 1.0).abs() < 1e-14);
        assert!(crate::symbols::wrap_angle(theta[0] - theta[1]).abs() < 1e-6);
    }

    #[test]
    fn real_part_reaches_contact() {
        // Re(z1 z2 z3) is maximal exactly where the product is 1.
        let p = Polynomial::monomial(cx(1.0), &[1, 1, 1]);
        let obj = RealPart::new(SecondOrder::new(&p), cx(1.0));
        let (theta, f) = maximize(&obj, &[0.5, 0.2, -0.1], 60);
        assert!((f - 1.0).abs() < 1e-14);
        let s: f64 = theta.iter().sum();
        assert!(crate::symbols::wrap_angle(s % TAU).abs() < 1e-7);
    }
}
