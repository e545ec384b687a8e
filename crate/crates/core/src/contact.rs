//! Torus contact sets `{ζ ∈ Tⁿ : |Φ_i(ζ)| = 1, i ∈ I}`, level sets
//! `{ζ : f(ζ) = η}`, and the rank/derivative checks made on them.
//!
//! Detection is a grid scan followed by damped Newton ascent. A scan whose
//! accepted cells exceed `manifold_frac` of the grid is treated as a
//! positive-dimensional set and represented by a strided sample of refined
//! points; otherwise grid local maxima seed the refinement.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Executor;
use crate::measure::{sample_polydisc_into, WeightParam};
use crate::symbols::{odometer, PolySymbol, Polynomial, TorusPoint};
use crate::torus::{self, RealPart, SecondOrder, SumOfSquares};
use crate::{Error, Result};

/// Singular values in `(rank_tol, RANK_BAND_UPPER)·σ₁` make a rank
/// inconclusive.
pub const RANK_BAND_UPPER: f64 = 1e-4;

const REFINE_ITERS: usize = 100;

/// Grid points per angle used when none is configured.
pub fn default_grid_res(n: usize) -> usize {
    match n {
        0..=3 => 256,
        4 => 64,
        5 => 24,
        6 => 14,
        _ => 8,
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ContactOptions {
    /// Points per angle; `None` picks [`default_grid_res`].
    pub grid_res: Option<usize>,
    pub contact_tol: f64,
    pub coarse_margin: f64,
    pub merge_radius: f64,
    pub manifold_frac: f64,
    /// More distinct refined points than this also means positive-dimensional.
    pub max_points: usize,
    /// Size of the stored sample of a positive-dimensional set.
    pub sample_cap: usize,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self {
            grid_res: None,
            contact_tol: 1e-8,
            coarse_margin: 1e-2,
            merge_radius: 1e-4,
            manifold_frac: 0.05,
            max_points: 64,
            sample_cap: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactPoint {
    pub point: TorusPoint,
    /// `max_{i∈I} (1 − |Φ_i(ζ)|)`, or `|f(ζ) − η|` for level sets.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ContactKind {
    Empty,
    Finite(Vec<ContactPoint>),
    PositiveDimensional(Vec<ContactPoint>),
}

impl ContactKind {
    pub fn points(&self) -> &[ContactPoint] {
        match self {
            ContactKind::Empty => &[],
            ContactKind::Finite(p) | ContactKind::PositiveDimensional(p) => p,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ContactKind::Empty => "empty",
            ContactKind::Finite(_) => "finite",
            ContactKind::PositiveDimensional(_) => "positive-dimensional",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactSet {
    /// Component indices `I`; empty for level sets.
    pub indices: Vec<usize>,
    pub kind: ContactKind,
    pub grid_res: usize,
    /// Fraction of grid cells passing the coarse screen.
    pub accepted_fraction: f64,
    pub options: ContactOptions,
    pub warnings: Vec<String>,
}

/// What the scan looks for.
enum Target {
    /// `min_{i} |Φ_i| = 1`.
    Moduli(Vec<Polynomial>),
    /// `Re(conj(η) f) = 1`.
    Level(Polynomial, Complex64),
}

impl Target {
    fn score(&self, z: &[Complex64]) -> f64 {
        match self {
            Target::Moduli(ps) => ps.iter().map(|p| p.eval(z).norm()).fold(f64::INFINITY, f64::min),
            Target::Level(f, eta) => (eta.conj() * f.eval(z)).re,
        }
    }

    fn residual(&self, z: &[Complex64]) -> f64 {
        match self {
            Target::Moduli(ps) => ps.iter().map(|p| 1.0 - p.eval(z).norm()).fold(f64::NEG_INFINITY, f64::max),
            Target::Level(f, eta) => (f.eval(z) - eta).norm(),
        }
    }
}

enum Refiner {
    Moduli(SumOfSquares),
    Level(RealPart),
}

impl Refiner {
    fn new(target: &Target) -> Self {
        match target {
            Target::Moduli(ps) => Refiner::Moduli(SumOfSquares::new(ps.iter().map(SecondOrder::new).collect())),
            Target::Level(f, eta) => Refiner::Level(RealPart::new(SecondOrder::new(f), eta.conj())),
        }
    }

    fn refine(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Refiner::Moduli(o) => torus::maximize(o, theta, REFINE_ITERS).0,
            Refiner::Level(o) => torus::maximize(o, theta, REFINE_ITERS).0,
        }
    }
}

/// Finds `{ζ : Φ_I(ζ) ∈ T^{|I|}}`.
pub fn find_contact_set<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    indices: &[usize],
    opts: &ContactOptions,
) -> Result<ContactSet> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("index set must be nonempty".into()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= phi.n_out()) {
        return Err(Error::DimensionMismatch {
            expected: phi.n_out(),
            got: i + 1,
        });
    }
    let comps = indices.iter().map(|&i| phi.component(i).clone()).collect();
    let mut set = scan(exec, phi.n_in(), Target::Moduli(comps), opts);
    set.indices = indices.to_vec();
    Ok(set)
}

/// Finds `{ζ ∈ Tⁿ : f(ζ) = η}` for a unimodular `η`.
pub fn find_level_set<E: Executor>(exec: &E, f: &Polynomial, eta: Complex64, opts: &ContactOptions) -> Result<ContactSet> {
    if (eta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("level {eta} is not unimodular")));
    }
    Ok(scan(exec, f.n_vars(), Target::Level(f.clone(), eta), opts))
}

struct SlabResult {
    accepted: u64,
    picks: Vec<Vec<usize>>,
}

fn scan<E: Executor>(exec: &E, n: usize, target: Target, opts: &ContactOptions) -> ContactSet {
    let res = opts.grid_res.unwrap_or_else(|| default_grid_res(n)).max(4);
    let h = TAU / res as f64;
    let table: Vec<Complex64> = (0..res).map(|k| Complex64::cis(k as f64 * h)).collect();
    let threshold = 1.0 - opts.coarse_margin;
    let cells_per_slab = res.pow(n as u32 - 1) as u64;
    let total = cells_per_slab * res as u64;

    // Walks one slab (fixed first angle), calling `visit(idx, score)` on
    // accepted cells.
    let walk = |first: usize, visit: &mut dyn FnMut(&[usize], &[Complex64])| {
        let mut idx = vec![0usize; n];
        idx[0] = first;
        let mut z = vec![table[first]; n];
        loop {
            for j in 1..n {
                z[j] = table[idx[j]];
            }
            if target.score(&z) >= threshold {
                visit(&idx, &z);
            }
            if n == 1 || !odometer(&mut idx[1..], res) {
                break;
            }
        }
    };

    let counts: Vec<u64> = exec.run(res, |first| {
        let mut c = 0u64;
        walk(first, &mut |_, _| c += 1);
        c
    });
    let accepted: u64 = counts.iter().sum();
    let accepted_fraction = accepted as f64 / total as f64;
    let mut warnings = Vec::new();
    let refiner = Refiner::new(&target);

    let refine_all = |seeds: Vec<Vec<usize>>| -> Vec<ContactPoint> {
        let refined = exec.run(seeds.len(), |k| {
            let theta0: Vec<f64> = seeds[k].iter().map(|&i| i as f64 * h).collect();
            let theta = refiner.refine(&theta0);
            let point = TorusPoint::new(theta);
            let residual = target.residual(&point.point());
            (residual <= opts.contact_tol).then_some(ContactPoint { point, residual })
        });
        dedupe(refined.into_iter().flatten().collect(), opts.merge_radius)
    };

    let positive = accepted_fraction > opts.manifold_frac;
    let kind = if accepted == 0 {
        ContactKind::Empty
    } else if positive {
        let stride = accepted.div_ceil(opts.sample_cap.max(1) as u64).max(1);
        let mut offsets = Vec::with_capacity(res);
        let mut acc = 0u64;
        for c in &counts {
            offsets.push(acc);
            acc += c;
        }
        let slabs: Vec<SlabResult> = exec.run(res, |first| {
            let mut ordinal = offsets[first];
            let mut picks = Vec::new();
            walk(first, &mut |idx, _| {
                if ordinal % stride == 0 {
                    picks.push(idx.to_vec());
                }
                ordinal += 1;
            });
            SlabResult { accepted: 0, picks }
        });
        let seeds: Vec<Vec<usize>> = slabs.into_iter().flat_map(|s| s.picks).collect();
        classify(refine_all(seeds), true)
    } else {
        let slabs: Vec<SlabResult> = exec.run(res, |first| {
            let mut picks = Vec::new();
            let mut count = 0u64;
            walk(first, &mut |idx, z| {
                count += 1;
                if is_local_max(&target, &table, idx, z) {
                    picks.push(idx.to_vec());
                }
            });
            SlabResult { accepted: count, picks }
        });
        debug_assert_eq!(slabs.iter().map(|s| s.accepted).sum::<u64>(), accepted);
        let seeds: Vec<Vec<usize>> = slabs.into_iter().flat_map(|s| s.picks).collect();
        let points = refine_all(seeds);
        if points.len() > opts.max_points {
            classify(points, true)
        } else {
            for (a, p) in points.iter().enumerate() {
                if points[a + 1..].iter().any(|q| p.point.distance(&q.point) < 2.0 * h) {
                    warnings.push(format!(
                        "contact points closer than two grid cells ({h:.3e} rad); rerun with a finer grid"
                    ));
                    break;
                }
            }
            classify(points, false)
        }
    };
    ContactSet {
        indices: Vec::new(),
        kind,
        grid_res: res,
        accepted_fraction,
        options: opts.clone(),
        warnings,
    }
}

fn classify(points: Vec<ContactPoint>, positive: bool) -> ContactKind {
    match (points.is_empty(), positive) {
        (true, _) => ContactKind::Empty,
        (false, true) => ContactKind::PositiveDimensional(points),
        (false, false) => ContactKind::Finite(points),
    }
}

fn is_local_max(target: &Target, table: &[Complex64], idx: &[usize], z: &[Complex64]) -> bool {
    let res = table.len();
    let s = target.score(z);
    let mut w = z.to_vec();
    for j in 0..idx.len() {
        for step in [1, res - 1] {
            w[j] = table[(idx[j] + step) % res];
            if target.score(&w) > s {
                return false;
            }
        }
        w[j] = z[j];
    }
    true
}

/// Lexicographic order, then greedy removal of points within `radius` of a
/// kept one.
fn dedupe(mut points: Vec<ContactPoint>, radius: f64) -> Vec<ContactPoint> {
    points.sort_by(|a, b| {
        a.point
            .angles()
            .iter()
            .zip(b.point.angles())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut kept: Vec<ContactPoint> = Vec::with_capacity(points.len());
    for p in points {
        if kept.iter().all(|q| q.point.distance(&p.point) >= radius) {
            kept.push(p);
        }
    }
    kept
}

/// Singular spectrum and numerical rank of a complex matrix.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankInfo {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Some `σ_k` lies in `(rank_tol, RANK_BAND_UPPER)·σ₁`.
    pub inconclusive: bool,
}

/// Counts `σ_k > rank_tol·σ₁`.
pub fn numerical_rank(m: &DMatrix<Complex64>, rank_tol: f64) -> RankInfo {
    if m.is_empty() {
        return RankInfo {
            singular_values: Vec::new(),
            rank: 0,
            inconclusive: false,
        };
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let s1 = sv[0];
    if !(s1 > 0.0) {
        return RankInfo {
            singular_values: sv,
            rank: 0,
            inconclusive: false,
        };
    }
    let rank = sv.iter().filter(|&&s| s > rank_tol * s1).count();
    let inconclusive = sv.iter().any(|&s| s > rank_tol * s1 && s < RANK_BAND_UPPER * s1);
    RankInfo {
        singular_values: sv,
        rank,
        inconclusive,
    }
}

/// Rank of `d_ζΦ_I` against the target `|I|`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankReport {
    pub point: TorusPoint,
    pub indices: Vec<usize>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub target: usize,
    pub inconclusive: bool,
    pub passes: bool,
}

pub fn rank_report(phi: &PolySymbol, indices: &[usize], point: &TorusPoint, rank_tol: f64) -> Result<RankReport> {
    let jac = phi.jacobian_rows(&point.point(), indices)?;
    let info = numerical_rank(&jac, rank_tol);
    Ok(RankReport {
        point: point.clone(),
        indices: indices.to_vec(),
        passes: info.rank == indices.len(),
        rank: info.rank,
        target: indices.len(),
        inconclusive: info.inconclusive,
        singular_values: info.singular_values,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JcReport {
    /// `conj(η)·ζ_j·∂f/∂z_j(ζ)` for each `j`.
    pub values: Vec<Complex64>,
    pub passes: bool,
}

/// Julia–Carathéodory sign check at a point where `f(ζ) = η`.
pub fn jc_check(f: &Polynomial, zeta: &TorusPoint, eta: Complex64, contact_tol: f64, jc_tol: f64) -> Result<JcReport> {
    if zeta.dim() != f.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: f.n_vars(),
            got: zeta.dim(),
        });
    }
    let z = zeta.point();
    let residual = (f.eval(&z) - eta).norm();
    if !(residual <= contact_tol) {
        return Err(Error::ContactRequired {
            residual,
            tol: contact_tol,
        });
    }
    let values: Vec<Complex64> = (0..f.n_vars())
        .map(|j| eta.conj() * z[j] * f.derivative(j).eval(&z))
        .collect();
    let passes = values.iter().all(|v| v.im.abs() <= jc_tol && v.re >= -jc_tol);
    Ok(JcReport { values, passes })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SliceReport {
    /// `∇ψ(z0, ζ'')`.
    pub gradient: Vec<Complex64>,
    /// Largest deviation of `∇ψ(z, ζ'')` from it over the samples.
    pub max_deviation: f64,
    pub samples: usize,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SliceOptions {
    pub samples: usize,
    pub slice_tol: f64,
    pub contact_tol: f64,
    pub seed: u64,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            slice_tol: 1e-9,
            contact_tol: 1e-8,
            seed: 0,
        }
    }
}

/// With the last `n − m` variables fixed at `ζ''` and `|ψ(z0, ζ'')| = 1`,
/// checks that `z ↦ ∇ψ(z, ζ'')` is constant on `D^m`.
pub fn slice_gradient_constancy(
    psi: &Polynomial,
    m: usize,
    zeta_tail: &TorusPoint,
    z0: &[Complex64],
    opts: &SliceOptions,
) -> Result<SliceReport> {
    let n = psi.n_vars();
    if m == 0 || m >= n || z0.len() != m || zeta_tail.dim() != n - m {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z0.len() + zeta_tail.dim(),
        });
    }
    let tail = zeta_tail.point();
    let full = |head: &[Complex64]| -> Vec<Complex64> { head.iter().chain(&tail).copied().collect() };
    let base = full(z0);
    let residual = 1.0 - psi.eval(&base).norm();
    if !(residual.abs() <= opts.contact_tol) {
        return Err(Error::ContactRequired {
            residual,
            tol: opts.contact_tol,
        });
    }
    let grads: Vec<Polynomial> = (0..n).map(|j| psi.derivative(j)).collect();
    let gradient: Vec<Complex64> = grads.iter().map(|g| g.eval(&base)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut head = vec![Complex64::new(0.0, 0.0); m];
    let mut max_deviation: f64 = 0.0;
    for _ in 0..opts.samples {
        sample_polydisc_into(WeightParam::lebesgue(), &mut rng, &mut head);
        let z = full(&head);
        for (g, g0) in grads.iter().zip(&gradient) {
            max_deviation = max_deviation.max((g.eval(&z) - g0).norm());
        }
    }
    Ok(SliceReport {
        gradient,
        max_deviation,
        samples: opts.samples,
        passes: max_deviation <= opts.slice_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::symbols::catalog::*;
    use crate::symbols::wrap_angle;
    use rand::Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> ContactOptions {
        ContactOptions::default()
    }

    #[test]
    fn product_contact_is_whole_torus() {
        let phi = scalar(&product(2));
        let set = find_contact_set(&Sequential, &phi, &[0], &opts()).unwrap();
        assert!(matches!(set.kind, ContactKind::PositiveDimensional(_)));
        assert_eq!(set.accepted_fraction, 1.0);
        assert!(set.kind.points().len() >= 1000);
    }

    #[test]
    fn diagonal_pair_contact_is_the_diagonal() {
        let phi = diagonal_pair();
        let set = find_contact_set(&Sequential, &phi, &[0, 1], &opts()).unwrap();
        let ContactKind::PositiveDimensional(points) = &set.kind else {
            panic!("expected a curve, got {:?}", set.kind.label());
        };
        for p in points {
            let a = p.point.angles();
            assert!(wrap_angle(a[0] - a[1]).abs() < 1e-4, "{a:?}");
            assert!(p.residual <= 1e-8);
        }
        // Coverage: the sample spreads around the whole circle.
        let mut bins = [false; 16];
        for p in points {
            bins[(p.point.angles()[0] / TAU * 16.0) as usize % 16] = true;
        }
        assert!(bins.iter().all(|&b| b));
    }

    #[test]
    fn scaled_map_has_no_contact() {
        let phi = half_scaling();
        for idx in [&[0usize][..], &[1], &[0, 1]] {
            let set = find_contact_set(&Sequential, &phi, idx, &opts()).unwrap();
            assert_eq!(set.kind, ContactKind::Empty);
        }
        let half = half_first();
        assert_eq!(find_contact_set(&Sequential, &half, &[0], &opts()).unwrap().kind, ContactKind::Empty);
        assert!(matches!(
            find_contact_set(&Sequential, &half, &[1], &opts()).unwrap().kind,
            ContactKind::PositiveDimensional(_)
        ));
    }

    #[test]
    fn isolated_level_points() {
        // (z1² + z2²)/2 = 1 only at (±1, ±1).
        let set = find_level_set(&Sequential, &power_sum(2), cx(1.0, 0.0), &opts()).unwrap();
        let ContactKind::Finite(points) = &set.kind else {
            panic!("expected finitely many points, got {}", set.kind.label());
        };
        assert_eq!(points.len(), 4);
        for p in points {
            for &a in p.point.angles() {
                assert!(wrap_angle(a).abs() < 1e-6 || (wrap_angle(a).abs() - core::f64::consts::PI).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rank_examples() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        assert_eq!(numerical_rank(&id, 1e-8).rank, 2);
        let ones = DMatrix::from_element(2, 2, cx(1.0, 0.0));
        let info = numerical_rank(&ones, 1e-8);
        assert_eq!(info.rank, 1);
        assert!(!info.inconclusive);
        let phi = repeated(&product(3));
        let r = rank_report(&phi, &[0, 1, 2], &TorusPoint::ones(3), 1e-8).unwrap();
        assert_eq!(r.rank, 1);
        assert!(!r.passes);
        let zero = DMatrix::<Complex64>::zeros(2, 3);
        assert_eq!(numerical_rank(&zero, 1e-8).rank, 0);
    }

    #[test]
    fn rank_band_is_inconclusive() {
        let m = DMatrix::from_row_slice(2, 2, &[cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(1e-6, 0.0)]);
        let info = numerical_rank(&m, 1e-8);
        assert_eq!(info.rank, 2);
        assert!(info.inconclusive);
    }

    #[test]
    fn jc_examples() {
        let r = jc_check(&product(2), &TorusPoint::ones(2), cx(1.0, 0.0), 1e-8, 1e-6).unwrap();
        assert!(r.passes);
        assert!(r.values.iter().all(|v| (v - cx(1.0, 0.0)).norm() < 1e-15));

        let sq = Polynomial::monomial(cx(1.0, 0.0), &[2]);
        let i = TorusPoint::new(vec![core::f64::consts::FRAC_PI_2]);
        let r = jc_check(&sq, &i, cx(-1.0, 0.0), 1e-8, 1e-6).unwrap();
        assert!((r.values[0] - cx(2.0, 0.0)).norm() < 1e-14);
        assert!(r.passes);

        let pi = core::f64::consts::PI;
        let p = TorusPoint::new(vec![0.0, pi, pi]);
        let r = jc_check(&product(3), &p, cx(1.0, 0.0), 1e-8, 1e-6).unwrap();
        assert!(r.values.iter().all(|v| (v - cx(1.0, 0.0)).norm() < 1e-14));

        let off = TorusPoint::new(vec![0.3, 0.0]);
        assert!(matches!(
            jc_check(&product(2), &off, cx(1.0, 0.0), 1e-8, 1e-6),
            Err(Error::ContactRequired { .. })
        ));
    }

    #[test]
    fn slice_examples() {
        let z2 = Polynomial::variable(2, 1);
        let r = slice_gradient_constancy(&z2, 1, &TorusPoint::ones(1), &[cx(0.0, 0.0)], &SliceOptions::default())
            .unwrap();
        assert!(r.passes);
        assert_eq!(r.gradient, vec![cx(0.0, 0.0), cx(1.0, 0.0)]);

        let r = slice_gradient_constancy(&mean(2), 1, &TorusPoint::ones(1), &[cx(0.999, 0.0)], &SliceOptions::default());
        assert!(matches!(r, Err(Error::ContactRequired { .. })));

        let psi = Polynomial::monomial(cx(1.0, 0.0), &[0, 1, 1]);
        let r = slice_gradient_constancy(&psi, 1, &TorusPoint::ones(2), &[cx(0.0, 0.3)], &SliceOptions::default())
            .unwrap();
        assert!(r.passes);
        assert_eq!(r.gradient, vec![cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0)]);
    }

    #[test]
    fn reported_points_are_sound() {
        for phi in [diagonal_pair(), square_second(), swap(), damped_product_pair()] {
            for idx in [vec![0], vec![1], vec![0, 1]] {
                let set = find_contact_set(&Sequential, &phi, &idx, &opts()).unwrap();
                for p in set.kind.points() {
                    let v = phi.eval(&p.point.point()).unwrap();
                    for &i in &idx {
                        assert!(1.0 - v[i].norm() <= 1e-8);
                    }
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn rank_is_invariant_under_phase_and_permutation(seed in 0u64..5000, angle in 0.0f64..core::f64::consts::TAU) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(1..4);
            let cols = rng.gen_range(1..4);
            let rank = rng.gen_range(0..=rows.min(cols));
            // Product of random factors with a prescribed inner dimension.
            let a = DMatrix::from_fn(rows, rank, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let b = DMatrix::from_fn(rank, cols, |_, _| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let m = &a * &b;
            let base = numerical_rank(&m, 1e-8).rank;
            let rotated = m.map(|x| x * Complex64::cis(angle));
            proptest::prop_assert_eq!(numerical_rank(&rotated, 1e-8).rank, base);
            let mut perm = m.clone();
            perm.swap_rows(0, rows - 1);
            perm.swap_columns(0, cols - 1);
            proptest::prop_assert_eq!(numerical_rank(&perm, 1e-8).rank, base);
        }
    }
}
