//! Volumes of sublevel sets `{z ∈ Dⁿ : |f(z) − η| ≤ δ}` and their scaling
//! exponents in `δ`.
//!
//! The AUTO proposal depends on the torus level set `{f = η}`:
//!
//! - `f = h(z^α)` for a single monomial: for each root `w*` of `h = η` on
//!   the circle, a band `1 − |z_j| ≤ Kδ_w/α_j` with the angle combination
//!   `Σ α_j θ_j` within `Kδ_w` of `arg w*`, where `δ_w = δ/|h'(w*)|`.
//! - finitely many level points: around each, bands `Kδ/a_j` from the
//!   Julia–Carathéodory derivatives `a_j`, the combination `Σ a_j φ_j`
//!   pinned to `O(δ)`, and the remaining angles bounded by the quadratic
//!   form of `Re(η̄ f)` restricted to that hyperplane.
//! - anything else: the whole polydisc, with a warning.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::contact::{find_level_set, ContactKind, ContactOptions};
use crate::estimate::{estimate_volume, Estimate, EstimatorConfig};
use crate::exec::Executor;
use crate::fit::{loglog, LineFit};
use crate::measure::{AngleSpec, CoordRegion, Region, RegionUnion, WeightParam};
use crate::symbols::{wrap_angle, Polynomial, TorusPoint};
use crate::torus::{self, RealPart, SecondOrder};
use crate::{Error, Result};

/// Default safety factor `K` of the AUTO proposal.
pub const DEFAULT_SAFETY: f64 = 3.0;

/// Stream tag of sublevel estimates.
const TAG_SUBLEVEL: u64 = 0x5355_424c;

/// Default `δ` grid `2^{-4}, …, 2^{-9}`.
pub fn default_deltas() -> Vec<f64> {
    (4..=9).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SublevelOptions {
    pub estimator: EstimatorConfig,
    pub safety: f64,
    pub contact: ContactOptions,
}

impl Default for SublevelOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            safety: DEFAULT_SAFETY,
            contact: ContactOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    Auto,
    Whole,
    Explicit(RegionUnion),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SublevelQuery {
    pub f: Polynomial,
    pub eta: Complex64,
    pub delta: f64,
    pub weight: WeightParam,
    pub proposal: Proposal,
}

impl SublevelQuery {
    pub fn validate(&self) -> Result<()> {
        if (self.eta.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("level {} is not unimodular", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("δ = {} must be positive", self.delta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SublevelPoint {
    pub delta: f64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
struct CollinearRoot {
    arg: f64,
    /// `|h'(w*)|`.
    scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct PointCell {
    center: TorusPoint,
    /// Julia–Carathéodory derivatives.
    alpha: Vec<f64>,
    pivot: usize,
    /// Per non-pivot coordinate: angular half-width per `√δ`; `None` when
    /// the restricted form is degenerate in that direction.
    arc_unit: Vec<Option<f64>>,
    /// Second-order drift of the combination, per `δ`.
    drift: f64,
}

/// Region recipe for a given `f` and `η`, independent of `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalPlan {
    n: usize,
    kind: PlanKind,
}

#[derive(Clone, Debug, PartialEq)]
enum PlanKind {
    Whole,
    Collinear { direction: Vec<u32>, roots: Vec<CollinearRoot> },
    Points(Vec<PointCell>),
}

impl ProposalPlan {
    pub fn whole(n: usize) -> Self {
        Self { n, kind: PlanKind::Whole }
    }

    /// Inspects the level set of `f` at `η`. Returned strings are warnings.
    pub fn analyze<E: Executor>(
        exec: &E,
        f: &Polynomial,
        eta: Complex64,
        opts: &ContactOptions,
    ) -> Result<(Self, Vec<String>)> {
        let n = f.n_vars();
        if let Some(c) = f.collinear() {
            let h = Polynomial::from_terms(1, c.profile.iter().map(|&(k, a)| (vec![k], a)))?;
            let roots = circle_roots(&h, eta)?;
            let plan = if roots.is_empty() {
                PlanKind::Points(Vec::new())
            } else {
                PlanKind::Collinear {
                    direction: c.direction,
                    roots,
                }
            };
            return Ok((Self { n, kind: plan }, Vec::new()));
        }
        let set = find_level_set(exec, f, eta, opts)?;
        let mut warnings = set.warnings.clone();
        let kind = match &set.kind {
            ContactKind::Empty => PlanKind::Points(Vec::new()),
            ContactKind::Finite(points) => {
                PlanKind::Points(points.iter().map(|p| point_cell(f, eta, &p.point)).collect())
            }
            ContactKind::PositiveDimensional(_) => {
                warnings.push(
                    "level set is positive-dimensional and not of single-monomial type; sampling the whole polydisc"
                        .into(),
                );
                PlanKind::Whole
            }
        };
        Ok((Self { n, kind }, warnings))
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            PlanKind::Whole => "whole",
            PlanKind::Collinear { .. } => "collinear",
            PlanKind::Points(ref p) if p.is_empty() => "empty-level-set",
            PlanKind::Points(_) => "level-points",
        }
    }

    pub fn regions(&self, delta: f64, weight: WeightParam, safety: f64) -> Result<RegionUnion> {
        let n = self.n;
        let whole = || RegionUnion::single(Region::full(n, weight));
        if delta >= 2.0 {
            return Ok(whole());
        }
        match &self.kind {
            PlanKind::Whole => Ok(whole()),
            PlanKind::Points(cells) if cells.is_empty() => Ok(whole()),
            PlanKind::Collinear { direction, roots } => {
                let pivot = (0..n)
                    .filter(|&j| direction[j] > 0)
                    .min_by_key(|&j| direction[j])
                    .expect("nonconstant monomial");
                let regions = roots
                    .iter()
                    .map(|root| {
                        let dw = safety * delta / root.scale;
                        let coords = (0..n)
                            .map(|j| {
                                let a = direction[j];
                                if a == 0 {
                                    return CoordRegion::full();
                                }
                                let band = (dw / a as f64).min(1.0);
                                let angle = if j != pivot || dw >= PI {
                                    AngleSpec::Full
                                } else {
                                    AngleSpec::Combination {
                                        multiplicity: a,
                                        center: 0.0,
                                        terms: (0..n)
                                            .filter(|&i| i != pivot && direction[i] > 0)
                                            .map(|i| (i, direction[i] as f64, 0.0))
                                            .collect(),
                                        target: root.arg,
                                        half_width: dw,
                                    }
                                };
                                CoordRegion::Polar { band, angle }
                            })
                            .collect();
                        Region::new(coords, weight)
                    })
                    .collect::<Result<Vec<_>>>()?;
                RegionUnion::new(regions)
            }
            PlanKind::Points(cells) => {
                let regions = cells
                    .iter()
                    .map(|cell| cell_region(cell, delta, weight, safety))
                    .collect::<Result<Vec<_>>>()?;
                RegionUnion::new(regions)
            }
        }
    }
}

fn cell_region(cell: &PointCell, delta: f64, weight: WeightParam, safety: f64) -> Result<Region> {
    let n = cell.alpha.len();
    let k = cell.pivot;
    let centers = cell.center.angles();
    let comb_hw = safety * delta * (1.0 + cell.drift) / cell.alpha[k];
    let mut non_pivot = 0;
    let coords = (0..n)
        .map(|j| {
            let band = if cell.alpha[j] > 0.0 {
                (safety * delta / cell.alpha[j]).min(1.0)
            } else {
                1.0
            };
            let angle = if j == k {
                if comb_hw >= PI {
                    AngleSpec::Full
                } else {
                    AngleSpec::Combination {
                        multiplicity: 1,
                        center: centers[k],
                        terms: (0..n)
                            .filter(|&i| i != k && cell.alpha[i] > 0.0)
                            .map(|i| (i, cell.alpha[i] / cell.alpha[k], centers[i]))
                            .collect(),
                        target: 0.0,
                        half_width: comb_hw,
                    }
                }
            } else {
                let unit = cell.arc_unit[non_pivot];
                non_pivot += 1;
                match unit.map(|u| safety * u * delta.sqrt()) {
                    Some(hw) if hw < PI => AngleSpec::Arc {
                        center: centers[j],
                        half_width: hw,
                    },
                    _ => AngleSpec::Full,
                }
            };
            CoordRegion::Polar { band, angle }
        })
        .collect();
    Region::new(coords, weight)
}

/// Roots of `h(w) = η` on the unit circle.
fn circle_roots(h: &Polynomial, eta: Complex64) -> Result<Vec<CollinearRoot>> {
    let deg = h.degree_in(0) as usize;
    let m = (64 * deg).max(512);
    let step = core::f64::consts::TAU / m as f64;
    let score = |t: f64| (eta.conj() * h.eval(&[Complex64::cis(t)])).re;
    let obj = RealPart::new(SecondOrder::new(h), eta.conj());
    let dh = h.derivative(0);
    let mut roots: Vec<CollinearRoot> = Vec::new();
    for k in 0..m {
        let t = k as f64 * step;
        let s = score(t);
        if s < 0.99 || score(t - step) > s || score(t + step) > s {
            continue;
        }
        let theta = torus::maximize(&obj, &[t], 100).0[0];
        let w = Complex64::cis(theta);
        if (h.eval(&[w]) - eta).norm() > 1e-8 {
            continue;
        }
        let arg = wrap_angle(theta);
        if roots.iter().all(|r| wrap_angle(r.arg - arg).abs() > 1e-6) {
            roots.push(CollinearRoot {
                arg,
                scale: dh.eval(&[w]).norm(),
            });
        }
    }
    if roots.iter().any(|r| !(r.scale > 0.0)) {
        return Err(Error::InvalidArgument("level is attained with vanishing derivative".into()));
    }
    roots.sort_by(|a, b| a.arg.total_cmp(&b.arg));
    Ok(roots)
}

fn point_cell(f: &Polynomial, eta: Complex64, center: &TorusPoint) -> PointCell {
    let n = f.n_vars();
    let jet = SecondOrder::new(f).jet(center.angles());
    let e = eta.conj();
    let alpha: Vec<f64> = jet.d.iter().map(|d| (e * d).im.max(0.0)).collect();
    let pivot = (0..n).max_by(|&a, &b| alpha[a].total_cmp(&alpha[b])).expect("n ≥ 1");
    let q = DMatrix::from_fn(n, n, |j, k| -(e * jet.dd[j * n + k]).re);
    let b = DMatrix::from_fn(n, n, |j, k| (e * jet.dd[j * n + k]).im.abs());
    let free: Vec<usize> = (0..n).filter(|&j| j != pivot).collect();
    // φ = L φ' with φ_pivot = −Σ γ_j φ'_j.
    let l = DMatrix::from_fn(n, free.len(), |row, col| {
        if row == free[col] {
            1.0
        } else if row == pivot {
            -alpha[free[col]] / alpha[pivot]
        } else {
            0.0
        }
    });
    let qr = l.transpose() * &q * &l;
    let (arc_unit, drift) = if free.is_empty() {
        (Vec::new(), 0.0)
    } else {
        match qr.clone().cholesky() {
            Some(ch) => {
                let inv = ch.inverse();
                let units: Vec<Option<f64>> = (0..free.len()).map(|j| Some((2.0 * inv[(j, j)]).sqrt())).collect();
                // Box corner in full coordinates, per √δ.
                let corner = &l.map(f64::abs) * DMatrix::from_fn(free.len(), 1, |j, _| units[j].unwrap_or(0.0));
                let drift = 0.5 * (corner.transpose() * &b * &corner)[(0, 0)];
                (units, drift)
            }
            None => (vec![None; free.len()], 0.0),
        }
    };
    PointCell {
        center: center.clone(),
        alpha,
        pivot,
        arc_unit,
        drift,
    }
}

/// The indicator `|f(z) − η| ≤ δ`.
pub fn sublevel_indicator(f: &Polynomial, eta: Complex64, delta: f64) -> impl Fn(&[Complex64]) -> bool + Sync + '_ {
    let d2 = delta * delta;
    move |z: &[Complex64]| (f.eval(z) - eta).norm_sqr() <= d2
}

/// One volume estimate.
pub fn estimate_sublevel<E: Executor>(exec: &E, q: &SublevelQuery, opts: &SublevelOptions) -> Result<SublevelPoint> {
    q.validate()?;
    let n = q.f.n_vars();
    let proposal = match &q.proposal {
        Proposal::Whole => RegionUnion::single(Region::full(n, q.weight)),
        Proposal::Explicit(u) => u.clone(),
        Proposal::Auto => {
            let (plan, _) = ProposalPlan::analyze(exec, &q.f, q.eta, &opts.contact)?;
            plan.regions(q.delta, q.weight, opts.safety)?
        }
    };
    estimate_with(exec, &q.f, q.eta, q.delta, &proposal, &opts.estimator)
}

fn estimate_with<E: Executor>(
    exec: &E,
    f: &Polynomial,
    eta: Complex64,
    delta: f64,
    proposal: &RegionUnion,
    cfg: &EstimatorConfig,
) -> Result<SublevelPoint> {
    let ind = sublevel_indicator(f, eta, delta);
    let estimate = estimate_volume(exec, proposal, &ind, cfg, &[TAG_SUBLEVEL, delta.to_bits()])?;
    Ok(SublevelPoint { delta, estimate })
}

/// Estimates the volume at every `δ` with one AUTO plan.
pub fn scan_sublevel<E: Executor>(
    exec: &E,
    f: &Polynomial,
    eta: Complex64,
    weight: WeightParam,
    deltas: &[f64],
    opts: &SublevelOptions,
) -> Result<(Vec<SublevelPoint>, ProposalPlan, Vec<String>)> {
    let (plan, warnings) = ProposalPlan::analyze(exec, f, eta, &opts.contact)?;
    let points = deltas
        .iter()
        .map(|&d| {
            SublevelQuery {
                f: f.clone(),
                eta,
                delta: d,
                weight,
                proposal: Proposal::Auto,
            }
            .validate()?;
            let proposal = plan.regions(d, weight, opts.safety)?;
            estimate_with(exec, f, eta, d, &proposal, &opts.estimator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, plan, warnings))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub max_abs_residual: f64,
    /// Every estimate, trusted or not.
    pub points: Vec<SublevelPoint>,
    /// Which points entered the regression.
    pub used: Vec<bool>,
}

/// Weighted log-log fit over the trusted points; needs at least four.
pub fn fit_points(points: Vec<SublevelPoint>) -> Result<ExponentFit> {
    let used: Vec<bool> = points
        .iter()
        .map(|p| p.estimate.trusted && !p.estimate.upper_bound && p.estimate.value > 0.0)
        .collect();
    let kept: Vec<&SublevelPoint> = points.iter().zip(&used).filter(|(_, &u)| u).map(|(p, _)| p).collect();
    if kept.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: kept.len(),
        });
    }
    let d: Vec<f64> = kept.iter().map(|p| p.delta).collect();
    let v: Vec<f64> = kept.iter().map(|p| p.estimate.value).collect();
    let s: Vec<f64> = kept.iter().map(|p| p.estimate.stderr).collect();
    let LineFit {
        slope,
        intercept,
        slope_stderr,
        max_abs_residual,
    } = loglog(&d, &v, &s)?;
    Ok(ExponentFit {
        slope,
        intercept,
        slope_stderr,
        max_abs_residual,
        points,
        used,
    })
}

/// Scaling exponent of `δ ↦ V_β({|f − η| ≤ δ})`.
pub fn fit_exponent<E: Executor>(
    exec: &E,
    f: &Polynomial,
    eta: Complex64,
    weight: WeightParam,
    deltas: &[f64],
    opts: &SublevelOptions,
) -> Result<ExponentFit> {
    if deltas.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: deltas.len(),
        });
    }
    let (points, _, _) = scan_sublevel(exec, f, eta, weight, deltas, opts)?;
    fit_points(points)
}
