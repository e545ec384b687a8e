//! Carleson-box preimage ratios `V_β(Φ⁻¹(S(ξ,δ))) / V_β(S(ξ,δ))` and
//! their growth as the box shrinks toward a contact point.
//!
//! Bounded ratios are evidence for boundedness of `C_Φ`, never a proof.
//! A negative log-log slope of the ratio against `δ` means the Carleson
//! constant blows up.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::contact::ContactOptions;
use crate::estimate::{estimate_volume, Estimate, EstimatorConfig};
use crate::exec::Executor;
use crate::fit::{loglog, LineFit};
use crate::measure::{carleson_box_measure, CarlesonBox, CoordRegion, Region, RegionUnion, WeightParam};
use crate::sublevel::{ProposalPlan, DEFAULT_SAFETY};
use crate::symbols::{PolySymbol, TorusPoint};
use crate::{Error, Result};

const TAG_CARLESON: u64 = 0x4341_524c;

/// Radius used for components that do not shrink; it covers the whole disc.
pub const FULL_RADIUS: f64 = 2.0;

/// Slopes at or above this count as evidence of a bounded ratio.
pub const BOUNDED_SLOPE: f64 = -0.1;
/// Slopes at or below this count as evidence of blow-up.
pub const UNBOUNDED_SLOPE: f64 = -0.3;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CarlesonOptions {
    pub estimator: EstimatorConfig,
    /// Proposal region inflation, as in sublevel estimates.
    pub safety: f64,
    pub contact: ContactOptions,
}

impl Default for CarlesonOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            safety: DEFAULT_SAFETY,
            contact: ContactOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioPoint {
    /// The shrinking radius; `radii` holds the full box.
    pub delta: f64,
    pub radii: Vec<f64>,
    pub ratio: f64,
    pub stderr: f64,
    pub numerator: Estimate,
    pub denominator: f64,
    pub trusted: bool,
}

/// Importance-region recipe for the preimage of boxes centered at `ξ`.
///
/// Each binding component `Φ_j` contributes the sublevel plan of
/// `|Φ_j − ξ_j| < δ_j`. Components with disjoint variable supports are
/// intersected coordinatewise; among overlapping ones only the cheapest
/// region is kept.
#[derive(Clone, Debug)]
pub struct PreimagePlan {
    n: usize,
    /// `(component, plan, variables it depends on)`.
    parts: Vec<(usize, ProposalPlan, Vec<bool>)>,
    pub warnings: Vec<String>,
}

impl PreimagePlan {
    /// Plans for the components marked in `binding`.
    pub fn analyze<E: Executor>(
        exec: &E,
        phi: &PolySymbol,
        center: &TorusPoint,
        binding: &[bool],
        contact: &ContactOptions,
    ) -> Result<Self> {
        check_self_map_shape(phi, center)?;
        let xi = center.point();
        let mut parts = Vec::new();
        let mut warnings = Vec::new();
        for (j, _) in binding.iter().enumerate().filter(|(_, &b)| b) {
            let f = phi.component(j);
            let support: Vec<bool> = (0..phi.n_in()).map(|v| f.degree_in(v) > 0).collect();
            if !support.iter().any(|&s| s) {
                continue;
            }
            let (plan, w) = ProposalPlan::analyze(exec, f, xi[j], contact)?;
            warnings.extend(w.into_iter().map(|w| alloc::format!("component {}: {w}", j + 1)));
            parts.push((j, plan, support));
        }
        Ok(Self {
            n: phi.n_in(),
            parts,
            warnings,
        })
    }

    pub fn regions(&self, radii: &[f64], weight: WeightParam, safety: f64) -> Result<RegionUnion> {
        let mut unions = Vec::with_capacity(self.parts.len());
        for (j, plan, support) in &self.parts {
            let u = plan.regions(radii[*j], weight, safety)?;
            if !u.is_full() {
                unions.push((u, support));
            }
        }
        unions.sort_by(|a, b| a.0.total_mass().total_cmp(&b.0.total_mass()));
        let mut taken = vec![false; self.n];
        let mut chosen: Vec<(&RegionUnion, &Vec<bool>)> = Vec::new();
        for (u, support) in &unions {
            if support.iter().zip(&taken).any(|(&s, &t)| s && t) {
                continue;
            }
            for (t, &s) in taken.iter_mut().zip(support.iter()) {
                *t |= s;
            }
            chosen.push((u, support));
        }
        if chosen.is_empty() {
            return Ok(RegionUnion::single(Region::full(self.n, weight)));
        }
        // Cartesian product of the chosen unions.
        let mut combos: Vec<Vec<CoordRegion>> = vec![vec![CoordRegion::full(); self.n]];
        for (u, support) in chosen {
            let mut next = Vec::with_capacity(combos.len() * u.regions().len());
            for base in &combos {
                for r in u.regions() {
                    let mut coords = base.clone();
                    for (v, c) in r.coords().iter().enumerate() {
                        if support[v] {
                            coords[v] = c.clone();
                        }
                    }
                    next.push(coords);
                }
            }
            combos = next;
        }
        let regions = combos
            .into_iter()
            .map(|c| Region::new(c, weight))
            .collect::<Result<Vec<_>>>()?;
        RegionUnion::new(regions)
    }
}

fn check_self_map_shape(phi: &PolySymbol, center: &TorusPoint) -> Result<()> {
    if phi.n_in() != phi.n_out() {
        return Err(Error::DimensionMismatch {
            expected: phi.n_in(),
            got: phi.n_out(),
        });
    }
    if center.dim() != phi.n_out() {
        return Err(Error::DimensionMismatch {
            expected: phi.n_out(),
            got: center.dim(),
        });
    }
    Ok(())
}

/// Components whose box radius actually constrains the image.
fn binding(radii: &[f64]) -> Vec<bool> {
    radii.iter().map(|&d| d < FULL_RADIUS).collect()
}

fn ratio_with_plan<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    bx: &CarlesonBox,
    weight: WeightParam,
    plan: &PreimagePlan,
    opts: &CarlesonOptions,
    delta: f64,
) -> Result<RatioPoint> {
    let proposal = plan.regions(bx.radii(), weight, opts.safety)?;
    let xi = bx.center().point();
    let r2: Vec<f64> = bx.radii().iter().map(|d| d * d).collect();
    let n_out = phi.n_out();
    let indicator = |z: &[Complex64]| {
        let mut w = [Complex64::new(0.0, 0.0); 8];
        let mut heap;
        let out: &mut [Complex64] = if n_out <= w.len() {
            &mut w[..n_out]
        } else {
            heap = vec![Complex64::new(0.0, 0.0); n_out];
            &mut heap
        };
        phi.eval_into(z, out);
        out.iter().zip(&xi).zip(&r2).all(|((v, x), r)| (v - x).norm_sqr() < *r)
    };
    let mut tags = vec![TAG_CARLESON, weight.beta().to_bits()];
    tags.extend(bx.radii().iter().map(|d| d.to_bits()));
    let numerator = estimate_volume(exec, &proposal, &indicator, &opts.estimator, &tags)?;
    let denominator = carleson_box_measure(bx, weight)?;
    Ok(RatioPoint {
        delta,
        radii: bx.radii().to_vec(),
        ratio: numerator.value / denominator,
        stderr: numerator.stderr / denominator,
        trusted: numerator.trusted,
        numerator,
        denominator,
    })
}

/// `V_β(Φ⁻¹(S)) / V_β(S)` for one box. The numerator is importance sampled,
/// the denominator comes from quadrature.
pub fn preimage_box_ratio<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    bx: &CarlesonBox,
    weight: WeightParam,
    opts: &CarlesonOptions,
) -> Result<RatioPoint> {
    let plan = PreimagePlan::analyze(exec, phi, bx.center(), &binding(bx.radii()), &opts.contact)?;
    let delta = bx.radii().iter().copied().fold(f64::INFINITY, f64::min);
    ratio_with_plan(exec, phi, bx, weight, &plan, opts, delta)
}

/// Box radii for a shrink pattern: `δ` where `shrink[j]`, otherwise
/// [`FULL_RADIUS`].
pub fn pattern_radii(shrink: &[bool], delta: f64) -> Vec<f64> {
    shrink.iter().map(|&s| if s { delta } else { FULL_RADIUS }).collect()
}

/// Shrinks exactly the components that reach the circle at `ζ`.
pub fn contact_pattern(phi: &PolySymbol, zeta: &TorusPoint, tol: f64) -> Result<Vec<bool>> {
    Ok(phi.eval(&zeta.point())?.iter().map(|v| 1.0 - v.norm() <= tol).collect())
}

/// Ratio estimates along `δ ↦ S(ξ, pattern_radii(shrink, δ))`.
pub fn scan_ratios<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    center: &TorusPoint,
    shrink: &[bool],
    weight: WeightParam,
    deltas: &[f64],
    opts: &CarlesonOptions,
) -> Result<(Vec<RatioPoint>, Vec<String>)> {
    if shrink.len() != phi.n_out() {
        return Err(Error::DimensionMismatch {
            expected: phi.n_out(),
            got: shrink.len(),
        });
    }
    let plan = PreimagePlan::analyze(exec, phi, center, shrink, &opts.contact)?;
    let points = deltas
        .iter()
        .map(|&d| {
            let bx = CarlesonBox::new(center.clone(), pattern_radii(shrink, d))?;
            ratio_with_plan(exec, phi, &bx, weight, &plan, opts, d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, plan.warnings))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SlopeEvidence {
    Bounded,
    Weak,
    Unbounded,
}

impl SlopeEvidence {
    pub fn classify(slope: f64) -> Self {
        if slope >= BOUNDED_SLOPE {
            SlopeEvidence::Bounded
        } else if slope <= UNBOUNDED_SLOPE {
            SlopeEvidence::Unbounded
        } else {
            SlopeEvidence::Weak
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioScan {
    pub center: TorusPoint,
    pub shrink: Vec<bool>,
    pub beta: f64,
    pub points: Vec<RatioPoint>,
    pub fit: LineFit,
    /// Which points entered the fit.
    pub used: Vec<bool>,
    pub evidence: SlopeEvidence,
    pub warnings: Vec<String>,
}

/// Log-log fit of ratio against `δ` over trusted points; needs four.
pub fn fit_ratios(points: &[RatioPoint]) -> Result<(LineFit, Vec<bool>)> {
    let used: Vec<bool> = points
        .iter()
        .map(|p| p.trusted && !p.numerator.upper_bound && p.ratio > 0.0)
        .collect();
    let kept: Vec<&RatioPoint> = points.iter().zip(&used).filter(|(_, &u)| u).map(|(p, _)| p).collect();
    if kept.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: kept.len(),
        });
    }
    let d: Vec<f64> = kept.iter().map(|p| p.delta).collect();
    let v: Vec<f64> = kept.iter().map(|p| p.ratio).collect();
    let s: Vec<f64> = kept.iter().map(|p| p.stderr).collect();
    Ok((loglog(&d, &v, &s)?, used))
}

/// Slope of `log ratio` against `log δ` for a shrink pattern.
pub fn ratio_growth_scan<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    center: &TorusPoint,
    shrink: &[bool],
    weight: WeightParam,
    deltas: &[f64],
    opts: &CarlesonOptions,
) -> Result<RatioScan> {
    if deltas.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: deltas.len(),
        });
    }
    let (points, warnings) = scan_ratios(exec, phi, center, shrink, weight, deltas, opts)?;
    let (fit, used) = fit_ratios(&points)?;
    Ok(RatioScan {
        center: center.clone(),
        shrink: shrink.to_vec(),
        beta: weight.beta(),
        evidence: SlopeEvidence::classify(fit.slope),
        points,
        fit,
        used,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaProbe {
    pub scans: Vec<RatioScan>,
    /// Largest ratio over every `(β, δ)`.
    pub max_ratio: f64,
    pub argmax_beta: f64,
    pub argmax_delta: f64,
}

/// One ratio scan per `β`; the maximum over all of them bounds the
/// Carleson constant uniformly in `β` on the probed family.
pub fn beta_uniformity_probe<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    center: &TorusPoint,
    shrink: &[bool],
    betas: &[f64],
    deltas: &[f64],
    opts: &CarlesonOptions,
) -> Result<BetaProbe> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("no weights to probe".into()));
    }
    let scans = betas
        .iter()
        .map(|&b| ratio_growth_scan(exec, phi, center, shrink, WeightParam::new(b)?, deltas, opts))
        .collect::<Result<Vec<_>>>()?;
    let (mut max_ratio, mut argmax_beta, mut argmax_delta) = (f64::NEG_INFINITY, f64::NAN, f64::NAN);
    for s in &scans {
        for p in &s.points {
            if p.ratio > max_ratio {
                (max_ratio, argmax_beta, argmax_delta) = (p.ratio, s.beta, p.delta);
            }
        }
    }
    Ok(BetaProbe {
        scans,
        max_ratio,
        argmax_beta,
        argmax_delta,
    })
}
