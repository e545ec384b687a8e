//! Proposal regions for importance sampling.
//!
//! A [`Region`] is a product over coordinates of either a polar cell
//! (a band `1−s ≤ |z| < 1` times an angular constraint) or a corner
//! `D(c,ρ) ∩ D`. Every region knows its exact `V_β` mass and can draw
//! points from `V_β` restricted to itself.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use super::{band_radius, disc_cap_measure, WeightParam};
use crate::symbols::wrap_angle;
use crate::{Error, Result};

/// Angular constraint of a polar coordinate cell.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AngleSpec {
    Full,
    /// `|θ − center| ≤ half_width` (mod 2π).
    Arc { center: f64, half_width: f64 },
    /// `|b(θ − center) + Σ w_i·wrap(θ_i − c_i) − target| ≤ half_width`
    /// (mod 2π), where `terms` lists `(i, w_i, c_i)` for other coordinates.
    /// The coordinate is drawn after the ones it references.
    Combination {
        multiplicity: u32,
        center: f64,
        terms: Vec<(usize, f64, f64)>,
        target: f64,
        half_width: f64,
    },
}

impl AngleSpec {
    /// Fraction of the circle admitted, given the other angles.
    fn fraction(&self) -> f64 {
        match self {
            AngleSpec::Full => 1.0,
            AngleSpec::Arc { half_width, .. } | AngleSpec::Combination { half_width, .. } => half_width / PI,
        }
    }

    fn widened(&self, factor: f64) -> AngleSpec {
        let grow = |hw: f64| hw * factor;
        match self {
            AngleSpec::Full => AngleSpec::Full,
            AngleSpec::Arc { center, half_width } if grow(*half_width) < PI => AngleSpec::Arc {
                center: *center,
                half_width: grow(*half_width),
            },
            AngleSpec::Combination {
                multiplicity,
                center,
                terms,
                target,
                half_width,
            } if grow(*half_width) < PI => AngleSpec::Combination {
                multiplicity: *multiplicity,
                center: *center,
                terms: terms.clone(),
                target: *target,
                half_width: grow(*half_width),
            },
            _ => AngleSpec::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CoordRegion {
    /// `1 − band ≤ |z| < 1` with an angular constraint; `band ∈ (0, 1]`.
    Polar { band: f64, angle: AngleSpec },
    /// `D(center, radius) ∩ D`.
    Corner { center: Complex64, radius: f64 },
}

impl CoordRegion {
    /// The whole disc.
    pub fn full() -> Self {
        CoordRegion::Polar {
            band: 1.0,
            angle: AngleSpec::Full,
        }
    }
}

/// A product region with its `V_β` mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    coords: Vec<CoordRegion>,
    weight: WeightParam,
    /// Sampling order: combination coordinates last.
    order: Vec<usize>,
    /// Per corner coordinate: `(mass, bounding band t0, bounding arc)`.
    corner_boxes: Vec<Option<CornerBox>>,
    mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct CornerBox {
    t0: f64,
    center: f64,
    half_width: f64,
}

impl Region {
    pub fn new(coords: Vec<CoordRegion>, weight: WeightParam) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidRegion("region has no coordinates".into()));
        }
        let mut mass = 1.0;
        let mut corner_boxes = vec![None; n];
        for (j, c) in coords.iter().enumerate() {
            match c {
                CoordRegion::Polar { band, angle } => {
                    if !(*band > 0.0 && *band <= 1.0) {
                        return Err(Error::InvalidRegion(format!("band {band} outside (0, 1]")));
                    }
                    if let AngleSpec::Arc { half_width, .. } | AngleSpec::Combination { half_width, .. } = angle {
                        if !(*half_width > 0.0 && *half_width <= PI) {
                            return Err(Error::InvalidRegion(format!("half-width {half_width} outside (0, π]")));
                        }
                    }
                    if let AngleSpec::Combination { multiplicity, terms, .. } = angle {
                        if *multiplicity == 0 {
                            return Err(Error::InvalidRegion("combination multiplicity must be positive".into()));
                        }
                        for &(i, _, _) in terms {
                            let ok = i != j
                                && match coords.get(i) {
                                    Some(CoordRegion::Polar { angle, .. }) => {
                                        !matches!(angle, AngleSpec::Combination { .. })
                                    }
                                    Some(CoordRegion::Corner { .. }) => true,
                                    None => false,
                                };
                            if !ok {
                                return Err(Error::InvalidRegion(format!(
                                    "combination on coordinate {j} references coordinate {i}, which must be another coordinate without a combination"
                                )));
                            }
                        }
                    }
                    mass *= weight.band_mass(band * (2.0 - band)) * angle.fraction();
                }
                CoordRegion::Corner { center, radius } => {
                    let m = disc_cap_measure(*center, *radius, weight)?;
                    mass *= m;
                    let rho = center.norm();
                    let inner = (rho - radius).max(0.0);
                    let (arc_c, arc_hw) = if *radius < rho {
                        (center.arg(), (radius / rho).asin())
                    } else {
                        (0.0, PI)
                    };
                    corner_boxes[j] = Some(CornerBox {
                        t0: 1.0 - inner * inner,
                        center: arc_c,
                        half_width: arc_hw,
                    });
                }
            }
        }
        if !(mass > 0.0) {
            return Err(Error::EmptyRegion);
        }
        let is_comb = |c: &CoordRegion| {
            matches!(
                c,
                CoordRegion::Polar {
                    angle: AngleSpec::Combination { .. },
                    ..
                }
            )
        };
        let mut order: Vec<usize> = (0..n).filter(|&j| !is_comb(&coords[j])).collect();
        order.extend((0..n).filter(|&j| is_comb(&coords[j])));
        Ok(Self {
            coords,
            weight,
            order,
            corner_boxes,
            mass,
        })
    }

    /// The whole polydisc.
    pub fn full(n: usize, weight: WeightParam) -> Self {
        Self::new(vec![CoordRegion::full(); n], weight).expect("full polydisc is a valid region")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordRegion] {
        &self.coords
    }

    pub fn weight(&self) -> WeightParam {
        self.weight
    }

    /// Exact `V_β` mass.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_full(&self) -> bool {
        self.coords.iter().all(|c| *c == CoordRegion::full())
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        self.coords.iter().enumerate().all(|(j, c)| match c {
            CoordRegion::Polar { band, angle } => {
                let inner = 1.0 - band;
                if z[j].norm_sqr() < inner * inner {
                    return false;
                }
                match angle {
                    AngleSpec::Full => true,
                    AngleSpec::Arc { center, half_width } => wrap_angle(z[j].arg() - center).abs() <= *half_width,
                    AngleSpec::Combination {
                        multiplicity,
                        center,
                        terms,
                        target,
                        half_width,
                    } => {
                        let mut psi = *multiplicity as f64 * wrap_angle(z[j].arg() - center);
                        for &(i, wi, ci) in terms {
                            psi += wi * wrap_angle(z[i].arg() - ci);
                        }
                        wrap_angle(psi - target).abs() <= *half_width
                    }
                }
            }
            CoordRegion::Corner { center, radius } => {
                z[j].norm_sqr() < 1.0 && (z[j] - center).norm_sqr() < radius * radius
            }
        })
    }

    /// Scales every band, arc and corner radius by `factor`, saturating at
    /// the full disc.
    pub fn dilate(&self, factor: f64) -> Result<Region> {
        let coords = self
            .coords
            .iter()
            .map(|c| match c {
                CoordRegion::Polar { band, angle } => CoordRegion::Polar {
                    band: (band * factor).min(1.0),
                    angle: angle.widened(factor),
                },
                CoordRegion::Corner { center, radius } => CoordRegion::Corner {
                    center: *center,
                    radius: radius * factor,
                },
            })
            .collect::<Vec<_>>();
        Region::new(coords, self.weight)
    }

    /// Draws one point from `V_β` restricted to the region.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.dim());
        for &j in &self.order {
            out[j] = match &self.coords[j] {
                CoordRegion::Polar { band, angle } => {
                    let t0 = band * (2.0 - band);
                    let r = band_radius(self.weight, t0, rng.gen::<f64>());
                    let theta = match angle {
                        AngleSpec::Full => TAU * rng.gen::<f64>(),
                        AngleSpec::Arc { center, half_width } => center + half_width * (2.0 * rng.gen::<f64>() - 1.0),
                        AngleSpec::Combination {
                            multiplicity,
                            center,
                            terms,
                            target,
                            half_width,
                        } => {
                            let b = *multiplicity;
                            let mut psi = target + half_width * (2.0 * rng.gen::<f64>() - 1.0);
                            for &(i, wi, ci) in terms {
                                psi -= wi * wrap_angle(out[i].arg() - ci);
                            }
                            let branch = if b > 1 { rng.gen_range(0..b) } else { 0 };
                            center + (psi + TAU * branch as f64) / b as f64
                        }
                    };
                    Complex64::from_polar(r, theta)
                }
                CoordRegion::Corner { center, radius } => {
                    let bx = self.corner_boxes[j].expect("corner bounding box");
                    loop {
                        let r = band_radius(self.weight, bx.t0, rng.gen::<f64>());
                        let theta = bx.center + bx.half_width * (2.0 * rng.gen::<f64>() - 1.0);
                        let z = Complex64::from_polar(r, theta);
                        if (z - center).norm_sqr() < radius * radius {
                            break z;
                        }
                    }
                }
            };
        }
    }
}

/// Draws one point from `V_β` restricted to `region`, returning it with the
/// region's mass.
pub fn restricted_sample<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> (Vec<Complex64>, f64) {
    let mut z = vec![Complex64::new(0.0, 0.0); region.dim()];
    region.sample_into(rng, &mut z);
    (z, region.mass())
}

/// A finite union of regions. A point is attributed to the first region
/// that contains it, so per-region estimates add up without overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionUnion {
    regions: Vec<Region>,
}

impl RegionUnion {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let first = regions.first().ok_or(Error::EmptyRegion)?;
        let n = first.dim();
        if let Some(r) = regions.iter().find(|r| r.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.dim(),
            });
        }
        Ok(Self { regions })
    }

    pub fn single(region: Region) -> Self {
        Self { regions: vec![region] }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn dim(&self) -> usize {
        self.regions[0].dim()
    }

    /// Sum of member masses (an upper bound on the union's mass).
    pub fn total_mass(&self) -> f64 {
        self.regions.iter().map(Region::mass).sum()
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        self.regions.iter().any(|r| r.contains(z))
    }

    /// True when `z` lies in one of the first `i` regions.
    pub fn owned_before(&self, z: &[Complex64], i: usize) -> bool {
        self.regions[..i].iter().any(|r| r.contains(z))
    }

    pub fn is_full(&self) -> bool {
        self.regions.iter().any(Region::is_full)
    }

    pub fn dilate(&self, factor: f64) -> Result<RegionUnion> {
        Ok(Self {
            regions: self.regions.iter().map(|r| r.dilate(factor)).collect::<Result<_>>()?,
        })
    }
}
