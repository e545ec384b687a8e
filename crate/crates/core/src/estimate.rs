//! Batched Monte Carlo volume estimation with a leakage audit.
//!
//! The main pass samples each member of a [`RegionUnion`] in proportion to
//! its mass and counts a hit only in the first member containing it. The
//! audit spends a fraction of the budget looking for indicator mass the
//! proposal missed: half on the dilated union (outside the proposal), half
//! on the whole polydisc (outside the dilated union). The audited mass is
//! added to the estimate and, if it exceeds `leakage_tol` of the main
//! estimate, the result is flagged untrusted.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::exec::Executor;
use crate::measure::{Region, RegionUnion, WeightParam};
use crate::rng::batch_rng;
use crate::{Error, Result};

const PHASE_MAIN: u64 = 1;
const PHASE_DILATED: u64 = 2;
const PHASE_GLOBAL: u64 = 3;

/// Estimator settings. Results depend only on these and the caller's tags,
/// never on how batches are scheduled.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EstimatorConfig {
    pub budget: u64,
    pub batch_size: u64,
    pub audit_fraction: f64,
    pub dilation: f64,
    pub leakage_tol: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            budget: 1_000_000,
            batch_size: 1 << 15,
            audit_fraction: 0.1,
            dilation: 4.0,
            leakage_tol: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    /// Main estimate plus audited leakage; with `upper_bound` set, a
    /// one-sided bound instead.
    pub value: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
    /// Summed mass of the proposal regions.
    pub region_mass: f64,
    pub main: f64,
    pub main_stderr: f64,
    pub leakage: f64,
    pub leakage_stderr: f64,
    pub leakage_hits: u64,
    pub audit_samples: u64,
    pub trusted: bool,
    /// No hits at all: `value` is `3/samples × region_mass`.
    pub upper_bound: bool,
}

impl Estimate {
    /// Standard error relative to the value.
    pub fn relative_stderr(&self) -> f64 {
        if self.value > 0.0 {
            self.stderr / self.value
        } else {
            f64::INFINITY
        }
    }
}

/// A region and its share of a phase's samples.
struct Stratum<'a> {
    region: &'a Region,
    index: usize,
    samples: u64,
}

struct Tally {
    value: f64,
    variance: f64,
    hits: u64,
    samples: u64,
}

fn split_budget(regions: &[Region], budget: u64) -> Vec<u64> {
    let total: f64 = regions.iter().map(Region::mass).sum();
    let floor = 256u64.min(budget);
    regions
        .iter()
        .map(|r| ((budget as f64 * r.mass() / total).round() as u64).max(floor))
        .collect()
}

fn run_phase<E, F>(
    exec: &E,
    strata: &[Stratum<'_>],
    accept: &F,
    cfg: &EstimatorConfig,
    tags: &[u64],
    phase: u64,
) -> Tally
where
    E: Executor,
    F: Fn(&[Complex64], usize) -> bool + Sync,
{
    let batch = cfg.batch_size.max(1);
    let mut jobs: Vec<(usize, u64, u64)> = Vec::new();
    for (s, st) in strata.iter().enumerate() {
        let mut left = st.samples;
        let mut b = 0u64;
        while left > 0 {
            let take = left.min(batch);
            jobs.push((s, b, take));
            left -= take;
            b += 1;
        }
    }
    let counts = exec.run(jobs.len(), |k| {
        let (s, b, take) = jobs[k];
        let st = &strata[s];
        let mut stream_tags = tags.to_vec();
        stream_tags.extend_from_slice(&[phase, st.index as u64]);
        let mut rng = batch_rng(cfg.seed, &stream_tags, b);
        let mut z = vec![Complex64::new(0.0, 0.0); st.region.dim()];
        let mut hits = 0u64;
        for _ in 0..take {
            st.region.sample_into(&mut rng, &mut z);
            if accept(&z, st.index) {
                hits += 1;
            }
        }
        hits
    });
    let mut per = vec![0u64; strata.len()];
    for (k, h) in counts.into_iter().enumerate() {
        per[jobs[k].0] += h;
    }
    let mut t = Tally {
        value: 0.0,
        variance: 0.0,
        hits: 0,
        samples: 0,
    };
    for (st, &h) in strata.iter().zip(&per) {
        if st.samples == 0 {
            continue;
        }
        let m = st.region.mass();
        let p = h as f64 / st.samples as f64;
        t.value += m * p;
        t.variance += m * m * p * (1.0 - p) / st.samples as f64;
        t.hits += h;
        t.samples += st.samples;
    }
    t
}

/// Estimates `V_β({z : indicator(z)})` using `proposal` for importance
/// sampling. `tags` separate the random streams of different estimates
/// sharing one seed.
pub fn estimate_volume<E, F>(
    exec: &E,
    proposal: &RegionUnion,
    indicator: &F,
    cfg: &EstimatorConfig,
    tags: &[u64],
) -> Result<Estimate>
where
    E: Executor,
    F: Fn(&[Complex64]) -> bool + Sync,
{
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.audit_fraction) || !(cfg.dilation >= 1.0) {
        return Err(Error::InvalidArgument(
            "audit fraction must lie in [0, 1) and dilation be at least 1".into(),
        ));
    }
    let n = proposal.dim();
    let weight = proposal.regions()[0].weight();
    let full = proposal.is_full();
    let audit = if full {
        0
    } else {
        (cfg.budget as f64 * cfg.audit_fraction).round() as u64
    };
    let main_budget = cfg.budget - audit;

    let regions = proposal.regions();
    let split = split_budget(regions, main_budget);
    let strata: Vec<Stratum<'_>> = regions
        .iter()
        .zip(&split)
        .enumerate()
        .map(|(index, (region, &samples))| Stratum { region, index, samples })
        .collect();
    let main = run_phase(
        exec,
        &strata,
        &|z: &[Complex64], i: usize| indicator(z) && !proposal.owned_before(z, i),
        cfg,
        tags,
        PHASE_MAIN,
    );

    let (mut leak_value, mut leak_var, mut leak_hits, mut audit_samples) = (0.0, 0.0, 0, 0);
    if audit > 0 {
        let dilated = proposal.dilate(cfg.dilation)?;
        let half = audit / 2;
        let dsplit = split_budget(dilated.regions(), half);
        let dstrata: Vec<Stratum<'_>> = dilated
            .regions()
            .iter()
            .zip(&dsplit)
            .enumerate()
            .map(|(index, (region, &samples))| Stratum { region, index, samples })
            .collect();
        let d = run_phase(
            exec,
            &dstrata,
            &|z: &[Complex64], i: usize| indicator(z) && !proposal.contains(z) && !dilated.owned_before(z, i),
            cfg,
            tags,
            PHASE_DILATED,
        );
        let global_region = Region::full(n, weight);
        let gstrata = [Stratum {
            region: &global_region,
            index: 0,
            samples: audit - half,
        }];
        let g = run_phase(
            exec,
            &gstrata,
            &|z: &[Complex64], _| indicator(z) && !proposal.contains(z) && !dilated.contains(z),
            cfg,
            tags,
            PHASE_GLOBAL,
        );
        leak_value = d.value + g.value;
        leak_var = d.variance + g.variance;
        leak_hits = d.hits + g.hits;
        audit_samples = d.samples + g.samples;
    }

    let region_mass = proposal.total_mass();
    let upper_bound = main.hits == 0 && leak_hits == 0;
    let (value, stderr) = if upper_bound {
        (3.0 / main.samples as f64 * region_mass, 0.0)
    } else {
        (main.value + leak_value, (main.variance + leak_var).sqrt())
    };
    Ok(Estimate {
        value,
        stderr,
        hits: main.hits,
        samples: main.samples,
        region_mass,
        main: main.value,
        main_stderr: main.variance.sqrt(),
        leakage: leak_value,
        leakage_stderr: leak_var.sqrt(),
        leakage_hits: leak_hits,
        audit_samples,
        trusted: !upper_bound && leak_value <= cfg.leakage_tol * main.value,
        upper_bound,
    })
}

/// Plain sampling of the whole polydisc with the same batching.
pub fn estimate_volume_uniform<E, F>(
    exec: &E,
    n: usize,
    weight: WeightParam,
    indicator: &F,
    cfg: &EstimatorConfig,
    tags: &[u64],
) -> Result<Estimate>
where
    E: Executor,
    F: Fn(&[Complex64]) -> bool + Sync,
{
    estimate_volume(exec, &RegionUnion::single(Region::full(n, weight)), indicator, cfg, tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::measure::{disc_cap_measure, AngleSpec, CoordRegion};

    fn w0() -> WeightParam {
        WeightParam::lebesgue()
    }

    fn cfg(budget: u64, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            budget,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn whole_polydisc_has_volume_one() {
        let e = estimate_volume_uniform(&Sequential, 2, w0(), &|_: &[Complex64]| true, &cfg(10_000, 1), &[]).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert!(e.trusted);
    }

    #[test]
    fn cap_volume_through_a_corner_proposal() {
        let one = Complex64::new(1.0, 0.0);
        let exact = disc_cap_measure(one, 0.25, w0()).unwrap();
        let corner = Region::new(vec![CoordRegion::Corner { center: one, radius: 0.75 }], w0()).unwrap();
        let e = estimate_volume(
            &Sequential,
            &RegionUnion::single(corner),
            &|z: &[Complex64]| (z[0] - one).norm() <= 0.25,
            &cfg(400_000, 2),
            &[],
        )
        .unwrap();
        assert!((e.value - exact).abs() <= 3.0 * e.stderr, "{} vs {exact}", e.value);
        assert!(e.trusted);
    }

    #[test]
    fn leakage_is_detected() {
        // The proposal covers only half of the target set.
        let upper = Region::new(
            vec![CoordRegion::Polar {
                band: 1.0,
                angle: AngleSpec::Arc {
                    center: core::f64::consts::FRAC_PI_2,
                    half_width: core::f64::consts::FRAC_PI_2,
                },
            }],
            w0(),
        )
        .unwrap();
        let e = estimate_volume(
            &Sequential,
            &RegionUnion::single(upper),
            &|z: &[Complex64]| z[0].norm() < 0.5,
            &cfg(200_000, 3),
            &[],
        )
        .unwrap();
        assert!(!e.trusted);
        assert!(e.leakage > 0.05);
        assert!((e.value - 0.25).abs() < 5.0 * e.stderr);
    }

    #[test]
    fn zero_hits_give_a_one_sided_bound() {
        let e = estimate_volume_uniform(&Sequential, 1, w0(), &|_: &[Complex64]| false, &cfg(30_000, 4), &[]).unwrap();
        assert!(e.upper_bound);
        assert!(!e.trusted);
        assert!((e.value - 3.0 / 30_000.0).abs() < 1e-15);
    }

    #[test]
    fn overlapping_union_counts_once() {
        let a = Region::new(
            vec![CoordRegion::Polar {
                band: 1.0,
                angle: AngleSpec::Arc { center: 0.0, half_width: 1.0 },
            }],
            w0(),
        )
        .unwrap();
        let b = Region::new(
            vec![CoordRegion::Polar {
                band: 1.0,
                angle: AngleSpec::Arc { center: 0.5, half_width: 1.0 },
            }],
            w0(),
        )
        .unwrap();
        let target = |z: &[Complex64]| crate::symbols::wrap_angle(z[0].arg() - 0.25).abs() < 0.5;
        let e = estimate_volume(&Sequential, &RegionUnion::new(vec![a, b]).unwrap(), &target, &cfg(400_000, 5), &[])
            .unwrap();
        let exact = 0.5 / core::f64::consts::PI;
        assert!((e.value - exact).abs() <= 3.0 * e.stderr, "{} vs {exact}", e.value);
    }

    #[test]
    fn doubling_budget_shrinks_stderr() {
        let ind = |z: &[Complex64]| (z[0] * z[1] - 1.0).norm() < 0.5;
        let s1 = estimate_volume_uniform(&Sequential, 2, w0(), &ind, &cfg(400_000, 6), &[]).unwrap().stderr;
        let s2 = estimate_volume_uniform(&Sequential, 2, w0(), &ind, &cfg(800_000, 6), &[]).unwrap().stderr;
        let ratio = s2 / s1;
        assert!((ratio - core::f64::consts::FRAC_1_SQRT_2).abs() < 0.1 * core::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn results_do_not_depend_on_batch_scheduling() {
        struct Reversed;
        impl Executor for Reversed {
            fn run<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, tasks: usize, f: F) -> Vec<T> {
                let mut out: Vec<T> = (0..tasks).rev().map(f).collect();
                out.reverse();
                out
            }
        }
        let ind = |z: &[Complex64]| (z[0] - 0.3).norm() < 0.4;
        let c = cfg(100_000, 7);
        let a = estimate_volume_uniform(&Sequential, 1, w0(), &ind, &c, &[9]).unwrap();
        let b = estimate_volume_uniform(&Reversed, 1, w0(), &ind, &c, &[9]).unwrap();
        assert_eq!(a, b);
    }
}
