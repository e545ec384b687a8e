//! Rank-based deciders for boundedness of `C_φ`.
//!
//! [`check_dagger`] tests the sufficient condition "`d_ζΦ_I` has rank `|I|`
//! wherever `Φ_I(ζ) ∈ T^{|I|}`" over every nonempty `I`. [`decide_bidisc`]
//! and [`decide_tridisc`] are the exact characterizations on `D²` (any `β`,
//! and `H²`) and on `D³` (classical Bergman space).
//!
//! Positive-dimensional contact sets are checked on their stored sample, so
//! a verdict is only as dense as `ContactOptions::sample_cap`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::contact::{find_contact_set, jc_check, rank_report, ContactOptions, ContactSet, RankReport};
use crate::exec::Executor;
use crate::measure::WeightParam;
use crate::symbols::{PolySymbol, TorusPoint};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CriteriaOptions {
    pub contact: ContactOptions,
    /// Relative singular value cutoff.
    pub rank_tol: f64,
    /// Allowed imaginary part / negativity of Julia–Carathéodory derivatives.
    pub jc_tol: f64,
    /// Smallest partial derivative modulus that counts as nonzero.
    pub entry_tol: f64,
    /// Partial derivatives at or below this count as zero; between the two
    /// the entry test is inconclusive.
    pub entry_floor: f64,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        Self {
            contact: ContactOptions::default(),
            rank_tol: 1e-8,
            jc_tol: 1e-6,
            entry_tol: 1e-6,
            entry_floor: 1e-8,
        }
    }
}

/// A contact point where a rank condition fails.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Witness {
    pub point: TorusPoint,
    pub indices: Vec<usize>,
    /// Numerical rank of `d_ζΦ_I` found there.
    pub rank: usize,
    /// Smallest `|∂Φ_i/∂z_j(ζ)|`, `i ∈ I`, when the entry test also failed.
    pub min_entry: Option<f64>,
}

impl Witness {
    /// Recomputes the contact residual and the failed conditions from
    /// scratch.
    pub fn reverify(&self, phi: &PolySymbol, opts: &CriteriaOptions) -> Result<bool> {
        let z = self.point.point();
        let values = phi.eval(&z)?;
        let residual = self
            .indices
            .iter()
            .map(|&i| 1.0 - values[i].norm())
            .fold(f64::NEG_INFINITY, f64::max);
        if !(residual.abs() <= opts.contact.contact_tol) {
            return Ok(false);
        }
        let rank = rank_report(phi, &self.indices, &self.point, opts.rank_tol)?;
        if rank.passes || rank.inconclusive || rank.rank != self.rank {
            return Ok(false);
        }
        match self.min_entry {
            None => Ok(true),
            Some(_) => Ok(min_entry(phi, &self.indices, &self.point)? <= opts.entry_floor),
        }
    }
}

/// What was checked on the contact set of one index set.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexEvidence {
    pub indices: Vec<usize>,
    /// `empty`, `finite` or `positive-dimensional`.
    pub contact: String,
    /// Contact points checked.
    pub samples: usize,
    /// Points where the rank condition held.
    pub rank_passes: usize,
    pub inconclusive: usize,
    /// Report with the smallest `σ_min/σ₁` among the samples.
    pub worst: Option<RankReport>,
    /// Singletons only: every Julia–Carathéodory derivative was real and
    /// nonnegative.
    pub jc_passes: Option<bool>,
    /// Pairs in the tridisc test only: smallest partial derivative modulus.
    pub min_entry: Option<f64>,
    pub warnings: Vec<String>,
}

impl IndexEvidence {
    fn new(set: &ContactSet) -> Self {
        Self {
            indices: set.indices.clone(),
            contact: set.kind.label().to_string(),
            samples: set.kind.points().len(),
            rank_passes: 0,
            inconclusive: 0,
            worst: None,
            jc_passes: None,
            min_entry: None,
            warnings: set.warnings.clone(),
        }
    }

    fn record(&mut self, report: RankReport) {
        if report.passes && !report.inconclusive {
            self.rank_passes += 1;
        }
        if report.inconclusive {
            self.inconclusive += 1;
        }
        let ratio = |r: &RankReport| min_ratio(&r.singular_values, r.target);
        if self.worst.as_ref().is_none_or(|w| ratio(&report) < ratio(w)) {
            self.worst = Some(report);
        }
    }
}

/// `σ_target/σ₁`, zero if missing.
fn min_ratio(sv: &[f64], target: usize) -> f64 {
    match (sv.first(), sv.get(target.wrapping_sub(1))) {
        (Some(&s1), Some(&s)) if s1 > 0.0 => s / s1,
        _ => 0.0,
    }
}

fn min_entry(phi: &PolySymbol, indices: &[usize], point: &TorusPoint) -> Result<f64> {
    let jac = phi.jacobian_rows(&point.point(), indices)?;
    Ok(jac.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    SufficiencyHolds,
    NecessityFails(Witness),
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub outcome: Outcome,
    /// One entry per index set examined, in canonical order.
    pub evidence: Vec<IndexEvidence>,
}

/// Nonempty subsets of `0..n` by size, then lexicographically.
pub fn index_sets(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            let Some(pos) = (0..size).rev().find(|&p| idx[p] < n - size + p) else {
                break;
            };
            idx[pos] += 1;
            for q in pos + 1..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

fn check_square(phi: &PolySymbol, n: Option<usize>) -> Result<()> {
    if phi.n_in() != phi.n_out() {
        return Err(Error::DimensionMismatch {
            expected: phi.n_in(),
            got: phi.n_out(),
        });
    }
    if let Some(n) = n {
        if phi.n_in() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.n_in(),
            });
        }
    }
    Ok(())
}

/// Result of the rank test on one contact set.
enum RankCheck {
    Pass(IndexEvidence),
    Fail(IndexEvidence, Witness),
    Inconclusive(IndexEvidence, String),
}

fn rank_check<E: Executor>(exec: &E, phi: &PolySymbol, indices: &[usize], opts: &CriteriaOptions) -> Result<RankCheck> {
    let set = find_contact_set(exec, phi, indices, &opts.contact)?;
    let mut ev = IndexEvidence::new(&set);
    let mut failure = None;
    let mut doubt = None;
    let mut jc_ok = true;
    for cp in set.kind.points() {
        let report = rank_report(phi, indices, &cp.point, opts.rank_tol)?;
        if report.inconclusive {
            doubt.get_or_insert_with(|| {
                format!("rank of d_ζΦ_{:?} in the tolerance band at {:?}", one_based(indices), cp.point.angles())
            });
        } else if !report.passes && failure.is_none() {
            failure = Some(Witness {
                point: cp.point.clone(),
                indices: indices.to_vec(),
                rank: report.rank,
                min_entry: None,
            });
        }
        if let [i] = indices {
            let f = phi.component(*i);
            let v = f.eval(&cp.point.point());
            let eta = v / v.norm();
            jc_ok &= jc_check(f, &cp.point, eta, opts.contact.contact_tol, opts.jc_tol)?.passes;
        }
        ev.record(report);
    }
    if indices.len() == 1 && ev.samples > 0 {
        ev.jc_passes = Some(jc_ok);
        if !jc_ok {
            doubt.get_or_insert_with(|| {
                format!("Julia–Carathéodory derivatives of Φ_{} are not real and nonnegative", indices[0] + 1)
            });
        }
    }
    Ok(match (failure, doubt) {
        (Some(w), _) => RankCheck::Fail(ev, w),
        (None, Some(reason)) => RankCheck::Inconclusive(ev, reason),
        (None, None) => RankCheck::Pass(ev),
    })
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|i| i + 1).collect()
}

/// Tests the rank-sufficiency condition on every nonempty index set and
/// stops at the first rank-deficient contact point.
///
/// A definite failure wins over earlier inconclusive sets.
pub fn check_dagger<E: Executor>(exec: &E, phi: &PolySymbol, opts: &CriteriaOptions) -> Result<Verdict> {
    check_square(phi, None)?;
    let mut evidence = Vec::new();
    let mut doubt = None;
    for indices in index_sets(phi.n_in()) {
        match rank_check(exec, phi, &indices, opts)? {
            RankCheck::Pass(ev) => evidence.push(ev),
            RankCheck::Inconclusive(ev, reason) => {
                evidence.push(ev);
                doubt.get_or_insert(reason);
            }
            RankCheck::Fail(ev, w) => {
                evidence.push(ev);
                return Ok(Verdict {
                    outcome: Outcome::NecessityFails(w),
                    evidence,
                });
            }
        }
    }
    let outcome = match doubt {
        Some(reason) => Outcome::Inconclusive(reason),
        None => Outcome::SufficiencyHolds,
    };
    Ok(Verdict { outcome, evidence })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Decision {
    Bounded,
    Unbounded(Witness),
    Inconclusive(String),
}

impl Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Bounded => "Bounded",
            Decision::Unbounded(_) => "Unbounded",
            Decision::Inconclusive(_) => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BidiscReport {
    pub decision: Decision,
    pub beta: f64,
    /// Spaces the decision applies to.
    pub spaces: Vec<String>,
    pub evidence: IndexEvidence,
}

/// `C_φ` is bounded on `A²_β(D²)` (and on `H²(D²)`) iff `d_ζφ` is invertible
/// wherever `φ(ζ) ∈ T²`. The criterion does not depend on `β`; it is
/// carried for reporting.
pub fn decide_bidisc<E: Executor>(
    exec: &E,
    phi: &PolySymbol,
    beta: WeightParam,
    opts: &CriteriaOptions,
) -> Result<BidiscReport> {
    check_square(phi, Some(2))?;
    let (decision, evidence) = match rank_check(exec, phi, &[0, 1], opts)? {
        RankCheck::Pass(ev) => (Decision::Bounded, ev),
        RankCheck::Fail(ev, w) => (Decision::Unbounded(w), ev),
        RankCheck::Inconclusive(ev, reason) => (Decision::Inconclusive(reason), ev),
    };
    Ok(BidiscReport {
        decision,
        beta: beta.beta(),
        spaces: vec![format!("A²_β(D²), β = {}", beta.beta()), "H²(D²)".to_string()],
        evidence,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TridiscReport {
    pub decision: Decision,
    /// `{1,2,3}` first, then the three pairs.
    pub evidence: Vec<IndexEvidence>,
}

/// How one pair contact point fares under "gradients independent, or all
/// partials nonzero".
enum PairPoint {
    Pass,
    Fail(Witness),
    Doubt(String),
}

fn pair_point(phi: &PolySymbol, pair: &[usize], point: &TorusPoint, opts: &CriteriaOptions) -> Result<(PairPoint, RankReport, f64)> {
    let report = rank_report(phi, pair, point, opts.rank_tol)?;
    let entry = min_entry(phi, pair, point)?;
    let independent = report.passes && !report.inconclusive;
    let nonzero = entry > opts.entry_tol;
    let state = if independent || nonzero {
        PairPoint::Pass
    } else if report.inconclusive || entry > opts.entry_floor {
        PairPoint::Doubt(format!(
            "pair {:?} at {:?}: gradient rank or partial derivative {entry:.3e} in the tolerance band",
            one_based(pair),
            point.angles()
        ))
    } else {
        PairPoint::Fail(Witness {
            point: point.clone(),
            indices: pair.to_vec(),
            rank: report.rank,
            min_entry: Some(entry),
        })
    };
    Ok((state, report, entry))
}

/// `C_φ` is bounded on `A²(D³)` iff `d_ζφ` is invertible wherever
/// `φ(ζ) ∈ T³`, and for each pair `i1 < i2` with `(φ_{i1}, φ_{i2})(ζ) ∈ T²`
/// either the two gradients are independent or all their entries are
/// nonzero.
pub fn decide_tridisc<E: Executor>(exec: &E, phi: &PolySymbol, opts: &CriteriaOptions) -> Result<TridiscReport> {
    check_square(phi, Some(3))?;
    let mut evidence = Vec::new();
    let mut doubt = None;
    match rank_check(exec, phi, &[0, 1, 2], opts)? {
        RankCheck::Pass(ev) => evidence.push(ev),
        RankCheck::Inconclusive(ev, reason) => {
            evidence.push(ev);
            doubt = Some(reason);
        }
        RankCheck::Fail(ev, w) => {
            evidence.push(ev);
            return Ok(TridiscReport {
                decision: Decision::Unbounded(w),
                evidence,
            });
        }
    }
    for pair in [[0, 1], [0, 2], [1, 2]] {
        let set = find_contact_set(exec, phi, &pair, &opts.contact)?;
        let mut ev = IndexEvidence::new(&set);
        let mut failure = None;
        for cp in set.kind.points() {
            let (state, report, entry) = pair_point(phi, &pair, &cp.point, opts)?;
            ev.min_entry = Some(ev.min_entry.map_or(entry, |m: f64| m.min(entry)));
            ev.record(report);
            match state {
                PairPoint::Pass => {}
                PairPoint::Doubt(reason) => {
                    doubt.get_or_insert(reason);
                }
                PairPoint::Fail(w) => {
                    failure.get_or_insert(w);
                }
            }
        }
        evidence.push(ev);
        if let Some(w) = failure {
            return Ok(TridiscReport {
                decision: Decision::Unbounded(w),
                evidence,
            });
        }
    }
    let decision = match doubt {
        Some(reason) => Decision::Inconclusive(reason),
        None => Decision::Bounded,
    };
    Ok(TridiscReport { decision, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::symbols::catalog::*;
    use crate::symbols::wrap_angle;

    fn opts() -> CriteriaOptions {
        CriteriaOptions::default()
    }

    #[test]
    fn index_sets_are_canonical() {
        let sets = index_sets(3);
        let expect: Vec<Vec<usize>> = vec![
            vec![0],
            vec![1],
            vec![2],
            vec![0, 1],
            vec![0, 2],
            vec![1, 2],
            vec![0, 1, 2],
        ];
        assert_eq!(sets, expect);
        assert_eq!(index_sets(4).len(), 15);
    }

    #[test]
    fn identity_satisfies_dagger() {
        for n in 1..=3 {
            let v = check_dagger(&Sequential, &identity(n), &opts()).unwrap();
            assert_eq!(v.outcome, Outcome::SufficiencyHolds, "n = {n}");
            assert_eq!(v.evidence.len(), (1 << n) - 1);
            assert!(v.evidence.iter().all(|e| e.rank_passes == e.samples));
        }
    }

    #[test]
    fn repeated_product_fails_on_first_pair() {
        // (z1z2, 0) has a single copy of the product, so nothing to fail
        let v = check_dagger(&Sequential, &repeated(&product(2)), &opts()).unwrap();
        assert_eq!(v.outcome, Outcome::SufficiencyHolds);
        for n in 3..=3 {
            let phi = repeated(&product(n));
            let v = check_dagger(&Sequential, &phi, &opts()).unwrap();
            let Outcome::NecessityFails(w) = &v.outcome else {
                panic!("n = {n}: {:?}", v.outcome);
            };
            assert_eq!(w.indices, vec![0, 1]);
            assert_eq!(w.rank, 1);
            assert!(w.reverify(&phi, &opts()).unwrap());
            // singletons pass, including the Julia–Carathéodory layer
            for e in &v.evidence[..n] {
                assert_eq!(e.indices.len(), 1);
                if e.samples > 0 {
                    assert_eq!(e.jc_passes, Some(true));
                }
            }
        }
    }

    #[test]
    fn square_second_satisfies_dagger() {
        let v = check_dagger(&Sequential, &square_second(), &opts()).unwrap();
        assert_eq!(v.outcome, Outcome::SufficiencyHolds);
    }

    #[test]
    fn bidisc_examples() {
        let w = WeightParam::lebesgue();
        for phi in [identity(2), square_second(), damped_product_pair()] {
            let r = decide_bidisc(&Sequential, &phi, w, &opts()).unwrap();
            assert_eq!(r.decision, Decision::Bounded, "{:?}", phi.to_rows());
        }
        let r = decide_bidisc(&Sequential, &damped_product_pair(), w, &opts()).unwrap();
        assert_eq!(r.evidence.contact, "empty");

        let phi = diagonal_pair();
        let r = decide_bidisc(&Sequential, &phi, WeightParam::new(1.0).unwrap(), &opts()).unwrap();
        let Decision::Unbounded(wit) = &r.decision else {
            panic!("{:?}", r.decision);
        };
        let a = wit.point.angles();
        assert!(wrap_angle(a[0] - a[1]).abs() < 1e-6, "witness off the diagonal: {a:?}");
        assert_eq!(wit.rank, 1);
        assert!(wit.reverify(&phi, &opts()).unwrap());
        assert_eq!(r.spaces.len(), 2);
    }

    #[test]
    fn bidisc_rejects_wrong_dimension() {
        let err = decide_bidisc(&Sequential, &identity(3), WeightParam::lebesgue(), &opts());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bidisc_agrees_with_dagger_pair_clause() {
        let battery = [
            identity(2),
            square_second(),
            damped_product_pair(),
            diagonal_pair(),
            swap(),
            repeated(&product(2)),
            half_first(),
        ];
        for phi in battery {
            let bidisc = decide_bidisc(&Sequential, &phi, WeightParam::lebesgue(), &opts()).unwrap();
            let dagger = check_dagger(&Sequential, &phi, &opts()).unwrap();
            let singles_ok = dagger.evidence[..2.min(dagger.evidence.len())]
                .iter()
                .all(|e| e.rank_passes == e.samples && e.jc_passes != Some(false));
            let pair_ok = dagger.outcome == Outcome::SufficiencyHolds;
            assert!(singles_ok, "{:?}", phi.to_rows());
            assert_eq!(bidisc.decision == Decision::Bounded, pair_ok, "{:?}", phi.to_rows());
        }
    }

    #[test]
    fn tridisc_examples() {
        let phi = repeated(&product(3));
        let r = decide_tridisc(&Sequential, &phi, &opts()).unwrap();
        assert_eq!(r.decision, Decision::Bounded);
        let pair = &r.evidence[1];
        assert_eq!(pair.indices, vec![0, 1]);
        assert!(pair.samples > 0);
        // gradients dependent everywhere, entries unimodular
        assert_eq!(pair.rank_passes, 0);
        assert!((pair.min_entry.unwrap() - 1.0).abs() < 1e-9);

        let r = decide_tridisc(&Sequential, &identity(3), &opts()).unwrap();
        assert_eq!(r.decision, Decision::Bounded);

        let phi = rank_one_triple();
        let r = decide_tridisc(&Sequential, &phi, &opts()).unwrap();
        let Decision::Unbounded(w) = &r.decision else {
            panic!("{:?}", r.decision);
        };
        assert_eq!(w.indices, vec![0, 1]);
        assert_eq!(w.min_entry, Some(0.0));
        assert!(w.reverify(&phi, &opts()).unwrap());
    }

    #[test]
    fn dagger_is_sufficient_not_necessary_on_tridisc() {
        let phi = repeated(&product(3));
        let dagger = check_dagger(&Sequential, &phi, &opts()).unwrap();
        assert!(matches!(dagger.outcome, Outcome::NecessityFails(_)));
        let tri = decide_tridisc(&Sequential, &phi, &opts()).unwrap();
        assert_eq!(tri.decision, Decision::Bounded);
    }

    #[test]
    fn witness_reverify_rejects_moved_point() {
        let phi = diagonal_pair();
        let w = Witness {
            point: TorusPoint::new(vec![0.0, 1.0]),
            indices: vec![0, 1],
            rank: 1,
            min_entry: None,
        };
        assert!(!w.reverify(&phi, &opts()).unwrap());
    }
}
