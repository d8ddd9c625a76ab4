//! Subjective-logic opinions and the overall social trust value.
//!
//! An opinion is kept as raw positive/negative experience counters. Belief,
//! disbelief and uncertainty are derived on read as `pos/(n+2)`, `neg/(n+2)`
//! and `2/(n+2)` with `n = pos + neg`, and the trust carried by an opinion is
//! its expected value `b + a·u` under the context base rate `a`.
//!
//! Direct trust and recommendations are both expected values. Read literally,
//! the printed direct-trust and recommendation formulas (`b + d + u`) are
//! always 1, which would make them useless as evidence; the expected value is
//! the quantity the model itself names as the trust of an opinion.
//!
//! The overall trust combines direct trust `D`, community similarity `S` and
//! recommendation `R` as `α·D + β·S + γ·R`, where `γ` is the relationship
//! factor of the relation used to filter recommenders and `α = β = (1 − γ)/2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::social::{DeviceId, IdentityId, RelationType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Positive,
    Negative,
}

/// Experience counters one evaluator holds about one subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub pos: u64,
    pub neg: u64,
}

impl Evidence {
    pub fn new(pos: u64, neg: u64) -> Self {
        Evidence { pos, neg }
    }

    pub fn total(&self) -> u64 {
        self.pos + self.neg
    }

    fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Positive => self.pos += 1,
            Outcome::Negative => self.neg += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionComponents {
    pub belief: f64,
    pub disbelief: f64,
    pub uncertainty: f64,
}

/// Binomial opinion: experience counters plus the context base rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opinion {
    pub evidence: Evidence,
    pub base_rate: f64,
}

impl Opinion {
    pub fn new(pos: u64, neg: u64, base_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&base_rate) {
            return Err(Error::ContractViolation(format!(
                "base rate must lie in [0, 1], got {base_rate}"
            )));
        }
        Ok(Opinion {
            evidence: Evidence::new(pos, neg),
            base_rate,
        })
    }

    pub fn vacuous(base_rate: f64) -> Result<Self> {
        Self::new(0, 0, base_rate)
    }

    pub fn components(&self) -> OpinionComponents {
        let denom = self.evidence.total() as f64 + 2.0;
        OpinionComponents {
            belief: self.evidence.pos as f64 / denom,
            disbelief: self.evidence.neg as f64 / denom,
            uncertainty: 2.0 / denom,
        }
    }

    /// `b + a·u`.
    pub fn expected_value(&self) -> f64 {
        let c = self.components();
        c.belief + self.base_rate * c.uncertainty
    }
}

/// Free-function form of [`Opinion::components`].
pub fn opinion_components(op: &Opinion) -> OpinionComponents {
    op.components()
}

pub fn expected_value(op: &Opinion) -> f64 {
    op.expected_value()
}

/// Every opinion held in the network, keyed by (evaluator, subject).
///
/// Counters persist for the lifetime of the store; nothing decays.
#[derive(Debug, Clone, Default)]
pub struct OpinionStore {
    evidence: BTreeMap<(DeviceId, IdentityId), Evidence>,
    recorded: u64,
}

impl OpinionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one experience, creating the opinion at (0, 0) on first contact.
    pub fn record_experience(
        &mut self,
        evaluator: DeviceId,
        subject: IdentityId,
        outcome: Outcome,
    ) -> Evidence {
        let e = self.evidence.entry((evaluator, subject)).or_default();
        e.record(outcome);
        self.recorded += 1;
        *e
    }

    pub fn evidence(&self, evaluator: DeviceId, subject: IdentityId) -> Evidence {
        self.evidence
            .get(&(evaluator, subject))
            .copied()
            .unwrap_or_default()
    }

    pub fn knows(&self, evaluator: DeviceId, subject: IdentityId) -> bool {
        self.evidence.contains_key(&(evaluator, subject))
    }

    pub fn opinion(&self, evaluator: DeviceId, subject: IdentityId, base_rate: f64) -> Opinion {
        Opinion {
            evidence: self.evidence(evaluator, subject),
            base_rate,
        }
    }

    /// Expected value of the evaluator's own opinion; the base rate for a
    /// subject it has never interacted with.
    pub fn direct_trust(&self, evaluator: DeviceId, subject: IdentityId, base_rate: f64) -> f64 {
        self.opinion(evaluator, subject, base_rate).expected_value()
    }

    /// Opinions held by one evaluator, ordered by subject.
    pub fn held_by(
        &self,
        evaluator: DeviceId,
    ) -> impl Iterator<Item = (IdentityId, Evidence)> + '_ {
        self.evidence
            .range((evaluator, IdentityId(0))..=(evaluator, IdentityId(u32::MAX)))
            .map(|((_, s), e)| (*s, *e))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DeviceId, IdentityId, Evidence)> + '_ {
        self.evidence.iter().map(|((d, s), e)| (*d, *s, *e))
    }

    /// Number of experiences recorded since creation.
    pub fn experiences_recorded(&self) -> u64 {
        self.recorded
    }
}

/// An opinion shared by a recommender, tagged with the recommender's
/// relation to the receiving evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub recommender: DeviceId,
    pub relation: RelationType,
    pub expected: f64,
}

/// Mean expected value over recommenders whose relation matches `filter`;
/// the base rate when none match.
pub fn recommendation<'a>(
    recs: impl IntoIterator<Item = &'a Recommendation>,
    filter: RelationType,
    base_rate: f64,
) -> f64 {
    let (sum, n) = recs
        .into_iter()
        .filter(|r| r.relation == filter)
        .fold((0.0, 0usize), |(s, n), r| (s + r.expected, n + 1));
    if n == 0 {
        base_rate
    } else {
        sum / n as f64
    }
}

/// Recommendations each manager has received, by subject and recommender.
/// A newer recommendation from the same recommender replaces the older one.
#[derive(Debug, Clone, Default)]
pub struct RecommendationCache {
    entries: BTreeMap<DeviceId, BTreeMap<IdentityId, BTreeMap<DeviceId, Recommendation>>>,
}

impl RecommendationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(&mut self, receiver: DeviceId, subject: IdentityId, rec: Recommendation) {
        self.entries
            .entry(receiver)
            .or_default()
            .entry(subject)
            .or_default()
            .insert(rec.recommender, rec);
    }

    pub fn about(
        &self,
        receiver: DeviceId,
        subject: IdentityId,
    ) -> impl Iterator<Item = &Recommendation> {
        self.entries
            .get(&receiver)
            .and_then(|m| m.get(&subject))
            .into_iter()
            .flat_map(|m| m.values())
    }

    /// Number of cached (subject, recommender) entries at `receiver`.
    pub fn len_at(&self, receiver: DeviceId) -> usize {
        self.entries
            .get(&receiver)
            .map(|m| m.values().map(BTreeMap::len).sum())
            .unwrap_or(0)
    }

    pub fn iter_at(
        &self,
        receiver: DeviceId,
    ) -> impl Iterator<Item = (IdentityId, &Recommendation)> {
        self.entries.get(&receiver).into_iter().flat_map(|m| {
            m.iter()
                .flat_map(|(s, recs)| recs.values().map(move |r| (*s, r)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn weights_from_relation(r: RelationType) -> TrustWeights {
    let gamma = r.gamma();
    let half = (1.0 - gamma) / 2.0;
    TrustWeights {
        alpha: half,
        beta: half,
        gamma,
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

pub fn overall_trust(
    direct: f64,
    similarity: f64,
    recommendation: f64,
    r: RelationType,
) -> Result<f64> {
    check_unit("direct trust", direct)?;
    check_unit("community similarity", similarity)?;
    check_unit("recommendation", recommendation)?;
    let w = weights_from_relation(r);
    Ok(w.alpha * direct + w.beta * similarity + w.gamma * recommendation)
}

/// One trust evaluation of a subject identity by a manager.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustAssessment {
    pub evaluator: DeviceId,
    pub subject: IdentityId,
    pub direct: f64,
    pub similarity: f64,
    pub recommendation: f64,
    pub relation_filter: RelationType,
    pub trust: f64,
    pub timestamp: f64,
}

impl TrustAssessment {
    pub fn compute(
        evaluator: DeviceId,
        subject: IdentityId,
        direct: f64,
        similarity: f64,
        recommendation: f64,
        relation_filter: RelationType,
        timestamp: f64,
    ) -> Result<Self> {
        let trust = overall_trust(direct, similarity, recommendation, relation_filter)?;
        Ok(TrustAssessment {
            evaluator,
            subject,
            direct,
            similarity,
            recommendation,
            relation_filter,
            trust,
            timestamp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn components_examples() {
        let c = Opinion::new(0, 0, 0.5).unwrap().components();
        assert_eq!((c.belief, c.disbelief, c.uncertainty), (0.0, 0.0, 1.0));

        let c = Opinion::new(2, 1, 0.5).unwrap().components();
        assert!(
            close(c.belief, 0.4, 1e-12)
                && close(c.disbelief, 0.2, 1e-12)
                && close(c.uncertainty, 0.4, 1e-12)
        );

        let c = Opinion::new(3, 5, 0.5).unwrap().components();
        assert!(
            close(c.belief, 0.3, 1e-12)
                && close(c.disbelief, 0.5, 1e-12)
                && close(c.uncertainty, 0.2, 1e-12)
        );

        let c = Opinion::new(8, 0, 0.5).unwrap().components();
        assert!(
            close(c.belief, 0.8, 1e-12) && c.disbelief == 0.0 && close(c.uncertainty, 0.2, 1e-12)
        );
    }

    #[test]
    fn expected_value_examples() {
        assert_eq!(Opinion::new(0, 0, 0.5).unwrap().expected_value(), 0.5);
        assert!(close(
            Opinion::new(2, 1, 0.5).unwrap().expected_value(),
            0.6,
            1e-12
        ));
        assert!(close(
            Opinion::new(3, 5, 1.0).unwrap().expected_value(),
            0.5,
            1e-12
        ));
        assert!(Opinion::new(1, 1, 1.2).is_err());
    }

    #[test]
    fn record_experience_counts() {
        let mut store = OpinionStore::new();
        let (m, s) = (DeviceId(1), IdentityId(7));
        assert_eq!(
            store.record_experience(m, s, Outcome::Negative),
            Evidence::new(0, 1)
        );

        let mut store = OpinionStore::new();
        for _ in 0..2 {
            store.record_experience(m, s, Outcome::Positive);
        }
        store.record_experience(m, s, Outcome::Negative);
        assert_eq!(
            store.record_experience(m, s, Outcome::Positive),
            Evidence::new(3, 1)
        );

        let mut store = OpinionStore::new();
        for _ in 0..3 {
            store.record_experience(m, s, Outcome::Positive);
        }
        for _ in 0..5 {
            store.record_experience(m, s, Outcome::Negative);
        }
        let c = store.opinion(m, s, 0.5).components();
        assert!(
            close(c.belief, 0.3, 1e-12)
                && close(c.disbelief, 0.5, 1e-12)
                && close(c.uncertainty, 0.2, 1e-12)
        );
        assert_eq!(store.experiences_recorded(), 8);
        // other pairs untouched
        assert_eq!(store.evidence(DeviceId(2), s), Evidence::default());
    }

    #[test]
    fn direct_trust_examples() {
        let mut store = OpinionStore::new();
        let (m, s) = (DeviceId(1), IdentityId(7));
        assert_eq!(store.direct_trust(m, s, 0.5), 0.5);

        store.record_experience(m, s, Outcome::Positive);
        store.record_experience(m, s, Outcome::Positive);
        store.record_experience(m, s, Outcome::Negative);
        assert!(close(store.direct_trust(m, s, 0.5), 0.6, 1e-12));

        let other = IdentityId(8);
        for _ in 0..10 {
            store.record_experience(m, other, Outcome::Negative);
        }
        assert!(close(
            store.direct_trust(m, other, 0.2),
            0.2 * 2.0 / 12.0,
            1e-12
        ));
        assert!(close(
            store.direct_trust(m, other, 0.2),
            0.033_333_333_333,
            1e-9
        ));
    }

    #[test]
    fn recommendation_examples() {
        let rec = |k: u32, relation, expected| Recommendation {
            recommender: DeviceId(k),
            relation,
            expected,
        };
        assert_eq!(recommendation(&[], RelationType::Sor, 0.5), 0.5);
        let only_other = [rec(1, RelationType::Clor, 0.9)];
        assert_eq!(recommendation(&only_other, RelationType::Sor, 0.5), 0.5);
        let one = [
            rec(1, RelationType::Sor, 0.7),
            rec(2, RelationType::Por, 0.1),
        ];
        assert_eq!(recommendation(&one, RelationType::Sor, 0.5), 0.7);
        let two = [
            rec(1, RelationType::Sor, 0.8),
            rec(2, RelationType::Sor, 0.4),
        ];
        assert!(close(
            recommendation(&two, RelationType::Sor, 0.5),
            0.6,
            1e-15
        ));
    }

    #[test]
    fn weights_examples() {
        let w = weights_from_relation(RelationType::Clor);
        assert!(close(w.alpha, 0.35, 1e-15) && close(w.beta, 0.35, 1e-15) && w.gamma == 0.3);
        let w = weights_from_relation(RelationType::Sor);
        assert!(close(w.alpha, 0.45, 1e-15) && close(w.beta, 0.45, 1e-15) && w.gamma == 0.1);
        for r in RelationType::ALL {
            let w = weights_from_relation(r);
            assert_eq!(w.alpha + w.beta + w.gamma, 1.0, "{r}");
            assert_eq!(w.alpha, w.beta);
        }
    }

    #[test]
    fn overall_trust_examples() {
        for r in RelationType::ALL {
            assert!(close(overall_trust(1.0, 1.0, 1.0, r).unwrap(), 1.0, 1e-15));
            assert!(close(overall_trust(0.3, 0.3, 0.3, r).unwrap(), 0.3, 1e-15));
        }
        let t = overall_trust(0.6, 0.4, 0.8, RelationType::Clor).unwrap();
        assert!(close(t, 0.59, 1e-12));
        assert!(matches!(
            overall_trust(1.2, 0.4, 0.8, RelationType::Clor),
            Err(Error::ContractViolation(_))
        ));
        assert!(overall_trust(0.5, f64::NAN, 0.8, RelationType::Clor).is_err());
        assert!(overall_trust(0.5, 0.5, -0.01, RelationType::Sor).is_err());
    }

    #[test]
    fn assessment_keeps_formula() {
        let a = TrustAssessment::compute(
            DeviceId(1),
            IdentityId(2),
            0.6,
            0.4,
            0.8,
            RelationType::Clor,
            3.0,
        )
        .unwrap();
        let w = weights_from_relation(RelationType::Clor);
        assert!(close(
            a.trust,
            w.alpha * a.direct + w.beta * a.similarity + w.gamma * a.recommendation,
            1e-9
        ));
    }

    #[test]
    fn held_by_is_scoped() {
        let mut store = OpinionStore::new();
        store.record_experience(DeviceId(1), IdentityId(3), Outcome::Positive);
        store.record_experience(DeviceId(1), IdentityId(0), Outcome::Positive);
        store.record_experience(DeviceId(2), IdentityId(3), Outcome::Negative);
        let held: Vec<_> = store.held_by(DeviceId(1)).map(|(s, _)| s).collect();
        assert_eq!(held, vec![IdentityId(0), IdentityId(3)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn components_normalised(pos in 0u64..=1_000_000, neg in 0u64..=1_000_000, a in 0.0f64..=1.0) {
                let c = Opinion::new(pos, neg, a).unwrap().components();
                prop_assert!((c.belief + c.disbelief + c.uncertainty - 1.0).abs() < 1e-9);
                for v in [c.belief, c.disbelief, c.uncertainty] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }

            #[test]
            fn expected_value_monotone(pos in 0u64..10_000, neg in 0u64..10_000, a in 0.0f64..=1.0) {
                let e = |p, n| Opinion::new(p, n, a).unwrap().expected_value();
                prop_assert!(e(pos + 1, neg) >= e(pos, neg));
                prop_assert!(e(pos, neg + 1) <= e(pos, neg));
            }

            #[test]
            fn expected_value_converges(p in 0.0f64..=1.0, a in 0.0f64..=1.0) {
                let total = 10_000u64;
                let pos = (p * total as f64).round() as u64;
                let ratio = pos as f64 / total as f64;
                let e = Opinion::new(pos, total - pos, a).unwrap().expected_value();
                prop_assert!((e - ratio).abs() < 0.01);
            }

            #[test]
            fn overall_trust_monotone(d in 0.0f64..=0.9, s in 0.0f64..=0.9, r in 0.0f64..=0.9, step in 0.0f64..=0.1, idx in 0usize..5) {
                let rel = RelationType::ALL[idx];
                let base = overall_trust(d, s, r, rel).unwrap();
                prop_assert!(overall_trust(d + step, s, r, rel).unwrap() >= base);
                prop_assert!(overall_trust(d, s + step, r, rel).unwrap() >= base);
                prop_assert!(overall_trust(d, s, r + step, rel).unwrap() >= base);
            }

            #[test]
            fn equal_inputs_pass_through(t in 0.0f64..=1.0, idx in 0usize..5) {
                let rel = RelationType::ALL[idx];
                prop_assert!((overall_trust(t, t, t, rel).unwrap() - t).abs() < 1e-12);
            }
        }
    }
}
