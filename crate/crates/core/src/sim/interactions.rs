//! Service interactions between nearby devices and the opinion exchange
//! between managers.

use std::collections::BTreeMap;

use rand::Rng;

use crate::sim::events::ExperienceCause;
use crate::social::{classify_relation, Device, DeviceId, IdentityId, Position};
use crate::trust::{OpinionStore, Outcome, Recommendation, RecommendationCache};

/// A device showing an identity at some position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting {
    pub device: DeviceId,
    pub identity: IdentityId,
    pub position: Position,
    pub attacker: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionRules {
    pub radius: f64,
    /// Minimum seconds between two interactions of the same pair.
    pub period: f64,
    pub p_positive_legit: f64,
    pub p_negative_attacker: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub observer: DeviceId,
    pub subject: IdentityId,
    pub presenter: DeviceId,
    pub outcome: Outcome,
    pub cause: ExperienceCause,
}

/// Interactions due at time `t`. Each observer meets every sighting within
/// the radius whose pair has not interacted for a full period. An identity
/// shown by more than one device yields a negative experience with each of
/// them; otherwise the outcome is drawn from the rules.
///
/// `last` keeps the time of the latest interaction per (observer, presenter)
/// pair and is updated in place. Observers and sightings are visited in the
/// order given.
pub fn generate_interactions<R: Rng + ?Sized>(
    t: f64,
    observers: &[(DeviceId, Position)],
    sightings: &[Sighting],
    last: &mut BTreeMap<(DeviceId, DeviceId), f64>,
    rules: &InteractionRules,
    rng: &mut R,
) -> Vec<Interaction> {
    let mut shown_by: BTreeMap<IdentityId, usize> = BTreeMap::new();
    for s in sightings {
        *shown_by.entry(s.identity).or_default() += 1;
    }
    let mut out = Vec::new();
    for &(observer, at) in observers {
        for s in sightings {
            if s.device == observer || at.distance(&s.position) > rules.radius {
                continue;
            }
            let key = (observer, s.device);
            if last
                .get(&key)
                .is_some_and(|prev| t < prev + rules.period - 1e-9)
            {
                continue;
            }
            last.insert(key, t);
            let (outcome, cause) = if shown_by[&s.identity] > 1 {
                (Outcome::Negative, ExperienceCause::Duplicate)
            } else if s.attacker {
                let bad = rng.gen::<f64>() < rules.p_negative_attacker;
                (
                    if bad {
                        Outcome::Negative
                    } else {
                        Outcome::Positive
                    },
                    ExperienceCause::Interaction,
                )
            } else {
                let good = rng.gen::<f64>() < rules.p_positive_legit;
                (
                    if good {
                        Outcome::Positive
                    } else {
                        Outcome::Negative
                    },
                    ExperienceCause::Interaction,
                )
            };
            out.push(Interaction {
                observer,
                subject: s.identity,
                presenter: s.device,
                outcome,
                cause,
            });
        }
    }
    out
}

/// Sends every expected-value opinion held by `sender` to `receiver`,
/// tagged with the receiver's relation to the sender. Returns the number of
/// entries sent.
pub fn share_opinions(
    sender: DeviceId,
    receiver: DeviceId,
    devices: &BTreeMap<DeviceId, Device>,
    opinions: &OpinionStore,
    cache: &mut RecommendationCache,
    base_rate: f64,
) -> usize {
    let relation = classify_relation(&devices[&receiver], &devices[&sender]).kind;
    let mut sent = 0;
    for (subject, _) in opinions.held_by(sender) {
        let expected = opinions
            .opinion(sender, subject, base_rate)
            .expected_value();
        cache.store(
            receiver,
            subject,
            Recommendation {
                recommender: sender,
                relation,
                expected,
            },
        );
        sent += 1;
    }
    sent
}

/// Every manager shares its opinions with every other manager. Returns
/// `(sender, receiver, entries)` for each non-empty transfer.
pub fn exchange_recommendations(
    managers: &[DeviceId],
    devices: &BTreeMap<DeviceId, Device>,
    opinions: &OpinionStore,
    cache: &mut RecommendationCache,
    base_rate: f64,
) -> Vec<(DeviceId, DeviceId, usize)> {
    let mut transfers = Vec::new();
    for &from in managers {
        for &to in managers {
            if from == to {
                continue;
            }
            let n = share_opinions(from, to, devices, opinions, cache, base_rate);
            if n > 0 {
                transfers.push((from, to, n));
            }
        }
    }
    transfers
}
