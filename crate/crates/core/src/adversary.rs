//! Sybil attacker models.
//!
//! An attacker device acquires identities either by copying those of
//! legitimate devices it overhears (stolen) or by forging fresh ones
//! (fabricated), then uses them following one of two behaviors:
//!
//! * churn: one identity at a time, associating with as many managers as it
//!   can reach in quick succession, rotating identity after exhausting the
//!   managers or after a streak of denials;
//! * multiple identities: round-robins a pool while moving slowly, optionally
//!   keeping part of the pool idle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::authn::{AccessRequest, Verdict};
use crate::error::{Error, Result};
use crate::social::{
    ContextKind, Device, DeviceId, IdentityId, IdentityOrigin, IdentityRegistry, SocialProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Churn,
    #[serde(rename = "multi", alias = "multi_identity")]
    MultiIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentitySource {
    Stolen,
    Fabricated,
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Behavior::Churn => "churn",
            Behavior::MultiIdentity => "multi",
        })
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "churn" => Ok(Behavior::Churn),
            "multi" | "multiidentity" | "multi-identity" => Ok(Behavior::MultiIdentity),
            other => Err(Error::Config(format!(
                "unknown attacker behavior `{other}`"
            ))),
        }
    }
}

impl fmt::Display for IdentitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentitySource::Stolen => "stolen",
            IdentitySource::Fabricated => "fabricated",
        })
    }
}

impl FromStr for IdentitySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stolen" => Ok(IdentitySource::Stolen),
            "fabricated" => Ok(IdentitySource::Fabricated),
            other => Err(Error::Config(format!("unknown identity source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackerProfile {
    pub behavior: Behavior,
    pub identity_source: IdentitySource,
    /// Identities the attacker keeps in stock.
    pub pool_size: usize,
    /// Seconds between two access requests.
    pub attempt_interval: f64,
    /// Multiplier on the base mobility speed.
    pub speed_factor: f64,
    /// Consecutive denials after which a churn attacker rotates identity.
    pub deny_streak_limit: u32,
    /// Share of a multi-identity pool that never requests.
    pub idle_fraction: f64,
    /// Theft range in meters.
    pub eavesdrop_radius: f64,
}

impl AttackerProfile {
    pub fn new(behavior: Behavior, identity_source: IdentitySource) -> Self {
        AttackerProfile {
            behavior,
            identity_source,
            pool_size: 3,
            attempt_interval: 5.0,
            speed_factor: match behavior {
                Behavior::Churn => 1.0,
                Behavior::MultiIdentity => 0.5,
            },
            deny_streak_limit: 3,
            idle_fraction: 0.0,
            eavesdrop_radius: 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_pool = match self.behavior {
            Behavior::Churn => 1,
            Behavior::MultiIdentity => 2,
        };
        if self.pool_size < min_pool {
            return Err(Error::Config(format!(
                "{} attackers need a pool of at least {min_pool}",
                self.behavior
            )));
        }
        if self.attempt_interval.is_nan() || self.attempt_interval <= 0.0 {
            return Err(Error::Config("attempt interval must be positive".into()));
        }
        if self.speed_factor.is_nan() || self.speed_factor <= 0.0 {
            return Err(Error::Config("speed factor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.idle_fraction) {
            return Err(Error::Config("idle fraction must lie in [0, 1)".into()));
        }
        if self.deny_streak_limit == 0 {
            return Err(Error::Config("deny streak limit must be at least 1".into()));
        }
        if self.eavesdrop_radius.is_nan() || self.eavesdrop_radius < 0.0 {
            return Err(Error::Config(
                "eavesdrop radius must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Identities of a multi-identity pool that actually request access.
    pub fn active_count(&self, pool_len: usize) -> usize {
        if pool_len == 0 {
            return 0;
        }
        // tolerance absorbs representation error in fractions like 2/3
        let active = (pool_len as f64 * (1.0 - self.idle_fraction) + 1e-9).floor() as usize;
        active.clamp(1, pool_len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldIdentity {
    pub identity: IdentityId,
    pub profile: SocialProfile,
    pub source: IdentitySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheftFailure {
    OutOfRange,
    NotLegitimate,
}

#[derive(Debug, Clone)]
pub struct Attacker {
    pub device: DeviceId,
    pub profile: AttackerProfile,
    pool: Vec<HeldIdentity>,
    active: usize,
    attempted: BTreeSet<DeviceId>,
    deny_streak: u32,
    next_attempt: f64,
    cursor: usize,
    observed: BTreeMap<IdentityId, SocialProfile>,
}

impl Attacker {
    pub fn new(device: DeviceId, profile: AttackerProfile) -> Self {
        Attacker {
            device,
            profile,
            pool: Vec::new(),
            active: 0,
            attempted: BTreeSet::new(),
            deny_streak: 0,
            next_attempt: 0.0,
            cursor: 0,
            observed: BTreeMap::new(),
        }
    }

    pub fn pool(&self) -> &[HeldIdentity] {
        &self.pool
    }

    pub fn wants_identity(&self) -> bool {
        self.pool.len() < self.profile.pool_size
    }

    pub fn holds(&self, identity: IdentityId) -> bool {
        self.pool.iter().any(|h| h.identity == identity)
    }

    /// The identity a churn attacker is currently using.
    pub fn active_identity(&self) -> Option<&HeldIdentity> {
        self.pool.get(self.active)
    }

    pub fn deny_streak(&self) -> u32 {
        self.deny_streak
    }

    /// Number of distinct identities overheard so far.
    pub fn observations(&self) -> usize {
        self.observed.len()
    }

    /// Remembers a profile overheard from a nearby device.
    pub fn observe(&mut self, identity: IdentityId, profile: &SocialProfile) {
        self.observed
            .entry(identity)
            .or_insert_with(|| profile.clone());
    }

    /// Copies the identity and social profile of a legitimate device within
    /// eavesdropping range. Stealing an identity already held is a no-op.
    pub fn steal_identity(
        &mut self,
        registry: &mut IdentityRegistry,
        victim: &Device,
        victim_identity: IdentityId,
        distance: f64,
    ) -> std::result::Result<IdentityId, TheftFailure> {
        if registry.origin(victim_identity) != Some(IdentityOrigin::Legitimate(victim.id)) {
            return Err(TheftFailure::NotLegitimate);
        }
        if distance > self.profile.eavesdrop_radius {
            return Err(TheftFailure::OutOfRange);
        }
        if !self.holds(victim_identity) {
            registry.record_theft(victim_identity, self.device);
            self.observe(victim_identity, &victim.profile);
            self.pool.push(HeldIdentity {
                identity: victim_identity,
                profile: victim.profile.clone(),
                source: IdentitySource::Stolen,
            });
        }
        Ok(victim_identity)
    }

    /// Registers a brand-new identity presenting `forged`.
    pub fn fabricate_identity(
        &mut self,
        registry: &mut IdentityRegistry,
        forged: SocialProfile,
    ) -> IdentityId {
        let identity = registry.fabricate(self.device);
        self.pool.push(HeldIdentity {
            identity,
            profile: forged,
            source: IdentitySource::Fabricated,
        });
        identity
    }

    /// Random friend and interest subsets, each of at most `size` elements,
    /// drawn from the profiles overheard so far.
    pub fn forge_profile<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> SocialProfile {
        let friends: BTreeSet<DeviceId> = self
            .observed
            .values()
            .flat_map(|p| p.friends.iter().copied())
            .collect();
        let interests: BTreeSet<&String> = self
            .observed
            .values()
            .flat_map(|p| p.interests.iter())
            .collect();
        let friends: Vec<DeviceId> = friends.into_iter().collect();
        let interests: Vec<&String> = interests.into_iter().collect();
        SocialProfile {
            friends: friends
                .choose_multiple(rng, size.min(friends.len()))
                .copied()
                .collect(),
            interests: interests
                .choose_multiple(rng, size.min(interests.len()))
                .map(|s| (*s).clone())
                .collect(),
        }
    }

    fn request(
        &self,
        held: &HeldIdentity,
        manager: DeviceId,
        now: f64,
        context: &ContextKind,
    ) -> AccessRequest {
        AccessRequest {
            requester_identity: held.identity,
            presenter: self.device,
            presented: held.profile.clone(),
            target_manager: manager,
            context: context.clone(),
            time: now,
        }
    }

    fn rotate(&mut self) {
        if !self.pool.is_empty() {
            self.active = (self.active + 1) % self.pool.len();
        }
        self.attempted.clear();
        self.deny_streak = 0;
    }

    /// One churn step. `reachable` lists managers in range, nearest first;
    /// `total_managers` is the size of the whole manager set.
    pub fn churn_step(
        &mut self,
        now: f64,
        reachable: &[DeviceId],
        total_managers: usize,
        context: &ContextKind,
    ) -> Vec<AccessRequest> {
        if self.pool.is_empty() || now + 1e-9 < self.next_attempt {
            return Vec::new();
        }
        if total_managers > 0 && self.attempted.len() >= total_managers {
            self.rotate();
        }
        let Some(target) = reachable
            .iter()
            .find(|m| !self.attempted.contains(m))
            .copied()
        else {
            return Vec::new();
        };
        self.attempted.insert(target);
        self.next_attempt = now + self.profile.attempt_interval;
        vec![self.request(&self.pool[self.active], target, now, context)]
    }

    /// One multiple-identity step: the next active identity of the pool asks
    /// the nearest reachable manager.
    pub fn multi_identity_step(
        &mut self,
        now: f64,
        reachable: &[DeviceId],
        context: &ContextKind,
    ) -> Vec<AccessRequest> {
        let active = self.profile.active_count(self.pool.len());
        if active == 0 || reachable.is_empty() || now + 1e-9 < self.next_attempt {
            return Vec::new();
        }
        let held = &self.pool[self.cursor % active];
        self.cursor = (self.cursor + 1) % active;
        self.next_attempt = now + self.profile.attempt_interval;
        vec![self.request(held, reachable[0], now, context)]
    }

    pub fn step(
        &mut self,
        now: f64,
        reachable: &[DeviceId],
        total_managers: usize,
        context: &ContextKind,
    ) -> Vec<AccessRequest> {
        match self.profile.behavior {
            Behavior::Churn => self.churn_step(now, reachable, total_managers, context),
            Behavior::MultiIdentity => self.multi_identity_step(now, reachable, context),
        }
    }

    /// Feeds back the verdict of a request made with `identity`.
    pub fn record_outcome(&mut self, identity: IdentityId, verdict: Verdict) {
        if self.active_identity().map(|h| h.identity) != Some(identity) {
            return;
        }
        match verdict {
            Verdict::Grant => self.deny_streak = 0,
            Verdict::Deny => {
                self.deny_streak += 1;
                if self.profile.behavior == Behavior::Churn
                    && self.deny_streak >= self.profile.deny_streak_limit
                {
                    self.rotate();
                }
            }
        }
    }

    /// Switches behavior, keeping the identity pool.
    pub fn switch_behavior(&mut self, behavior: Behavior) {
        self.profile.behavior = behavior;
        self.attempted.clear();
        self.deny_streak = 0;
        self.cursor = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::{pairwise_similarity, SimilarityWeights};
    use crate::social::DeviceClass;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn victim(id: u32) -> Device {
        let mut d = Device::new(DeviceId(id), DeviceClass::Subordinate);
        d.profile = SocialProfile::new([DeviceId(1), DeviceId(2)], ["math", "chess"]);
        d
    }

    fn churn(pool: usize) -> Attacker {
        let mut p = AttackerProfile::new(Behavior::Churn, IdentitySource::Stolen);
        p.pool_size = pool;
        Attacker::new(DeviceId(99), p)
    }

    #[test]
    fn steal_in_range() {
        let mut reg = IdentityRegistry::new();
        let v = victim(3);
        let vid = reg.register_legitimate(v.id);
        let mut a = churn(3);
        assert_eq!(
            a.steal_identity(&mut reg, &v, vid, 20.0),
            Err(TheftFailure::OutOfRange)
        );
        assert!(a.pool().is_empty());
        assert_eq!(a.steal_identity(&mut reg, &v, vid, 5.0), Ok(vid));
        assert_eq!(a.pool().len(), 1);
        assert_eq!(reg.duplicates(), vec![vid]);
        // idempotent
        assert_eq!(a.steal_identity(&mut reg, &v, vid, 5.0), Ok(vid));
        assert_eq!(a.pool().len(), 1);
    }

    #[test]
    fn fabricated_identities_cannot_be_stolen() {
        let mut reg = IdentityRegistry::new();
        let mut a = churn(3);
        let fake = reg.fabricate(DeviceId(50));
        assert_eq!(
            a.steal_identity(&mut reg, &victim(50), fake, 1.0),
            Err(TheftFailure::NotLegitimate)
        );
    }

    #[test]
    fn stolen_and_copied_profiles_match_the_victim() {
        let mut reg = IdentityRegistry::new();
        let v = victim(3);
        let vid = reg.register_legitimate(v.id);
        let mut a = churn(3);
        a.steal_identity(&mut reg, &v, vid, 1.0).unwrap();
        let other = SocialProfile::new([DeviceId(1), DeviceId(7)], ["chess"]);
        let w = SimilarityWeights::default();
        let stolen = &a.pool()[0].profile;
        assert_eq!(
            pairwise_similarity(stolen, &other, w),
            pairwise_similarity(&v.profile, &other, w)
        );

        let fid = a.fabricate_identity(&mut reg, v.profile.clone());
        assert_ne!(fid, vid);
        let forged = &a.pool()[1].profile;
        assert_eq!(
            pairwise_similarity(forged, &other, w),
            pairwise_similarity(&v.profile, &other, w)
        );
    }

    #[test]
    fn fabrications_are_fresh() {
        let mut reg = IdentityRegistry::new();
        let legit = reg.register_legitimate(DeviceId(0));
        let mut a = Attacker::new(
            DeviceId(9),
            AttackerProfile::new(Behavior::Churn, IdentitySource::Fabricated),
        );
        let f1 = a.fabricate_identity(&mut reg, SocialProfile::default());
        let f2 = a.fabricate_identity(&mut reg, SocialProfile::default());
        assert_ne!(f1, f2);
        assert_ne!(f1, legit);
        assert_eq!(
            reg.origin(f1),
            Some(IdentityOrigin::Fabricated(DeviceId(9)))
        );
        assert!(reg.duplicates().is_empty());
    }

    #[test]
    fn forged_profiles_draw_from_observations() {
        let mut a = churn(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(a.forge_profile(&mut rng, 3).is_empty());
        a.observe(
            IdentityId(1),
            &SocialProfile::new([DeviceId(1), DeviceId(2), DeviceId(3)], ["a", "b"]),
        );
        let p = a.forge_profile(&mut rng, 2);
        assert_eq!(p.friends.len(), 2);
        assert_eq!(p.interests.len(), 2);
        assert!(a.forge_profile(&mut rng, 0).is_empty());
    }

    fn churn_with_identity() -> Attacker {
        let mut reg = IdentityRegistry::new();
        let mut a = churn(1);
        a.fabricate_identity(&mut reg, SocialProfile::default());
        a
    }

    #[test]
    fn churn_schedule() {
        let mut a = churn_with_identity();
        let managers = [DeviceId(1), DeviceId(2), DeviceId(3)];
        let mut requests = Vec::new();
        for t in 0..15 {
            requests.extend(a.churn_step(t as f64, &managers, 3, &ContextKind::Park));
        }
        assert_eq!(requests.len(), 3);
        let targets: BTreeSet<DeviceId> = requests.iter().map(|r| r.target_manager).collect();
        assert_eq!(targets.len(), 3);
        assert_eq!(requests[1].time - requests[0].time, 5.0);
    }

    #[test]
    fn churn_without_managers_is_silent() {
        let mut a = churn_with_identity();
        assert!(a.churn_step(0.0, &[], 3, &ContextKind::Park).is_empty());
    }

    #[test]
    fn churn_rotates_after_deny_streak() {
        let mut reg = IdentityRegistry::new();
        let mut a = churn(2);
        let first = a.fabricate_identity(&mut reg, SocialProfile::default());
        let second = a.fabricate_identity(&mut reg, SocialProfile::default());
        let managers: Vec<DeviceId> = (1..=10).map(DeviceId).collect();
        let mut t = 0.0;
        for _ in 0..3 {
            let r = a.churn_step(t, &managers, 10, &ContextKind::Park);
            assert_eq!(r[0].requester_identity, first);
            a.record_outcome(first, Verdict::Deny);
            t += 5.0;
        }
        let r = a.churn_step(t, &managers, 10, &ContextKind::Park);
        assert_eq!(r[0].requester_identity, second);
        assert_eq!(a.active_identity().unwrap().identity, second);
    }

    #[test]
    fn churn_rotates_after_exhausting_managers() {
        let mut reg = IdentityRegistry::new();
        let mut a = churn(2);
        let first = a.fabricate_identity(&mut reg, SocialProfile::default());
        let second = a.fabricate_identity(&mut reg, SocialProfile::default());
        let managers = [DeviceId(1), DeviceId(2)];
        let ids: Vec<IdentityId> = (0..3)
            .flat_map(|k| a.churn_step(k as f64 * 5.0, &managers, 2, &ContextKind::Park))
            .map(|r| r.requester_identity)
            .collect();
        assert_eq!(ids, vec![first, first, second]);
    }

    fn multi(pool: usize, idle: f64) -> Attacker {
        let mut p = AttackerProfile::new(Behavior::MultiIdentity, IdentitySource::Fabricated);
        p.pool_size = pool;
        p.idle_fraction = idle;
        let mut a = Attacker::new(DeviceId(77), p);
        let mut reg = IdentityRegistry::new();
        for _ in 0..pool {
            a.fabricate_identity(&mut reg, SocialProfile::default());
        }
        a
    }

    #[test]
    fn multi_round_robin() {
        let mut a = multi(3, 0.0);
        let ids: Vec<u32> = (0..5)
            .flat_map(|k| a.multi_identity_step(k as f64 * 5.0, &[DeviceId(1)], &ContextKind::Gym))
            .map(|r| r.requester_identity.0)
            .collect();
        assert_eq!(ids, vec![0, 1, 2, 0, 1]);
    }

    #[test]
    fn multi_idle_fraction() {
        let mut a = multi(3, 2.0 / 3.0);
        assert_eq!(a.profile.active_count(3), 1);
        let ids: BTreeSet<u32> = (0..6)
            .flat_map(|k| a.multi_identity_step(k as f64 * 5.0, &[DeviceId(1)], &ContextKind::Gym))
            .map(|r| r.requester_identity.0)
            .collect();
        assert_eq!(ids.len(), 1);
    }

    #[test]
    fn multi_speed() {
        let p = AttackerProfile::new(Behavior::MultiIdentity, IdentitySource::Stolen);
        assert_eq!(2.0 * p.speed_factor, 1.0);
    }

    #[test]
    fn behavior_switch_keeps_pool() {
        let mut a = multi(3, 0.0);
        let before: Vec<IdentityId> = a.pool().iter().map(|h| h.identity).collect();
        a.switch_behavior(Behavior::Churn);
        let after: Vec<IdentityId> = a.pool().iter().map(|h| h.identity).collect();
        assert_eq!(before, after);
        assert_eq!(a.profile.behavior, Behavior::Churn);
    }

    #[test]
    fn profile_validation() {
        let mut p = AttackerProfile::new(Behavior::MultiIdentity, IdentitySource::Stolen);
        p.pool_size = 1;
        assert!(p.validate().is_err());
        let mut p = AttackerProfile::new(Behavior::Churn, IdentitySource::Stolen);
        assert!(p.validate().is_ok());
        p.speed_factor = 0.0;
        assert!(p.validate().is_err());
    }
}
