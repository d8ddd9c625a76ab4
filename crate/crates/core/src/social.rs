//! Domain model: devices, the identities they present, SIoT relation
//! classification and the environmental contexts that supply base rates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A physical node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

/// An identity presented to the network. Legitimate devices hold exactly one;
/// attacker devices may hold several, some of them copies of legitimate ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdentityId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceClass {
    /// Resource-rich node running the full trust pipeline.
    Manager,
    /// Constrained node that forwards observations to its nearest manager.
    Subordinate,
}

impl FromStr for DeviceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "manager" | "man" => Ok(DeviceClass::Manager),
            "subordinate" | "sub" => Ok(DeviceClass::Subordinate),
            other => Err(Error::Config(format!("unknown device class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

/// What a device tells the network about itself: its friends and interests.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SocialProfile {
    pub friends: BTreeSet<DeviceId>,
    pub interests: BTreeSet<String>,
}

impl SocialProfile {
    pub fn new(
        friends: impl IntoIterator<Item = DeviceId>,
        interests: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        SocialProfile {
            friends: friends.into_iter().collect(),
            interests: interests.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.friends.is_empty() && self.interests.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: DeviceId,
    pub class: DeviceClass,
    pub profile: SocialProfile,
    pub owner: String,
    pub manufacturer_batch: String,
    pub home_place: Option<String>,
    pub work_group: Option<String>,
    pub position: Position,
    /// Meters per second.
    pub speed: f64,
}

impl Device {
    pub fn new(id: DeviceId, class: DeviceClass) -> Self {
        Device {
            id,
            class,
            profile: SocialProfile::default(),
            owner: format!("owner-{}", id.0),
            manufacturer_batch: format!("batch-{}", id.0),
            home_place: None,
            work_group: None,
            position: Position::default(),
            speed: 0.0,
        }
    }

    /// Replaces the friend set, dropping the device's own id.
    pub fn set_friends(&mut self, friends: impl IntoIterator<Item = DeviceId>) {
        let own = self.id;
        self.profile.friends = friends.into_iter().filter(|f| *f != own).collect();
    }

    pub fn is_manager(&self) -> bool {
        self.class == DeviceClass::Manager
    }
}

/// Environment a community lives in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ContextKind {
    Residence,
    Office,
    School,
    Gym,
    Park,
    Custom(String),
}

impl TryFrom<String> for ContextKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ContextKind> for String {
    fn from(k: ContextKind) -> String {
        k.name().to_string()
    }
}

impl ContextKind {
    pub const BUILTIN: [ContextKind; 5] = [
        ContextKind::Residence,
        ContextKind::Office,
        ContextKind::School,
        ContextKind::Gym,
        ContextKind::Park,
    ];

    pub fn name(&self) -> &str {
        match self {
            ContextKind::Residence => "residence",
            ContextKind::Office => "office",
            ContextKind::School => "school",
            ContextKind::Gym => "gym",
            ContextKind::Park => "park",
            ContextKind::Custom(name) => name,
        }
    }

    /// Built-in base rate, `None` for custom kinds.
    pub fn default_base_rate(&self) -> Option<f64> {
        match self {
            ContextKind::Residence => Some(1.0),
            ContextKind::Office => Some(0.7),
            ContextKind::School => Some(0.5),
            ContextKind::Gym => Some(0.4),
            ContextKind::Park => Some(0.2),
            ContextKind::Custom(_) => None,
        }
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContextKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "residence" => ContextKind::Residence,
            "office" => ContextKind::Office,
            "school" => ContextKind::School,
            "gym" => ContextKind::Gym,
            "park" => ContextKind::Park,
            "" => return Err(Error::UnknownContext(String::new())),
            _ => ContextKind::Custom(lower),
        })
    }
}

/// Base-rate table: the five built-in contexts plus any configured overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRates {
    rates: BTreeMap<ContextKind, f64>,
}

impl Default for BaseRates {
    fn default() -> Self {
        let rates = ContextKind::BUILTIN
            .iter()
            .map(|k| (k.clone(), k.default_base_rate().unwrap()))
            .collect();
        BaseRates { rates }
    }
}

impl BaseRates {
    /// Registers or overrides the base rate of a context.
    pub fn set(&mut self, kind: ContextKind, rate: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "base rate for `{kind}` must lie in [0, 1], got {rate}"
            )));
        }
        self.rates.insert(kind, rate);
        Ok(())
    }

    pub fn base_rate_of(&self, kind: &ContextKind) -> Result<f64> {
        self.rates
            .get(kind)
            .copied()
            .ok_or_else(|| Error::UnknownContext(kind.name().to_string()))
    }
}

/// SIoT relation between two objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationType {
    /// Parental: same manufacturer batch.
    Por,
    /// Ownership: same owner.
    Oor,
    /// Co-location: same fixed place.
    Clor,
    /// Co-work: same application group.
    Cwor,
    /// Social: owners are friends (also the fallback).
    Sor,
}

impl RelationType {
    pub const ALL: [RelationType; 5] = [
        RelationType::Por,
        RelationType::Oor,
        RelationType::Clor,
        RelationType::Cwor,
        RelationType::Sor,
    ];

    /// Relationship factor weighting recommendations in the overall trust.
    pub fn gamma(self) -> f64 {
        match self {
            RelationType::Clor => 0.3,
            RelationType::Cwor => 0.2,
            RelationType::Oor => 0.2,
            RelationType::Sor => 0.1,
            RelationType::Por => 0.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationType::Por => "por",
            RelationType::Oor => "oor",
            RelationType::Clor => "clor",
            RelationType::Cwor => "cwor",
            RelationType::Sor => "sor",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationType::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown relation type `{s}`")))
    }
}

/// Result of [`classify_relation`]. `weak` marks pairs that share neither an
/// attribute nor a friendship edge; they are still treated as SOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationMatch {
    pub kind: RelationType,
    pub weak: bool,
}

/// Classifies the relation between two devices.
///
/// When several relations hold the most specific attribute match wins:
/// OOR, then POR, CLOR, CWOR, and finally SOR.
pub fn classify_relation(i: &Device, j: &Device) -> RelationMatch {
    let same =
        |a: &Option<String>, b: &Option<String>| matches!((a, b), (Some(x), Some(y)) if x == y);
    let kind = if i.owner == j.owner {
        Some(RelationType::Oor)
    } else if i.manufacturer_batch == j.manufacturer_batch {
        Some(RelationType::Por)
    } else if same(&i.home_place, &j.home_place) {
        Some(RelationType::Clor)
    } else if same(&i.work_group, &j.work_group) {
        Some(RelationType::Cwor)
    } else {
        None
    };
    match kind {
        Some(kind) => RelationMatch { kind, weak: false },
        None => {
            let friends = i.profile.friends.contains(&j.id) || j.profile.friends.contains(&i.id);
            RelationMatch {
                kind: RelationType::Sor,
                weak: !friends,
            }
        }
    }
}

/// Where an identity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityOrigin {
    /// The own identity of a legitimate device.
    Legitimate(DeviceId),
    /// Forged by an attacker device.
    Fabricated(DeviceId),
}

/// Issues identities and tracks which devices present each one.
#[derive(Debug, Clone, Default)]
pub struct IdentityRegistry {
    next: u32,
    origins: BTreeMap<IdentityId, IdentityOrigin>,
    holders: BTreeMap<IdentityId, BTreeSet<DeviceId>>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn issue(&mut self, origin: IdentityOrigin, holder: DeviceId) -> IdentityId {
        let id = IdentityId(self.next);
        self.next += 1;
        self.origins.insert(id, origin);
        self.holders.entry(id).or_default().insert(holder);
        id
    }

    /// The single identity of a legitimate device.
    pub fn register_legitimate(&mut self, device: DeviceId) -> IdentityId {
        self.issue(IdentityOrigin::Legitimate(device), device)
    }

    /// A fresh identity that no device has presented before.
    pub fn fabricate(&mut self, attacker: DeviceId) -> IdentityId {
        self.issue(IdentityOrigin::Fabricated(attacker), attacker)
    }

    /// Records that `thief` now also holds `identity`. Returns false when the
    /// identity is unknown.
    pub fn record_theft(&mut self, identity: IdentityId, thief: DeviceId) -> bool {
        match self.holders.get_mut(&identity) {
            Some(holders) => {
                holders.insert(thief);
                true
            }
            None => false,
        }
    }

    pub fn origin(&self, identity: IdentityId) -> Option<IdentityOrigin> {
        self.origins.get(&identity).copied()
    }

    pub fn holders(&self, identity: IdentityId) -> impl Iterator<Item = DeviceId> + '_ {
        self.holders.get(&identity).into_iter().flatten().copied()
    }

    pub fn contains(&self, identity: IdentityId) -> bool {
        self.origins.contains_key(&identity)
    }

    /// The legitimate identity of `device`, if it has one.
    pub fn identity_of(&self, device: DeviceId) -> Option<IdentityId> {
        self.origins
            .iter()
            .find(|(_, o)| **o == IdentityOrigin::Legitimate(device))
            .map(|(id, _)| *id)
    }

    /// Identities held by more than one device. Only stolen identities end up here.
    pub fn duplicates(&self) -> Vec<IdentityId> {
        self.holders
            .iter()
            .filter(|(_, h)| h.len() > 1)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device(id: u32, owner: &str, batch: &str) -> Device {
        let mut d = Device::new(DeviceId(id), DeviceClass::Subordinate);
        d.owner = owner.into();
        d.manufacturer_batch = batch.into();
        d
    }

    #[test]
    fn same_owner_is_ownership() {
        let i = device(1, "alice", "b1");
        let j = device(2, "alice", "b2");
        assert_eq!(classify_relation(&i, &j).kind, RelationType::Oor);
    }

    #[test]
    fn same_batch_is_parental() {
        let i = device(1, "alice", "b1");
        let j = device(2, "bob", "b1");
        assert_eq!(classify_relation(&i, &j).kind, RelationType::Por);
    }

    #[test]
    fn owner_beats_batch() {
        let i = device(1, "alice", "b1");
        let j = device(2, "alice", "b1");
        assert_eq!(classify_relation(&i, &j).kind, RelationType::Oor);
    }

    #[test]
    fn place_then_work_then_friendship() {
        let mut i = device(1, "alice", "b1");
        let mut j = device(2, "bob", "b2");
        i.home_place = Some("h".into());
        j.home_place = Some("h".into());
        i.work_group = Some("w".into());
        j.work_group = Some("w".into());
        assert_eq!(classify_relation(&i, &j).kind, RelationType::Clor);

        j.home_place = Some("other".into());
        assert_eq!(classify_relation(&i, &j).kind, RelationType::Cwor);

        j.work_group = None;
        let m = classify_relation(&i, &j);
        assert_eq!(
            m,
            RelationMatch {
                kind: RelationType::Sor,
                weak: true
            }
        );

        i.set_friends([DeviceId(2)]);
        let m = classify_relation(&i, &j);
        assert_eq!(
            m,
            RelationMatch {
                kind: RelationType::Sor,
                weak: false
            }
        );
        assert_eq!(classify_relation(&j, &i), m);
    }

    #[test]
    fn friends_never_contain_self() {
        let mut d = device(3, "o", "b");
        d.set_friends([DeviceId(1), DeviceId(3), DeviceId(4)]);
        assert!(!d.profile.friends.contains(&DeviceId(3)));
        assert_eq!(d.profile.friends.len(), 2);
    }

    #[test]
    fn gamma_table() {
        let expected = [
            (RelationType::Clor, 0.3),
            (RelationType::Cwor, 0.2),
            (RelationType::Oor, 0.2),
            (RelationType::Sor, 0.1),
            (RelationType::Por, 0.1),
        ];
        for (r, g) in expected {
            assert_eq!(r.gamma(), g);
        }
    }

    #[test]
    fn base_rates() {
        let mut rates = BaseRates::default();
        assert_eq!(rates.base_rate_of(&ContextKind::Residence).unwrap(), 1.0);
        assert_eq!(rates.base_rate_of(&ContextKind::Office).unwrap(), 0.7);
        assert_eq!(rates.base_rate_of(&ContextKind::School).unwrap(), 0.5);
        assert_eq!(rates.base_rate_of(&ContextKind::Gym).unwrap(), 0.4);
        assert_eq!(rates.base_rate_of(&ContextKind::Park).unwrap(), 0.2);

        let mall = ContextKind::Custom("mall".into());
        assert!(matches!(
            rates.base_rate_of(&mall),
            Err(Error::UnknownContext(_))
        ));
        rates.set(mall.clone(), 0.55).unwrap();
        assert_eq!(rates.base_rate_of(&mall).unwrap(), 0.55);
        assert!(rates.set(mall, 1.5).is_err());
    }

    #[test]
    fn context_parsing() {
        assert_eq!(
            "Office".parse::<ContextKind>().unwrap(),
            ContextKind::Office
        );
        assert_eq!(
            "mall".parse::<ContextKind>().unwrap(),
            ContextKind::Custom("mall".into())
        );
        assert_eq!("clor".parse::<RelationType>().unwrap(), RelationType::Clor);
        assert!("xyz".parse::<RelationType>().is_err());
    }

    #[test]
    fn registry_duplicates_only_after_theft() {
        let mut reg = IdentityRegistry::new();
        let a = reg.register_legitimate(DeviceId(0));
        let b = reg.register_legitimate(DeviceId(1));
        let f = reg.fabricate(DeviceId(9));
        assert_ne!(a, b);
        assert_ne!(b, f);
        assert!(reg.duplicates().is_empty());
        assert!(reg.record_theft(a, DeviceId(9)));
        assert_eq!(reg.duplicates(), vec![a]);
        assert_eq!(reg.identity_of(DeviceId(1)), Some(b));
        assert!(!reg.record_theft(IdentityId(999), DeviceId(9)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_device(id: u32) -> impl Strategy<Value = Device> {
            (
                0u8..3,
                0u8..3,
                proptest::option::of(0u8..3),
                proptest::option::of(0u8..3),
                proptest::collection::btree_set(0u32..6, 0..4),
            )
                .prop_map(move |(o, b, h, w, f)| {
                    let mut d = Device::new(DeviceId(id), DeviceClass::Subordinate);
                    d.owner = format!("o{o}");
                    d.manufacturer_batch = format!("b{b}");
                    d.home_place = h.map(|h| format!("h{h}"));
                    d.work_group = w.map(|w| format!("w{w}"));
                    d.set_friends(f.into_iter().map(DeviceId));
                    d
                })
        }

        proptest! {
            #[test]
            fn classification_is_symmetric(i in arb_device(100), j in arb_device(101)) {
                prop_assert_eq!(classify_relation(&i, &j), classify_relation(&j, &i));
            }
        }
    }
}
