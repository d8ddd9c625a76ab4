//! Scenario configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackerProfile, Behavior, IdentitySource};
use crate::community::SimilarityWeights;
use crate::error::{Error, Result};
use crate::social::{BaseRates, ContextKind, RelationType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerConfig {
    pub behavior: Behavior,
    pub identity_source: IdentitySource,
    pub pool_size: usize,
    /// Seconds between requests.
    pub attempt_interval: f64,
    /// Defaults to 1 for churn and 0.5 for multiple identities.
    pub speed_factor: Option<f64>,
    pub deny_streak_limit: u32,
    pub idle_fraction: f64,
    /// Defaults to the interaction radius.
    pub eavesdrop_radius: Option<f64>,
    /// Friends and interests put into each forged profile.
    pub forged_set_size: usize,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            behavior: Behavior::Churn,
            identity_source: IdentitySource::Stolen,
            pool_size: 3,
            attempt_interval: 5.0,
            speed_factor: None,
            deny_streak_limit: 3,
            idle_fraction: 0.0,
            eavesdrop_radius: None,
            forged_set_size: 4,
        }
    }
}

/// Synthetic population parameters, or files to load it from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    /// Friendship edge list; a subgraph of `node_count` nodes is sampled.
    pub friends_path: Option<PathBuf>,
    /// Device roster; overrides node count, classes, attributes and positions.
    pub roster_path: Option<PathBuf>,
    pub group_size: usize,
    pub rewire_probability: f64,
    pub interests_per_group: usize,
    /// Chance that a device shares each of its group's interests.
    pub interest_keep_probability: f64,
    pub places_per_group: usize,
    pub devices_per_owner: usize,
    /// Roughly how many devices share a manufacturer batch.
    pub batch_size: usize,
    /// Roughly how many devices share a work group.
    pub work_group_size: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            friends_path: None,
            roster_path: None,
            group_size: 10,
            rewire_probability: 0.1,
            interests_per_group: 4,
            interest_keep_probability: 0.9,
            places_per_group: 2,
            devices_per_owner: 2,
            batch_size: 10,
            work_group_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub node_count: usize,
    /// Share of devices that are attackers.
    pub attacker_fraction: f64,
    /// Share of devices that are legitimate outsiders asking to join.
    pub requester_fraction: f64,
    /// Share of founding members acting as managers.
    pub manager_fraction: f64,
    pub area: Area,
    /// Legitimate device speed in m/s.
    pub speed: f64,
    pub duration: f64,
    pub tick: f64,
    pub context: ContextKind,
    /// Base rates keyed by context name, applied over the built-in table.
    pub base_rates: BTreeMap<String, f64>,
    pub relation_filter: RelationType,
    pub similarity_threshold: f64,
    /// Weight of friendship similarity; interests get the rest.
    pub friendship_weight: f64,
    pub trust_threshold: f64,
    pub interaction_radius: f64,
    /// Minimum seconds between two interactions of the same pair.
    pub interaction_period: f64,
    /// Seconds between community refreshes and recommendation exchanges.
    pub epoch_interval: f64,
    /// Chance a legitimate device behaves well in an interaction.
    pub positive_probability: f64,
    /// Chance an attacker misbehaves in an interaction.
    pub attacker_negative_probability: f64,
    /// Seconds a legitimate requester spends near a manager before asking it.
    pub requester_dwell: f64,
    /// Seconds a denied legitimate requester waits before asking again.
    pub requester_retry_interval: f64,
    /// Drop admitted identities whose trust falls to the threshold or below.
    pub revoke_on_low_trust: bool,
    /// Log every waypoint draw.
    pub log_mobility: bool,
    pub rng_seed: u64,
    pub attacker: AttackerConfig,
    pub population: PopulationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "default".to_string(),
            node_count: 100,
            attacker_fraction: 0.10,
            requester_fraction: 0.05,
            manager_fraction: 0.20,
            area: Area {
                width: 100.0,
                height: 100.0,
            },
            speed: 2.0,
            duration: 600.0,
            tick: 1.0,
            context: ContextKind::School,
            base_rates: ContextKind::BUILTIN
                .iter()
                .map(|k| (k.to_string(), k.default_base_rate().unwrap()))
                .collect(),
            relation_filter: RelationType::Sor,
            similarity_threshold: 0.5,
            friendship_weight: 0.5,
            trust_threshold: crate::authn::DEFAULT_TRUST_THRESHOLD,
            interaction_radius: 15.0,
            interaction_period: 10.0,
            epoch_interval: 30.0,
            positive_probability: 0.95,
            attacker_negative_probability: 0.8,
            requester_dwell: 30.0,
            requester_retry_interval: 30.0,
            revoke_on_low_trust: true,
            log_mobility: true,
            rng_seed: 1,
            attacker: AttackerConfig::default(),
            population: PopulationConfig::default(),
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 2 && self.population.roster_path.is_none() {
            return Err(Error::Config("need at least 2 nodes".into()));
        }
        if !(0.0..1.0).contains(&self.attacker_fraction) {
            return Err(Error::Config("attacker fraction must lie in [0, 1)".into()));
        }
        unit("requester fraction", self.requester_fraction)?;
        if self.attacker_fraction + self.requester_fraction >= 1.0 {
            return Err(Error::Config(
                "attackers and requesters leave no founding members".into(),
            ));
        }
        if !(self.manager_fraction > 0.0 && self.manager_fraction <= 1.0) {
            return Err(Error::Config("manager fraction must lie in (0, 1]".into()));
        }
        positive("area width", self.area.width)?;
        positive("area height", self.area.height)?;
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::Config("speed must be non-negative".into()));
        }
        positive("duration", self.duration)?;
        positive("tick", self.tick)?;
        positive("interaction period", self.interaction_period)?;
        positive("epoch interval", self.epoch_interval)?;
        positive("requester retry interval", self.requester_retry_interval)?;
        if self.requester_dwell.is_nan() || self.requester_dwell < 0.0 {
            return Err(Error::Config("requester dwell must be non-negative".into()));
        }
        if self.interaction_radius.is_nan() || self.interaction_radius < 0.0 {
            return Err(Error::Config(
                "interaction radius must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.similarity_threshold) {
            return Err(Error::Config(
                "similarity threshold must lie in [0, 1)".into(),
            ));
        }
        SimilarityWeights::new(self.friendship_weight)?;
        unit("trust threshold", self.trust_threshold)?;
        unit("positive probability", self.positive_probability)?;
        unit(
            "attacker negative probability",
            self.attacker_negative_probability,
        )?;
        let rates = self.base_rate_table()?;
        rates.base_rate_of(&self.context)?;
        self.attacker_profile().validate()?;
        let p = &self.population;
        if p.group_size < 2 {
            return Err(Error::Config("group size must be at least 2".into()));
        }
        unit("rewire probability", p.rewire_probability)?;
        unit("interest keep probability", p.interest_keep_probability)?;
        if p.places_per_group == 0
            || p.devices_per_owner == 0
            || p.batch_size == 0
            || p.work_group_size == 0
        {
            return Err(Error::Config("population sizes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn base_rate_table(&self) -> Result<BaseRates> {
        let mut rates = BaseRates::default();
        for (name, rate) in &self.base_rates {
            rates.set(name.parse()?, *rate)?;
        }
        Ok(rates)
    }

    pub fn base_rate(&self) -> Result<f64> {
        self.base_rate_table()?.base_rate_of(&self.context)
    }

    pub fn similarity_weights(&self) -> SimilarityWeights {
        SimilarityWeights::new(self.friendship_weight).expect("validated weight")
    }

    pub fn attacker_count(&self) -> usize {
        (self.node_count as f64 * self.attacker_fraction).round() as usize
    }

    pub fn requester_count(&self) -> usize {
        (self.node_count as f64 * self.requester_fraction).round() as usize
    }

    pub fn attacker_profile(&self) -> AttackerProfile {
        let a = &self.attacker;
        let mut p = AttackerProfile::new(a.behavior, a.identity_source);
        p.pool_size = a.pool_size;
        p.attempt_interval = a.attempt_interval;
        if let Some(f) = a.speed_factor {
            p.speed_factor = f;
        }
        p.deny_streak_limit = a.deny_streak_limit;
        p.idle_fraction = a.idle_fraction;
        p.eavesdrop_radius = a.eavesdrop_radius.unwrap_or(self.interaction_radius);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.attacker_count(), 10);
        assert_eq!(cfg.base_rate().unwrap(), 0.5);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml() {
        let cfg = ScenarioConfig::from_toml_str(
            "node_count = 150\ncontext = \"park\"\n[attacker]\nbehavior = \"multi\"\n[base_rates]\nlibrary = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.node_count, 150);
        assert_eq!(cfg.attacker_count(), 15);
        assert_eq!(cfg.attacker.behavior, Behavior::MultiIdentity);
        assert_eq!(cfg.attacker_profile().speed_factor, 0.5);
        assert_eq!(cfg.base_rate().unwrap(), 0.2);
    }

    #[test]
    fn custom_context_needs_rate() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("context = \"library\"\n"),
            Err(Error::UnknownContext(_))
        ));
        let cfg =
            ScenarioConfig::from_toml_str("context = \"library\"\n[base_rates]\nlibrary = 0.3\n")
                .unwrap();
        assert_eq!(cfg.base_rate().unwrap(), 0.3);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "attacker_fraction = 1.0",
            "similarity_threshold = 1.0",
            "tick = 0.0",
            "friendship_weight = 1.5",
            "unknown_key = 3",
            "[attacker]\nbehavior = \"multi\"\npool_size = 1",
        ] {
            assert!(ScenarioConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
