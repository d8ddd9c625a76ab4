//! Building the device population of a scenario.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::graph::{relaxed_caveman, FriendshipGraph};
use crate::io::{load_friendship_edges, load_roster};
use crate::sim::config::ScenarioConfig;
use crate::sim::mobility::random_point;
use crate::social::{Device, DeviceClass, DeviceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Member of the network from the start.
    Founding,
    /// Legitimate outsider that asks to join.
    Requester,
    Attacker,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub devices: BTreeMap<DeviceId, Device>,
    pub roles: BTreeMap<DeviceId, Role>,
    pub graph: FriendshipGraph,
    /// Social group of every device, used for interests and places.
    pub groups: BTreeMap<DeviceId, usize>,
}

impl Population {
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = DeviceId> + '_ {
        self.roles
            .iter()
            .filter(move |(_, r)| **r == role)
            .map(|(d, _)| *d)
    }

    pub fn managers(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.devices
            .values()
            .filter(|d| d.is_manager())
            .map(|d| d.id)
    }
}

fn synthetic_devices<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<Device> {
    (0..cfg.node_count as u32)
        .map(|k| {
            let mut d = Device::new(DeviceId(k), DeviceClass::Subordinate);
            d.position = random_point(cfg.area, rng);
            d
        })
        .collect()
}

fn assign_attributes<R: Rng + ?Sized>(
    devices: &mut [Device],
    groups: &BTreeMap<DeviceId, usize>,
    cfg: &ScenarioConfig,
    rng: &mut R,
) {
    let p = &cfg.population;
    let n = devices.len();
    let batches = n.div_ceil(p.batch_size).max(1);
    let works = n.div_ceil(p.work_group_size).max(1);
    let mut seen_in_group: BTreeMap<usize, usize> = BTreeMap::new();
    for d in devices.iter_mut() {
        let g = groups[&d.id];
        let rank = seen_in_group.entry(g).or_default();
        d.owner = format!("o{g}.{}", *rank / p.devices_per_owner);
        *rank += 1;
        d.manufacturer_batch = format!("b{}", rng.gen_range(0..batches));
        d.home_place = Some(format!("h{g}.{}", rng.gen_range(0..p.places_per_group)));
        d.work_group = Some(format!("w{}", rng.gen_range(0..works)));
    }
}

fn assign_interests<R: Rng + ?Sized>(
    devices: &mut [Device],
    groups: &BTreeMap<DeviceId, usize>,
    cfg: &ScenarioConfig,
    rng: &mut R,
) {
    let p = &cfg.population;
    for d in devices.iter_mut() {
        if !d.profile.interests.is_empty() || p.interests_per_group == 0 {
            continue;
        }
        let g = groups[&d.id];
        let topics: Vec<String> = (0..p.interests_per_group)
            .map(|k| format!("g{g}.t{k}"))
            .collect();
        let mut kept: Vec<String> = topics
            .iter()
            .filter(|_| rng.gen::<f64>() < p.interest_keep_probability)
            .cloned()
            .collect();
        if kept.is_empty() {
            kept.push(topics.choose(rng).expect("non-empty topics").clone());
        }
        d.profile.interests = kept.into_iter().collect();
    }
}

/// Builds devices, friendships, roles and classes for `cfg`.
pub fn build_population<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Population> {
    let p = &cfg.population;
    let from_roster = p.roster_path.is_some();
    let mut devices: Vec<Device> = match &p.roster_path {
        Some(path) => load_roster(path)?.into_iter().map(|e| e.device).collect(),
        None => synthetic_devices(cfg, rng),
    };
    devices.sort_by_key(|d| d.id);
    let n = devices.len();
    if n < 2 {
        return Err(Error::Config("need at least 2 devices".into()));
    }

    // graph node k belongs to the k-th device
    let (graph, node_groups) = match &p.friends_path {
        Some(path) => {
            let full = load_friendship_edges(path)?;
            let g = full.sample_subgraph(n, rng)?;
            let labels = g.label_propagation(rng, 100);
            let groups: Vec<usize> = (0..n as u32).map(|v| labels[&v]).collect();
            (g, groups)
        }
        None => relaxed_caveman(n, p.group_size, p.rewire_probability, rng)?,
    };
    let ids: Vec<DeviceId> = devices.iter().map(|d| d.id).collect();
    let mut groups = BTreeMap::new();
    for (k, d) in devices.iter_mut().enumerate() {
        d.set_friends(graph.neighbors(k as u32).map(|v| ids[v as usize]));
        groups.insert(d.id, node_groups[k]);
    }
    if !from_roster {
        assign_attributes(&mut devices, &groups, cfg, rng);
    }
    assign_interests(&mut devices, &groups, cfg, rng);

    // roles: roster managers always stay founding members
    let attackers = cfg.attacker_count();
    let requesters = cfg.requester_count();
    let mut eligible: Vec<DeviceId> = devices
        .iter()
        .filter(|d| !d.is_manager())
        .map(|d| d.id)
        .collect();
    if attackers + requesters >= eligible.len() {
        return Err(Error::Config(format!(
            "{attackers} attackers and {requesters} requesters leave no founding members among {n} devices"
        )));
    }
    eligible.shuffle(rng);
    let mut roles: BTreeMap<DeviceId, Role> = ids.iter().map(|d| (*d, Role::Founding)).collect();
    for d in &eligible[..attackers] {
        roles.insert(*d, Role::Attacker);
    }
    for d in &eligible[attackers..attackers + requesters] {
        roles.insert(*d, Role::Requester);
    }

    let mut devices: BTreeMap<DeviceId, Device> = devices.into_iter().map(|d| (d.id, d)).collect();
    if !from_roster || !devices.values().any(Device::is_manager) {
        let mut founding: Vec<DeviceId> = roles
            .iter()
            .filter(|(_, r)| **r == Role::Founding)
            .map(|(d, _)| *d)
            .collect();
        let count = ((founding.len() as f64 * cfg.manager_fraction).round() as usize)
            .clamp(1, founding.len());
        founding.shuffle(rng);
        for d in &founding[..count] {
            devices.get_mut(d).unwrap().class = DeviceClass::Manager;
        }
    }
    for d in devices.values_mut() {
        d.speed = cfg.speed;
    }

    let groups = groups;
    Ok(Population {
        devices,
        roles,
        graph,
        groups,
    })
}
