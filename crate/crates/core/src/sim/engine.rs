//! Discrete-time scenario driver.
//!
//! Every tick runs, in order: the periodic epoch (community refresh,
//! recommendation exchange, re-assessment of admitted identities), identity
//! acquisition by attackers, access requests, pairwise interactions and
//! finally mobility. All state lives in ordered maps and a single seeded
//! generator, so a configuration always produces the same event log.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversary::{Attacker, Behavior, IdentitySource};
use crate::authn::{evaluate_access, AccessRequest, Roster, TrustView, Verdict};
use crate::community::{Community, CommunityMap};
use crate::error::Result;
use crate::metrics::{DeviceKind, MetricsReport};
use crate::sim::config::ScenarioConfig;
use crate::sim::events::{AssessmentRecord, DecisionRecord, Event, EventLog, ExperienceCause};
use crate::sim::interactions::{
    exchange_recommendations, generate_interactions, share_opinions, InteractionRules, Sighting,
};
use crate::sim::mobility::{random_point, step_mobility, Waypoint};
use crate::sim::population::{build_population, Role};
use crate::social::{
    Device, DeviceId, IdentityId, IdentityOrigin, IdentityRegistry, Position, SocialProfile,
};
use crate::trust::{OpinionStore, Outcome, RecommendationCache};

#[derive(Debug, Clone)]
struct Requester {
    device: DeviceId,
    identity: IdentityId,
    next_attempt: f64,
    admitted: bool,
    /// Seconds spent within interaction range of each manager.
    dwell: BTreeMap<DeviceId, f64>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: EventLog,
    pub report: MetricsReport,
    /// Communities at the last refresh.
    pub communities: Vec<Community<IdentityId>>,
    /// Device behind each identity: its legitimate owner or its forger.
    pub identity_devices: BTreeMap<IdentityId, DeviceId>,
    pub devices: BTreeMap<DeviceId, Device>,
    pub roles: BTreeMap<DeviceId, Role>,
}

struct World<'c> {
    cfg: &'c ScenarioConfig,
    rng: ChaCha8Rng,
    base_rate: f64,
    devices: BTreeMap<DeviceId, Device>,
    roles: BTreeMap<DeviceId, Role>,
    waypoints: BTreeMap<DeviceId, Waypoint>,
    registry: IdentityRegistry,
    roster: Roster,
    opinions: OpinionStore,
    recommendations: RecommendationCache,
    communities: CommunityMap,
    managers: Vec<DeviceId>,
    attackers: Vec<Attacker>,
    /// Identity each attacker currently shows to its neighbors.
    shown: BTreeMap<DeviceId, IdentityId>,
    requesters: Vec<Requester>,
    last_interaction: BTreeMap<(DeviceId, DeviceId), f64>,
    log: EventLog,
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut world = World::new(cfg)?;
    let steps = (cfg.duration / cfg.tick).round() as u64;
    let mut next_epoch = 0.0;
    for k in 0..steps {
        let t = k as f64 * cfg.tick;
        if t + 1e-9 >= next_epoch {
            world.epoch(t)?;
            next_epoch += cfg.epoch_interval;
        }
        world.acquire_identities(t);
        world.requests(t)?;
        world.interactions(t);
        world.mobility(t);
    }
    Ok(world.finish())
}

impl<'c> World<'c> {
    fn new(cfg: &'c ScenarioConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let pop = build_population(cfg, &mut rng)?;
        let mut log = EventLog::new();
        let managers: Vec<DeviceId> = pop.managers().collect();

        let mut registry = IdentityRegistry::new();
        let mut roster = Roster::new();
        let mut requesters = Vec::new();
        for (&id, &role) in &pop.roles {
            if role == Role::Attacker {
                continue;
            }
            let identity = registry.register_legitimate(id);
            match role {
                Role::Founding => {
                    let manager =
                        nearest(&pop.devices, &managers, id).expect("at least one manager");
                    roster.enroll_founding(identity, id, manager);
                    log.push(Event::Enroll {
                        t: 0.0,
                        identity,
                        device: id,
                        manager,
                    });
                }
                Role::Requester => requesters.push(Requester {
                    device: id,
                    identity,
                    next_attempt: 0.0,
                    admitted: false,
                    dwell: BTreeMap::new(),
                }),
                Role::Attacker => unreachable!(),
            }
        }

        let profile = cfg.attacker_profile();
        let attackers: Vec<Attacker> = pop
            .with_role(Role::Attacker)
            .map(|d| Attacker::new(d, profile.clone()))
            .collect();

        let mut waypoints = BTreeMap::new();
        for d in pop.devices.values() {
            let factor = if pop.roles[&d.id] == Role::Attacker {
                profile.speed_factor
            } else {
                1.0
            };
            let target = random_point(cfg.area, &mut rng);
            if cfg.log_mobility {
                log.push(Event::Waypoint {
                    t: 0.0,
                    device: d.id,
                    x: target.x,
                    y: target.y,
                });
            }
            waypoints.insert(
                d.id,
                Waypoint {
                    target,
                    speed: d.speed * factor,
                },
            );
        }

        let communities = CommunityMap::build(
            BTreeMap::new(),
            cfg.similarity_weights(),
            cfg.similarity_threshold,
            &cfg.context,
        )?;
        Ok(World {
            cfg,
            rng,
            base_rate: cfg.base_rate()?,
            devices: pop.devices,
            roles: pop.roles,
            waypoints,
            registry,
            roster,
            opinions: OpinionStore::new(),
            recommendations: RecommendationCache::new(),
            communities,
            managers,
            attackers,
            shown: BTreeMap::new(),
            requesters,
            last_interaction: BTreeMap::new(),
            log,
        })
    }

    fn is_attacker(&self, d: DeviceId) -> bool {
        self.roles.get(&d) == Some(&Role::Attacker)
    }

    fn distance(&self, a: DeviceId, b: DeviceId) -> f64 {
        self.devices[&a]
            .position
            .distance(&self.devices[&b].position)
    }

    /// Legitimate devices currently admitted under their own identity.
    fn members(&self) -> Vec<(DeviceId, IdentityId)> {
        let presences = self.roster.presences();
        presences
            .iter()
            .filter(|(_, d)| !self.is_attacker(*d))
            .map(|(i, d)| (*d, *i))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Profile shown with an identity by a device.
    fn profile_shown(&self, identity: IdentityId, presenter: DeviceId) -> Option<SocialProfile> {
        if self.is_attacker(presenter) {
            self.attackers
                .iter()
                .find(|a| a.device == presenter)?
                .pool()
                .iter()
                .find(|h| h.identity == identity)
                .map(|h| h.profile.clone())
        } else {
            Some(self.devices[&presenter].profile.clone())
        }
    }

    fn epoch(&mut self, t: f64) -> Result<()> {
        self.refresh_communities(t)?;
        self.exchange_recommendations(t);
        self.reassess(t)
    }

    fn refresh_communities(&mut self, t: f64) -> Result<()> {
        let mut profiles: BTreeMap<IdentityId, SocialProfile> = BTreeMap::new();
        // legitimate holders first so a stolen identity keeps its owner's profile
        let mut presences: Vec<(IdentityId, DeviceId)> =
            self.roster.presences().into_iter().collect();
        presences.sort_by_key(|(i, d)| (self.is_attacker(*d), *i, *d));
        for (identity, presenter) in presences {
            if profiles.contains_key(&identity) {
                continue;
            }
            if let Some(p) = self.profile_shown(identity, presenter) {
                profiles.insert(identity, p);
            }
        }
        let members = profiles.len();
        self.communities = CommunityMap::build(
            profiles,
            self.cfg.similarity_weights(),
            self.cfg.similarity_threshold,
            &self.cfg.context,
        )?;
        let cs = self.communities.communities();
        self.log.push(Event::Communities {
            t,
            count: cs.len(),
            members,
            largest: cs.iter().map(|c| c.members.len()).max().unwrap_or(0),
        });
        Ok(())
    }

    fn forward(&mut self, t: f64, sender: DeviceId, receiver: DeviceId) {
        let entries = share_opinions(
            sender,
            receiver,
            &self.devices,
            &self.opinions,
            &mut self.recommendations,
            self.base_rate,
        );
        if entries > 0 {
            self.log.push(Event::Exchange {
                t,
                sender,
                receiver,
                entries,
            });
        }
    }

    /// Subordinates report their opinions to the nearest manager, then
    /// managers share their own opinions with each other.
    fn exchange_recommendations(&mut self, t: f64) {
        for (device, _) in self.members() {
            if self.devices[&device].is_manager() {
                continue;
            }
            if let Some(m) = nearest(&self.devices, &self.managers, device) {
                self.forward(t, device, m);
            }
        }
        let transfers = exchange_recommendations(
            &self.managers,
            &self.devices,
            &self.opinions,
            &mut self.recommendations,
            self.base_rate,
        );
        for (sender, receiver, entries) in transfers {
            self.log.push(Event::Exchange {
                t,
                sender,
                receiver,
                entries,
            });
        }
    }

    /// Managers re-evaluate the identities associated with them; admitted
    /// outsiders whose trust no longer clears the threshold are dropped.
    fn reassess(&mut self, t: f64) -> Result<()> {
        let associations: Vec<_> = self.roster.associations().collect();
        let mut revoked = Vec::new();
        for a in associations {
            if a.presenter == a.manager {
                continue;
            }
            let Some(profile) = self.profile_shown(a.identity, a.presenter) else {
                continue;
            };
            let assessment = self.view().assess(a.manager, a.identity, &profile, t)?;
            self.log.push(Event::Assessment(AssessmentRecord {
                t,
                manager: a.manager,
                identity: a.identity,
                presenter: a.presenter,
                relation: self.cfg.relation_filter,
                direct: assessment.direct,
                similarity: assessment.similarity,
                recommendation: assessment.recommendation,
                trust: assessment.trust,
            }));
            if self.cfg.revoke_on_low_trust
                && !self.roster.is_founding(&a)
                && assessment.trust <= self.cfg.trust_threshold
            {
                revoked.push((a, assessment.trust));
            }
        }
        for (a, trust) in revoked {
            self.roster.revoke(&a);
            self.log.push(Event::Revoke {
                t,
                identity: a.identity,
                presenter: a.presenter,
                manager: a.manager,
                trust,
            });
            for r in self
                .requesters
                .iter_mut()
                .filter(|r| r.device == a.presenter)
            {
                r.admitted = false;
                r.next_attempt = t + self.cfg.requester_retry_interval;
            }
        }
        Ok(())
    }

    fn view(&self) -> TrustView<'_> {
        TrustView {
            devices: &self.devices,
            opinions: &self.opinions,
            recommendations: &self.recommendations,
            communities: &self.communities,
            base_rate: self.base_rate,
            relation_filter: self.cfg.relation_filter,
        }
    }

    fn acquire_identities(&mut self, t: f64) {
        let radius = self.cfg.attacker_profile().eavesdrop_radius;
        let members: Vec<(DeviceId, IdentityId, Position)> = self
            .members()
            .into_iter()
            .map(|(d, i)| (d, i, self.devices[&d].position))
            .collect();
        for k in 0..self.attackers.len() {
            let me = self.attackers[k].device;
            let here = self.devices[&me].position;
            let mut in_range: Vec<(f64, DeviceId, IdentityId)> = members
                .iter()
                .map(|(d, i, p)| (here.distance(p), *d, *i))
                .filter(|(dist, _, _)| *dist <= radius)
                .collect();
            in_range.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, d, i) in &in_range {
                self.attackers[k].observe(*i, &self.devices[d].profile);
            }
            if self.attackers[k].wants_identity() {
                match self.attackers[k].profile.identity_source {
                    IdentitySource::Stolen => {
                        let victim = in_range
                            .iter()
                            .find(|(_, _, i)| !self.attackers[k].holds(*i));
                        if let Some(&(dist, d, i)) = victim {
                            let victim = &self.devices[&d];
                            if self.attackers[k]
                                .steal_identity(&mut self.registry, victim, i, dist)
                                .is_ok()
                            {
                                self.log.push(Event::Theft {
                                    t,
                                    attacker: me,
                                    identity: i,
                                    victim: d,
                                });
                            }
                        }
                    }
                    IdentitySource::Fabricated => {
                        let size = self.cfg.attacker.forged_set_size;
                        if size == 0 || self.attackers[k].observations() > 0 {
                            let forged = self.attackers[k].forge_profile(&mut self.rng, size);
                            let identity =
                                self.attackers[k].fabricate_identity(&mut self.registry, forged);
                            self.log.push(Event::Fabricate {
                                t,
                                attacker: me,
                                identity,
                            });
                        }
                    }
                }
            }
            let a = &self.attackers[k];
            let current = match a.profile.behavior {
                Behavior::Churn => a.active_identity().map(|h| h.identity),
                Behavior::MultiIdentity => self
                    .shown
                    .get(&me)
                    .copied()
                    .or_else(|| a.pool().first().map(|h| h.identity)),
            };
            if let Some(i) = current {
                self.shown.insert(me, i);
            }
        }
    }

    fn managers_by_distance(&self, from: DeviceId, limit: Option<f64>) -> Vec<DeviceId> {
        let mut ms: Vec<(f64, DeviceId)> = self
            .managers
            .iter()
            .map(|m| (self.distance(from, *m), *m))
            .filter(|(d, _)| limit.is_none_or(|r| *d <= r))
            .collect();
        ms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ms.into_iter().map(|(_, m)| m).collect()
    }

    fn requests(&mut self, t: f64) -> Result<()> {
        let mut pending: Vec<AccessRequest> = Vec::new();
        for k in 0..self.attackers.len() {
            let me = self.attackers[k].device;
            let reachable = self.managers_by_distance(me, Some(self.cfg.interaction_radius));
            let total = self.managers.len();
            let reqs = self.attackers[k].step(t, &reachable, total, &self.cfg.context);
            if let Some(r) = reqs.last() {
                self.shown.insert(me, r.requester_identity);
            }
            pending.extend(reqs);
        }
        let radius = self.cfg.interaction_radius;
        for k in 0..self.requesters.len() {
            if self.requesters[k].admitted {
                continue;
            }
            let me = self.requesters[k].device;
            let in_range = self.managers_by_distance(me, Some(radius));
            let r = &mut self.requesters[k];
            for m in &in_range {
                *r.dwell.entry(*m).or_default() += self.cfg.tick;
            }
            if t + 1e-9 < r.next_attempt {
                continue;
            }
            // ask a manager only after spending enough time near it
            let Some(&target) = in_range
                .iter()
                .find(|m| r.dwell[m] + 1e-9 >= self.cfg.requester_dwell)
            else {
                continue;
            };
            pending.push(AccessRequest {
                requester_identity: r.identity,
                presenter: me,
                presented: self.devices[&me].profile.clone(),
                target_manager: target,
                context: self.cfg.context.clone(),
                time: t,
            });
        }
        for req in pending {
            self.decide(req)?;
        }
        Ok(())
    }

    fn decide(&mut self, req: AccessRequest) -> Result<()> {
        let t = req.time;
        let (decision, assessment) = evaluate_access(&req, &self.view(), self.cfg.trust_threshold)?;
        let attacker = self.is_attacker(req.presenter);
        let source = attacker.then(|| match self.registry.origin(req.requester_identity) {
            Some(IdentityOrigin::Fabricated(_)) => IdentitySource::Fabricated,
            _ => IdentitySource::Stolen,
        });
        self.log.push(Event::Decision(DecisionRecord {
            t,
            manager: req.target_manager,
            identity: req.requester_identity,
            presenter: req.presenter,
            device_kind: if attacker {
                DeviceKind::Attacker
            } else {
                DeviceKind::Legitimate
            },
            source,
            relation: self.cfg.relation_filter,
            direct: assessment.direct,
            similarity: assessment.similarity,
            recommendation: assessment.recommendation,
            trust: assessment.trust,
            verdict: decision.verdict,
        }));
        self.roster.record_decision(&req, &decision);

        if decision.is_grant() {
            let (association, conflict) =
                self.roster
                    .admit(req.requester_identity, req.presenter, req.target_manager)?;
            self.log.push(Event::Admit {
                t,
                identity: association.identity,
                presenter: association.presenter,
                manager: association.manager,
            });
            if let Some(conflict) = conflict {
                let presenters: BTreeSet<DeviceId> =
                    conflict.associations.iter().map(|a| a.presenter).collect();
                self.log.push(Event::Conflict {
                    t,
                    identity: conflict.identity,
                    presenters: presenters.into_iter().collect(),
                });
                let managers: BTreeSet<DeviceId> =
                    conflict.associations.iter().map(|a| a.manager).collect();
                for m in managers {
                    self.opinions
                        .record_experience(m, conflict.identity, Outcome::Negative);
                    self.log.push(Event::Experience {
                        t,
                        evaluator: m,
                        subject: conflict.identity,
                        presenter: req.presenter,
                        outcome: Outcome::Negative,
                        cause: ExperienceCause::Conflict,
                    });
                }
            }
        }

        if attacker {
            if let Some(a) = self
                .attackers
                .iter_mut()
                .find(|a| a.device == req.presenter)
            {
                a.record_outcome(req.requester_identity, decision.verdict);
            }
        } else if let Some(r) = self
            .requesters
            .iter_mut()
            .find(|r| r.device == req.presenter)
        {
            match decision.verdict {
                Verdict::Grant => r.admitted = true,
                Verdict::Deny => r.next_attempt = t + self.cfg.requester_retry_interval,
            }
        }
        Ok(())
    }

    /// Admitted legitimate devices observe every identity shown nearby.
    fn interactions(&mut self, t: f64) {
        let observers: Vec<(DeviceId, Position)> = self
            .members()
            .into_iter()
            .map(|(d, _)| (d, self.devices[&d].position))
            .collect();
        let mut shown: Vec<(DeviceId, IdentityId)> = self
            .roles
            .iter()
            .filter(|(_, r)| **r != Role::Attacker)
            .filter_map(|(d, _)| self.registry.identity_of(*d).map(|i| (*d, i)))
            .collect();
        shown.extend(self.shown.iter().map(|(d, i)| (*d, *i)));
        shown.sort();
        let sightings: Vec<Sighting> = shown
            .into_iter()
            .map(|(device, identity)| Sighting {
                device,
                identity,
                position: self.devices[&device].position,
                attacker: self.is_attacker(device),
            })
            .collect();
        let rules = InteractionRules {
            radius: self.cfg.interaction_radius,
            period: self.cfg.interaction_period,
            p_positive_legit: self.cfg.positive_probability,
            p_negative_attacker: self.cfg.attacker_negative_probability,
        };
        let happened = generate_interactions(
            t,
            &observers,
            &sightings,
            &mut self.last_interaction,
            &rules,
            &mut self.rng,
        );
        for i in happened {
            self.opinions
                .record_experience(i.observer, i.subject, i.outcome);
            self.log.push(Event::Experience {
                t,
                evaluator: i.observer,
                subject: i.subject,
                presenter: i.presenter,
                outcome: i.outcome,
                cause: i.cause,
            });
        }
    }

    fn mobility(&mut self, t: f64) {
        let area = self.cfg.area;
        let dt = self.cfg.tick;
        for (id, device) in self.devices.iter_mut() {
            let wp = self
                .waypoints
                .get_mut(id)
                .expect("every device has a waypoint");
            if let Some(target) = step_mobility(&mut device.position, wp, area, dt, &mut self.rng) {
                if self.cfg.log_mobility {
                    self.log.push(Event::Waypoint {
                        t: t + dt,
                        device: *id,
                        x: target.x,
                        y: target.y,
                    });
                }
            }
        }
    }

    fn finish(self) -> RunOutput {
        let mut identity_devices = BTreeMap::new();
        for c in self.communities.communities() {
            for i in &c.members {
                let owner = match self.registry.origin(*i) {
                    Some(IdentityOrigin::Legitimate(d)) | Some(IdentityOrigin::Fabricated(d)) => d,
                    None => continue,
                };
                identity_devices.insert(*i, owner);
            }
        }
        RunOutput {
            report: self.log.report(),
            communities: self.communities.communities().to_vec(),
            identity_devices,
            log: self.log,
            devices: self.devices,
            roles: self.roles,
        }
    }
}

fn nearest(
    devices: &BTreeMap<DeviceId, Device>,
    managers: &[DeviceId],
    from: DeviceId,
) -> Option<DeviceId> {
    if managers.contains(&from) {
        return Some(from);
    }
    let pos = devices[&from].position;
    managers
        .iter()
        .map(|m| (devices[m].position.distance(&pos), *m))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, m)| m)
}
