//! Access decisions taken at manager nodes and the membership roster they feed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::community::CommunityMap;
use crate::error::{Error, Result};
use crate::social::{ContextKind, Device, DeviceId, IdentityId, RelationType, SocialProfile};
use crate::trust::{recommendation, OpinionStore, RecommendationCache, TrustAssessment};

/// Trust values strictly above this admit a requester.
pub const DEFAULT_TRUST_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub requester_identity: IdentityId,
    /// Device actually sending the request. Not visible to the manager's
    /// trust computation; used for roster bookkeeping.
    pub presenter: DeviceId,
    pub presented: SocialProfile,
    pub target_manager: DeviceId,
    pub context: ContextKind,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Grant,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Granted,
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessDecision {
    pub verdict: Verdict,
    pub trust_at_decision: f64,
    pub reason: DecisionReason,
}

impl AccessDecision {
    /// Grants iff `trust > threshold`.
    pub fn from_trust(trust: f64, threshold: f64) -> Self {
        if trust > threshold {
            AccessDecision {
                verdict: Verdict::Grant,
                trust_at_decision: trust,
                reason: DecisionReason::Granted,
            }
        } else {
            AccessDecision {
                verdict: Verdict::Deny,
                trust_at_decision: trust,
                reason: DecisionReason::BelowThreshold,
            }
        }
    }

    pub fn is_grant(&self) -> bool {
        self.verdict == Verdict::Grant
    }
}

/// Read-only snapshot of everything a manager consults when evaluating trust.
pub struct TrustView<'a> {
    pub devices: &'a BTreeMap<DeviceId, Device>,
    pub opinions: &'a OpinionStore,
    pub recommendations: &'a RecommendationCache,
    pub communities: &'a CommunityMap,
    pub base_rate: f64,
    pub relation_filter: RelationType,
}

impl TrustView<'_> {
    /// Direct trust, community similarity and recommendation of `subject`
    /// as seen by `manager`, combined into one assessment.
    pub fn assess(
        &self,
        manager: DeviceId,
        subject: IdentityId,
        presented: &SocialProfile,
        time: f64,
    ) -> Result<TrustAssessment> {
        let direct = self.opinions.direct_trust(manager, subject, self.base_rate);
        let similarity = self.communities.joined_similarity(subject, presented);
        let recommended = recommendation(
            self.recommendations.about(manager, subject),
            self.relation_filter,
            self.base_rate,
        );
        TrustAssessment::compute(
            manager,
            subject,
            direct,
            similarity,
            recommended,
            self.relation_filter,
            time,
        )
    }
}

/// Runs the trust pipeline for a request and applies the threshold.
pub fn evaluate_access(
    req: &AccessRequest,
    view: &TrustView<'_>,
    threshold: f64,
) -> Result<(AccessDecision, TrustAssessment)> {
    let manager = view.devices.get(&req.target_manager).ok_or_else(|| {
        Error::ContractViolation(format!("unknown device {}", req.target_manager))
    })?;
    if !manager.is_manager() {
        return Err(Error::NotAManager(req.target_manager));
    }
    let assessment = view.assess(
        req.target_manager,
        req.requester_identity,
        &req.presented,
        req.time,
    )?;
    Ok((
        AccessDecision::from_trust(assessment.trust, threshold),
        assessment,
    ))
}

/// One identity, presented by one device, associated with one manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Association {
    pub identity: IdentityId,
    pub presenter: DeviceId,
    pub manager: DeviceId,
}

/// Raised when an identity already in the network is admitted again from a
/// different device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityConflict {
    pub identity: IdentityId,
    /// Every association of the identity after the admission, ordered.
    pub associations: Vec<Association>,
}

/// Network membership. Founding members are enrolled directly; everyone else
/// gets in only through `admit` after a logged grant.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    associations: BTreeSet<Association>,
    founding: BTreeSet<Association>,
    pending_grants: BTreeSet<Association>,
    grants_logged: u64,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enroll_founding(
        &mut self,
        identity: IdentityId,
        presenter: DeviceId,
        manager: DeviceId,
    ) {
        let a = Association {
            identity,
            presenter,
            manager,
        };
        self.associations.insert(a);
        self.founding.insert(a);
    }

    /// Remembers a grant so that the matching `admit` is allowed.
    pub fn record_decision(&mut self, req: &AccessRequest, decision: &AccessDecision) {
        if decision.is_grant() {
            self.grants_logged += 1;
            self.pending_grants.insert(Association {
                identity: req.requester_identity,
                presenter: req.presenter,
                manager: req.target_manager,
            });
        }
    }

    pub fn admit(
        &mut self,
        identity: IdentityId,
        presenter: DeviceId,
        manager: DeviceId,
    ) -> Result<(Association, Option<IdentityConflict>)> {
        let a = Association {
            identity,
            presenter,
            manager,
        };
        if !self.pending_grants.remove(&a) {
            return Err(Error::ContractViolation(format!(
                "identity {identity} admitted at manager {manager} without a grant"
            )));
        }
        let other_presenter = self
            .associations_of(identity)
            .any(|existing| existing.presenter != presenter);
        self.associations.insert(a);
        let conflict = other_presenter.then(|| IdentityConflict {
            identity,
            associations: self.associations_of(identity).collect(),
        });
        Ok((a, conflict))
    }

    /// Drops one association. Founding associations cannot be revoked.
    pub fn revoke(&mut self, a: &Association) -> bool {
        if self.founding.contains(a) {
            return false;
        }
        self.associations.remove(a)
    }

    pub fn associations(&self) -> impl Iterator<Item = Association> + '_ {
        self.associations.iter().copied()
    }

    pub fn associations_of(&self, identity: IdentityId) -> impl Iterator<Item = Association> + '_ {
        self.associations
            .iter()
            .filter(move |a| a.identity == identity)
            .copied()
    }

    pub fn is_member(&self, identity: IdentityId) -> bool {
        self.associations_of(identity).next().is_some()
    }

    pub fn is_associated(
        &self,
        identity: IdentityId,
        presenter: DeviceId,
        manager: DeviceId,
    ) -> bool {
        self.associations.contains(&Association {
            identity,
            presenter,
            manager,
        })
    }

    pub fn is_founding(&self, a: &Association) -> bool {
        self.founding.contains(a)
    }

    /// Distinct devices presenting `identity` inside the network.
    pub fn presenters_of(&self, identity: IdentityId) -> BTreeSet<DeviceId> {
        self.associations_of(identity)
            .map(|a| a.presenter)
            .collect()
    }

    /// Identities currently presented by more than one device.
    pub fn duplicated_identities(&self) -> Vec<IdentityId> {
        let mut by_identity: BTreeMap<IdentityId, BTreeSet<DeviceId>> = BTreeMap::new();
        for a in &self.associations {
            by_identity
                .entry(a.identity)
                .or_default()
                .insert(a.presenter);
        }
        by_identity
            .into_iter()
            .filter(|(_, p)| p.len() > 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct (identity, presenter) pairs in the network.
    pub fn presences(&self) -> BTreeSet<(IdentityId, DeviceId)> {
        self.associations
            .iter()
            .map(|a| (a.identity, a.presenter))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.associations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.associations.is_empty()
    }

    pub fn grants_logged(&self) -> u64 {
        self.grants_logged
    }
}
