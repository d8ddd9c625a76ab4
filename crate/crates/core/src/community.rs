//! Social similarity between devices and community formation over the
//! similarity graph.
//!
//! Two devices are linked when their weighted friendship/interest similarity
//! is strictly above the similarity threshold; a community is a connected
//! component of that graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::social::{ContextKind, IdentityId, SocialProfile};

/// Jaccard coefficient of two sets. Two empty sets have similarity 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn friendship_similarity<T: Ord>(fi: &BTreeSet<T>, fj: &BTreeSet<T>) -> f64 {
    jaccard(fi, fj)
}

pub fn interest_similarity<T: Ord>(ii: &BTreeSet<T>, ij: &BTreeSet<T>) -> f64 {
    jaccard(ii, ij)
}

/// Weights of the friendship and interest components; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityWeights {
    friends: f64,
    interests: f64,
}

impl SimilarityWeights {
    /// Builds weights from the friendship share; the interest share is the rest.
    pub fn new(friends: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&friends) {
            return Err(Error::Config(format!(
                "friendship weight must lie in [0, 1], got {friends}"
            )));
        }
        Ok(SimilarityWeights {
            friends,
            interests: 1.0 - friends,
        })
    }

    pub fn friends(&self) -> f64 {
        self.friends
    }

    pub fn interests(&self) -> f64 {
        self.interests
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights {
            friends: 0.5,
            interests: 0.5,
        }
    }
}

pub fn pairwise_similarity(i: &SocialProfile, j: &SocialProfile, w: SimilarityWeights) -> f64 {
    friendship_similarity(&i.friends, &j.friends) * w.friends
        + interest_similarity(&i.interests, &j.interests) * w.interests
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community<K> {
    pub id: usize,
    /// Sorted ascending.
    pub members: Vec<K>,
    pub context: ContextKind,
    pub similarity_threshold: f64,
}

impl<K: Ord> Community<K> {
    pub fn contains(&self, k: &K) -> bool {
        self.members.binary_search(k).is_ok()
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so roots are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups `0..n` into the connected components of the graph that links `a`
/// and `b` whenever `similarity(a, b) > threshold`. Each component is sorted
/// and components are ordered by their smallest index.
pub fn threshold_components(
    n: usize,
    threshold: f64,
    mut similarity: impl FnMut(usize, usize) -> f64,
) -> Vec<Vec<usize>> {
    let mut sets = DisjointSets::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            if similarity(a, b) > threshold {
                sets.union(a, b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..n {
        let root = sets.find(idx);
        groups.entry(root).or_default().push(idx);
    }
    // roots are component minima, so BTreeMap order is already by smallest index
    groups.into_values().collect()
}

/// Partitions `members` into communities: connected components of the graph
/// with an edge wherever similarity is strictly above `threshold`.
///
/// Communities are ordered by their smallest member key and numbered from 0.
/// Duplicate keys are collapsed to their first occurrence.
pub fn form_communities<K: Ord + Clone>(
    members: &[(K, &SocialProfile)],
    w: SimilarityWeights,
    threshold: f64,
    context: &ContextKind,
) -> Result<Vec<Community<K>>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "similarity threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let mut seen = BTreeSet::new();
    let mut unique: Vec<&(K, &SocialProfile)> = members
        .iter()
        .filter(|(k, _)| seen.insert(k.clone()))
        .collect();
    unique.sort_by(|a, b| a.0.cmp(&b.0));

    let components = threshold_components(unique.len(), threshold, |a, b| {
        pairwise_similarity(unique[a].1, unique[b].1, w)
    });
    Ok(components
        .into_iter()
        .enumerate()
        .map(|(id, idxs)| Community {
            id,
            members: idxs.into_iter().map(|i| unique[i].0.clone()).collect(),
            context: context.clone(),
            similarity_threshold: threshold,
        })
        .collect())
}

/// Mean similarity of `candidate` to every community member other than
/// itself. Returns 0 when the candidate is the only member.
pub fn community_similarity<'a, K: Ord>(
    candidate: (&K, &SocialProfile),
    community: &Community<K>,
    profile_of: impl Fn(&K) -> Option<&'a SocialProfile>,
    w: SimilarityWeights,
) -> Result<f64> {
    if community.members.is_empty() {
        return Err(Error::EmptyCommunity);
    }
    let (key, profile) = candidate;
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in community.members.iter().filter(|k| *k != key) {
        if let Some(other) = profile_of(k) {
            sum += pairwise_similarity(profile, other, w);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Communities formed over the identities currently admitted to the network,
/// with the profiles they presented.
#[derive(Debug, Clone)]
pub struct CommunityMap {
    communities: Vec<Community<IdentityId>>,
    profiles: BTreeMap<IdentityId, SocialProfile>,
    weights: SimilarityWeights,
    threshold: f64,
}

impl CommunityMap {
    pub fn build(
        profiles: BTreeMap<IdentityId, SocialProfile>,
        weights: SimilarityWeights,
        threshold: f64,
        context: &ContextKind,
    ) -> Result<Self> {
        let members: Vec<(IdentityId, &SocialProfile)> =
            profiles.iter().map(|(k, p)| (*k, p)).collect();
        let communities = form_communities(&members, weights, threshold, context)?;
        Ok(CommunityMap {
            communities,
            profiles,
            weights,
            threshold,
        })
    }

    pub fn communities(&self) -> &[Community<IdentityId>] {
        &self.communities
    }

    pub fn community_of(&self, identity: IdentityId) -> Option<&Community<IdentityId>> {
        self.communities.iter().find(|c| c.contains(&identity))
    }

    pub fn profile(&self, identity: IdentityId) -> Option<&SocialProfile> {
        self.profiles.get(&identity)
    }

    /// Similarity of a presented profile to the community it falls into.
    ///
    /// Adding the candidate to the similarity graph merges every community
    /// holding a member it is linked to; the result is the mean similarity to
    /// the members of that merged community. A candidate linked to nobody
    /// would form a singleton and scores 0.
    pub fn joined_similarity(&self, identity: IdentityId, profile: &SocialProfile) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for c in &self.communities {
            let sims: Vec<f64> = c
                .members
                .iter()
                .filter(|k| **k != identity)
                .filter_map(|k| self.profiles.get(k))
                .map(|p| pairwise_similarity(profile, p, self.weights))
                .collect();
            if sims.iter().any(|s| *s > self.threshold) {
                sum += sims.iter().sum::<f64>();
                count += sims.len();
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}
