//! Dual-perception community detection.
//!
//! Three stages: seeded k-means over entity representations for the initial
//! partition, center selection by the dual-perception score (relation-multiset
//! Jaccard plus weighted embedding cosine against the community centroid), and
//! iterative pairwise fusion of communities whose center-approximated
//! divergence falls below a threshold.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, entity_representation};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::provider::Embedder;

fn default_lambda() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_beta() -> usize {
    10
}
fn default_eta() -> usize {
    200
}
fn default_seed() -> u64 {
    42
}
fn default_n_init() -> usize {
    5
}
fn default_max_merge_passes() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_keywords() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Weight of the semantic term in the dual score.
    pub lambda: f64,
    /// Merge threshold; pairs merge when divergence is strictly below it.
    pub epsilon: f64,
    /// Granularity divisor in the cluster-count formula.
    pub beta: usize,
    /// Cap on the cluster count.
    pub eta: usize,
    pub seed: u64,
    /// k-means restarts; the lowest-inertia run wins.
    pub n_init: usize,
    pub max_merge_passes: usize,
    /// Whether attribute edges count toward the incident-relation multiset.
    pub include_attribute_edges: bool,
    /// Optional linear transform applied to representations before the
    /// semantic comparison; `None` is the identity.
    pub transform: Option<Vec<Vec<f64>>>,
    /// Keywords selected per community during tree construction.
    pub keywords_per_community: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            lambda: default_lambda(),
            epsilon: default_epsilon(),
            beta: default_beta(),
            eta: default_eta(),
            seed: default_seed(),
            n_init: default_n_init(),
            max_merge_passes: default_max_merge_passes(),
            include_attribute_edges: default_true(),
            transform: None,
            keywords_per_community: default_keywords(),
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be >= 0".into()));
        }
        if self.beta < 1 {
            return Err(Error::Config("beta must be >= 1".into()));
        }
        if self.eta < 2 {
            return Err(Error::Config("eta must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub index: usize,
    pub members: Vec<String>,
    pub center: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignments: BTreeMap<String, usize>,
    pub iteration: usize,
}

impl Partition {
    /// Member lists per community index, each sorted by id.
    pub fn communities(&self) -> Vec<Vec<String>> {
        let count = self.assignments.values().max().map(|m| m + 1).unwrap_or(0);
        let mut out = vec![Vec::new(); count];
        for (id, &c) in &self.assignments {
            out[c].push(id.clone());
        }
        for members in &mut out {
            members.sort_by(|a, b| id_cmp(a, b));
        }
        out
    }

    pub fn community_count(&self) -> usize {
        self.assignments.values().collect::<BTreeSet<_>>().len()
    }
}

/// Ascending id order: numeric when both ids parse, lexicographic otherwise.
pub fn id_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// `k = min(max(2, floor(n / beta)), eta)`
pub fn cluster_count(n_entities: usize, beta: usize, eta: usize) -> usize {
    (n_entities / beta).max(2).min(eta)
}

/// Canonical multiset Jaccard: sum of per-label minimum counts over sum of
/// maximum counts. Two empty multisets compare as 0.
pub fn multiset_jaccard(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let mut min_sum = 0usize;
    let mut max_sum = 0usize;
    let labels: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    for label in labels {
        let ca = a.get(label).copied().unwrap_or(0);
        let cb = b.get(label).copied().unwrap_or(0);
        min_sum += ca.min(cb);
        max_sum += ca.max(cb);
    }
    if max_sum == 0 {
        0.0
    } else {
        min_sum as f64 / max_sum as f64
    }
}

fn community_multiset(
    graph: &Graph,
    members: &[String],
    exclude: Option<&str>,
    include_attribute_edges: bool,
) -> Result<BTreeMap<String, usize>> {
    let mut total: BTreeMap<String, usize> = BTreeMap::new();
    for member in members {
        if Some(member.as_str()) == exclude {
            continue;
        }
        for (label, count) in graph.incident_relations_with(member, include_attribute_edges)? {
            *total.entry(label).or_insert(0) += count;
        }
    }
    Ok(total)
}

/// Topological connectivity overlap between an entity's incident-relation
/// multiset and the community's. The entity's own contribution is excluded
/// when it belongs to the community.
pub fn relation_overlap(
    entity: &str,
    members: &[String],
    graph: &Graph,
    include_attribute_edges: bool,
) -> Result<f64> {
    let psi_e = graph.incident_relations_with(entity, include_attribute_edges)?;
    let exclude = members.iter().any(|m| m == entity).then_some(entity);
    let psi_c = community_multiset(graph, members, exclude, include_attribute_edges)?;
    Ok(multiset_jaccard(&psi_e, &psi_c))
}

fn apply_transform(transform: Option<&Vec<Vec<f64>>>, v: &[f64]) -> Vec<f64> {
    match transform {
        None => v.to_vec(),
        Some(rows) => rows
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect(),
    }
}

/// Cosine between the transformed entity representation and the sum of the
/// transformed member representations. The entity is excluded from the sum
/// when it is a member; a singleton community containing only the entity
/// scores 1.0.
pub fn semantic_similarity(
    entity: &str,
    members: &[String],
    representations: &BTreeMap<String, Vec<f64>>,
    transform: Option<&Vec<Vec<f64>>>,
) -> Result<f64> {
    let entity_vec = representations
        .get(entity)
        .ok_or_else(|| Error::EntityNotFound(entity.to_string()))?;
    let is_member = members.iter().any(|m| m == entity);
    let others: Vec<&String> = members
        .iter()
        .filter(|m| !(is_member && m.as_str() == entity))
        .collect();
    if others.is_empty() {
        return Ok(1.0);
    }
    let transformed_entity = apply_transform(transform, entity_vec);
    let mut sum = vec![0.0; transformed_entity.len()];
    for member in others {
        let member_vec = representations
            .get(member)
            .ok_or_else(|| Error::EntityNotFound(member.clone()))?;
        for (acc, x) in sum.iter_mut().zip(apply_transform(transform, member_vec)) {
            *acc += x;
        }
    }
    cosine(&transformed_entity, &sum)
}

/// Dual-perception affinity: `S_r + lambda * S_s`.
pub fn dual_score(
    entity: &str,
    members: &[String],
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Result<f64> {
    let s_r = relation_overlap(entity, members, graph, params.include_attribute_edges)?;
    if params.lambda == 0.0 {
        return Ok(s_r);
    }
    let s_s = semantic_similarity(entity, members, representations, params.transform.as_ref())?;
    Ok(s_r + params.lambda * s_s)
}

/// The member maximizing the dual score; ties go to the lowest id.
pub fn community_center(
    members: &[String],
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Result<String> {
    let mut best: Option<(f64, &String)> = None;
    let mut sorted: Vec<&String> = members.iter().collect();
    sorted.sort_by(|a, b| id_cmp(a, b));
    for member in sorted {
        let score = dual_score(member, members, graph, representations, params)?;
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, member));
        }
    }
    best.map(|(_, id)| id.clone())
        .ok_or_else(|| Error::Config("community has no members".into()))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_once(
    data: &[Vec<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iter: usize,
) -> (Vec<usize>, f64) {
    let n = data.len();
    let dim = data[0].len();

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(data[rng.gen_range(0..n)].clone());
    let mut dists: Vec<f64> = data
        .iter()
        .map(|v| squared_distance(v, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, d) in dists.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centroids.push(data[next].clone());
        for (i, v) in data.iter().enumerate() {
            let d = squared_distance(v, centroids.last().expect("just pushed"));
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, v) in data.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = squared_distance(v, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, v) in data.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (acc, x) in sums[assignments[i]].iter_mut().zip(v) {
                *acc += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for x in &mut sums[c] {
                    *x /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
            // empty clusters keep their centroid and get compacted away later
        }
    }
    let inertia: f64 = data
        .iter()
        .enumerate()
        .map(|(i, v)| squared_distance(v, &centroids[assignments[i]]))
        .sum();
    (assignments, inertia)
}

fn kmeans(data: &[Vec<f64>], k: usize, n_init: usize, seed: u64) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let (assignments, inertia) = kmeans_once(data, k, &mut rng, 100);
        if best.as_ref().map_or(true, |(_, b)| inertia < *b) {
            best = Some((assignments, inertia));
        }
    }
    best.expect("at least one restart").0
}

fn compact_labels(raw: &[usize]) -> Vec<usize> {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for &label in raw {
        let next = remap.len();
        remap.entry(label).or_insert(next);
    }
    raw.iter().map(|l| remap[l]).collect()
}

/// Seeded k-means initial partition. Fewer than 2 entities degenerate to a
/// single community; empty clusters are dropped and indexes compacted.
pub fn init_clusters(
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Partition {
    let mut ids: Vec<&String> = representations.keys().collect();
    ids.sort_by(|a, b| id_cmp(a, b));
    if ids.len() < 2 {
        return Partition {
            assignments: ids.into_iter().map(|id| (id.clone(), 0)).collect(),
            iteration: 0,
        };
    }
    let data: Vec<Vec<f64>> = ids.iter().map(|id| representations[*id].clone()).collect();
    let k = cluster_count(ids.len(), params.beta, params.eta).min(ids.len());
    let raw = kmeans(&data, k, params.n_init, params.seed);
    let labels = compact_labels(&raw);
    Partition {
        assignments: ids
            .into_iter()
            .zip(labels)
            .map(|(id, l)| (id.clone(), l))
            .collect(),
        iteration: 0,
    }
}

/// Affinity of an entity to a community with the entity treated as an
/// outsider in both cases: no self-exclusion from the community multiset or
/// centroid. Used for merge decisions, where both communities must be
/// measured the same way so that structurally identical communities diverge
/// by exactly zero.
fn outsider_score(
    entity: &str,
    members: &[String],
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Result<f64> {
    let psi_e = graph.incident_relations_with(entity, params.include_attribute_edges)?;
    let psi_c = community_multiset(graph, members, None, params.include_attribute_edges)?;
    let s_r = multiset_jaccard(&psi_e, &psi_c);
    if params.lambda == 0.0 {
        return Ok(s_r);
    }
    let entity_vec = representations
        .get(entity)
        .ok_or_else(|| Error::EntityNotFound(entity.to_string()))?;
    let transformed_entity = apply_transform(params.transform.as_ref(), entity_vec);
    let mut sum = vec![0.0; transformed_entity.len()];
    for member in members {
        let member_vec = representations
            .get(member)
            .ok_or_else(|| Error::EntityNotFound(member.clone()))?;
        for (acc, x) in sum
            .iter_mut()
            .zip(apply_transform(params.transform.as_ref(), member_vec))
        {
            *acc += x;
        }
    }
    let s_s = cosine(&transformed_entity, &sum)?;
    Ok(s_r + params.lambda * s_s)
}

/// Center-approximated divergence between two communities: the larger of the
/// two centers' home-vs-foreign outsider-score gaps.
pub fn pair_divergence(
    members_a: &[String],
    members_b: &[String],
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Result<f64> {
    let center_a = community_center(members_a, graph, representations, params)?;
    let center_b = community_center(members_b, graph, representations, params)?;
    let home_a = outsider_score(&center_a, members_a, graph, representations, params)?;
    let cross_a = outsider_score(&center_a, members_b, graph, representations, params)?;
    let home_b = outsider_score(&center_b, members_b, graph, representations, params)?;
    let cross_b = outsider_score(&center_b, members_a, graph, representations, params)?;
    Ok((home_a - cross_a).abs().max((home_b - cross_b).abs()))
}

/// One fusion pass: candidate pairs with divergence strictly below epsilon
/// merge greedily in ascending-divergence order, each community merging at
/// most once per pass.
pub fn merge_pass(
    partition: &Partition,
    graph: &Graph,
    representations: &BTreeMap<String, Vec<f64>>,
    params: &DetectionParams,
) -> Result<(Partition, Vec<(usize, usize)>)> {
    let communities = partition.communities();
    let m = communities.len();
    if m < 2 {
        return Ok((partition.clone(), Vec::new()));
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let div = pair_divergence(
                &communities[a],
                &communities[b],
                graph,
                representations,
                params,
            )?;
            if div < params.epsilon {
                candidates.push((div, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    let mut used = vec![false; m];
    let mut target = (0..m).collect::<Vec<usize>>();
    let mut merged_pairs = Vec::new();
    for (_, a, b) in candidates {
        if used[a] || used[b] {
            continue;
        }
        used[a] = true;
        used[b] = true;
        target[b] = a;
        merged_pairs.push((a, b));
    }
    if merged_pairs.is_empty() {
        return Ok((partition.clone(), Vec::new()));
    }
    let raw: Vec<usize> = (0..m).map(|c| target[c]).collect();
    let compacted = compact_labels(&raw);
    let assignments = partition
        .assignments
        .iter()
        .map(|(id, &c)| (id.clone(), compacted[c]))
        .collect();
    Ok((
        Partition {
            assignments,
            iteration: partition.iteration + 1,
        },
        merged_pairs,
    ))
}

/// Full detection pipeline: entity representations, k-means initialization,
/// fusion passes to a fixed point, then center selection per community.
/// Community nodes and `member_of` edges already in the graph are ignored.
pub fn detect_communities(
    graph: &Graph,
    embedder: &dyn Embedder,
    params: &DetectionParams,
) -> Result<Vec<Community>> {
    params.validate()?;
    let representations = entity_representations(graph, embedder)?;
    if representations.is_empty() {
        return Err(Error::Config("graph has no non-community entities".into()));
    }
    let mut partition = init_clusters(&representations, params);
    for _ in 0..params.max_merge_passes {
        let (next, merged) = merge_pass(&partition, graph, &representations, params)?;
        partition = next;
        if merged.is_empty() {
            break;
        }
    }
    let mut out = Vec::new();
    for (index, members) in partition.communities().into_iter().enumerate() {
        let center = community_center(&members, graph, &representations, params)?;
        out.push(Community {
            index,
            members,
            center,
            name: String::new(),
            description: String::new(),
            keywords: Vec::new(),
        });
    }
    Ok(out)
}

/// Representations for every non-community entity in the graph.
pub fn entity_representations(
    graph: &Graph,
    embedder: &dyn Embedder,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for entity in graph.entities() {
        if entity.is_community_node {
            continue;
        }
        let rep = entity_representation(&entity.id, graph, embedder)?;
        out.insert(entity.id.clone(), rep.vector);
    }
    Ok(out)
}
