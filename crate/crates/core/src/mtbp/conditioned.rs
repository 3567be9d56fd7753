//! Neighbourhood laws of the root cluster conditioned to be large, by
//! rejection sampling.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::canonical::{canonical_form, RootedGraph};
use crate::error::{Error, Result};
use crate::oracle::{EdgeKind, EdgeOracle, Fingerprint};
use crate::percolation::{cluster_exceeds, long_child, PercParams, DEFAULT_CLUSTER_CAP};
use crate::tree::TreeParams;

/// Smallest acceptance rate tolerated before reporting a budget error.
pub const MIN_ACCEPTANCE: f64 = 1e-5;

/// Ball of radius `m` around the root in the cluster, as an undirected graph
/// (induced on the ball). Vertex 0 is the root.
pub fn local_neighborhood(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    m: usize,
) -> RootedGraph {
    let k = params.k() as usize;
    let d = params.d() as u64;
    let max_h = m * k;
    // Any path of length ≤ m from o stays at heights ≤ m·k, and cluster
    // membership there is decided by downward paths.
    let mut index: FxHashMap<Fingerprint, usize> = FxHashMap::default();
    let mut heights = vec![0usize];
    let mut edges = Vec::new();
    index.insert(Fingerprint::ROOT, 0);
    let mut queue = VecDeque::from([(Fingerprint::ROOT, 0usize)]);
    while let Some((v, h)) = queue.pop_front() {
        let vi = index[&v];
        let mut kids = Vec::new();
        if h < max_h {
            kids.extend(
                oracle
                    .open_selectors(v, EdgeKind::Short, d, perc.p())
                    .map(|s| (v.child(s as u32 + 1), h + 1)),
            );
        }
        if h + k <= max_h {
            kids.extend(
                oracle
                    .open_selectors(v, EdgeKind::Long, params.long_fanout(), perc.q())
                    .map(|s| (long_child(v, s, params), h + k)),
            );
        }
        for (c, hc) in kids {
            let next = index.len();
            let ci = *index.entry(c).or_insert_with(|| {
                queue.push_back((c, hc));
                heights.push(hc);
                next
            });
            edges.push((vi, ci));
        }
    }
    let n = index.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![usize::MAX; n];
    dist[0] = 0;
    let mut q = VecDeque::from([0usize]);
    while let Some(v) = q.pop_front() {
        if dist[v] == m {
            continue;
        }
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
        }
    }
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        if dist[v] <= m {
            relabel[v] = next;
            next += 1;
        }
    }
    let ball_edges: Vec<(usize, usize)> = edges
        .iter()
        .filter(|(a, b)| relabel[*a] != usize::MAX && relabel[*b] != usize::MAX)
        .map(|&(a, b)| (relabel[a], relabel[b]))
        .collect();
    RootedGraph::new(next, &ball_edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSample {
    pub threshold: u64,
    pub radius: usize,
    pub attempted: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Canonical neighbourhood label → count among accepted samples.
    pub counts: BTreeMap<String, u64>,
}

impl ConditionedSample {
    pub fn pmf(&self) -> BTreeMap<String, f64> {
        crate::stats::empirical_pmf(&self.counts)
    }
}

/// Samples `trials` clusters, keeps those with more than `n` vertices and
/// tabulates the isomorphism class of their radius-`m` ball.
pub fn conditioned_cluster_sample(
    params: TreeParams,
    perc: PercParams,
    n: u64,
    m: usize,
    trials: u64,
    seed: u64,
) -> Result<ConditionedSample> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if m == 0 || m > 2 {
        return Err(Error::InvalidParameter(format!("radius must be 1 or 2, got {m}")));
    }
    let labels: Vec<Option<String>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let oracle = EdgeOracle::for_trial(seed, t);
            if !cluster_exceeds(params, perc, &oracle, n, DEFAULT_CLUSTER_CAP)? {
                return Ok(None);
            }
            Ok(Some(canonical_form(&local_neighborhood(params, perc, &oracle, m))))
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for l in labels.into_iter().flatten() {
        *counts.entry(l).or_insert(0) += 1;
    }
    let accepted: u64 = counts.values().sum();
    let rate = accepted as f64 / trials as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Infeasible(format!(
            "acceptance rate {rate:e} below {MIN_ACCEPTANCE:e}; raise the trial budget or lower the threshold"
        )));
    }
    Ok(ConditionedSample {
        threshold: n,
        radius: m,
        attempted: trials,
        accepted,
        acceptance_rate: rate,
        counts,
    })
}
