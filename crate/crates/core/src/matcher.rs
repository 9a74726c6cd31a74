//! Sequence matching as a shortest path through a weighted edit graph.
//!
//! For a dictionary sequence `P` (length `m`, laid on the horizontal axis)
//! and an observed sequence `Q` (length `n`), node `V(i, j)` means "the first
//! `i` elements of `P` and the first `j` of `Q` are consumed". Horizontal and
//! vertical edges skip one element and cost 1; a diagonal edge into `V(i, j)`
//! exists when `P[i]` matches `Q[j]` and costs 0. The minimum-cost path from
//! `V(0, 0)` to `V(m, n)` therefore collects a longest common subsequence.
//!
//! An important element `k` of `P` raises the cost of every horizontal edge
//! entering column `k` to `m + n`, which is more than any path that crosses
//! the column diagonally can cost in total. The search then goes through a
//! match of element `k` whenever one exists.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::dictionary::{Cluster, GestureDictionary};
use crate::eigenspace::FeatureVector;
use crate::error::{Error, Result};

/// Decides whether element `i` of `P` matches element `j` of `Q`
/// (both 1-based).
pub trait MatchRelation {
    fn matches(&self, i: usize, j: usize) -> bool;
}

impl<F: Fn(usize, usize) -> bool> MatchRelation for F {
    fn matches(&self, i: usize, j: usize) -> bool {
        self(i, j)
    }
}

/// Element equality between two symbol sequences.
pub struct SymbolEquality<'a, T> {
    pub p: &'a [T],
    pub q: &'a [T],
}

impl<T: PartialEq> MatchRelation for SymbolEquality<'_, T> {
    fn matches(&self, i: usize, j: usize) -> bool {
        self.p[i - 1] == self.q[j - 1]
    }
}

/// Cluster `i` matches feature `j` when their Mahalanobis distance is at
/// most `tau`.
pub struct ClusterFeature<'a> {
    pub clusters: &'a [Cluster],
    pub features: &'a [FeatureVector],
    pub tau: f64,
}

impl MatchRelation for ClusterFeature<'_> {
    fn matches(&self, i: usize, j: usize) -> bool {
        self.clusters[i - 1]
            .mahalanobis(&self.features[j - 1])
            .is_ok_and(|d| d <= self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Move {
    Diagonal,
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub kind: Move,
    pub cost: u64,
}

/// The `(m + 1) × (n + 1)` lattice for one pair of sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchGraph {
    m: usize,
    n: usize,
    /// `diagonal[(i - 1) * n + (j - 1)]`: edge into `V(i, j)` exists.
    diagonal: Vec<bool>,
    /// `important[i]` for columns `0..=m`; column 0 is never important.
    important: Vec<bool>,
}

impl MatchGraph {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the diagonal edge `V(i-1, j-1) → V(i, j)` exists.
    pub fn has_diagonal(&self, i: usize, j: usize) -> bool {
        (1..=self.m).contains(&i) && (1..=self.n).contains(&j) && self.diagonal[(i - 1) * self.n + (j - 1)]
    }

    pub fn is_important(&self, i: usize) -> bool {
        self.important.get(i).copied().unwrap_or(false)
    }

    pub fn important(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.m).filter(|&i| self.important[i])
    }

    /// Cost of any horizontal edge entering column `i`.
    pub fn horizontal_cost(&self, i: usize) -> u64 {
        if self.important[i] {
            (self.m + self.n) as u64
        } else {
            1
        }
    }

    /// Cost of the edge `from → to`, or `None` when there is no such edge.
    pub fn cost(&self, from: (usize, usize), to: (usize, usize)) -> Option<u64> {
        let (i, j) = from;
        if to.0 > self.m || to.1 > self.n {
            return None;
        }
        match (to.0.checked_sub(i)?, to.1.checked_sub(j)?) {
            (1, 1) if self.has_diagonal(to.0, to.1) => Some(0),
            (1, 0) => Some(self.horizontal_cost(to.0)),
            (0, 1) => Some(1),
            _ => None,
        }
    }

    /// Every edge of the lattice.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for i in 0..=self.m {
            for j in 0..=self.n {
                if i < self.m && j < self.n && self.has_diagonal(i + 1, j + 1) {
                    out.push(Edge {
                        from: (i, j),
                        to: (i + 1, j + 1),
                        kind: Move::Diagonal,
                        cost: 0,
                    });
                }
                if i < self.m {
                    out.push(Edge {
                        from: (i, j),
                        to: (i + 1, j),
                        kind: Move::Horizontal,
                        cost: self.horizontal_cost(i + 1),
                    });
                }
                if j < self.n {
                    out.push(Edge {
                        from: (i, j),
                        to: (i, j + 1),
                        kind: Move::Vertical,
                        cost: 1,
                    });
                }
            }
        }
        out
    }

    #[inline]
    fn node(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }
}

/// Builds the match graph for sequences of length `m` (horizontal) and `n`.
/// `important` holds 1-based positions in the horizontal sequence.
pub fn build_graph(m: usize, n: usize, rel: &impl MatchRelation, important: &BTreeSet<usize>) -> Result<MatchGraph> {
    if m < 1 || n < 1 {
        return Err(Error::invalid(format!(
            "sequence lengths must be >= 1, got {m} and {n}"
        )));
    }
    if let Some(&k) = important.iter().find(|&&k| k < 1 || k > m) {
        return Err(Error::invalid(format!("important index {k} outside [1, {m}]")));
    }
    let mut diagonal = Vec::with_capacity(m * n);
    for i in 1..=m {
        for j in 1..=n {
            diagonal.push(rel.matches(i, j));
        }
    }
    let mut flags = vec![false; m + 1];
    for &k in important {
        flags[k] = true;
    }
    Ok(MatchGraph {
        m,
        n,
        diagonal,
        important: flags,
    })
}

/// Outcome of matching one pair of sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub similarity: f64,
    pub lcs_length: usize,
    /// 1-based `(i, j)` positions joined by diagonal steps, in path order.
    #[serde(rename = "pairs")]
    pub matched_pairs: Vec<(usize, usize)>,
    #[serde(rename = "cost")]
    pub total_cost: u64,
    /// Every important column was crossed by a diagonal step.
    #[serde(rename = "important_ok")]
    pub importance_satisfied: bool,
}

/// `lcs_length / max(p_len, q_len)`.
pub fn similarity(p_len: usize, q_len: usize, lcs_length: usize) -> f64 {
    lcs_length as f64 / p_len.max(q_len) as f64
}

/// Dijkstra from `V(m, n)` over reversed edges, giving every node's
/// remaining cost to the sink.
fn cost_to_sink(g: &MatchGraph) -> Vec<u64> {
    let mut dist = vec![u64::MAX; (g.m + 1) * (g.n + 1)];
    let mut heap = BinaryHeap::new();
    dist[g.node(g.m, g.n)] = 0;
    heap.push(Reverse((0u64, g.m, g.n)));
    while let Some(Reverse((d, i, j))) = heap.pop() {
        if d > dist[g.node(i, j)] {
            continue;
        }
        let mut relax = |pi: usize, pj: usize, w: u64| {
            let nd = d + w;
            let slot = &mut dist[g.node(pi, pj)];
            if nd < *slot {
                *slot = nd;
                heap.push(Reverse((nd, pi, pj)));
            }
        };
        if i > 0 && j > 0 && g.has_diagonal(i, j) {
            relax(i - 1, j - 1, 0);
        }
        if i > 0 {
            relax(i - 1, j, g.horizontal_cost(i));
        }
        if j > 0 {
            relax(i, j - 1, 1);
        }
    }
    dist
}

/// Minimum-cost path from `V(0, 0)` to `V(m, n)`.
///
/// Among equal-cost paths the one whose move sequence is lexicographically
/// smallest under diagonal < horizontal < vertical is returned. The LCS
/// length is the number of diagonal steps on that path.
pub fn min_cost_path(g: &MatchGraph) -> MatchResult {
    let dist = cost_to_sink(g);
    let (mut i, mut j) = (0, 0);
    let mut pairs = Vec::new();
    while (i, j) != (g.m, g.n) {
        let here = dist[g.node(i, j)];
        if i < g.m && j < g.n && g.has_diagonal(i + 1, j + 1) && dist[g.node(i + 1, j + 1)] == here {
            i += 1;
            j += 1;
            pairs.push((i, j));
        } else if i < g.m && dist[g.node(i + 1, j)].checked_add(g.horizontal_cost(i + 1)) == Some(here) {
            i += 1;
        } else {
            debug_assert!(j < g.n && dist[g.node(i, j + 1)] + 1 == here);
            j += 1;
        }
    }
    let importance_satisfied = g.important().all(|k| pairs.iter().any(|&(pi, _)| pi == k));
    MatchResult {
        similarity: similarity(g.m, g.n, pairs.len()),
        lcs_length: pairs.len(),
        matched_pairs: pairs,
        total_cost: dist[g.node(0, 0)],
        importance_satisfied,
    }
}

/// Matches one cluster sequence against a feature sequence.
pub fn match_clusters(
    clusters: &[Cluster],
    important: &BTreeSet<usize>,
    features: &[FeatureVector],
    tau: f64,
) -> Result<MatchResult> {
    let rel = ClusterFeature {
        clusters,
        features,
        tau,
    };
    Ok(min_cost_path(&build_graph(
        clusters.len(),
        features.len(),
        &rel,
        important,
    )?))
}

/// One dictionary entry's result in a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub name: String,
    #[serde(flatten)]
    pub result: MatchResult,
}

/// Scores every dictionary entry against `query` and ranks them by
/// similarity, highest first; equal similarities are ordered by name.
pub fn recognize(dict: &GestureDictionary, query: &[FeatureVector]) -> Result<Vec<RankedMatch>> {
    if dict.entries().is_empty() {
        return Err(Error::invalid("dictionary has no entries"));
    }
    if query.is_empty() {
        return Err(Error::invalid("query has no feature vectors"));
    }
    if let Some(u) = query.iter().find(|u| u.dim() != dict.k()) {
        return Err(Error::invalid(format!(
            "query feature has dimension {}, dictionary k = {}",
            u.dim(),
            dict.k()
        )));
    }
    let mut ranked = dict
        .entries()
        .iter()
        .map(|e| {
            Ok(RankedMatch {
                name: e.name.clone(),
                result: match_clusters(&e.clusters, &e.important, query, dict.tau())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.result
            .similarity
            .total_cmp(&a.result.similarity)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ranked)
}
