//! Canonical labels for small rooted graphs, used to tabulate neighborhood
//! laws up to isomorphism.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Largest product of colour-class factorials searched exhaustively.
const PERMUTATION_BUDGET: u64 = 5040;

/// Undirected simple graph with vertex 0 as the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedGraph {
    adj: Vec<Vec<usize>>,
}

impl RootedGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n.max(1)];
        for &(a, b) in edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for nb in &mut adj {
            nb.sort_unstable();
        }
        Self { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}

/// Stable colouring by iterated neighbourhood refinement, root distinguished.
fn refine(g: &RootedGraph) -> Vec<usize> {
    let n = g.len();
    let mut colour: Vec<usize> = (0..n).map(|v| usize::from(v != 0)).collect();
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut nb: Vec<usize> = g.adj[v].iter().map(|&u| colour[u]).collect();
                nb.sort_unstable();
                (colour[v], nb)
            })
            .collect();
        let mut ranks: BTreeMap<&(usize, Vec<usize>), usize> = BTreeMap::new();
        for s in &sigs {
            ranks.insert(s, 0);
        }
        for (i, r) in ranks.values_mut().enumerate() {
            *r = i;
        }
        let next: Vec<usize> = sigs.iter().map(|s| ranks[s]).collect();
        let classes = |c: &[usize]| c.iter().collect::<std::collections::BTreeSet<_>>().len();
        if classes(&next) == classes(&colour) {
            return next;
        }
        colour = next;
    }
}

fn adjacency_code(g: &RootedGraph, order: &[usize]) -> Vec<u8> {
    let n = order.len();
    let mut bits = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            bits.push(u8::from(g.has_edge(order[i], order[j])));
        }
    }
    bits
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).try_fold(1u64, |a, b| a.checked_mul(b)).unwrap_or(u64::MAX)
}

/// Visits every ordering that permutes vertices within their colour classes.
fn for_each_ordering(classes: &[Vec<usize>], f: &mut impl FnMut(&[usize])) {
    fn rec(classes: &[Vec<usize>], idx: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx == classes.len() {
            f(cur);
            return;
        }
        let mut cls = classes[idx].clone();
        permute(&mut cls, 0, &mut |perm| {
            let base = cur.len();
            cur.extend_from_slice(perm);
            rec(classes, idx + 1, cur, f);
            cur.truncate(base);
        });
    }
    fn permute(xs: &mut [usize], i: usize, f: &mut impl FnMut(&[usize])) {
        if i == xs.len() {
            f(xs);
            return;
        }
        for j in i..xs.len() {
            xs.swap(i, j);
            permute(xs, i + 1, f);
            xs.swap(i, j);
        }
    }
    rec(classes, 0, &mut Vec::new(), f);
}

/// Isomorphism-invariant label. Exact when the refined colour classes leave
/// at most 5040 orderings to search; otherwise the refinement certificate is
/// used, which can merge rare non-isomorphic graphs.
pub fn canonical_form(g: &RootedGraph) -> String {
    let colour = refine(g);
    let n = g.len();
    let mut by_colour: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        by_colour.entry(colour[v]).or_default().push(v);
    }
    let classes: Vec<Vec<usize>> = by_colour.into_values().collect();
    let budget = classes
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(factorial(c.len())).filter(|&x| x <= PERMUTATION_BUDGET));
    let sizes: Vec<String> = classes.iter().map(|c| c.len().to_string()).collect();
    match budget {
        Some(_) => {
            let mut best: Option<Vec<u8>> = None;
            for_each_ordering(&classes, &mut |order| {
                let code = adjacency_code(g, order);
                if best.as_ref().is_none_or(|b| code < *b) {
                    best = Some(code);
                }
            });
            let bits: String = best
                .unwrap_or_default()
                .iter()
                .map(|&b| char::from(b'0' + b))
                .collect();
            format!("n{n}e{}c{}:{bits}", g.edge_count(), sizes.join("."))
        }
        None => {
            let mut sigs: Vec<(usize, Vec<usize>)> = (0..n)
                .map(|v| {
                    let mut nb: Vec<usize> = g.adj[v].iter().map(|&u| colour[u]).collect();
                    nb.sort_unstable();
                    (colour[v], nb)
                })
                .collect();
            sigs.sort();
            format!("n{n}e{}c{}:wl{sigs:?}", g.edge_count(), sizes.join("."))
        }
    }
}
