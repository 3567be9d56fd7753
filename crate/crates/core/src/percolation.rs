//! Monte Carlo percolation on `T_{d,k}`.
//!
//! Two exploration styles share the same [`EdgeOracle`]:
//!
//! - layer-by-layer growth of the root cluster, giving the counts `X_n` of
//!   cluster vertices at height `n`;
//! - the short-cluster / long-boundary recursion over admissible sets, whose
//!   type counts form a multi-type branching process on windows containing the
//!   root slot.
//!
//! The exact closed forms for `M̄(A)` and for the mean short cluster of a
//! two-point type live here as well, since they are checked against the same
//! explorations.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtbp::Population;
use crate::oracle::{EdgeKind, EdgeOracle, Fingerprint};
use crate::stats::{proportion, Estimate, IntMoments};
use crate::tree::{long_selector_digits, slot_index, slot_vertex, TreeParams, VertexPath, Window};

/// Default cap on explored cluster size.
pub const DEFAULT_CLUSTER_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercParams {
    p: f64,
    q: f64,
}

impl PercParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, x) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0,1], got {x}")));
            }
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Fingerprint of `tail·u` for the long selector of rank `sel`.
#[inline]
pub(crate) fn long_child(tail: Fingerprint, sel: u64, params: TreeParams) -> Fingerprint {
    let d = params.d() as u64;
    let k = params.k();
    let mut fp = tail;
    let mut div = d.pow(k - 1);
    for _ in 0..k {
        fp = fp.child(((sel / div) % d + 1) as u32);
        div = (div / d).max(1);
    }
    fp
}

/// Per-height counts of the root cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub x: Vec<u64>,
    pub truncated_alive: bool,
}

pub fn explore_layers(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    n_max: usize,
) -> Result<LayerStats> {
    explore_layers_capped(params, perc, oracle, n_max, DEFAULT_CLUSTER_CAP)
}

/// Layered exploration: a vertex at height `n` is in the cluster iff its
/// parent is and the short edge is open, or its `k`-ancestor is and the long
/// edge is open.
pub fn explore_layers_capped(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    n_max: usize,
    cap: u64,
) -> Result<LayerStats> {
    let k = params.k() as usize;
    let d = params.d() as u64;
    let fanout = params.long_fanout();
    // layers[n % k] holds the cluster vertices at height n.
    let mut layers: Vec<Vec<Fingerprint>> = vec![Vec::new(); k];
    layers[0].push(Fingerprint::ROOT);
    let mut x = vec![0u64; n_max + 1];
    x[0] = 1;
    let mut total = 1u64;
    let mut empty_run = 0usize;
    for n in 1..=n_max {
        let mut next = Vec::new();
        for &v in &layers[(n - 1) % k] {
            for sel in oracle.open_selectors(v, EdgeKind::Short, d, perc.p) {
                next.push(v.child(sel as u32 + 1));
            }
        }
        if n >= k {
            for &v in &layers[(n - k) % k] {
                for sel in oracle.open_selectors(v, EdgeKind::Long, fanout, perc.q) {
                    next.push(long_child(v, sel, params));
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        x[n] = next.len() as u64;
        total += x[n];
        if total > cap {
            return Err(Error::CapExceeded {
                what: "cluster size",
                value: total,
                limit: cap,
            });
        }
        empty_run = if next.is_empty() { empty_run + 1 } else { 0 };
        layers[n % k] = next;
        if empty_run >= k {
            // k empty layers in a row: nothing can be reached any more.
            break;
        }
    }
    let lo = n_max.saturating_sub(k - 1);
    let truncated_alive = x[lo..=n_max].iter().any(|&c| c > 0);
    Ok(LayerStats { x, truncated_alive })
}

/// Depth-first exploration of the root cluster restricted to heights
/// `<= max_height`. `visit` sees every cluster vertex once and may stop early.
/// Returns `true` if stopped by `visit`.
pub(crate) fn dfs_cluster(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    max_height: usize,
    cap: u64,
    visit: impl FnMut(Fingerprint, usize) -> ControlFlow<()>,
) -> Result<bool> {
    dfs_cluster_from(params, perc, oracle, &[(Fingerprint::ROOT, 0)], max_height, cap, visit)
}

fn dfs_cluster_from(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    starts: &[(Fingerprint, usize)],
    max_height: usize,
    cap: u64,
    mut visit: impl FnMut(Fingerprint, usize) -> ControlFlow<()>,
) -> Result<bool> {
    let k = params.k() as usize;
    let d = params.d() as u64;
    let fanout = params.long_fanout();
    let mut seen: FxHashSet<Fingerprint> = FxHashSet::default();
    let mut stack = Vec::new();
    for &(v, h) in starts {
        if seen.insert(v) {
            stack.push((v, h));
        }
    }
    while let Some((v, h)) = stack.pop() {
        if visit(v, h).is_break() {
            return Ok(true);
        }
        if h < max_height {
            for sel in oracle.open_selectors(v, EdgeKind::Short, d, perc.p) {
                let c = v.child(sel as u32 + 1);
                if seen.insert(c) {
                    stack.push((c, h + 1));
                }
            }
        }
        if h + k <= max_height {
            for sel in oracle.open_selectors(v, EdgeKind::Long, fanout, perc.q) {
                let c = long_child(v, sel, params);
                if seen.insert(c) {
                    stack.push((c, h + k));
                }
            }
        }
        if seen.len() as u64 > cap {
            return Err(Error::CapExceeded {
                what: "cluster size",
                value: seen.len() as u64,
                limit: cap,
            });
        }
    }
    Ok(false)
}

/// Survival proxy: some cluster vertex has height in `[depth-k+1, depth]`.
///
/// Every open path to height `>= depth` crosses that band, since steps are
/// `+1` or `+k`.
pub fn alive_at_depth(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    depth: usize,
) -> Result<bool> {
    let band = depth.saturating_sub(params.k() as usize - 1);
    dfs_cluster(params, perc, oracle, depth, DEFAULT_CLUSTER_CAP, |_, h| {
        if h >= band {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
}

/// [`alive_at_depth`] for the cluster of a vertex set `b`.
pub fn set_alive_at_depth(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    b: &[VertexPath],
    depth: usize,
) -> Result<bool> {
    if b.is_empty() {
        return Err(Error::InvalidParameter("start set must be nonempty".into()));
    }
    let starts: Vec<(Fingerprint, usize)> = b.iter().map(|v| (Fingerprint::of_path(v), v.height())).collect();
    let band = depth.saturating_sub(params.k() as usize - 1);
    dfs_cluster_from(params, perc, oracle, &starts, depth, DEFAULT_CLUSTER_CAP, |_, h| {
        if h >= band {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
}

/// Whether the root cluster has more than `n` vertices.
pub fn cluster_exceeds(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
    n: u64,
    cap: u64,
) -> Result<bool> {
    let mut count = 0u64;
    dfs_cluster(params, perc, oracle, usize::MAX / 2, cap, |_, _| {
        count += 1;
        if count > n {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
}

/// Fraction of `trials` independent clusters alive at `depth`, with binomial SE.
pub fn estimate_survival(
    params: TreeParams,
    perc: PercParams,
    trials: u64,
    depth: usize,
    seed: u64,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if depth < params.k() as usize {
        return Err(Error::InvalidParameter(format!(
            "depth must be >= k = {}, got {depth}",
            params.k()
        )));
    }
    let alive = (0..trials)
        .into_par_iter()
        .map(|t| alive_at_depth(params, perc, &EdgeOracle::for_trial(seed, t), depth).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(proportion(alive, trials))
}

/// Layer counts of `trials` independent clusters up to height `n_max`.
pub fn sample_layers(
    params: TreeParams,
    perc: PercParams,
    trials: u64,
    n_max: usize,
    seed: u64,
) -> Result<Vec<LayerStats>> {
    (0..trials)
        .into_par_iter()
        .map(|t| explore_layers(params, perc, &EdgeOracle::for_trial(seed, t), n_max))
        .collect()
}

// ---------------------------------------------------------------------------
// Short clusters, long boundaries and admissible sets.

fn fingerprinted(v: &VertexPath) -> (VertexPath, Fingerprint) {
    (v.clone(), Fingerprint::of_path(v))
}

/// Vertices reachable from `b` through open short edges (including `b`).
pub fn short_cluster<'a>(
    b: impl IntoIterator<Item = &'a VertexPath>,
    oracle: &EdgeOracle,
    perc: PercParams,
    params: TreeParams,
    cap: u64,
) -> Result<BTreeSet<VertexPath>> {
    let mut out = BTreeSet::new();
    let mut queue: Vec<(VertexPath, Fingerprint)> = Vec::new();
    for v in b {
        if out.insert(v.clone()) {
            queue.push(fingerprinted(v));
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("short_cluster needs a nonempty start set".into()));
    }
    let d = params.d() as u64;
    while let Some((v, fp)) = queue.pop() {
        for sel in oracle.open_selectors(fp, EdgeKind::Short, d, perc.p) {
            let digit = sel as u8 + 1;
            let c = v.child(digit);
            if out.insert(c.clone()) {
                queue.push((c, fp.child(digit as u32)));
            }
        }
        if out.len() as u64 > cap {
            return Err(Error::CapExceeded {
                what: "short cluster size",
                value: out.len() as u64,
                limit: cap,
            });
        }
    }
    Ok(out)
}

/// Endpoints of open long edges out of `c_s` that are not themselves in `c_s`.
pub fn long_boundary(
    c_s: &BTreeSet<VertexPath>,
    oracle: &EdgeOracle,
    perc: PercParams,
    params: TreeParams,
) -> BTreeSet<VertexPath> {
    let fanout = params.long_fanout();
    let mut out = BTreeSet::new();
    for v in c_s {
        let fp = Fingerprint::of_path(v);
        for sel in oracle.open_selectors(fp, EdgeKind::Long, fanout, perc.q) {
            let u = VertexPath::from_digits_unchecked(long_selector_digits(sel, params));
            let w = v.concat(&u);
            if !c_s.contains(&w) {
                out.insert(w);
            }
        }
    }
    out
}

/// A finite vertex set inside the window of its own member `base`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdmissibleSet {
    base: VertexPath,
    rel_type: Window,
}

impl AdmissibleSet {
    pub fn new(base: VertexPath, rel_type: Window, params: TreeParams) -> Result<Self> {
        rel_type.check(params)?;
        if !rel_type.contains_root() {
            return Err(Error::Domain("an admissible type must contain the base slot".into()));
        }
        Ok(Self { base, rel_type })
    }

    /// The set `{o}`.
    pub fn root() -> Self {
        Self {
            base: VertexPath::root(),
            rel_type: Window::ROOT,
        }
    }

    pub fn base(&self) -> &VertexPath {
        &self.base
    }

    pub fn rel_type(&self) -> Window {
        self.rel_type
    }

    pub fn len(&self) -> usize {
        self.rel_type.len() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self, params: TreeParams) -> Vec<VertexPath> {
        self.rel_type
            .slots()
            .map(|i| self.base.concat(&slot_vertex(i, params).expect("valid slot")))
            .collect()
    }
}

/// Splits a long boundary into its classes: vertices are related when they
/// share an ancestor-or-self in the set. Each class hangs below its topmost
/// member (the base) and must fit in the base's window.
pub fn decompose(c_l: &BTreeSet<VertexPath>, params: TreeParams) -> Result<Vec<AdmissibleSet>> {
    let k = params.k() as usize;
    let mut classes: BTreeMap<VertexPath, Window> = BTreeMap::new();
    for u in c_l {
        // Topmost ancestor-or-self of u inside c_l.
        let digits = u.digits();
        let top_len = (0..=digits.len())
            .find(|&len| {
                len == digits.len()
                    || c_l.contains(&VertexPath::from_digits_unchecked(digits[..len].to_vec()))
            })
            .expect("u itself qualifies");
        if digits.len() - top_len >= k {
            return Err(Error::Inconsistent(format!(
                "{u} lies {} levels below boundary member {}; not admissible",
                digits.len() - top_len,
                VertexPath::from_digits_unchecked(digits[..top_len].to_vec())
            )));
        }
        let base = VertexPath::from_digits_unchecked(digits[..top_len].to_vec());
        let rel = VertexPath::from_digits_unchecked(digits[top_len..].to_vec());
        let slot = slot_index(&rel, params)?;
        let w = classes.entry(base).or_insert(Window::EMPTY);
        *w = w.with_slot(slot);
    }
    Ok(classes
        .into_iter()
        .map(|(base, rel_type)| AdmissibleSet { base, rel_type })
        .collect())
}

/// One step of the recursion from an admissible set.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub short: BTreeSet<VertexPath>,
    pub long: BTreeSet<VertexPath>,
    pub children: Vec<AdmissibleSet>,
}

pub fn expand_admissible(
    set: &AdmissibleSet,
    oracle: &EdgeOracle,
    perc: PercParams,
    params: TreeParams,
    cap: u64,
) -> Result<Expansion> {
    let members = set.members(params);
    let short = short_cluster(&members, oracle, perc, params, cap)?;
    let long = long_boundary(&short, oracle, perc, params);
    let children = decompose(&long, params)?;
    Ok(Expansion { short, long, children })
}

/// Type counts of the admissible-set recursion, generations `0..=generations`.
pub fn simulate_z_first(
    params: TreeParams,
    b0: &AdmissibleSet,
    oracle: &EdgeOracle,
    perc: PercParams,
    generations: usize,
) -> Result<Vec<Population<Window>>> {
    let mut current = vec![b0.clone()];
    let mut out = Vec::with_capacity(generations + 1);
    out.push(Population::from_types(current.iter().map(|s| s.rel_type)));
    for _ in 0..generations {
        let mut next = Vec::new();
        for set in &current {
            next.extend(expand_admissible(set, oracle, perc, params, DEFAULT_CLUSTER_CAP)?.children);
        }
        out.push(Population::from_types(next.iter().map(|s| s.rel_type)));
        current = next;
    }
    Ok(out)
}

/// Full cluster of a vertex set (all open oriented paths), by path.
pub fn full_cluster<'a>(
    b: impl IntoIterator<Item = &'a VertexPath>,
    oracle: &EdgeOracle,
    perc: PercParams,
    params: TreeParams,
    cap: u64,
) -> Result<BTreeSet<VertexPath>> {
    let mut out = BTreeSet::new();
    let mut stack = Vec::new();
    for v in b {
        if out.insert(v.clone()) {
            stack.push(fingerprinted(v));
        }
    }
    let d = params.d() as u64;
    let fanout = params.long_fanout();
    while let Some((v, fp)) = stack.pop() {
        for sel in oracle.open_selectors(fp, EdgeKind::Short, d, perc.p) {
            let c = v.child(sel as u8 + 1);
            if out.insert(c.clone()) {
                stack.push((c, fp.child(sel as u32 + 1)));
            }
        }
        for sel in oracle.open_selectors(fp, EdgeKind::Long, fanout, perc.q) {
            let u = long_selector_digits(sel, params);
            let c = v.concat(&VertexPath::from_digits_unchecked(u));
            if out.insert(c.clone()) {
                stack.push((c, long_child(fp, sel, params)));
            }
        }
        if out.len() as u64 > cap {
            return Err(Error::CapExceeded {
                what: "cluster size",
                value: out.len() as u64,
                limit: cap,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Closed forms.

fn require_subcritical_short(perc: PercParams, params: TreeParams) -> Result<()> {
    if perc.p * params.d() as f64 >= 1.0 {
        return Err(Error::Domain(format!(
            "requires p·d < 1, got p·d = {}",
            perc.p * params.d() as f64
        )));
    }
    Ok(())
}

/// Expected number of long-boundary vertices `v` of `C_ℓ({o})` whose window
/// contains the translate of `a`:
/// `(1 − p^{k−h(A)})·d^k·q^{|A|}·p^{h(A)}/(1 − pd)`.
pub fn exact_mbar(a: Window, perc: PercParams, params: TreeParams) -> Result<f64> {
    require_subcritical_short(perc, params)?;
    a.check(params)?;
    if !a.contains_root() {
        return Err(Error::Domain("type must contain the root slot".into()));
    }
    let h = a.height(params).expect("nonempty") as i32;
    let k = params.k() as i32;
    let (p, q) = (perc.p, perc.q);
    Ok((1.0 - p.powi(k - h)) * params.long_fanout() as f64 * q.powi(a.len() as i32) * p.powi(h)
        / (1.0 - p * params.d() as f64))
}

/// `E|C_s(A)| = (2 − p^{h(A)})/(1 − pd)` for a two-point type `A`.
pub fn exact_mean_short_cluster_pair(a: Window, perc: PercParams, params: TreeParams) -> Result<f64> {
    require_subcritical_short(perc, params)?;
    a.check(params)?;
    if a.len() != 2 || !a.contains_root() {
        return Err(Error::Domain(format!(
            "expected a two-point type containing the root slot, got {a:?}"
        )));
    }
    let h = a.height(params).expect("nonempty") as i32;
    Ok((2.0 - perc.p.powi(h)) / (1.0 - perc.p * params.d() as f64))
}

/// `q = (1 − pd)/d^k + s/d^{2k}`.
pub fn q_from_s(p: f64, s: f64, params: TreeParams) -> f64 {
    let dk = params.long_fanout() as f64;
    (1.0 - p * params.d() as f64) / dk + s / (dk * dk)
}

/// Second-order coefficient `(1 − pd)² p² d / (1 − p² d)`.
pub fn s_star(p: f64, d: u32) -> Result<f64> {
    let d = d as f64;
    if p * p * d >= 1.0 {
        return Err(Error::Domain(format!("requires p²d < 1, got {}", p * p * d)));
    }
    Ok((1.0 - p * d).powi(2) * p * p * d / (1.0 - p * p * d))
}

/// Monte Carlo estimates of the two comparison sums for the admissible-set
/// chain started from `{o}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaEstimate {
    pub p: f64,
    pub s: f64,
    pub q: f64,
    /// `M({o},{o}) + Σ_{|B|=2} M({o},B)·M(B,{o})`.
    pub lhs_a: Estimate,
    /// `Σ_{|B|≠2} M({o},B)·|B| + Σ_{|B|=2} Σ_{B'} M({o},B)·M(B,B')·|B'|`.
    pub lhs_b: Estimate,
}

/// Per-trial contributions to the two sums: generation-one `{o}` children and
/// generation-two `{o}` grandchildren through two-point children for the
/// first; sizes for the second.
pub fn criteria_trial(
    params: TreeParams,
    perc: PercParams,
    oracle: &EdgeOracle,
) -> Result<(u64, u64)> {
    let first = expand_admissible(&AdmissibleSet::root(), oracle, perc, params, DEFAULT_CLUSTER_CAP)?;
    let mut ya = 0u64;
    let mut yb = 0u64;
    for child in &first.children {
        if child.len() == 2 {
            let second = expand_admissible(child, oracle, perc, params, DEFAULT_CLUSTER_CAP)?;
            for g in &second.children {
                ya += (g.rel_type == Window::ROOT) as u64;
                yb += g.len() as u64;
            }
        } else {
            ya += (child.rel_type == Window::ROOT) as u64;
            yb += child.len() as u64;
        }
    }
    Ok((ya, yb))
}

pub fn criteria_eval(
    params: TreeParams,
    p: f64,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<CriteriaEstimate> {
    let q = q_from_s(p, s, params);
    let perc = PercParams::new(p, q)?;
    require_subcritical_short(perc, params)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let (ma, mb) = (0..trials)
        .into_par_iter()
        .map(|t| criteria_trial(params, perc, &EdgeOracle::for_trial(seed, t)))
        .try_fold(
            || (IntMoments::default(), IntMoments::default()),
            |(mut a, mut b), r| {
                let (ya, yb) = r?;
                a.push(ya);
                b.push(yb);
                Ok::<_, Error>((a, b))
            },
        )
        .try_reduce(
            || (IntMoments::default(), IntMoments::default()),
            |x, y| Ok((x.0.merge(y.0), x.1.merge(y.1))),
        )?;
    Ok(CriteriaEstimate {
        p,
        s,
        q,
        lhs_a: ma.estimate(),
        lhs_b: mb.estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(d: u32, k: u32) -> TreeParams {
        TreeParams::new(d, k).unwrap()
    }

    fn path(d: &[u8]) -> VertexPath {
        VertexPath::from_digits_unchecked(d.to_vec())
    }

    fn pp(p: f64, q: f64) -> PercParams {
        PercParams::new(p, q).unwrap()
    }

    #[test]
    fn layers_trivial_cases() {
        let o = EdgeOracle::new(1);
        let closed = explore_layers(tp(2, 2), pp(0.0, 0.0), &o, 5).unwrap();
        assert_eq!(closed.x, vec![1, 0, 0, 0, 0, 0]);
        assert!(!closed.truncated_alive);
        let short = explore_layers(tp(2, 3), pp(1.0, 0.0), &o, 3).unwrap();
        assert_eq!(short.x, vec![1, 2, 4, 8]);
        let long = explore_layers(tp(2, 2), pp(0.0, 1.0), &o, 4).unwrap();
        assert_eq!(long.x, vec![1, 0, 4, 0, 16]);
        assert!(long.truncated_alive);
    }

    #[test]
    fn layers_match_dfs() {
        let params = tp(2, 2);
        let perc = pp(0.3, 0.2);
        for t in 0..200 {
            let o = EdgeOracle::for_trial(5, t);
            let layers = explore_layers(params, perc, &o, 12).unwrap();
            let mut by_h = vec![0u64; 13];
            dfs_cluster(params, perc, &o, 12, DEFAULT_CLUSTER_CAP, |_, h| {
                by_h[h] += 1;
                ControlFlow::Continue(())
            })
            .unwrap();
            assert_eq!(layers.x, by_h, "trial {t}");
            let alive = alive_at_depth(params, perc, &o, 12).unwrap();
            assert_eq!(alive, layers.truncated_alive);
        }
    }

    #[test]
    fn k_empty_layers_mean_extinction() {
        let params = tp(2, 3);
        let perc = pp(0.35, 0.1);
        for t in 0..300 {
            let stats = explore_layers(params, perc, &EdgeOracle::for_trial(9, t), 30).unwrap();
            let x = &stats.x;
            for n in 0..x.len().saturating_sub(3) {
                if x[n..n + 3].iter().all(|&c| c == 0) {
                    assert!(x[n..].iter().all(|&c| c == 0));
                }
            }
        }
    }

    #[test]
    fn short_cluster_edges() {
        let params = tp(2, 2);
        let o = EdgeOracle::new(3);
        let root = [VertexPath::root()];
        let c = short_cluster(&root, &o, pp(0.0, 0.5), params, 100).unwrap();
        assert_eq!(c.len(), 1);
        assert!(matches!(
            short_cluster(&root, &o, pp(1.0, 0.0), params, 1000),
            Err(Error::CapExceeded { .. })
        ));
        let b = long_boundary(&c, &o, pp(0.0, 0.0), params);
        assert!(b.is_empty());
        let b = long_boundary(&c, &o, pp(0.0, 1.0), params);
        let expect: BTreeSet<_> = [path(&[1, 1]), path(&[1, 2]), path(&[2, 1]), path(&[2, 2])].into();
        assert_eq!(b, expect);
    }

    #[test]
    fn decompose_examples() {
        let params = tp(2, 3);
        assert!(decompose(&BTreeSet::new(), params).unwrap().is_empty());
        let single: BTreeSet<_> = [path(&[1, 2, 1])].into();
        let d = decompose(&single, params).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].base(), &path(&[1, 2, 1]));
        assert_eq!(d[0].rel_type(), Window::ROOT);
        let v = path(&[1, 1, 1]);
        let vu = path(&[1, 1, 1, 2]);
        let w = path(&[2, 1, 1]);
        let set: BTreeSet<_> = [v.clone(), vu.clone(), w.clone()].into();
        let d = decompose(&set, params).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].base(), &v);
        assert_eq!(d[0].members(params), vec![v, vu]);
        assert_eq!(d[1].base(), &w);
        let bad: BTreeSet<_> = [path(&[1]), path(&[1, 1, 1, 1])].into();
        assert!(matches!(decompose(&bad, params), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn closed_forms() {
        let params = tp(2, 2);
        let a = exact_mbar(Window::ROOT, pp(0.0, 0.3), params).unwrap();
        assert!((a - 0.3 * 4.0).abs() < 1e-15);
        let b = exact_mbar(Window::ROOT, pp(0.25, 0.1), params).unwrap();
        assert!((b - 0.75).abs() < 1e-15);
        let pair = Window(0b011);
        assert!((exact_mean_short_cluster_pair(pair, pp(0.0, 0.1), params).unwrap() - 2.0).abs() < 1e-15);
        assert!((exact_mean_short_cluster_pair(pair, pp(0.25, 0.1), params).unwrap() - 3.5).abs() < 1e-15);
        assert!(exact_mean_short_cluster_pair(Window::ROOT, pp(0.25, 0.1), params).is_err());
        assert!(exact_mbar(Window::ROOT, pp(0.5, 0.1), params).is_err());
        assert!((s_star(0.25, 2).unwrap() - 0.035_714_285_714_285_71).abs() < 1e-15);
    }

    #[test]
    fn z_first_trivial() {
        let params = tp(2, 2);
        let o = EdgeOracle::new(2);
        let z = simulate_z_first(params, &AdmissibleSet::root(), &o, pp(0.3, 0.0), 3).unwrap();
        assert_eq!(z[0].count(&Window::ROOT), 1);
        assert!(z[1].is_zero());
        let z0 = simulate_z_first(params, &AdmissibleSet::root(), &o, pp(0.3, 0.2), 0).unwrap();
        assert_eq!(z0.len(), 1);
        let e = criteria_eval(params, 0.2, -(1.0 - 0.4) * 4.0, 10, 1).unwrap();
        assert_eq!(e.q, 0.0);
        assert_eq!(e.lhs_a.mean, 0.0);
        assert_eq!(e.lhs_b.mean, 0.0);
    }

    #[test]
    fn recursion_pathwise_geometry_and_disjoint_union() {
        // Subcritical, so every cluster is finite.
        for (d, k, p, q) in [(2, 2, 0.3, 0.05), (2, 3, 0.25, 0.03), (3, 2, 0.2, 0.02)] {
            let params = tp(d, k);
            let perc = pp(p, q);
            for t in 0..150 {
                let o = EdgeOracle::for_trial(21, t);
                let full = full_cluster(&[VertexPath::root()], &o, perc, params, 100_000).unwrap();
                let mut union = BTreeSet::new();
                let mut current = vec![AdmissibleSet::root()];
                while !current.is_empty() {
                    let mut next = Vec::new();
                    for set in &current {
                        let e = expand_admissible(set, &o, perc, params, 100_000).unwrap();
                        assert!(e.short.is_disjoint(&e.long));
                        assert!(e.short.is_subset(&full));
                        for u in &e.long {
                            assert!(e.short.iter().all(|s| !u.is_prefix_of(s)));
                        }
                        for s in &e.short {
                            assert!(union.insert(s.clone()), "short clusters overlap at {s}");
                        }
                        next.extend(e.children);
                    }
                    current = next;
                }
                assert_eq!(union, full, "trial {t}");
            }
        }
    }
}
