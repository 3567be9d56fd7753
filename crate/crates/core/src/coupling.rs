//! Slab comparison between `T_{d,k}` and the `(d + d^k)`-ary tree `T̂`.
//!
//! Labels of `T̂` are `1..=d+d^k`; `φ(j) = (j)` for `j ≤ d` and `φ(d+m)` is
//! the `m`-th element of `[d]^k` in lexicographic order. `Φ` concatenates
//! `φ` over a label path. Both slabs keep edges whose tail has (`Φ`-)height
//! below `2k`; leaves have heights in `[2k, 3k)`.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{EdgeKind, EdgeOracle, Fingerprint};
use crate::percolation::{long_child, PercParams};
use crate::stats::proportion;
use crate::tree::{long_selector_digits, long_selector_index, TreeParams, VertexPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhiMap {
    params: TreeParams,
}

impl PhiMap {
    pub fn new(params: TreeParams) -> Self {
        Self { params }
    }

    pub fn labels(&self) -> u32 {
        self.params.d() + self.params.long_fanout() as u32
    }

    pub fn is_short(&self, label: u32) -> bool {
        label <= self.params.d()
    }

    /// Height increment of a label: 1 or `k`.
    pub fn step(&self, label: u32) -> usize {
        if self.is_short(label) {
            1
        } else {
            self.params.k() as usize
        }
    }

    pub fn phi(&self, label: u32) -> Result<Vec<u8>> {
        if label == 0 || label > self.labels() {
            return Err(Error::InvalidParameter(format!("label {label} outside 1..={}", self.labels())));
        }
        Ok(if self.is_short(label) {
            vec![label as u8]
        } else {
            long_selector_digits((label - self.params.d() - 1) as u64, self.params)
        })
    }

    pub fn phi_inverse_short(&self, digit: u8) -> u32 {
        digit as u32
    }

    pub fn phi_inverse_long(&self, block: &[u8]) -> u32 {
        self.params.d() + 1 + long_selector_index(block, self.params) as u32
    }

    /// `Φ` on a label path.
    pub fn image(&self, path: &HatPath) -> Result<VertexPath> {
        let mut digits = Vec::new();
        for &l in &path.0 {
            digits.extend(self.phi(l)?);
        }
        Ok(VertexPath::from_digits_unchecked(digits))
    }

    pub fn image_height(&self, path: &HatPath) -> usize {
        path.0.iter().map(|&l| self.step(l)).sum()
    }
}

/// A vertex of `T̂` as its label sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct HatPath(pub Vec<u32>);

impl HatPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn height(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, label: u32) -> Self {
        let mut v = self.0.clone();
        v.push(label);
        Self(v)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.0.iter().fold(Fingerprint::HAT_ROOT, |fp, &l| fp.child(l))
    }
}

/// An edge configuration on `Λ̂`, evaluated lazily.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlabConfig {
    /// Independent edges: `Ê_s` open with probability `p`, `Ê_ℓ` with `q`.
    Random { oracle: EdgeOracle, p: f64, q: f64 },
    /// The distinguished configuration `ω̄`.
    OmegaBar,
    AllOpen,
    AllClosed,
}

impl SlabConfig {
    pub fn random(oracle: EdgeOracle, perc: PercParams) -> Self {
        SlabConfig::Random {
            oracle,
            p: perc.p(),
            q: perc.q(),
        }
    }

    /// Status of the edge from `tail` (with fingerprint `fp`) labelled `label`.
    pub fn is_open(&self, phi: &PhiMap, tail: &HatPath, fp: Fingerprint, label: u32) -> bool {
        match *self {
            SlabConfig::Random { oracle, p, q } => {
                let prob = if phi.is_short(label) { p } else { q };
                crate::oracle::bernoulli(oracle.uniform(fp, EdgeKind::Hat, label as u64), prob)
            }
            SlabConfig::AllOpen => true,
            SlabConfig::AllClosed => false,
            SlabConfig::OmegaBar => match tail.0.first() {
                None => true,
                Some(&first) if !phi.is_short(first) => true,
                Some(_) => phi.is_short(label) && tail.height() < phi.params.k() as usize,
            },
        }
    }
}

/// Reached leaves of `Λ̂` under `config`.
pub fn leaf_count_zhat(params: TreeParams, config: &SlabConfig) -> u64 {
    let phi = PhiMap::new(params);
    let two_k = 2 * params.k() as usize;
    let mut leaves = 0u64;
    let mut stack = vec![(HatPath::root(), Fingerprint::HAT_ROOT, 0usize)];
    while let Some((v, fp, h)) = stack.pop() {
        if h >= two_k {
            leaves += 1;
            continue;
        }
        for label in 1..=phi.labels() {
            if config.is_open(&phi, &v, fp, label) {
                stack.push((v.child(label), fp.child(label), h + phi.step(label)));
            }
        }
    }
    leaves
}

/// Reached leaves of `Λ` in the percolation given by `oracle`.
pub fn leaf_count_z(params: TreeParams, perc: PercParams, oracle: &EdgeOracle) -> u64 {
    let two_k = 2 * params.k() as usize;
    let k = params.k() as usize;
    let mut seen: FxHashSet<Fingerprint> = FxHashSet::default();
    let mut stack = vec![(Fingerprint::ROOT, 0usize)];
    seen.insert(Fingerprint::ROOT);
    let mut leaves = 0u64;
    while let Some((v, h)) = stack.pop() {
        if h >= two_k {
            leaves += 1;
            continue;
        }
        for s in oracle.open_selectors(v, EdgeKind::Short, params.d() as u64, perc.p()) {
            let c = v.child(s as u32 + 1);
            if seen.insert(c) {
                stack.push((c, h + 1));
            }
        }
        for s in oracle.open_selectors(v, EdgeKind::Long, params.long_fanout(), perc.q()) {
            let c = long_child(v, s, params);
            if seen.insert(c) {
                stack.push((c, h + k));
            }
        }
    }
    leaves
}

/// Result of the four-round exploration of `Λ̂` that builds `C` in `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatExploration {
    /// Explored, conflict-free vertices of `Ĉ` (root included).
    pub explored: Vec<HatPath>,
    /// Vertices of `C` (the `Φ`-images of `explored`).
    pub c_vertices: BTreeSet<VertexPath>,
    /// Edges of `C` as `(tail, head)`.
    pub c_edges: Vec<(VertexPath, VertexPath)>,
    /// Open-edge endpoints whose image was already in `C`.
    pub conflicts: Vec<HatPath>,
}

impl HatExploration {
    /// `Z(C)`: vertices of `C` with height in `[2k, 3k)`.
    pub fn z(&self, params: TreeParams) -> u64 {
        let two_k = 2 * params.k() as usize;
        self.c_vertices.iter().filter(|v| v.height() >= two_k).count() as u64
    }
}

struct Explorer<'a> {
    phi: PhiMap,
    config: &'a SlabConfig,
    two_k: usize,
    out: HatExploration,
}

impl Explorer<'_> {
    /// Closure of `start` under edges of one kind (`short` or long). Returns
    /// the vertices newly added to `C`.
    fn closure(&mut self, start: &[HatPath], short: bool) -> Result<Vec<HatPath>> {
        let mut added = Vec::new();
        let mut stack: Vec<HatPath> = start.to_vec();
        while let Some(v) = stack.pop() {
            if self.phi.image_height(&v) >= self.two_k {
                continue;
            }
            let fp = v.fingerprint();
            let image = self.phi.image(&v)?;
            for label in 1..=self.phi.labels() {
                if self.phi.is_short(label) != short || !self.config.is_open(&self.phi, &v, fp, label) {
                    continue;
                }
                let r = v.child(label);
                let img = self.phi.image(&r)?;
                self.out.c_edges.push((image.clone(), img.clone()));
                if self.out.c_vertices.insert(img) {
                    self.out.explored.push(r.clone());
                    added.push(r.clone());
                    stack.push(r);
                } else {
                    self.out.conflicts.push(r);
                }
            }
        }
        Ok(added)
    }
}

/// Rounds: short closure from the root; long closure from everything so far;
/// short closure from the round-two additions; long closure from the
/// round-three additions. Conflicting vertices are never expanded.
pub fn explore_hat_to_c(params: TreeParams, config: &SlabConfig) -> Result<HatExploration> {
    let mut ex = Explorer {
        phi: PhiMap::new(params),
        config,
        two_k: 2 * params.k() as usize,
        out: HatExploration {
            explored: vec![HatPath::root()],
            c_vertices: [VertexPath::root()].into(),
            c_edges: Vec::new(),
            conflicts: Vec::new(),
        },
    };
    let mut round1 = vec![HatPath::root()];
    round1.extend(ex.closure(&[HatPath::root()], true)?);
    let round2 = ex.closure(&round1, false)?;
    let round3 = ex.closure(&round2, true)?;
    ex.closure(&round3, false)?;
    Ok(ex.out)
}

/// `(Z(C(ω̂)), Ẑ(Ĉ(ω̂)))` for one configuration.
pub fn pathwise_pair(params: TreeParams, config: &SlabConfig) -> Result<(u64, u64)> {
    Ok((explore_hat_to_c(params, config)?.z(params), leaf_count_zhat(params, config)))
}

/// Lift of a leaf `v` of `Λ`: a long block, the middle digits as short
/// labels, and a final long block. Reached under `ω̄`.
pub fn lift_leaf(v: &VertexPath, params: TreeParams) -> Result<HatPath> {
    let k = params.k() as usize;
    let m = v.height();
    if m < 2 * k || m >= 3 * k {
        return Err(Error::Domain(format!("{v} is not a leaf of the slab")));
    }
    let phi = PhiMap::new(params);
    let dg = v.digits();
    let mut labels = vec![phi.phi_inverse_long(&dg[..k])];
    labels.extend(dg[k..m - k].iter().map(|&x| phi.phi_inverse_short(x)));
    labels.push(phi.phi_inverse_long(&dg[m - k..]));
    Ok(HatPath(labels))
}

/// Whether `path` is reached from the root through open edges of `config`.
pub fn hat_reachable(params: TreeParams, config: &SlabConfig, path: &HatPath) -> bool {
    let phi = PhiMap::new(params);
    let two_k = 2 * params.k() as usize;
    let mut cur = HatPath::root();
    let mut fp = Fingerprint::HAT_ROOT;
    for &l in &path.0 {
        if phi.image_height(&cur) >= two_k || !config.is_open(&phi, &cur, fp, l) {
            return false;
        }
        cur = cur.child(l);
        fp = fp.child(l);
    }
    true
}

/// Joint law on `S × S` with the prescribed marginals, supported on the
/// diagonal and the row/column of `x̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub x_bar: usize,
    pub joint: Vec<Vec<f64>>,
}

pub fn finite_coupling(p1: &[f64], p2: &[f64], x_bar: usize) -> Result<CouplingTable> {
    let n = p1.len();
    if p2.len() != n || x_bar >= n {
        return Err(Error::InvalidParameter("pmfs must share one finite support containing x_bar".into()));
    }
    for pmf in [p1, p2] {
        if pmf.iter().any(|&x| !(x >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("inputs must be pmfs".into()));
        }
    }
    let l1: f64 = p1.iter().zip(p2).map(|(a, b)| (a - b).abs()).sum();
    if !(l1 < p1[x_bar]) {
        return Err(Error::Infeasible(format!(
            "sum |P1 - P2| = {l1} is not below P1(x_bar) = {}",
            p1[x_bar]
        )));
    }
    let m: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a.min(*b)).collect();
    let excess1: f64 = p1.iter().zip(&m).map(|(a, b)| a - b).sum();
    let mut joint = vec![vec![0.0; n]; n];
    for x in 0..n {
        if x != x_bar {
            joint[x][x] = m[x];
            joint[x][x_bar] = p1[x] - m[x];
            joint[x_bar][x] = p2[x] - m[x];
        }
    }
    joint[x_bar][x_bar] = p1[x_bar] - excess1 + (p2[x_bar] - m[x_bar]);
    Ok(CouplingTable {
        p1: p1.to_vec(),
        p2: p2.to_vec(),
        x_bar,
        joint,
    })
}

impl CouplingTable {
    /// Largest violation of marginals, nonnegativity and support.
    pub fn max_violation(&self) -> f64 {
        let n = self.p1.len();
        let mut worst = 0.0f64;
        for x in 0..n {
            let row: f64 = self.joint[x].iter().sum();
            let col: f64 = (0..n).map(|y| self.joint[y][x]).sum();
            worst = worst.max((row - self.p1[x]).abs()).max((col - self.p2[x]).abs());
            for y in 0..n {
                let j = self.joint[x][y];
                worst = worst.max(-j);
                if x != y && x != self.x_bar && y != self.x_bar {
                    worst = worst.max(j.abs());
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub threshold: u64,
    pub surv_z: f64,
    pub se_z: f64,
    pub surv_zhat: f64,
    pub se_zhat: f64,
    pub violation_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
    pub max_violation_sigma: f64,
    /// No threshold where `P̂(Z ≥ t)` exceeds `P̂(Ẑ ≥ t)` by more than 3 SE.
    pub dominated: bool,
}

impl DominanceReport {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "threshold,surv_Z,se_Z,surv_Zhat,se_Zhat,violation_sigma")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.threshold, r.surv_z, r.se_z, r.surv_zhat, r.se_zhat, r.violation_sigma
            )?;
        }
        Ok(())
    }
}

fn survival_rows(z: &[u64], zhat: &[u64]) -> DominanceReport {
    let top = z.iter().chain(zhat).copied().max().unwrap_or(0) + 1;
    let mut rows = Vec::with_capacity(top as usize + 1);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..=top {
        let a = proportion(z.iter().filter(|&&x| x >= t).count() as u64, z.len() as u64);
        let b = proportion(zhat.iter().filter(|&&x| x >= t).count() as u64, zhat.len() as u64);
        let se = (a.se * a.se + b.se * b.se).sqrt();
        let diff = a.mean - b.mean;
        let sigma = if se > 0.0 {
            diff / se
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(sigma);
        rows.push(DominanceRow {
            threshold: t,
            surv_z: a.mean,
            se_z: a.se,
            surv_zhat: b.mean,
            se_zhat: b.se,
            violation_sigma: sigma,
        });
    }
    DominanceReport {
        rows,
        max_violation_sigma: worst,
        dominated: worst <= 3.0,
    }
}

/// Compares `Z(C_{p,q})` against `Ẑ(Ĉ_{p,q−δ})` from independent samples.
pub fn dominance_test(
    params: TreeParams,
    p: f64,
    q: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<DominanceReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if !(delta >= 0.0) || q - delta < 0.0 {
        return Err(Error::InvalidParameter(format!("need 0 <= delta <= q, got delta = {delta}")));
    }
    let perc = PercParams::new(p, q)?;
    let hat = PercParams::new(p, q - delta)?;
    let z: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| leaf_count_z(params, perc, &EdgeOracle::for_trial(seed, t)))
        .collect();
    let zhat: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| leaf_count_zhat(params, &SlabConfig::random(EdgeOracle::for_trial(seed, t).substream(1), hat)))
        .collect();
    Ok(survival_rows(&z, &zhat))
}

/// `Ẑ` against itself: two independent samples at the same parameters.
pub fn self_dominance_test(params: TreeParams, p: f64, q: f64, trials: u64, seed: u64) -> Result<DominanceReport> {
    let perc = PercParams::new(p, q)?;
    let draw = |stream: u64| -> Vec<u64> {
        (0..trials)
            .into_par_iter()
            .map(|t| leaf_count_zhat(params, &SlabConfig::random(EdgeOracle::for_trial(seed, t).substream(stream), perc)))
            .collect()
    };
    Ok(survival_rows(&draw(1), &draw(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;
    use rand::Rng;

    fn tp(d: u32, k: u32) -> TreeParams {
        TreeParams::new(d, k).unwrap()
    }

    #[test]
    fn phi_examples() {
        let params = tp(2, 2);
        let phi = PhiMap::new(params);
        assert_eq!(phi.labels(), 6);
        assert_eq!(phi.phi(1).unwrap(), vec![1]);
        assert_eq!(phi.phi(3).unwrap(), vec![1, 1]);
        assert_eq!(phi.phi(4).unwrap(), vec![1, 2]);
        assert_eq!(phi.phi(6).unwrap(), vec![2, 2]);
        assert!(phi.phi(7).is_err());
        for l in 1..=6 {
            let img = phi.phi(l).unwrap();
            let back = if img.len() == 1 { phi.phi_inverse_short(img[0]) } else { phi.phi_inverse_long(&img) };
            assert_eq!(back, l);
        }
    }

    #[test]
    fn phi_heights_and_edge_kinds() {
        let mut rng = crate::oracle::trial_rng(4, 0);
        for (d, k) in [(2, 2), (2, 3), (3, 2)] {
            let params = tp(d, k);
            let phi = PhiMap::new(params);
            for _ in 0..500 {
                let len = rng.random_range(0..8);
                let path = HatPath((0..len).map(|_| rng.random_range(1..=phi.labels())).collect());
                let img = phi.image(&path).unwrap();
                assert_eq!(img.height(), phi.image_height(&path));
                assert!(img.height() >= path.height());
                let label = rng.random_range(1..=phi.labels());
                let child = phi.image(&path.child(label)).unwrap();
                let step = child.height() - img.height();
                assert!(img.is_prefix_of(&child));
                assert_eq!(step, if phi.is_short(label) { 1 } else { k as usize });
            }
        }
    }

    #[test]
    fn trivial_counts() {
        let params = tp(2, 2);
        assert_eq!(leaf_count_zhat(params, &SlabConfig::AllClosed), 0);
        let open = PercParams::new(1.0, 1.0).unwrap();
        assert_eq!(leaf_count_z(params, open, &EdgeOracle::new(1)), 48);
        let closed = PercParams::new(0.0, 0.0).unwrap();
        assert_eq!(leaf_count_z(params, closed, &EdgeOracle::new(1)), 0);
        let ex = explore_hat_to_c(params, &SlabConfig::AllClosed).unwrap();
        assert_eq!(ex.c_vertices.len(), 1);
        assert!(ex.conflicts.is_empty());
    }

    #[test]
    fn omega_bar_behaviour() {
        for (d, k) in [(2, 2), (2, 3), (3, 2)] {
            let params = tp(d, k);
            let phi = PhiMap::new(params);
            let ex = explore_hat_to_c(params, &SlabConfig::OmegaBar).unwrap();
            assert_eq!(ex.z(params), 0);
            assert!(ex.c_vertices.iter().all(|v| v.height() <= k as usize));
            let full_short: usize = (0..=k).map(|h| (d as usize).pow(h)).sum();
            assert_eq!(ex.c_vertices.len(), full_short);
            // Every root long edge conflicts.
            let root_long = ex.conflicts.iter().filter(|c| c.height() == 1).count();
            assert_eq!(root_long as u64, params.long_fanout());
            let leaves: u64 = (2 * k..3 * k).map(|h| (d as u64).pow(h)).sum();
            assert!(leaf_count_zhat(params, &SlabConfig::OmegaBar) >= leaves);
            // Membership queries.
            let bar = SlabConfig::OmegaBar;
            let s = HatPath::root().child(1);
            assert!(bar.is_open(&phi, &HatPath::root(), s.fingerprint(), 1));
            let depth1 = HatPath(vec![1]);
            assert!(!bar.is_open(&phi, &depth1, depth1.fingerprint(), d + 1));
            let depth2 = HatPath(vec![1, 1]);
            assert!(!bar.is_open(&phi, &depth2, depth2.fingerprint(), d + 1));
        }
    }

    #[test]
    fn omega_bar_lifts_every_leaf() {
        let params = tp(2, 2);
        let phi = PhiMap::new(params);
        let mut count = 0;
        for m in 4..6usize {
            for code in 0..1u32 << m {
                let v = VertexPath::from_digits_unchecked((0..m).map(|i| (code >> i & 1) as u8 + 1).collect());
                let lift = lift_leaf(&v, params).unwrap();
                assert_eq!(phi.image(&lift).unwrap(), v);
                assert!(hat_reachable(params, &SlabConfig::OmegaBar, &lift));
                count += 1;
            }
        }
        assert_eq!(count, 48);
    }

    #[test]
    fn pathwise_inequality_small() {
        let params = tp(2, 2);
        let perc = PercParams::new(0.5, 0.5).unwrap();
        for t in 0..500 {
            let cfg = SlabConfig::random(EdgeOracle::for_trial(2, t), perc);
            let (z, zhat) = pathwise_pair(params, &cfg).unwrap();
            assert!(z <= zhat, "trial {t}: {z} > {zhat}");
        }
    }

    #[test]
    fn exploration_reproduces_slab_law() {
        // C(ω̂) has the law of the root cluster in Λ, so mean Z agrees.
        let params = tp(2, 2);
        let perc = PercParams::new(0.4, 0.3).unwrap();
        let n = 20_000;
        let a: Vec<f64> = (0..n)
            .map(|t| explore_hat_to_c(params, &SlabConfig::random(EdgeOracle::for_trial(8, t), perc)).unwrap().z(params) as f64)
            .collect();
        let b: Vec<f64> = (0..n)
            .map(|t| leaf_count_z(params, perc, &EdgeOracle::for_trial(9, t)) as f64)
            .collect();
        let (ea, eb) = (mean_se(&a), mean_se(&b));
        assert!((ea.mean - eb.mean).abs() < 3.5 * (ea.se.powi(2) + eb.se.powi(2)).sqrt(), "{ea:?} {eb:?}");
    }

    #[test]
    fn hat_root_degree_mean() {
        let params = tp(2, 2);
        let (p, q) = (0.3, 0.2);
        let perc = PercParams::new(p, q).unwrap();
        let phi = PhiMap::new(params);
        let xs: Vec<f64> = (0..50_000)
            .map(|t| {
                let cfg = SlabConfig::random(EdgeOracle::for_trial(1, t), perc);
                (1..=6).filter(|&l| cfg.is_open(&phi, &HatPath::root(), Fingerprint::HAT_ROOT, l)).count() as f64
            })
            .collect();
        assert!(mean_se(&xs).sigma_from(2.0 * p + 4.0 * q) < 3.0);
    }

    #[test]
    fn coupling_examples() {
        let c = finite_coupling(&[0.3, 0.7], &[0.3, 0.7], 0).unwrap();
        assert_eq!(c.joint, vec![vec![0.3, 0.0], vec![0.0, 0.7]]);
        let c = finite_coupling(&[0.5, 0.5], &[0.6, 0.4], 0).unwrap();
        let want = [[0.5, 0.0], [0.1, 0.4]];
        for x in 0..2 {
            for y in 0..2 {
                assert!((c.joint[x][y] - want[x][y]).abs() < 1e-15);
            }
        }
        assert!(c.max_violation() < 1e-12);
        let c = finite_coupling(&[0.5, 0.3, 0.2], &[0.5, 0.2, 0.3], 0).unwrap();
        assert!(c.max_violation() < 1e-12);
        assert!(matches!(finite_coupling(&[0.1, 0.9], &[0.9, 0.1], 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn self_comparison_has_no_violation_at_zero() {
        let r = self_dominance_test(tp(2, 2), 0.3, 0.2, 2000, 5).unwrap();
        assert_eq!(r.rows[0].surv_z, 1.0);
        assert_eq!(r.rows[0].surv_zhat, 1.0);
        assert_eq!(r.rows[0].violation_sigma, 0.0);
    }
}
