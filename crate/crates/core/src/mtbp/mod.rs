//! Generic multi-type branching processes and the comparison transformations
//! used to bracket their survival.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::trial_rng;
use crate::spectral::{CsrMatrix, NonnegOperator};
use crate::stats::{proportion, Estimate};

mod canonical;
mod conditioned;

pub use canonical::{canonical_form, RootedGraph};
pub use conditioned::{conditioned_cluster_sample, local_neighborhood, ConditionedSample};

/// Default cap on the number of individuals in a simulated generation.
pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

/// Largest exact offspring support propagated through [`collapse_i`].
pub const EXACT_SUPPORT_CAP: usize = 10_000;

/// A multiset of types; absent keys count zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Population<T: Ord> {
    counts: BTreeMap<T, u64>,
}

impl<T: Ord> Default for Population<T> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
        }
    }
}

impl<T: Ord + Clone> Population<T> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn singleton(t: T) -> Self {
        Self::with_count(t, 1)
    }

    pub fn with_count(t: T, n: u64) -> Self {
        let mut p = Self::zero();
        p.add(t, n);
        p
    }

    pub fn from_types(types: impl IntoIterator<Item = T>) -> Self {
        let mut p = Self::zero();
        for t in types {
            p.add(t, 1);
        }
        p
    }

    pub fn add(&mut self, t: T, n: u64) {
        if n > 0 {
            *self.counts.entry(t).or_insert(0) += n;
        }
    }

    pub fn extend(&mut self, other: &Population<T>) {
        self.add_scaled(other, 1);
    }

    pub fn add_scaled(&mut self, other: &Population<T>, times: u64) {
        for (t, &n) in &other.counts {
            self.add(t.clone(), n * times);
        }
    }

    pub fn count(&self, t: &T) -> u64 {
        self.counts.get(t).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> {
        self.counts.iter().map(|(t, &n)| (t, n))
    }
}

/// Offspring distribution `p(a, ·)` of a multi-type branching process.
pub trait OffspringLaw<T: Ord + Clone>: Send + Sync {
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T>;

    /// Exact offspring pmf, if it is available and small enough to list.
    fn exact_pmf(&self, _parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        None
    }
}

impl<T: Ord + Clone, L: OffspringLaw<T> + ?Sized> OffspringLaw<T> for Arc<L> {
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        (**self).sample(parent, rng)
    }

    fn exact_pmf(&self, parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        (**self).exact_pmf(parent)
    }
}

impl<T: Ord + Clone, L: OffspringLaw<T> + ?Sized> OffspringLaw<T> for &L {
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        (**self).sample(parent, rng)
    }

    fn exact_pmf(&self, parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        (**self).exact_pmf(parent)
    }
}

/// A law given as a sampling closure.
pub struct FnLaw<F>(pub F);

impl<T, F> OffspringLaw<T> for FnLaw<F>
where
    T: Ord + Clone,
    F: Fn(&T, &mut dyn RngCore) -> Population<T> + Send + Sync,
{
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        (self.0)(parent, rng)
    }
}

/// A law given by explicit finite pmfs per type.
#[derive(Debug, Clone)]
pub struct TableLaw<T: Ord> {
    table: BTreeMap<T, Vec<(Population<T>, f64)>>,
}

impl<T: Ord + Clone + Send + Sync + std::fmt::Debug> TableLaw<T> {
    /// Types without an entry have no offspring.
    pub fn new(table: BTreeMap<T, Vec<(Population<T>, f64)>>) -> Result<Self> {
        for (t, pmf) in &table {
            let mass: f64 = pmf.iter().map(|(_, w)| *w).sum();
            if pmf.iter().any(|(_, w)| *w < 0.0) || (mass - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "offspring pmf of {t:?} must be nonnegative and sum to 1 (sum {mass})"
                )));
            }
        }
        Ok(Self { table })
    }

    pub fn deterministic(rules: impl IntoIterator<Item = (T, Population<T>)>) -> Self {
        Self {
            table: rules.into_iter().map(|(t, p)| (t, vec![(p, 1.0)])).collect(),
        }
    }
}

impl<T: Ord + Clone + Send + Sync> OffspringLaw<T> for TableLaw<T> {
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        let Some(pmf) = self.table.get(parent) else {
            return Population::zero();
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (pop, w) in pmf {
            acc += w;
            if u < acc {
                return pop.clone();
            }
        }
        pmf.last().map(|(p, _)| p.clone()).unwrap_or_default()
    }

    fn exact_pmf(&self, parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        Some(
            self.table
                .get(parent)
                .cloned()
                .unwrap_or_else(|| vec![(Population::zero(), 1.0)]),
        )
    }
}

/// One generation: every individual reproduces independently.
pub fn step<T: Ord + Clone, L: OffspringLaw<T> + ?Sized>(
    pop: &Population<T>,
    law: &L,
    rng: &mut dyn RngCore,
    cap: u64,
) -> Result<Population<T>> {
    let mut next = Population::zero();
    let mut total = 0u64;
    for (t, n) in pop.iter() {
        for _ in 0..n {
            let kids = law.sample(t, rng);
            total += kids.total();
            if total > cap {
                return Err(Error::CapExceeded {
                    what: "population size",
                    value: total,
                    limit: cap,
                });
            }
            next.extend(&kids);
        }
    }
    Ok(next)
}

/// Runs `generations` steps; returns every generation including the start.
pub fn simulate<T: Ord + Clone, L: OffspringLaw<T> + ?Sized>(
    law: &L,
    initial: &Population<T>,
    generations: usize,
    rng: &mut dyn RngCore,
    cap: u64,
) -> Result<Vec<Population<T>>> {
    let mut out = vec![initial.clone()];
    for _ in 0..generations {
        let last = out.last().expect("nonempty");
        if last.is_zero() {
            out.push(Population::zero());
            continue;
        }
        let next = step(last, law, rng, cap)?;
        out.push(next);
    }
    Ok(out)
}

/// Fraction of runs with a nonzero population at generation `generations`.
pub fn survival_mc<T, L>(
    law: &L,
    initial: &Population<T>,
    trials: u64,
    generations: usize,
    seed: u64,
) -> Result<Estimate>
where
    T: Ord + Clone + Send + Sync,
    L: OffspringLaw<T> + ?Sized,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let alive = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut pop = initial.clone();
            for _ in 0..generations {
                if pop.is_zero() {
                    break;
                }
                pop = step(&pop, law, &mut rng, DEFAULT_POPULATION_CAP)?;
            }
            Ok(u64::from(!pop.is_zero()))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(proportion(alive, trials))
}

/// The law in which offspring of types in `I` are immediately replaced by
/// their own offspring (one level).
pub struct Collapsed<T: Ord, L> {
    base: L,
    i: BTreeSet<T>,
}

pub fn collapse_i<T: Ord + Clone, L: OffspringLaw<T>>(law: L, i: BTreeSet<T>) -> Collapsed<T, L> {
    Collapsed { base: law, i }
}

impl<T: Ord + Clone, L> Collapsed<T, L> {
    pub fn collapsed_types(&self) -> &BTreeSet<T> {
        &self.i
    }
}

fn convolve<T: Ord + Clone>(
    a: &[(Population<T>, f64)],
    b: &[(Population<T>, f64)],
) -> Vec<(Population<T>, f64)> {
    let mut out: BTreeMap<Population<T>, f64> = BTreeMap::new();
    for (x, wx) in a {
        for (y, wy) in b {
            let mut z = x.clone();
            z.extend(y);
            *out.entry(z).or_insert(0.0) += wx * wy;
        }
    }
    out.into_iter().collect()
}

impl<T: Ord + Clone + Send + Sync, L: OffspringLaw<T>> OffspringLaw<T> for Collapsed<T, L> {
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        let chi = self.base.sample(parent, rng);
        let mut out = Population::zero();
        for (t, n) in chi.iter() {
            if self.i.contains(t) {
                for _ in 0..n {
                    out.extend(&self.base.sample(t, rng));
                }
            } else {
                out.add(t.clone(), n);
            }
        }
        out
    }

    fn exact_pmf(&self, parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        let first = self.base.exact_pmf(parent)?;
        let mut acc: BTreeMap<Population<T>, f64> = BTreeMap::new();
        let mut cache: BTreeMap<T, Vec<(Population<T>, f64)>> = BTreeMap::new();
        for (chi, w) in first {
            let mut dist = vec![(Population::zero(), 1.0)];
            for (t, n) in chi.iter() {
                if self.i.contains(t) {
                    if !cache.contains_key(t) {
                        cache.insert(t.clone(), self.base.exact_pmf(t)?);
                    }
                    for _ in 0..n {
                        dist = convolve(&dist, &cache[t]);
                        if dist.len() > EXACT_SUPPORT_CAP {
                            return None;
                        }
                    }
                } else {
                    dist = convolve(&dist, &[(Population::with_count(t.clone(), n), 1.0)]);
                }
            }
            for (pop, v) in dist {
                *acc.entry(pop).or_insert(0.0) += w * v;
            }
            if acc.len() > EXACT_SUPPORT_CAP {
                return None;
            }
        }
        Some(acc.into_iter().collect())
    }
}

/// Single-type law: sample `χ` at `a_star` and emit `Σ λ(a)·χ(a)` copies of
/// `a_star`. Only `a_star` reproduces.
pub struct LambdaCollapsed<T, L, F> {
    base: L,
    a_star: T,
    lambda: F,
}

pub fn lambda_collapse<T, L, F>(law: L, a_star: T, lambda: F) -> Result<LambdaCollapsed<T, L, F>>
where
    T: Ord + Clone,
    L: OffspringLaw<T>,
    F: Fn(&T) -> u64 + Send + Sync,
{
    if lambda(&a_star) != 1 {
        return Err(Error::Domain(format!(
            "lambda(a_star) must be 1, got {}",
            lambda(&a_star)
        )));
    }
    Ok(LambdaCollapsed { base: law, a_star, lambda })
}

impl<T, L, F> LambdaCollapsed<T, L, F>
where
    T: Ord + Clone,
    L: OffspringLaw<T>,
    F: Fn(&T) -> u64 + Send + Sync,
{
    pub fn a_star(&self) -> &T {
        &self.a_star
    }

    /// Child count of one `a_star` individual.
    pub fn sample_count(&self, rng: &mut dyn RngCore) -> u64 {
        let chi = self.base.sample(&self.a_star, rng);
        chi.iter().map(|(t, n)| (self.lambda)(t) * n).sum()
    }
}

impl<T, L, F> OffspringLaw<T> for LambdaCollapsed<T, L, F>
where
    T: Ord + Clone + Send + Sync,
    L: OffspringLaw<T>,
    F: Fn(&T) -> u64 + Send + Sync,
{
    fn sample(&self, parent: &T, rng: &mut dyn RngCore) -> Population<T> {
        if *parent != self.a_star {
            return Population::zero();
        }
        Population::with_count(self.a_star.clone(), self.sample_count(rng))
    }

    fn exact_pmf(&self, parent: &T) -> Option<Vec<(Population<T>, f64)>> {
        if *parent != self.a_star {
            return Some(vec![(Population::zero(), 1.0)]);
        }
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (chi, w) in self.base.exact_pmf(&self.a_star)? {
            let n: u64 = chi.iter().map(|(t, n)| (self.lambda)(t) * n).sum();
            *acc.entry(n).or_insert(0.0) += w;
        }
        Some(
            acc.into_iter()
                .map(|(n, w)| (Population::with_count(self.a_star.clone(), n), w))
                .collect(),
        )
    }
}

/// The two comparison sums for a mean matrix `m` (indices are types):
/// `M(a*,a*) + Σ_{a∈I} M(a*,a)M(a,a*)` and
/// `Σ_{a∉I} M(a*,a)λ(a) + Σ_{a∈I} Σ_b M(a*,a)M(a,b)λ(b)`.
pub fn criteria(
    m: &CsrMatrix,
    a_star: usize,
    in_i: impl Fn(usize) -> bool,
    lambda: impl Fn(usize) -> f64,
) -> Result<(f64, f64)> {
    if a_star >= m.dim() {
        return Err(Error::InvalidParameter(format!(
            "a_star {a_star} outside dimension {}",
            m.dim()
        )));
    }
    if in_i(a_star) {
        return Err(Error::InvalidParameter("a_star must not belong to I".into()));
    }
    let mut lhs_a = m.get(a_star, a_star);
    let mut lhs_b = 0.0;
    for (a, w) in m.row(a_star) {
        if in_i(a) {
            lhs_a += w * m.get(a, a_star);
            for (b, v) in m.row(a) {
                lhs_b += w * v * lambda(b);
            }
        } else {
            lhs_b += w * lambda(a);
        }
    }
    Ok((lhs_a, lhs_b))
}

/// Mean offspring counts `Σ_b p(a,·)(b)` from an exact pmf.
pub fn exact_mean<T: Ord + Clone, L: OffspringLaw<T> + ?Sized>(law: &L, parent: &T) -> Option<BTreeMap<T, f64>> {
    let mut out = BTreeMap::new();
    for (pop, w) in law.exact_pmf(parent)? {
        for (t, n) in pop.iter() {
            *out.entry(t.clone()).or_insert(0.0) += w * n as f64;
        }
    }
    Some(out)
}

/// Extinction probability of a single-type law with offspring pmf `pmf[j]`,
/// the smallest fixed point of the generating function.
pub fn single_type_extinction(pmf: &[f64]) -> f64 {
    let g = |s: f64| pmf.iter().rev().fold(0.0, |acc, &w| acc * s + w);
    let mut s = 0.0;
    for _ in 0..1_000_000 {
        let next = g(s);
        if (next - s).abs() < 1e-15 {
            return next;
        }
        s = next;
    }
    s
}

/// Checks that some type has positive probability of more than one child,
/// by sampling each listed type `draws` times.
pub fn audit_nonsingular<T: Ord + Clone, L: OffspringLaw<T> + ?Sized>(
    law: &L,
    types: &[T],
    draws: usize,
    rng: &mut dyn RngCore,
) -> bool {
    types
        .iter()
        .any(|t| (0..draws).any(|_| law.sample(t, rng).total() > 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        trial_rng(3, 0)
    }

    #[test]
    fn step_trivial() {
        let law = TableLaw::deterministic([('a', Population::with_count('b', 2))]);
        let mut r = rng();
        assert!(step(&Population::<char>::zero(), &law, &mut r, 100).unwrap().is_zero());
        let next = step(&Population::with_count('a', 3), &law, &mut r, 100).unwrap();
        assert_eq!(next, Population::with_count('b', 6));
        assert!(step(&Population::with_count('a', 3), &law, &mut r, 5).is_err());
    }

    #[test]
    fn critical_single_type_mean() {
        let law = FnLaw(|_: &u8, r: &mut dyn RngCore| {
            Population::with_count(0u8, if r.random::<bool>() { 2 } else { 0 })
        });
        let mut r = rng();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| step(&Population::singleton(0u8), &law, &mut r, 10).unwrap().total() as f64)
            .collect();
        let e = crate::stats::mean_se(&xs);
        assert!(e.sigma_from(1.0) < 3.0, "{e:?}");
    }

    #[test]
    fn survival_trivial() {
        let half = FnLaw(|_: &u8, r: &mut dyn RngCore| {
            Population::with_count(0u8, r.random_bool(0.5) as u64)
        });
        let e = survival_mc(&half, &Population::singleton(0u8), 2000, 50, 1).unwrap();
        assert!(e.mean < 0.01);
        let two = TableLaw::deterministic([(0u8, Population::with_count(0u8, 2))]);
        let e = survival_mc(&two, &Population::singleton(0u8), 100, 10, 1).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn survival_matches_generating_function() {
        // Bin(2,0.3) + Bin(4,0.15): mean 1.2.
        let (d, p, dk, q) = (2u64, 0.3, 4u64, 0.15);
        let law = FnLaw(move |_: &u8, r: &mut dyn RngCore| {
            let a = (0..d).filter(|_| r.random_bool(p)).count();
            let b = (0..dk).filter(|_| r.random_bool(q)).count();
            Population::with_count(0u8, (a + b) as u64)
        });
        let binom = |n: u64, x: f64| -> Vec<f64> {
            (0..=n)
                .map(|j| {
                    let c = (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
                    c * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32)
                })
                .collect()
        };
        let (pa, pb) = (binom(d, p), binom(dk, q));
        let mut pmf = vec![0.0; (d + dk + 1) as usize];
        for (i, a) in pa.iter().enumerate() {
            for (j, b) in pb.iter().enumerate() {
                pmf[i + j] += a * b;
            }
        }
        let zeta = 1.0 - single_type_extinction(&pmf);
        let e = survival_mc(&law, &Population::singleton(0u8), 20_000, 30, 4).unwrap();
        assert!(e.mean > 5.0 * e.se);
        assert!(e.sigma_from(zeta) < 3.0, "{e:?} vs {zeta}");
    }

    #[test]
    fn collapse_examples() {
        let law = TableLaw::deterministic([
            ('a', Population::singleton('b')),
            ('b', Population::with_count('a', 2)),
        ]);
        let same = collapse_i(&law, BTreeSet::new());
        assert_eq!(same.exact_pmf(&'a'), law.exact_pmf(&'a'));
        let c = collapse_i(&law, ['b'].into());
        assert_eq!(c.exact_pmf(&'a').unwrap(), vec![(Population::with_count('a', 2), 1.0)]);
        let mut r = rng();
        assert_eq!(c.sample(&'a', &mut r), Population::with_count('a', 2));
    }

    #[test]
    fn collapse_pmf_is_convolution() {
        let law = TableLaw::new(
            [
                ('a', vec![(Population::with_count('b', 2), 0.5), (Population::singleton('a'), 0.5)]),
                ('b', vec![(Population::zero(), 0.3), (Population::singleton('a'), 0.7)]),
            ]
            .into(),
        )
        .unwrap();
        let c = collapse_i(&law, ['b'].into());
        let pmf = c.exact_pmf(&'a').unwrap();
        let get = |n: u64| {
            pmf.iter()
                .find(|(p, _)| *p == Population::with_count('a', n) || (n == 0 && p.is_zero()))
                .map(|(_, w)| *w)
                .unwrap_or(0.0)
        };
        assert!((get(0) - 0.5 * 0.09).abs() < 1e-15);
        assert!((get(1) - (0.5 + 0.5 * 0.42)).abs() < 1e-15);
        assert!((get(2) - 0.5 * 0.49).abs() < 1e-15);
        let total: f64 = pmf.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_examples() {
        let dead = TableLaw::deterministic([('s', Population::zero())]);
        let l = lambda_collapse(&dead, 's', |_| 1).unwrap();
        assert_eq!(l.sample_count(&mut rng()), 0);
        let law = TableLaw::deterministic([('s', Population::from_types(['s', 'b']))]);
        let l = lambda_collapse(&law, 's', |t| if *t == 'b' { 3 } else { 1 }).unwrap();
        assert_eq!(l.sample_count(&mut rng()), 4);
        assert!(lambda_collapse(&law, 's', |_| 2).is_err());
    }

    #[test]
    fn lambda_mean_below_one_forces_extinction() {
        // Symmetric two-type law with λ ≡ 1, so survival from either type is equal.
        let law = TableLaw::new(
            [
                ('s', vec![(Population::from_types(['s', 'b']), 0.4), (Population::zero(), 0.6)]),
                ('b', vec![(Population::from_types(['s', 'b']), 0.4), (Population::zero(), 0.6)]),
            ]
            .into(),
        )
        .unwrap();
        let l = lambda_collapse(&law, 's', |_| 1).unwrap();
        let mean: f64 = l.exact_pmf(&'s').unwrap().iter().map(|(p, w)| p.total() as f64 * w).sum();
        assert!(mean < 1.0);
        let e = survival_mc(&law, &Population::singleton('s'), 5000, 100, 2).unwrap();
        assert!(e.mean < 0.01);
    }

    #[test]
    fn criteria_trivial() {
        let zero = CsrMatrix::from_triplets(3, vec![]).unwrap();
        assert_eq!(criteria(&zero, 0, |_| false, |_| 1.0).unwrap(), (0.0, 0.0));
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.2)]).unwrap();
        let (a, b) = criteria(&m, 0, |i| i == 1, |i| 1.0 + i as f64).unwrap();
        assert!((a - 1.2).abs() < 1e-15 && (b - 1.2).abs() < 1e-15);
        assert!(criteria(&m, 0, |i| i == 0, |_| 1.0).is_err());
    }
}
