//! Small statistics helpers shared by the Monte Carlo routines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    /// Normal confidence interval `mean ± z·se`.
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }

    /// Distance of `x` from the mean in units of the standard error.
    pub fn sigma_from(&self, x: f64) -> f64 {
        if self.se == 0.0 {
            if self.mean == x {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - x).abs() / self.se
        }
    }
}

/// Integer accumulator; sums are exact so reduction order does not matter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntMoments {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl IntMoments {
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x as u128;
        self.sum_sq += (x as u128) * (x as u128);
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n.max(1) as f64;
        let mean = self.sum as f64 / n;
        let var = if self.n > 1 {
            ((self.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / n).sqrt(),
            n: self.n,
        }
    }
}

/// Mean and standard error of a float sample (sequential, ordered sum).
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Estimate { mean: 0.0, se: 0.0, n: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        mean,
        se: (var / n).sqrt(),
        n: xs.len() as u64,
    }
}

/// Binomial proportion `hits/n` with its standard error.
pub fn proportion(hits: u64, n: u64) -> Estimate {
    let nf = n.max(1) as f64;
    let f = hits as f64 / nf;
    Estimate {
        mean: f,
        se: (f * (1.0 - f) / nf).sqrt(),
        n,
    }
}

/// Normalizes a count table into an empirical pmf.
pub fn empirical_pmf<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, &c)| (k.clone(), c as f64 / total.max(1) as f64))
        .collect()
}

/// Total-variation distance `½ Σ |P(x) − Q(x)|`.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut s = 0.0;
    for (k, &pa) in a {
        s += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            s += pb;
        }
    }
    0.5 * s
}

/// Upper bound on the expected TV distance between two empirical laws with
/// `n1` and `n2` samples drawn from the same pmf `p`:
/// `½ Σ_x sqrt(p(x)(1−p(x))·(1/n1 + 1/n2))`.
pub fn tv_noise_bound<K: Ord>(pooled: &BTreeMap<K, f64>, n1: u64, n2: u64) -> f64 {
    let scale = 1.0 / n1.max(1) as f64 + 1.0 / n2.max(1) as f64;
    0.5 * pooled
        .values()
        .map(|&p| (p * (1.0 - p) * scale).sqrt())
        .sum::<f64>()
}
