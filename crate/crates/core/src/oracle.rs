//! Counter-based edge randomness.
//!
//! Every edge of the (infinite) tree gets its uniform variate from a keyed hash
//! of `(trial key, tail fingerprint, edge kind, selector)`. Nothing is stored:
//! re-querying an edge recomputes the same status, and two explorations that
//! share an oracle see the same configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tree::VertexPath;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const LANE_B: u64 = 0xD1B5_4A32_D192_ED03;
const LANE_B_XOR: u64 = 0x5851_F42D_4C95_7F2D;
const SEL_MUL: u64 = 0xA076_1D64_78BD_642F;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 128-bit identity of a vertex, built digit by digit from a root constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    a: u64,
    b: u64,
}

impl Fingerprint {
    /// Root of `T_{d,k}`.
    pub const ROOT: Fingerprint = Fingerprint {
        a: 0x243F_6A88_85A3_08D3,
        b: 0x1319_8A2E_0370_7344,
    };

    /// Root of the auxiliary `(d + d^k)`-ary tree.
    pub const HAT_ROOT: Fingerprint = Fingerprint {
        a: 0xA409_3822_299F_31D0,
        b: 0x082E_FA98_EC4E_6C89,
    };

    #[inline]
    pub fn child(self, digit: u32) -> Fingerprint {
        let x = digit as u64 + 1;
        Fingerprint {
            a: mix64(self.a ^ x.wrapping_mul(GOLDEN)),
            b: mix64(self.b.wrapping_add(x.wrapping_mul(LANE_B)) ^ LANE_B_XOR),
        }
    }

    pub fn descend(self, digits: &[u8]) -> Fingerprint {
        digits.iter().fold(self, |fp, &x| fp.child(x as u32))
    }

    pub fn of_path(path: &VertexPath) -> Fingerprint {
        Self::ROOT.descend(path.digits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Short = 1,
    Long = 2,
    /// Edge of the auxiliary tree, keyed by the child label in `1..=d+d^k`.
    Hat = 3,
}

/// Bernoulli test of a raw 64-bit variate against probability `p`.
#[inline]
pub fn bernoulli(u: u64, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        u < (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Lazily sampled product measure on edges of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeOracle {
    key: u64,
}

impl EdgeOracle {
    pub fn new(master_seed: u64) -> Self {
        Self {
            key: mix64(master_seed ^ 0x6A09_E667_F3BC_C908),
        }
    }

    /// Oracle of trial `trial` under `master_seed`; trials are independent.
    pub fn for_trial(master_seed: u64, trial: u64) -> Self {
        Self {
            key: mix64(mix64(master_seed ^ 0x6A09_E667_F3BC_C908) ^ mix64(trial.wrapping_add(GOLDEN))),
        }
    }

    /// Independent oracle for a named sub-stream (e.g. the second sample of a pair).
    pub fn substream(self, stream: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(stream ^ 0xBB67_AE85_84CA_A73B)),
        }
    }

    #[inline]
    fn tail_state(&self, tail: Fingerprint) -> u64 {
        mix64(mix64(self.key ^ tail.a) ^ tail.b.wrapping_mul(GOLDEN))
    }

    #[inline]
    fn finish(state: u64, kind: EdgeKind, selector: u64) -> u64 {
        mix64(state ^ ((kind as u64) << 58) ^ (selector.wrapping_add(1)).wrapping_mul(SEL_MUL))
    }

    /// Raw uniform of one edge.
    #[inline]
    pub fn uniform(&self, tail: Fingerprint, kind: EdgeKind, selector: u64) -> u64 {
        Self::finish(self.tail_state(tail), kind, selector)
    }

    /// Status of the short edge to child `i ∈ 1..=d`.
    #[inline]
    pub fn short_open(&self, tail: Fingerprint, i: u32, p: f64) -> bool {
        bernoulli(self.uniform(tail, EdgeKind::Short, i as u64), p)
    }

    /// Status of the long edge with lexicographic selector rank `sel`.
    #[inline]
    pub fn long_open(&self, tail: Fingerprint, sel: u64, q: f64) -> bool {
        bernoulli(self.uniform(tail, EdgeKind::Long, sel), q)
    }

    /// Statuses of all edges of one kind out of `tail`, selectors `0..count`.
    pub fn open_selectors(
        &self,
        tail: Fingerprint,
        kind: EdgeKind,
        count: u64,
        prob: f64,
    ) -> impl Iterator<Item = u64> + '_ {
        let state = self.tail_state(tail);
        (0..count).filter(move |&sel| {
            // Short children are keyed 1..=d, long selectors 0..d^k.
            let s = if kind == EdgeKind::Short { sel + 1 } else { sel };
            bernoulli(Self::finish(state, kind, s), prob)
        })
    }
}

/// Per-trial generator for samplers that are not edge-keyed.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}
