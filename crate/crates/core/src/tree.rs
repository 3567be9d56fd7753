//! Addressing and combinatorics of the tree `T_{d,k}` and its window slab.
//!
//! Vertices are finite digit sequences over `{1..d}`; the root is the empty
//! sequence. Every vertex has `d` short children one level down and `d^k`
//! long children `k` levels down.
//!
//! The window slab below a vertex is the set of its descendants at relative
//! height `0..k`. Its slots are numbered in breadth-first order with the heap
//! rule `index(o) = 0`, `index(u·j) = d·index(u) + j`, so a window fits in a
//! `u64` bitmask.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest window slot count representable by [`Window`].
pub const MAX_WINDOW_SLOTS: u64 = 64;

/// Largest supported branching number (digits are stored as `u8`).
pub const MAX_BRANCHING: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    d: u32,
    k: u32,
}

impl TreeParams {
    pub fn new(d: u32, k: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d must be >= 2, got {d}")));
        }
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
        }
        if d > MAX_BRANCHING {
            return Err(Error::InvalidParameter(format!(
                "d must be <= {MAX_BRANCHING}, got {d}"
            )));
        }
        let slots = checked_geometric(d as u64, k)?;
        if slots > MAX_WINDOW_SLOTS {
            return Err(Error::CapExceeded {
                what: "window slot count",
                value: slots,
                limit: MAX_WINDOW_SLOTS,
            });
        }
        Ok(Self { d, k })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of long edges out of a vertex, `d^k`.
    pub fn long_fanout(&self) -> u64 {
        (self.d as u64).pow(self.k)
    }

    /// Size of the window slab, `(d^k - 1)/(d - 1)`.
    pub fn window_slots(&self) -> u32 {
        geometric(self.d as u64, self.k) as u32
    }

    /// Slots of height at most `k-2`; these form the low bits of a window.
    pub fn low_slots(&self) -> u32 {
        geometric(self.d as u64, self.k - 1) as u32
    }

    /// Slots of height exactly `k-1`, `d^{k-1}`.
    pub fn top_slots(&self) -> u32 {
        (self.d as u64).pow(self.k - 1) as u32
    }

    /// First slot index at height `h`.
    pub fn level_start(&self, h: u32) -> u64 {
        geometric(self.d as u64, h)
    }
}

/// `(d^n - 1)/(d - 1)`, i.e. `1 + d + ... + d^{n-1}`.
fn geometric(d: u64, n: u32) -> u64 {
    (0..n).map(|i| d.pow(i)).sum()
}

fn checked_geometric(d: u64, n: u32) -> Result<u64> {
    let mut total: u64 = 0;
    let mut term: u64 = 1;
    for i in 0..n {
        total = total.checked_add(term).ok_or(Error::CapExceeded {
            what: "window slot count",
            value: u64::MAX,
            limit: MAX_WINDOW_SLOTS,
        })?;
        if i + 1 < n {
            term = term.checked_mul(d).ok_or(Error::CapExceeded {
                what: "window slot count",
                value: u64::MAX,
                limit: MAX_WINDOW_SLOTS,
            })?;
        }
    }
    Ok(total)
}

pub fn window_slot_count(params: TreeParams) -> u32 {
    params.window_slots()
}

/// A vertex of `T_{d,k}` as its digit sequence (1-based digits).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct VertexPath(Vec<u8>);

impl VertexPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(digits: Vec<u8>, params: TreeParams) -> Result<Self> {
        if let Some(&bad) = digits
            .iter()
            .find(|&&x| x == 0 || x as u32 > params.d())
        {
            return Err(Error::Domain(format!(
                "digit {bad} outside 1..={}",
                params.d()
            )));
        }
        Ok(Self(digits))
    }

    /// Builds a path without range checks; callers guarantee digits in `1..=d`.
    pub(crate) fn from_digits_unchecked(digits: Vec<u8>) -> Self {
        Self(digits)
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Result<Self> {
        if self.0.is_empty() {
            return Err(Error::Domain("the root has no parent".into()));
        }
        Ok(Self(self.0[..self.0.len() - 1].to_vec()))
    }

    /// Ancestor `m` levels above; `ancestor_at(v, h(v))` is the root.
    pub fn ancestor_at(&self, m: usize) -> Result<Self> {
        if m > self.0.len() {
            return Err(Error::Domain(format!(
                "ancestor distance {m} exceeds height {}",
                self.0.len()
            )));
        }
        Ok(Self(self.0[..self.0.len() - m].to_vec()))
    }

    pub fn concat(&self, other: &VertexPath) -> Self {
        let mut digits = Vec::with_capacity(self.0.len() + other.0.len());
        digits.extend_from_slice(&self.0);
        digits.extend_from_slice(&other.0);
        Self(digits)
    }

    pub fn child(&self, digit: u8) -> Self {
        let mut digits = self.0.clone();
        digits.push(digit);
        Self(digits)
    }

    /// Whether `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &VertexPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// The suffix of `self` below `ancestor`, if `ancestor` is a prefix.
    pub fn relative_to(&self, ancestor: &VertexPath) -> Option<VertexPath> {
        if ancestor.is_prefix_of(self) {
            Some(Self(self.0[ancestor.0.len()..].to_vec()))
        } else {
            None
        }
    }
}

impl fmt::Debug for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "o");
        }
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Slot of `u` in the window slab below the root.
pub fn slot_index(u: &VertexPath, params: TreeParams) -> Result<u32> {
    if u.height() >= params.k() as usize {
        return Err(Error::OutOfSlab(u.to_string()));
    }
    let d = params.d() as u64;
    let mut idx = 0u64;
    for &x in u.digits() {
        if x == 0 || x as u32 > params.d() {
            return Err(Error::Domain(format!("digit {x} outside 1..={}", params.d())));
        }
        idx = d * idx + x as u64;
    }
    Ok(idx as u32)
}

/// Inverse of [`slot_index`].
pub fn slot_vertex(i: u32, params: TreeParams) -> Result<VertexPath> {
    if i >= params.window_slots() {
        return Err(Error::OutOfSlab(format!("slot {i}")));
    }
    let d = params.d() as u64;
    let mut idx = i as u64;
    let mut rev = Vec::new();
    while idx > 0 {
        let digit = (idx - 1) % d + 1;
        rev.push(digit as u8);
        idx = (idx - digit) / d;
    }
    rev.reverse();
    Ok(VertexPath(rev))
}

/// Height of slot `i`.
pub fn slot_height(i: u32, params: TreeParams) -> u32 {
    let mut h = 0;
    while params.level_start(h + 1) <= i as u64 {
        h += 1;
    }
    h
}

/// Subset of the window slab, slot `i` in bit `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Window(pub u64);

impl Window {
    pub const EMPTY: Window = Window(0);
    pub const ROOT: Window = Window(1);

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains_slot(self, i: u32) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    pub fn contains_root(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn with_slot(self, i: u32) -> Self {
        Window(self.0 | 1 << i)
    }

    pub fn slots(self) -> impl Iterator<Item = u32> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn from_vertices<'a>(
        vertices: impl IntoIterator<Item = &'a VertexPath>,
        params: TreeParams,
    ) -> Result<Self> {
        let mut w = Window::EMPTY;
        for v in vertices {
            w = w.with_slot(slot_index(v, params)?);
        }
        Ok(w)
    }

    pub fn vertices(self, params: TreeParams) -> Vec<VertexPath> {
        self.slots()
            .map(|i| slot_vertex(i, params).expect("slot within window"))
            .collect()
    }

    /// Maximum slot height, `h(A)`; `None` for the empty window.
    pub fn height(self, params: TreeParams) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        Some(slot_height(63 - self.0.leading_zeros(), params))
    }

    /// Validates that only the low `W_ct` bits are set.
    pub fn check(self, params: TreeParams) -> Result<Self> {
        let slots = params.window_slots();
        if slots < 64 && self.0 >> slots != 0 {
            return Err(Error::Domain(format!(
                "window {:#x} has bits beyond slot {}",
                self.0,
                slots - 1
            )));
        }
        Ok(self)
    }
}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Window({:#x})", self.0)
    }
}

impl fmt::LowerHex for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

/// Lexicographic rank of a long-edge selector `u ∈ [d]^k`.
pub fn long_selector_index(u: &[u8], params: TreeParams) -> u64 {
    let d = params.d() as u64;
    u.iter().fold(0u64, |acc, &x| acc * d + (x as u64 - 1))
}

/// Inverse of [`long_selector_index`].
pub fn long_selector_digits(mut idx: u64, params: TreeParams) -> Vec<u8> {
    let d = params.d() as u64;
    let mut out = vec![0u8; params.k() as usize];
    for slot in out.iter_mut().rev() {
        *slot = (idx % d + 1) as u8;
        idx /= d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(d: u32, k: u32) -> TreeParams {
        TreeParams::new(d, k).unwrap()
    }

    fn path(d: &[u8]) -> VertexPath {
        VertexPath(d.to_vec())
    }

    #[test]
    fn slot_counts() {
        assert_eq!(window_slot_count(tp(2, 2)), 3);
        assert_eq!(window_slot_count(tp(2, 3)), 7);
        assert_eq!(window_slot_count(tp(3, 2)), 4);
        assert_eq!(tp(2, 4).low_slots(), 7);
        assert_eq!(tp(2, 4).top_slots(), 8);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(TreeParams::new(1, 3).is_err());
        assert!(TreeParams::new(2, 1).is_err());
        // 2^7 - 1 = 127 slots do not fit a u64 window.
        assert!(matches!(
            TreeParams::new(2, 7),
            Err(Error::CapExceeded { .. })
        ));
        assert!(TreeParams::new(2, 6).is_ok());
    }

    #[test]
    fn heap_indexing() {
        let p = tp(2, 3);
        assert_eq!(slot_index(&VertexPath::root(), p).unwrap(), 0);
        assert_eq!(slot_index(&path(&[1, 1]), p).unwrap(), 3);
        assert_eq!(slot_vertex(2, p).unwrap(), path(&[2]));
        assert!(matches!(
            slot_index(&path(&[1, 1, 1]), p),
            Err(Error::OutOfSlab(_))
        ));
    }

    #[test]
    fn path_algebra() {
        assert_eq!(path(&[1, 2]).parent().unwrap(), path(&[1]));
        let c = path(&[1]).concat(&path(&[2, 2]));
        assert_eq!(c, path(&[1, 2, 2]));
        assert_eq!(c.height(), 3);
        assert_eq!(path(&[1, 2, 1]).ancestor_at(3).unwrap(), VertexPath::root());
        assert!(path(&[1]).ancestor_at(2).is_err());
        assert!(VertexPath::root().parent().is_err());
    }

    #[test]
    fn slot_bijection_exhaustive() {
        for (d, k) in [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2), (2, 5), (3, 4)] {
            let p = tp(d, k);
            for i in 0..p.window_slots() {
                let v = slot_vertex(i, p).unwrap();
                assert_eq!(slot_index(&v, p).unwrap(), i);
                assert_eq!(slot_height(i, p) as usize, v.height());
            }
        }
    }

    #[test]
    fn breadth_first_heights() {
        let p = tp(3, 3);
        let heights: Vec<u32> = (0..p.window_slots()).map(|i| slot_height(i, p)).collect();
        assert!(heights.windows(2).all(|w| w[0] <= w[1]));
        for h in 0..3 {
            let count = heights.iter().filter(|&&x| x == h).count();
            assert_eq!(count, 3usize.pow(h));
        }
    }

    #[test]
    fn window_height_and_members() {
        let p = tp(2, 3);
        let w = Window::from_vertices(&[VertexPath::root(), path(&[2, 1])], p).unwrap();
        assert_eq!(w.height(p), Some(2));
        assert_eq!(w.len(), 2);
        assert_eq!(w.vertices(p), vec![VertexPath::root(), path(&[2, 1])]);
        assert!(Window(1 << 7).check(p).is_err());
    }

    #[test]
    fn selector_roundtrip() {
        let p = tp(3, 2);
        for idx in 0..9 {
            let u = long_selector_digits(idx, p);
            assert_eq!(long_selector_index(&u, p), idx);
        }
        assert_eq!(long_selector_digits(0, p), vec![1, 1]);
        assert_eq!(long_selector_digits(8, p), vec![3, 3]);
    }

    proptest! {
        #[test]
        fn concat_height_additive(a in proptest::collection::vec(1u8..=3, 0..20),
                                  b in proptest::collection::vec(1u8..=3, 0..20)) {
            let u = path(&a);
            let v = path(&b);
            prop_assert_eq!(u.concat(&v).height(), u.height() + v.height());
            prop_assert_eq!(u.concat(&v).relative_to(&u), Some(v));
        }
    }
}
