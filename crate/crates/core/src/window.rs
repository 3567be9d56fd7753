//! The window chain: every vertex `v` of the cluster carries the trace of the
//! cluster on its window slab, and the children's traces depend only on the
//! parent's trace and fresh edges.
//!
//! For child `v·i` of a vertex with trace `A`:
//! - a slot `u` of height `≤ k−2` is set iff `i·u ∈ A` (already decided);
//! - a top slot `u` (height `k−1`) is a new vertex with two incoming edges,
//!   the short one from `i·parent(u)` and the long one from `v`, so it is set
//!   independently with probability `1 − (1 − p·1{i·parent(u)∈A})(1 − q·1{o∈A})`.
//!
//! Windows with bits only in the low part are the "low windows" `L`; a child
//! window is `L | T << W_low` with `T` the top bits.

use std::io::Write;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtbp::{OffspringLaw, Population, DEFAULT_POPULATION_CAP};
use crate::percolation::PercParams;
use crate::spectral::{CsrMatrix, NonnegOperator};
use crate::tree::{slot_index, slot_vertex, TreeParams, VertexPath, Window};

/// Largest window slot count for which the chain is enumerated.
pub const WINDOW_ENUM_CAP: u32 = 20;

/// Largest number of top slots for which a child pmf is listed.
pub const TOP_ENUM_CAP: u32 = 16;

fn check_enum_cap(params: TreeParams) -> Result<()> {
    let w = params.window_slots();
    if w > WINDOW_ENUM_CAP {
        return Err(Error::CapExceeded {
            what: "window slot count for exact enumeration",
            value: w as u64,
            limit: WINDOW_ENUM_CAP as u64,
        });
    }
    Ok(())
}

/// A pmf over windows with the empty outcome kept separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPmf {
    pub masses: Vec<(Window, f64)>,
    pub empty: f64,
}

impl WindowPmf {
    pub fn total(&self) -> f64 {
        self.empty + self.masses.iter().map(|(_, m)| m).sum::<f64>()
    }

    pub fn get(&self, w: Window) -> f64 {
        if w.is_empty() {
            return self.empty;
        }
        self.masses
            .iter()
            .find(|(x, _)| *x == w)
            .map(|(_, m)| *m)
            .unwrap_or(0.0)
    }
}

/// Slot bookkeeping shared by every `(p, q)`: for each child `i`, where each
/// low slot of the child window sits in the parent window, and the parent
/// slot of each top slot.
#[derive(Debug, Clone)]
pub struct WindowGeometry {
    params: TreeParams,
    /// `shift[i-1][u]` = slot of `i·u` for low slots `u`.
    shift: Vec<Vec<u32>>,
    /// Parent slot of each top slot, as an offset into level `k−2`.
    top_parent: Vec<u32>,
}

impl WindowGeometry {
    pub fn new(params: TreeParams) -> Result<Self> {
        let w_low = params.low_slots();
        let d = params.d();
        let mut shift = Vec::with_capacity(d as usize);
        for i in 1..=d {
            let row = (0..w_low)
                .map(|u| {
                    let mut digits = vec![i as u8];
                    digits.extend_from_slice(slot_vertex(u, params)?.digits());
                    slot_index(&VertexPath::from_digits_unchecked(digits), params)
                })
                .collect::<Result<Vec<_>>>()?;
            shift.push(row);
        }
        let parent_start = params.level_start(params.k() - 2) as u32;
        let top_parent = (0..params.top_slots())
            .map(|t| {
                let v = slot_vertex(w_low + t, params)?;
                Ok(slot_index(&v.parent()?, params)? - parent_start)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            shift,
            top_parent,
        })
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    /// Deterministic low part of child `i` (1-based).
    #[inline]
    pub fn child_low(&self, a: Window, i: u32) -> u64 {
        let mut l = 0u64;
        for (u, &src) in self.shift[i as usize - 1].iter().enumerate() {
            l |= (a.0 >> src & 1) << u;
        }
        l
    }

    /// Bits of level `k−2` inside a low window.
    #[inline]
    fn parent_bits(&self, low: u64) -> u64 {
        let start = self.params.level_start(self.params.k() - 2);
        low >> start
    }

    /// Activation probabilities of the top slots.
    pub fn top_probs(&self, low: u64, root_in_parent: bool, perc: PercParams) -> Vec<f64> {
        let pb = self.parent_bits(low);
        let b = if root_in_parent { perc.q() } else { 0.0 };
        self.top_parent
            .iter()
            .map(|&j| {
                let a = if pb >> j & 1 == 1 { perc.p() } else { 0.0 };
                1.0 - (1.0 - a) * (1.0 - b)
            })
            .collect()
    }
}

/// One-step law of child `i` of a vertex with window `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTransition {
    pub child: u32,
    pub low: Window,
    pub top_probs: Vec<f64>,
}

impl WindowTransition {
    pub fn new(geo: &WindowGeometry, a: Window, i: u32, perc: PercParams) -> Result<Self> {
        let params = geo.params;
        a.check(params)?;
        if a.is_empty() {
            return Err(Error::Domain("the parent window must be nonempty".into()));
        }
        if i == 0 || i > params.d() {
            return Err(Error::InvalidParameter(format!("child index {i} outside 1..={}", params.d())));
        }
        let low = geo.child_low(a, i);
        Ok(Self {
            child: i,
            low: Window(low),
            top_probs: geo.top_probs(low, a.contains_root(), perc),
        })
    }

    /// Probability of top pattern `t` (bit `j` = top slot `j`).
    pub fn top_prob(&self, t: u64) -> f64 {
        self.top_probs
            .iter()
            .enumerate()
            .map(|(j, &pi)| if t >> j & 1 == 1 { pi } else { 1.0 - pi })
            .product()
    }

    pub fn sample(&self, w_low: u32, rng: &mut dyn RngCore) -> Window {
        let mut w = self.low.0;
        for (j, &pi) in self.top_probs.iter().enumerate() {
            if pi > 0.0 && (pi >= 1.0 || rng.random::<f64>() < pi) {
                w |= 1 << (w_low + j as u32);
            }
        }
        Window(w)
    }
}

/// Law of the cluster's trace on the root window: short-edge subtrees of the
/// slab containing `o`.
pub fn initial_window_dist(params: TreeParams, p: f64) -> Result<WindowPmf> {
    check_enum_cap(params)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0,1], got {p}")));
    }
    let w = params.window_slots();
    let d = params.d();
    let parent = |s: u32| (s - 1) / d;
    let mut masses = Vec::new();
    for bits in (1u64..1 << w).step_by(2) {
        let a = Window(bits);
        if a.slots().skip(1).any(|s| !a.contains_slot(parent(s))) {
            continue;
        }
        // Slab slots outside A whose parent is in A: their short edge is closed.
        let frontier = (1..w).filter(|&s| !a.contains_slot(s) && a.contains_slot(parent(s))).count();
        let m = p.powi(a.len() as i32 - 1) * (1.0 - p).powi(frontier as i32);
        if m > 0.0 {
            masses.push((a, m));
        }
    }
    Ok(WindowPmf { masses, empty: 0.0 })
}

/// Samples the root window by percolating short edges inside the slab.
pub fn sample_initial_window(params: TreeParams, p: f64, rng: &mut dyn RngCore) -> Window {
    let d = params.d();
    let mut a = Window::ROOT;
    for s in 1..params.window_slots() {
        if a.contains_slot((s - 1) / d) && rng.random::<f64>() < p {
            a = a.with_slot(s);
        }
    }
    a
}

pub fn child_window_dist(a: Window, i: u32, perc: PercParams, params: TreeParams) -> Result<WindowPmf> {
    if params.top_slots() > TOP_ENUM_CAP {
        return Err(Error::CapExceeded {
            what: "top slots for pmf enumeration (use WindowLaw::sample)",
            value: params.top_slots() as u64,
            limit: TOP_ENUM_CAP as u64,
        });
    }
    let geo = WindowGeometry::new(params)?;
    let tr = WindowTransition::new(&geo, a, i, perc)?;
    Ok(transition_pmf(&tr, params.low_slots()))
}

fn transition_pmf(tr: &WindowTransition, w_low: u32) -> WindowPmf {
    let top = tr.top_probs.len() as u32;
    let mut masses = Vec::new();
    let mut empty = 0.0;
    for t in 0..1u64 << top {
        let m = tr.top_prob(t);
        if m == 0.0 {
            continue;
        }
        let w = Window(tr.low.0 | t << w_low);
        if w.is_empty() {
            empty += m;
        } else {
            masses.push((w, m));
        }
    }
    masses.sort_by_key(|(w, _)| *w);
    WindowPmf { masses, empty }
}

/// Exact mean offspring matrix over nonempty windows; index = window − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOffspringMatrix {
    params: TreeParams,
    perc: PercParams,
    csr: CsrMatrix,
}

pub fn build_m(params: TreeParams, perc: PercParams) -> Result<SparseOffspringMatrix> {
    check_enum_cap(params)?;
    let geo = WindowGeometry::new(params)?;
    let w_low = params.low_slots();
    let n = (1usize << params.window_slots()) - 1;
    let mut rows = Vec::with_capacity(n);
    for bits in 1..=n as u64 {
        let a = Window(bits);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 1..=params.d() {
            let tr = WindowTransition::new(&geo, a, i, perc)?;
            for (b, m) in transition_pmf(&tr, w_low).masses {
                row.push((b.0 as usize - 1, m));
            }
        }
        rows.push(row);
    }
    Ok(SparseOffspringMatrix {
        params,
        perc,
        csr: CsrMatrix::from_rows(rows)?,
    })
}

impl SparseOffspringMatrix {
    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn perc(&self) -> PercParams {
        self.perc
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    pub fn get(&self, a: Window, b: Window) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        self.csr.get(a.0 as usize - 1, b.0 as usize - 1)
    }

    pub fn row(&self, a: Window) -> impl Iterator<Item = (Window, f64)> + '_ {
        self.csr.row(a.0 as usize - 1).map(|(j, v)| (Window(j as u64 + 1), v))
    }

    /// CSV rows `row_window_hex,col_window_hex,rate`, row-major.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "row_window_hex,col_window_hex,rate")?;
        for i in 0..self.csr.dim() {
            for (j, v) in self.csr.row(i) {
                writeln!(out, "{:x},{:x},{:e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

impl NonnegOperator for SparseOffspringMatrix {
    fn dim(&self) -> usize {
        self.csr.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.csr.apply(x, y)
    }
    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        self.csr.apply_left(x, y)
    }
}

/// Parameter-independent tables of the matrix-free operator.
#[derive(Debug, Clone)]
pub struct WindowSpace {
    geo: WindowGeometry,
    /// `child_low[i-1][A]` for every window `A`.
    child_low: Vec<Vec<u32>>,
}

impl WindowSpace {
    pub fn new(params: TreeParams) -> Result<Self> {
        check_enum_cap(params)?;
        let geo = WindowGeometry::new(params)?;
        let size = 1usize << params.window_slots();
        let child_low = (1..=params.d())
            .map(|i| (0..size as u64).map(|a| geo.child_low(Window(a), i) as u32).collect())
            .collect();
        Ok(Self { geo, child_low })
    }

    pub fn params(&self) -> TreeParams {
        self.geo.params
    }

    pub fn geometry(&self) -> &WindowGeometry {
        &self.geo
    }

    /// Dimension of the type space, `2^{W_ct} − 1`.
    pub fn dim(&self) -> usize {
        (1usize << self.params().window_slots()) - 1
    }

    pub fn operator(&self, perc: PercParams) -> WindowOperator<'_> {
        let params = self.params();
        let top = params.top_slots();
        let parent_count = params.d().pow(params.k() - 2);
        // probs[((pb << 1) | b) << top | t]
        let mut probs = vec![0.0; (1usize << (parent_count + 1)) << top];
        for pb in 0..1u64 << parent_count {
            let low = pb << self.geo.params.level_start(params.k() - 2);
            for b in 0..2u64 {
                let tr = WindowTransition {
                    child: 1,
                    low: Window(low),
                    top_probs: self.geo.top_probs(low, b == 1, perc),
                };
                for t in 0..1u64 << top {
                    probs[(((pb << 1) | b) << top | t) as usize] = tr.top_prob(t);
                }
            }
        }
        WindowOperator {
            space: self,
            perc,
            probs,
        }
    }
}

/// Matrix-free mean offspring operator: `(Mv)(A) = Σ_i F(L_i(A), o∈A)` with
/// `F(L, b) = Σ_T P(T | L, b)·v(L | T<<W_low)`.
pub struct WindowOperator<'a> {
    space: &'a WindowSpace,
    perc: PercParams,
    probs: Vec<f64>,
}

impl WindowOperator<'_> {
    pub fn perc(&self) -> PercParams {
        self.perc
    }

    #[inline]
    fn prob_row(&self, low: u64, b: u64) -> &[f64] {
        let params = self.space.params();
        let top = params.top_slots();
        let pb = low >> params.level_start(params.k() - 2);
        let start = (((pb << 1) | b) << top) as usize;
        &self.probs[start..start + (1 << top)]
    }
}

impl NonnegOperator for WindowOperator<'_> {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let params = self.space.params();
        let w_low = params.low_slots();
        let n_low = 1u64 << w_low;
        let top = params.top_slots();
        // f[b * n_low + L]
        let mut f = vec![0.0; 2 * n_low as usize];
        for b in 0..2u64 {
            for low in 0..n_low {
                let row = self.prob_row(low, b);
                let mut s = 0.0;
                for t in 0..1u64 << top {
                    let w = low | t << w_low;
                    if w != 0 && row[t as usize] != 0.0 {
                        s += row[t as usize] * x[w as usize - 1];
                    }
                }
                f[(b * n_low + low) as usize] = s;
            }
        }
        for (idx, yi) in y.iter_mut().enumerate() {
            let a = idx + 1;
            let b = (a & 1) as u64;
            *yi = self
                .space
                .child_low
                .iter()
                .map(|cl| f[(b * n_low + cl[a] as u64) as usize])
                .sum();
        }
    }

    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        let params = self.space.params();
        let w_low = params.low_slots();
        let n_low = 1u64 << w_low;
        let top = params.top_slots();
        let mut g = vec![0.0; 2 * n_low as usize];
        for (idx, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let a = idx + 1;
            let b = (a & 1) as u64;
            for cl in &self.space.child_low {
                g[(b * n_low + cl[a] as u64) as usize] += xi;
            }
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..2u64 {
            for low in 0..n_low {
                let gv = g[(b * n_low + low) as usize];
                if gv == 0.0 {
                    continue;
                }
                let row = self.prob_row(low, b);
                for t in 0..1u64 << top {
                    let w = low | t << w_low;
                    if w != 0 {
                        y[w as usize - 1] += gv * row[t as usize];
                    }
                }
            }
        }
    }
}

/// Offspring law of the window chain.
#[derive(Debug, Clone)]
pub struct WindowLaw {
    geo: WindowGeometry,
    perc: PercParams,
}

impl WindowLaw {
    pub fn new(params: TreeParams, perc: PercParams) -> Result<Self> {
        Ok(Self {
            geo: WindowGeometry::new(params)?,
            perc,
        })
    }

    pub fn transition(&self, a: Window, i: u32) -> Result<WindowTransition> {
        WindowTransition::new(&self.geo, a, i, self.perc)
    }
}

impl OffspringLaw<Window> for WindowLaw {
    fn sample(&self, parent: &Window, rng: &mut dyn RngCore) -> Population<Window> {
        let w_low = self.geo.params.low_slots();
        let mut out = Population::zero();
        for i in 1..=self.geo.params.d() {
            let tr = self.transition(*parent, i).expect("valid parent window");
            let w = tr.sample(w_low, rng);
            if !w.is_empty() {
                out.add(w, 1);
            }
        }
        out
    }

    /// Listed when the joint support over the `d` children is small.
    fn exact_pmf(&self, parent: &Window) -> Option<Vec<(Population<Window>, f64)>> {
        let params = self.geo.params;
        if params.top_slots() * params.d() > 12 {
            return None;
        }
        let w_low = params.low_slots();
        let mut dist: Vec<(Population<Window>, f64)> = vec![(Population::zero(), 1.0)];
        for i in 1..=params.d() {
            let pmf = transition_pmf(&self.transition(*parent, i).ok()?, w_low);
            let mut outcomes: Vec<(Option<Window>, f64)> = pmf.masses.iter().map(|&(w, m)| (Some(w), m)).collect();
            if pmf.empty > 0.0 {
                outcomes.push((None, pmf.empty));
            }
            let mut next = std::collections::BTreeMap::new();
            for (pop, w) in &dist {
                for &(c, m) in &outcomes {
                    let mut p2 = pop.clone();
                    if let Some(c) = c {
                        p2.add(c, 1);
                    }
                    *next.entry(p2).or_insert(0.0) += w * m;
                }
            }
            dist = next.into_iter().collect();
        }
        Some(dist)
    }
}

/// Starting type of a chain run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainStart {
    /// A draw from [`initial_window_dist`].
    Initial,
    Fixed(Window),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub populations: Vec<Population<Window>>,
    /// `X_n = Σ_B W_n(B)·1{o ∈ B}`.
    pub x: Vec<u64>,
}

pub fn simulate_window_chain(
    law: &WindowLaw,
    rng: &mut dyn RngCore,
    generations: usize,
    start: ChainStart,
) -> Result<ChainRun> {
    let params = law.geo.params;
    let w0 = match start {
        ChainStart::Initial => sample_initial_window(params, law.perc.p(), rng),
        ChainStart::Fixed(w) => {
            w.check(params)?;
            if w.is_empty() {
                return Err(Error::Domain("the initial window must be nonempty".into()));
            }
            w
        }
    };
    let populations = crate::mtbp::simulate(law, &Population::singleton(w0), generations, rng, DEFAULT_POPULATION_CAP)?;
    let x = populations
        .iter()
        .map(|pop| pop.iter().filter(|(w, _)| w.contains_root()).map(|(_, n)| n).sum())
        .collect();
    Ok(ChainRun { populations, x })
}
