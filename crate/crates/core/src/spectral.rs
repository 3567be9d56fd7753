//! Perron–Frobenius eigenvalue and eigenvectors of nonnegative operators.
//!
//! Power iteration runs on `M + I`, which is aperiodic whenever `M` is
//! irreducible, so periodic chains still converge. Convergence is judged by
//! the eigen-residual `‖Mx − ρ̂x‖∞ / ‖x‖∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square nonnegative linear operator.
pub trait NonnegOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = M x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = xᵀ M`.
    fn apply_left(&self, x: &[f64], y: &mut [f64]);
}

impl<T: NonnegOperator + ?Sized> NonnegOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_left(x, y)
    }
}

fn check_entry(i: usize, j: usize, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("entry ({i},{j}) = {v} is not a finite nonnegative number")));
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "dense matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for (idx, &v) in data.iter().enumerate() {
            check_entry(idx / n.max(1), idx % n.max(1), v)?;
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        check_entry(i, j, v)?;
        self.data[i * self.n + j] = v;
        Ok(())
    }
}

impl NonnegOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (yj, a) in y.iter_mut().zip(&self.data[i * self.n..(i + 1) * self.n]) {
                    *yj += xi * a;
                }
            }
        }
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &t {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!("entry ({i},{j}) outside dimension {n}")));
            }
            check_entry(i, j, v)?;
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *val.last_mut().expect("previous entry") += v;
            } else {
                col.push(j);
                val.push(v);
                rows.push(i);
                last = Some((i, j));
            }
        }
        let keep: Vec<bool> = val.iter().map(|&v| v != 0.0).collect();
        let mut c2 = Vec::with_capacity(col.len());
        let mut v2 = Vec::with_capacity(val.len());
        for idx in 0..col.len() {
            if keep[idx] {
                row_ptr[rows[idx] + 1] += 1;
                c2.push(col[idx]);
                v2.push(val[idx]);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col: c2,
            val: v2,
        })
    }

    /// Builds from per-row sorted entry lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let t = rows
            .into_iter()
            .enumerate()
            .flat_map(|(i, r)| r.into_iter().map(move |(j, v)| (i, j, v)))
            .collect();
        Self::from_triplets(n, t)
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(pos) => self.val[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                data[i * self.n + j] = v;
            }
        }
        DenseMatrix { n: self.n, data }
    }

    /// Entrywise sum.
    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n != other.n {
            return Err(Error::InvalidParameter("dimension mismatch".into()));
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.n {
                t.extend(m.row(i).map(|(j, v)| (i, j, v)));
            }
        }
        Self::from_triplets(self.n, t)
    }
}

impl NonnegOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += xi * v;
                }
            }
        }
    }
}

/// `A + B` without materializing.
pub struct SumOperator<A, B>(pub A, pub B);

impl<A: NonnegOperator, B: NonnegOperator> NonnegOperator for SumOperator<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.0.apply(x, y);
        self.1.apply(x, &mut tmp);
        y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }

    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.0.apply_left(x, y);
        self.1.apply_left(x, &mut tmp);
        y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
        }
    }
}

/// Perron root with left/right eigenvectors; `Σμ = 1` and `Σμν = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub rho: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Shifted power iteration in one orientation. Returns the ℓ1-normalized
/// vector, its eigenvalue estimate, relative residual and iteration count.
fn power_side(
    dim: usize,
    mut mult: impl FnMut(&[f64], &mut [f64]),
    init: Option<&[f64]>,
    opts: PfOptions,
) -> Result<(Vec<f64>, f64, f64, usize)> {
    let mut x: Vec<f64> = match init {
        Some(v) if v.len() == dim && v.iter().all(|a| *a >= 0.0) && v.iter().sum::<f64>() > 0.0 => {
            // Keep every coordinate positive so no component is lost.
            let s: f64 = v.iter().sum();
            let floor = 1e-3 / dim as f64;
            v.iter().map(|a| a / s + floor).collect()
        }
        _ => vec![1.0; dim],
    };
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|a| *a /= s);
    let mut y = vec![0.0; dim];
    let mut last = f64::INFINITY;
    for it in 0..opts.max_iter {
        mult(&x, &mut y);
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let rho = sy / sx;
        let nx = norm_inf(&x);
        let res = x
            .iter()
            .zip(&y)
            .fold(0.0f64, |m, (a, b)| m.max((b - rho * a).abs()))
            / nx;
        last = res;
        if res <= opts.tol * rho.max(1.0) {
            return Ok((x, rho, res, it + 1));
        }
        // x ← (M + I)x, normalized.
        let s = sy + sx;
        if s == 0.0 || !s.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it + 1,
                residual: f64::NAN,
            });
        }
        for (a, b) in x.iter_mut().zip(&y) {
            *a = (*a + b) / s;
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: last,
    })
}

pub fn pf_eigen<M: NonnegOperator + ?Sized>(m: &M, opts: PfOptions) -> Result<SpectralResult> {
    pf_eigen_warm(m, opts, None, None)
}

/// [`pf_eigen`] started from previous eigenvectors (e.g. along a bisection).
pub fn pf_eigen_warm<M: NonnegOperator + ?Sized>(
    m: &M,
    opts: PfOptions,
    mu0: Option<&[f64]>,
    nu0: Option<&[f64]>,
) -> Result<SpectralResult> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter("tol must be > 0 and max_iter >= 1".into()));
    }
    let (nu, _, res_r, it_r) = power_side(n, |x, y| m.apply(x, y), nu0, opts)?;
    let (mut mu, _, res_l, it_l) = power_side(n, |x, y| m.apply_left(x, y), mu0, opts)?;
    let mut mnu = vec![0.0; n];
    m.apply(&nu, &mut mnu);
    let num: f64 = mu.iter().zip(&mnu).map(|(a, b)| a * b).sum();
    let den: f64 = mu.iter().zip(&nu).map(|(a, b)| a * b).sum();
    let (rho, nu) = if den > 0.0 {
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|a| *a /= s);
        let den = den / s;
        (num / s / den, nu.iter().map(|a| a / den).collect())
    } else {
        // Left and right supports are disjoint (reducible case); fall back to
        // the right estimate.
        let sx: f64 = nu.iter().sum();
        (mnu.iter().sum::<f64>() / sx, nu)
    };
    Ok(SpectralResult {
        rho,
        mu,
        nu,
        residual: res_r.max(res_l),
        iterations: it_r.max(it_l),
    })
}

/// Exact `ρ(M+E)` against the first-order estimate
/// `ρ(M) + μEν / μν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCheck {
    pub rho_before: f64,
    pub rho_after: f64,
    pub first_order_estimate: f64,
}

pub fn pf_perturbation_check<A: NonnegOperator, B: NonnegOperator>(
    m: &A,
    e: &B,
    opts: PfOptions,
) -> Result<PerturbationCheck> {
    if m.dim() != e.dim() {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let before = pf_eigen(m, opts)?;
    let after = pf_eigen(&SumOperator(m, e), opts)?;
    let mut enu = vec![0.0; m.dim()];
    e.apply(&before.nu, &mut enu);
    let num: f64 = before.mu.iter().zip(&enu).map(|(a, b)| a * b).sum();
    let den: f64 = before.mu.iter().zip(&before.nu).map(|(a, b)| a * b).sum();
    Ok(PerturbationCheck {
        rho_before: before.rho,
        rho_after: after.rho,
        first_order_estimate: before.rho + num / den,
    })
}
