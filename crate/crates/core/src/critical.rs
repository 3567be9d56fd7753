//! The critical curve `q_c(p)`: the unique `q` where the Perron root of the
//! window chain's mean matrix crosses 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::percolation::{s_star, PercParams};
use crate::spectral::{pf_eigen_warm, PfOptions, SpectralResult};
use crate::tree::TreeParams;
use crate::window::WindowSpace;

/// Default bisection width in `q`.
pub const DEFAULT_QC_TOL: f64 = 1e-10;

/// `ρ ≥ 1 − RHO_SLACK` counts as supercritical-or-critical in the bisection,
/// so the `p = 0` endpoint `ρ(d^{-k}) = 1` brackets correctly.
pub const RHO_SLACK: f64 = 1e-12;

/// Lower edge of the early-exit region `p > 1/d`.
pub const SHORT_CRITICAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    pub q_c: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub rho_residual: f64,
    pub bisection_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub k: u32,
    pub q_c: f64,
    pub s_k: f64,
    pub s_star: f64,
    pub residual: f64,
}

/// `max(0, (1 − dp)/d^k)`, the critical `q` of the binomial-sum branching process.
pub fn lower_bound(p: f64, params: TreeParams) -> f64 {
    ((1.0 - params.d() as f64 * p) / params.long_fanout() as f64).max(0.0)
}

/// Evaluates `ρ(p, q)` repeatedly for one `(d, k)`, warm-starting each
/// eigen-solve from the previous eigenvectors.
pub struct RhoSolver {
    space: WindowSpace,
    opts: PfOptions,
    last: Option<SpectralResult>,
}

impl RhoSolver {
    pub fn new(params: TreeParams) -> Result<Self> {
        Ok(Self {
            space: WindowSpace::new(params)?,
            opts: PfOptions::default(),
            last: None,
        })
    }

    pub fn with_options(mut self, opts: PfOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn params(&self) -> TreeParams {
        self.space.params()
    }

    pub fn space(&self) -> &WindowSpace {
        &self.space
    }

    pub fn solve(&mut self, perc: PercParams) -> Result<SpectralResult> {
        let op = self.space.operator(perc);
        let res = pf_eigen_warm(
            &op,
            self.opts,
            self.last.as_ref().map(|r| r.mu.as_slice()),
            self.last.as_ref().map(|r| r.nu.as_slice()),
        )?;
        self.last = Some(res.clone());
        Ok(res)
    }

    pub fn rho(&mut self, p: f64, q: f64) -> Result<f64> {
        Ok(self.solve(PercParams::new(p, q)?)?.rho)
    }

    pub fn qc(&mut self, p: f64, tol: f64) -> Result<CurvePoint> {
        let params = self.params();
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p must lie in [0,1], got {p}")));
        }
        let lb = lower_bound(p, params);
        if p > 1.0 / params.d() as f64 - SHORT_CRITICAL_SLACK {
            return Ok(CurvePoint {
                p,
                q_c: 0.0,
                lower_bound: lb,
                gap: 0.0 - lb,
                rho_residual: 0.0,
                bisection_width: 0.0,
            });
        }
        // ρ(p, 0) = pd < 1 here, and q_c(p) ≤ q_c(0) = d^{-k}.
        let mut lo = 0.0;
        let mut hi = 1.0 / params.long_fanout() as f64;
        let rho_hi = self.rho(p, hi)?;
        if rho_hi < 1.0 - RHO_SLACK {
            return Err(Error::Inconsistent(format!(
                "rho(p={p}, q={hi}) = {rho_hi} < 1: the bracket [0, d^-k] does not contain q_c"
            )));
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.rho(p, mid)? >= 1.0 - RHO_SLACK {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q_c = 0.5 * (lo + hi);
        let rho = self.rho(p, q_c)?;
        Ok(CurvePoint {
            p,
            q_c,
            lower_bound: lb,
            gap: q_c - lb,
            rho_residual: (rho - 1.0).abs(),
            bisection_width: hi - lo,
        })
    }
}

/// Perron root of the window chain at `(p, q)`.
pub fn rho(p: f64, q: f64, params: TreeParams) -> Result<f64> {
    RhoSolver::new(params)?.rho(p, q)
}

pub fn qc(p: f64, params: TreeParams, tol: f64) -> Result<CurvePoint> {
    RhoSolver::new(params)?.qc(p, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<CurvePoint>,
    /// `q_c` strictly decreases between consecutive grid points where it is positive.
    pub strictly_decreasing: bool,
}

/// Independent points run in parallel; each bisection is sequential.
pub fn qc_sweep(grid: &[f64], params: TreeParams, tol: f64) -> Result<Sweep> {
    if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("grid values must lie in [0,1]".into()));
    }
    let points = grid
        .par_iter()
        .map(|&p| qc(p, params, tol))
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = points
        .windows(2)
        .all(|w| w[1].p <= w[0].p || w[0].q_c <= 0.0 || w[1].q_c < w[0].q_c);
    Ok(Sweep {
        points,
        strictly_decreasing,
    })
}

pub fn asymptotics_table(p: f64, d: u32, ks: std::ops::RangeInclusive<u32>, tol: f64) -> Result<Vec<AsymptoticsRow>> {
    if p * d as f64 >= 1.0 {
        return Err(Error::Domain(format!("requires p·d < 1, got {}", p * d as f64)));
    }
    let star = s_star(p, d)?;
    ks.map(|k| {
        let params = TreeParams::new(d, k)?;
        let point = qc(p, params, tol)?;
        let dk = params.long_fanout() as f64;
        let s_k = dk * dk * (point.q_c - (1.0 - p * d as f64) / dk);
        Ok(AsymptoticsRow {
            k,
            q_c: point.q_c,
            s_k,
            s_star: star,
            residual: (s_k - star).abs(),
        })
    })
    .collect()
}
