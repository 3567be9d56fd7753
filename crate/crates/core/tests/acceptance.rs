//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the report is printed on every run.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use treeperc::coupling::{finite_coupling, leaf_count_zhat, pathwise_pair, dominance_test, SlabConfig};
use treeperc::critical::lower_bound;
use treeperc::oracle::trial_rng;
use treeperc::percolation::{
    estimate_survival, exact_mbar, explore_layers, long_boundary, s_star, sample_layers, short_cluster,
};
use treeperc::spectral::{pf_eigen, CsrMatrix, NonnegOperator, PfOptions};
use treeperc::stats::{empirical_pmf, mean_se, tv_distance, tv_noise_bound};
use treeperc::window::{build_m, child_window_dist, initial_window_dist, simulate_window_chain, ChainStart, WindowLaw};
use treeperc::{asymptotics_table, qc, EdgeOracle, PercParams, RhoSolver, TreeParams, VertexPath, Window};

type Outcome = Result<String, String>;

fn tp(d: u32, k: u32) -> TreeParams {
    TreeParams::new(d, k).unwrap()
}

fn pp(p: f64, q: f64) -> PercParams {
    PercParams::new(p, q).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn boundary_values() -> Outcome {
    let mut worst = 0.0f64;
    for (d, k) in [(2, 2), (2, 3), (3, 2)] {
        let c = qc(0.0, tp(d, k), 1e-12).map_err(|e| e.to_string())?;
        worst = worst.max((c.q_c - (d as f64).powi(-(k as i32))).abs());
    }
    let mut zero = true;
    for k in [2, 3] {
        zero &= qc(0.6, tp(2, k), 1e-10).map_err(|e| e.to_string())?.q_c == 0.0;
    }
    check(worst < 1e-9 && zero, format!("max |q_c(0) - d^-k| = {worst:.2e}; q_c(0.6) = 0: {zero}"))
}

fn strict_gap() -> Outcome {
    let mut min_gap = f64::INFINITY;
    for k in [2, 3] {
        let params = tp(2, k);
        let mut solver = RhoSolver::new(params).map_err(|e| e.to_string())?;
        for p in [0.1, 0.2, 0.3, 0.4] {
            let c = solver.qc(p, 1e-10).map_err(|e| e.to_string())?;
            min_gap = min_gap.min(c.q_c - lower_bound(p, params));
        }
    }
    check(min_gap > 1e-4, format!("min gap = {min_gap:.6}"))
}

fn asymptotics_trend() -> Outcome {
    let rows = asymptotics_table(0.25, 2, 2..=4, 1e-12).map_err(|e| e.to_string())?;
    let star = s_star(0.25, 2).map_err(|e| e.to_string())?;
    let ds: Vec<f64> = rows.iter().map(|r| (r.s_k - star).abs()).collect();
    let dq: Vec<f64> = rows
        .iter()
        .map(|r| (2f64.powi(r.k as i32) * r.q_c - 0.5).abs())
        .collect();
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let s: Vec<String> = rows.iter().map(|r| format!("{:.5}", r.s_k)).collect();
    check(
        (star - 0.0357142857).abs() < 1e-9 && dec(&ds) && dec(&dq),
        format!("s_k = [{}], s_star = {star:.10}", s.join(", ")),
    )
}

/// `P(W_n ≠ ∅)` for the window chain by iterating the offspring generating
/// function at zero; `n = depth − k + 1` matches the survival band.
fn exact_chain_survival(params: TreeParams, perc: PercParams, generations: usize) -> treeperc::Result<f64> {
    let dim = 1usize << params.window_slots();
    let mut dists = vec![Vec::new(); dim];
    for a in 1..dim {
        for i in 1..=params.d() {
            dists[a].push(child_window_dist(Window(a as u64), i, perc, params)?);
        }
    }
    let mut ext = vec![0.0; dim];
    ext[0] = 1.0;
    for _ in 0..generations {
        let mut next = vec![1.0; dim];
        for a in 1..dim {
            next[a] = dists[a]
                .iter()
                .map(|pmf| pmf.empty + (1..dim).map(|c| pmf.get(Window(c as u64)) * ext[c]).sum::<f64>())
                .product();
        }
        ext = next;
    }
    let init = initial_window_dist(params, perc.p())?;
    Ok(1.0 - (1..dim).map(|a| init.get(Window(a as u64)) * ext[a]).sum::<f64>())
}

fn sign_correspondence() -> Outcome {
    let params = tp(2, 2);
    let p = 0.2;
    let mut solver = RhoSolver::new(params).map_err(|e| e.to_string())?;
    let q_c = solver.qc(p, 1e-10).map_err(|e| e.to_string())?.q_c;
    let (lo, hi) = (q_c - 0.02, q_c + 0.02);
    let r_lo = solver.rho(p, lo).map_err(|e| e.to_string())?;
    let r_hi = solver.rho(p, hi).map_err(|e| e.to_string())?;
    let s_lo = estimate_survival(params, pp(p, lo), 100_000, 60, 41).map_err(|e| e.to_string())?;
    let s_hi = estimate_survival(params, pp(p, hi), 100_000, 60, 42).map_err(|e| e.to_string())?;
    let e_lo = exact_chain_survival(params, pp(p, lo), 59).map_err(|e| e.to_string())?;
    let e_hi = exact_chain_survival(params, pp(p, hi), 59).map_err(|e| e.to_string())?;
    check(
        r_lo < 1.0 && 1.0 < r_hi && s_lo.mean < 0.01 && s_hi.mean > 5.0 * s_hi.se,
        format!(
            "rho = {r_lo:.4} / {r_hi:.4}; survival = {:.4} (se {:.4}) / {:.4} (se {:.4}); exact chain value {e_lo:.5} / {e_hi:.5}",
            s_lo.mean, s_lo.se, s_hi.mean, s_hi.se
        ),
    )
}

fn representation_equivalence() -> Outcome {
    let params = tp(2, 2);
    let perc = pp(0.3, 0.1);
    let n = 100_000u64;
    let law = WindowLaw::new(params, perc).map_err(|e| e.to_string())?;
    let chain: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|t| simulate_window_chain(&law, &mut trial_rng(51, t), 2, ChainStart::Initial).map(|r| r.x[2]))
        .collect::<treeperc::Result<_>>()
        .map_err(|e| e.to_string())?;
    let direct: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|t| explore_layers(params, perc, &EdgeOracle::for_trial(52, t), 2).map(|s| s.x[2]))
        .collect::<treeperc::Result<_>>()
        .map_err(|e| e.to_string())?;
    let counts = |xs: &[u64]| {
        let mut m = BTreeMap::new();
        for &x in xs {
            *m.entry(x).or_insert(0u64) += 1;
        }
        m
    };
    let (ca, cb) = (counts(&chain), counts(&direct));
    let mut pooled_counts = ca.clone();
    for (&x, &c) in &cb {
        *pooled_counts.entry(x).or_insert(0) += c;
    }
    let tv = tv_distance(&empirical_pmf(&ca), &empirical_pmf(&cb));
    let bound = 4.0 * tv_noise_bound(&empirical_pmf(&pooled_counts), n, n);

    let root = [VertexPath::root()];
    let sizes: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|t| {
            let o = EdgeOracle::for_trial(53, t);
            short_cluster(&root, &o, perc, params, 1 << 20).map(|cs| long_boundary(&cs, &o, perc, params).len() as f64)
        })
        .collect::<treeperc::Result<_>>()
        .map_err(|e| e.to_string())?;
    let est = mean_se(&sizes);
    let exact = exact_mbar(Window::ROOT, perc, params).map_err(|e| e.to_string())?;
    let sigma = est.sigma_from(exact);
    check(
        tv < bound && sigma < 3.0,
        format!(
            "TV(X_2) = {tv:.5} < {bound:.5}; E|C_l| = {:.4} vs {exact:.4} ({sigma:.2} SE)",
            est.mean
        ),
    )
}

fn conditional_pmf(samples: &[u64]) -> BTreeMap<u64, f64> {
    let mut m = BTreeMap::new();
    for &x in samples.iter().filter(|&&x| x > 0) {
        *m.entry(x).or_insert(0u64) += 1;
    }
    empirical_pmf(&m)
}

fn limit_diagnostics() -> Outcome {
    let params = tp(2, 2);
    let p = 0.2;
    let mut solver = RhoSolver::new(params).map_err(|e| e.to_string())?;
    let q_c = solver.qc(p, 1e-10).map_err(|e| e.to_string())?.q_c;

    let q_sup = q_c + 0.1;
    let r = solver.rho(p, q_sup).map_err(|e| e.to_string())?;
    let runs = sample_layers(params, pp(p, q_sup), 100_000, 26, 61).map_err(|e| e.to_string())?;
    let (s25, s26) = runs
        .iter()
        .fold((0u64, 0u64), |(a, b), s| (a + s.x[25], b + s.x[26]));
    let ratio = s26 as f64 / s25 as f64;
    let rel = (ratio / r - 1.0).abs();

    let q_sub = q_c - 0.05;
    let runs = sample_layers(params, pp(p, q_sub), 1_000_000, 25, 62).map_err(|e| e.to_string())?;
    let x15: Vec<u64> = runs.iter().map(|s| s.x[15]).collect();
    let x25: Vec<u64> = runs.iter().map(|s| s.x[25]).collect();
    let n25 = x25.iter().filter(|&&x| x > 0).count();
    let tv = tv_distance(&conditional_pmf(&x15), &conditional_pmf(&x25));
    check(
        rel < 0.02 && tv < 0.05,
        format!(
            "E[X_26]/E[X_25] = {ratio:.4} vs rho = {r:.4} ({:.2}%); conditional TV = {tv:.4} ({n25} survivors at 25)",
            100.0 * rel
        ),
    )
}

fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn coupling_checks() -> Outcome {
    let params = tp(2, 2);
    let perc = pp(0.5, 0.5);
    let violations: u64 = (0..10_000u64)
        .into_par_iter()
        .map(|t| {
            let (z, zhat) = pathwise_pair(params, &SlabConfig::random(EdgeOracle::for_trial(71, t), perc))?;
            Ok(u64::from(z > zhat))
        })
        .sum::<treeperc::Result<u64>>()
        .map_err(|e| e.to_string())?;
    let (z_bar, zhat_bar) = pathwise_pair(params, &SlabConfig::OmegaBar).map_err(|e| e.to_string())?;
    let zhat_direct = leaf_count_zhat(params, &SlabConfig::OmegaBar);

    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..12usize);
        let p1 = random_pmf(&mut rng, n);
        let x_bar = rng.random_range(0..n);
        let r = random_pmf(&mut rng, n);
        let l1: f64 = p1.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        let eps = (0.9 * p1[x_bar] / l1).min(1.0);
        let mut p2: Vec<f64> = p1.iter().zip(&r).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
        let s: f64 = p2.iter().sum();
        p2.iter_mut().for_each(|x| *x /= s);
        let table = finite_coupling(&p1, &p2, x_bar).map_err(|e| e.to_string())?;
        worst = worst.max(table.max_violation());
    }
    check(
        violations == 0 && z_bar == 0 && zhat_bar >= 48 && zhat_direct >= 48 && worst <= 1e-12,
        format!(
            "pathwise violations = {violations}/10000; omega_bar: Z = {z_bar}, Zhat = {zhat_bar}; coupling max violation = {worst:.1e}"
        ),
    )
}

fn identity(n: usize) -> CsrMatrix {
    CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect()).unwrap()
}

fn random_csr(rng: &mut ChaCha8Rng, n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < 0.6 || j == (i + 1) % n {
                t.push((i, j, rng.random::<f64>()));
            }
        }
    }
    CsrMatrix::from_triplets(n, t).unwrap()
}

fn csv_with_threads(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let report = dominance_test(tp(2, 2), 0.3, 0.2, 0.02, 3000, 81).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let layers = sample_layers(tp(2, 3), pp(0.3, 0.1), 2000, 12, 82).unwrap();
        for s in layers {
            let row: Vec<String> = s.x.iter().map(|x| x.to_string()).collect();
            buf.extend_from_slice(row.join(",").as_bytes());
            buf.push(b'\n');
        }
        buf
    })
}

fn property_suites() -> Outcome {
    let opts = PfOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;

    // Spectral invariants on window matrices and random matrices.
    let mut mats: Vec<(CsrMatrix, CsrMatrix)> = Vec::new();
    for ((d, k), p, q) in [((2, 2), 0.2, 0.15), ((2, 3), 0.3, 0.05), ((3, 2), 0.1, 0.08)] {
        let a = build_m(tp(d, k), pp(p, q)).map_err(|e| e.to_string())?.csr().clone();
        let b = build_m(tp(d, k), pp(p, q + 0.03)).map_err(|e| e.to_string())?.csr().clone();
        mats.push((a, b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    for _ in 0..20 {
        let a = random_csr(&mut rng, 6);
        let e = random_csr(&mut rng, 6);
        let b = a.add(&e).unwrap();
        mats.push((a, b));
    }
    let mut shift_err = 0.0f64;
    let mut monotone = true;
    let mut residual_ok = true;
    for (a, b) in &mats {
        let ra = pf_eigen(a, opts).map_err(|e| e.to_string())?;
        let rb = pf_eigen(b, opts).map_err(|e| e.to_string())?;
        let shifted = pf_eigen(&a.add(&identity(a.dim())).unwrap(), opts).map_err(|e| e.to_string())?;
        shift_err = shift_err.max((shifted.rho - ra.rho - 1.0).abs() / (1.0 + ra.rho));
        monotone &= ra.rho <= rb.rho * (1.0 + 1e-10);
        for r in [&ra, &rb, &shifted] {
            residual_ok &= r.residual <= opts.tol * r.rho.max(1.0);
        }
    }
    ok &= shift_err < 1e-9 && monotone && residual_ok;
    notes.push(format!("shift err {shift_err:.1e}, monotone {monotone}, residuals {residual_ok}"));

    // Initial and transition pmfs.
    let mut worst = 0.0f64;
    for (d, k) in [(2, 2), (2, 3), (3, 2), (2, 4)] {
        let params = tp(d, k);
        for p in [0.0, 0.3, 0.7] {
            worst = worst.max((initial_window_dist(params, p).map_err(|e| e.to_string())?.total() - 1.0).abs());
            let perc = pp(p, 0.4);
            let slots = params.window_slots();
            for bits in 1u64..(1u64 << slots) {
                for i in 1..=d {
                    let pmf = child_window_dist(Window(bits), i, perc, params).map_err(|e| e.to_string())?;
                    worst = worst.max((pmf.total() - 1.0).abs());
                }
            }
        }
    }
    ok &= worst < 1e-12;
    notes.push(format!("pmf normalization err {worst:.1e}"));

    let one = csv_with_threads(1);
    let four = csv_with_threads(4);
    let same = one == four;
    ok &= same;
    notes.push(format!("thread-count determinism {same} ({} bytes)", one.len()));
    check(ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("boundary values q_c(0) = d^-k, q_c(0.6) = 0", boundary_values),
        ("strict gap above the branching lower bound", strict_gap),
        ("two-term asymptotics trend at p = 0.25", asymptotics_trend),
        ("sign of rho - 1 matches survival", sign_correspondence),
        ("window chain vs direct exploration", representation_equivalence),
        ("supercritical growth rate and subcritical conditional law", limit_diagnostics),
        ("slab coupling and finite coupling", coupling_checks),
        ("property suites", property_suites),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed.insert(i + 1);
                println!("criterion {}: FAIL  {name} [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
