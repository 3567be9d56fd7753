mod grid;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use treeperc::coupling::dominance_test;
use treeperc::critical::{asymptotics_table, qc_sweep, RhoSolver, DEFAULT_QC_TOL};
use treeperc::mtbp::conditioned_cluster_sample;
use treeperc::percolation::{criteria_eval, estimate_survival, sample_layers};
use treeperc::stats::{empirical_pmf, tv_distance, Estimate};
use treeperc::spectral::PfOptions;
use treeperc::window::build_m;
use treeperc::{Error, PercParams, TreeParams, Window};

use output::{write_report, Format, Report};

const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Parser, Debug)]
#[command(name = "treeperc", version, about = "Multi-range oriented percolation on the trees T_{d,k}")]
struct Cli {
    /// Master seed for all Monte Carlo commands.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output format (default depends on the command).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct Tree {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    k: u32,
}

impl Tree {
    fn params(&self) -> Result<TreeParams, CliError> {
        Ok(TreeParams::new(self.d, self.k)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical value q_c(p) at one p.
    QcPoint(QcPoint),
    /// q_c over an inclusive decimal grid of p values.
    QcCurve(QcCurve),
    /// Second-order coefficients s_k = d^{2k}(q_c − (1 − pd)/d^k) over a range of k.
    Asymptotics(Asymptotics),
    /// Monte Carlo survival frequency to a given depth.
    Survival(Survival),
    /// Limit diagnostics in the three regimes.
    Limits(Limits),
    /// Survival-function comparison of Z against Ẑ at reduced q.
    Dominance(Dominance),
    /// Perron root and eigenvectors of the window mean matrix.
    Matrix(Matrix),
    /// Monte Carlo estimates of the two comparison sums for the admissible-set chain.
    Criteria(Criteria),
}

#[derive(Args, Debug, Serialize)]
struct QcPoint {
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_QC_TOL)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct QcCurve {
    #[command(flatten)]
    tree: Tree,
    /// Inclusive grid start:stop:step in plain decimals, e.g. 0:0.5:0.05.
    #[arg(long)]
    p_grid: String,
    #[arg(long, default_value_t = DEFAULT_QC_TOL)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct Asymptotics {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    k_min: u32,
    #[arg(long)]
    k_max: u32,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct Survival {
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 60)]
    depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Regime {
    Super,
    Sub,
    Critical,
}

#[derive(Args, Debug, Serialize)]
struct Limits {
    #[arg(long, value_enum)]
    regime: Regime,
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    /// Defaults to q_c + 0.1 (super), q_c − 0.05 (sub) or q_c (critical).
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Shorter horizon (sub).
    #[arg(long, default_value_t = 15)]
    n1: usize,
    /// Longer horizon (super, sub).
    #[arg(long, default_value_t = 25)]
    n2: usize,
    /// Size threshold n in the conditioning |C| > n (critical).
    #[arg(long, default_value_t = 50)]
    threshold: u64,
    /// Neighbourhood radius, 1 or 2 (critical).
    #[arg(long, default_value_t = 1)]
    radius: usize,
}

#[derive(Args, Debug, Serialize)]
struct Dominance {
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
}

#[derive(Args, Debug, Serialize)]
struct Matrix {
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    /// Also write the sparse matrix as CSV to this path.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Number of leading eigenvector entries to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Power-iteration budget.
    #[arg(long, default_value_t = PfOptions::default().max_iter)]
    max_iter: usize,
}

#[derive(Args, Debug, Serialize)]
struct Criteria {
    #[command(flatten)]
    tree: Tree,
    #[arg(long)]
    p: f64,
    /// Second-order parameter: q = (1 − pd)/d^k + s/d^{2k}.
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidParameter(_) | Error::Domain(_) | Error::OutOfSlab(_) | Error::Inconsistent(_) => 2,
                Error::CapExceeded { .. } | Error::Infeasible(_) => 3,
                Error::NonConvergence { .. } => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn probability(name: &str, x: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(usage(format!("--{name} must lie in [0, 1], got {x}")))
    }
}

fn positive(name: &str, x: u64) -> Result<u64, CliError> {
    if x >= 1 {
        Ok(x)
    } else {
        Err(usage(format!("--{name} must be at least 1")))
    }
}

fn estimate_fields(prefix: &'static str, e: &Estimate) -> [(String, Value); 4] {
    let (lo, hi) = e.ci(1.96);
    [
        (prefix.to_string(), json!(e.mean)),
        (format!("{prefix}_se"), json!(e.se)),
        (format!("{prefix}_ci95_lo"), json!(lo)),
        (format!("{prefix}_ci95_hi"), json!(hi)),
    ]
}

fn qc_point(a: &QcPoint) -> Result<Report, CliError> {
    probability("p", a.p)?;
    let c = RhoSolver::new(a.tree.params()?)?.qc(a.p, a.tol)?;
    Ok(Report::record(vec![
        ("p", json!(c.p)),
        ("qc", json!(c.q_c)),
        ("lower_bound", json!(c.lower_bound)),
        ("gap", json!(c.gap)),
        ("rho_residual", json!(c.rho_residual)),
        ("bisection_width", json!(c.bisection_width)),
    ]))
}

fn qc_curve(a: &QcCurve) -> Result<Report, CliError> {
    let grid = grid::parse_grid(&a.p_grid).map_err(usage)?;
    for &p in &grid {
        probability("p-grid", p)?;
    }
    let sweep = qc_sweep(&grid, a.tree.params()?, a.tol)?;
    let mut r = Report::table(&["p", "qc", "lower_bound", "gap", "rho_residual"]);
    for c in &sweep.points {
        r.push(vec![json!(c.p), json!(c.q_c), json!(c.lower_bound), json!(c.gap), json!(c.rho_residual)]);
    }
    r.note("strictly_decreasing", sweep.strictly_decreasing);
    Ok(r)
}

fn asymptotics(a: &Asymptotics) -> Result<Report, CliError> {
    probability("p", a.p)?;
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(usage("need 2 <= --k-min <= --k-max"));
    }
    let rows = asymptotics_table(a.p, a.d, a.k_min..=a.k_max, a.tol)?;
    let mut r = Report::table(&["k", "qc", "s_k", "s_star", "residual"]);
    for row in rows {
        r.push(vec![json!(row.k), json!(row.q_c), json!(row.s_k), json!(row.s_star), json!(row.residual)]);
    }
    Ok(r)
}

fn survival(a: &Survival, seed: u64) -> Result<Report, CliError> {
    let perc = PercParams::new(probability("p", a.p)?, probability("q", a.q)?)?;
    let e = estimate_survival(a.tree.params()?, perc, positive("trials", a.trials)?, a.depth, seed)?;
    Ok(Report::record(vec![
        ("frequency", json!(e.mean)),
        ("se", json!(e.se)),
        ("trials", json!(e.n)),
        ("depth", json!(a.depth)),
    ]))
}

fn limits(a: &Limits, seed: u64) -> Result<Report, CliError> {
    let params = a.tree.params()?;
    probability("p", a.p)?;
    let trials = positive("trials", a.trials)?;
    let mut solver = RhoSolver::new(params)?;
    let q_c = solver.qc(a.p, DEFAULT_QC_TOL)?.q_c;
    let q = match (a.q, a.regime) {
        (Some(q), _) => q,
        (None, Regime::Super) => q_c + 0.1,
        (None, Regime::Sub) => q_c - 0.05,
        (None, Regime::Critical) => q_c,
    };
    let perc = PercParams::new(a.p, probability("q", q)?)?;
    let mut r;
    match a.regime {
        Regime::Super => {
            let rho = solver.rho(a.p, q)?;
            let runs = sample_layers(params, perc, trials, a.n2 + 1, seed)?;
            let mut sums = vec![0u64; a.n2 + 2];
            for run in &runs {
                for (s, x) in sums.iter_mut().zip(&run.x) {
                    *s += x;
                }
            }
            r = Report::table(&["n", "mean_x_n", "ratio_next", "rho"]);
            for n in 0..=a.n2 {
                let ratio = if sums[n] > 0 { json!(sums[n + 1] as f64 / sums[n] as f64) } else { Value::Null };
                r.push(vec![json!(n), json!(sums[n] as f64 / trials as f64), ratio, json!(rho)]);
            }
            r.note("rho", rho);
        }
        Regime::Sub => {
            if a.n1 >= a.n2 {
                return Err(usage("need --n1 < --n2"));
            }
            let runs = sample_layers(params, perc, trials, a.n2, seed)?;
            let conditional = |n: usize| {
                let mut counts = std::collections::BTreeMap::new();
                for run in runs.iter().filter(|run| run.x[n] > 0) {
                    *counts.entry(run.x[n]).or_insert(0u64) += 1;
                }
                counts
            };
            let (c1, c2) = (conditional(a.n1), conditional(a.n2));
            let (p1, p2) = (empirical_pmf(&c1), empirical_pmf(&c2));
            let support: std::collections::BTreeSet<u64> = p1.keys().chain(p2.keys()).copied().collect();
            r = Report::table(&["i", "pmf_n1", "pmf_n2"]);
            for i in support {
                r.push(vec![
                    json!(i),
                    json!(p1.get(&i).copied().unwrap_or(0.0)),
                    json!(p2.get(&i).copied().unwrap_or(0.0)),
                ]);
            }
            r.note("survivors_n1", c1.values().sum::<u64>());
            r.note("survivors_n2", c2.values().sum::<u64>());
            r.note("tv_distance", tv_distance(&p1, &p2));
        }
        Regime::Critical => {
            let s = conditioned_cluster_sample(params, perc, a.threshold, a.radius, trials, seed)?;
            let pmf = s.pmf();
            r = Report::table(&["neighbourhood", "count", "pmf"]);
            for (label, &count) in &s.counts {
                r.push(vec![json!(label), json!(count), json!(pmf[label])]);
            }
            r.note("attempted", s.attempted);
            r.note("accepted", s.accepted);
            r.note("acceptance_rate", s.acceptance_rate);
        }
    }
    r.note("q_c", q_c);
    r.note("q", q);
    Ok(r)
}

fn dominance(a: &Dominance, seed: u64) -> Result<Report, CliError> {
    probability("p", a.p)?;
    probability("q", a.q)?;
    let rep = dominance_test(a.tree.params()?, a.p, a.q, a.delta, positive("trials", a.trials)?, seed)?;
    let mut r = Report::table(&["threshold", "surv_Z", "se_Z", "surv_Zhat", "se_Zhat", "violation_sigma"]);
    for row in &rep.rows {
        r.push(vec![
            json!(row.threshold),
            json!(row.surv_z),
            json!(row.se_z),
            json!(row.surv_zhat),
            json!(row.se_zhat),
            json!(row.violation_sigma),
        ]);
    }
    r.note("max_violation_sigma", rep.max_violation_sigma);
    r.note("dominated", rep.dominated);
    Ok(r)
}

fn matrix(a: &Matrix, meta: &Value) -> Result<Report, CliError> {
    let params = a.tree.params()?;
    let perc = PercParams::new(probability("p", a.p)?, probability("q", a.q)?)?;
    let opts = PfOptions {
        max_iter: a.max_iter,
        ..PfOptions::default()
    };
    let mut solver = RhoSolver::new(params)?.with_options(opts);
    let res = solver.solve(perc)?;
    if let Some(path) = &a.dump {
        let m = build_m(params, perc)?;
        let mut f = BufWriter::new(File::create(path)?);
        write_meta_lines(&mut f, meta)?;
        m.write_csv(&mut f)?;
        f.flush()?;
    }
    let mut order: Vec<usize> = (0..res.nu.len()).collect();
    order.sort_by(|&i, &j| res.nu[j].total_cmp(&res.nu[i]).then(i.cmp(&j)));
    let mut r = Report::table(&["window_hex", "size", "mu", "nu"]);
    for &i in order.iter().take(a.top) {
        let w = Window(i as u64 + 1);
        r.push(vec![json!(format!("{w:x}")), json!(w.len()), json!(res.mu[i]), json!(res.nu[i])]);
    }
    r.note("rho", res.rho);
    r.note("dim", res.mu.len());
    r.note("residual", res.residual);
    r.note("iterations", res.iterations);
    let root_mu: f64 = res
        .mu
        .iter()
        .enumerate()
        .filter(|(i, _)| Window(*i as u64 + 1).contains_root())
        .map(|(_, m)| m)
        .sum();
    r.note("mu_mass_on_root_windows", root_mu);
    Ok(r)
}

fn criteria(a: &Criteria, seed: u64) -> Result<Report, CliError> {
    probability("p", a.p)?;
    let e = criteria_eval(a.tree.params()?, a.p, a.s, positive("trials", a.trials)?, seed)?;
    let mut fields: Vec<(String, Value)> = vec![
        ("p".into(), json!(e.p)),
        ("s".into(), json!(e.s)),
        ("q".into(), json!(e.q)),
        ("trials".into(), json!(a.trials)),
    ];
    fields.extend(estimate_fields("lhs_a", &e.lhs_a));
    fields.extend(estimate_fields("lhs_b", &e.lhs_b));
    Ok(Report::record(fields))
}

fn write_meta_lines(out: &mut dyn Write, meta: &Value) -> io::Result<()> {
    if let Value::Object(m) = meta {
        for (k, v) in m {
            writeln!(out, "# {k}: {v}")?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let (name, config, default_format) = match &cli.command {
        Command::QcPoint(a) => ("qc-point", serde_json::to_value(a), Format::Json),
        Command::QcCurve(a) => ("qc-curve", serde_json::to_value(a), Format::Csv),
        Command::Asymptotics(a) => ("asymptotics", serde_json::to_value(a), Format::Csv),
        Command::Survival(a) => ("survival", serde_json::to_value(a), Format::Json),
        Command::Limits(a) => ("limits", serde_json::to_value(a), Format::Csv),
        Command::Dominance(a) => ("dominance", serde_json::to_value(a), Format::Csv),
        Command::Matrix(a) => ("matrix", serde_json::to_value(a), Format::Json),
        Command::Criteria(a) => ("criteria", serde_json::to_value(a), Format::Json),
    };
    let format = cli.format.unwrap_or(default_format);
    let meta = json!({
        "tool": "treeperc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": config.map_err(|e| usage(e.to_string()))?,
        "seed": cli.seed,
    });
    let seed = cli.seed;
    let report = match &cli.command {
        Command::QcPoint(a) => qc_point(a)?,
        Command::QcCurve(a) => qc_curve(a)?,
        Command::Asymptotics(a) => asymptotics(a)?,
        Command::Survival(a) => survival(a, seed)?,
        Command::Limits(a) => limits(a, seed)?,
        Command::Dominance(a) => dominance(a, seed)?,
        Command::Matrix(a) => matrix(a, &meta)?,
        Command::Criteria(a) => criteria(a, seed)?,
    };
    match &cli.output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write_report(&mut f, &meta, &report, format)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_report(&mut lock, &meta, &report, format)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treeperc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
