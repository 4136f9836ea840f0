//! Command-line driver: `run`, `sweep`, `paradox` and `check-law`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::constitutive::PowerLaw;
use crate::domain::snapshot::{snapshot_file_name, write_snapshot};
use crate::energy::{paradox_report, EnergyLedger, ParadoxReport, ParadoxVerdict};
use crate::error::{Error, ParadoxError, Result};
use crate::scenario::{parse_scenario, Prepared};
use crate::stepper::{discrete_estimate_report, run, EstimateReport, RunFailure, Trajectory};
use crate::tensor::SymTensor2;

pub const SWEEP_HEADER: &str =
    "n,max_residual_kv,max_residual_general,estM_q1,estM_q2,estM_q3,estM_q4,estM_q5";

/// Relative variation between consecutive sweep entries still called bounded.
pub const BOUNDED_REL_VARIATION: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "kvfrac", version, about = "Nonlinear Kelvin-Voigt viscoelasticity with a prescribed growing crack")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its energy ledger and snapshots.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Step count to use when the scenario lists several.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run every step count of a scenario and fit convergence orders.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check whether the energy balance closes without a crack term.
    Paradox {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Randomised checks of the constitutive law.
    CheckLaw {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        eps_reg: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the scenario's Newton tolerance.
    #[arg(long)]
    pub newton_tol: Option<f64>,
    /// Unused by deterministic commands.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Process exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success,
    /// Bad arguments, unreadable or invalid scenario.
    Invalid,
    SolverFailure,
    Inconclusive,
}

impl Exit {
    pub fn code(self) -> i32 {
        match self {
            Exit::Success => 0,
            Exit::Invalid => 1,
            Exit::SolverFailure => 2,
            Exit::Inconclusive => 3,
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

/// Writes to standard output, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn apply_overrides(prepared: &mut Prepared, common: &CommonArgs) -> Result<()> {
    if let Some(tol) = common.newton_tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Usage(format!("--newton-tol must be positive, got {tol}")));
        }
        prepared.scenario.solver.newton_tol = Some(tol);
    }
    Ok(())
}

fn load(path: &Path, common: &CommonArgs) -> Result<Prepared> {
    configure_threads(common.threads)?;
    let mut prepared = parse_scenario(path)?;
    apply_overrides(&mut prepared, common)?;
    for w in &prepared.warnings {
        eprintln!("warning: {w}");
    }
    Ok(prepared)
}

/// Runs `n` steps of a prepared scenario.
pub fn simulate(prepared: &Prepared, n: usize) -> std::result::Result<Trajectory, RunFailure> {
    run(&prepared.model, &prepared.scenario.solver_config(n))
}

fn ledger_bytes(ledger: &EnergyLedger) -> Vec<u8> {
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn write_snapshots(prepared: &Prepared, traj: &Trajectory, dir: &Path) -> Result<usize> {
    let stride = prepared.scenario.snapshot_stride(traj.n);
    if stride == 0 {
        return Ok(0);
    }
    let space = &prepared.model.space;
    let last = traj.states.len().saturating_sub(1);
    let mut written = 0;
    for (k, s) in traj.states.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let mut buf = Vec::new();
        write_snapshot(&mut buf, space, k, s.t, &s.u, &traj.constraints[k]).expect("writing to memory");
        write_atomic(&dir.join(snapshot_file_name(k)), &buf)?;
        written += 1;
    }
    Ok(written)
}

/// Human-readable run summary.
pub fn summary_text(prepared: &Prepared, traj: &Trajectory, ledger: &EnergyLedger) -> String {
    let mut s = String::new();
    let last = ledger.rows.last().cloned().unwrap_or_default();
    let iterations: usize = traj.states.iter().map(|s| s.stats.iterations).sum();
    let max_iterations = traj.states.iter().map(|s| s.stats.iterations).max().unwrap_or(0);
    let rounding: usize = traj.states.iter().map(|s| s.stats.rounding_accepts).sum();
    let steps = traj.states.len().saturating_sub(1);
    let _ = writeln!(s, "n = {}, tau = {:e}, p = {}, eps_reg = {}", traj.n, traj.tau, traj.law.p(), traj.law.eps_reg());
    let _ = writeln!(
        s,
        "mesh: {} nodes, {} triangles, {} crack segments",
        prepared.model.space.num_nodes(),
        prepared.model.space.num_elements(),
        prepared.model.space.path().num_segments()
    );
    let _ = writeln!(s, "steps completed: {steps} of {}", traj.n);
    let _ = writeln!(s, "final time: {:.6}", last.t);
    let _ = writeln!(s, "kinetic energy: {:.10e}", last.kinetic);
    let _ = writeln!(s, "elastic energy: {:.10e}", last.elastic);
    let _ = writeln!(s, "viscous dissipation: {:.10e}", last.viscous_cum);
    let _ = writeln!(s, "total work: {:.10e}", last.work_cum);
    let _ = writeln!(s, "crack growth: {:.10e}", last.crack_cum);
    let _ = writeln!(s, "max |residual_kv|: {:.10e}", ledger.max_abs_residual_kv());
    let _ = writeln!(s, "max |residual_general|: {:.10e}", ledger.max_abs_residual_general());
    let _ = writeln!(
        s,
        "newton: {iterations} iterations in total, at most {max_iterations} per step, {rounding} rounding-level accepts"
    );
    s
}

fn cmd_run(path: &Path, common: &CommonArgs, n: Option<usize>) -> Result<Exit> {
    let prepared = load(path, common)?;
    let n = n.unwrap_or_else(|| prepared.scenario.finest_n());
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let out = &common.out_dir;
    let (traj, failure) = match simulate(&prepared, n) {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    let space = &prepared.model.space;
    let ledger = EnergyLedger::from_trajectory(space, &prepared.model.loads, &traj);
    write_atomic(&out.join(&prepared.scenario.outputs.ledger), &ledger_bytes(&ledger))?;
    write_snapshots(&prepared, &traj, &out.join("snapshots"))?;
    if prepared.scenario.outputs.summary {
        let text = summary_text(&prepared, &traj, &ledger);
        emit(&text);
        write_atomic(&out.join("summary.txt"), text.as_bytes())?;
    }
    match failure {
        None => Ok(Exit::Success),
        Some(e) => {
            eprintln!("error: {e}");
            eprintln!("partial ledger kept with {} rows", ledger.rows.len());
            Ok(Exit::SolverFailure)
        }
    }
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub max_residual_kv: f64,
    pub max_residual_general: f64,
    pub estimate: EstimateReport,
}

/// Least-squares slope of `log v` against `log τ`, with `τ ∝ 1/n`.
pub fn fit_order(ns: &[usize], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&n, &v)| (-(n as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Largest relative change of each estimate quantity between consecutive rows.
pub fn estimate_variation(rows: &[SweepRow]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for w in rows.windows(2) {
        let (a, b) = (w[0].estimate.as_array(), w[1].estimate.as_array());
        for i in 0..5 {
            let scale = a[i].abs().max(b[i].abs());
            if scale > 0.0 {
                out[i] = f64::max(out[i], (a[i] - b[i]).abs() / scale);
            }
        }
    }
    out
}

/// Checks the sweep preconditions and returns the sorted step counts.
pub fn sweep_values(ns: &[usize]) -> Result<Vec<usize>> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Usage(format!(
            "a sweep needs at least 3 distinct step counts for an order fit, got {ns:?}"
        )));
    }
    if let Some(bad) = ns.iter().find(|&&n| n % ns[0] != 0) {
        return Err(Error::Usage(format!(
            "step count {bad} is not a multiple of the smallest step count {}",
            ns[0]
        )));
    }
    Ok(ns)
}

/// Runs every `n` and tabulates residuals and estimate quantities.
pub fn run_sweep(
    prepared: &Prepared,
    ns: &[usize],
) -> std::result::Result<Vec<(SweepRow, EnergyLedger)>, RunFailure> {
    let space = &prepared.model.space;
    ns.par_iter()
        .map(|&n| {
            let traj = simulate(prepared, n)?;
            let ledger = EnergyLedger::from_trajectory(space, &prepared.model.loads, &traj);
            let row = SweepRow {
                n,
                max_residual_kv: ledger.max_abs_residual_kv(),
                max_residual_general: ledger.max_abs_residual_general(),
                estimate: discrete_estimate_report(space, &traj),
            };
            Ok((row, ledger))
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let q = r.estimate.as_array();
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.max_residual_kv, r.max_residual_general, q[0], q[1], q[2], q[3], q[4]
        );
    }
    s
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or("n/a".into(), |o| format!("{o:.3}"))
}

fn cmd_sweep(path: &Path, common: &CommonArgs) -> Result<Exit> {
    let prepared = load(path, common)?;
    let ns = sweep_values(&prepared.scenario.n_values())?;
    let results = match run_sweep(&prepared, &ns) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {f}");
            return Ok(Exit::SolverFailure);
        }
    };
    let out = &common.out_dir;
    for (row, ledger) in &results {
        write_atomic(&out.join(format!("ledger_n{}.csv", row.n)), &ledger_bytes(ledger))?;
    }
    let rows: Vec<SweepRow> = results.into_iter().map(|r| r.0).collect();
    write_atomic(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    let kv: Vec<f64> = rows.iter().map(|r| r.max_residual_kv).collect();
    let general: Vec<f64> = rows.iter().map(|r| r.max_residual_general).collect();
    let mut report = String::new();
    let _ = writeln!(report, "order of max |residual_kv|: {}", fmt_order(fit_order(&ns, &kv)));
    let _ = writeln!(report, "order of max |residual_general|: {}", fmt_order(fit_order(&ns, &general)));
    for (i, v) in estimate_variation(&rows).iter().enumerate() {
        let verdict = if *v < BOUNDED_REL_VARIATION { "BOUNDED" } else { "NOT BOUNDED" };
        let _ = writeln!(report, "estM_q{}: max consecutive variation {:.3}% {verdict}", i + 1, 100.0 * v);
    }
    emit(&report);
    write_atomic(&out.join("sweep_report.txt"), report.as_bytes())?;
    Ok(Exit::Success)
}

pub struct ParadoxStudy {
    /// Verdict at the finest `n`.
    pub report: ParadoxReport,
    /// `(n, max Griffith defect)` for every configured `n`.
    pub trend: Vec<(usize, f64)>,
    /// Ledger of the finest run.
    pub ledger: EnergyLedger,
}

pub fn paradox_study(prepared: &Prepared) -> Result<ParadoxStudy> {
    let space = &prepared.model.space;
    let t_final = prepared.model.t_final;
    let grows = space
        .path()
        .release_times()
        .iter()
        .any(|&r| r > 0.0 && r < t_final);
    if !grows {
        return Err(ParadoxError::NoCrackGrowth.into());
    }
    let mut ns = prepared.scenario.n_values();
    ns.sort_unstable();
    ns.dedup();
    let results = run_sweep(prepared, &ns).map_err(|f| Error::Solver(f.error))?;
    let min_crack = prepared.scenario.outputs.paradox_min_crack;
    let trend: Vec<(usize, f64)> = results
        .iter()
        .map(|(row, ledger)| (row.n, paradox_report(ledger, space, min_crack).max_griffith_defect))
        .collect();
    let (_, ledger) = results.into_iter().last().expect("at least one n");
    Ok(ParadoxStudy {
        report: paradox_report(&ledger, space, min_crack),
        trend,
        ledger,
    })
}

pub fn paradox_text(report: &ParadoxReport, trend: &[(usize, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", report.verdict);
    let _ = writeln!(s, "crack growth: {:.10e} (minimum {:.3e})", report.crack_final, report.min_crack);
    let _ = writeln!(s, "max |residual_kv|: {:.10e}", report.max_abs_residual);
    let _ = writeln!(s, "tolerance: {:.10e}", report.tolerance);
    let _ = writeln!(s, "max Griffith defect: {:.10e}", report.max_griffith_defect);
    let _ = writeln!(s, "trend (n, max Griffith defect):");
    for (n, d) in trend {
        let _ = writeln!(s, "  {n} {d:.10e}");
    }
    if report.verdict == ParadoxVerdict::InconclusiveResolution {
        let _ = writeln!(s, "the balance residual exceeds the tolerance; increase n");
    }
    let _ = writeln!(s, "k,t,crack_cum,abs_residual_kv,griffith_defect");
    for st in &report.steps {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            st.k, st.t, st.crack_cum, st.abs_residual_kv, st.griffith_defect
        );
    }
    s
}

fn cmd_paradox(path: &Path, common: &CommonArgs) -> Result<Exit> {
    let prepared = load(path, common)?;
    let ParadoxStudy { report, trend, ledger } = paradox_study(&prepared)?;
    let out = &common.out_dir;
    write_atomic(&out.join(&prepared.scenario.outputs.ledger), &ledger_bytes(&ledger))?;
    let text = paradox_text(&report, &trend);
    write_atomic(&out.join("paradox.txt"), text.as_bytes())?;
    let head: String = text
        .lines()
        .take_while(|l| !l.starts_with("k,"))
        .map(|l| format!("{l}\n"))
        .collect();
    emit(&head);
    Ok(match report.verdict {
        ParadoxVerdict::InconclusiveResolution => Exit::Inconclusive,
        _ => Exit::Success,
    })
}

/// Worst-case results of the randomised constitutive checks.
#[derive(Clone, Debug, PartialEq)]
pub struct LawCheck {
    pub min_monotonicity: f64,
    pub max_roundtrip: f64,
    pub max_roundtrip_root_find: f64,
    pub max_fenchel_young: f64,
    pub growth_bounds_hold: bool,
}

fn random_tensor(rng: &mut impl Rng) -> SymTensor2 {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    SymTensor2::new(
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    )
}

pub fn check_law(law: &PowerLaw, samples: usize, seed: u64) -> Result<LawCheck> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut report = LawCheck {
        min_monotonicity: f64::INFINITY,
        max_roundtrip: 0.0,
        max_roundtrip_root_find: 0.0,
        max_fenchel_young: 0.0,
        growth_bounds_hold: true,
    };
    let mut all = Vec::with_capacity(2 * samples);
    for _ in 0..samples {
        let (a, b) = (random_tensor(&mut rng), random_tensor(&mut rng));
        let mono = (law.g_apply(&a) - law.g_apply(&b)).dot(&(a - b));
        report.min_monotonicity = report.min_monotonicity.min(mono);
        let ga = law.g_apply(&a);
        let rel = |x: SymTensor2| (x - a).norm() / a.norm();
        report.max_roundtrip = report.max_roundtrip.max(rel(law.g_inverse(&ga)));
        report.max_roundtrip_root_find = report.max_roundtrip_root_find.max(rel(law.g_inverse_root_find(&ga)?));
        let pairing = ga.dot(&a);
        let fy = (law.phi(&a) + law.phi_star(&ga) - pairing).abs() / pairing;
        report.max_fenchel_young = report.max_fenchel_young.max(fy);
        all.push(a);
        all.push(b);
    }
    report.growth_bounds_hold = law.check_growth_bounds(&all).passed();
    Ok(report)
}

fn cmd_check_law(p: f64, eps_reg: f64, samples: usize, seed: u64, threads: Option<usize>) -> Result<Exit> {
    configure_threads(threads)?;
    let law = PowerLaw::new(p, eps_reg)?;
    let r = check_law(&law, samples, seed)?;
    let mut s = String::new();
    let _ = writeln!(s, "p = {p}, eps_reg = {eps_reg}, samples = {samples}, seed = {seed}");
    let _ = writeln!(s, "min monotonicity pairing: {:.6e}", r.min_monotonicity);
    let _ = writeln!(s, "max inverse roundtrip error: {:.6e}", r.max_roundtrip);
    let _ = writeln!(s, "max root-find roundtrip error: {:.6e}", r.max_roundtrip_root_find);
    let _ = writeln!(s, "max Fenchel-Young defect: {:.6e}", r.max_fenchel_young);
    let _ = writeln!(s, "growth bounds: {}", if r.growth_bounds_hold { "hold" } else { "VIOLATED" });
    emit(&s);
    let ok = r.min_monotonicity >= 0.0
        && r.max_roundtrip <= 1e-10
        && r.max_roundtrip_root_find <= 1e-8
        && r.max_fenchel_young <= 1e-10
        && r.growth_bounds_hold;
    Ok(if ok { Exit::Success } else { Exit::Invalid })
}

pub fn execute(cli: Cli) -> Result<Exit> {
    match cli.command {
        Command::Run { scenario, common, n } => cmd_run(&scenario, &common, n),
        Command::Sweep { scenario, common } => cmd_sweep(&scenario, &common),
        Command::Paradox { scenario, common } => cmd_paradox(&scenario, &common),
        Command::CheckLaw {
            p,
            eps_reg,
            samples,
            seed,
            threads,
        } => cmd_check_law(p, eps_reg, samples, seed, threads),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Invalid.code() } else { 0 };
        }
    };
    match execute(cli) {
        Ok(exit) => exit.code(),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Solver(_) => Exit::SolverFailure.code(),
                Error::Paradox(ParadoxError::InconclusiveResolution { .. }) => Exit::Inconclusive.code(),
                _ => Exit::Invalid.code(),
            }
        }
    }
}
