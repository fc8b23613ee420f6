//! Command-line front end. Payloads go to `out`, diagnostics to `err`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::lpv_model::PlantFamily;
use crate::lyapunov::{solve_common_p, verify_common_p, Certificate, Perturbation, SolverOptions, VertexSet};
use crate::numerics::DenseMatrix;
use crate::sim::{bounds_report, prepare, run, Scenario, SimTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    /// Invalid certificate or violated bound.
    Violation = 1,
    BadInput = 2,
    Diverged = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::Integration { .. } => ExitStatus::Diverged,
            _ => ExitStatus::BadInput,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gsmrac", version, about = "Gain-scheduled adaptive control toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Common Lyapunov certificates for the reference family.
    Lyapunov {
        #[command(subcommand)]
        cmd: LyapunovCmd,
    },
    /// Run one or more scenario files.
    Simulate(SimulateArgs),
    /// Split trace columns into `(t, value)` series files.
    Plotdata(PlotArgs),
}

#[derive(Debug, Subcommand)]
enum LyapunovCmd {
    Verify(VerifyArgs),
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// Plant family JSON; the bundled engine family when omitted.
    #[arg(long)]
    pub family: Option<PathBuf>,
    /// `Q` as a scalar multiple of the identity or a JSON matrix file.
    #[arg(long, default_value = "0.1")]
    pub q: String,
    /// Uniform scheduling samples added to the published equilibria.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Leave the published equilibria out of the vertex set.
    #[arg(long)]
    pub no_equilibria: bool,
    /// Number of randomly perturbed vertices.
    #[arg(long, default_value_t = 0)]
    pub perturb: usize,
    #[arg(long, default_value_t = 0.05)]
    pub perturb_delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub fam: FamilyArgs,
    /// Candidate `P`; the bundled published matrix when omitted.
    #[arg(long)]
    pub p: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub fam: FamilyArgs,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub eps_pd: Option<f64>,
    #[arg(long)]
    pub trace_cap: Option<f64>,
    #[arg(long)]
    pub target_margin: Option<f64>,
    /// Also write the certificate here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Trace CSV (single scenario only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bounds report JSON (single scenario only).
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    /// Directory for `<stem>.csv` and `<stem>.bounds.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub trace: PathBuf,
    /// Comma-separated column names; a trailing `*` matches a prefix.
    #[arg(long, value_delimiter = ',', required = true)]
    pub columns: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_file(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_family(p: &Option<PathBuf>) -> Result<PlantFamily<f64>> {
    match p {
        Some(p) => PlantFamily::load(p),
        None => PlantFamily::from_json_str(fixtures::ENGINE_FAMILY),
    }
}

fn parse_q(spec: &str, n: usize) -> Result<DenseMatrix<f64>> {
    match spec.trim().parse::<f64>() {
        Ok(c) => Ok(DenseMatrix::scaled_identity(n, c)),
        Err(_) => fixtures::parse_matrix(&read(Path::new(spec))?, spec),
    }
}

fn vertex_set(fam: &PlantFamily<f64>, a: &FamilyArgs, default_grid: usize) -> Result<VertexSet<f64>> {
    let grid = fam.alpha_grid(a.grid.unwrap_or(default_grid));
    let perturb = (a.perturb > 0).then_some(Perturbation {
        count: a.perturb,
        delta: a.perturb_delta,
        seed: a.seed,
    });
    VertexSet::from_family(fam, &grid, !a.no_equilibria, perturb)
}

fn emit_certificate(c: &Certificate<f64>, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let _ = writeln!(out, "{}", c.to_json());
    if c.valid {
        ExitStatus::Success
    } else {
        let _ = writeln!(err, "certificate invalid: {}", c.reason.as_deref().unwrap_or("unknown"));
        ExitStatus::Violation
    }
}

pub fn cmd_lyapunov_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<ExitStatus> {
    let fam = load_family(&a.fam.family)?;
    let p = match &a.p {
        Some(p) => fixtures::parse_matrix(&read(p)?, &p.display().to_string())?,
        None => fixtures::published_p(),
    };
    let q = parse_q(&a.fam.q, fam.state_dim())?;
    let v = vertex_set(&fam, &a.fam, 0)?;
    let c = verify_common_p(&p, &q, &v)?;
    Ok(emit_certificate(&c, out, err))
}

#[derive(Serialize)]
struct Infeasible {
    valid: bool,
    reason: String,
}

pub fn cmd_lyapunov_solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<ExitStatus> {
    let fam = load_family(&a.fam.family)?;
    let q = parse_q(&a.fam.q, fam.state_dim())?;
    let v = vertex_set(&fam, &a.fam, 30)?;
    let d = SolverOptions::default();
    let opts = SolverOptions {
        eps_pd: a.eps_pd.unwrap_or(d.eps_pd),
        trace_cap: a.trace_cap.or(d.trace_cap),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        target_margin: a.target_margin.unwrap_or(d.target_margin),
    };
    match solve_common_p(&v, &q, &opts) {
        Ok(c) => {
            if let Some(p) = &a.out {
                write_file(p, &c.to_json())?;
            }
            Ok(emit_certificate(&c, out, err))
        }
        Err(e @ Error::NotHurwitz { .. }) => {
            let body = Infeasible {
                valid: false,
                reason: e.to_string(),
            };
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("serializes"));
            let _ = writeln!(err, "infeasible: {e}");
            Ok(ExitStatus::Violation)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Serialize)]
struct SimSummary {
    scenario: String,
    exit: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failed_checks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_violation_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn simulate_one(path: &Path, csv: &Path, bounds: &Path) -> (SimSummary, Vec<String>) {
    let mut s = SimSummary {
        scenario: path.display().to_string(),
        exit: 0,
        rows: None,
        csv: None,
        bounds: None,
        failed_checks: Vec::new(),
        first_violation_t: None,
        error: None,
    };
    let mut diag = Vec::new();
    let result = (|| -> Result<ExitStatus> {
        let prep = prepare(Scenario::<f64>::load(path)?)?;
        let trace = run(&prep)?;
        trace.save(csv)?;
        s.rows = Some(trace.len());
        s.csv = Some(csv.display().to_string());
        let rep = bounds_report(&prep, &trace)?;
        write_file(bounds, &rep.to_json())?;
        s.bounds = Some(bounds.display().to_string());
        for c in rep.checks.iter().filter(|c| !c.passed) {
            s.failed_checks.push(c.name.clone());
            if s.first_violation_t.is_none() {
                s.first_violation_t = c.first_violation_t;
            }
            diag.push(format!(
                "{}: check {} failed (observed {:e}, limit {:e}{})",
                path.display(),
                c.name,
                c.observed,
                c.limit,
                c.first_violation_t.map(|t| format!(", first at t = {t}")).unwrap_or_default()
            ));
        }
        Ok(if rep.passed { ExitStatus::Success } else { ExitStatus::Violation })
    })();
    let status = match result {
        Ok(st) => st,
        Err(e) => {
            diag.push(format!("{}: {e}", path.display()));
            s.error = Some(e.to_string());
            ExitStatus::from_error(&e)
        }
    };
    s.exit = status.code();
    (s, diag)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<ExitStatus> {
    if a.scenarios.len() > 1 && (a.out.is_some() || a.bounds.is_some()) {
        return Err(Error::Domain("--out and --bounds need a single scenario; use --out-dir".into()));
    }
    let targets: Vec<(PathBuf, PathBuf, PathBuf)> = a
        .scenarios
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
            let csv = a.out.clone().unwrap_or_else(|| a.out_dir.join(format!("{stem}.csv")));
            let bounds = a.bounds.clone().unwrap_or_else(|| a.out_dir.join(format!("{stem}.bounds.json")));
            (p.clone(), csv, bounds)
        })
        .collect();
    let results: Mutex<Vec<Option<(SimSummary, Vec<String>)>>> = Mutex::new((0..targets.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let jobs = a.jobs.clamp(1, targets.len().max(1));
    std::thread::scope(|sc| {
        for _ in 0..jobs {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((p, c, b)) = targets.get(i) else { break };
                let r = simulate_one(p, c, b);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    let mut worst = ExitStatus::Success;
    for (summary, diag) in results.into_inner().expect("workers joined").into_iter().flatten() {
        for d in diag {
            let _ = writeln!(err, "{d}");
        }
        let _ = writeln!(out, "{}", serde_json::to_string(&summary).expect("serializes"));
        let st = match summary.exit {
            0 => ExitStatus::Success,
            1 => ExitStatus::Violation,
            3 => ExitStatus::Diverged,
            _ => ExitStatus::BadInput,
        };
        worst = worst.max(st);
    }
    Ok(worst)
}

fn select_columns(tr: &SimTrace<f64>, req: &[String]) -> Result<Vec<usize>> {
    let mut idx = Vec::new();
    for r in req {
        let found: Vec<usize> = match r.strip_suffix('*') {
            Some(prefix) => tr.indices_with_prefix(prefix),
            None => tr.index(r).into_iter().collect(),
        };
        if found.is_empty() {
            return Err(Error::Domain(format!(
                "unknown column {r}; available: {}",
                tr.header().join(",")
            )));
        }
        idx.extend(found);
    }
    Ok(idx)
}

pub fn cmd_plotdata(a: &PlotArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<ExitStatus> {
    let tr = SimTrace::load(&a.trace)?;
    if tr.is_empty() {
        return Err(Error::Data(format!("{} has no rows", a.trace.display())));
    }
    let t = tr
        .index("t")
        .ok_or_else(|| Error::Data("trace has no t column".into()))?;
    let cols = select_columns(&tr, &a.columns)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    for j in cols {
        let name = &tr.header()[j];
        let mut series = SimTrace::with_capacity(vec!["t".into(), name.clone()], tr.len());
        for row in tr.rows() {
            series.push(vec![row[t], row[j]])?;
        }
        let path = a.out.join(format!("{name}.csv"));
        series.save(&path)?;
        written.push(path.display().to_string());
    }
    let _ = writeln!(out, "{}", serde_json::to_string(&written).expect("serializes"));
    Ok(ExitStatus::Success)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { ExitStatus::BadInput } else { ExitStatus::Success };
        }
    };
    let r = match &cli.cmd {
        Command::Lyapunov { cmd: LyapunovCmd::Verify(a) } => cmd_lyapunov_verify(a, out, err),
        Command::Lyapunov { cmd: LyapunovCmd::Solve(a) } => cmd_lyapunov_solve(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Plotdata(a) => cmd_plotdata(a, out, err),
    };
    match r {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitStatus::from_error(&e)
        }
    }
}
