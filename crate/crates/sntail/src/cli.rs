//! Command-line front end. `main` only forwards to [`run`], so the whole
//! interface can be driven from tests.
//!
//! Exit codes: 0 success, 1 verification or fit failure, 2 usage error.

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{derive_with, Boundary, Group, Parameters};
use crate::conditional::log_dcdu_exact;
use crate::error::Error;
use crate::integral_asym::{exact_integral, theorem1_asym, Regime, Theorem1Input};
use crate::sn_special::{sn_log_cdf, sn_quantile};
use crate::tail_order::{
    dcopula_rv_with, empirical_exponent_fit, fit_rv_samples, printed_closed_form, tail_dependence_asym,
    tail_dependence_asym_with, PrintedForm, RvForm, SummandBranch,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CSV_HEADER: &str = "u_log,log_exact,log_asym,ratio,summand1_log,summand2_log";

/// Grid used by `fit` when none is given.
pub const DEFAULT_FIT_GRID: &str = "-40:-400:-40";

#[derive(Parser, Debug)]
#[command(name = "sntail", version, about = "Lower-tail asymptotics of the bivariate skew-normal copula")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify the parameters and report the tail order and slowly varying part
    Analyze(AnalyzeArgs),
    /// Compare the asymptotic dC(u,u)/du with exact quadrature over a grid
    Verify(VerifyArgs),
    /// Fit (theta, tau2) to exact values and compare with the analytic ones
    Fit(FitArgs),
    /// Run a short internal consistency suite
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryFlag {
    Lambda1,
    Lambda2,
    Beta1,
    Beta2,
    Discriminant,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Quantities that sit exactly on a classification boundary
    #[arg(long, value_enum, value_delimiter = ',')]
    pub boundary: Vec<BoundaryFlag>,
}

#[derive(Args, Debug, Clone)]
pub struct LevelArgs {
    /// Probability level as a decimal string, e.g. 1e-300
    #[arg(long)]
    pub u: Vec<String>,
    /// Natural log of the probability level
    #[arg(long, allow_negative_numbers = true)]
    pub u_log: Vec<f64>,
    /// Grid of log levels as "start:stop:step"
    #[arg(long, allow_hyphen_values = true)]
    pub u_log_grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    /// File with one "alpha1 alpha2 rho" set per line ("-" for stdin)
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Fail when any row has |ratio - 1| above this value
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Allowed |theta_hat/theta - 1|
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    /// Fit synthetic data from "theta,log_tau1,tau2" instead of exact values
    #[arg(long, allow_hyphen_values = true)]
    pub inject_rvform: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Unsupported(_) => EXIT_USAGE,
            _ => EXIT_FAIL,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_FAIL, msg: e.to_string() }
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Parse `args` (including the program name) and execute.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let r = match cli.command {
        Command::Analyze(a) => run_analyze(&a, out),
        Command::Verify(a) => run_verify(&a, out, err),
        Command::Fit(a) => run_fit(&a, out),
        Command::Selftest(a) => run_selftest(&a, out),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn params_of(a: &ParamArgs) -> std::result::Result<(Parameters, Boundary), Failure> {
    let (Some(a1), Some(a2), Some(rho)) = (a.alpha1, a.alpha2, a.rho) else {
        return Err(usage("--alpha1, --alpha2 and --rho are required"));
    };
    let p = Parameters::new(a1, a2, rho).map_err(|e| usage(e.to_string()))?;
    let mut b = Boundary::default();
    for f in &a.boundary {
        match f {
            BoundaryFlag::Lambda1 => b.lambda1 = true,
            BoundaryFlag::Lambda2 => b.lambda2 = true,
            BoundaryFlag::Beta1 => b.beta1 = true,
            BoundaryFlag::Beta2 => b.beta2 = true,
            BoundaryFlag::Discriminant => b.discriminant = true,
        }
    }
    Ok((p, b))
}

/// `ln u` from a decimal string, without underflowing for tiny `u`.
pub fn parse_u(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (m, e) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| format!("bad exponent in u = {s:?}"))?),
        None => (t, 0),
    };
    let m: f64 = m.parse().map_err(|_| format!("bad number u = {s:?}"))?;
    if !(m > 0.0) || !m.is_finite() {
        return Err(format!("u must be positive, got {s:?}"));
    }
    let l = m.ln() + e as f64 * LN_10;
    if !(l < 0.0) {
        return Err(format!("u must lie in (0, 1), got {s:?}"));
    }
    Ok(l)
}

/// Expand `"start:stop:step"`; the stop value is included when hit.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("grid must be start:stop:step, got {s:?}"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad grid value {x:?}"));
    let (a, b, h) = (num(a)?, num(b)?, num(h)?);
    if !(a.is_finite() && b.is_finite() && h.is_finite()) {
        return Err("grid values must be finite".into());
    }
    if a == b {
        return Ok(vec![a]);
    }
    if h == 0.0 || (b - a).signum() != h.signum() {
        return Err(format!("step {h} does not lead from {a} to {b}"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(format!("grid has {} points", n + 1));
    }
    Ok((0..=n).map(|k| a + k as f64 * h).collect())
}

fn levels(l: &LevelArgs) -> std::result::Result<Vec<f64>, Failure> {
    let mut v = Vec::new();
    for s in &l.u {
        v.push(parse_u(s).map_err(usage)?);
    }
    v.extend(&l.u_log);
    if let Some(g) = &l.u_log_grid {
        v.extend(parse_grid(g).map_err(usage)?);
    }
    Ok(v)
}

fn check_grid(g: &[f64]) -> std::result::Result<(), Failure> {
    if g.is_empty() {
        return Err(usage("empty grid: give --u, --u-log or --u-log-grid"));
    }
    if let Some(x) = g.iter().find(|&&x| !(-1e6..=-20.0).contains(&x)) {
        return Err(usage(format!("grid point {x} outside [-1e6, -20]")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SummandReport {
    pub index: u8,
    pub branch: SummandBranch,
    pub theta: f64,
    pub log_tau1: f64,
    pub tau2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Delta {
    pub theta: Option<f64>,
    pub tau2: Option<f64>,
    pub log_tau1: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub u_log: f64,
    pub log_exact_dcdu: f64,
    pub log_asym_dcdu: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub params: Parameters,
    pub boundary: Boundary,
    pub case: Option<String>,
    pub octant: Option<u8>,
    pub group: Option<Group>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub theta: f64,
    pub kappa: f64,
    pub tau2: f64,
    pub log_tau1: f64,
    #[serde(rename = "lambdaL")]
    pub lambda_l: RvForm,
    pub summands: Vec<SummandReport>,
    /// Summands evaluated through the exact `Φ(A/s)` form (zero skewness weight).
    pub closed_form_summands: Vec<u8>,
    pub printed: Option<PrintedForm>,
    /// Composed minus printed.
    pub delta: Option<Delta>,
    pub formula: String,
    pub extrapolated: bool,
    pub warnings: Vec<String>,
    pub evaluation: Option<Evaluation>,
}

fn rv_text(f: &RvForm) -> String {
    format!("{:.6e} * u^{:.6} * (-log u)^{:.6}", f.tau1(), f.theta, f.tau2)
}

pub fn analyze(p: &Parameters, b: Boundary, u_log: Option<f64>) -> crate::Result<AnalyzeReport> {
    let t = tail_dependence_asym_with(p, b)?;
    let (mut summands, mut closed, mut printed, mut delta) = (Vec::new(), Vec::new(), None, None);
    let (mut gamma1, mut beta1, mut beta2) = (None, None, None);
    if p.is_normal() {
        closed = vec![1, 2];
    } else {
        let d = derive_with(p, b)?;
        (gamma1, beta1, beta2) = (Some(d.gamma1), Some(d.beta1), Some(d.beta2));
        let dc = dcopula_rv_with(p, b)?;
        for (i, f, br) in [(1u8, dc.summand1, dc.branch1), (2, dc.summand2, dc.branch2)] {
            if br == SummandBranch::ClosedForm {
                closed.push(i);
            }
            summands.push(SummandReport { index: i, branch: br, theta: f.theta, log_tau1: f.log_tau1, tau2: f.tau2 });
        }
        let pr = printed_closed_form(p, b)?;
        delta = Some(Delta {
            theta: pr.theta.map(|x| t.dcdu.theta - x),
            tau2: pr.tau2.map(|x| t.dcdu.tau2 - x),
            log_tau1: pr.log_tau1.map(|x| t.dcdu.log_tau1 - x),
        });
        printed = Some(pr);
    }
    let evaluation = match u_log {
        Some(u) => {
            let ex = log_dcdu_exact(u, p)?.total;
            let asym = t.dcdu.eval(u);
            Some(Evaluation { u_log: u, log_exact_dcdu: ex, log_asym_dcdu: asym, ratio: (ex - asym).exp() })
        }
        None => None,
    };
    Ok(AnalyzeReport {
        params: *p,
        boundary: b,
        case: t.case.map(|c| c.label()),
        octant: t.case.map(|c| c.octant),
        group: t.case.map(|c| c.group),
        lambda1: p.lambda1(),
        lambda2: p.lambda2(),
        gamma1,
        beta1,
        beta2,
        theta: t.dcdu.theta,
        kappa: t.kappa,
        tau2: t.dcdu.tau2,
        log_tau1: t.dcdu.log_tau1,
        lambda_l: t.lambda_l,
        summands,
        closed_form_summands: closed,
        printed,
        delta,
        formula: format!("dC(u,u)/du ~ {}; lambda_L(u) ~ {}", rv_text(&t.dcdu), rv_text(&t.lambda_l)),
        extrapolated: t.extrapolated,
        warnings: t.warnings,
        evaluation,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.12}"))
}

fn analyze_text(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    let p = &r.params;
    let _ = writeln!(s, "params      alpha1={} alpha2={} rho={}", p.alpha1, p.alpha2, p.rho);
    let _ = writeln!(s, "case        {}", r.case.as_deref().unwrap_or("none (bivariate normal)"));
    let _ = writeln!(s, "lambda      {:.12} {:.12}", r.lambda1, r.lambda2);
    let _ = writeln!(s, "gamma1      {}", opt(r.gamma1));
    let _ = writeln!(s, "beta        {} {}", opt(r.beta1), opt(r.beta2));
    let _ = writeln!(s, "theta       {:.12}", r.theta);
    let _ = writeln!(s, "kappa       {:.12}", r.kappa);
    let _ = writeln!(s, "tau2        {:.12}", r.tau2);
    let _ = writeln!(s, "log_tau1    {:.12}", r.log_tau1);
    let _ = writeln!(s, "formula     {}", r.formula);
    for sm in &r.summands {
        let _ = writeln!(
            s,
            "summand {}   {:?} theta={:.12} log_tau1={:.12} tau2={:.12}",
            sm.index, sm.branch, sm.theta, sm.log_tau1, sm.tau2
        );
    }
    if !r.closed_form_summands.is_empty() {
        let _ = writeln!(s, "closed form summands {:?}", r.closed_form_summands);
    }
    if let (Some(pr), Some(d)) = (&r.printed, &r.delta) {
        let _ = writeln!(s, "printed     theta={} tau2={} log_tau1={}", opt(pr.theta), opt(pr.tau2), opt(pr.log_tau1));
        let _ = writeln!(s, "delta       theta={} tau2={} log_tau1={}", opt(d.theta), opt(d.tau2), opt(d.log_tau1));
        if let Some(n) = &pr.note {
            let _ = writeln!(s, "note        {n}");
        }
    }
    if let Some(e) = &r.evaluation {
        let _ = writeln!(
            s,
            "at u_log={}  log_exact={:.12} log_asym={:.12} ratio={:.6}",
            e.u_log, e.log_exact_dcdu, e.log_asym_dcdu, e.ratio
        );
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning     {w}");
    }
    s
}

const ANALYZE_CSV_HEADER: &str = "alpha1,alpha2,rho,case,theta,kappa,tau2,log_tau1";

fn analyze_csv(r: &AnalyzeReport) -> String {
    let p = &r.params;
    format!(
        "{},{},{},{},{},{},{},{}",
        p.alpha1,
        p.alpha2,
        p.rho,
        r.case.as_deref().unwrap_or(""),
        r.theta,
        r.kappa,
        r.tau2,
        r.log_tau1
    )
}

fn parse_batch_line(line: &str) -> std::result::Result<Parameters, String> {
    let v: Vec<f64> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [a1, a2, rho] = v[..] else {
        return Err(format!("expected 3 values, got {}", v.len()));
    };
    Parameters::new(a1, a2, rho).map_err(|e| e.to_string())
}

fn run_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> CliResult {
    let lv = levels(&a.level)?;
    if lv.len() > 1 {
        return Err(usage(format!("analyze evaluates at most one level, got {}; use verify for grids", lv.len())));
    }
    let u = lv.first().copied();
    if let Some(path) = &a.batch {
        let text = if path == "-" {
            let mut s = String::new();
            for l in std::io::stdin().lock().lines() {
                s.push_str(&l?);
                s.push('\n');
            }
            s
        } else {
            std::fs::read_to_string(path)?
        };
        let b = params_of(&ParamArgs { alpha1: Some(0.0), alpha2: Some(0.0), rho: Some(0.0), ..a.params.clone() })?.1;
        let mut reports = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let p = parse_batch_line(line).map_err(|m| usage(format!("line {}: {m}", n + 1)))?;
            reports.push(analyze(&p, b, u)?);
        }
        match a.format {
            Format::Json => {
                for r in &reports {
                    writeln!(out, "{}", serde_json::to_string(r).expect("report serializes"))?;
                }
            }
            Format::Csv => {
                writeln!(out, "{ANALYZE_CSV_HEADER}")?;
                for r in &reports {
                    writeln!(out, "{}", analyze_csv(r))?;
                }
            }
            Format::Text => {
                for r in &reports {
                    writeln!(out, "{}", analyze_text(r))?;
                }
            }
        }
        return Ok(EXIT_OK);
    }
    let (p, b) = params_of(&a.params)?;
    let r = analyze(&p, b, u)?;
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&r).expect("report serializes"))?,
        Format::Csv => writeln!(out, "{ANALYZE_CSV_HEADER}\n{}", analyze_csv(&r))?,
        Format::Text => write!(out, "{}", analyze_text(&r))?,
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub u_log: f64,
    pub log_exact_dcdu: Option<f64>,
    pub log_asym_dcdu: Option<f64>,
    /// `exp(log_exact - log_asym)`.
    pub ratio: Option<f64>,
    pub summand1_log: Option<f64>,
    pub summand2_log: Option<f64>,
    pub summand1_asym_log: Option<f64>,
    pub summand2_asym_log: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendSummary {
    pub rows: usize,
    pub failed: usize,
    /// Steps where `|log ratio|` decreased, out of `steps`.
    pub decreasing_steps: usize,
    pub steps: usize,
    pub monotone: bool,
    pub first_abs_log_ratio: Option<f64>,
    pub last_abs_log_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub params: Parameters,
    pub boundary: Boundary,
    pub rows: Vec<VerifyRow>,
    pub summary: TrendSummary,
}

pub fn verify(p: &Parameters, b: Boundary, grid: &[f64]) -> crate::Result<VerifyReport> {
    let total = tail_dependence_asym_with(p, b)?.dcdu;
    let parts = if p.is_normal() { None } else { Some(dcopula_rv_with(p, b)?) };
    let rows: Vec<VerifyRow> = grid
        .par_iter()
        .map(|&u| {
            let asym = total.eval(u);
            let (s1a, s2a) = parts.map_or((None, None), |d| (Some(d.summand1.eval(u)), Some(d.summand2.eval(u))));
            match log_dcdu_exact(u, p) {
                Ok(ex) => VerifyRow {
                    u_log: u,
                    log_exact_dcdu: Some(ex.total),
                    log_asym_dcdu: Some(asym),
                    ratio: Some((ex.total - asym).exp()),
                    summand1_log: Some(ex.summand1),
                    summand2_log: Some(ex.summand2),
                    summand1_asym_log: s1a,
                    summand2_asym_log: s2a,
                    error: None,
                },
                Err(e) => VerifyRow {
                    u_log: u,
                    log_exact_dcdu: None,
                    log_asym_dcdu: Some(asym),
                    ratio: None,
                    summand1_log: None,
                    summand2_log: None,
                    summand1_asym_log: s1a,
                    summand2_asym_log: s2a,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.ratio.map(|x| x.ln().abs())).collect();
    let steps = errs.len().saturating_sub(1);
    let dec = errs.windows(2).filter(|w| w[1] < w[0]).count();
    let summary = TrendSummary {
        rows: rows.len(),
        failed: rows.iter().filter(|r| r.error.is_some()).count(),
        decreasing_steps: dec,
        steps,
        monotone: dec == steps,
        first_abs_log_ratio: errs.first().copied(),
        last_abs_log_ratio: errs.last().copied(),
    };
    Ok(VerifyReport { params: *p, boundary: b, rows, summary })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

fn summary_line(s: &TrendSummary) -> String {
    format!(
        "# trend: |log ratio| decreased in {}/{} steps (monotone: {}), {} -> {}; {} of {} rows failed",
        s.decreasing_steps,
        s.steps,
        s.monotone,
        opt(s.first_abs_log_ratio),
        opt(s.last_abs_log_ratio),
        s.failed,
        s.rows
    )
}

fn run_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let (p, b) = params_of(&a.params)?;
    let grid = levels(&a.level)?;
    check_grid(&grid)?;
    if let Some(t) = a.tolerance {
        if !(t > 0.0) {
            return Err(usage(format!("tolerance must be positive, got {t}")));
        }
    }
    let rep = verify(&p, b, &grid)?;
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rep).expect("report serializes"))?,
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in &rep.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.u_log,
                    cell(r.log_exact_dcdu),
                    cell(r.log_asym_dcdu),
                    cell(r.ratio),
                    cell(r.summand1_log),
                    cell(r.summand2_log)
                )?;
            }
            writeln!(err, "{}", summary_line(&rep.summary))?;
        }
        Format::Text => {
            writeln!(out, "{:>12} {:>22} {:>22} {:>12}", "u_log", "log_exact", "log_asym", "ratio")?;
            for r in &rep.rows {
                match &r.error {
                    None => writeln!(
                        out,
                        "{:>12} {:>22.12} {:>22.12} {:>12.8}",
                        r.u_log,
                        r.log_exact_dcdu.unwrap_or(f64::NAN),
                        r.log_asym_dcdu.unwrap_or(f64::NAN),
                        r.ratio.unwrap_or(f64::NAN)
                    )?,
                    Some(e) => writeln!(out, "{:>12} FAILED {e}", r.u_log)?,
                }
            }
            writeln!(out, "{}", summary_line(&rep.summary))?;
        }
    }
    for r in rep.rows.iter().filter(|r| r.error.is_some()) {
        writeln!(err, "row u_log={} failed: {}", r.u_log, r.error.as_deref().unwrap_or(""))?;
    }
    if rep.summary.failed > 0 {
        return Ok(EXIT_FAIL);
    }
    if let Some(t) = a.tolerance {
        if rep.rows.iter().any(|r| r.ratio.is_some_and(|x| (x - 1.0).abs() > t)) {
            writeln!(err, "ratio outside 1 +/- {t}")?;
            return Ok(EXIT_FAIL);
        }
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub params: Option<Parameters>,
    /// `exact` or `injected`.
    pub source: &'static str,
    pub grid: Vec<f64>,
    pub theta_hat: f64,
    pub tau2_hat: f64,
    pub log_tau1_hat: f64,
    pub resid: f64,
    pub theta: f64,
    pub tau2: f64,
    pub log_tau1: f64,
    pub theta_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn parse_rvform(s: &str) -> std::result::Result<RvForm, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [theta, log_tau1, tau2] = v[..] else {
        return Err(format!("--inject-rvform needs theta,log_tau1,tau2, got {s:?}"));
    };
    Ok(RvForm { theta, log_tau1, tau2 })
}

fn run_fit(a: &FitArgs, out: &mut dyn Write) -> CliResult {
    if !(a.tolerance > 0.0) {
        return Err(usage(format!("tolerance must be positive, got {}", a.tolerance)));
    }
    let mut grid = levels(&a.level)?;
    if grid.is_empty() {
        grid = parse_grid(DEFAULT_FIT_GRID).map_err(usage)?;
    }
    let (params, source, target, fit) = match &a.inject_rvform {
        Some(s) => {
            let f = parse_rvform(s).map_err(usage)?;
            let vals: Vec<f64> = grid.iter().map(|&u| f.eval(u)).collect();
            (None, "injected", f, fit_rv_samples(&grid, &vals).map_err(fit_failure)?)
        }
        None => {
            let (p, b) = params_of(&a.params)?;
            let t = tail_dependence_asym_with(&p, b)?.dcdu;
            (Some(p), "exact", t, empirical_exponent_fit(&p, &grid).map_err(fit_failure)?)
        }
    };
    let rel = fit.theta_hat / target.theta - 1.0;
    let rep = FitReport {
        params,
        source,
        grid,
        theta_hat: fit.theta_hat,
        tau2_hat: fit.tau2_hat,
        log_tau1_hat: fit.log_tau1_hat,
        resid: fit.resid,
        theta: target.theta,
        tau2: target.tau2,
        log_tau1: target.log_tau1,
        theta_rel_error: rel,
        tolerance: a.tolerance,
        pass: rel.abs() <= a.tolerance,
    };
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rep).expect("report serializes"))?,
        Format::Csv => writeln!(
            out,
            "theta_hat,tau2_hat,log_tau1_hat,resid,theta,tau2,log_tau1,theta_rel_error,pass\n{},{},{},{},{},{},{},{},{}",
            rep.theta_hat,
            rep.tau2_hat,
            rep.log_tau1_hat,
            rep.resid,
            rep.theta,
            rep.tau2,
            rep.log_tau1,
            rep.theta_rel_error,
            rep.pass
        )?,
        Format::Text => writeln!(
            out,
            "source    {}\ntheta_hat {:.10} (analytic {:.10}, rel error {:+.3e})\ntau2_hat  {:.10} (analytic {:.10})\nresid     {:.3e}\n{}",
            rep.source,
            rep.theta_hat,
            rep.theta,
            rep.theta_rel_error,
            rep.tau2_hat,
            rep.tau2,
            rep.resid,
            if rep.pass { "PASS" } else { "FAIL" }
        )?,
    }
    Ok(if rep.pass { EXIT_OK } else { EXIT_FAIL })
}

/// Grid problems are usage errors; anything else a fit failure.
fn fit_failure(e: Error) -> Failure {
    match e {
        Error::Domain(m) | Error::Numerical(m) => usage(m),
        e => e.into(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: e.to_string() },
    }
}

/// A fast subset of the test suite, runnable from an installed binary.
pub fn selftest() -> Vec<Check> {
    vec![
        check("negative skew at rho = 0", || {
            let t = tail_dependence_asym(&Parameters::new(-1.0, -1.0, 0.0)?)?;
            let d = t.dcdu;
            let ok = (d.theta - 1.0).abs() < 1e-12 && d.tau2.abs() < 1e-12 && d.log_tau1.abs() < 1e-12 && t.kappa == 2.0;
            Ok((ok, format!("theta={} tau2={} log_tau1={}", d.theta, d.tau2, d.log_tau1)))
        }),
        check("equi-skew theta = beta^2", || {
            let t = tail_dependence_asym(&Parameters::new(1.0, 1.0, 0.5)?)?;
            Ok(((t.dcdu.theta - 4.0 / 3.0).abs() < 1e-12, format!("theta={}", t.dcdu.theta)))
        }),
        check("quantile round trip", || {
            let mut worst = 0.0f64;
            for lambda in [-3.0, 0.0, 2.0] {
                for l in [-1e-6, -0.5, -30.0, -1e4] {
                    let x = sn_quantile(l, lambda)?;
                    worst = worst.max((sn_log_cdf(x, lambda)? - l).abs() / l.abs());
                }
            }
            Ok((worst <= 1e-10, format!("max rel error {worst:.2e}")))
        }),
        check("three-regime integral at |a| = 30", || {
            let mut worst = 0.0f64;
            for (k, regime) in [(0.0, Regime::VToNegInf), (-2.0, Regime::VToZero), (-3.0, Regime::VToPosInf)] {
                let inp = Theorem1Input { a: -30.0, b: -30.0 * k, c: 1.0, k, regime };
                let r = exact_integral(inp.a, inp.b, 1.0)?.log_v - theorem1_asym(&inp)?.log_v;
                worst = worst.max(r.exp_m1().abs());
            }
            Ok((worst < 0.05, format!("max |ratio - 1| {worst:.3e}")))
        }),
        check("exact vs asymptotic at u_log = -200", || {
            let p = Parameters::new(1.0, 2.0, 0.3)?;
            let r = verify(&p, Boundary::default(), &[-200.0])?;
            let x = r.rows[0].ratio.unwrap_or(f64::NAN);
            Ok(((0.75..=1.33).contains(&x), format!("ratio {x:.6}")))
        }),
        check("normal is flagged as extrapolated", || {
            let t = tail_dependence_asym(&Parameters::new(0.0, 0.0, 0.3)?)?;
            Ok((t.extrapolated && !t.warnings.is_empty(), format!("theta={}", t.dcdu.theta)))
        }),
    ]
}

fn run_selftest(a: &SelftestArgs, out: &mut dyn Write) -> CliResult {
    let checks = selftest();
    let ok = checks.iter().all(|c| c.pass);
    match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Rep<'a> {
                checks: &'a [Check],
                pass: bool,
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&Rep { checks: &checks, pass: ok }).expect("serializes"))?
        }
        Format::Csv => {
            writeln!(out, "name,pass,detail")?;
            for c in &checks {
                writeln!(out, "{},{},\"{}\"", c.name, c.pass, c.detail.replace('"', "'"))?;
            }
        }
        Format::Text => {
            for c in &checks {
                writeln!(out, "{} {:<36} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-50:-200:-50").unwrap(), vec![-50.0, -100.0, -150.0, -200.0]);
        assert_eq!(parse_grid("-200:-50:75").unwrap(), vec![-200.0, -125.0, -50.0]);
        assert_eq!(parse_grid("-50:-50:10").unwrap(), vec![-50.0]);
        assert!(parse_grid("-50:-200:50").is_err());
        assert!(parse_grid("-50:-200").is_err());
    }

    #[test]
    fn u_parsing() {
        assert!((parse_u("1e-400").unwrap() + 400.0 * LN_10).abs() < 1e-9);
        assert!((parse_u("0.5").unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!(parse_u("2").is_err() && parse_u("-1e-3").is_err() && parse_u("x").is_err());
    }
}
