//! Command-line experiment runner.
//!
//! Every subcommand maps onto one harness operation and writes a JSON
//! document `{"schema": 1, "config": ..., "reports": [...], "timestamp": ...}`
//! plus an optional CSV companion. Options come from flags or from a
//! `key=value` config file; flags win.
//!
//! Exit codes: 0 success, 1 some inequality was violated, 2 invalid
//! configuration, 3 solver failure, 4 unwritable output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::domain::{Domain1D, GridFunction, Mesh1D};
use crate::error::Error;
use crate::fracop::FracOperator;
use crate::isoperimetry::{
    default_tol, standard_alpha_grid, suite_domains, Alpha, Harness, InequalityReport, KJScan, Verdict,
};
use crate::par;
use crate::rearrange::{self, RearrangementProfile};
use crate::spectral::{principal_eigenpair, richardson};
use crate::specfun::{ball_torsion_coefficient, normalization_gamma, unit_ball_torsional_rigidity_exact, FracOrder};
use crate::torsion::{generalized_torsion, lambda1, UnitBallQCache};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "FRACISO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fraciso", version, about = "Fractional Dirichlet Laplacian isoperimetry laboratory")]
struct Cli {
    /// key=value file with defaults for any option below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check one inequality on every domain, order and mesh size
    Check {
        #[arg(value_enum)]
        which: CheckKind,
        #[command(flatten)]
        opts: Opts,
    },
    /// Kohler-Jobin scan over a shift grid
    Scan {
        #[arg(value_enum)]
        which: ScanKind,
        #[command(flatten)]
        opts: Opts,
    },
    /// Principal eigenvalue, extrapolated when three or more meshes are given
    Eig {
        #[command(flatten)]
        opts: Opts,
    },
    /// Generalized torsion for every shift
    Torsion {
        #[command(flatten)]
        opts: Opts,
    },
    /// Unit-interval table of Q#(beta, 1)
    Qgen {
        #[command(flatten)]
        opts: Opts,
    },
    /// Decreasing and Schwarz rearrangement of the torsion function
    Rearrange {
        #[command(flatten)]
        opts: Opts,
    },
    /// Closed-form special-function table
    Table {
        #[arg(value_enum)]
        which: TableKind,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CheckKind {
    Fk,
    Sv,
    Comp,
    Rh,
    Fkrh,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScanKind {
    Kj,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TableKind {
    Specfun,
}

#[derive(Debug, Clone, Default, Args)]
struct Opts {
    /// Domain literal such as "(-1,-0.2),(0.2,1)", or "suite"
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Fractional order(s), comma separated
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    /// Mesh size(s), comma separated
    #[arg(long = "M", allow_hyphen_values = true)]
    m: Option<String>,
    /// Shift grid: "start:stop:count", a comma list (suffix L scales by lambda1h), or "standard"
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
    /// Shift(s) for single-shift commands, comma list, suffix L allowed
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Exponents, comma separated; "inf" allowed
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Dimensions for the special-function table
    #[arg(long = "N", allow_hyphen_values = true)]
    n: Option<String>,
    /// Relative tolerance overriding the mesh-dependent default
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
    /// JSON output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for randomized comparisons
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
}

const KEYS: [&str; 11] = ["domain", "s", "M", "alphas", "alpha", "q", "N", "tol", "out", "csv", "seed"];

#[derive(Debug, Clone)]
enum Origin {
    Flag(&'static str),
    File(PathBuf, usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag(k) => write!(f, "flag --{k}"),
            Origin::File(p, line) => write!(f, "{} line {line}", p.display()),
        }
    }
}

#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, (String, Origin)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = Origin::File(path.to_path_buf(), k + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("{origin}: expected key=value, got {line:?}")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError(format!("{origin}: unknown key {key:?}")));
        }
        out.insert(key.to_string(), (value.trim().to_string(), origin));
    }
    Ok(out)
}

struct Merged(BTreeMap<&'static str, (String, Origin)>);

impl Merged {
    fn new(opts: &Opts, file: BTreeMap<String, (String, Origin)>) -> Self {
        let flags: [(&'static str, Option<String>); 11] = [
            ("domain", opts.domain.clone()),
            ("s", opts.s.clone()),
            ("M", opts.m.clone()),
            ("alphas", opts.alphas.clone()),
            ("alpha", opts.alpha.clone()),
            ("q", opts.q.clone()),
            ("N", opts.n.clone()),
            ("tol", opts.tol.clone()),
            ("out", opts.out.as_ref().map(|p| p.display().to_string())),
            ("csv", opts.csv.as_ref().map(|p| p.display().to_string())),
            ("seed", opts.seed.clone()),
        ];
        let mut map = BTreeMap::new();
        for (key, flag) in flags {
            if let Some(v) = flag {
                map.insert(key, (v, Origin::Flag(key)));
            } else if let Some(v) = file.get(key) {
                map.insert(key, v.clone());
            }
        }
        Merged(map)
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.0.get(key)
    }

    fn parse<T>(&self, key: &str, default: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        match self.get(key) {
            Some((v, origin)) => f(v).map_err(|e| ConfigError(format!("{origin}: invalid {key} {v:?}: {e}"))),
            None => f(default).map_err(|e| ConfigError(format!("default {key}: {e}"))),
        }
    }
}

fn parse_list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = text.split(',').map(|t| item(t.trim())).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn parse_f64(t: &str) -> Result<f64, String> {
    match t {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => t.parse::<f64>().map_err(|_| format!("{t:?} is not a number")),
    }
}

fn parse_order(t: &str) -> Result<f64, String> {
    let s = parse_f64(t)?;
    if s > 0.0 && s < 1.0 {
        Ok(s)
    } else {
        Err(format!("order must satisfy 0 < s < 1, got {s}"))
    }
}

fn parse_cells(t: &str) -> Result<usize, String> {
    let m: usize = t.parse().map_err(|_| format!("{t:?} is not a mesh size"))?;
    if m < 16 {
        return Err(format!("mesh size must be at least 16, got {m}"));
    }
    Ok(m)
}

fn parse_alpha(t: &str) -> Result<Alpha, String> {
    if let Some(rel) = t.strip_suffix('L') {
        let v = parse_f64(rel)?;
        if !(v < 1.0) || !v.is_finite() {
            return Err(format!("relative shift must be below 1, got {v}"));
        }
        Ok(Alpha::Relative(v))
    } else {
        let v = parse_f64(t)?;
        if !v.is_finite() {
            return Err("shift must be finite".into());
        }
        Ok(Alpha::Absolute(v))
    }
}

/// Parses `start:stop:count`, `standard`, or a comma list of shifts.
pub fn parse_alpha_grid(text: &str) -> Result<Vec<Alpha>, String> {
    let text = text.trim();
    if text == "standard" {
        return Ok(standard_alpha_grid());
    }
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (parse_f64(start)?, parse_f64(stop)?);
            let n: usize = count.trim().parse().map_err(|_| format!("{count:?} is not a count"))?;
            if n < 2 || !a.is_finite() || !b.is_finite() || !(a < b) {
                return Err("expected start < stop and count >= 2".into());
            }
            Ok((0..n)
                .map(|k| Alpha::Absolute(a + (b - a) * k as f64 / (n - 1) as f64))
                .collect())
        }
        [_] => parse_list(text, parse_alpha),
        _ => Err("expected start:stop:count".into()),
    }
}

fn parse_domains(t: &str) -> Result<Vec<Domain1D>, String> {
    if t.trim() == "suite" {
        return Ok(suite_domains());
    }
    t.parse::<Domain1D>().map(|d| vec![d]).map_err(|e| e.to_string())
}

fn parse_q(t: &str) -> Result<f64, String> {
    let q = parse_f64(t)?;
    if q > 1.0 {
        Ok(q)
    } else {
        Err(format!("exponent must exceed 1, got {q}"))
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub domains: Vec<String>,
    pub s: Vec<f64>,
    pub mesh_sizes: Vec<usize>,
    pub alphas: Vec<Alpha>,
    pub q: Vec<f64>,
    pub dims: Vec<u32>,
    pub tol: Option<f64>,
    pub seed: u64,
    #[serde(skip)]
    domain_values: Vec<Domain1D>,
    #[serde(skip)]
    out: Option<PathBuf>,
    #[serde(skip)]
    csv: Option<PathBuf>,
}

fn build_config(command: &str, opts: &Opts, file: Option<&Path>, defaults: &Defaults) -> Result<ExperimentConfig, ConfigError> {
    let file_map = match file {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let m = Merged::new(opts, file_map);
    let domain_values = m.parse("domain", "(-1,1)", parse_domains)?;
    let s = m.parse("s", defaults.s, |t| parse_list(t, parse_order))?;
    let mesh_sizes = m.parse("M", defaults.m, |t| parse_list(t, parse_cells))?;
    let alpha_key = if defaults.grid { "alphas" } else { "alpha" };
    let alphas = m.parse(alpha_key, defaults.alpha, parse_alpha_grid)?;
    let q = m.parse("q", defaults.q, |t| parse_list(t, parse_q))?;
    let dims = m.parse("N", "1,2,3", |t| {
        parse_list(t, |x| match x.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("{x:?} is not a dimension >= 1")),
        })
    })?;
    let tol = match m.get("tol") {
        Some(_) => Some(m.parse("tol", "", |t| match parse_f64(t) {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err("tolerance must be positive".into()),
        })?),
        None => None,
    };
    let seed = m.parse("seed", "0", |t| t.parse::<u64>().map_err(|_| format!("{t:?} is not a seed")))?;
    if defaults.ascending_meshes && mesh_sizes.windows(2).any(|w| w[1] <= w[0]) {
        let (_, origin) = m.get("M").cloned().unwrap_or(("".into(), Origin::Flag("M")));
        return Err(ConfigError(format!("{origin}: mesh sizes must increase")));
    }
    if defaults.fkrh {
        if let Some(bad) = q.iter().find(|q| **q > 8.0) {
            return Err(ConfigError(format!("exponent grid must lie in (1, 8], got {bad}")));
        }
    }
    // under-resolved domains are configuration errors
    for d in &domain_values {
        for &cells in &mesh_sizes {
            for level in [cells / 2, cells] {
                if let Err(e) = Mesh1D::build(d, level) {
                    return Err(ConfigError(format!("domain {d} at M = {level}: {e}")));
                }
            }
        }
    }
    Ok(ExperimentConfig {
        command: command.to_string(),
        domains: domain_values.iter().map(|d| d.to_string()).collect(),
        s,
        mesh_sizes,
        alphas,
        q,
        dims,
        tol,
        seed,
        domain_values,
        out: m.get("out").map(|(v, _)| PathBuf::from(v)),
        csv: m.get("csv").map(|(v, _)| PathBuf::from(v)),
    })
}

struct Defaults {
    s: &'static str,
    m: &'static str,
    alpha: &'static str,
    q: &'static str,
    grid: bool,
    ascending_meshes: bool,
    fkrh: bool,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            s: "0.5",
            m: "1024",
            alpha: "0",
            q: "2,4,inf",
            grid: false,
            ascending_meshes: false,
            fkrh: false,
        }
    }
}

/// Writes finite doubles with 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fixed17;

impl serde_json::ser::Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` with [`Fixed17`] number formatting.
pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed17);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Formats a double for CSV with 17 significant digits.
pub fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize)]
pub struct Document {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub reports: Vec<InequalityReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scans: Vec<KJScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    pub timestamp: String,
}

struct Output {
    reports: Vec<InequalityReport>,
    scans: Vec<KJScan>,
    results: Option<Value>,
    csv: Option<String>,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } | Error::Indefinite | Error::Bracket(_) => Failure::Solver(e.to_string()),
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn csv_from_rows(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn reports_csv(reports: &[InequalityReport]) -> String {
    csv_from_rows(
        "name,domain,s,mesh_size,margin",
        reports.iter().flat_map(|r| {
            r.mesh_sizes.iter().zip(&r.trend).map(move |(m, margin)| {
                vec![
                    r.name.clone(),
                    format!("\"{}\"", r.domain),
                    csv_num(r.s),
                    m.to_string(),
                    csv_num(*margin),
                ]
            })
        }),
    )
}

fn run_check(kind: CheckKind, cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let harness = match cfg.tol {
        Some(t) => Harness::with_tol(t),
        None => Harness::new(),
    };
    let mut reports = Vec::new();
    for d in &cfg.domain_values {
        for &s in &cfg.s {
            for &m in &cfg.mesh_sizes {
                match kind {
                    CheckKind::Fk => reports.push(harness.faber_krahn_report(d, s, m)?),
                    CheckKind::Sv => reports.push(harness.saint_venant_report(d, s, m)?),
                    CheckKind::Comp => {
                        for &a in &cfg.alphas {
                            reports.push(harness.comparison_curve_check(d, s, a, m)?);
                        }
                    }
                    CheckKind::Rh => reports.extend(harness.reverse_holder_report(d, s, &cfg.q, m)?),
                    CheckKind::Fkrh => reports.push(harness.fk_from_revholder_check(d, s, &cfg.q, m)?),
                }
            }
        }
    }
    let csv = reports_csv(&reports);
    Ok(Output {
        reports,
        scans: Vec::new(),
        results: None,
        csv: Some(csv),
    })
}

fn run_scan(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let harness = match cfg.tol {
        Some(t) => Harness::with_tol(t),
        None => Harness::new(),
    };
    let mut scans = Vec::new();
    for d in &cfg.domain_values {
        for &s in &cfg.s {
            for &m in &cfg.mesh_sizes {
                scans.push(harness.kohler_jobin_scan(d, s, &cfg.alphas, m)?);
            }
        }
    }
    let csv = csv_from_rows(
        "domain,s,mesh_size,alpha,q,radius,lambda_ball,margin",
        scans.iter().flat_map(|sc| {
            sc.entries.iter().map(move |e| {
                vec![
                    format!("\"{}\"", sc.domain),
                    csv_num(sc.s),
                    sc.mesh_size.to_string(),
                    csv_num(e.alpha),
                    csv_num(e.q),
                    csv_num(e.radius),
                    csv_num(e.lambda_ball),
                    csv_num(e.margin),
                ]
            })
        }),
    );
    Ok(Output {
        reports: Vec::new(),
        scans,
        results: None,
        csv: Some(csv),
    })
}

fn operator(d: &Domain1D, s: f64, m: usize) -> Result<FracOperator, Failure> {
    Ok(FracOperator::assemble(Arc::new(Mesh1D::build(d, m)?), s)?)
}

fn run_eig(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for d in &cfg.domain_values {
        for &s in &cfg.s {
            let mut values = Vec::new();
            let mut levels = Vec::new();
            for &m in &cfg.mesh_sizes {
                let op = operator(d, s, m)?;
                let r = principal_eigenpair(&op)?;
                rows.push(vec![format!("\"{d}\""), csv_num(s), m.to_string(), csv_num(r.lambda1h)]);
                levels.push(json!({
                    "mesh_size": m,
                    "lambda1h": r.lambda1h,
                    "iterations": r.iterations,
                    "residual": r.residual,
                }));
                values.push(r.lambda1h);
            }
            let extrapolation = if values.len() >= 3 {
                serde_json::to_value(richardson(&cfg.mesh_sizes, &values)?).map_err(|e| Failure::Io(e.to_string()))?
            } else {
                Value::Null
            };
            results.push(json!({
                "domain": d.to_string(),
                "s": s,
                "levels": levels,
                "extrapolation": extrapolation,
            }));
        }
    }
    Ok(Output {
        reports: Vec::new(),
        scans: Vec::new(),
        results: Some(Value::Array(results)),
        csv: Some(csv_from_rows("domain,s,mesh_size,lambda1h", rows)),
    })
}

fn run_torsion(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for d in &cfg.domain_values {
        for &s in &cfg.s {
            for &m in &cfg.mesh_sizes {
                let op = operator(d, s, m)?;
                let needs = cfg.alphas.iter().any(|a| !matches!(a, Alpha::Absolute(v) if *v <= 0.0));
                let lambda = if needs { lambda1(&op)? } else { f64::NAN };
                for a in &cfg.alphas {
                    let alpha = a.resolve(lambda);
                    let t = generalized_torsion(&op, alpha)?;
                    rows.push(vec![
                        format!("\"{d}\""),
                        csv_num(s),
                        m.to_string(),
                        csv_num(alpha),
                        csv_num(t.q),
                        csv_num(t.l2sq),
                        csv_num(t.energy),
                    ]);
                    results.push(json!({
                        "domain": d.to_string(),
                        "s": s,
                        "mesh_size": m,
                        "alpha": alpha,
                        "q": t.q,
                        "l2sq": t.l2sq,
                        "energy": t.energy,
                        "functional": t.functional_value(),
                        "iterations": t.iterations,
                    }));
                }
            }
        }
    }
    Ok(Output {
        reports: Vec::new(),
        scans: Vec::new(),
        results: Some(Value::Array(results)),
        csv: Some(csv_from_rows("domain,s,mesh_size,alpha,q,l2sq,energy", rows)),
    })
}

fn run_qgen(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &s in &cfg.s {
        for &m in &cfg.mesh_sizes {
            let cache = UnitBallQCache::build(s, m)?;
            for e in cache.table() {
                rows.push(vec![csv_num(s), m.to_string(), csv_num(e.beta), csv_num(e.q), csv_num(e.l2sq)]);
            }
            results.push(json!({
                "s": s,
                "mesh_size": m,
                "lambda1h": cache.lambda1h(),
                "table": cache.table(),
            }));
        }
    }
    Ok(Output {
        reports: Vec::new(),
        scans: Vec::new(),
        results: Some(Value::Array(results)),
        csv: Some(csv_from_rows("s,mesh_size,beta,q,l2sq", rows)),
    })
}

fn run_rearrange(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let harness = match cfg.tol {
        Some(t) => Harness::with_tol(t),
        None => Harness::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut results = Vec::new();
    let mut reports = Vec::new();
    let mut csv = None;
    for d in &cfg.domain_values {
        for &s in &cfg.s {
            for &m in &cfg.mesh_sizes {
                let op = operator(d, s, m)?;
                let v = generalized_torsion(&op, 0.0)?.w;
                let p = rearrange::profile(&v);
                let target = rearrange::schwarz_mesh(op.mesh())?;
                let vs = rearrange::schwarz(&v, &target)?;
                let phi: Vec<f64> = (0..v.values().len()).map(|_| rng.gen::<f64>()).collect();
                let phi = GridFunction::new(Arc::clone(op.mesh()), phi)?;
                let hl = rearrange::hardy_littlewood_gap(&v, &phi)?;
                if csv.is_none() {
                    let mut buf = Vec::new();
                    p.write_csv(&mut buf)?;
                    csv = Some(String::from_utf8(buf).expect("ascii"));
                }
                results.push(json!({
                    "domain": d.to_string(),
                    "s": s,
                    "mesh_size": m,
                    "steps": p.steps().len(),
                    "l1": p.lp_norm(1.0),
                    "l2": p.lp_norm(2.0),
                    "linf": p.lp_norm(f64::INFINITY),
                    "schwarz_l2": vs.lp_norm(2.0),
                    "hardy_littlewood_gap": hl,
                }));
                reports.push(harness.polya_szego_report(d, s, m)?);
            }
        }
    }
    Ok(Output {
        reports,
        scans: Vec::new(),
        results: Some(Value::Array(results)),
        csv,
    })
}

fn run_table(cfg: &ExperimentConfig) -> Result<Output, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.dims {
        for &s in &cfg.s {
            let order = FracOrder::new(n, s)?;
            let (g, c, t) = (
                normalization_gamma(order),
                ball_torsion_coefficient(order),
                unit_ball_torsional_rigidity_exact(order),
            );
            rows.push(vec![n.to_string(), csv_num(s), csv_num(g), csv_num(c), csv_num(t)]);
            results.push(json!({"N": n, "s": s, "gamma": g, "c": c, "torsional_rigidity": t}));
        }
    }
    Ok(Output {
        reports: Vec::new(),
        scans: Vec::new(),
        results: Some(Value::Array(results)),
        csv: Some(csv_from_rows("N,s,gamma,c,torsional_rigidity", rows)),
    })
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("{secs}")
}

fn write_path(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match threads_from_env() {
        Ok(Some(n)) => par::init_threads(n),
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            EXIT_SOLVER
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
    }
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    let file = cli.config.as_deref();
    let (name, opts, defaults) = match &cli.command {
        Command::Check { which, opts } => {
            let mut d = Defaults::default();
            if matches!(which, CheckKind::Fkrh) {
                d.q = "1.01,1.1,1.5,2,4,8";
                d.fkrh = true;
            }
            (format!("check {}", kind_name(which)), opts, d)
        }
        Command::Scan { opts, .. } => (
            "scan kj".to_string(),
            opts,
            Defaults {
                alpha: "standard",
                grid: true,
                ..Defaults::default()
            },
        ),
        Command::Eig { opts } => (
            "eig".to_string(),
            opts,
            Defaults {
                m: "256,512,1024",
                ascending_meshes: true,
                ..Defaults::default()
            },
        ),
        Command::Torsion { opts } => ("torsion".to_string(), opts, Defaults::default()),
        Command::Qgen { opts } => ("qgen".to_string(), opts, Defaults::default()),
        Command::Rearrange { opts } => ("rearrange".to_string(), opts, Defaults::default()),
        Command::Table { opts, .. } => (
            "table specfun".to_string(),
            opts,
            Defaults {
                s: "0.25,0.5,0.75",
                ..Defaults::default()
            },
        ),
    };
    let cfg = build_config(&name, opts, file, &defaults).map_err(|e| Failure::Config(e.0))?;
    // probe writability before any solve
    for path in [&cfg.out, &cfg.csv].into_iter().flatten() {
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    let output = match &cli.command {
        Command::Check { which, .. } => run_check(*which, &cfg)?,
        Command::Scan { .. } => run_scan(&cfg)?,
        Command::Eig { .. } => run_eig(&cfg)?,
        Command::Torsion { .. } => run_torsion(&cfg)?,
        Command::Qgen { .. } => run_qgen(&cfg)?,
        Command::Rearrange { .. } => run_rearrange(&cfg)?,
        Command::Table { .. } => run_table(&cfg)?,
    };
    let violated = output.reports.iter().any(|r| r.verdict == Verdict::Violated)
        || output.scans.iter().any(|s| s.verdict == Verdict::Violated);
    let (out_path, csv_path) = (cfg.out.clone(), cfg.csv.clone());
    let doc = Document {
        schema: 1,
        config: cfg,
        reports: output.reports,
        scans: output.scans,
        results: output.results,
        timestamp: timestamp(),
    };
    let bytes = to_json_bytes(&doc).map_err(|e| Failure::Io(e.to_string()))?;
    match out_path {
        Some(p) => write_path(&p, &bytes)?,
        None => io::stdout().write_all(&bytes).map_err(|e| Failure::Io(e.to_string()))?,
    }
    if let (Some(p), Some(csv)) = (csv_path, output.csv) {
        write_path(&p, csv.as_bytes())?;
    }
    Ok(if violated { EXIT_VIOLATED } else { EXIT_OK })
}

fn kind_name(k: &CheckKind) -> &'static str {
    match k {
        CheckKind::Fk => "fk",
        CheckKind::Sv => "sv",
        CheckKind::Comp => "comp",
        CheckKind::Rh => "rh",
        CheckKind::Fkrh => "fkrh",
    }
}

/// Tolerance a report at mesh size `cells` would use without an override.
pub fn tolerance_for(cells: usize) -> f64 {
    default_tol(cells)
}

/// Reads a profile CSV written by the `rearrange` command.
pub fn import_profile(path: &Path) -> crate::Result<RearrangementProfile> {
    let file = fs::File::open(path)?;
    RearrangementProfile::read_csv(io::BufReader::new(file))
}
