//! Command-line front end: argument parsing, rendering and the JSON-lines result cache.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::curve::{point_search, RationalPoint};
use crate::error::{Error, Result};
use crate::formulas::{compute_s_d_with, validate_d, Diagnostics, SdOptions, SdReport, TExact, Verdict};
use crate::ideals::RepScan;
use crate::modular::PrecisionContext;
use crate::verify::{all_ok, run_suite, IdentityResult, Status, Suite, SuiteConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const CACHE_HEADER: &str = r#"{"format":"ctlab-cache","v":1}"#;

const ADMISSIBLE: &str = "D must be a cube-free integer prime to 6 with D > 2 (so D = 1, 2 are excluded)";

#[derive(Debug, Parser)]
#[command(name = "ctlab", version, about = "Central L-values of x^3 + y^3 = D")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 256)]
    pub prec: u32,
    /// Identity tolerance is 2^-tol_exp.
    #[arg(long, global = true, default_value_t = 128)]
    pub tol_exp: u32,
    /// Denominator bound for the rational point search.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub height: u64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Cache file (JSON lines).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Recompute everything; stored values are still checked, nothing is written.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Seed for class representatives and random samples.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// S_D, T_D and the verdict for one D.
    Compute { d: u64 },
    /// Sweep admissible D in [dmin, dmax].
    Table { dmin: u64, dmax: u64 },
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all", value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        nmax: usize,
        /// Comma-separated D values for the D-dependent checks.
        #[arg(long, value_delimiter = ',')]
        d: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Search for a rational point on x^3 + y^3 = D.
    Search { d: u64 },
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exact rational as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactRational {
    pub numerator: String,
    pub denominator: String,
}

impl From<&Rational> for ExactRational {
    fn from(q: &Rational) -> Self {
        ExactRational {
            numerator: q.numer().to_string(),
            denominator: q.denom().to_string(),
        }
    }
}

impl TryFrom<&ExactRational> for Rational {
    type Error = Error;

    fn try_from(e: &ExactRational) -> Result<Rational> {
        let parse = |s: &str| {
            Integer::parse(s)
                .map(Integer::from)
                .map_err(|_| Error::Cache(format!("bad integer {s:?}")))
        };
        let den = parse(&e.denominator)?;
        if den == 0 {
            return Err(Error::Cache("zero denominator".into()));
        }
        Ok(Rational::from((parse(&e.numerator)?, den)))
    }
}

/// One computed `D`, as stored in the cache and printed by `table --json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    #[serde(rename = "D")]
    pub d: u64,
    #[serde(rename = "S_D")]
    pub s_d: ExactRational,
    #[serde(rename = "T_D")]
    pub t_d: Option<TExact>,
    #[serde(rename = "sigma_D")]
    pub sigma_d: u32,
    #[serde(rename = "c_3D")]
    pub c3d: u64,
    pub verdict: Verdict,
    pub point: Option<RationalPoint>,
    pub precision_bits: u32,
    pub tool_version: String,
    pub timestamp: u64,
}

impl CacheRecord {
    pub fn from_report(r: &SdReport, precision_bits: u32) -> Self {
        CacheRecord {
            d: r.d,
            s_d: ExactRational::from(&r.s_d),
            t_d: r.t_d.clone(),
            sigma_d: r.sigma_d,
            c3d: r.c3d,
            verdict: r.verdict,
            point: r.point.clone(),
            precision_bits,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |t| t.as_secs()),
        }
    }

    pub fn s_d(&self) -> Result<Rational> {
        Rational::try_from(&self.s_d)
    }

    /// Whether the exact invariants agree; the point and metadata may differ.
    pub fn same_values(&self, other: &CacheRecord) -> bool {
        self.d == other.d
            && self.s_d().ok() == other.s_d().ok()
            && self.t_d == other.t_d
            && self.sigma_d == other.sigma_d
            && self.c3d == other.c3d
            && self.verdict == other.verdict
    }

    fn csv_row(&self) -> String {
        let opt = |x: Option<String>| x.unwrap_or_default();
        format!(
            "{},{}/{},{},{},{},{},{},{}",
            self.d,
            self.s_d.numerator,
            self.s_d.denominator,
            opt(self.t_d.as_ref().map(|t| t.to_string())),
            self.sigma_d,
            self.c3d,
            self.verdict,
            opt(self.point.as_ref().map(|p| format!("\"{p}\""))),
            self.precision_bits
        )
    }
}

const CSV_HEADER: &str = "D,S_D,T_D,sigma_D,c_3D,verdict,point,precision_bits";

/// `compute --json` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeOutput {
    #[serde(flatten)]
    pub record: CacheRecord,
    pub sha_prediction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    v: u32,
}

/// Append-only JSON-lines store keyed by `(D, precision_bits)`.
#[derive(Debug)]
pub struct Cache {
    path: PathBuf,
    records: BTreeMap<(u64, u32), CacheRecord>,
    writer: Option<File>,
}

impl Cache {
    /// Reads `path` if it exists; a torn final line is dropped.
    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = Cache {
            path: path.to_path_buf(),
            records: BTreeMap::new(),
            writer: None,
        };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(io_err(path, e)),
        };
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<io::Result<_>>()
            .map_err(|e| io_err(path, e))?;
        let Some((head, body)) = lines.split_first() else {
            return Ok(cache);
        };
        let header: CacheHeader = serde_json::from_str(head)
            .map_err(|_| Error::Cache(format!("{} is not a ctlab cache", path.display())))?;
        if header.format != "ctlab-cache" || header.v != 1 {
            return Err(Error::Cache(format!("unsupported cache version in {}", path.display())));
        }
        for (i, line) in body.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheRecord>(line) {
                Ok(r) => {
                    cache.records.insert((r.d, r.precision_bits), r);
                }
                Err(_) if i + 1 == body.len() => {}
                Err(e) => return Err(Error::Cache(format!("{}:{}: {e}", path.display(), i + 2))),
            }
        }
        Ok(cache)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, d: u64, bits: u32) -> Option<&CacheRecord> {
        self.records.get(&(d, bits))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stored records for `d` computed at no more than `bits` must agree with `fresh`.
    pub fn check(&self, fresh: &CacheRecord) -> Result<()> {
        let stale = self
            .records
            .range((fresh.d, 0)..=(fresh.d, fresh.precision_bits))
            .map(|(_, r)| r)
            .find(|r| !r.same_values(fresh));
        match stale {
            None => Ok(()),
            Some(r) => Err(Error::ConsistencyFailure(format!(
                "D = {}: recomputation at {} bits gives S_D = {}/{}, cache at {} bits has {}/{}",
                fresh.d,
                fresh.precision_bits,
                fresh.s_d.numerator,
                fresh.s_d.denominator,
                r.precision_bits,
                r.s_d.numerator,
                r.s_d.denominator
            ))),
        }
    }

    /// Appends and flushes one record.
    pub fn insert(&mut self, record: CacheRecord) -> Result<()> {
        let path = self.path.clone();
        let line = serde_json::to_string(&record).map_err(|e| Error::Cache(e.to_string()))?;
        let w = self.writer()?;
        writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        self.records.insert((record.d, record.precision_bits), record);
        Ok(())
    }

    fn writer(&mut self) -> Result<&mut File> {
        if self.writer.is_none() {
            self.writer = Some(open_for_append(&self.path)?);
        }
        Ok(self.writer.as_mut().expect("writer just opened"))
    }
}

/// Opens for appending, writing the header to a new file and trimming a torn tail.
fn open_for_append(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let existing = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    if existing.is_empty() {
        writeln!(f, "{CACHE_HEADER}").map_err(|e| io_err(path, e))?;
    } else if existing.last() != Some(&b'\n') {
        let keep = existing.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        f.set_len(keep as u64).map_err(|e| io_err(path, e))?;
    }
    Ok(f)
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Cache(format!("{}: {e}", path.display()))
}

/// `$XDG_CACHE_HOME/ctlab/cache.jsonl`, falling back to `~/.cache`.
pub fn default_cache_path() -> Option<PathBuf> {
    let base = std::env::var_os("XDG_CACHE_HOME")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))?;
    Some(base.join("ctlab").join("cache.jsonl"))
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::NotPrime(_) | Error::NotCoprime(_) | Error::NonCoprimeToThree(_) => 2,
        Error::RecognitionFailure { .. } | Error::NonRealResidual(_) => 3,
        _ => 1,
    }
}

struct Session<'a> {
    g: &'a GlobalArgs,
    ctx: PrecisionContext,
    cache: Option<Cache>,
}

impl Session<'_> {
    fn options(&self) -> SdOptions {
        SdOptions {
            point_height: self.g.height,
            scan: self.g.seed.map_or_else(RepScan::default, RepScan::seeded),
            ..SdOptions::default()
        }
    }

    fn cached(&self, d: u64) -> Option<&CacheRecord> {
        if self.g.no_cache {
            return None;
        }
        self.cache.as_ref()?.get(d, self.g.prec)
    }

    /// Stores a fresh record, or with `--no-cache` only checks it against the store.
    fn record(&mut self, rec: &CacheRecord) -> Result<()> {
        let Some(cache) = self.cache.as_mut() else {
            return Ok(());
        };
        cache.check(rec)?;
        if !self.g.no_cache {
            cache.insert(rec.clone())?;
        }
        Ok(())
    }
}

fn compute_record(d: u64, opts: &SdOptions, ctx: &PrecisionContext) -> Result<(CacheRecord, SdReport)> {
    let report = compute_s_d_with(d, opts, ctx)?;
    Ok((CacheRecord::from_report(&report, ctx.bits), report))
}

/// Runs the parsed command line; returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::InvalidInput(_)) && matches!(cli.command, Command::Compute { .. } | Command::Table { .. }) {
                let _ = writeln!(err, "note: {ADMISSIBLE}");
            }
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let g = &cli.global;
    if g.prec < 64 {
        return Err(Error::InvalidInput(format!("--prec {} is below 64 bits", g.prec)));
    }
    let ctx = PrecisionContext::new(g.prec).with_tol_exp(g.tol_exp);
    let needs_cache = matches!(cli.command, Command::Compute { .. } | Command::Table { .. });
    let cache = match g.cache.clone().or_else(default_cache_path) {
        Some(p) if needs_cache => Some(Cache::open(&p)?),
        _ => None,
    };
    let mut session = Session { g, ctx, cache };
    match &cli.command {
        Command::Compute { d } => cmd_compute(&mut session, *d, out),
        Command::Table { dmin, dmax } => cmd_table(&mut session, *dmin, *dmax, out, err),
        Command::Verify { suite, nmax, d, samples } => {
            let mut cfg = SuiteConfig {
                nmax: *nmax,
                samples: *samples,
                ..SuiteConfig::default()
            };
            if !d.is_empty() {
                cfg.d_values = d.clone();
            }
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            cmd_verify(&session, *suite, &cfg, out, err)
        }
        Command::Search { d } => cmd_search(g, *d, out),
    }
}

fn cmd_compute(s: &mut Session<'_>, d: u64, out: &mut dyn Write) -> Result<i32> {
    validate_d(d)?;
    let (rec, diagnostics, sha) = match s.cached(d) {
        Some(r) => {
            let s_d = r.s_d()?;
            let sha = (s_d != 0 && *s_d.denom() == 1).then(|| s_d.numer().to_string());
            (r.clone(), None, sha)
        }
        None => {
            let (rec, report) = compute_record(d, &s.options(), &s.ctx)?;
            s.record(&rec)?;
            (rec, Some(report.residuals.clone()), report.sha_prediction.map(|n| n.to_string()))
        }
    };
    let output = ComputeOutput {
        record: rec,
        sha_prediction: sha,
        diagnostics,
    };
    if s.g.json {
        let text = serde_json::to_string_pretty(&output).map_err(|e| Error::Cache(e.to_string()))?;
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else {
        render_compute(&output, out).map_err(stdout_err)?;
    }
    Ok(0)
}

fn render_compute(o: &ComputeOutput, out: &mut dyn Write) -> io::Result<()> {
    let r = &o.record;
    let dash = || "-".to_string();
    writeln!(out, "D          {}", r.d)?;
    writeln!(out, "S_D        {}", Rational::try_from(&r.s_d).map_or_else(|_| dash(), |q| q.to_string()))?;
    writeln!(out, "T_D        {}", r.t_d.as_ref().map_or_else(dash, |t| t.to_string()))?;
    writeln!(out, "sigma(D)   {}", r.sigma_d)?;
    writeln!(out, "c_3D       {}", r.c3d)?;
    writeln!(out, "verdict    {}", r.verdict)?;
    writeln!(out, "point      {}", r.point.as_ref().map_or_else(dash, |p| p.to_string()))?;
    writeln!(out, "#Sha (BSD) {}", o.sha_prediction.clone().unwrap_or_else(dash))?;
    writeln!(out, "precision  {} bits", r.precision_bits)?;
    if let Some(diag) = &o.diagnostics {
        writeln!(out, "h(O_3D)    {}", diag.class_number)?;
        writeln!(out, "residual   {:.3e}", diag.recognition_residual)?;
    }
    Ok(())
}

fn stdout_err(e: io::Error) -> Error {
    Error::Cache(format!("stdout: {e}"))
}

fn cmd_table(s: &mut Session<'_>, dmin: u64, dmax: u64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if dmin > dmax {
        return Err(Error::InvalidInput(format!("empty range {dmin}..{dmax}")));
    }
    let admissible: Vec<u64> = (dmin..=dmax).filter(|&d| validate_d(d).is_ok()).collect();
    let mut ready: BTreeMap<u64, Result<CacheRecord>> = BTreeMap::new();
    let mut todo = Vec::new();
    for &d in &admissible {
        match s.cached(d) {
            Some(r) => {
                ready.insert(d, Ok(r.clone()));
            }
            None => todo.push(d),
        }
    }
    if !s.g.json {
        writeln!(out, "{CSV_HEADER}").map_err(stdout_err)?;
    }
    let opts = s.options();
    let ctx = s.ctx;
    let json = s.g.json;
    let mut code = 0;
    let mut next = admissible.iter().copied().peekable();
    let (tx, rx) = mpsc::channel::<(u64, Result<CacheRecord>)>();
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            todo.par_iter().for_each_with(tx, |tx, &d| {
                let _ = tx.send((d, compute_record(d, &opts, &ctx).map(|(r, _)| r)));
            });
        });
        let mut emit = |ready: &mut BTreeMap<u64, Result<CacheRecord>>, out: &mut dyn Write| -> Result<()> {
            while let Some(d) = next.peek().copied() {
                let Some(res) = ready.remove(&d) else { break };
                next.next();
                match res {
                    Ok(r) if json => {
                        let line = serde_json::to_string(&r).map_err(|e| Error::Cache(e.to_string()))?;
                        writeln!(out, "{line}").map_err(stdout_err)?;
                    }
                    Ok(r) => writeln!(out, "{}", r.csv_row()).map_err(stdout_err)?,
                    Err(e) => {
                        let _ = writeln!(err, "D = {d}: {e}");
                        code = code.max(exit_code(&e));
                    }
                }
            }
            out.flush().map_err(stdout_err)
        };
        emit(&mut ready, out)?;
        // the only cache writer; workers hand over finished records
        for (d, res) in rx {
            let res = res.and_then(|r| s.record(&r).map(|_| r));
            ready.insert(d, res);
            emit(&mut ready, out)?;
        }
        Ok(())
    })?;
    Ok(code)
}

fn cmd_verify(s: &Session<'_>, suite: Suite, cfg: &SuiteConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let results = run_suite(suite, cfg, &s.ctx)?;
    if s.g.json {
        let text = serde_json::to_string_pretty(&results).map_err(|e| Error::Cache(e.to_string()))?;
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else {
        render_verify(&results, out).map_err(stdout_err)?;
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    let skipped = results.iter().filter(|r| r.status == Status::Skipped).count();
    let _ = writeln!(
        err,
        "suite {suite}: {} checks, {failed} failed, {skipped} skipped at {} bits",
        results.len(),
        s.ctx.bits
    );
    Ok(if all_ok(&results) { 0 } else { 1 })
}

fn render_verify(results: &[IdentityResult], out: &mut dyn Write) -> io::Result<()> {
    for r in results {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let residual = r.residual.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
        let params = serde_json::to_string(&r.parameters).unwrap_or_default();
        writeln!(out, "{status}  {:<32} residual {residual:<10} tol {:.3e}  {params}", r.identity_id, r.tol)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SearchOutput<'a> {
    #[serde(rename = "D")]
    d: u64,
    height: u64,
    point: Option<&'a RationalPoint>,
}

fn cmd_search(g: &GlobalArgs, d: u64, out: &mut dyn Write) -> Result<i32> {
    if d == 0 {
        return Err(Error::InvalidInput("D must be at least 1".into()));
    }
    let point = point_search(d, g.height);
    if g.json {
        let o = SearchOutput {
            d,
            height: g.height,
            point: point.as_ref(),
        };
        let text = serde_json::to_string(&o).map_err(|e| Error::Cache(e.to_string()))?;
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else {
        match &point {
            Some(p) => writeln!(out, "{p}"),
            None => writeln!(out, "none ≤ {}", g.height),
        }
        .map_err(stdout_err)?;
    }
    Ok(0)
}
