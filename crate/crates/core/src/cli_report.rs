//! Configuration-driven runs: `key = value` configs, dispatch to the
//! experiments, and CSV, JSON and SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds_verifier::{
    abs_explorer, bks_check, exponent_fit, holder_sweep, log_grid, ratio_experiment, trial_rng, BoundTag,
    ExperimentConfig, ExperimentRecord, OperatorSampler, RatioParams, TrialRow,
};
use crate::contraction_dilation::{dilate, lemma_mc_residual, semi_spectral_doi, ContractionMatrix};
use crate::error::{Error, Result};
use crate::extremal_search::{
    mcc_transfer, omega_search, omega_sweep, zygmund_fit, OmegaEstimate, OmegaTag, SearchParams, TransferDirection,
};
use crate::function::{ClosureFunction, Domain, Elementary, ExponentialSum, FunctionModel, Polynomial, PowerAbs};
use crate::function_analysis::{lp_block, partition_defect, reconstruct, PeriodicSignal};
use crate::linalg::{random, C64};
use crate::matrix_calc::{bsf_residual, lemma_m_residual};
use crate::moduli::{holder_seminorm, lambda_omega_norm, Grid, ModulusOfContinuity};
use crate::set_combinatorics::{kappa_closed, sets_with_max, KappaTable, UnitaryFamily};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every accepted configuration key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("tag", "experiment to run (see TAGS)"),
    ("theorem", "inequality for holder-scan: saH sam uH hou oLu cH conh oLc omsa omu omc oon fcc oqc lip"),
    ("function", "function id: zero identity abs abs_pow sin cos exp lacunary circle_pow circle_lacunary analytic_lacunary poly:c0,c1,.. apoly:c0,c1,.."),
    ("alpha", "Hölder exponent or function parameter"),
    ("m", "difference order"),
    ("omega", "modulus of continuity: power:<a> | sqrt | linear"),
    ("functional", "omega | omega1 | omega2 | omega3"),
    ("dims", "dimension range lo..hi"),
    ("dim", "single dimension"),
    ("dim_list", "comma-separated dimensions"),
    ("trials", "number of random trials"),
    ("ascent_runs", "hill-climbing runs"),
    ("ascent_iters", "steps per hill-climbing run"),
    ("delta", "single δ"),
    ("delta_min", "smallest δ"),
    ("delta_max", "largest δ"),
    ("delta_points", "number of log-spaced δ"),
    ("cap", "spectral cap L"),
    ("restarts", "ascent restarts"),
    ("iters", "ascent iterations"),
    ("budget", "search budget"),
    ("n", "size parameter (N for verify-gen, n_max for kappa)"),
    ("degree", "polynomial degree"),
    ("input", "trial CSV to re-render (report)"),
    ("plot", "ratio-vs-delta | loglog-slope | kappa-table"),
    ("seed", "master seed (required)"),
    ("out", "output directory"),
];

pub const TAGS: &[&str] = &[
    "decompose",
    "seminorm",
    "verify-doi",
    "verify-moi",
    "verify-gen",
    "kappa",
    "dilate-check",
    "holder-scan",
    "bks",
    "omega-scan",
    "omega-search",
    "commutator-scan",
    "zygmund-fit",
    "abs-explorer",
    "report",
];

/// Flat `key = value` configuration. Blank lines and `#` comments are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(config_err(format!("unknown key `{key}`")));
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| config_err(format!("bad value `{v}` for `{key}`"))))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed")?.ok_or_else(|| config_err("missing required key `seed`"))
    }

    pub fn tag(&self) -> Result<&str> {
        let t = self.get("tag").ok_or_else(|| config_err("missing required key `tag`"))?;
        if TAGS.contains(&t) {
            Ok(t)
        } else {
            Err(Error::UnknownTag(t.into()))
        }
    }

    pub fn dims_or(&self, default: [usize; 2]) -> Result<[usize; 2]> {
        match self.get("dims") {
            None => Ok(default),
            Some(v) => {
                let bad = || config_err(format!("bad value `{v}` for `dims`"));
                let (a, b) = v.split_once("..").unwrap_or((v, v));
                let lo = a.trim().parse().map_err(|_| bad())?;
                let hi = b.trim().parse().map_err(|_| bad())?;
                Ok([lo, hi])
            }
        }
    }

    pub fn delta_grid(&self, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
        let lo = self.f64_or("delta_min", lo)?;
        let hi = self.f64_or("delta_max", hi)?;
        let n = self.usize_or("delta_points", points)?;
        if !(lo > 0.0 && lo <= hi) || n == 0 {
            return Err(config_err("δ grid needs 0 < delta_min ≤ delta_max and delta_points ≥ 1"));
        }
        Ok(log_grid(lo, hi, n))
    }

    /// Canonical `key = value` text in key order, without `out`.
    pub fn echo(&self) -> String {
        self.values.iter().filter(|(k, _)| k.as_str() != "out").map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// violated invariants, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownTag(_) | Error::UnknownKind(_) | Error::InvalidArgument(_) => 2,
        Error::Invariant(_)
        | Error::VonNeumann { .. }
        | Error::NotContraction { .. }
        | Error::NotUnitary { .. }
        | Error::NotHermitian { .. }
        | Error::ZeroDenominator { .. } => 3,
        _ => 1,
    }
}

fn parse_coeffs(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| config_err(format!("bad coefficient `{c}`"))))
        .collect()
}

/// ∑_{k=1}^{count} 2^{−kα} Re ζ^{2^k} as a trigonometric polynomial.
pub fn circle_lacunary(count: u32, alpha: f64) -> PeriodicSignal {
    let mut terms = Vec::new();
    for k in 1..=count {
        let a = C64::new(0.5 * 2f64.powf(-alpha * k as f64), 0.0);
        terms.push((1i64 << k, a));
        terms.push((-(1i64 << k), a));
    }
    PeriodicSignal::from_terms(&terms)
}

pub fn build_function(id: &str, alpha: f64) -> Result<Box<dyn FunctionModel>> {
    if let Some(c) = id.strip_prefix("poly:") {
        return Ok(Box::new(Polynomial::real(&parse_coeffs(c)?)));
    }
    if let Some(c) = id.strip_prefix("apoly:") {
        let cs = parse_coeffs(c)?.into_iter().map(|x| C64::new(x, 0.0)).collect();
        return Ok(Box::new(Polynomial::analytic(cs)));
    }
    Ok(match id {
        "zero" => Box::new(Polynomial::constant(0.0)),
        "identity" => Box::new(Polynomial::identity()),
        "abs" => Box::new(PowerAbs::abs()),
        "abs_pow" => Box::new(PowerAbs::new(alpha)),
        "sin" => Box::new(Elementary::Sin),
        "cos" => Box::new(Elementary::Cos),
        "exp" => Box::new(Elementary::Exp),
        "lacunary" => Box::new(ExponentialSum::lacunary(12, alpha)),
        "circle_pow" => Box::new(ClosureFunction::circle_power(alpha)),
        "circle_lacunary" => Box::new(circle_lacunary(8, alpha)),
        "analytic_lacunary" => Box::new(Polynomial::analytic_lacunary(8, alpha)),
        _ => return Err(Error::UnknownKind(format!("function `{id}`"))),
    })
}

pub fn build_modulus(id: &str, m: u32) -> Result<ModulusOfContinuity> {
    let w = match id {
        "sqrt" => ModulusOfContinuity::power(0.5),
        "linear" => ModulusOfContinuity::linear(),
        _ => match id.strip_prefix("power:") {
            Some(a) => ModulusOfContinuity::power(
                a.parse().map_err(|_| config_err(format!("bad exponent in `{id}`")))?,
            ),
            None => return Err(Error::UnknownKind(format!("modulus `{id}`"))),
        },
    };
    Ok(if m > w.order { w.with_order(m) } else { w })
}

/// Default (function, α, m, ω) for each inequality.
pub fn theorem_defaults(tag: BoundTag) -> (&'static str, f64, u32, Option<&'static str>) {
    match tag {
        BoundTag::SaH | BoundTag::Fcc => ("abs_pow", 0.5, 1, None),
        BoundTag::Sam => ("abs_pow", 0.5, 2, None),
        BoundTag::UH => ("circle_pow", 0.5, 1, None),
        BoundTag::Hou => ("circle_pow", 0.5, 2, None),
        BoundTag::OLu => ("circle_lacunary", 1.0, 1, None),
        BoundTag::CH => ("analytic_lacunary", 0.5, 1, None),
        BoundTag::Conh => ("analytic_lacunary", 0.5, 2, None),
        BoundTag::OLc => ("analytic_lacunary", 1.0, 1, None),
        BoundTag::Omsa | BoundTag::Oqc => ("abs_pow", 0.5, 1, Some("sqrt")),
        BoundTag::Omu => ("circle_pow", 0.5, 1, Some("sqrt")),
        BoundTag::Omc => ("analytic_lacunary", 0.5, 1, Some("sqrt")),
        BoundTag::Oon => ("abs_pow", 1.5, 2, Some("power:1.5")),
        BoundTag::Lip => ("abs", 1.0, 1, None),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportBundle {
    pub tag: String,
    pub csv: Vec<PathBuf>,
    pub json: PathBuf,
    pub svg: Vec<PathBuf>,
    pub config: String,
    pub version: String,
    pub summary: Value,
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get("out").unwrap_or("hzlab-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn emit_csv(record: &ExperimentRecord, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", record.id));
    record.write_csv(&path)?;
    Ok(path)
}

pub fn write_omega_csv(estimates: &[OmegaEstimate], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "tag", "estimate", "restarts"])?;
    for e in estimates {
        w.write_record([
            format!("{:.16e}", e.delta),
            e.tag.label().to_string(),
            format!("{:.16e}", e.lower_bound),
            e.restarts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    RatioVsDelta,
    LoglogSlope,
    KappaTable,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-vs-delta" => Ok(PlotKind::RatioVsDelta),
            "loglog-slope" => Ok(PlotKind::LoglogSlope),
            "kappa-table" => Ok(PlotKind::KappaTable),
            _ => Err(Error::UnknownKind(format!("plot `{s}`"))),
        }
    }
}

impl PlotKind {
    pub fn label(self) -> &'static str {
        match self {
            PlotKind::RatioVsDelta => "ratio-vs-delta",
            PlotKind::LoglogSlope => "loglog-slope",
            PlotKind::KappaTable => "kappa-table",
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let p = 0.05 * (hi - lo);
        (lo - p, hi + p)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x.0) / (self.x.1 - self.x.0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y.0) / (self.y.1 - self.y.0) * (H - MT - MB)
    }
}

fn svg_open(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>
<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        W / 2.0,
        xml_escape(title),
        (W + ML - MR) / 2.0,
        H - 12.0,
        xml_escape(xlabel),
        (H - MB + MT) / 2.0,
        (H - MB + MT) / 2.0,
        xml_escape(ylabel),
    );
}

fn svg_axes(out: &mut String, fr: &Frame) {
    let _ = writeln!(
        out,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>
<text x="{ML}" y="{}" font-size="10">{:.3}</text>
<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>
<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>
<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#,
        H - MB,
        W - MR,
        H - MB,
        H - MB,
        H - MB + 14.0,
        fr.x.0,
        W - MR,
        H - MB + 14.0,
        fr.x.1,
        ML - 4.0,
        H - MB,
        fr.y.0,
        ML - 4.0,
        MT + 4.0,
        fr.y.1,
    );
}

fn title(record: &ExperimentRecord) -> String {
    format!(
        "{} dims {}-{} seed {}",
        record.tag, record.config.dims[0], record.config.dims[1], record.seed
    )
}

/// SVG text for the record. Slope plots draw the least-squares line when
/// the sweep has enough points for [`exponent_fit`].
pub fn render_svg(record: &ExperimentRecord, kind: PlotKind) -> Result<String> {
    if record.rows.is_empty() {
        return Err(Error::InvalidArgument("empty record".into()));
    }
    let mut out = String::new();
    match kind {
        PlotKind::RatioVsDelta | PlotKind::LoglogSlope => {
            let pts: Vec<(f64, f64)> = match kind {
                PlotKind::RatioVsDelta => record
                    .rows
                    .iter()
                    .filter(|r| r.delta > 0.0 && r.ratio.is_finite())
                    .map(|r| (r.delta.log10(), r.ratio))
                    .collect(),
                _ => record
                    .rows
                    .iter()
                    .filter(|r| r.delta > 0.0 && r.numerator > 0.0)
                    .map(|r| (r.delta.log10(), r.numerator.log10()))
                    .collect(),
            };
            if pts.is_empty() {
                return Err(Error::InvalidArgument("no plottable rows".into()));
            }
            let xs = pts.iter().map(|p| p.0);
            let ys = pts.iter().map(|p| p.1);
            let fr = Frame {
                x: padded(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max)),
                y: padded(ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max)),
            };
            let (xl, yl) = match kind {
                PlotKind::RatioVsDelta => ("log10 delta", "ratio"),
                _ => ("log10 delta", "log10 numerator"),
            };
            svg_open(&mut out, &title(record), xl, yl);
            svg_axes(&mut out, &fr);
            for &(x, y) in &pts {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="steelblue"/>"#,
                    fr.px(x),
                    fr.py(y)
                );
            }
            if kind == PlotKind::LoglogSlope {
                let raw: Vec<(f64, f64)> = record
                    .rows
                    .iter()
                    .filter(|r| r.delta > 0.0 && r.numerator > 0.0)
                    .map(|r| (r.delta, r.numerator))
                    .collect();
                if let Ok(fit) = exponent_fit(&raw) {
                    // log10 y = slope log10 x + intercept / ln 10.
                    let c = fit.intercept / std::f64::consts::LN_10;
                    let (x0, x1) = fr.x;
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="firebrick"/>
<text x="{}" y="{}" font-size="12" text-anchor="end" class="slope">slope = {:.15e}</text>"#,
                        fr.px(x0),
                        fr.py(fit.slope * x0 + c),
                        fr.px(x1),
                        fr.py(fit.slope * x1 + c),
                        W - MR - 4.0,
                        MT + 16.0,
                        fit.slope
                    );
                }
            }
        }
        PlotKind::KappaTable => {
            svg_open(&mut out, &title(record), "set J", "kappa");
            let cols = 3usize;
            let rows_per_col = record.rows.len().div_ceil(cols);
            let line_h = ((H - MT - MB) / rows_per_col.max(1) as f64).min(14.0);
            for (i, r) in record.rows.iter().enumerate() {
                let (c, k) = (i / rows_per_col, i % rows_per_col);
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" font-size="{:.1}">{} = {}</text>"#,
                    ML + c as f64 * (W - ML - MR) / cols as f64,
                    MT + 12.0 + k as f64 * line_h,
                    (line_h - 2.0).max(4.0),
                    xml_escape(&r.inputs_hash),
                    r.numerator
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(record: &ExperimentRecord, kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{}-{}.svg", record.id, kind.label()));
    std::fs::write(&path, render_svg(record, kind)?)?;
    Ok(path)
}

fn plain_config(function: &str, dims: [usize; 2], trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        function: function.into(),
        alpha: f64::NAN,
        m: 1,
        omega: None,
        dims,
        cap: 1.0,
        delta_range: [0.0, 0.0],
        trials,
        ascent_runs: 0,
        ascent_iters: 0,
    }
}

fn residual_row(tag: &str, trial: usize, dim: usize, seed: u64, residual: f64) -> TrialRow {
    TrialRow {
        tag: tag.into(),
        trial,
        kind: "random".into(),
        dim,
        seed,
        delta: 0.0,
        numerator: residual,
        denominator: 1.0,
        ratio: residual,
        inputs_hash: String::new(),
    }
}

/// κ_J by recursion and closed form, one row per set with max J ≤ n.
pub fn kappa_record(table: &KappaTable, seed: u64) -> Result<ExperimentRecord> {
    use num_traits::ToPrimitive;
    let mut rows = Vec::new();
    for n in 1..=table.n_max() {
        for j in sets_with_max(n) {
            let rec = table.get(j)?.to_f64().unwrap_or(f64::INFINITY);
            let closed = if j.contains(1) { kappa_closed(j).to_f64().unwrap_or(f64::INFINITY) } else { 0.0 };
            rows.push(TrialRow {
                tag: "kappa".into(),
                trial: rows.len(),
                kind: "kappa".into(),
                dim: j.len(),
                seed,
                delta: j.mask() as f64,
                numerator: rec,
                denominator: closed,
                ratio: if rec == closed { 1.0 } else { 0.0 },
                inputs_hash: j.to_string(),
            });
        }
    }
    let n = table.n_max() as usize;
    Ok(ExperimentRecord::new("kappa", plain_config("kappa", [1, n], rows.len()), seed, None, None, rows))
}

fn search_params(cfg: &RunConfig, seed: u64) -> Result<SearchParams> {
    let d = SearchParams::default();
    Ok(SearchParams {
        dim: cfg.usize_or("dim", d.dim)?,
        restarts: cfg.usize_or("restarts", d.restarts)?,
        iters: cfg.usize_or("iters", d.iters)?,
        cap: cfg.f64_or("cap", d.cap)?,
        seed,
    })
}

fn functional(cfg: &RunConfig) -> Result<OmegaTag> {
    cfg.get("functional").unwrap_or("omega").parse()
}

fn finish(
    tag: &str,
    cfg: &RunConfig,
    dir: &Path,
    csv: Vec<PathBuf>,
    svg: Vec<PathBuf>,
    summary: Value,
) -> Result<ReportBundle> {
    let json_path = dir.join(format!("{tag}-{}.json", cfg.seed()?));
    let doc = json!({
        "tag": tag,
        "version": VERSION,
        "config": cfg.echo(),
        "summary": summary,
    });
    write_json(&json_path, &doc)?;
    Ok(ReportBundle {
        tag: tag.into(),
        csv,
        json: json_path,
        svg,
        config: cfg.echo(),
        version: VERSION.into(),
        summary,
    })
}

fn record_summary(rec: &ExperimentRecord) -> Value {
    json!({
        "id": rec.id,
        "rows": rec.summary.rows,
        "max_ratio": rec.summary.max_ratio,
        "argmax_trial": rec.summary.argmax_trial,
        "argmax_kind": rec.summary.argmax_kind,
        "seminorm": rec.seminorm,
        "grid": rec.grid,
        "config": rec.config,
    })
}

/// Runs the experiment named by the `tag` key.
pub fn run(cfg: &RunConfig) -> Result<ReportBundle> {
    let tag = cfg.tag()?.to_string();
    let seed = cfg.seed()?;
    let dir = out_dir(cfg)?;
    match tag.as_str() {
        "holder-scan" => {
            let theorem: BoundTag = cfg.get("theorem").unwrap_or("saH").parse()?;
            let (fid, alpha, m, omega) = theorem_defaults(theorem);
            let alpha = cfg.f64_or("alpha", alpha)?;
            let m = cfg.usize_or("m", m as usize)? as u32;
            let f = build_function(cfg.get("function").unwrap_or(fid), alpha)?;
            let mut params = match cfg.get("omega").or(omega) {
                Some(w) => RatioParams::modulus(build_modulus(w, m)?),
                None => RatioParams::holder(alpha),
            };
            params.alpha = alpha;
            params.m = m;
            params = params.with_ascent(cfg.usize_or("ascent_runs", 0)?, cfg.usize_or("ascent_iters", 40)?);
            let sampler = OperatorSampler::new(
                cfg.dims_or([2, 8])?,
                cfg.f64_or("cap", 1.0)?,
                [cfg.f64_or("delta_min", 1e-4)?, cfg.f64_or("delta_max", 1.0)?],
            )?;
            let rec = ratio_experiment(theorem, f.as_ref(), &params, &sampler, cfg.usize_or("trials", 1000)?, seed)?;
            let mut csv = vec![emit_csv(&rec, &dir)?];
            let mut svg = vec![emit_svg(&rec, PlotKind::RatioVsDelta, &dir)?];
            let mut summary = record_summary(&rec);
            if f.domain() == Domain::Line {
                let mut sweep = slope_record(f.as_ref(), cfg.usize_or("dim", 4)?, seed)?;
                sweep.id = format!("{}-sweep-{seed}", theorem);
                summary["sweep_slope"] = json!(exponent_fit(&sweep.sweep_points()).ok().map(|e| e.slope));
                csv.push(emit_csv(&sweep, &dir)?);
                svg.push(emit_svg(&sweep, PlotKind::LoglogSlope, &dir)?);
            }
            finish(&tag, cfg, &dir, csv, svg, summary)
        }
        "bks" => {
            let alpha = cfg.f64_or("alpha", 0.5)?;
            let sampler = OperatorSampler::new(cfg.dims_or([2, 8])?, cfg.f64_or("cap", 1.0)?, [1e-4, 1.0])?;
            let rec = bks_check(&sampler, alpha, cfg.usize_or("trials", 10_000)?, seed)?;
            let csv = vec![emit_csv(&rec, &dir)?];
            let svg = vec![emit_svg(&rec, PlotKind::RatioVsDelta, &dir)?];
            finish(&tag, cfg, &dir, csv, svg, record_summary(&rec))
        }
        "decompose" => {
            let d = cfg.usize_or("degree", 64)?;
            let mut rng = trial_rng(seed, 0);
            let coeffs: Vec<C64> = (0..2 * d + 1)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let f = PeriodicSignal::new(coeffs);
            let residual = reconstruct(&f, 0).max_coeff_diff(&f);
            let mut rows = Vec::new();
            let mut n = 0u32;
            while n == 0 || 2f64.powi(n as i32 - 1) <= d as f64 {
                let block = lp_block(&f, n);
                let mut r = residual_row("decompose", n as usize, 1, seed, block.sup_on_grid(8 * (d + 1)));
                r.kind = "block".into();
                rows.push(r);
                n += 1;
            }
            let defect = log_grid(1e-6, 1e6, 1000).into_iter().map(partition_defect).fold(0.0, f64::max);
            let rec = ExperimentRecord::new("decompose", plain_config("random_trig", [d, d], 1), seed, None, None, rows);
            let csv = vec![emit_csv(&rec, &dir)?];
            finish(&tag, cfg, &dir, csv, vec![], json!({
                "degree": d,
                "blocks": rec.rows.len(),
                "reconstruction_residual": residual,
                "partition_defect": defect,
            }))
        }
        "seminorm" => {
            let alpha = cfg.f64_or("alpha", 0.5)?;
            let m = cfg.usize_or("m", 1)? as u32;
            let f = build_function(cfg.get("function").unwrap_or("abs_pow"), alpha)?;
            let grid = match f.domain() {
                Domain::Line => Grid::default_line(),
                Domain::Circle => Grid::default_circle(),
            };
            let rep = match cfg.get("omega") {
                Some(w) => lambda_omega_norm(f.as_ref(), &build_modulus(w, m)?, m, &grid)?,
                None => holder_seminorm(f.as_ref(), alpha, &grid)?,
            };
            finish(&tag, cfg, &dir, vec![], vec![], json!({
                "function": f.name(),
                "value": rep.value,
                "t_star": rep.t_star,
                "x_star": rep.x_star,
                "order": rep.order,
                "grid": rep.grid,
            }))
        }
        "verify-doi" | "verify-moi" => {
            let trials = cfg.usize_or("trials", 1000)?;
            let dims = cfg.dims_or(if tag == "verify-doi" { [2, 8] } else { [2, 5] })?;
            let deg = cfg.usize_or("degree", 6)?;
            let m = cfg.usize_or("m", 2)?;
            let sampler = OperatorSampler::new(dims, cfg.f64_or("cap", 1.0)?, [1e-3, 1.0])?;
            let rows = (0..trials)
                .map(|t| {
                    let mut rng = trial_rng(seed, t as u64);
                    let n = sampler.dim(&mut rng);
                    let d = rng.random_range(0..=deg);
                    let coeffs: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let f = Polynomial::real(&coeffs);
                    let a = sampler.hermitian(&mut rng, n);
                    let delta = sampler.delta(&mut rng);
                    let k = sampler.direction(&mut rng, n, delta);
                    let r = if tag == "verify-doi" {
                        bsf_residual(&f, &a, &(&a + &k))?
                    } else {
                        lemma_m_residual(&f, &a, &k, m)?
                    };
                    Ok(residual_row(&tag, t, n, seed, r))
                })
                .collect::<Result<Vec<_>>>()?;
            let rec = ExperimentRecord::new(&tag, plain_config("random_poly", dims, trials), seed, None, None, rows);
            let csv = vec![emit_csv(&rec, &dir)?];
            finish(&tag, cfg, &dir, csv, vec![], json!({
                "trials": trials,
                "max_residual": rec.summary.max_ratio,
                "m": if tag == "verify-moi" { Some(m) } else { None },
            }))
        }
        "verify-gen" => {
            let big_n = cfg.usize_or("n", 3)? as u32;
            let trials = cfg.usize_or("trials", 20)?;
            let dims = cfg.dims_or([2, 4])?;
            let deg = cfg.usize_or("degree", 4)?;
            let table = KappaTable::build(big_n.max(2))?;
            let sampler = OperatorSampler::new(dims, 1.0, [1e-3, 1.0])?;
            let rows = (0..trials)
                .map(|t| {
                    let mut rng = trial_rng(seed, t as u64);
                    let n = sampler.dim(&mut rng);
                    let us = (0..big_n).map(|_| random::haar_unitary(&mut rng, n)).collect();
                    let fam = UnitaryFamily::new(us)?;
                    let coeffs: Vec<C64> = (0..2 * deg + 1)
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    let f = PeriodicSignal::new(coeffs);
                    let rep = crate::set_combinatorics::verify_gen(big_n, &fam, &f, &table)?;
                    Ok(residual_row(&tag, t, n, seed, rep.residual / rep.lhs_norm.max(1.0)))
                })
                .collect::<Result<Vec<_>>>()?;
            let rec = ExperimentRecord::new(&tag, plain_config("random_trig", dims, trials), seed, None, None, rows);
            let csv = vec![emit_csv(&rec, &dir)?];
            finish(&tag, cfg, &dir, csv, vec![], json!({
                "n": big_n,
                "trials": trials,
                "max_residual": rec.summary.max_ratio,
            }))
        }
        "kappa" => {
            let n = cfg.usize_or("n", 8)? as u32;
            let table = KappaTable::build(n)?;
            let path = dir.join(format!("kappa-{seed}.csv"));
            table.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            let rec = kappa_record(&table, seed)?;
            let mismatches = rec.rows.iter().filter(|r| r.ratio != 1.0).count();
            let svg = vec![emit_svg(&rec, PlotKind::KappaTable, &dir)?];
            finish(&tag, cfg, &dir, vec![path], svg, json!({
                "n_max": n,
                "sets": rec.rows.len(),
                "mismatches": mismatches,
            }))
        }
        "dilate-check" => {
            let trials = cfg.usize_or("trials", 100)?;
            let dims = cfg.dims_or([1, 4])?;
            let max_deg = cfg.usize_or("degree", 6)?;
            let sampler = OperatorSampler::new(dims, 1.0, [1e-3, 0.5])?;
            let mut worst = [0.0f64; 4];
            let mut rows = Vec::new();
            for t in 0..trials {
                let mut rng = trial_rng(seed, t as u64);
                let n = sampler.dim(&mut rng);
                let d = rng.random_range(1..=max_deg);
                let tm = ContractionMatrix::new(sampler.contraction(&mut rng, n))?;
                let dil = dilate(&tm, d)?;
                let delta = sampler.delta(&mut rng);
                let rm = ContractionMatrix::new(sampler.contraction_near(&mut rng, tm.matrix(), delta))?;
                let coeffs: Vec<C64> = (0..=d)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let f = Polynomial::analytic(coeffs);
                let checks = [
                    dil.unitarity_residual(),
                    dil.power_residual(tm.matrix()),
                    semi_spectral_doi(&f, &tm, &rm, None)?.residual_vs_direct,
                    lemma_mc_residual(&f, &tm, &rm, 2)?,
                ];
                for (w, c) in worst.iter_mut().zip(checks) {
                    *w = w.max(c);
                }
                rows.push(residual_row(&tag, t, n, seed, checks.into_iter().fold(0.0, f64::max)));
            }
            let rec = ExperimentRecord::new(&tag, plain_config("random_analytic", dims, trials), seed, None, None, rows);
            let csv = vec![emit_csv(&rec, &dir)?];
            finish(&tag, cfg, &dir, csv, vec![], json!({
                "trials": trials,
                "unitarity": worst[0],
                "power": worst[1],
                "semi_spectral_doi": worst[2],
                "lemma_mc": worst[3],
            }))
        }
        "omega-scan" | "omega-search" | "commutator-scan" => {
            let f = build_function(cfg.get("function").unwrap_or("abs_pow"), cfg.f64_or("alpha", 0.5)?)?;
            let params = search_params(cfg, seed)?;
            let tags = if tag == "commutator-scan" {
                vec![OmegaTag::Omega, OmegaTag::Commutator, OmegaTag::GeneralCommutator, OmegaTag::Quasicommutator]
            } else {
                vec![functional(cfg)?]
            };
            let deltas = if tag == "omega-search" {
                vec![cfg.f64_or("delta", 0.1)?]
            } else {
                cfg.delta_grid(1e-3, 1.0, 8)?
            };
            let mut all = Vec::new();
            for t in &tags {
                all.extend(omega_sweep(f.as_ref(), &deltas, *t, &params)?);
            }
            let mut summary = json!({
                "function": f.name(),
                "dim": params.dim,
                "cap": params.cap,
                "estimates": all.iter().map(|e| json!({
                    "tag": e.tag.label(),
                    "delta": e.delta,
                    "estimate": e.lower_bound,
                    "constraint": e.constraint,
                })).collect::<Vec<_>>(),
            });
            if tag == "commutator-scan" {
                let mut worst: f64 = 0.0;
                for e in all.iter().filter(|e| e.tag == OmegaTag::Commutator) {
                    let tr = mcc_transfer(f.as_ref(), &e.witness, TransferDirection::CommutatorToOmega)?;
                    worst = worst.max(0.5 * tr.source_value - tr.value);
                }
                for e in all.iter().filter(|e| e.tag == OmegaTag::Omega) {
                    let tr = mcc_transfer(f.as_ref(), &e.witness, TransferDirection::OmegaToQuasi)?;
                    worst = worst.max((tr.value - tr.source_value).abs());
                }
                summary["transfer_violation"] = json!(worst);
            }
            let csv_path = dir.join(format!("{tag}-{seed}.csv"));
            write_omega_csv(&all, &csv_path)?;
            let witnesses = dir.join(format!("{tag}-{seed}-witnesses.json"));
            write_json(&witnesses, &serde_json::to_value(all.iter().map(|e| e.to_json()).collect::<Vec<_>>())?)?;
            if tag == "omega-search" {
                let e = omega_search(f.as_ref(), deltas[0], tags[0], &params)?;
                summary["lower_bound"] = json!(e.lower_bound);
            }
            finish(&tag, cfg, &dir, vec![csv_path], vec![], summary)
        }
        "zygmund-fit" => {
            let f = build_function(cfg.get("function").unwrap_or("lacunary"), cfg.f64_or("alpha", 1.0)?)?;
            let params = search_params(cfg, seed)?;
            let deltas: Vec<f64> = (1..=cfg.usize_or("delta_points", 10)?).map(|k| 2f64.powi(-(k as i32))).collect();
            let fit = zygmund_fit(f.as_ref(), &deltas, &params)?;
            finish(&tag, cfg, &dir, vec![], vec![], json!({
                "function": f.name(),
                "c_hat": fit.c_hat,
                "points": fit.points,
            }))
        }
        "abs-explorer" => {
            let dims: Vec<usize> = match cfg.get("dim_list") {
                Some(v) => v
                    .split(',')
                    .map(|d| d.trim().parse().map_err(|_| config_err(format!("bad dimension `{d}`"))))
                    .collect::<Result<_>>()?,
                None => vec![1, 2, 4, 8],
            };
            let rep = abs_explorer(&dims, cfg.usize_or("budget", 400)?, seed)?;
            let csv = vec![emit_csv(&rep.record, &dir)?];
            finish(&tag, cfg, &dir, csv, vec![], json!({
                "envelope": rep.envelope,
                "rows": rep.record.summary.rows,
                "max_ratio": rep.record.summary.max_ratio,
            }))
        }
        "report" => {
            let input = cfg.get("input").ok_or_else(|| config_err("report needs `input`"))?;
            let rec = record_from_csv(Path::new(input), seed)?;
            let kind: PlotKind = cfg.get("plot").unwrap_or("ratio-vs-delta").parse()?;
            let svg = vec![emit_svg(&rec, kind, &dir)?];
            finish(&tag, cfg, &dir, vec![PathBuf::from(input)], svg, record_summary(&rec))
        }
        other => Err(Error::UnknownTag(other.into())),
    }
}

/// Rebuilds a record from a trial CSV. The tag comes from the first row.
pub fn record_from_csv(path: &Path, seed: u64) -> Result<ExperimentRecord> {
    let rows = crate::bounds_verifier::read_csv(path)?;
    let tag = rows.first().map(|r| r.tag.clone()).unwrap_or_else(|| "empty".into());
    let lo = rows.iter().map(|r| r.dim).min().unwrap_or(0);
    let hi = rows.iter().map(|r| r.dim).max().unwrap_or(0);
    let n = rows.len();
    Ok(ExperimentRecord::new(&tag, plain_config("from_csv", [lo, hi], n), seed, None, None, rows))
}

/// Holder exponent sweep used by the `holder-scan` plots.
pub fn slope_record(f: &dyn FunctionModel, dim: usize, seed: u64) -> Result<ExperimentRecord> {
    holder_sweep(f, dim, &log_grid(1e-4, 1e-1, 13), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str, dir: &Path) -> RunConfig {
        let mut c = RunConfig::parse(text).unwrap();
        c.set("out", dir.to_str().unwrap()).unwrap();
        c
    }

    #[test]
    fn parse_and_reject() {
        let c = RunConfig::parse("# comment\ntag = bks\nseed = 7\n\nalpha = 0.25 # trailing\n").unwrap();
        assert_eq!(c.get("alpha"), Some("0.25"));
        assert_eq!(c.seed().unwrap(), 7);
        match RunConfig::parse("dimms = 3") {
            Err(Error::Config(msg)) => assert!(msg.contains("dimms")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("tag = bks").unwrap().seed(), Err(Error::Config(_))));
        assert!(RunConfig::parse("no equals sign").is_err());
        let bad = RunConfig::parse("tag = nonsense\nseed = 1").unwrap();
        assert!(matches!(run(&bad), Err(Error::UnknownTag(_))));
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
        assert_eq!(c.dims_or([1, 1]).unwrap(), [1, 1]);
        assert_eq!(RunConfig::parse("dims = 2..6").unwrap().dims_or([1, 1]).unwrap(), [2, 6]);
    }

    #[test]
    fn bks_runs_are_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let text = "tag = bks\nseed = 7\ntrials = 300\n";
        let a = run(&cfg(text, d1.path())).unwrap();
        let b = run(&cfg(text, d2.path())).unwrap();
        assert_eq!(std::fs::read(&a.csv[0]).unwrap(), std::fs::read(&b.csv[0]).unwrap());
        assert_eq!(std::fs::read(&a.json).unwrap(), std::fs::read(&b.json).unwrap());
        let rows = crate::bounds_verifier::read_csv(&a.csv[0]).unwrap();
        assert_eq!(rows.len(), 300);
        assert_eq!(a.summary["rows"], json!(300));
        let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        assert_eq!(a.summary["max_ratio"].as_f64().unwrap(), max);
    }

    #[test]
    fn verify_gen_small() {
        let d = tempfile::tempdir().unwrap();
        let b = run(&cfg("tag = verify-gen\nseed = 3\nn = 3\ntrials = 4\n", d.path())).unwrap();
        assert!(b.summary["max_residual"].as_f64().unwrap() <= 1e-9);
    }

    #[test]
    fn other_tags_run() {
        let d = tempfile::tempdir().unwrap();
        for text in [
            "tag = kappa\nn = 5\n",
            "tag = decompose\ndegree = 40\n",
            "tag = verify-doi\ntrials = 20\n",
            "tag = verify-moi\ntrials = 10\nm = 3\ndims = 2..4\n",
            "tag = dilate-check\ntrials = 5\n",
            "tag = holder-scan\ntheorem = omsa\ntrials = 30\n",
            "tag = omega-search\ndim = 2\nrestarts = 2\niters = 10\n",
            "tag = commutator-scan\ndim = 2\nrestarts = 2\niters = 10\ndelta_points = 2\nfunction = sin\n",
        ] {
            let b = run(&cfg(&format!("{text}seed = 2\n"), d.path())).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert!(b.json.exists());
        }
    }

    fn synthetic(points: &[(f64, f64)]) -> ExperimentRecord {
        let rows = points
            .iter()
            .enumerate()
            .map(|(i, &(d, y))| TrialRow {
                tag: "sweep".into(),
                trial: i,
                kind: "sweep".into(),
                dim: 3,
                seed: 1,
                delta: d,
                numerator: y,
                denominator: d,
                ratio: y / d,
                inputs_hash: String::new(),
            })
            .collect();
        ExperimentRecord::new("sweep", plain_config("synthetic", [3, 3], points.len()), 1, None, None, rows)
    }

    #[test]
    fn svg_output() {
        let single = synthetic(&[(0.1, 0.3)]);
        let s = render_svg(&single, PlotKind::LoglogSlope).unwrap();
        assert_eq!(s.matches("<circle").count(), 1);
        assert!(!s.contains("slope ="));
        roxmltree::Document::parse(&s).unwrap();

        let pts: Vec<(f64, f64)> = log_grid(1e-4, 1e-1, 10).into_iter().map(|d| (d, 3.0 * d.powf(0.5))).collect();
        let rec = synthetic(&pts);
        let s = render_svg(&rec, PlotKind::LoglogSlope).unwrap();
        let doc = roxmltree::Document::parse(&s).unwrap();
        let label = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("slope"))
            .and_then(|n| n.text())
            .unwrap();
        let shown: f64 = label.trim_start_matches("slope = ").parse().unwrap();
        assert!((shown - exponent_fit(&pts).unwrap().slope).abs() < 1e-9);
        assert!(s.contains("sweep dims 3-3 seed 1"));

        let table = KappaTable::build(4).unwrap();
        let k = render_svg(&kappa_record(&table, 0).unwrap(), PlotKind::KappaTable).unwrap();
        roxmltree::Document::parse(&k).unwrap();

        let empty = synthetic(&[]);
        assert!(render_svg(&empty, PlotKind::RatioVsDelta).is_err());
    }

    #[test]
    fn csv_round_trip_and_report() {
        let d = tempfile::tempdir().unwrap();
        let pts: Vec<(f64, f64)> = log_grid(1e-4, 1.0, 10_000).into_iter().map(|x| (x, x.sqrt() / 3.0)).collect();
        let rec = synthetic(&pts);
        let p = emit_csv(&rec, d.path()).unwrap();
        let back = crate::bounds_verifier::read_csv(&p).unwrap();
        assert_eq!(back.len(), 10_000);
        for (a, b) in back.iter().zip(&rec.rows) {
            assert_eq!(a.delta.to_bits(), b.delta.to_bits());
            assert_eq!(a.numerator.to_bits(), b.numerator.to_bits());
            assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
        }
        let text = format!("tag = report\nseed = 1\nplot = loglog-slope\ninput = {}\n", p.display());
        let b = run(&cfg(&text, d.path())).unwrap();
        assert_eq!(b.summary["rows"], json!(10_000));
        roxmltree::Document::parse(&std::fs::read_to_string(&b.svg[0]).unwrap()).unwrap();
    }

    #[test]
    fn empty_record_csv_is_header_only() {
        let d = tempfile::tempdir().unwrap();
        let p = emit_csv(&synthetic(&[]), d.path()).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("tag,trial,kind,dim,seed,delta"));
    }

    #[test]
    fn registries() {
        for id in ["zero", "identity", "abs", "abs_pow", "sin", "lacunary", "circle_pow", "circle_lacunary", "analytic_lacunary", "poly:1,2", "apoly:0,1"] {
            build_function(id, 0.5).unwrap();
        }
        assert!(build_function("bogus", 0.5).is_err());
        assert_eq!(build_modulus("power:1.5", 2).unwrap().order, 2);
        assert!(build_modulus("sqrt", 1).is_ok());
        assert!(build_modulus("nope", 1).is_err());
        let l = circle_lacunary(3, 1.0);
        assert!((l.value(C64::new(1.0, 0.0)).unwrap().re - (0.5 + 0.25 + 0.125)).abs() < 1e-15);
    }
}
