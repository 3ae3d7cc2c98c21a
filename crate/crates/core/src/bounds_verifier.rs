//! Randomized ratio experiments for the operator Hölder, Zygmund and ω_*
//! estimates, the constant-one power inequality, measure averages, exponent
//! fits, commutator block identities and the search for |t|.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binomial;
use crate::contraction_dilation::{poly_func_of, ContractionMatrix};
use crate::error::{Error, Result};
use crate::extremal_search::{block_diag, mcc_construction, omega_search, OmegaTag, SearchParams};
use crate::function::{Domain, FunctionModel, Polynomial, PowerAbs};
use crate::linalg::{
    eig_hermitian, from_real_diag, hermitian_part, random, spectral_norm, CMat, MatrixJson, C64,
};
use crate::matrix_calc::{func_of, func_of_unitary, op_finite_diff};
use crate::moduli::{holder_seminorm, lambda_omega_norm, omega_star, Grid, GridSpec, ModulusOfContinuity};

/// Inequalities covered by [`ratio_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundTag {
    /// ‖f(A)−f(B)‖ vs ‖f‖_{Λα}‖A−B‖^α.
    SaH,
    /// ‖Δ_K^m f(A)‖ vs ‖f‖_{Λα}‖K‖^α.
    Sam,
    /// ‖f(U)−f(V)‖ vs ‖f‖_{Λα}‖U−V‖^α.
    UH,
    /// ‖∑(−1)^k C(m,k) f(e^{ikA}U)‖ vs ‖f‖_{Λα}‖A‖^α.
    Hou,
    /// ‖f(U)−f(V)‖ vs ‖f‖_{Λ1}(2 + log₂(1/‖U−V‖))‖U−V‖.
    OLu,
    /// Contractions, Hölder.
    CH,
    /// Contractions, m-th differences along T + (k/m)(R−T).
    Conh,
    /// Contractions, Zygmund class.
    OLc,
    /// ‖f(A)−f(B)‖ vs ‖f‖_{Λω} ω_*(‖A−B‖).
    Omsa,
    /// Unitary ω_* bound.
    Omu,
    /// Contraction ω_* bound.
    Omc,
    /// ‖Δ_K^m f(A)‖ vs ‖f‖_{Λω,m} ω_{*,m}(‖K‖).
    Oon,
    /// ‖f(A)R−Rf(B)‖ vs ‖f‖_{Λα}‖AR−RB‖^α‖R‖^{1−α}.
    Fcc,
    /// ‖f(A)R−Rf(B)‖ vs ‖f‖_{Λω}‖R‖ω_*(‖AR−RB‖/‖R‖).
    Oqc,
    /// ‖f(A)−f(B)‖ vs ‖f‖_Lip log((b−a)/‖A−B‖ + 1)‖A−B‖, spectra in [a, b].
    Lip,
}

impl BoundTag {
    pub const ALL: [BoundTag; 15] = [
        BoundTag::SaH,
        BoundTag::Sam,
        BoundTag::UH,
        BoundTag::Hou,
        BoundTag::OLu,
        BoundTag::CH,
        BoundTag::Conh,
        BoundTag::OLc,
        BoundTag::Omsa,
        BoundTag::Omu,
        BoundTag::Omc,
        BoundTag::Oon,
        BoundTag::Fcc,
        BoundTag::Oqc,
        BoundTag::Lip,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundTag::SaH => "saH",
            BoundTag::Sam => "sam",
            BoundTag::UH => "uH",
            BoundTag::Hou => "hou",
            BoundTag::OLu => "oLu",
            BoundTag::CH => "cH",
            BoundTag::Conh => "conh",
            BoundTag::OLc => "oLc",
            BoundTag::Omsa => "omsa",
            BoundTag::Omu => "omu",
            BoundTag::Omc => "omc",
            BoundTag::Oon => "oon",
            BoundTag::Fcc => "fcc",
            BoundTag::Oqc => "oqc",
            BoundTag::Lip => "lip",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            BoundTag::UH
            | BoundTag::Hou
            | BoundTag::OLu
            | BoundTag::CH
            | BoundTag::Conh
            | BoundTag::OLc
            | BoundTag::Omu
            | BoundTag::Omc => Domain::Circle,
            _ => Domain::Line,
        }
    }

    fn is_contraction(self) -> bool {
        matches!(self, BoundTag::CH | BoundTag::Conh | BoundTag::OLc | BoundTag::Omc)
    }

    fn is_unitary(self) -> bool {
        matches!(self, BoundTag::UH | BoundTag::OLu | BoundTag::Omu)
    }

    fn needs_omega(self) -> bool {
        matches!(self, BoundTag::Omsa | BoundTag::Omu | BoundTag::Omc | BoundTag::Oon | BoundTag::Oqc)
    }

    fn uses_m(self) -> bool {
        matches!(self, BoundTag::Sam | BoundTag::Hou | BoundTag::Conh | BoundTag::Oon)
    }
}

impl FromStr for BoundTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundTag::ALL
            .iter()
            .copied()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTag(s.into()))
    }
}

impl std::fmt::Display for BoundTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Random operators for the experiments. Hermitian spectra are mapped into
/// [−cap, cap]; δ is drawn log-uniformly from `delta_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSampler {
    pub dims: [usize; 2],
    pub cap: f64,
    pub delta_range: [f64; 2],
}

impl Default for OperatorSampler {
    fn default() -> Self {
        OperatorSampler {
            dims: [2, 8],
            cap: 1.0,
            delta_range: [1e-4, 1.0],
        }
    }
}

impl OperatorSampler {
    pub fn new(dims: [usize; 2], cap: f64, delta_range: [f64; 2]) -> Result<Self> {
        if dims[0] == 0 || dims[0] > dims[1] {
            return Err(Error::InvalidArgument(format!("bad dimension range {dims:?}")));
        }
        if !(cap > 0.0) || !(delta_range[0] > 0.0 && delta_range[0] <= delta_range[1]) {
            return Err(Error::InvalidArgument("cap and δ range must be positive".into()));
        }
        Ok(OperatorSampler { dims, cap, delta_range })
    }

    pub fn dim<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.dims[0]..=self.dims[1])
    }

    pub fn delta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = (self.delta_range[0].ln(), self.delta_range[1].ln());
        if hi > lo {
            rng.random_range(lo..=hi).exp()
        } else {
            self.delta_range[0]
        }
    }

    pub fn hermitian<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> CMat {
        random::hermitian_in(rng, n, -self.cap, self.cap)
    }

    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, delta: f64) -> CMat {
        random::hermitian_direction(rng, n, delta)
    }

    pub fn unitary<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> CMat {
        random::haar_unitary(rng, n)
    }

    /// V = exp(iH)U with ‖H‖ = 2 arcsin(δ/2), so that ‖U − V‖ = δ for δ ≤ 2.
    pub fn unitary_near<R: Rng + ?Sized>(&self, rng: &mut R, u: &CMat, delta: f64) -> CMat {
        let theta = 2.0 * (delta.min(2.0) / 2.0).asin();
        random::unitary_exp(&random::hermitian_direction(rng, u.nrows(), theta)) * u
    }

    pub fn contraction<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> CMat {
        let norm = rng.random_range(0.5..=1.0);
        random::contraction(rng, n, norm)
    }

    /// T + G with ‖G‖ = δ, rescaled into the unit ball when needed.
    pub fn contraction_near<R: Rng + ?Sized>(&self, rng: &mut R, t: &CMat, delta: f64) -> CMat {
        let g = random::contraction(rng, t.nrows(), delta);
        unit_ball(t + g)
    }

    /// Haar eigenvectors with eigenvalues uniform in [0, top]; a quarter of the
    /// samples get a zero eigenvalue.
    pub fn psd<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, top: f64) -> CMat {
        let v = random::haar_unitary(rng, n);
        let mut ev: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=top)).collect();
        if rng.random_bool(0.25) {
            ev[0] = 0.0;
        }
        hermitian_part(&(&v * from_real_diag(&ev) * v.adjoint()))
    }
}

fn unit_ball(m: CMat) -> CMat {
    let n = spectral_norm(&m);
    if n > 1.0 {
        m.unscale(n)
    } else {
        m
    }
}

fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

fn psd_part(m: &CMat) -> Result<CMat> {
    eig_hermitian(&hermitian_part(m))?.apply(|z| Ok(C64::new(z.re.max(0.0), 0.0)))
}

/// One trial of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub tag: String,
    pub trial: usize,
    /// "random", "ascent" or "sweep".
    pub kind: String,
    pub dim: usize,
    pub seed: u64,
    pub delta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub inputs_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub function: String,
    pub alpha: f64,
    pub m: u32,
    pub omega: Option<String>,
    pub dims: [usize; 2],
    pub cap: f64,
    pub delta_range: [f64; 2],
    pub trials: usize,
    pub ascent_runs: usize,
    pub ascent_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub max_ratio: f64,
    pub argmax_trial: Option<usize>,
    pub argmax_kind: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub tag: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub seminorm: Option<f64>,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

pub const CSV_HEADER: [&str; 10] = [
    "tag", "trial", "kind", "dim", "seed", "delta", "numerator", "denominator", "ratio", "inputs_hash",
];

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn summarize(rows: &[TrialRow]) -> Summary {
    let mut s = Summary {
        rows: rows.len(),
        max_ratio: 0.0,
        argmax_trial: None,
        argmax_kind: None,
    };
    for r in rows {
        if s.argmax_trial.is_none() || r.ratio > s.max_ratio {
            s.max_ratio = r.ratio;
            s.argmax_trial = Some(r.trial);
            s.argmax_kind = Some(r.kind.clone());
        }
    }
    s
}

fn kind_rank(kind: &str) -> u8 {
    match kind {
        "random" => 0,
        "ascent" => 1,
        _ => 2,
    }
}

impl ExperimentRecord {
    pub fn new(
        tag: &str,
        config: ExperimentConfig,
        seed: u64,
        grid: Option<GridSpec>,
        seminorm: Option<f64>,
        rows: Vec<TrialRow>,
    ) -> Self {
        let summary = summarize(&rows);
        ExperimentRecord {
            id: format!("{tag}-{seed}"),
            tag: tag.into(),
            config,
            seed,
            grid,
            seminorm,
            rows,
            summary,
        }
    }

    /// Row union keyed by (kind, trial); later rows win on duplicate keys.
    pub fn merge(mut self, other: ExperimentRecord) -> Result<Self> {
        if self.tag != other.tag || self.seed != other.seed {
            return Err(Error::InvalidArgument("records of different experiments".into()));
        }
        self.rows.extend(other.rows);
        self.rows.sort_by_key(|a| (kind_rank(&a.kind), a.trial));
        self.rows.dedup_by(|later, earlier| later.kind == earlier.kind && later.trial == earlier.trial);
        self.config.trials = self.rows.iter().filter(|r| r.kind == "random").count();
        self.summary = summarize(&self.rows);
        Ok(self)
    }

    /// Maximum ratio over rows of the given kind and trial index below `limit`.
    pub fn envelope(&self, kind: &str, limit: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind && r.trial < limit)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }

    /// (δ, numerator) pairs of the sweep rows.
    pub fn sweep_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.kind == "sweep").map(|r| (r.delta, r.numerator)).collect()
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.tag.clone(),
                r.trial.to_string(),
                r.kind.clone(),
                r.dim.to_string(),
                r.seed.to_string(),
                fmt_f64(r.delta),
                fmt_f64(r.numerator),
                fmt_f64(r.denominator),
                fmt_f64(r.ratio),
                r.inputs_hash.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Io(format!("short CSV row: {rec:?}")));
        let num = |i: usize| -> Result<f64> {
            field(i)?.parse::<f64>().map_err(|e| Error::Io(e.to_string()))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)?.parse::<u64>().map_err(|e| Error::Io(e.to_string()))
        };
        rows.push(TrialRow {
            tag: field(0)?.into(),
            trial: int(1)? as usize,
            kind: field(2)?.into(),
            dim: int(3)? as usize,
            seed: int(4)?,
            delta: num(5)?,
            numerator: num(6)?,
            denominator: num(7)?,
            ratio: num(8)?,
            inputs_hash: field(9)?.into(),
        });
    }
    Ok(rows)
}

/// First 16 bytes of SHA-256 over the bit patterns of the inputs, hex encoded.
pub fn inputs_hash(mats: &[CMat]) -> String {
    let mut h = Sha256::new();
    for m in mats {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for z in m.iter() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Numerators above this count as nonzero when the denominator vanishes.
pub const ZERO_NUMERATOR_TOL: f64 = 1e-12;

/// numerator/denominator with 0/0 = 0.
pub fn ratio(numerator: f64, denominator: f64, trial: usize) -> Result<f64> {
    if denominator == 0.0 {
        if numerator > ZERO_NUMERATOR_TOL {
            return Err(Error::ZeroDenominator { numerator, trial });
        }
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

#[derive(Clone, Debug)]
pub struct RatioParams {
    pub alpha: f64,
    pub m: u32,
    pub omega: Option<ModulusOfContinuity>,
    /// Seminorm grid; the domain default when absent.
    pub grid: Option<Grid>,
    pub ascent_runs: usize,
    pub ascent_iters: usize,
}

impl RatioParams {
    pub fn holder(alpha: f64) -> Self {
        RatioParams {
            alpha,
            m: 1,
            omega: None,
            grid: None,
            ascent_runs: 0,
            ascent_iters: 40,
        }
    }

    pub fn modulus(omega: ModulusOfContinuity) -> Self {
        RatioParams {
            omega: Some(omega),
            ..RatioParams::holder(1.0)
        }
    }

    pub fn with_m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }

    pub fn with_grid(mut self, g: Grid) -> Self {
        self.grid = Some(g);
        self
    }

    pub fn with_ascent(mut self, runs: usize, iters: usize) -> Self {
        self.ascent_runs = runs;
        self.ascent_iters = iters;
        self
    }
}

struct Ctx<'a> {
    tag: BoundTag,
    f: &'a dyn FunctionModel,
    poly: Option<&'a Polynomial>,
    alpha: f64,
    m: u32,
    omega: Option<&'a ModulusOfContinuity>,
    seminorm: f64,
}

fn signed(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Ctx<'_> {
    fn omega_star(&self, m: u32, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        omega_star(self.omega.expect("checked"), m, x)
    }

    fn contraction_fn(&self, t: &CMat) -> Result<CMat> {
        poly_func_of(&ContractionMatrix::new(t.clone())?, self.poly.expect("checked"))
    }

    /// (δ, numerator, denominator).
    fn evaluate(&self, x: &[CMat]) -> Result<(f64, f64, f64)> {
        let f = self.f;
        let s = self.seminorm;
        let a = self.alpha;
        Ok(match self.tag {
            BoundTag::SaH | BoundTag::Omsa | BoundTag::Lip => {
                let d = spectral_norm(&(&x[0] - &x[1]));
                let num = spectral_norm(&(func_of(&x[0], f)? - func_of(&x[1], f)?));
                let den = match self.tag {
                    BoundTag::SaH => s * d.powf(a),
                    BoundTag::Omsa => s * self.omega_star(1, d),
                    _ => {
                        let ea = eig_hermitian(&x[0])?.real_values();
                        let eb = eig_hermitian(&x[1])?.real_values();
                        let lo = ea[0].min(eb[0]);
                        let hi = ea[ea.len() - 1].max(eb[eb.len() - 1]);
                        if d > 0.0 {
                            s * ((hi - lo) / d + 1.0).ln() * d
                        } else {
                            0.0
                        }
                    }
                };
                (d, num, den)
            }
            BoundTag::Sam | BoundTag::Oon => {
                let d = spectral_norm(&x[1]);
                let num = spectral_norm(&op_finite_diff(f, &x[0], &x[1], self.m as usize)?);
                let den = if self.tag == BoundTag::Sam {
                    s * d.powf(a)
                } else {
                    s * self.omega_star(self.m, d)
                };
                (d, num, den)
            }
            BoundTag::UH | BoundTag::OLu | BoundTag::Omu => {
                let d = spectral_norm(&(&x[0] - &x[1]));
                let num = spectral_norm(&(func_of_unitary(&x[0], f)? - func_of_unitary(&x[1], f)?));
                let den = match self.tag {
                    BoundTag::UH => s * d.powf(a),
                    BoundTag::OLu => s * (2.0 + (1.0 / d).log2()) * d,
                    _ => s * self.omega_star(1, d),
                };
                (d, if d > 0.0 { num } else { 0.0 }, if d > 0.0 { den } else { 0.0 })
            }
            BoundTag::Hou => {
                let d = spectral_norm(&x[1]);
                let mut sum = CMat::zeros(x[0].nrows(), x[0].ncols());
                for k in 0..=self.m {
                    let w = random::unitary_exp(&x[1].scale(k as f64)) * &x[0];
                    sum += func_of_unitary(&w, f)?.scale(signed(k) * binomial(self.m as u64, k as u64) as f64);
                }
                (d, spectral_norm(&sum), s * d.powf(a))
            }
            BoundTag::CH | BoundTag::OLc | BoundTag::Omc => {
                let d = spectral_norm(&(&x[0] - &x[1]));
                let num = spectral_norm(&(self.contraction_fn(&x[0])? - self.contraction_fn(&x[1])?));
                let den = match self.tag {
                    BoundTag::CH => s * d.powf(a),
                    BoundTag::OLc if d > 0.0 => s * (2.0 + (1.0 / d).log2()) * d,
                    BoundTag::OLc => 0.0,
                    _ => s * self.omega_star(1, d),
                };
                (d, num, den)
            }
            BoundTag::Conh => {
                let d = spectral_norm(&(&x[0] - &x[1]));
                let diff = &x[1] - &x[0];
                let mut sum = CMat::zeros(x[0].nrows(), x[0].ncols());
                for k in 0..=self.m {
                    let p = &x[0] + diff.scale(k as f64 / self.m as f64);
                    sum += self
                        .contraction_fn(&unit_ball(p))?
                        .scale(signed(k) * binomial(self.m as u64, k as u64) as f64);
                }
                (d, spectral_norm(&sum), s * d.powf(a))
            }
            BoundTag::Fcc | BoundTag::Oqc => {
                let (aa, bb, r) = (&x[0], &x[1], &x[2]);
                let d = spectral_norm(&(aa * r - r * bb));
                let num = spectral_norm(&(func_of(aa, f)? * r - r * func_of(bb, f)?));
                let nr = spectral_norm(r);
                let den = if self.tag == BoundTag::Fcc {
                    s * d.powf(a) * nr.powf(1.0 - a)
                } else if nr > 0.0 {
                    s * nr * self.omega_star(1, d / nr)
                } else {
                    0.0
                };
                (d, num, den)
            }
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    Hermitian,
    Unitary,
    Contraction,
    General,
}

fn classes(tag: BoundTag) -> &'static [Class] {
    match tag {
        BoundTag::SaH | BoundTag::Omsa | BoundTag::Lip | BoundTag::Sam | BoundTag::Oon => {
            &[Class::Hermitian, Class::Hermitian]
        }
        BoundTag::UH | BoundTag::OLu | BoundTag::Omu => &[Class::Unitary, Class::Unitary],
        BoundTag::Hou => &[Class::Unitary, Class::Hermitian],
        BoundTag::CH | BoundTag::OLc | BoundTag::Omc | BoundTag::Conh => &[Class::Contraction, Class::Contraction],
        BoundTag::Fcc | BoundTag::Oqc => &[Class::Hermitian, Class::Hermitian, Class::General],
    }
}

/// Second input is a small increment rather than a nearby operator.
fn increment_tag(tag: BoundTag) -> bool {
    matches!(tag, BoundTag::Sam | BoundTag::Oon | BoundTag::Hou)
}

fn sample_inputs(tag: BoundTag, s: &OperatorSampler, rng: &mut ChaCha8Rng) -> Vec<CMat> {
    let n = s.dim(rng);
    let d = s.delta(rng);
    match tag {
        BoundTag::SaH | BoundTag::Omsa | BoundTag::Lip => {
            let a = s.hermitian(rng, n);
            let b = &a + s.direction(rng, n, d);
            vec![a, b]
        }
        BoundTag::Sam | BoundTag::Oon => {
            let a = s.hermitian(rng, n);
            let k = s.direction(rng, n, d);
            vec![a, k]
        }
        BoundTag::UH | BoundTag::OLu | BoundTag::Omu => {
            let u = s.unitary(rng, n);
            let v = s.unitary_near(rng, &u, d);
            vec![u, v]
        }
        BoundTag::Hou => {
            let u = s.unitary(rng, n);
            let a = s.direction(rng, n, d);
            vec![u, a]
        }
        BoundTag::CH | BoundTag::OLc | BoundTag::Omc | BoundTag::Conh => {
            let t = s.contraction(rng, n);
            let r = s.contraction_near(rng, &t, d);
            vec![t, r]
        }
        BoundTag::Fcc | BoundTag::Oqc => {
            let a = s.hermitian(rng, n);
            let b = &a + s.direction(rng, n, d);
            let r = if rng.random_bool(0.5) {
                // Nearly a function of A, so that ‖AR − RB‖ is small.
                let e = eig_hermitian(&a).expect("Hermitian by construction");
                let diag: Vec<C64> = (0..n)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let base = &e.vectors * crate::linalg::from_diag(&diag) * e.vectors.adjoint();
                let size = d * rng.random_range(0.0..1.0);
                base + random::contraction(rng, n, size)
            } else {
                let norm = (rng.random_range(-1.0f64..1.0) * 10f64.ln()).exp();
                random::contraction(rng, n, norm)
            };
            vec![a, b, r]
        }
    }
}

fn project(tag: BoundTag, x: &mut [CMat]) {
    for (m, c) in x.iter_mut().zip(classes(tag)) {
        *m = match c {
            Class::Hermitian => hermitian_part(m),
            Class::Unitary => polar_unitary(m),
            Class::Contraction => unit_ball(m.clone()),
            Class::General => m.clone(),
        };
    }
}

fn noise(rng: &mut ChaCha8Rng, c: Class, m: &CMat, size: f64) -> CMat {
    let n = m.nrows();
    match c {
        Class::Hermitian => m + random::hermitian_direction(rng, n, size),
        Class::Unitary => random::unitary_exp(&random::hermitian_direction(rng, n, size)) * m,
        Class::Contraction | Class::General => m + random::contraction(rng, n, size),
    }
}

fn perturb(tag: BoundTag, rng: &mut ChaCha8Rng, x: &[CMat], scale: f64) -> Vec<CMat> {
    let cls = classes(tag);
    let gap = if increment_tag(tag) {
        spectral_norm(&x[1])
    } else {
        spectral_norm(&(&x[0] - &x[1]))
    }
    .max(1e-10);
    let mut out = Vec::with_capacity(x.len());
    for (i, (m, &c)) in x.iter().zip(cls).enumerate() {
        let size = match i {
            0 => scale * gap.max(0.05 * scale),
            1 => scale * gap,
            _ => scale * 0.1 * spectral_norm(m).max(1e-10),
        };
        out.push(noise(rng, c, m, size));
    }
    if increment_tag(tag) && rng.random_bool(0.25) {
        // Let the increment change size as well as direction.
        let f = (rng.random_range(-1.0f64..1.0) * scale).exp();
        out[1] = out[1].scale(f);
    }
    project(tag, &mut out);
    out
}

/// Stream `stream` of the ChaCha8 generator seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const ASCENT_STREAM: u64 = 1 << 40;

fn tag_seminorm(tag: BoundTag, f: &dyn FunctionModel, p: &RatioParams, grid: &Grid) -> Result<f64> {
    let omega = || {
        p.omega
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("tag {tag} needs a modulus ω")))
    };
    Ok(match tag {
        BoundTag::OLu | BoundTag::OLc => holder_seminorm(f, 1.0, grid)?.value,
        BoundTag::Omsa | BoundTag::Omu | BoundTag::Omc | BoundTag::Oqc => lambda_omega_norm(f, omega()?, 1, grid)?.value,
        BoundTag::Oon => lambda_omega_norm(f, omega()?, p.m, grid)?.value,
        BoundTag::Lip => lambda_omega_norm(f, &ModulusOfContinuity::linear(), 1, grid)?.value,
        // First differences for α ≤ 1, so that α = 1 is the Lipschitz constant.
        _ if p.alpha <= 1.0 => lambda_omega_norm(f, &ModulusOfContinuity::power(p.alpha), 1, grid)?.value,
        _ => holder_seminorm(f, p.alpha, grid)?.value,
    })
}

/// Runs `trials` random trials and `params.ascent_runs` hill-climbing runs on
/// the ratio of the two sides of the tagged inequality, without its constant.
pub fn ratio_experiment(
    tag: BoundTag,
    f: &dyn FunctionModel,
    params: &RatioParams,
    sampler: &OperatorSampler,
    trials: usize,
    seed: u64,
) -> Result<ExperimentRecord> {
    if f.domain() != tag.domain() {
        return Err(Error::InvalidArgument(format!(
            "tag {tag} needs a function on the {:?} domain, {} is on {:?}",
            tag.domain(),
            f.name(),
            f.domain()
        )));
    }
    let poly = f.as_polynomial();
    if tag.is_contraction() && poly.is_none() {
        return Err(Error::InvalidArgument(format!("tag {tag} needs an analytic polynomial")));
    }
    if tag.needs_omega() && params.omega.is_none() {
        return Err(Error::InvalidArgument(format!("tag {tag} needs a modulus ω")));
    }
    if tag.uses_m() && params.m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    if tag.is_unitary() && sampler.delta_range[1] > 2.0 {
        return Err(Error::InvalidArgument("unitary δ cannot exceed 2".into()));
    }
    let grid = params.grid.clone().unwrap_or_else(|| match tag.domain() {
        Domain::Line => Grid::default_line(),
        Domain::Circle => Grid::default_circle(),
    });
    let seminorm = tag_seminorm(tag, f, params, &grid)?;
    let ctx = Ctx {
        tag,
        f,
        poly,
        alpha: params.alpha,
        m: params.m,
        omega: params.omega.as_ref(),
        seminorm,
    };
    let label = tag.label();
    let row = |trial: usize, kind: &str, x: &[CMat], (d, num, den): (f64, f64, f64)| -> Result<TrialRow> {
        Ok(TrialRow {
            tag: label.into(),
            trial,
            kind: kind.into(),
            dim: x[0].nrows(),
            seed,
            delta: d,
            numerator: num,
            denominator: den,
            ratio: ratio(num, den, trial)?,
            inputs_hash: inputs_hash(x),
        })
    };

    let mut rows: Vec<TrialRow> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let x = sample_inputs(tag, sampler, &mut rng);
            let v = ctx.evaluate(&x)?;
            row(t, "random", &x, v)
        })
        .collect::<Result<_>>()?;

    let ascents: Vec<TrialRow> = (0..params.ascent_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = trial_rng(seed, ASCENT_STREAM + run as u64);
            let mut x = sample_inputs(tag, sampler, &mut rng);
            let mut v = ctx.evaluate(&x)?;
            let mut best = ratio(v.1, v.2, run)?;
            let mut scale = 0.5;
            for _ in 0..params.ascent_iters {
                let y = perturb(tag, &mut rng, &x, scale);
                let accepted = match ctx.evaluate(&y) {
                    Ok(w) => match ratio(w.1, w.2, run) {
                        Ok(r) if r.is_finite() && r > best => {
                            best = r;
                            x = y;
                            v = w;
                            true
                        }
                        _ => false,
                    },
                    Err(_) => false,
                };
                scale = if accepted { (scale * 1.25f64).min(1.0) } else { (scale * 0.7f64).max(1e-3) };
            }
            row(run, "ascent", &x, v)
        })
        .collect::<Result<_>>()?;
    rows.extend(ascents);

    let config = ExperimentConfig {
        function: f.name(),
        alpha: params.alpha,
        m: params.m,
        omega: params.omega.as_ref().map(|w| w.label.clone()),
        dims: sampler.dims,
        cap: sampler.cap,
        delta_range: sampler.delta_range,
        trials,
        ascent_runs: params.ascent_runs,
        ascent_iters: params.ascent_iters,
    };
    Ok(ExperimentRecord::new(label, config, seed, Some(grid.spec), Some(seminorm), rows))
}

/// ‖A^α − B^α‖ and ‖A − B‖^α.
pub fn bks_ratio(a: &CMat, b: &CMat, alpha: f64) -> Result<(f64, f64)> {
    let f = PowerAbs::new(alpha);
    let num = spectral_norm(&(func_of(a, &f)? - func_of(b, &f)?));
    Ok((num, spectral_norm(&(a - b)).powf(alpha)))
}

pub const BKS_TOL: f64 = 1e-10;

/// Random positive semidefinite pairs: half independent, half nearby. Every
/// ratio must stay at most 1 + 1e−10; a violation is an error carrying the pair.
pub fn bks_check(sampler: &OperatorSampler, alpha: f64, trials: usize, seed: u64) -> Result<ExperimentRecord> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
    }
    let rows: Vec<TrialRow> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let n = sampler.dim(&mut rng);
            let a = sampler.psd(&mut rng, n, sampler.cap);
            let b = if rng.random_bool(0.5) {
                sampler.psd(&mut rng, n, sampler.cap)
            } else {
                let d = sampler.delta(&mut rng);
                psd_part(&(&a + sampler.direction(&mut rng, n, d)))?
            };
            let (num, den) = bks_ratio(&a, &b, alpha)?;
            let r = ratio(num, den, t)?;
            if r > 1.0 + BKS_TOL {
                let dump = serde_json::json!({
                    "trial": t,
                    "alpha": alpha,
                    "ratio": r,
                    "a": MatrixJson::from_matrix(&a),
                    "b": MatrixJson::from_matrix(&b),
                });
                return Err(Error::Invariant(format!("power inequality violated: {dump}")));
            }
            Ok(TrialRow {
                tag: "bks".into(),
                trial: t,
                kind: "random".into(),
                dim: n,
                seed,
                delta: spectral_norm(&(&a - &b)),
                numerator: num,
                denominator: den,
                ratio: r,
                inputs_hash: inputs_hash(&[a, b]),
            })
        })
        .collect::<Result<_>>()?;
    let config = ExperimentConfig {
        function: format!("power_{alpha}"),
        alpha,
        m: 1,
        omega: None,
        dims: sampler.dims,
        cap: sampler.cap,
        delta_range: sampler.delta_range,
        trials,
        ascent_runs: 0,
        ascent_iters: 0,
    };
    Ok(ExperimentRecord::new("bks", config, seed, None, None, rows))
}

/// Weighted m-th difference atom λ·Δ^m_h δ_a = λ ∑_k (−1)^{m−k} C(m,k) δ_{a−kh}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureAtom {
    pub weight: f64,
    pub step: f64,
    pub shift: f64,
}

/// ∫ f(A − tK) dν(t) for ν a finite combination of difference atoms of order m.
pub fn measure_average(f: &dyn FunctionModel, a: &CMat, k: &CMat, atoms: &[MeasureAtom], m: u32) -> Result<CMat> {
    if a.shape() != k.shape() {
        return Err(Error::DimensionMismatch("A and K differ in shape".into()));
    }
    let mut out = CMat::zeros(a.nrows(), a.ncols());
    for atom in atoms {
        for j in 0..=m {
            let t = atom.shift - j as f64 * atom.step;
            let c = atom.weight * signed(m - j) * binomial(m as u64, j as u64) as f64;
            out += func_of(&(a - k.scale(t)), f)?.scale(c);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub const MIN_SWEEP_POINTS: usize = 6;

/// Least-squares line through (log δ, log y).
pub fn exponent_fit(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < MIN_SWEEP_POINTS {
        return Err(Error::DegenerateSweep(format!(
            "{} points, need at least {MIN_SWEEP_POINTS}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::DegenerateSweep("nonpositive or nonfinite point".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSweep("all δ equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// (δ, ‖f(A + δK₀) − f(A)‖) over the grid.
pub fn scaled_sweep(f: &dyn FunctionModel, a: &CMat, k0: &CMat, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let fa = func_of(a, f)?;
    deltas
        .iter()
        .map(|&d| Ok((d, spectral_norm(&(func_of(&(a + k0.scale(d)), f)? - &fa)))))
        .collect()
}

/// Sweep instance: A in the unit ball with an exact zero eigenvalue whose
/// other eigenvalues satisfy |λ| ≥ 1/2, and a unit Hermitian direction K₀
/// proportional to v₀v₀* + G with v₀ the null vector and ‖G‖ = 1/2.
pub fn sweep_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (CMat, CMat) {
    let v = random::haar_unitary(rng, n);
    let ev: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let m: f64 = rng.random_range(0.5..=1.0);
                if rng.random_bool(0.5) { m } else { -m }
            }
        })
        .collect();
    let a = hermitian_part(&(&v * from_real_diag(&ev) * v.adjoint()));
    let v0 = v.column(0);
    let k = v0 * v0.adjoint() + random::hermitian_direction(rng, n, 0.5);
    let nk = spectral_norm(&k);
    (a, hermitian_part(&k.unscale(nk)))
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Scaled-direction sweep on a [`sweep_instance`], as sweep rows.
pub fn holder_sweep(f: &dyn FunctionModel, dim: usize, deltas: &[f64], seed: u64) -> Result<ExperimentRecord> {
    let mut rng = trial_rng(seed, 0);
    let (a, k0) = sweep_instance(&mut rng, dim);
    let hash = inputs_hash(&[a.clone(), k0.clone()]);
    let pts = scaled_sweep(f, &a, &k0, deltas)?;
    let rows = pts
        .iter()
        .enumerate()
        .map(|(i, &(d, v))| TrialRow {
            tag: "sweep".into(),
            trial: i,
            kind: "sweep".into(),
            dim,
            seed,
            delta: d,
            numerator: v,
            denominator: d,
            ratio: v / d,
            inputs_hash: hash.clone(),
        })
        .collect();
    let config = ExperimentConfig {
        function: f.name(),
        alpha: f64::NAN,
        m: 1,
        omega: None,
        dims: [dim, dim],
        cap: 1.0,
        delta_range: [
            deltas.iter().cloned().fold(f64::INFINITY, f64::min),
            deltas.iter().cloned().fold(0.0, f64::max),
        ],
        trials: deltas.len(),
        ascent_runs: 0,
        ascent_iters: 0,
    };
    Ok(ExperimentRecord::new("sweep", config, seed, None, None, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockIdentityReport {
    /// (identity, relative residual).
    pub checks: Vec<(String, f64)>,
}

impl BlockIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

fn rel(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

fn off_diag(r: &CMat) -> CMat {
    let n = r.nrows();
    let mut out = CMat::zeros(2 * n, 2 * n);
    out.view_mut((0, n), (n, n)).copy_from(r);
    out.view_mut((n, 0), (n, n)).copy_from(&r.adjoint());
    out
}

/// Norm identities of the 2×2 block doubling arguments for self-adjoint A, B
/// and arbitrary R, optionally with f applied to the diagonal blocks.
pub fn block_identity_checks(a: &CMat, b: &CMat, r: &CMat, f: Option<&dyn FunctionModel>) -> Result<BlockIdentityReport> {
    if a.shape() != b.shape() || a.shape() != r.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch("A, B and R must be square of one size".into()));
    }
    let rs = r.adjoint();
    let nrm = spectral_norm;
    let mut checks = Vec::new();

    let big_a = block_diag(a, a);
    let big_r = off_diag(r);
    let c1 = nrm(&(a * r - r * a));
    let c1s = nrm(&(a * &rs - &rs * a));
    checks.push(("commutator block norm".into(), rel(nrm(&(&big_a * &big_r - &big_r * &big_a)), c1.max(c1s))));
    checks.push(("adjoint commutator norm".into(), rel(c1.max(c1s), c1)));

    let a2 = block_diag(a, b);
    let b2 = block_diag(b, a);
    let r2 = block_diag(r, &rs);
    let q = nrm(&(a * r - r * b));
    let qs = nrm(&(b * &rs - &rs * a));
    checks.push(("quasicommutator block norm".into(), rel(nrm(&(&a2 * &r2 - &r2 * &b2)), q.max(qs))));
    checks.push(("adjoint quasicommutator norm".into(), rel(q.max(qs), q)));

    if let Some(f) = f {
        let (fa, fb) = (func_of(a, f)?, func_of(b, f)?);
        let fbig = func_of(&big_a, f)?;
        let lhs = nrm(&(&fbig * &big_r - &big_r * &fbig));
        let rhs = nrm(&(&fa * r - r * &fa)).max(nrm(&(&fa * &rs - &rs * &fa)));
        checks.push(("function commutator block norm".into(), rel(lhs, rhs)));
        let (fa2, fb2) = (func_of(&a2, f)?, func_of(&b2, f)?);
        let lhs = nrm(&(&fa2 * &r2 - &r2 * &fb2));
        let rhs = nrm(&(&fa * r - r * &fb)).max(nrm(&(&fb * &rs - &rs * &fa)));
        checks.push(("function quasicommutator block norm".into(), rel(lhs, rhs)));
    }
    Ok(BlockIdentityReport { checks })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MccCommutatorCheck {
    /// ‖𝒜𝒰 − 𝒰𝒜‖ with 𝒜 = A ⊕ A.
    pub lhs: f64,
    /// bound_factor · ‖AR − RA‖.
    pub bound: f64,
    pub unitarity_defect: f64,
}

pub fn mcc_commutator_check(a: &CMat, r: &CMat, tau: f64) -> Result<MccCommutatorCheck> {
    let block = mcc_construction(r, tau)?;
    let big_a = block_diag(a, a);
    let u = &block.unitary;
    Ok(MccCommutatorCheck {
        lhs: spectral_norm(&(&big_a * u - u * &big_a)),
        bound: block.bound_factor * spectral_norm(&(a * r - r * a)),
        unitarity_defect: block.unitarity_defect,
    })
}

#[derive(Clone, Debug)]
pub struct AbsExplorerReport {
    pub record: ExperimentRecord,
    /// Best ratio over all dimensions up to each listed one.
    pub envelope: Vec<(usize, f64)>,
    pub witnesses: Vec<(usize, CMat, CMat)>,
}

/// Searches for pairs with large ‖|A| − |B|‖/‖A − B‖: `budget` random nearby
/// pairs plus a restarted ascent per dimension.
pub fn abs_explorer(dims: &[usize], budget: usize, seed: u64) -> Result<AbsExplorerReport> {
    let g = PowerAbs::abs();
    let sampler = OperatorSampler::new([1, 1], 1.0, [1e-3, 1.0])?;
    let mut rows = Vec::new();
    let mut envelope = Vec::new();
    let mut witnesses = Vec::new();
    let mut running = 0.0f64;
    for (i, &n) in dims.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let random_best = (0..budget)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64, f64, CMat, CMat)> {
                let mut rng = trial_rng(seed, ((n as u64) << 32) + t as u64);
                let a = sampler.hermitian(&mut rng, n);
                let d = sampler.delta(&mut rng);
                let b = &a + sampler.direction(&mut rng, n, d);
                let num = spectral_norm(&(func_of(&a, &g)? - func_of(&b, &g)?));
                let den = spectral_norm(&(&a - &b));
                Ok((ratio(num, den, t)?, num, den, a, b))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(None::<(f64, f64, f64, CMat, CMat)>, |acc, x| match acc {
                Some(best) if best.0 >= x.0 => Some(best),
                _ => Some(x),
            });
        let params = SearchParams {
            dim: n,
            restarts: (budget / 25).clamp(4, 32),
            iters: 200,
            cap: 4.0,
            seed: seed.wrapping_add(n as u64),
        };
        let est = omega_search(&g, 1.0, OmegaTag::Omega, &params)?;
        let asc = (ratio(est.lower_bound, est.constraint, i)?, est.lower_bound, est.constraint);
        let mut best_here = (0.0, None);
        if let Some((r, num, den, a, b)) = random_best {
            rows.push(TrialRow {
                tag: "abs".into(),
                trial: i,
                kind: "random".into(),
                dim: n,
                seed,
                delta: den,
                numerator: num,
                denominator: den,
                ratio: r,
                inputs_hash: inputs_hash(&[a.clone(), b.clone()]),
            });
            best_here = (r, Some((a, b)));
        }
        rows.push(TrialRow {
            tag: "abs".into(),
            trial: i,
            kind: "ascent".into(),
            dim: n,
            seed,
            delta: asc.2,
            numerator: asc.1,
            denominator: asc.2,
            ratio: asc.0,
            inputs_hash: inputs_hash(&[est.witness.a.clone(), est.witness.b.clone()]),
        });
        if asc.0 > best_here.0 {
            best_here = (asc.0, Some((est.witness.a.clone(), est.witness.b.clone())));
        }
        running = running.max(best_here.0);
        envelope.push((n, running));
        if let Some((a, b)) = best_here.1 {
            witnesses.push((n, a, b));
        }
    }
    let config = ExperimentConfig {
        function: g.name(),
        alpha: 1.0,
        m: 1,
        omega: None,
        dims: [
            dims.iter().copied().min().unwrap_or(0),
            dims.iter().copied().max().unwrap_or(0),
        ],
        cap: 4.0,
        delta_range: sampler.delta_range,
        trials: budget,
        ascent_runs: dims.len(),
        ascent_iters: 200,
    };
    Ok(AbsExplorerReport {
        record: ExperimentRecord::new("abs", config, seed, None, None, rows),
        envelope,
        witnesses,
    })
}
