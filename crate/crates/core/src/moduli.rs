//! Hölder–Zygmund and Λ_ω seminorms on grids, moduli of continuity and the
//! ω_* / ω_{*,m} transforms.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::error::{Error, Result};
use crate::function::{Domain, FunctionModel};
use crate::function_analysis::{vp_smooth, PeriodicSignal};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulusKind {
    ClosedForm,
    Tabulated,
}

/// Nondecreasing gauge ω on (0, ∞) with doubling metadata.
#[derive(Clone)]
pub struct ModulusOfContinuity {
    pub label: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub kind: ModulusKind,
    /// Doubling order m in ω(2x) ≤ 2^m ω(x).
    pub order: u32,
    pub subadditive: bool,
    pub doubling_constant: Option<f64>,
}

impl std::fmt::Debug for ModulusOfContinuity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModulusOfContinuity")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("order", &self.order)
            .finish()
    }
}

impl ModulusOfContinuity {
    pub fn closed_form(label: &str, order: u32, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ModulusOfContinuity {
            label: label.into(),
            eval: Arc::new(eval),
            kind: ModulusKind::ClosedForm,
            order,
            subadditive: false,
            doubling_constant: None,
        }
    }

    /// ω(t) = t^α, doubling order ⌈α⌉ (at least 1).
    pub fn power(alpha: f64) -> Self {
        let mut w = ModulusOfContinuity::closed_form(&format!("t^{alpha}"), alpha.ceil().max(1.0) as u32, move |t| {
            t.powf(alpha)
        });
        w.subadditive = alpha <= 1.0;
        w.doubling_constant = Some(2f64.powf(alpha));
        w
    }

    pub fn linear() -> Self {
        ModulusOfContinuity::power(1.0)
    }

    pub fn constant(c: f64) -> Self {
        let mut w = ModulusOfContinuity::closed_form(&format!("const{c}"), 1, move |_| c);
        w.subadditive = true;
        w.doubling_constant = Some(1.0);
        w
    }

    pub fn with_order(mut self, m: u32) -> Self {
        self.order = m;
        self
    }

    /// Piecewise-linear interpolation through (t_i, ω_i), linear to 0 at 0 and
    /// constant past the last node.
    pub fn tabulated(label: &str, order: u32, mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.is_empty() || points[0].0 <= 0.0 {
            return Err(Error::InvalidArgument("tabulated modulus needs positive abscissae".into()));
        }
        let pts = points.clone();
        let eval = move |t: f64| {
            if t <= pts[0].0 {
                return pts[0].1 * t / pts[0].0;
            }
            match pts.iter().position(|p| p.0 >= t) {
                None => pts[pts.len() - 1].1,
                Some(i) => {
                    let (a, b) = (pts[i - 1], pts[i]);
                    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
                }
            }
        };
        let mut w = ModulusOfContinuity::closed_form(label, order, eval);
        w.kind = ModulusKind::Tabulated;
        Ok(w)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// Checks positivity, monotonicity, vanishing at 0 and order-m doubling on a grid.
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        let mut g = grid.to_vec();
        g.sort_by(f64::total_cmp);
        let vals: Vec<f64> = g.iter().map(|&t| self.eval(t)).collect();
        for (i, (&t, &v)) in g.iter().zip(&vals).enumerate() {
            if !(v > 0.0) {
                return Err(Error::DegenerateModulus(t));
            }
            if i > 0 && v < vals[i - 1] * (1.0 - 1e-12) {
                return Err(Error::Invariant(format!("{} decreases at {t}", self.label)));
            }
            let lim = 2f64.powi(self.order as i32) * v + 1e-12;
            if self.eval(2.0 * t) > lim {
                return Err(Error::Invariant(format!("{} fails order-{} doubling at {t}", self.label, self.order)));
            }
        }
        Ok(())
    }
}

/// Serializable description of a sampling grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: Domain,
    pub base_points: usize,
    pub steps: usize,
    /// Base point range (radians on the circle).
    pub range: [f64; 2],
    /// Step range (angles on the circle).
    pub step_range: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub base: Vec<f64>,
    pub steps: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = linspace(a, b, n).into_iter().map(f64::exp).collect();
    if let Some(last) = v.last_mut() {
        *last = hi;
    }
    if let Some(first) = v.first_mut() {
        *first = lo;
    }
    v
}

impl Grid {
    /// Base points: `base_points` equally spaced on [lo, hi] (endpoints included);
    /// steps: `steps` log-spaced on [t_lo, t_hi].
    pub fn line(range: [f64; 2], base_points: usize, step_range: [f64; 2], steps: usize) -> Self {
        Grid {
            spec: GridSpec {
                kind: Domain::Line,
                base_points,
                steps,
                range,
                step_range,
            },
            base: linspace(range[0], range[1], base_points),
            steps: logspace(step_range[0], step_range[1], steps),
        }
    }

    /// 2049 base points on [−1, 1] (so 0 is a node), 512 steps in [1e−6, 10].
    pub fn default_line() -> Self {
        Grid::line([-1.0, 1.0], 2049, [1e-6, 10.0], 512)
    }

    /// Base angles on [0, 2π), step angles log-spaced in [θ_lo, π] ending exactly at π.
    pub fn circle(base_points: usize, steps: usize) -> Self {
        let base = (0..base_points)
            .map(|j| std::f64::consts::TAU * j as f64 / base_points as f64)
            .collect();
        Grid {
            spec: GridSpec {
                kind: Domain::Circle,
                base_points,
                steps,
                range: [0.0, std::f64::consts::TAU],
                step_range: [1e-6, std::f64::consts::PI],
            },
            base,
            steps: logspace(1e-6, std::f64::consts::PI, steps),
        }
    }

    pub fn default_circle() -> Self {
        Grid::circle(2048, 512)
    }

    /// Both point counts doubled.
    pub fn refined(&self) -> Self {
        match self.spec.kind {
            Domain::Line => Grid::line(
                self.spec.range,
                2 * self.spec.base_points - 1,
                self.spec.step_range,
                2 * self.spec.steps,
            ),
            Domain::Circle => Grid::circle(2 * self.spec.base_points, 2 * self.spec.steps),
        }
    }

    fn check(&self) -> Result<()> {
        if self.base.is_empty() || self.steps.is_empty() {
            Err(Error::EmptyGrid)
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub value: f64,
    pub t_star: f64,
    pub x_star: f64,
    pub grid: GridSpec,
    pub order: u32,
}

fn signed_binomial(m: u32, k: u32) -> f64 {
    binomial(m as u64, k as u64) as f64 * if (m - k).is_multiple_of(2) { 1.0 } else { -1.0 }
}

/// (Δ_t^m f)(x) = ∑_{k=0}^m (−1)^{m−k} C(m,k) f(x + kt).
pub fn finite_diff(f: &dyn FunctionModel, t: f64, m: u32, x: f64) -> Result<C64> {
    let mut s = C64::new(0.0, 0.0);
    for k in 0..=m {
        s += f.value(C64::new(x + k as f64 * t, 0.0))? * signed_binomial(m, k);
    }
    Ok(s)
}

/// (Δ_τ^m f)(ζ) = ∑_{k=0}^m (−1)^{m−k} C(m,k) f(τ^k ζ) on the circle.
pub fn finite_diff_circle(f: &dyn FunctionModel, tau: C64, m: u32, zeta: C64) -> Result<C64> {
    let mut s = C64::new(0.0, 0.0);
    let mut p = zeta;
    for k in 0..=m {
        s += f.value(p)? * signed_binomial(m, k);
        p *= tau;
    }
    Ok(s)
}

/// For each step, sup over base points of |Δ^m f|; returns (value, argmax base) per step.
fn step_sups(f: &dyn FunctionModel, m: u32, grid: &Grid) -> Result<Vec<(f64, f64)>> {
    grid.check()?;
    grid.steps
        .par_iter()
        .map(|&t| {
            let mut best = (-1.0, grid.base[0]);
            for &x in &grid.base {
                let v = match grid.spec.kind {
                    Domain::Line => finite_diff(f, t, m, x)?.norm(),
                    Domain::Circle => {
                        let z = C64::from_polar(1.0, x);
                        let a = finite_diff_circle(f, C64::from_polar(1.0, t), m, z)?.norm();
                        let b = finite_diff_circle(f, C64::from_polar(1.0, -t), m, z)?.norm();
                        a.max(b)
                    }
                };
                if v > best.0 {
                    best = (v, x);
                }
            }
            Ok(best)
        })
        .collect()
}

fn step_length(kind: Domain, t: f64) -> f64 {
    match kind {
        Domain::Line => t,
        Domain::Circle => (C64::new(1.0, 0.0) - C64::from_polar(1.0, t)).norm(),
    }
}

fn sup_weighted(
    f: &dyn FunctionModel,
    m: u32,
    grid: &Grid,
    weight: impl Fn(f64) -> Result<f64>,
) -> Result<SeminormReport> {
    let sups = step_sups(f, m, grid)?;
    let mut best = SeminormReport {
        value: 0.0,
        t_star: grid.steps[0],
        x_star: grid.base[0],
        grid: grid.spec.clone(),
        order: m,
    };
    for (&t, &(v, x)) in grid.steps.iter().zip(&sups) {
        let r = v / weight(step_length(grid.spec.kind, t))?;
        if r > best.value {
            best.value = r;
            best.t_star = t;
            best.x_star = x;
        }
    }
    Ok(best)
}

/// Grid supremum of |t|^{−α} |Δ^n_t f(x)| with n = ⌊α⌋ + 1.
pub fn holder_seminorm(f: &dyn FunctionModel, alpha: f64, grid: &Grid) -> Result<SeminormReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("α must be positive".into()));
    }
    let n = alpha.floor() as u32 + 1;
    sup_weighted(f, n, grid, |t| Ok(t.powf(alpha)))
}

/// Refines the grid until the value changes by less than 1e−3 relatively.
pub fn holder_seminorm_refined(
    f: &dyn FunctionModel,
    alpha: f64,
    grid: &Grid,
    max_rounds: usize,
) -> Result<(SeminormReport, bool)> {
    let mut g = grid.clone();
    let mut rep = holder_seminorm(f, alpha, &g)?;
    for _ in 0..max_rounds {
        g = g.refined();
        let next = holder_seminorm(f, alpha, &g)?;
        let change = (next.value - rep.value).abs() / next.value.max(1e-300);
        rep = next;
        if change < 1e-3 {
            return Ok((rep, true));
        }
    }
    Ok((rep, false))
}

/// Grid supremum of ‖Δ^m_t f‖_∞ / ω(t).
pub fn lambda_omega_norm(
    f: &dyn FunctionModel,
    omega: &ModulusOfContinuity,
    m: u32,
    grid: &Grid,
) -> Result<SeminormReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    sup_weighted(f, m, grid, |t| {
        let w = omega.eval(t);
        if w > 0.0 {
            Ok(w)
        } else {
            Err(Error::DegenerateModulus(t))
        }
    })
}

/// sup_{0 < h ≤ x} ‖Δ_h^m f‖_∞ over the grid steps up to x and h = x itself.
pub fn modulus_of_function(f: &dyn FunctionModel, m: u32, x: f64, grid: &Grid) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument("x must be positive".into()));
    }
    let mut steps: Vec<f64> = grid.steps.iter().cloned().filter(|&h| h <= x).collect();
    steps.push(x);
    let g = Grid {
        spec: grid.spec.clone(),
        base: grid.base.clone(),
        steps,
    };
    Ok(step_sups(f, m, &g)?.iter().map(|p| p.0).fold(0.0, f64::max))
}

#[allow(clippy::too_many_arguments)]
fn simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    let (fa, fb, fm) = (g(a), g(b), g(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = (rel * whole.abs()).max(1e-300);
    simpson(g, a, b, fa, fm, fb, whole, tol, 40)
}

/// ω_{*,m}(x) = x^m ∫_x^∞ ω(t) t^{−m−1} dt, computed as ∫_1^∞ ω(sx) s^{−m−1} ds over
/// dyadic blocks. Returns +∞ when the blocks do not decay.
pub fn omega_star(omega: &ModulusOfContinuity, m: u32, x: f64) -> f64 {
    assert!(x > 0.0 && m >= 1, "omega_star needs x > 0 and m ≥ 1");
    let g = |s: f64| omega.eval(s * x) / s.powi(m as i32 + 1);
    let mut acc = 0.0;
    let mut prev_block: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut stalled = 0;
    for k in 0..1000 {
        let a = 2f64.powi(k);
        let block = adaptive_simpson(&g, a, 2.0 * a, 1e-12);
        if !block.is_finite() {
            return f64::INFINITY;
        }
        acc += block;
        if block <= 1e-10 * acc {
            return acc;
        }
        if let Some(p) = prev_block {
            let r = block / p;
            ratios.push(r);
            if r >= 1.0 - 1e-12 {
                stalled += 1;
                if stalled >= 60 {
                    return f64::INFINITY;
                }
            } else {
                stalled = 0;
            }
            let n = ratios.len();
            if n >= 4 && r < 1.0 - 1e-6 {
                let recent = &ratios[n - 4..];
                let spread = recent.iter().cloned().fold(0.0, f64::max) - recent.iter().cloned().fold(f64::MAX, f64::min);
                if spread <= 1e-10 * r {
                    return acc + block * r / (1.0 - r);
                }
            }
        }
        prev_block = Some(block);
    }
    f64::INFINITY
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport {
    pub kappa_hat: f64,
    pub pass: bool,
    /// κ/(1 − log₂ κ) when κ̂ < 2.
    pub ob_factor: Option<f64>,
    /// Whether ω_* ≤ ob_factor·ω held on the grid.
    pub ob_pass: Option<bool>,
}

/// κ̂ = sup ω(2x)/ω(x) on the grid, the order-m doubling verdict, and the
/// ω_* bound available when κ̂ < 2.
pub fn doubling_check(omega: &ModulusOfContinuity, m: u32, grid: &[f64]) -> DoublingReport {
    let kappa_hat = grid
        .iter()
        .map(|&x| omega.eval(2.0 * x) / omega.eval(x))
        .fold(0.0, f64::max);
    let pass = kappa_hat <= 2f64.powi(m as i32) + 1e-12;
    let (ob_factor, ob_pass) = if kappa_hat < 2.0 {
        let factor = kappa_hat / (1.0 - kappa_hat.log2());
        let ok = grid
            .iter()
            .all(|&x| omega_star(omega, 1, x) <= factor * omega.eval(x) * (1.0 + 1e-10));
        (Some(factor), Some(ok))
    } else {
        (None, None)
    };
    DoublingReport {
        kappa_hat,
        pass,
        ob_factor,
        ob_pass,
    }
}

/// ‖f − f*V_n‖_∞ / (ω(2^{−n}) ‖f‖_{Λ_{ω,m}}) for a trigonometric polynomial,
/// with the seminorm taken over x ↦ f(e^{ix}) on `grid`.
pub fn vp_error_ratio(
    f: &PeriodicSignal,
    omega: &ModulusOfContinuity,
    m: u32,
    n: i32,
    grid: &Grid,
) -> Result<f64> {
    let seminorm = lambda_omega_norm(&f.as_line(), omega, m, grid)?.value;
    if seminorm == 0.0 {
        return Ok(0.0);
    }
    let err = f.sub(&vp_smooth(f, n));
    let points = (8 * err.degree().max(64)).next_power_of_two();
    Ok(err.sup_on_grid(points) / (omega.eval(2f64.powi(-n)) * seminorm))
}
