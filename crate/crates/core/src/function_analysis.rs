//! Smooth dyadic cutoff, the kernels W_n, W_n♯, V_n, Q_n and Littlewood–Paley
//! analysis of trigonometric polynomials (exact) and sampled line signals (DFT).

use std::str::FromStr;

use rustfft::FftPlanner;

use crate::binomial;
use crate::error::{Error, Result};
use crate::function::{laurent_divided_difference, Domain, ExponentialSum, FunctionModel};
use crate::linalg::C64;

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step on [0, 1]: 0 at 0, 1 at 1, flat at both ends.
pub fn cutoff_h(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = psi(t);
    a / (a + psi(1.0 - t))
}

/// w(x) = h(2x−1) on [1/2, 1], 1 − h(x−1) on [1, 2], zero elsewhere.
pub fn cutoff_w(x: f64) -> f64 {
    if (0.5..=1.0).contains(&x) {
        cutoff_h(2.0 * x - 1.0)
    } else if x > 1.0 && x < 2.0 {
        1.0 - cutoff_h(x - 1.0)
    } else {
        0.0
    }
}

/// v(x) = 1 on [−1, 1], w(|x|) outside.
pub fn cutoff_v(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else {
        cutoff_w(a)
    }
}

/// |∑_n w(x/2^n) − 1| over all scales |n| ≤ 64.
pub fn partition_defect(x: f64) -> f64 {
    let s: f64 = (-64..=64).map(|n| cutoff_w(x / 2f64.powi(n))).sum();
    (s - 1.0).abs()
}

#[derive(Clone, Debug)]
pub struct SmoothCutoff {
    /// (x, w(x)) on a logarithmic grid over [1/4, 4].
    pub samples: Vec<(f64, f64)>,
}

impl SmoothCutoff {
    pub fn w(&self, x: f64) -> f64 {
        cutoff_w(x)
    }

    pub fn h(&self, t: f64) -> f64 {
        cutoff_h(t)
    }

    pub fn v(&self, x: f64) -> f64 {
        cutoff_v(x)
    }
}

pub fn build_cutoff() -> SmoothCutoff {
    let n = 257;
    let samples = (0..n)
        .map(|i| {
            let x = 2f64.powf(-2.0 + 4.0 * i as f64 / (n - 1) as f64);
            (x, cutoff_w(x))
        })
        .collect();
    SmoothCutoff { samples }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    W,
    WSharp,
    V,
    Q(u32),
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" => Ok(KernelKind::W),
            "Wsharp" | "W#" | "wsharp" => Ok(KernelKind::WSharp),
            "V" | "v" => Ok(KernelKind::V),
            _ => {
                let m = s
                    .strip_prefix('Q')
                    .or_else(|| s.strip_prefix('q'))
                    .and_then(|r| r.parse::<u32>().ok())
                    .filter(|&m| m >= 1);
                m.map(KernelKind::Q).ok_or_else(|| Error::UnknownKind(s.into()))
            }
        }
    }
}

pub const MAX_SCALE: i32 = 64;

fn q_symbol(m: u32, x: f64) -> f64 {
    (1..=m)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * binomial(m as u64, k as u64) as f64 * cutoff_v(k as f64 * x)
        })
        .sum()
}

/// Fourier symbol of the kernel of the given kind at scale 2^n.
pub fn kernel_symbol(kind: KernelKind, n: i32, xi: f64) -> Result<C64> {
    if n.abs() > MAX_SCALE {
        return Err(Error::KernelIndex(n));
    }
    let x = xi / 2f64.powi(n);
    let v = match kind {
        KernelKind::W => cutoff_w(x),
        KernelKind::WSharp => cutoff_w(-x),
        KernelKind::V => cutoff_v(x),
        KernelKind::Q(m) => q_symbol(m, x),
    };
    Ok(C64::new(v, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyKernel {
    pub n: i32,
    pub kind: KernelKind,
}

impl FrequencyKernel {
    pub fn new(kind: KernelKind, n: i32) -> Result<Self> {
        if n.abs() > MAX_SCALE {
            return Err(Error::KernelIndex(n));
        }
        Ok(FrequencyKernel { n, kind })
    }

    pub fn symbol(&self, xi: f64) -> C64 {
        kernel_symbol(self.kind, self.n, xi).expect("scale validated at construction")
    }

    /// Fourier coefficients at k = −d..=d of the periodic version.
    pub fn circle_coefficients(&self, d: usize) -> PeriodicSignal {
        let d = d as i64;
        PeriodicSignal::new((-d..=d).map(|k| self.symbol(k as f64)).collect())
    }
}

/// Trigonometric polynomial ∑_{k=−d}^{d} c_k ζ^k.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSignal {
    coeffs: Vec<C64>,
}

impl PeriodicSignal {
    /// Coefficients listed from k = −d to k = d (odd length).
    pub fn new(coeffs: Vec<C64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient array must have odd length 2d+1");
        PeriodicSignal { coeffs }
    }

    pub fn zero(d: usize) -> Self {
        PeriodicSignal::new(vec![C64::new(0.0, 0.0); 2 * d + 1])
    }

    pub fn from_terms(terms: &[(i64, C64)]) -> Self {
        let d = terms.iter().map(|t| t.0.unsigned_abs() as usize).max().unwrap_or(0);
        let mut s = PeriodicSignal::zero(d);
        for &(k, c) in terms {
            s.coeffs[(k + d as i64) as usize] += c;
        }
        s
    }

    /// Analytic polynomial ∑_{k≥0} c_k ζ^k.
    pub fn analytic(coeffs: &[C64]) -> Self {
        let terms: Vec<(i64, C64)> = coeffs.iter().enumerate().map(|(k, &c)| (k as i64, c)).collect();
        PeriodicSignal::from_terms(&terms)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> C64 {
        let d = self.degree() as i64;
        if k.abs() > d {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let d = self.degree() as i64;
        let mut pos = C64::new(0.0, 0.0);
        for k in (0..=d).rev() {
            pos = pos * z + self.coeff(k);
        }
        if d == 0 {
            return pos;
        }
        let zi = z.inv();
        let mut neg = C64::new(0.0, 0.0);
        for k in (1..=d).rev() {
            neg = neg * zi + self.coeff(-k);
        }
        pos + neg * zi
    }

    /// Evaluation by direct summation of c_k ζ^k.
    pub fn eval_direct(&self, z: C64) -> C64 {
        let d = self.degree() as i64;
        (-d..=d).map(|k| self.coeff(k) * z.powi(k as i32)).sum()
    }

    pub fn max_coeff_diff(&self, other: &PeriodicSignal) -> f64 {
        let d = self.degree().max(other.degree()) as i64;
        (-d..=d)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Values at the `points`-th roots of unity, by inverse FFT when points > 2d.
    pub fn samples(&self, points: usize) -> Vec<C64> {
        let d = self.degree();
        if points <= 2 * d {
            return (0..points)
                .map(|j| self.eval(C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / points as f64)))
                .collect();
        }
        let mut buf = vec![C64::new(0.0, 0.0); points];
        for k in -(d as i64)..=(d as i64) {
            buf[k.rem_euclid(points as i64) as usize] += self.coeff(k);
        }
        FftPlanner::new().plan_fft_inverse(points).process(&mut buf);
        buf
    }

    /// Sup over `points` equally spaced points of the circle.
    pub fn sup_on_grid(&self, points: usize) -> f64 {
        self.samples(points).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &PeriodicSignal) -> PeriodicSignal {
        let d = self.degree().max(other.degree()) as i64;
        PeriodicSignal::new((-d..=d).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &PeriodicSignal) -> PeriodicSignal {
        let d = self.degree().max(other.degree()) as i64;
        PeriodicSignal::new((-d..=d).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    /// The 2π-periodic line function x ↦ f(e^{ix}).
    pub fn as_line(&self) -> ExponentialSum {
        let d = self.degree() as i64;
        let terms = (-d..=d)
            .filter(|&k| self.coeff(k) != C64::new(0.0, 0.0))
            .map(|k| (self.coeff(k), k as f64))
            .collect();
        let conj_sym = (-d..=d).all(|k| (self.coeff(k) - self.coeff(-k).conj()).norm() == 0.0);
        ExponentialSum::new(terms, conj_sym).with_label("periodic")
    }

    /// Coefficients from samples at the N-th roots of unity (N > 2d).
    pub fn from_samples(samples: &[C64], d: usize) -> Result<Self> {
        let n = samples.len();
        if n <= 2 * d {
            return Err(Error::InvalidArgument(format!("{n} samples cannot resolve degree {d}")));
        }
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let d = d as i64;
        Ok(PeriodicSignal::new(
            (-d..=d)
                .map(|k| buf[k.rem_euclid(n as i64) as usize] / n as f64)
                .collect(),
        ))
    }
}

impl FunctionModel for PeriodicSignal {
    fn name(&self) -> String {
        format!("trig{}", self.degree())
    }

    fn domain(&self) -> Domain {
        Domain::Circle
    }

    fn value(&self, z: C64) -> Result<C64> {
        if z.norm() == 0.0 && self.degree() > 0 {
            return Err(Error::OutsideDomain {
                function: self.name(),
                point: "0".into(),
            });
        }
        Ok(self.eval(z))
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        if order == 0 {
            return self.value(z);
        }
        let d = self.degree() as i64;
        let mut s = C64::new(0.0, 0.0);
        for k in -d..=d {
            let c = self.coeff(k);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let fall = (0..order as i64).fold(1.0, |a, i| a * (k - i) as f64);
            if fall != 0.0 {
                s += c * fall * z.powi((k - order as i64) as i32);
            }
        }
        Ok(s)
    }

    fn band_limit(&self) -> Option<f64> {
        Some(self.degree() as f64)
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(self.coeffs.iter().map(|c| c.norm()).sum())
    }

    fn exact_divided_difference(&self, nodes: &[C64]) -> Option<Result<C64>> {
        let d = self.degree() as i64;
        Some(laurent_divided_difference(|p| self.coeff(p), -d, d, nodes))
    }
}

/// Uniformly sampled signal on [−L, L) with a declared band limit σ.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledLineSignal {
    pub h: f64,
    pub half_extent: f64,
    pub samples: Vec<C64>,
    pub band_limit: f64,
}

/// Leakage diagnostics of a DFT multiplier applied to a line signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AliasingReport {
    /// Max |sample| over the outer 5% of the window on each side.
    pub edge_magnitude: f64,
    /// Share of spectral energy above the declared band limit.
    pub out_of_band_energy: f64,
}

impl SampledLineSignal {
    pub fn new(samples: Vec<C64>, half_extent: f64, band_limit: f64) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::EmptyGrid);
        }
        let h = 2.0 * half_extent / n as f64;
        if !(band_limit.is_finite() && band_limit > 0.0) {
            return Err(Error::InvalidArgument("band limit must be finite and positive".into()));
        }
        if h > std::f64::consts::PI / band_limit {
            return Err(Error::InvalidArgument(format!(
                "spacing {h} exceeds π/σ = {} for band limit {band_limit}",
                std::f64::consts::PI / band_limit
            )));
        }
        Ok(SampledLineSignal {
            h,
            half_extent,
            samples,
            band_limit,
        })
    }

    pub fn from_fn(f: impl Fn(f64) -> C64, half_extent: f64, n: usize, band_limit: f64) -> Result<Self> {
        let h = 2.0 * half_extent / n as f64;
        let samples = (0..n).map(|j| f(-half_extent + j as f64 * h)).collect();
        SampledLineSignal::new(samples, half_extent, band_limit)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.samples.len())
            .map(|j| -self.half_extent + j as f64 * self.h)
            .collect()
    }

    /// Angular frequency of DFT bin j.
    fn frequency(&self, j: usize) -> f64 {
        let n = self.samples.len() as i64;
        let k = if (j as i64) <= n / 2 { j as i64 } else { j as i64 - n };
        std::f64::consts::TAU * k as f64 / (n as f64 * self.h)
    }

    fn spectrum(&self) -> Vec<C64> {
        let mut buf = self.samples.clone();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf
    }

    pub fn aliasing_report(&self) -> AliasingReport {
        let n = self.samples.len();
        let edge = (n / 20).max(1);
        let edge_magnitude = self.samples[..edge]
            .iter()
            .chain(&self.samples[n - edge..])
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let spec = self.spectrum();
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let out: f64 = spec
            .iter()
            .enumerate()
            .filter(|(j, _)| self.frequency(*j).abs() > self.band_limit)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        AliasingReport {
            edge_magnitude,
            out_of_band_energy: if total > 0.0 { out / total } else { 0.0 },
        }
    }
}

/// Signals that admit exact or discretized Fourier multipliers.
pub trait SpectralSignal: Sized {
    fn apply_symbol(&self, symbol: &dyn Fn(f64) -> f64) -> Self;
}

impl SpectralSignal for PeriodicSignal {
    fn apply_symbol(&self, symbol: &dyn Fn(f64) -> f64) -> Self {
        let d = self.degree() as i64;
        PeriodicSignal::new((-d..=d).map(|k| self.coeff(k) * symbol(k as f64)).collect())
    }
}

impl SpectralSignal for SampledLineSignal {
    fn apply_symbol(&self, symbol: &dyn Fn(f64) -> f64) -> Self {
        let n = self.samples.len();
        let mut planner = FftPlanner::new();
        let mut buf = self.spectrum();
        for (j, z) in buf.iter_mut().enumerate() {
            *z *= symbol(self.frequency(j));
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        for z in buf.iter_mut() {
            *z /= n as f64;
        }
        SampledLineSignal {
            samples: buf,
            ..self.clone()
        }
    }
}

/// f_n = f*W_n + f*W_n♯, with W_0 = ζ̄ + 1 + ζ.
pub fn lp_block(f: &PeriodicSignal, n: u32) -> PeriodicSignal {
    if n == 0 {
        return f.apply_symbol(&|k| if k.abs() <= 1.0 { 1.0 } else { 0.0 });
    }
    let scale = 2f64.powi(n as i32);
    f.apply_symbol(&|k| cutoff_w(k / scale) + cutoff_w(-k / scale))
}

/// f * V_N: spectrum multiplied by v(·/2^N).
pub fn vp_smooth<S: SpectralSignal>(f: &S, big_n: i32) -> S {
    let scale = 2f64.powi(big_n);
    f.apply_symbol(&|xi| cutoff_v(xi / scale))
}

/// f * Q_n.
pub fn qn_smooth<S: SpectralSignal>(f: &S, n: i32, m: u32) -> S {
    let scale = 2f64.powi(n);
    f.apply_symbol(&|xi| q_symbol(m, xi / scale))
}

/// f*V_N + ∑_{n>N} f_n, summed until the blocks pass the degree.
pub fn reconstruct(f: &PeriodicSignal, big_n: u32) -> PeriodicSignal {
    let mut acc = vp_smooth(f, big_n as i32);
    let d = f.degree() as f64;
    let mut n = big_n + 1;
    while 2f64.powi(n as i32 - 1) <= d {
        acc = acc.add(&lp_block(f, n));
        n += 1;
    }
    acc
}

/// Physical-space kernel V(s) = (1/π)∫_0^2 v(ξ) cos(ξs) dξ on the grid s_j = j·hs.
fn v_kernel_table(hs: f64, count: usize) -> Vec<f64> {
    let len = (count * 4).next_power_of_two().max(1 << 16);
    let dxi = std::f64::consts::TAU / (len as f64 * hs);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    let lmax = (2.0 / dxi).ceil() as usize + 1;
    assert!(2 * lmax < len, "kernel table too coarse");
    for l in 0..=lmax {
        let v = cutoff_v(l as f64 * dxi);
        buf[l] = C64::new(v, 0.0);
        if l > 0 {
            buf[len - l] = C64::new(v, 0.0);
        }
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    buf.iter().take(count).map(|z| z.re * dxi / std::f64::consts::TAU).collect()
}

/// Quadrature residual of the Q_n identity at the given points:
/// |(f − f*Q_n)(x) − (−1)^m ∫ (Δ^m_{−t} f)(x) V_n(t) dt|.
///
/// f − f*Q_n is evaluated exactly from the spectrum, the integral by the
/// trapezoidal rule in s = 2^n t with a step that resolves every frequency
/// of the integrand.
pub fn qn_identity_residual(f: &ExponentialSum, n: i32, m: u32, points: &[f64]) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("order m must be at least 1".into()));
    }
    if n.abs() > MAX_SCALE {
        return Err(Error::KernelIndex(n));
    }
    let scale = 2f64.powi(n);
    let wmax = f.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
    let top = m as f64 * wmax / scale;
    let hs = std::f64::consts::TAU / (top + 2.0 + 8.0);
    let s_max = 600.0;
    let count = (s_max / hs).ceil() as usize + 1;
    let table = v_kernel_table(hs, count);
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut worst = 0.0_f64;
    for &x in points {
        let exact: C64 = f
            .terms
            .iter()
            .map(|&(a, w)| a * (1.0 - q_symbol(m, w / scale)) * C64::from_polar(1.0, w * x))
            .sum();
        let diff = |s: f64| -> C64 {
            let t = s / scale;
            (0..=m)
                .map(|k| {
                    let c = binomial(m as u64, k as u64) as f64 * if (m - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                    f.terms
                        .iter()
                        .map(|&(a, w)| a * C64::from_polar(1.0, w * (x - k as f64 * t)))
                        .sum::<C64>()
                        * c
                })
                .sum()
        };
        let mut integral = diff(0.0) * table[0];
        for (j, &vj) in table.iter().enumerate().skip(1) {
            let s = j as f64 * hs;
            integral += (diff(s) + diff(-s)) * vj;
        }
        integral *= hs * sign;
        worst = worst.max((exact - integral).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_w(3.0), 0.0);
        assert_eq!(cutoff_w(1.0), 1.0);
        assert!((cutoff_w(1.3) + cutoff_w(0.65) - 1.0).abs() < 1e-15);
        let c = build_cutoff();
        assert!(c.samples.iter().all(|&(_, w)| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn kernel_symbols() {
        for n in [-5, 0, 3] {
            assert_eq!(kernel_symbol(KernelKind::V, n, 0.0).unwrap().re, 1.0);
            assert_eq!(kernel_symbol(KernelKind::W, n, 2f64.powi(n + 1)).unwrap().re, 0.0);
            assert_eq!(kernel_symbol(KernelKind::W, n, 2f64.powi(n)).unwrap().re, 1.0);
        }
        assert!(matches!("X".parse::<KernelKind>(), Err(Error::UnknownKind(_))));
        assert_eq!("Q3".parse::<KernelKind>().unwrap(), KernelKind::Q(3));
        assert!(kernel_symbol(KernelKind::V, 65, 1.0).is_err());
    }

    #[test]
    fn supports() {
        for n in [-3, 0, 4] {
            let s = 2f64.powi(n);
            for i in 0..2000 {
                let xi = -5.0 * s + 10.0 * s * i as f64 / 1999.0;
                let w = kernel_symbol(KernelKind::W, n, xi).unwrap().re;
                if w != 0.0 {
                    assert!(xi >= s / 2.0 && xi <= 2.0 * s);
                }
                let v = kernel_symbol(KernelKind::V, n, xi).unwrap().re;
                if xi.abs() <= s {
                    assert_eq!(v, 1.0);
                }
                if xi.abs() >= 2.0 * s {
                    assert_eq!(v, 0.0);
                    assert_eq!(kernel_symbol(KernelKind::Q(3), n, xi).unwrap().re, 0.0);
                }
            }
        }
    }

    #[test]
    fn lp_block_examples() {
        let one = PeriodicSignal::from_terms(&[(0, C64::new(1.0, 0.0))]);
        for n in 0..6u32 {
            let z = PeriodicSignal::from_terms(&[(1 << n, C64::new(1.0, 0.0))]);
            assert_eq!(lp_block(&z, n).max_coeff_diff(&z), 0.0);
            if n >= 1 {
                assert_eq!(lp_block(&one, n).max_coeff_diff(&PeriodicSignal::zero(0)), 0.0);
            }
        }
    }

    #[test]
    fn lp_block_matches_quadrature_convolution() {
        let f = PeriodicSignal::from_terms(&[(1, C64::new(1.0, 0.0)), (3, C64::new(1.0, 0.0))]);
        let block = lp_block(&f, 1);
        let kernel = FrequencyKernel::new(KernelKind::W, 1).unwrap().circle_coefficients(8);
        let sharp = FrequencyKernel::new(KernelKind::WSharp, 1).unwrap().circle_coefficients(8);
        let w1 = kernel.add(&sharp);
        let np = 64;
        for j in 0..16 {
            let zeta = C64::from_polar(1.0, 0.37 * j as f64);
            let mut conv = C64::new(0.0, 0.0);
            for p in 0..np {
                let tau = C64::from_polar(1.0, std::f64::consts::TAU * p as f64 / np as f64);
                conv += f.eval(zeta * tau.conj()) * w1.eval(tau);
            }
            conv /= np as f64;
            assert!((conv - block.eval(zeta)).norm() < 1e-12);
        }
    }

    #[test]
    fn smoothing_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cubic = PeriodicSignal::new((0..7).map(|_| C64::new(rng.random(), rng.random())).collect());
        assert_eq!(vp_smooth(&cubic, 2).max_coeff_diff(&cubic), 0.0);
        let hi = PeriodicSignal::from_terms(&[(8, C64::new(1.0, 0.0))]);
        assert_eq!(vp_smooth(&hi, 2).max_coeff_diff(&PeriodicSignal::zero(0)), 0.0);
        assert_eq!(qn_smooth(&cubic, 3, 1).max_coeff_diff(&vp_smooth(&cubic, 3)), 0.0);
        for m in 1..=4 {
            assert!(qn_smooth(&cubic, 4, m).max_coeff_diff(&cubic) < 1e-14);
        }
    }

    #[test]
    fn reconstruction() {
        let z100 = PeriodicSignal::from_terms(&[(100, C64::new(1.0, 0.0))]);
        assert!(reconstruct(&z100, 0).max_coeff_diff(&z100) < 1e-12);
        assert_eq!(reconstruct(&PeriodicSignal::zero(3), 1).max_coeff_diff(&PeriodicSignal::zero(0)), 0.0);
    }

    #[test]
    fn telescoping_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = PeriodicSignal::new((0..129).map(|_| C64::new(rng.random(), rng.random())).collect());
        for big_m in 0..7u32 {
            let mut acc = PeriodicSignal::zero(0);
            for n in 0..=big_m {
                acc = acc.add(&lp_block(&f, n));
            }
            assert!(acc.max_coeff_diff(&vp_smooth(&f, big_m as i32)) < 1e-14);
        }
    }

    #[test]
    fn gaussian_line_signal_reproduced() {
        let g = SampledLineSignal::from_fn(|x| C64::new((-x * x / 2.0).exp(), 0.0), 20.0, 512, 9.0).unwrap();
        let out = vp_smooth(&g, 8);
        let worst = g.samples.iter().zip(&out.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-10);
        let rep = g.aliasing_report();
        assert!(rep.edge_magnitude < 1e-40 && rep.out_of_band_energy < 1e-20);
    }

    #[test]
    fn line_multiplier_matches_direct_dft() {
        let g = SampledLineSignal::from_fn(|x| C64::new((-x * x).exp() * (3.0 * x).cos(), 0.0), 8.0, 128, 7.0).unwrap();
        let out = vp_smooth(&g, 1);
        let n = g.samples.len();
        for (t, got) in out.samples.iter().enumerate().step_by(7) {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                let xi = std::f64::consts::TAU * k as f64 / (n as f64 * g.h);
                let fhat: C64 = (0..n)
                    .map(|s| g.samples[s] * C64::from_polar(1.0, -std::f64::consts::TAU * (j * s) as f64 / n as f64))
                    .sum();
                acc += fhat * cutoff_v(xi / 2.0) * C64::from_polar(1.0, std::f64::consts::TAU * (j * t) as f64 / n as f64);
            }
            acc /= n as f64;
            assert!((acc - got).norm() < 1e-12);
        }
    }

    #[test]
    fn undersampled_signal_rejected() {
        assert!(SampledLineSignal::from_fn(|_| C64::new(1.0, 0.0), 1.0, 4, 10.0).is_err());
    }

    #[test]
    fn qn_identity_cosine() {
        let f = ExponentialSum::cos_series(&[(1.0, 1.0)]);
        let xs: Vec<f64> = (0..5).map(|i| -1.0 + 0.5 * i as f64).collect();
        assert!(qn_identity_residual(&f, 3, 2, &xs).unwrap() <= 1e-8);
        assert!(qn_identity_residual(&f, -2, 3, &xs).unwrap() <= 1e-8);
    }

    #[test]
    fn from_samples_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = PeriodicSignal::new((0..11).map(|_| C64::new(rng.random(), rng.random())).collect());
        let n = 32;
        let samples: Vec<C64> = (0..n)
            .map(|j| f.eval(C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64)))
            .collect();
        assert!(PeriodicSignal::from_samples(&samples, 5).unwrap().max_coeff_diff(&f) < 1e-14);
    }

    #[test]
    fn horner_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = PeriodicSignal::new((0..41).map(|_| C64::new(rng.random(), rng.random())).collect());
        for j in 0..10 {
            let z = C64::from_polar(1.0, j as f64);
            assert!((f.eval(z) - f.eval_direct(z)).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(e in -40.0f64..40.0) {
            prop_assert!(partition_defect(2f64.powf(e)) <= 1e-12);
        }

        #[test]
        fn nested_supports(xi in -300.0f64..300.0, big_n in -4i32..8) {
            for n in (big_n - 6)..big_n {
                let v = kernel_symbol(KernelKind::V, big_n, xi).unwrap().re;
                let w = kernel_symbol(KernelKind::W, n, xi).unwrap().re;
                prop_assert!((v * w - w).abs() <= 1e-14);
            }
        }
    }
}
