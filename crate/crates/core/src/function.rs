//! Scalar function models with derivative access.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Line,
    Circle,
}

/// An evaluable scalar function on the real line or the unit circle.
///
/// Line models read the real part of their argument. Derivatives on the
/// circle are complex derivatives in z, which is what divided differences
/// over unimodular nodes need.
pub trait FunctionModel: Send + Sync {
    fn name(&self) -> String;
    fn domain(&self) -> Domain;
    fn value(&self, z: C64) -> Result<C64>;
    /// Derivative of the given order; order 0 is the value.
    fn derivative(&self, order: usize, z: C64) -> Result<C64>;

    fn band_limit(&self) -> Option<f64> {
        None
    }
    /// Sup norm on the domain, `None` when unbounded or unknown.
    fn sup_norm(&self) -> Option<f64> {
        None
    }
    /// True when derivatives come from finite differences.
    fn approximate_derivatives(&self) -> bool {
        false
    }
    /// Closed-form divided difference when the model has one.
    fn exact_divided_difference(&self, _nodes: &[C64]) -> Option<Result<C64>> {
        None
    }
    fn real(&self, x: f64) -> Result<f64> {
        Ok(self.value(C64::new(x, 0.0))?.re)
    }
    /// The underlying polynomial, for models that are one.
    fn as_polynomial(&self) -> Option<&Polynomial> {
        None
    }
}

fn binom_falling(alpha: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (alpha - i as f64))
}

/// h_j(x_0, ..., x_k) for j = 0..=max_j, the complete homogeneous symmetric polynomials.
pub fn complete_homogeneous(nodes: &[C64], max_j: usize) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); max_j + 1];
    h[0] = C64::new(1.0, 0.0);
    if nodes.is_empty() {
        for v in h.iter_mut().skip(1) {
            *v = C64::new(0.0, 0.0);
        }
        return h;
    }
    let x0 = nodes[0];
    for j in 1..=max_j {
        h[j] = h[j - 1] * x0;
    }
    for &x in &nodes[1..] {
        for j in 1..=max_j {
            let prev = h[j - 1];
            h[j] += x * prev;
        }
    }
    h
}

/// Divided difference of order nodes.len()-1 of the Laurent polynomial
/// sum_{p=lo}^{hi} coeff(p) z^p, via complete homogeneous polynomials.
pub fn laurent_divided_difference(
    coeff: impl Fn(i64) -> C64,
    lo: i64,
    hi: i64,
    nodes: &[C64],
) -> Result<C64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("divided difference needs at least one node".into()));
    }
    let k = nodes.len() as i64 - 1;
    let mut total = C64::new(0.0, 0.0);
    if hi >= k {
        let h = complete_homogeneous(nodes, (hi - k) as usize);
        for p in lo.max(k)..=hi {
            total += coeff(p) * h[(p - k) as usize];
        }
    }
    if lo < 0 {
        if nodes.iter().any(|z| z.norm() == 0.0) {
            return Err(Error::OutsideDomain {
                function: "Laurent polynomial".into(),
                point: "0".into(),
            });
        }
        let inv: Vec<C64> = nodes.iter().map(|z| z.inv()).collect();
        let prod_inv = inv.iter().fold(C64::new(1.0, 0.0), |a, &b| a * b);
        let pmax = (-lo) as usize;
        let h = complete_homogeneous(&inv, pmax - 1);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for p in 1..=pmax {
            let cp = coeff(-(p as i64));
            if cp != C64::new(0.0, 0.0) {
                total += cp * prod_inv * h[p - 1] * sign;
            }
        }
    }
    Ok(total)
}

/// Polynomial sum c_k z^k.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<C64>,
    pub domain: Domain,
}

impl Polynomial {
    pub fn new(coeffs: Vec<C64>, domain: Domain) -> Self {
        Polynomial { coeffs, domain }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Polynomial::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect(), Domain::Line)
    }

    pub fn analytic(coeffs: Vec<C64>) -> Self {
        Polynomial::new(coeffs, Domain::Circle)
    }

    pub fn monomial(k: usize, domain: Domain) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); k + 1];
        c[k] = C64::new(1.0, 0.0);
        Polynomial::new(c, domain)
    }

    pub fn identity() -> Self {
        Polynomial::real(&[0.0, 1.0])
    }

    pub fn constant(v: f64) -> Self {
        Polynomial::real(&[v])
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.norm() != 0.0)
            .unwrap_or(0)
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Max of |p| over `points` equally spaced points of the unit circle.
    pub fn circle_sup(&self, points: usize) -> f64 {
        let terms = self.terms();
        (0..points)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
                terms
                    .iter()
                    .map(|&(k, c)| c * C64::from_polar(1.0, k as f64 * th))
                    .sum::<C64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// Nonzero (power, coefficient) pairs.
    pub fn terms(&self) -> Vec<(usize, C64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(k, &c)| (k, c))
            .collect()
    }

    /// ∑_k c_k z^{2^k}, k = 1..=count: the analytic lacunary series.
    pub fn analytic_lacunary(count: u32, alpha: f64) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); (1usize << count) + 1];
        for k in 1..=count {
            c[1 << k] = C64::new(2f64.powf(-(k as f64) * alpha), 0.0);
        }
        Polynomial::analytic(c)
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| c.norm() == 0.0)
    }
}

impl FunctionModel for Polynomial {
    fn name(&self) -> String {
        format!("poly{}", self.degree())
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        Some(self)
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn value(&self, z: C64) -> Result<C64> {
        let z = match self.domain {
            Domain::Line => C64::new(z.re, 0.0),
            Domain::Circle => z,
        };
        Ok(self.eval(z))
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        let z = match self.domain {
            Domain::Line => C64::new(z.re, 0.0),
            Domain::Circle => z,
        };
        let mut acc = C64::new(0.0, 0.0);
        for k in (order..self.coeffs.len()).rev() {
            acc = acc * z + self.coeffs[k] * binom_falling(k as f64, order);
        }
        Ok(acc)
    }

    fn band_limit(&self) -> Option<f64> {
        match self.domain {
            Domain::Circle => Some(self.degree() as f64),
            Domain::Line => self.is_constant().then_some(0.0),
        }
    }

    fn sup_norm(&self) -> Option<f64> {
        match self.domain {
            Domain::Circle => Some(self.coeffs.iter().map(|c| c.norm()).sum()),
            Domain::Line => self.is_constant().then(|| self.coeff(0).norm()),
        }
    }

    fn exact_divided_difference(&self, nodes: &[C64]) -> Option<Result<C64>> {
        let nodes: Vec<C64> = match self.domain {
            Domain::Line => nodes.iter().map(|z| C64::new(z.re, 0.0)).collect(),
            Domain::Circle => nodes.to_vec(),
        };
        let hi = self.coeffs.len() as i64 - 1;
        Some(laurent_divided_difference(|p| self.coeff(p as usize), 0, hi.max(0), &nodes))
    }
}

/// c |t|^α on the line.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAbs {
    pub alpha: f64,
    pub scale: f64,
}

impl PowerAbs {
    pub fn new(alpha: f64) -> Self {
        PowerAbs { alpha, scale: 1.0 }
    }

    pub fn abs() -> Self {
        PowerAbs::new(1.0)
    }
}

impl FunctionModel for PowerAbs {
    fn name(&self) -> String {
        if self.alpha == 1.0 {
            "abs".into()
        } else {
            format!("abs_pow_{}", self.alpha)
        }
    }

    fn domain(&self) -> Domain {
        Domain::Line
    }

    fn value(&self, z: C64) -> Result<C64> {
        let t = z.re;
        let v = if t == 0.0 { 0.0 } else { t.abs().powf(self.alpha) };
        Ok(C64::new(self.scale * v, 0.0))
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        let t = z.re;
        if order == 0 {
            return self.value(z);
        }
        let even_int = self.alpha.fract() == 0.0 && (self.alpha as i64) % 2 == 0;
        if t == 0.0 {
            if even_int && order as f64 <= self.alpha {
                let v = if order as f64 == self.alpha { binom_falling(self.alpha, order) } else { 0.0 };
                return Ok(C64::new(self.scale * v, 0.0));
            }
            if even_int {
                return Ok(C64::new(0.0, 0.0));
            }
            return Err(Error::MissingDerivative {
                function: self.name(),
                order,
                point: t,
            });
        }
        let sign = if t < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
        let v = binom_falling(self.alpha, order) * t.abs().powf(self.alpha - order as f64) * sign;
        Ok(C64::new(self.scale * v, 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementary {
    Exp,
    Sin,
    Cos,
}

impl FunctionModel for Elementary {
    fn name(&self) -> String {
        match self {
            Elementary::Exp => "exp",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
        }
        .into()
    }

    fn domain(&self) -> Domain {
        Domain::Line
    }

    fn value(&self, z: C64) -> Result<C64> {
        self.derivative(0, z)
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        let t = z.re;
        let shift = order as f64 * std::f64::consts::FRAC_PI_2;
        let v = match self {
            Elementary::Exp => t.exp(),
            Elementary::Sin => (t + shift).sin(),
            Elementary::Cos => (t + shift).cos(),
        };
        Ok(C64::new(v, 0.0))
    }

    fn sup_norm(&self) -> Option<f64> {
        match self {
            Elementary::Exp => None,
            _ => Some(1.0),
        }
    }

    fn band_limit(&self) -> Option<f64> {
        match self {
            Elementary::Exp => None,
            _ => Some(1.0),
        }
    }
}

/// Finite sum of exponentials ∑ a_k e^{iω_k x} on the line.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialSum {
    pub terms: Vec<(C64, f64)>,
    /// Report only the real part (for conjugate-symmetric sums).
    pub real_valued: bool,
    pub label: String,
}

impl ExponentialSum {
    pub fn new(terms: Vec<(C64, f64)>, real_valued: bool) -> Self {
        ExponentialSum {
            terms,
            real_valued,
            label: "expsum".into(),
        }
    }

    /// ∑ a_n cos(λ_n x).
    pub fn cos_series(amp_freq: &[(f64, f64)]) -> Self {
        let mut terms = Vec::with_capacity(2 * amp_freq.len());
        for &(a, l) in amp_freq {
            terms.push((C64::new(a / 2.0, 0.0), l));
            terms.push((C64::new(a / 2.0, 0.0), -l));
        }
        ExponentialSum {
            terms,
            real_valued: true,
            label: "cos_series".into(),
        }
    }

    /// ∑_{n=1}^{count} 2^{-n α} cos(2^n x): lacunary, bounded, in Λ_α.
    pub fn lacunary(count: u32, alpha: f64) -> Self {
        let af: Vec<(f64, f64)> = (1..=count)
            .map(|n| (2f64.powf(-alpha * n as f64), 2f64.powi(n as i32)))
            .collect();
        let mut s = ExponentialSum::cos_series(&af);
        s.label = format!("lacunary{count}_{alpha}");
        s
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }
}

impl FunctionModel for ExponentialSum {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn domain(&self) -> Domain {
        Domain::Line
    }

    fn value(&self, z: C64) -> Result<C64> {
        self.derivative(0, z)
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        let x = z.re;
        let mut s = C64::new(0.0, 0.0);
        for &(a, w) in &self.terms {
            s += a * C64::new(0.0, w).powu(order as u32) * C64::from_polar(1.0, w * x);
        }
        if self.real_valued {
            s.im = 0.0;
        }
        Ok(s)
    }

    fn band_limit(&self) -> Option<f64> {
        Some(self.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max))
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(self.terms.iter().map(|t| t.0.norm()).sum())
    }
}

type ScalarFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// User function; missing derivatives come from central differences and are flagged.
#[derive(Clone)]
pub struct ClosureFunction {
    pub label: String,
    pub domain: Domain,
    pub f: ScalarFn,
    pub derivatives: Vec<ScalarFn>,
    pub sup: Option<f64>,
}

impl ClosureFunction {
    pub fn new(label: &str, domain: Domain, f: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        ClosureFunction {
            label: label.into(),
            domain,
            f: Arc::new(f),
            derivatives: vec![],
            sup: None,
        }
    }

    pub fn with_sup(mut self, s: f64) -> Self {
        self.sup = Some(s);
        self
    }

    pub fn with_derivative(mut self, d: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        self.derivatives.push(Arc::new(d));
        self
    }

    /// |ζ - 1|^α on the circle.
    pub fn circle_power(alpha: f64) -> Self {
        ClosureFunction::new(&format!("circle_dist_pow_{alpha}"), Domain::Circle, move |z| {
            C64::new((z - 1.0).norm().powf(alpha), 0.0)
        })
        .with_sup(2f64.powf(alpha))
    }
}

impl FunctionModel for ClosureFunction {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn value(&self, z: C64) -> Result<C64> {
        let z = if self.domain == Domain::Line { C64::new(z.re, 0.0) } else { z };
        let v = (self.f)(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::OutsideDomain {
                function: self.label.clone(),
                point: format!("{z}"),
            })
        }
    }

    fn derivative(&self, order: usize, z: C64) -> Result<C64> {
        if order == 0 {
            return self.value(z);
        }
        if let Some(d) = self.derivatives.get(order - 1) {
            return Ok(d(z));
        }
        let missing = Error::MissingDerivative {
            function: self.label.clone(),
            order,
            point: z.re,
        };
        match (self.domain, order) {
            (Domain::Line, 1..=4) => {
                let x = z.re;
                let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * x.abs().max(1.0);
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..=order {
                    let w = crate::binomial(order as u64, k as u64) as f64
                        * if k % 2 == 0 { 1.0 } else { -1.0 };
                    let t = x + (order as f64 / 2.0 - k as f64) * h;
                    acc += self.value(C64::new(t, 0.0))? * w;
                }
                Ok(acc / h.powi(order as i32))
            }
            (Domain::Circle, 1) => {
                let h = 1e-5;
                let p = self.value(z * C64::from_polar(1.0, h))?;
                let m = self.value(z * C64::from_polar(1.0, -h))?;
                Ok((p - m) / (C64::new(0.0, 2.0 * h) * z))
            }
            _ => Err(missing),
        }
    }

    fn sup_norm(&self) -> Option<f64> {
        self.sup
    }

    fn approximate_derivatives(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let p = Polynomial::real(&[1.0, 2.0, 0.0, 4.0]);
        let z = C64::new(1.5, 0.0);
        assert!((p.derivative(1, z).unwrap().re - (2.0 + 12.0 * 2.25)).abs() < 1e-12);
        assert!((p.derivative(3, z).unwrap().re - 24.0).abs() < 1e-12);
        assert_eq!(p.derivative(4, z).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn homogeneous_polys() {
        let x = [C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let h = complete_homogeneous(&x, 2);
        assert_eq!(h[1].re, 5.0);
        assert_eq!(h[2].re, 4.0 + 6.0 + 9.0);
    }

    #[test]
    fn negative_power_divided_difference() {
        let x0 = C64::new(0.3, 0.8);
        let x1 = C64::new(-1.1, 0.2);
        let direct = (x1.powi(-2) - x0.powi(-2)) / (x1 - x0);
        let got = laurent_divided_difference(|p| if p == -2 { C64::new(1.0, 0.0) } else { C64::default() }, -2, 0, &[x0, x1]).unwrap();
        assert!((direct - got).norm() < 1e-13);
    }

    #[test]
    fn abs_power_derivatives() {
        let f = PowerAbs::new(0.5);
        let d = f.derivative(1, C64::new(-4.0, 0.0)).unwrap().re;
        assert!((d + 0.25).abs() < 1e-15);
        assert!(f.derivative(1, C64::new(0.0, 0.0)).is_err());
        let sq = PowerAbs::new(2.0);
        assert_eq!(sq.derivative(2, C64::new(0.0, 0.0)).unwrap().re, 2.0);
    }

    #[test]
    fn closure_finite_differences() {
        let f = ClosureFunction::new("cube", Domain::Line, |z| z * z * z);
        assert!(f.approximate_derivatives());
        let d1 = f.derivative(1, C64::new(0.7, 0.0)).unwrap().re;
        let d2 = f.derivative(2, C64::new(0.7, 0.0)).unwrap().re;
        assert!((d1 - 3.0 * 0.49).abs() < 1e-8);
        assert!((d2 - 4.2).abs() < 1e-5);
    }

    #[test]
    fn lacunary_sup() {
        let f = ExponentialSum::lacunary(12, 1.0);
        assert!((f.sup_norm().unwrap() - (1.0 - 2f64.powi(-12))).abs() < 1e-12);
        assert!((f.real(0.0).unwrap() - (1.0 - 2f64.powi(-12))).abs() < 1e-12);
    }
}
