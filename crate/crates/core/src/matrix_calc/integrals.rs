use rayon::prelude::*;

use super::divided::dd_value;
use crate::error::{Error, Result};
use crate::function::FunctionModel;
use crate::linalg::{CMat, SpectralDecomposition, C64};

pub const DEFAULT_MAX_ORDER: usize = 4;

type Eval<'a> = Box<dyn Fn(C64, C64) -> Result<C64> + Send + Sync + 'a>;

/// Symbol φ(x, y) of a double operator integral.
pub struct BivariateSymbol<'a> {
    eval: Eval<'a>,
    pub label: String,
}

impl<'a> BivariateSymbol<'a> {
    pub fn new(label: &str, eval: impl Fn(C64, C64) -> Result<C64> + Send + Sync + 'a) -> Self {
        BivariateSymbol {
            eval: Box::new(eval),
            label: label.into(),
        }
    }

    pub fn constant(v: C64) -> BivariateSymbol<'static> {
        BivariateSymbol::new("const", move |_, _| Ok(v))
    }

    /// (x, y) ↦ 𝔇f(x, y).
    pub fn divided_difference(f: &'a dyn FunctionModel) -> Self {
        BivariateSymbol::new(&format!("dd[{}]", f.name()), move |x, y| dd_value(f, &[x, y]))
    }

    pub fn eval(&self, x: C64, y: C64) -> Result<C64> {
        (self.eval)(x, y)
    }

    /// Φ_ij = φ(x_i, y_j).
    pub fn matrix_form(&self, xs: &[C64], ys: &[C64]) -> Result<CMat> {
        let mut m = CMat::zeros(xs.len(), ys.len());
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                m[(i, j)] = self.eval(x, y)?;
            }
        }
        Ok(m)
    }
}

/// U_A (Φ ∘ (U_A* X U_B)) U_B* for a precomputed Φ.
pub fn doi_with_matrix(
    phi: &CMat,
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    x: &CMat,
) -> Result<CMat> {
    if x.nrows() != a.dim() || x.ncols() != b.dim() || phi.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "doi: X is {}x{}, spectra {} and {}, symbol {}x{}",
            x.nrows(),
            x.ncols(),
            a.dim(),
            b.dim(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    let inner = a.vectors.adjoint() * x * &b.vectors;
    Ok(&a.vectors * phi.component_mul(&inner) * b.vectors.adjoint())
}

/// Double operator integral ∬ φ(x, y) dE_A(x) X dE_B(y).
pub fn doi(
    phi: &BivariateSymbol,
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    x: &CMat,
) -> Result<CMat> {
    let m = phi.matrix_form(&a.values, &b.values)?;
    doi_with_matrix(&m, a, b, x)
}

/// Multiple operator integral
/// ∫⋯∫ 𝔇^m f(x_1, …, x_{m+1}) dE_1(x_1) X_1 dE_2(x_2) ⋯ X_m dE_{m+1}(x_{m+1})
/// as a nested eigen-sum over index tuples. Cost O(n^{m+1}).
pub fn moi(f: &dyn FunctionModel, spectra: &[&SpectralDecomposition], factors: &[CMat]) -> Result<CMat> {
    moi_with_limit(f, spectra, factors, DEFAULT_MAX_ORDER)
}

pub fn moi_with_limit(
    f: &dyn FunctionModel,
    spectra: &[&SpectralDecomposition],
    factors: &[CMat],
    max_order: usize,
) -> Result<CMat> {
    let m = factors.len();
    if m == 0 || spectra.len() != m + 1 {
        return Err(Error::DimensionMismatch(format!(
            "moi needs m+1 spectra for m factors, got {} and {}",
            spectra.len(),
            m
        )));
    }
    if m > max_order {
        return Err(Error::OrderTooLarge { order: m, limit: max_order });
    }
    for (s, x) in factors.iter().enumerate() {
        if x.nrows() != spectra[s].dim() || x.ncols() != spectra[s + 1].dim() {
            return Err(Error::DimensionMismatch(format!(
                "moi factor {s} is {}x{}, spectra are {} and {}",
                x.nrows(),
                x.ncols(),
                spectra[s].dim(),
                spectra[s + 1].dim()
            )));
        }
    }
    let ys: Vec<CMat> = factors
        .iter()
        .enumerate()
        .map(|(s, x)| spectra[s].vectors.adjoint() * x * &spectra[s + 1].vectors)
        .collect();
    let n_first = spectra[0].dim();
    let n_last = spectra[m].dim();

    let rows: Vec<Result<Vec<C64>>> = (0..n_first)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![C64::new(0.0, 0.0); n_last];
            let mut nodes = Vec::with_capacity(m + 1);
            nodes.push(spectra[0].values[a]);
            chain(f, spectra, &ys, 1, a, C64::new(1.0, 0.0), &mut nodes, &mut row)?;
            Ok(row)
        })
        .collect();
    let mut z = CMat::zeros(n_first, n_last);
    for (a, row) in rows.into_iter().enumerate() {
        for (b, v) in row?.into_iter().enumerate() {
            z[(a, b)] = v;
        }
    }
    Ok(&spectra[0].vectors * z * spectra[m].vectors.adjoint())
}

#[allow(clippy::too_many_arguments)]
fn chain(
    f: &dyn FunctionModel,
    spectra: &[&SpectralDecomposition],
    ys: &[CMat],
    level: usize,
    prev: usize,
    prefix: C64,
    nodes: &mut Vec<C64>,
    row: &mut [C64],
) -> Result<()> {
    let m = ys.len();
    let y = &ys[level - 1];
    for i in 0..spectra[level].dim() {
        let p = prefix * y[(prev, i)];
        if p == C64::new(0.0, 0.0) {
            continue;
        }
        nodes.push(spectra[level].values[i]);
        if level == m {
            row[i] += dd_value(f, nodes)? * p;
        } else {
            chain(f, spectra, ys, level + 1, i, p, nodes, row)?;
        }
        nodes.pop();
    }
    Ok(())
}
