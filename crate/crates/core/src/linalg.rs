//! Dense complex matrix plumbing shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    let mut m = zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = C64::new(x, 0.0);
    }
    m
}

pub fn from_diag(d: &[C64]) -> CMat {
    let mut m = zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = x;
    }
    m
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    CMat::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
}

/// Largest singular value (full SVD).
pub fn spectral_norm(x: &CMat) -> f64 {
    if x.nrows() == 0 || x.ncols() == 0 {
        return 0.0;
    }
    x.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

pub fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()).scale(0.5)
}

pub fn hermitian_defect(x: &CMat) -> f64 {
    spectral_norm(&(x - x.adjoint()))
}

pub fn unitary_defect(u: &CMat) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    spectral_norm(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Square complex matrix that is Hermitian within `HERMITIAN_TOL` relative defect.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL * spectral_norm(&m).max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::NotHermitian { defect });
        }
        Ok(HermitianMatrix(hermitian_part(&m)))
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        HermitianMatrix(from_real_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }
}

impl AsRef<CMat> for HermitianMatrix {
    fn as_ref(&self) -> &CMat {
        &self.0
    }
}

/// Eigenvalues and an orthonormal eigenbasis of a normal matrix.
///
/// For Hermitian input the eigenvalues are real and ascending. For unitary
/// input they are unimodular and sorted by argument in (-π, π].
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// U diag(g(λ)) U*.
    pub fn apply<F: Fn(C64) -> Result<C64>>(&self, g: F) -> Result<CMat> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let gj = g(self.values[j])?;
            for i in 0..n {
                scaled[(i, j)] *= gj;
            }
        }
        Ok(scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply(Ok).expect("identity map cannot fail")
    }

    pub fn basis_defect(&self) -> f64 {
        unitary_defect(&self.vectors)
    }
}

fn normalize_phases(v: &mut CMat) {
    for j in 0..v.ncols() {
        let pivot = (0..v.nrows()).map(|i| v[(i, j)]).find(|z| z.norm() > 1e-8);
        if let Some(p) = pivot {
            let phase = p.conj() / p.norm();
            for i in 0..v.nrows() {
                v[(i, j)] *= phase;
            }
        }
    }
}

fn permute_columns(v: &CMat, order: &[usize]) -> CMat {
    CMat::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])])
}

/// Hermitian eigendecomposition with ascending eigenvalues and
/// eigenvectors normalized so that the first non-negligible entry is real positive.
pub fn eig(a: &HermitianMatrix) -> SpectralDecomposition {
    let n = a.dim();
    if n == 0 {
        return SpectralDecomposition {
            values: vec![],
            vectors: zeros(0, 0),
        };
    }
    let se = a.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let mut vectors = permute_columns(&se.eigenvectors, &order);
    normalize_phases(&mut vectors);
    SpectralDecomposition {
        values: order.iter().map(|&i| C64::new(se.eigenvalues[i], 0.0)).collect(),
        vectors,
    }
}

pub fn eig_hermitian(m: &CMat) -> Result<SpectralDecomposition> {
    Ok(eig(&HermitianMatrix::new(m.clone())?))
}

/// Eigendecomposition of a unitary matrix through its complex Schur form.
pub fn eig_unitary(u: &CMat) -> Result<SpectralDecomposition> {
    let defect = unitary_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    let n = u.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            values: vec![],
            vectors: zeros(0, 0),
        });
    }
    let (q, t) = u.clone().schur().unpack();
    let mut off = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-9 {
        return Err(Error::Invariant(format!(
            "Schur form of unitary input is not diagonal (off-diagonal {off:.3e})"
        )));
    }
    let vals: Vec<C64> = (0..n).map(|i| t[(i, i)] / t[(i, i)].norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].arg().total_cmp(&vals[j].arg()));
    let mut vectors = permute_columns(&q, &order);
    normalize_phases(&mut vectors);
    Ok(SpectralDecomposition {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors,
    })
}

/// Positive square root of a positive semidefinite matrix, clamping tiny negative eigenvalues.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let d = eig_hermitian(m)?;
    d.apply(|z| Ok(C64::new(z.re.max(0.0).sqrt(), 0.0)))
}

/// Matrix serialization as `{n, rows: [[[re, im], ...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub n: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        MatrixJson {
            n: m.nrows(),
            rows: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.rows.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "declared n = {} but {} rows given",
                self.n,
                self.rows.len()
            )));
        }
        let cols = self.rows.first().map_or(0, |r| r.len());
        if self.rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(CMat::from_fn(self.n, cols, |i, j| {
            C64::new(self.rows[i][j][0], self.rows[i][j][1])
        }))
    }
}

/// Random matrix generators used by samplers and tests.
pub mod random {
    use super::*;

    pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    pub fn gue<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
        hermitian_part(&gaussian(rng, n, n))
    }

    /// Random Hermitian matrix with spectrum affinely mapped onto [lo, hi].
    pub fn hermitian_in<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> CMat {
        let g = gue(rng, n);
        let d = eig(&HermitianMatrix(g));
        let vals = d.real_values();
        let (mn, mx) = (vals[0], vals[n - 1]);
        let (mid, half) = ((mn + mx) / 2.0, (mx - mn) / 2.0);
        let (c, r) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        let mapped: Vec<f64> = vals
            .iter()
            .map(|&x| {
                if half > 0.0 {
                    (c + r * (x - mid) / half).clamp(lo, hi)
                } else {
                    c
                }
            })
            .collect();
        let m = &d.vectors * from_real_diag(&mapped) * d.vectors.adjoint();
        hermitian_part(&m)
    }

    /// Random Hermitian direction scaled to spectral norm exactly `delta`.
    pub fn hermitian_direction<R: Rng + ?Sized>(rng: &mut R, n: usize, delta: f64) -> CMat {
        let g = gue(rng, n);
        let s = spectral_norm(&g);
        if s == 0.0 {
            return zeros(n, n);
        }
        g.scale(delta / s)
    }

    /// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
    pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
        let g = gaussian(rng, n, n);
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            let d = r[(j, j)];
            let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
            for i in 0..n {
                q[(i, j)] *= ph;
            }
        }
        q
    }

    /// exp(iH) for Hermitian H.
    pub fn unitary_exp(h: &CMat) -> CMat {
        let d = eig(&HermitianMatrix(hermitian_part(h)));
        d.apply(|z| Ok(C64::new(0.0, z.re).exp())).expect("exp is total")
    }

    pub fn psd<R: Rng + ?Sized>(rng: &mut R, n: usize, top: f64) -> CMat {
        hermitian_in(rng, n, 0.0, top)
    }

    /// Ginibre matrix rescaled to spectral norm `norm`.
    pub fn contraction<R: Rng + ?Sized>(rng: &mut R, n: usize, norm: f64) -> CMat {
        let g = gaussian(rng, n, n);
        let s = spectral_norm(&g);
        g.scale(norm / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_eigs_sorted_with_permutation_basis() {
        let a = HermitianMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
        let d = eig(&a);
        assert_eq!(d.real_values(), vec![1.0, 2.0, 3.0]);
        for j in 0..3 {
            let nz: Vec<_> = (0..3).filter(|&i| d.vectors[(i, j)].norm() > 0.5).collect();
            assert_eq!(nz.len(), 1);
            assert!((d.vectors[(nz[0], j)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_x_eigs() {
        let a = HermitianMatrix::new(from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let v = eig(&a).real_values();
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random::gue(&mut rng, 8);
            let d = eig(&HermitianMatrix::new(m.clone()).unwrap());
            assert!(d.basis_defect() < 1e-12);
            assert!(spectral_norm(&(d.reconstruct() - &m)) < 1e-10 * (1.0 + spectral_norm(&m)));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn unitary_eigs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..7 {
            let u = random::haar_unitary(&mut rng, n);
            assert!(unitary_defect(&u) < 1e-12);
            let d = eig_unitary(&u).unwrap();
            assert!(spectral_norm(&(d.reconstruct() - &u)) < 1e-10);
            assert!(d.values.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        }
        let d = eig_unitary(&identity(3)).unwrap();
        assert!(spectral_norm(&(d.reconstruct() - identity(3))) < 1e-14);
    }

    #[test]
    fn norms() {
        assert_eq!(spectral_norm(&from_real_diag(&[1.0, -4.0, 2.0])), 4.0);
        let m = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((spectral_norm(&m) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random::gaussian(&mut rng, 4, 3);
        let cst = C64::new(-2.0, 1.5);
        assert!((spectral_norm(&x.map(|z| z * cst)) - cst.norm() * spectral_norm(&x)).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random::gaussian(&mut rng, 3, 3);
        let j = serde_json::to_string(&MatrixJson::from_matrix(&x)).unwrap();
        let back: MatrixJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.to_matrix().unwrap(), x);
    }
}
