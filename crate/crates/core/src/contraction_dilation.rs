//! Polynomial calculus of contractions, finite unitary power dilations and the
//! semi-spectral measures they induce.

use crate::error::{Error, Result};
use crate::function::{Domain, Polynomial};
use crate::linalg::{eig_unitary, identity, spectral_norm, unitary_defect, CMat, SpectralDecomposition, C64};
use crate::matrix_calc::{doi, moi_with_limit, BivariateSymbol};

pub const CONTRACTION_TOL: f64 = 1e-10;
pub const VON_NEUMANN_POINTS: usize = 4096;

/// Square matrix with spectral norm at most 1 + 1e−10.
#[derive(Clone, Debug)]
pub struct ContractionMatrix(CMat);

impl ContractionMatrix {
    pub fn new(t: CMat) -> Result<Self> {
        if t.nrows() != t.ncols() {
            return Err(Error::DimensionMismatch(format!("contraction must be square, got {}x{}", t.nrows(), t.ncols())));
        }
        let norm = spectral_norm(&t);
        if norm > 1.0 + CONTRACTION_TOL {
            return Err(Error::NotContraction { norm });
        }
        Ok(ContractionMatrix(t))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

pub fn check_contraction(t: &CMat) -> bool {
    t.nrows() == t.ncols() && spectral_norm(t) <= 1.0 + CONTRACTION_TOL
}

fn require_analytic(f: &Polynomial) -> Result<()> {
    if f.domain != Domain::Circle {
        return Err(Error::InvalidArgument("contraction calculus needs an analytic polynomial on the circle".into()));
    }
    Ok(())
}

/// f(T) by Horner's rule, checked against ‖f(T)‖ ≤ max_𝕋 |f|.
pub fn poly_func_of(t: &ContractionMatrix, f: &Polynomial) -> Result<CMat> {
    require_analytic(f)?;
    let n = t.dim();
    let terms = f.terms();
    let deg = f.degree();
    let mut acc = CMat::zeros(n, n);
    if terms.len() * (usize::BITS - deg.leading_zeros()) as usize * 2 < deg {
        // Sparse: binary powers T^{2^j}, then one product chain per term.
        let mut squares = vec![t.matrix().clone()];
        while (1usize << squares.len()) <= deg {
            let last = squares.last().expect("nonempty");
            squares.push(last * last);
        }
        for (k, c) in terms {
            let mut p = identity(n);
            for (j, sq) in squares.iter().enumerate() {
                if k >> j & 1 == 1 {
                    p = &p * sq;
                }
            }
            acc += p * c;
        }
    } else {
        for &c in f.coeffs.iter().rev() {
            acc = &acc * t.matrix() + identity(n) * c;
        }
    }
    let norm = spectral_norm(&acc);
    let bound = f.circle_sup(VON_NEUMANN_POINTS);
    if norm > (1.0 + 1e-8) * bound + 1e-14 {
        return Err(Error::VonNeumann { norm, bound });
    }
    Ok(acc)
}

/// D = (I − X*X)^{1/2} and D_* = (I − XX*)^{1/2} from one SVD, so that
/// X D = D_* X holds to rounding.
fn defects(t: &CMat) -> (CMat, CMat) {
    let svd = t.clone().svd(true, true);
    let w = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let n = t.nrows();
    let root = |k: usize| (1.0 - svd.singular_values[k] * svd.singular_values[k]).max(0.0).sqrt();
    let scale_cols = |m: &CMat| {
        let mut m = m.clone();
        for k in 0..n {
            let r = root(k);
            for i in 0..n {
                m[(i, k)] *= r;
            }
        }
        m
    };
    let v = vt.adjoint();
    let d = scale_cols(&v) * &vt;
    let d_star = scale_cols(&w) * w.adjoint();
    (d, d_star)
}

/// Unitary 𝒰 on H^{d+1} with P_H 𝒰^k|_H = T^k for 0 ≤ k ≤ d.
#[derive(Clone, Debug)]
pub struct FiniteUnitaryDilation {
    pub unitary: CMat,
    pub block: usize,
    pub degree: usize,
}

/// Block matrix with first column (T, D_T, 0, …), last column (D_{T*}, −T*, 0, …)
/// and identities on the subdiagonal from block 1 to block d.
pub fn dilate(t: &ContractionMatrix, d: usize) -> Result<FiniteUnitaryDilation> {
    if d == 0 {
        return Err(Error::InvalidArgument("dilation degree must be at least 1".into()));
    }
    let n = t.dim();
    let tm = t.matrix();
    let (dt, dt_star) = defects(tm);
    let size = (d + 1) * n;
    let mut u = CMat::zeros(size, size);
    let mut put = |bi: usize, bj: usize, m: &CMat| u.view_mut((bi * n, bj * n), (n, n)).copy_from(m);
    put(0, 0, tm);
    put(1, 0, &dt);
    put(0, d, &dt_star);
    put(1, d, &(-tm.adjoint()));
    let id = identity(n);
    for k in 1..d {
        put(k + 1, k, &id);
    }
    let defect = unitary_defect(&u);
    if defect > CONTRACTION_TOL {
        return Err(Error::NotUnitary { defect });
    }
    Ok(FiniteUnitaryDilation { unitary: u, block: n, degree: d })
}

impl FiniteUnitaryDilation {
    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    /// J X J*: X placed in the leading block.
    pub fn embed(&self, x: &CMat) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        m.view_mut((0, 0), (self.block, self.block)).copy_from(x);
        m
    }

    /// P_H Y|_H.
    pub fn compress(&self, y: &CMat) -> CMat {
        y.view((0, 0), (self.block, self.block)).into_owned()
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitary_defect(&self.unitary)
    }

    /// max_{0≤k≤d} ‖P 𝒰^k|_H − T^k‖.
    pub fn power_residual(&self, t: &CMat) -> f64 {
        let mut uk = identity(self.dim());
        let mut tk = identity(self.block);
        let mut worst = 0.0f64;
        for k in 0..=self.degree {
            if k > 0 {
                uk = &uk * &self.unitary;
                tk = &tk * t;
            }
            worst = worst.max(spectral_norm(&(self.compress(&uk) - &tk)));
        }
        worst
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        eig_unitary(&self.unitary)
    }
}

/// Δ ↦ P_H E_𝒰(Δ)|_H, stored as one compressed atom per eigenvalue of 𝒰.
#[derive(Clone, Debug)]
pub struct SemiSpectralSampler {
    pub atoms: Vec<(C64, CMat)>,
    pub block: usize,
}

impl SemiSpectralSampler {
    pub fn new(dilation: &FiniteUnitaryDilation) -> Result<Self> {
        let e = dilation.spectral()?;
        let n = dilation.block;
        let atoms = e
            .values
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let v = e.vectors.view((0, i), (n, 1)).into_owned();
                (z, &v * v.adjoint())
            })
            .collect();
        Ok(SemiSpectralSampler { atoms, block: n })
    }

    /// ℰ of the arc {e^{iθ}: lo ≤ θ < hi}, angles taken in (−π, π].
    pub fn measure(&self, lo: f64, hi: f64) -> CMat {
        let mut m = CMat::zeros(self.block, self.block);
        for (z, a) in &self.atoms {
            let th = z.arg();
            if th >= lo && th < hi {
                m += a;
            }
        }
        m
    }

    /// ∫ ζ^k dℰ(ζ).
    pub fn moment(&self, k: i32) -> CMat {
        let mut m = CMat::zeros(self.block, self.block);
        for (z, a) in &self.atoms {
            m += a * z.powi(k);
        }
        m
    }

    pub fn total_mass_defect(&self) -> f64 {
        spectral_norm(&(self.moment(0) - identity(self.block)))
    }

    /// Smallest eigenvalue over all atoms; nonnegative up to rounding.
    pub fn min_atom_eigenvalue(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(_, a)| {
                let h = (a + a.adjoint()).scale(0.5);
                h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct SemiSpectralDoi {
    pub result: CMat,
    pub residual_vs_direct: f64,
}

/// ∬ 𝔇f(ζ, τ) dℰ_R(ζ) (R − T) dℰ_T(τ) through dilations of degree
/// `degree` (default deg f + 1), compared with f(R) − f(T).
pub fn semi_spectral_doi(
    f: &Polynomial,
    t: &ContractionMatrix,
    r: &ContractionMatrix,
    degree: Option<usize>,
) -> Result<SemiSpectralDoi> {
    require_analytic(f)?;
    if t.dim() != r.dim() {
        return Err(Error::DimensionMismatch("T and R differ in size".into()));
    }
    let d = degree.unwrap_or(f.degree() + 1).max(1);
    let ut = dilate(t, d)?;
    let ur = dilate(r, d)?;
    let (et, er) = (ut.spectral()?, ur.spectral()?);
    let x = ur.embed(&(r.matrix() - t.matrix()));
    let big = doi(&BivariateSymbol::divided_difference(f), &er, &et, &x)?;
    let result = ur.compress(&big);
    let direct = poly_func_of(r, f)? - poly_func_of(t, f)?;
    let residual_vs_direct = spectral_norm(&(&direct - &result));
    Ok(SemiSpectralDoi { result, residual_vs_direct })
}

/// Compressed multiple operator integral ∫⋯∫ 𝔇^m f dℰ₁ X₁ dℰ₂ ⋯ X_m dℰ_{m+1}
/// over dilations of the given contractions.
pub fn semi_spectral_moi(
    f: &Polynomial,
    points: &[ContractionMatrix],
    factors: &[CMat],
    degree: usize,
) -> Result<CMat> {
    require_analytic(f)?;
    let dils = points.iter().map(|p| dilate(p, degree)).collect::<Result<Vec<_>>>()?;
    let specs = dils.iter().map(|d| d.spectral()).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SpectralDecomposition> = specs.iter().collect();
    let big: Vec<CMat> = factors.iter().map(|x| dils[0].embed(x)).collect();
    let m = moi_with_limit(f, &refs, &big, factors.len().max(1))?;
    Ok(dils[0].compress(&m))
}

#[derive(Clone, Debug)]
pub struct LemmaMcReport {
    pub lhs: CMat,
    pub rhs: CMat,
    pub residual: f64,
}

/// ∑_k (−1)^k C(m,k) f(P_k) against (m!/m^m) ∫ 𝔇^m f dℰ₀ (T−R) dℰ₁ ⋯ (T−R) dℰ_m,
/// where P_k = T + (k/m)(R − T) and ℰ_k is a semi-spectral measure of P_k.
pub fn lemma_mc(f: &Polynomial, t: &ContractionMatrix, r: &ContractionMatrix, m: usize) -> Result<LemmaMcReport> {
    require_analytic(f)?;
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("m must lie in 1..=3, got {m}")));
    }
    if t.dim() != r.dim() {
        return Err(Error::DimensionMismatch("T and R differ in size".into()));
    }
    let diff = r.matrix() - t.matrix();
    let points = (0..=m)
        .map(|k| ContractionMatrix::new(t.matrix() + diff.scale(k as f64 / m as f64)))
        .collect::<Result<Vec<_>>>()?;
    let n = t.dim();
    let mut lhs = CMat::zeros(n, n);
    for (k, p) in points.iter().enumerate() {
        let w = crate::binomial(m as u64, k as u64) as f64 * if k % 2 == 0 { 1.0 } else { -1.0 };
        lhs += poly_func_of(p, f)?.scale(w);
    }
    let degree = f.degree().max(1);
    let factors = vec![-diff; m];
    let scale = (1..=m).product::<usize>() as f64 / (m as f64).powi(m as i32);
    let rhs = semi_spectral_moi(f, &points, &factors, degree)?.scale(scale);
    let residual = spectral_norm(&(&lhs - &rhs));
    Ok(LemmaMcReport { lhs, rhs, residual })
}

pub fn lemma_mc_residual(f: &Polynomial, t: &ContractionMatrix, r: &ContractionMatrix, m: usize) -> Result<f64> {
    Ok(lemma_mc(f, t, r, m)?.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random, C64};
    use crate::matrix_calc::func_of_unitary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(rng: &mut ChaCha8Rng, deg: usize) -> Polynomial {
        Polynomial::analytic((0..=deg).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    fn contraction(rng: &mut ChaCha8Rng, n: usize) -> ContractionMatrix {
        let s = rng.random_range(0.2..0.99);
        ContractionMatrix::new(random::contraction(rng, n, s)).unwrap()
    }

    #[test]
    fn contraction_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(check_contraction(&random::haar_unitary(&mut rng, 3)));
        assert!(!check_contraction(&identity(2).scale(2.0)));
        assert!(check_contraction(&random::contraction(&mut rng, 4, 0.9)));
        assert!(matches!(ContractionMatrix::new(identity(2).scale(2.0)), Err(Error::NotContraction { .. })));
    }

    #[test]
    fn polynomial_calculus() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = contraction(&mut rng, 3);
        let z3 = Polynomial::monomial(3, Domain::Circle);
        let cube = t.matrix() * t.matrix() * t.matrix();
        assert!(spectral_norm(&(poly_func_of(&t, &z3).unwrap() - cube)) < 1e-14);
        let one = Polynomial::analytic(vec![C64::new(1.0, 0.0)]);
        assert!(spectral_norm(&(poly_func_of(&t, &one).unwrap() - identity(3))) < 1e-15);
        let u = ContractionMatrix::new(random::haar_unitary(&mut rng, 3)).unwrap();
        let f = poly(&mut rng, 5);
        let spectral = func_of_unitary(u.matrix(), &f).unwrap();
        assert!(spectral_norm(&(poly_func_of(&u, &f).unwrap() - spectral)) < 1e-12);
        assert!(poly_func_of(&t, &Polynomial::identity()).is_err());
        let lac = Polynomial::analytic_lacunary(8, 0.5);
        let mut dense = CMat::zeros(3, 3);
        let mut tk = identity(3);
        for k in 0..=lac.degree() {
            dense += &tk * lac.coeff(k);
            tk = &tk * t.matrix();
        }
        assert!(spectral_norm(&(poly_func_of(&t, &lac).unwrap() - dense)) < 1e-13);
    }

    #[test]
    fn zero_dilates_to_cyclic_shift() {
        let t = ContractionMatrix::new(CMat::zeros(1, 1)).unwrap();
        let d = dilate(&t, 2).unwrap();
        let expect = CMat::from_fn(3, 3, |i, j| C64::new(if (i + 3 - j) % 3 == 1 { 1.0 } else { 0.0 }, 0.0));
        assert!(spectral_norm(&(&d.unitary - expect)) < 1e-15);
        assert!(d.power_residual(t.matrix()) < 1e-15);
    }

    #[test]
    fn unitary_dilates_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random::haar_unitary(&mut rng, 3);
        let d = dilate(&ContractionMatrix::new(u.clone()).unwrap(), 3).unwrap();
        assert!(spectral_norm(&(d.compress(&d.unitary) - &u)) < 1e-14);
        assert!(d.unitary.view((0, 3), (3, 9)).iter().all(|z| z.norm() < 1e-7));
        assert!(d.power_residual(&u) < 1e-13);
    }

    #[test]
    fn random_dilations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(1..=4);
            let t = contraction(&mut rng, n);
            let deg = rng.random_range(1..=6);
            let d = dilate(&t, deg).unwrap();
            assert!(d.unitarity_residual() < 1e-10);
            assert!(d.power_residual(t.matrix()) < 1e-10);
        }
    }

    #[test]
    fn semi_spectral_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = contraction(&mut rng, 3);
        let d = dilate(&t, 4).unwrap();
        let s = SemiSpectralSampler::new(&d).unwrap();
        assert!(s.total_mass_defect() < 1e-10);
        assert!(s.min_atom_eigenvalue() > -1e-10);
        let mut tk = identity(3);
        for k in 0..=4 {
            assert!(spectral_norm(&(s.moment(k) - &tk)) < 1e-10, "k={k}");
            tk = &tk * t.matrix();
        }
        let pi = std::f64::consts::PI;
        let halves = s.measure(-pi - 1.0, 0.0) + s.measure(0.0, pi + 1.0);
        assert!(spectral_norm(&(halves - identity(3))) < 1e-10);
    }

    #[test]
    fn semi_spectral_doi_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let deg = rng.random_range(1..=6);
            let f = poly(&mut rng, deg);
            let t = contraction(&mut rng, 3);
            let r = contraction(&mut rng, 3);
            let s = semi_spectral_doi(&f, &t, &r, None).unwrap();
            assert!(s.residual_vs_direct < 1e-8);
            let other = semi_spectral_doi(&f, &t, &r, Some(f.degree() + 4)).unwrap();
            assert!(spectral_norm(&(&s.result - &other.result)) < 1e-9);
        }
        let f = poly(&mut rng, 4);
        let t = contraction(&mut rng, 2);
        assert!(spectral_norm(&semi_spectral_doi(&f, &t, &t, None).unwrap().result) < 1e-13);
        let u = random::haar_unitary(&mut rng, 3);
        let v = random::haar_unitary(&mut rng, 3);
        let (cu, cv) = (ContractionMatrix::new(u.clone()).unwrap(), ContractionMatrix::new(v.clone()).unwrap());
        let plain = doi(
            &BivariateSymbol::divided_difference(&f),
            &eig_unitary(&v).unwrap(),
            &eig_unitary(&u).unwrap(),
            &(&v - &u),
        )
        .unwrap();
        let s = semi_spectral_doi(&f, &cu, &cv, None).unwrap();
        assert!(spectral_norm(&(s.result - plain)) < 1e-10);
    }

    #[test]
    fn lemma_mc_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cube = Polynomial::monomial(3, Domain::Circle);
        let one = |z: C64| ContractionMatrix::new(CMat::from_element(1, 1, z)).unwrap();
        let (t, r) = (one(C64::new(0.3, 0.4)), one(C64::new(-0.5, 0.1)));
        assert!(lemma_mc_residual(&cube, &t, &r, 2).unwrap() < 1e-10);
        let a = contraction(&mut rng, 2);
        assert!(lemma_mc_residual(&cube, &a, &a, 2).unwrap() < 1e-14);
        for _ in 0..5 {
            let f = poly(&mut rng, 4);
            let t = contraction(&mut rng, 2);
            let r = contraction(&mut rng, 2);
            assert!(lemma_mc_residual(&f, &t, &r, 2).unwrap() < 1e-8);
            assert!(lemma_mc_residual(&f, &t, &r, 3).unwrap() < 1e-8);
        }
    }
}
