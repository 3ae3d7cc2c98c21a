//! Finite-dimensional spectral calculus: f(A), divided differences, double and
//! multiple operator integrals, Fréchet derivatives and Schur multiplier bounds.

pub mod divided;
pub mod integrals;
pub mod schur;

pub use divided::{dd_value, divided_diff, divided_diff_explicit, DividedDiffTable};
pub use integrals::{doi, doi_with_matrix, moi, moi_with_limit, BivariateSymbol};
pub use schur::{schur_norm_bounds, schur_norm_bounds_seeded, SchurBounds};

pub use crate::linalg::{eig, spectral_norm, HermitianMatrix, SpectralDecomposition};

use crate::binomial;
use crate::error::{Error, Result};
use crate::function::{Domain, FunctionModel};
use crate::linalg::{eig_hermitian, eig_unitary, identity, psd_sqrt, unitary_defect, CMat, UNITARY_TOL};

/// f(S) = U diag(f(λ)) U* for a decomposed operator S.
pub fn func_of_spec(d: &SpectralDecomposition, f: &dyn FunctionModel) -> Result<CMat> {
    d.apply(|z| f.value(z))
}

/// Polynomials on the line up to this degree are applied by matrix Horner.
pub const HORNER_MAX_DEGREE: usize = 8;

/// f(A) for Hermitian A.
pub fn func_of(a: &CMat, f: &dyn FunctionModel) -> Result<CMat> {
    if let Some(p) = f.as_polynomial() {
        if p.domain == Domain::Line && p.degree() <= HORNER_MAX_DEGREE {
            HermitianMatrix::new(a.clone())?;
            let n = a.nrows();
            let mut acc = CMat::zeros(n, n);
            for k in (0..=p.degree()).rev() {
                acc = &acc * a + identity(n) * p.coeff(k);
            }
            return Ok(acc);
        }
    }
    func_of_spec(&eig_hermitian(a)?, f)
}

/// f(U) for unitary U.
pub fn func_of_unitary(u: &CMat, f: &dyn FunctionModel) -> Result<CMat> {
    func_of_spec(&eig_unitary(u)?, f)
}

/// ‖f(A) − f(B) − ∬ 𝔇f dE_A (A − B) dE_B‖ / max(1, ‖f(A)‖, ‖f(B)‖).
pub fn bsf_residual(f: &dyn FunctionModel, a: &CMat, b: &CMat) -> Result<f64> {
    let (ea, eb) = (eig_hermitian(a)?, eig_hermitian(b)?);
    let (fa, fb) = (func_of_spec(&ea, f)?, func_of_spec(&eb, f)?);
    let rhs = doi(&BivariateSymbol::divided_difference(f), &ea, &eb, &(a - b))?;
    let scale = 1f64.max(spectral_norm(&fa)).max(spectral_norm(&fb));
    Ok(spectral_norm(&(fa - fb - rhs)) / scale)
}

/// Relative residual of ∑_j (−1)^{m−j} C(m,j) f(A + jK) = m! ∫ 𝔇^m f dE_A K dE_{A+K} ⋯ K dE_{A+mK}.
pub fn lemma_m_residual(f: &dyn FunctionModel, a: &CMat, k: &CMat, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let specs = (0..=m)
        .map(|j| eig_hermitian(&(a + k.scale(j as f64))))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SpectralDecomposition> = specs.iter().collect();
    let factorial = (1..=m).product::<usize>() as f64;
    let rhs = moi_with_limit(f, &refs, &vec![k.clone(); m], m.max(integrals::DEFAULT_MAX_ORDER))?.scale(factorial);
    let lhs = op_finite_diff(f, a, k, m)?;
    let scale = specs
        .iter()
        .map(|e| func_of_spec(e, f).map(|x| spectral_norm(&x)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    Ok(spectral_norm(&(lhs - rhs)) / scale)
}

/// ∑_{j=0}^m (−1)^{m−j} C(m,j) f(A + jK).
pub fn op_finite_diff(f: &dyn FunctionModel, a: &CMat, k: &CMat, m: usize) -> Result<CMat> {
    if a.shape() != k.shape() {
        return Err(Error::DimensionMismatch("A and K differ in shape".into()));
    }
    let mut acc = CMat::zeros(a.nrows(), a.ncols());
    for j in 0..=m {
        let w = binomial(m as u64, j as u64) as f64 * if (m - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += func_of(&(a + k.scale(j as f64)), f)?.scale(w);
    }
    Ok(acc)
}

/// Daleckii–Krein derivative d/dt f(A + tH) at t = 0.
pub fn frechet_derivative(f: &dyn FunctionModel, a: &CMat, h: &CMat) -> Result<CMat> {
    let d = eig_hermitian(a)?;
    doi(&BivariateSymbol::divided_difference(f), &d, &d, h)
}

/// Fréchet derivative at a decomposed point with a precomputed symbol.
pub fn frechet_with(phi: &CMat, d: &SpectralDecomposition, h: &CMat) -> Result<CMat> {
    doi_with_matrix(phi, d, d, h)
}

#[derive(Clone, Debug)]
pub struct SecondDifference {
    pub direct: CMat,
    pub via_n3: CMat,
    pub residual: f64,
}

/// f(𝒱U) − 2f(U) + f(𝒱*U) directly and through the three-point expansion
/// 2∭𝔇²f dE₁ (𝒱−I)U dE₂ (I−𝒱*)U dE₃ + ∬𝔇f dE₁ (𝒱−2I+𝒱*)U dE₃
/// with E₁, E₂, E₃ the spectral measures of 𝒱U, U, 𝒱*U.
pub fn unitary_second_diff(f: &dyn FunctionModel, u: &CMat, v: &CMat) -> Result<SecondDifference> {
    for m in [u, v] {
        let d = unitary_defect(m);
        if d > UNITARY_TOL {
            return Err(Error::NotUnitary { defect: d });
        }
    }
    let n = u.nrows();
    let i = identity(n);
    let u1 = v * u;
    let u3 = v.adjoint() * u;
    let (e1, e2, e3) = (eig_unitary(&u1)?, eig_unitary(u)?, eig_unitary(&u3)?);
    let direct = func_of_spec(&e1, f)? - func_of_spec(&e2, f)?.scale(2.0) + func_of_spec(&e3, f)?;
    let t12 = (v - &i) * u;
    let t23 = (&i - v.adjoint()) * u;
    let t13 = (v - i.scale(2.0) + v.adjoint()) * u;
    let triple = moi(f, &[&e1, &e2, &e3], &[t12, t23])?;
    let double = doi(&BivariateSymbol::divided_difference(f), &e1, &e3, &t13)?;
    let via_n3 = triple.scale(2.0) + double;
    let residual = spectral_norm(&(&direct - &via_n3));
    Ok(SecondDifference { direct, via_n3, residual })
}

/// n‖Y‖^{n−1}‖XY−YX‖ − ‖XYⁿ − YⁿX‖; nonnegative by the power commutator estimate.
pub fn lemma_pl_slack(x: &CMat, y: &CMat, n: u32) -> f64 {
    let yn = (0..n).fold(identity(y.nrows()), |acc, _| acc * y);
    let lhs = spectral_norm(&(x * &yn - &yn * x));
    let rhs = n as f64 * spectral_norm(y).powi(n as i32 - 1) * spectral_norm(&(x * y - y * x));
    rhs - lhs
}

/// ‖T‖‖XT−TX‖/(1−‖T‖²)^{1/2} − ‖(I−T²)^{1/2}X − X(I−T²)^{1/2}‖ for self-adjoint ‖T‖ < 1.
pub fn lemma_vl_slack(t: &CMat, x: &CMat) -> Result<f64> {
    let nt = spectral_norm(t);
    if nt >= 1.0 {
        return Err(Error::NotContraction { norm: nt });
    }
    let s = psd_sqrt(&(identity(t.nrows()) - t * t))?;
    let lhs = spectral_norm(&(&s * x - x * &s));
    let rhs = nt * spectral_norm(&(x * t - t * x)) / (1.0 - nt * nt).sqrt();
    Ok(rhs - lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{Domain, Elementary, Polynomial};
    use crate::function_analysis::PeriodicSignal;
    use crate::linalg::{from_real_diag, random, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random::gue(&mut rng, 4);
        assert!(spectral_norm(&(func_of(&a, &Polynomial::identity()).unwrap() - &a)) < 1e-13);
        let d = from_real_diag(&[0.0, 2f64.ln()]);
        let e = func_of(&d, &Elementary::Exp).unwrap();
        assert!(spectral_norm(&(e - from_real_diag(&[1.0, 2.0]))) < 1e-14);
    }

    #[test]
    fn homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random::gue(&mut rng, 5);
        let prod = crate::function::ClosureFunction::new("sincos", Domain::Line, |z| z.sin() * z.cos());
        let lhs = func_of(&a, &prod).unwrap();
        let rhs = func_of(&a, &Elementary::Sin).unwrap() * func_of(&a, &Elementary::Cos).unwrap();
        assert!(spectral_norm(&(lhs - rhs)) < 1e-11);
    }

    #[test]
    fn finite_differences_basic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::gue(&mut rng, 3);
        let k = random::gue(&mut rng, 3);
        let f = Elementary::Sin;
        let z = CMat::zeros(3, 3);
        assert!(spectral_norm(&op_finite_diff(&f, &a, &z, 2).unwrap()) < 1e-13);
        let d1 = op_finite_diff(&f, &a, &k, 1).unwrap();
        let direct = func_of(&(&a + &k), &f).unwrap() - func_of(&a, &f).unwrap();
        assert!(spectral_norm(&(d1 - direct)) < 1e-13);
        let one = |x: f64| CMat::from_element(1, 1, C64::new(x, 0.0));
        let s = op_finite_diff(&f, &one(0.3), &one(0.2), 3).unwrap()[(0, 0)].re;
        let scalar = crate::moduli::finite_diff(&f, 0.2, 3, 0.3).unwrap().re;
        assert!((s - scalar).abs() < 1e-14);
    }

    #[test]
    fn frechet_square_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random::gue(&mut rng, 4);
        let h = random::gue(&mut rng, 4);
        let sq = Polynomial::monomial(2, Domain::Line);
        let d = frechet_derivative(&sq, &a, &h).unwrap();
        assert!(spectral_norm(&(d - (&a * &h + &h * &a))) < 1e-12);
        let id = frechet_derivative(&Polynomial::identity(), &a, &h).unwrap();
        assert!(spectral_norm(&(id - &h)) < 1e-13);
    }

    #[test]
    fn frechet_first_order_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random::gue(&mut rng, 5);
        let h = random::gue(&mut rng, 5);
        let f = Elementary::Exp;
        let d = frechet_derivative(&f, &a, &h).unwrap();
        let fa = func_of(&a, &f).unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| spectral_norm(&((func_of(&(&a + h.scale(t)), &f).unwrap() - &fa).unscale(t) - &d)))
            .collect();
        let slope = (errs[0] / errs[2]).log10() / 2.0;
        assert!(slope >= 0.9, "slope {slope}");
    }

    #[test]
    fn second_difference_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random::haar_unitary(&mut rng, 3);
        let f = PeriodicSignal::new(vec![C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.3)]);
        let s = unitary_second_diff(&f, &u, &identity(3)).unwrap();
        assert!(spectral_norm(&s.direct) < 1e-13 && spectral_norm(&s.via_n3) < 1e-12);
        let v = random::haar_unitary(&mut rng, 3);
        let id = Polynomial::analytic(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let s = unitary_second_diff(&id, &u, &v).unwrap();
        let expect = (&v - identity(3).scale(2.0) + v.adjoint()) * &u;
        assert!(spectral_norm(&(s.direct - &expect)) < 1e-13);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn second_difference_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u = random::haar_unitary(&mut rng, 3);
            let v = random::haar_unitary(&mut rng, 3);
            let d = rng.random_range(1..=5);
            let coeffs: Vec<C64> = (0..2 * d + 1)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let f = PeriodicSignal::new(coeffs);
            assert!(unitary_second_diff(&f, &u, &v).unwrap().residual < 1e-9);
        }
    }

    #[test]
    fn power_and_square_root_commutator_lemmas() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let x = random::gaussian(&mut rng, n, n);
            let y = random::gaussian(&mut rng, n, n);
            assert!(lemma_pl_slack(&x, &y, rng.random_range(1..=6)) >= -1e-12 * (1.0 + spectral_norm(&y).powi(6)));
            let t = random::hermitian_in(&mut rng, n, -0.95, 0.95);
            assert!(lemma_vl_slack(&t, &x).unwrap() >= -1e-12);
        }
    }
}
