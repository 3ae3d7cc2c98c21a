//! Two-sided bounds for the norm of the Schur multiplier X ↦ Φ ∘ X.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{random, spectral_norm, CMat, C64};

#[derive(Clone, Debug, Serialize)]
pub struct SchurBounds {
    pub lower: f64,
    pub upper: f64,
    /// Relative gap between the bounds fell below 1e-6.
    pub converged: bool,
}

fn top_singular_pair(m: &CMat) -> (f64, Vec<C64>, Vec<C64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let (mut best, mut idx) = (-1.0, 0);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > best {
            best = s;
            idx = i;
        }
    }
    let uu = (0..u.nrows()).map(|i| u[(i, idx)]).collect();
    let vv = (0..vt.ncols()).map(|j| vt[(idx, j)].conj()).collect();
    (best.max(0.0), uu, vv)
}

/// Unitary (partial isometry) factor of the polar decomposition.
fn polar_factor(g: &CMat) -> CMat {
    let svd = g.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

fn ratio(phi: &CMat, x: &CMat) -> f64 {
    let nx = spectral_norm(x);
    if nx == 0.0 {
        0.0
    } else {
        spectral_norm(&phi.component_mul(x)) / nx
    }
}

/// Alternating ascent: X ← polar(Φ̄ ∘ u v*) with (u, v) the top singular pair of Φ ∘ X.
fn ascend(phi: &CMat, mut x: CMat, sweeps: usize) -> f64 {
    let conj_phi = phi.map(|z| z.conj());
    let mut best = ratio(phi, &x);
    for _ in 0..sweeps {
        let (_, u, v) = top_singular_pair(&phi.component_mul(&x));
        let uv = CMat::from_fn(phi.nrows(), phi.ncols(), |i, j| u[i] * v[j].conj());
        let g = conj_phi.component_mul(&uv);
        if spectral_norm(&g) == 0.0 {
            break;
        }
        x = polar_factor(&g);
        let r = ratio(phi, &x);
        if r <= best * (1.0 + 1e-14) {
            best = best.max(r);
            break;
        }
        best = r;
    }
    best
}

/// Exact factorization Φ_ij = ∑_k u_ik v_jk built from the SVD of the
/// diagonally rescaled symbol; returns (max_i |u_i|)(max_j |v_j|) together
/// with the squared row and column norms.
fn factorization_bound(phi: &CMat, d: &[f64], e: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (r, c) = phi.shape();
    let m = CMat::from_fn(r, c, |i, j| phi[(i, j)] / (d[i] * e[j]).sqrt());
    let svd = m.svd(true, true);
    let w = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let s = &svd.singular_values;
    let rows: Vec<f64> = (0..r)
        .map(|i| d[i] * (0..s.len()).map(|k| w[(i, k)].norm_sqr() * s[k]).sum::<f64>())
        .collect();
    let cols: Vec<f64> = (0..c)
        .map(|j| e[j] * (0..s.len()).map(|k| vt[(k, j)].norm_sqr() * s[k]).sum::<f64>())
        .collect();
    let mr = rows.iter().cloned().fold(0.0, f64::max);
    let mc = cols.iter().cloned().fold(0.0, f64::max);
    ((mr * mc).sqrt(), rows, cols)
}

/// Lower bound from random and adversarial test matrices, upper bound from
/// balanced SVD factorizations of Φ.
pub fn schur_norm_bounds(phi: &CMat, trials: usize, sweeps: usize) -> SchurBounds {
    schur_norm_bounds_seeded(phi, trials, sweeps, 0x5eed)
}

pub fn schur_norm_bounds_seeded(phi: &CMat, trials: usize, sweeps: usize, seed: u64) -> SchurBounds {
    let (r, c) = phi.shape();
    if r == 0 || c == 0 {
        return SchurBounds { lower: 0.0, upper: 0.0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut lower = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ones = CMat::from_element(r, c, C64::new(1.0, 0.0));
    lower = lower.max(ascend(phi, ones, sweeps));
    let (mut ai, mut aj) = (0, 0);
    for i in 0..r {
        for j in 0..c {
            if phi[(i, j)].norm() > phi[(ai, aj)].norm() {
                ai = i;
                aj = j;
            }
        }
    }
    let mut unit = CMat::zeros(r, c);
    unit[(ai, aj)] = C64::new(1.0, 0.0);
    lower = lower.max(ascend(phi, unit, sweeps));
    for _ in 0..trials {
        let x = random::gaussian(&mut rng, r, c);
        lower = lower.max(ascend(phi, x, sweeps));
    }

    let mut d = vec![1.0; r];
    let mut e = vec![1.0; c];
    let (mut upper, _, _) = factorization_bound(phi, &d, &e);
    for _ in 0..sweeps.max(1) * 4 {
        let (b, rows, cols) = factorization_bound(phi, &d, &e);
        upper = upper.min(b);
        let mean_r = rows.iter().sum::<f64>() / r as f64;
        let mean_c = cols.iter().sum::<f64>() / c as f64;
        if mean_r == 0.0 || mean_c == 0.0 {
            break;
        }
        for i in 0..r {
            if rows[i] > 0.0 {
                d[i] *= (mean_r / rows[i]).powf(0.5);
            }
        }
        for j in 0..c {
            if cols[j] > 0.0 {
                e[j] *= (mean_c / cols[j]).powf(0.5);
            }
        }
        let (dm, em) = (d.iter().cloned().fold(0.0, f64::max), e.iter().cloned().fold(0.0, f64::max));
        d.iter_mut().for_each(|x| *x /= dm);
        e.iter_mut().for_each(|x| *x /= em);
    }
    SchurBounds {
        lower,
        upper,
        converged: upper - lower <= 1e-6 * upper.max(1e-300),
    }
}
