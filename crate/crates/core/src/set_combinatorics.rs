//! Index-set calculus for binomial differences of functions of unitaries:
//! ancestor evidences, the κ_J weights, T(j,k) and the terms I_J(𝒰, f).

use std::fmt;
use std::io::Write;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::binomial;
use crate::error::{Error, Result};
use crate::function::FunctionModel;
use crate::linalg::{eig_unitary, spectral_norm, CMat, SpectralDecomposition};
use crate::matrix_calc::{func_of_spec, moi_with_limit};

pub const MAX_N: u32 = 16;

/// Finite set {j₁ < … < j_d} of positive integers, stored as a bitmask (bit j−1).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(u32);

impl IndexSet {
    pub fn new(elems: &[u32]) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::InvalidArgument("index set must be nonempty".into()));
        }
        let mut mask = 0u32;
        let mut prev = 0;
        for &j in elems {
            if j <= prev || j > MAX_N {
                return Err(Error::InvalidArgument(format!(
                    "index set must be strictly increasing in 1..={MAX_N}, got {elems:?}"
                )));
            }
            mask |= 1 << (j - 1);
            prev = j;
        }
        Ok(IndexSet(mask))
    }

    pub fn from_mask(mask: u32) -> Result<Self> {
        if mask == 0 || mask >> MAX_N != 0 {
            return Err(Error::InvalidArgument(format!("bad index mask {mask:#x}")));
        }
        Ok(IndexSet(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn elements(self) -> Vec<u32> {
        (0..MAX_N).filter(|b| self.0 >> b & 1 == 1).map(|b| b + 1).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn min(self) -> u32 {
        self.0.trailing_zeros() + 1
    }

    pub fn max(self) -> u32 {
        32 - self.0.leading_zeros()
    }

    pub fn contains(self, j: u32) -> bool {
        (1..=MAX_N).contains(&j) && self.0 >> (j - 1) & 1 == 1
    }

    /// J + 1.
    pub fn shifted(self) -> Result<Self> {
        IndexSet::from_mask(self.0 << 1)
    }

    pub fn union(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 | other.0)
    }

    /// Prefix splits (J′, J″) with J′, J″ nonempty and max J′ < min J″.
    pub fn splits(self) -> Vec<(IndexSet, IndexSet)> {
        let e = self.elements();
        (1..e.len())
            .map(|p| {
                (
                    IndexSet::new(&e[..p]).expect("prefix"),
                    IndexSet::new(&e[p..]).expect("suffix"),
                )
            })
            .collect()
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elements().iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// All sets with maximal element n.
pub fn sets_with_max(n: u32) -> Vec<IndexSet> {
    assert!((1..=MAX_N).contains(&n));
    let top = 1u32 << (n - 1);
    (0..top).map(|low| IndexSet(top | low)).collect()
}

/// Number of evidences that J₁ is an ancestor of J₂.
pub fn evidence_count(j1: IndexSet, j2: IndexSet) -> u64 {
    j2.splits()
        .into_iter()
        .filter(|&(a, b)| IndexSet(a.0 | (b.0 >> 1)) == j1)
        .count() as u64
}

/// κ_J from the ancestor recursion seeded by κ_{{1}} = 1.
pub struct KappaTable {
    n_max: u32,
    values: Vec<BigUint>,
}

impl KappaTable {
    pub fn build(n_max: u32) -> Result<Self> {
        if !(1..=MAX_N).contains(&n_max) {
            return Err(Error::InvalidArgument(format!("N_max must lie in 1..={MAX_N}")));
        }
        let mut values = vec![BigUint::zero(); 1usize << n_max];
        values[1] = BigUint::one();
        for n in 2..=n_max {
            for j in sets_with_max(n) {
                let mut acc = BigUint::zero();
                for (a, b) in j.splits() {
                    acc += &values[(a.0 | (b.0 >> 1)) as usize];
                }
                values[j.0 as usize] = acc;
            }
        }
        Ok(KappaTable { n_max, values })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn get(&self, j: IndexSet) -> Result<&BigUint> {
        if j.max() > self.n_max {
            return Err(Error::InvalidArgument(format!("{j} exceeds N_max = {}", self.n_max)));
        }
        Ok(&self.values[j.0 as usize])
    }

    /// |κ_J − ∑_{I with max I = max J − 1} #(I,J) κ_I| evaluated by brute force over all I.
    pub fn recursion_defect(&self, j: IndexSet) -> Result<BigUint> {
        let k = self.get(j)?.clone();
        if j.max() == 1 {
            return Ok(if k == BigUint::one() { BigUint::zero() } else { k });
        }
        let mut s = BigUint::zero();
        for i in sets_with_max(j.max() - 1) {
            let c = evidence_count(i, j);
            if c > 0 {
                s += self.get(i)? * c;
            }
        }
        Ok(if s > k { s - k } else { k - s })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["set", "kappa_recursive", "kappa_closed"])?;
        for n in 1..=self.n_max {
            for j in sets_with_max(n) {
                w.write_record([j.to_string(), self.values[j.0 as usize].to_string(), kappa_closed(j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KappaMode {
    Recursive,
    Closed,
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// (j_d − j₁)! / ∏_{s≥2} (j_s − j_{s−1})!.
pub fn kappa_closed(j: IndexSet) -> BigUint {
    let e = j.elements();
    let den = e.windows(2).fold(BigUint::one(), |acc, w| acc * factorial(w[1] - w[0]));
    factorial(j.max() - j.min()) / den
}

pub fn kappa(j: IndexSet, mode: KappaMode, table: &KappaTable) -> Result<BigUint> {
    match mode {
        KappaMode::Closed => Ok(kappa_closed(j)),
        KappaMode::Recursive => table.get(j).cloned(),
    }
}

/// Unitaries U₁, …, U_N with their spectral decompositions.
#[derive(Clone, Debug)]
pub struct UnitaryFamily {
    pub unitaries: Vec<CMat>,
    pub spectra: Vec<SpectralDecomposition>,
}

impl UnitaryFamily {
    pub fn new(unitaries: Vec<CMat>) -> Result<Self> {
        if unitaries.is_empty() {
            return Err(Error::InvalidArgument("empty unitary family".into()));
        }
        let n = unitaries[0].nrows();
        if unitaries.iter().any(|u| u.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("unitaries differ in size".into()));
        }
        let spectra = unitaries.iter().map(eig_unitary).collect::<Result<Vec<_>>>()?;
        Ok(UnitaryFamily { unitaries, spectra })
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    fn check(&self, j: u32) -> Result<()> {
        if j == 0 || j as usize > self.len() {
            Err(Error::InvalidArgument(format!("index {j} outside 1..={}", self.len())))
        } else {
            Ok(())
        }
    }
}

/// T(j,k) = ∑_{s=0}^{k−j} (−1)^s C(k−j, s) U_{j+s}.
pub fn t_factor(family: &UnitaryFamily, j: u32, k: u32) -> Result<CMat> {
    family.check(j)?;
    family.check(k)?;
    if j >= k {
        return Err(Error::InvalidArgument(format!("T(j,k) needs j < k, got ({j},{k})")));
    }
    let n = family.unitaries[0].nrows();
    let mut acc = CMat::zeros(n, n);
    for s in 0..=(k - j) {
        let w = binomial((k - j) as u64, s as u64) as f64 * if s % 2 == 0 { 1.0 } else { -1.0 };
        acc += family.unitaries[(j + s - 1) as usize].scale(w);
    }
    Ok(acc)
}

/// max over 1 ≤ j < k ≤ N−1 of ‖T(j,k) − T(j+1,k+1) − T(j,k+1)‖.
pub fn tjk_residual(family: &UnitaryFamily) -> Result<f64> {
    let n = family.len() as u32;
    let mut worst = 0.0f64;
    for j in 1..n {
        for k in (j + 1)..n {
            let r = t_factor(family, j, k)? - t_factor(family, j + 1, k + 1)? - t_factor(family, j, k + 1)?;
            worst = worst.max(spectral_norm(&r));
        }
    }
    Ok(worst)
}

/// I_J(𝒰, f): f(U_j) for J = {j}; otherwise the multiple operator integral of
/// 𝔇^{d−1}f over E_{j₁}, …, E_{j_d} with factors T(j_{s−1}, j_s).
pub fn i_j_term(family: &UnitaryFamily, j: IndexSet, f: &dyn FunctionModel) -> Result<CMat> {
    let e = j.elements();
    family.check(j.max())?;
    if e.len() == 1 {
        return func_of_spec(&family.spectra[(e[0] - 1) as usize], f);
    }
    let spectra: Vec<&SpectralDecomposition> = e.iter().map(|&k| &family.spectra[(k - 1) as usize]).collect();
    let factors = e.windows(2).map(|w| t_factor(family, w[0], w[1])).collect::<Result<Vec<_>>>()?;
    moi_with_limit(f, &spectra, &factors, MAX_N as usize)
}

#[derive(Clone, Debug, Serialize)]
pub struct GenReport {
    pub n: u32,
    pub residual: f64,
    pub lhs_norm: f64,
    pub terms: usize,
}

/// ‖∑_j (−1)^{j−1} C(N−1, j−1) f(U_j) − ∑_{max J = N} κ_J I_J(𝒰, f)‖.
pub fn verify_gen(n: u32, family: &UnitaryFamily, f: &dyn FunctionModel, table: &KappaTable) -> Result<GenReport> {
    if !(2..=6).contains(&n) {
        return Err(Error::InvalidArgument(format!("N must lie in 2..=6, got {n}")));
    }
    if family.len() < n as usize {
        return Err(Error::InvalidArgument(format!("need {n} unitaries, have {}", family.len())));
    }
    let dim = family.unitaries[0].nrows();
    let mut lhs = CMat::zeros(dim, dim);
    for j in 1..=n {
        let w = binomial((n - 1) as u64, (j - 1) as u64) as f64 * if j % 2 == 1 { 1.0 } else { -1.0 };
        lhs += func_of_spec(&family.spectra[(j - 1) as usize], f)?.scale(w);
    }
    let mut rhs = CMat::zeros(dim, dim);
    let mut terms = 0;
    for j in sets_with_max(n) {
        let k = table.get(j)?;
        if k.is_zero() {
            continue;
        }
        let kf = k.to_f64().expect("κ fits in f64");
        rhs += i_j_term(family, j, f)?.scale(kf);
        terms += 1;
    }
    Ok(GenReport {
        n,
        residual: spectral_norm(&(&lhs - rhs)),
        lhs_norm: spectral_norm(&lhs),
        terms,
    })
}

/// The sets on the right of the I_J − I_{J+1} expansion: for every proper
/// prefix Λ of J, Λ ∪ (Λ° + 1) and Λ ∪ (Λ• + 1); then J ∪ {max J + 1}.
pub fn oj_children(j: IndexSet) -> Result<Vec<IndexSet>> {
    let mut out = Vec::new();
    for (lam, rest) in j.splits() {
        out.push(lam.union(rest.shifted()?));
        let bullet = IndexSet(rest.0 | 1 << (lam.max() - 1));
        out.push(lam.union(bullet.shifted()?));
    }
    out.push(j.union(IndexSet::new(&[j.max() + 1])?));
    Ok(out)
}

/// ‖I_J − I_{J+1} − ∑ I_{child}‖ with N = max J + 1.
pub fn verify_oj(j: IndexSet, family: &UnitaryFamily, f: &dyn FunctionModel) -> Result<f64> {
    let lhs = i_j_term(family, j, f)? - i_j_term(family, j.shifted()?, f)?;
    let mut rhs = CMat::zeros(lhs.nrows(), lhs.ncols());
    for c in oj_children(j)? {
        rhs += i_j_term(family, c, f)?;
    }
    Ok(spectral_norm(&(lhs - rhs)))
}
