//! Numerical laboratory for Hölder–Zygmund estimates of functions of operators.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod function;
pub mod function_analysis;
pub mod linalg;
pub mod matrix_calc;
pub mod moduli;
pub mod set_combinatorics;
pub mod contraction_dilation;
pub mod bounds_verifier;
pub mod cli_report;
pub mod extremal_search;

pub use error::{Error, Result};

/// C(n, k) in u64; panics on overflow.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.checked_mul(n - i).expect("binomial overflow") / (i + 1);
    }
    r
}
