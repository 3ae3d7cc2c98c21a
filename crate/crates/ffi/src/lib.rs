//! C ABI over `hzlab`.
//!
//! Matrices are passed as opaque `HzMatrix` handles built from row-major
//! real and imaginary parts. Every call returns an `HzStatus`; on failure
//! `hz_last_error_message` describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hzlab::bounds_verifier::{bks_check, OperatorSampler};
use hzlab::cli_report::{run, RunConfig};
use hzlab::function::Polynomial;
use hzlab::linalg::{eig_hermitian, spectral_norm, CMat, SpectralDecomposition, C64};
use hzlab::matrix_calc::{divided_diff, doi, frechet_derivative, BivariateSymbol};
use hzlab::moduli::{omega_star, ModulusOfContinuity};
use hzlab::set_combinatorics::{kappa_closed, IndexSet};
use hzlab::Error;
use num_traits::ToPrimitive;

/// Result code of every `hz_*` call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotHermitian = 4,
    Numeric = 5,
    Invariant = 6,
    Config = 7,
    Io = 8,
    Overflow = 9,
    Panic = 10,
}

/// Dense complex matrix.
pub struct HzMatrix(CMat);

/// Eigen-decomposition of a Hermitian matrix.
pub struct HzSpectral(SpectralDecomposition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HzStatus {
    match e {
        Error::DimensionMismatch(_) => HzStatus::DimensionMismatch,
        Error::NotHermitian { .. } => HzStatus::NotHermitian,
        Error::InvalidArgument(_) | Error::UnknownKind(_) | Error::UnknownTag(_) => HzStatus::InvalidArgument,
        Error::Config(_) => HzStatus::Config,
        Error::Invariant(_) => HzStatus::Invariant,
        Error::Io(_) => HzStatus::Io,
        _ => HzStatus::Numeric,
    }
}

struct Fail(HzStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> HzStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HzStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            HzStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(HzStatus::NullPointer, format!("{what} is null"))
}

unsafe fn mat<'a>(m: *const HzMatrix, what: &str) -> Result<&'a CMat, Fail> {
    m.as_ref().map(|h| &h.0).ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn poly(coeffs: *const f64, n: usize) -> Result<Polynomial, Fail> {
    if n == 0 {
        return Err(Fail(HzStatus::InvalidArgument, "polynomial needs at least one coefficient".into()));
    }
    Ok(Polynomial::real(slice(coeffs, n, "coeffs")?))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_box<T>(out: *mut *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(Box::into_raw(Box::new(v)));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a `rows` x `cols` matrix from row-major parts. `im` may be NULL.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `rows * cols` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_matrix_new(
    rows: usize,
    cols: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut HzMatrix,
) -> HzStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or(Fail(HzStatus::Overflow, "rows * cols overflows".into()))?;
        if n == 0 {
            return Err(Fail(HzStatus::InvalidArgument, "empty matrix".into()));
        }
        let re = slice(re, n, "re")?;
        let im = if im.is_null() { None } else { Some(slice(im, n, "im")?) };
        let m = CMat::from_fn(rows, cols, |i, j| {
            let k = i * cols + j;
            C64::new(re[k], im.map_or(0.0, |v| v[k]))
        });
        put_box(out, HzMatrix(m), "out")
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn hz_matrix_free(m: *mut HzMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_matrix_shape(m: *const HzMatrix, rows: *mut usize, cols: *mut usize) -> HzStatus {
    guard(|| {
        let a = mat(m, "m")?;
        put(rows, a.nrows(), "rows")?;
        put(cols, a.ncols(), "cols")
    })
}

/// Copies the entries out in row-major order. `im` may be NULL.
///
/// # Safety
/// `re` (and `im` when non-null) must have room for rows * cols doubles.
#[no_mangle]
pub unsafe extern "C" fn hz_matrix_get(m: *const HzMatrix, re: *mut f64, im: *mut f64) -> HzStatus {
    guard(|| {
        let a = mat(m, "m")?;
        if re.is_null() {
            return Err(null("re"));
        }
        let cols = a.ncols();
        for i in 0..a.nrows() {
            for j in 0..cols {
                let z = a[(i, j)];
                re.add(i * cols + j).write(z.re);
                if !im.is_null() {
                    im.add(i * cols + j).write(z.im);
                }
            }
        }
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_spectral_norm(m: *const HzMatrix, out: *mut f64) -> HzStatus {
    guard(|| put(out, spectral_norm(mat(m, "m")?), "out"))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_eig_hermitian(m: *const HzMatrix, out: *mut *mut HzSpectral) -> HzStatus {
    guard(|| {
        let d = eig_hermitian(mat(m, "m")?)?;
        put_box(out, HzSpectral(d), "out")
    })
}

/// # Safety
/// `s` must be NULL or a live spectral handle.
#[no_mangle]
pub unsafe extern "C" fn hz_spectral_free(s: *mut HzSpectral) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_spectral_dim(s: *const HzSpectral, out: *mut usize) -> HzStatus {
    guard(|| put(out, s.as_ref().ok_or_else(|| null("s"))?.0.dim(), "out"))
}

/// # Safety
/// `values` must have room for `hz_spectral_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hz_spectral_values(s: *const HzSpectral, values: *mut f64) -> HzStatus {
    guard(|| {
        let d = &s.as_ref().ok_or_else(|| null("s"))?.0;
        if values.is_null() {
            return Err(null("values"));
        }
        for (k, v) in d.real_values().into_iter().enumerate() {
            values.add(k).write(v);
        }
        Ok(())
    })
}

/// Eigenvectors as the columns of a new matrix.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_spectral_vectors(s: *const HzSpectral, out: *mut *mut HzMatrix) -> HzStatus {
    guard(|| {
        let d = &s.as_ref().ok_or_else(|| null("s"))?.0;
        put_box(out, HzMatrix(d.vectors.clone()), "out")
    })
}

/// Divided difference of order `n_nodes - 1` of the real polynomial
/// ∑ coeffs[k] t^k. Repeated nodes are allowed.
///
/// # Safety
/// `coeffs` and `nodes` must point to the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn hz_divided_difference_poly(
    coeffs: *const f64,
    n_coeffs: usize,
    nodes: *const f64,
    n_nodes: usize,
    out: *mut f64,
) -> HzStatus {
    guard(|| {
        let f = poly(coeffs, n_coeffs)?;
        let x = slice(nodes, n_nodes, "nodes")?;
        if x.is_empty() {
            return Err(Fail(HzStatus::InvalidArgument, "need at least one node".into()));
        }
        put(out, divided_diff(&f, x, x.len() - 1)?, "out")
    })
}

/// Double operator integral of the divided difference of a real
/// polynomial: f(A) X - X f(B) when X = A X' - X' B.
///
/// # Safety
/// `a`, `b`, `x` must be live handles; `coeffs` must hold `n_coeffs` doubles.
#[no_mangle]
pub unsafe extern "C" fn hz_doi_poly(
    coeffs: *const f64,
    n_coeffs: usize,
    a: *const HzMatrix,
    b: *const HzMatrix,
    x: *const HzMatrix,
    out: *mut *mut HzMatrix,
) -> HzStatus {
    guard(|| {
        let f = poly(coeffs, n_coeffs)?;
        let ea = eig_hermitian(mat(a, "a")?)?;
        let eb = eig_hermitian(mat(b, "b")?)?;
        let r = doi(&BivariateSymbol::divided_difference(&f), &ea, &eb, mat(x, "x")?)?;
        put_box(out, HzMatrix(r), "out")
    })
}

/// Fréchet derivative of A ↦ f(A) at `a` in direction `h`.
///
/// # Safety
/// `a`, `h` must be live handles; `coeffs` must hold `n_coeffs` doubles.
#[no_mangle]
pub unsafe extern "C" fn hz_frechet_poly(
    coeffs: *const f64,
    n_coeffs: usize,
    a: *const HzMatrix,
    h: *const HzMatrix,
    out: *mut *mut HzMatrix,
) -> HzStatus {
    guard(|| {
        let f = poly(coeffs, n_coeffs)?;
        let r = frechet_derivative(&f, mat(a, "a")?, mat(h, "h")?)?;
        put_box(out, HzMatrix(r), "out")
    })
}

/// κ_J in closed form for J = {elems} with 1 ∈ J and elements at most 16.
///
/// # Safety
/// `elems` must point to `len` integers.
#[no_mangle]
pub unsafe extern "C" fn hz_kappa_closed(elems: *const u32, len: usize, out: *mut u64) -> HzStatus {
    guard(|| {
        let j = IndexSet::new(slice(elems, len, "elems")?)?;
        if !j.contains(1) {
            return Err(Fail(HzStatus::InvalidArgument, format!("{j} does not contain 1")));
        }
        let k = kappa_closed(j);
        let v = k.to_u64().ok_or_else(|| Fail(HzStatus::Overflow, format!("κ{j} = {k} exceeds 64 bits")))?;
        put(out, v, "out")
    })
}

/// ω_{*,m}(x) for ω(t) = t^alpha. Infinite when alpha ≥ m.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_omega_star_power(alpha: f64, m: u32, x: f64, out: *mut f64) -> HzStatus {
    guard(|| {
        if !(alpha > 0.0 && alpha.is_finite() && x > 0.0 && x.is_finite() && m >= 1) {
            return Err(Fail(
                HzStatus::InvalidArgument,
                format!("need alpha > 0, m ≥ 1, x > 0; got {alpha}, {m}, {x}"),
            ));
        }
        put(out, omega_star(&ModulusOfContinuity::power(alpha), m, x), "out")
    })
}

/// Random check of ‖|A|^α − |B|^α‖ ≤ ‖A − B‖^α over `trials` Hermitian
/// pairs of dimension 2..8. Writes the largest ratio; returns `Invariant`
/// on a violation.
///
/// # Safety
/// `max_ratio` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_bks_check(alpha: f64, trials: usize, seed: u64, max_ratio: *mut f64) -> HzStatus {
    guard(|| {
        let rec = bks_check(&OperatorSampler::default(), alpha, trials, seed)?;
        put(max_ratio, rec.summary.max_ratio, "max_ratio")
    })
}

/// Runs a `key = value` configuration and returns the report bundle as a
/// JSON string, to be released with `hz_string_free`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hz_run_config(config: *const c_char, out_json: *mut *mut c_char) -> HzStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| Fail(HzStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let bundle = run(&RunConfig::parse(text)?)?;
        let json = serde_json::to_string(&bundle).map_err(|e| Fail(HzStatus::Io, e.to_string()))?;
        let c = CString::new(json).map_err(|e| Fail(HzStatus::Io, e.to_string()))?;
        put(out_json, c.into_raw(), "out_json")
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
