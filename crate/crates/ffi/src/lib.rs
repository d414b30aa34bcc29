//! C ABI for `orthopair`.
//!
//! Pairs and parameter sets cross the boundary as opaque handles that the
//! caller releases with the matching `_free` function. Every fallible call
//! returns an [`OrthopairStatus`]; on failure the message is available from
//! [`orthopair_last_error`] on the same thread. Matrices are dense row-major
//! `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use orthopair::canonical::{to_hessenberg_observer, to_ots, ON_GATE};
use orthopair::fast_apply::{stack_matvec, ImplicitStack, StackParams};
use orthopair::hoon::{hoon_domain_check, hoon_factor, hoon_reconstruct};
use orthopair::io::{self, Metadata, ModelFile, ParamFile};
use orthopair::normal_form::to_output_normal;
use orthopair::otson::{
    default_family, otson_domain_check, otson_factor, otson_reconstruct, DomainStatus, BOUNDARY_TOL,
};
use orthopair::rotations::OrpKind;
use orthopair::schur::{schur_on, OrderConvention};
use orthopair::{Error, OutputPair};

/// Result of every fallible call. Values 2 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthopairStatus {
    Ok = 0,
    /// A required pointer was null or a buffer was too small.
    InvalidArgument = 1,
    /// Malformed input: bad JSON, inconsistent dimensions.
    Input = 2,
    /// The input is outside the operation's domain (unstable, not in form, degenerate, not strict).
    Domain = 3,
    /// An iteration failed to converge or a matrix was singular.
    Numerical = 4,
    /// An internal consistency check failed.
    Invariant = 5,
    /// The library panicked; no output was written.
    Panic = 6,
}

/// Target of [`orthopair_reduce`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthopairForm {
    /// Observer-triangular (lower triangular stack).
    Ots = 0,
    /// Hessenberg-observer.
    Hessenberg = 1,
    /// Ordered real Schur, ascending eigenvalue modulus.
    SchurAscending = 2,
    /// Ordered real Schur, descending eigenvalue modulus.
    SchurDescending = 3,
}

/// Parameterization produced by [`orthopair_factor`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthopairKind {
    Otson = 0,
    Hoon = 1,
}

/// Opaque output pair `(A, C)`.
pub struct OrthopairPair(OutputPair);

/// Opaque OTSON or HOON parameter set.
pub struct OrthopairParams(StackParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> OrthopairStatus {
    match e.exit_code() {
        2 => OrthopairStatus::Input,
        3 => OrthopairStatus::Domain,
        4 => OrthopairStatus::Numerical,
        _ => OrthopairStatus::Invariant,
    }
}

fn invalid(msg: &str) -> OrthopairStatus {
    set_error(msg.to_string());
    OrthopairStatus::InvalidArgument
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OrthopairStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OrthopairStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Arg(msg))) => invalid(msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            OrthopairStatus::Panic
        }
    }
}

enum Failure {
    Lib(Error),
    Arg(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Arg("output pointer is null"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Arg("handle is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Arg("array pointer is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Arg("string pointer is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Arg("string is not valid UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Failure> {
    let slot = out_ptr(out)?;
    *slot = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn write_matrix(m: &DMatrix<f64>, buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len < m.len() {
        return Err(Failure::Arg("output buffer is too small"));
    }
    if m.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(Failure::Arg("output buffer is null"));
    }
    let out = std::slice::from_raw_parts_mut(buf, m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn write_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let slot = out_ptr(out)?;
    let s = CString::new(s).map_err(|_| Failure::Arg("string contains a NUL byte"))?;
    *slot = s.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null if none failed.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn orthopair_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn orthopair_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orthopair_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a pair from row-major `A` (`n×n`) and `C` (`d×n`).
///
/// # Safety
/// `a` must point to `n*n` doubles, `c` to `d*n` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_new(
    a: *const f64,
    c: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut OrthopairPair,
) -> OrthopairStatus {
    guard(|| {
        let (na, nc) = n.checked_mul(n).zip(d.checked_mul(n)).ok_or(Failure::Arg("dimensions overflow"))?;
        let a = DMatrix::from_row_slice(n, n, slice(a, na)?);
        let c = DMatrix::from_row_slice(d, n, slice(c, nc)?);
        let pair = OutputPair::new(a, c)?;
        put(out, OrthopairPair(pair))
    })
}

/// Reads the pair from model-file JSON. `B` and `D`, if present, are ignored.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_from_json(
    json: *const c_char,
    out: *mut *mut OrthopairPair,
) -> OrthopairStatus {
    guard(|| {
        let pair = io::parse_model(c_str(json)?)?.pair()?;
        put(out, OrthopairPair(pair))
    })
}

/// Serializes the pair as model-file JSON. Free the result with [`orthopair_string_free`].
///
/// # Safety
/// `pair` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_to_json(pair: *const OrthopairPair, out: *mut *mut c_char) -> OrthopairStatus {
    guard(|| {
        let pair = &handle(pair)?.0;
        let meta = Metadata { seed: None, provenance: "ffi".into() };
        let text = io::model_to_string(&ModelFile::from_pair(pair, None, None, meta))?;
        write_string(text, out)
    })
}

/// State dimension `n` and output dimension `d`.
///
/// # Safety
/// `pair` must be a live handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_dims(
    pair: *const OrthopairPair,
    n: *mut usize,
    d: *mut usize,
) -> OrthopairStatus {
    guard(|| {
        let pair = &handle(pair)?.0;
        *out_ptr(n)? = pair.n();
        *out_ptr(d)? = pair.d();
        Ok(())
    })
}

/// Copies `A` row-major into `buf`, which holds `len ≥ n*n` doubles.
///
/// # Safety
/// `pair` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_get_a(
    pair: *const OrthopairPair,
    buf: *mut f64,
    len: usize,
) -> OrthopairStatus {
    guard(|| write_matrix(handle(pair)?.0.a(), buf, len))
}

/// Copies `C` row-major into `buf`, which holds `len ≥ d*n` doubles.
///
/// # Safety
/// `pair` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_get_c(
    pair: *const OrthopairPair,
    buf: *mut f64,
    len: usize,
) -> OrthopairStatus {
    guard(|| write_matrix(handle(pair)?.0.c(), buf, len))
}

/// `‖I − AᵀA − CᵀC‖_F`.
///
/// # Safety
/// `pair` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_on_residual(pair: *const OrthopairPair, out: *mut f64) -> OrthopairStatus {
    guard(|| {
        *out_ptr(out)? = handle(pair)?.0.on_residual();
        Ok(())
    })
}

/// Releases a pair handle. Null is ignored.
///
/// # Safety
/// `pair` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn orthopair_pair_free(pair: *mut OrthopairPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Output-normal pair similar to a stable observable `pair`.
///
/// # Safety
/// `pair` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_normalize(
    pair: *const OrthopairPair,
    out: *mut *mut OrthopairPair,
) -> OrthopairStatus {
    guard(|| {
        let (on, _) = to_output_normal(&handle(pair)?.0)?;
        put(out, OrthopairPair(on))
    })
}

/// Orthogonally equivalent pair in `form`. The input must be output normal.
///
/// # Safety
/// `pair` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_reduce(
    pair: *const OrthopairPair,
    form: OrthopairForm,
    out: *mut *mut OrthopairPair,
) -> OrthopairStatus {
    guard(|| {
        let pair = &handle(pair)?.0;
        let r = pair.on_residual();
        if r > ON_GATE {
            return Err(Error::Form(format!("pair is not output normal (residual {r:.3e}); normalize it first")).into());
        }
        let reduced = match form {
            OrthopairForm::Ots => to_ots(pair)?.0,
            OrthopairForm::Hessenberg => to_hessenberg_observer(pair)?.0,
            OrthopairForm::SchurAscending => schur_on(pair, OrderConvention::Ascending)?.0,
            OrthopairForm::SchurDescending => schur_on(pair, OrderConvention::Descending)?.0,
        };
        put(out, OrthopairPair(reduced))
    })
}

/// Rotation angles of a strict pair already in OTS (`Otson`) or
/// Hessenberg-observer (`Hoon`) form, using the default Givens family.
///
/// Pairs on or outside the boundary of the strict domain are refused with
/// [`OrthopairStatus::Domain`] since their parameters are not unique.
///
/// # Safety
/// `pair` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_factor(
    pair: *const OrthopairPair,
    kind: OrthopairKind,
    out: *mut *mut OrthopairParams,
) -> OrthopairStatus {
    guard(|| {
        let pair = &handle(pair)?.0;
        let (params, status): (StackParams, _) = match kind {
            OrthopairKind::Otson => {
                let p = otson_factor(pair, default_family(pair.d()))?;
                let s = otson_domain_check(&p, BOUNDARY_TOL);
                (p.into(), s)
            }
            OrthopairKind::Hoon => {
                let p = hoon_factor(pair, OrpKind::Q3)?;
                let s = hoon_domain_check(&p, BOUNDARY_TOL);
                (p.into(), s)
            }
        };
        if status != DomainStatus::Strict {
            return Err(Error::NotStrict(format!("parameters are {status}, so they are not unique")).into());
        }
        put(out, OrthopairParams(params))
    })
}

/// Pair represented by `params`.
///
/// # Safety
/// `params` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_reconstruct(
    params: *const OrthopairParams,
    out: *mut *mut OrthopairPair,
) -> OrthopairStatus {
    guard(|| {
        let pair = match &handle(params)?.0 {
            StackParams::Otson(p) => otson_reconstruct(p)?,
            StackParams::Hoon(p) => hoon_reconstruct(p)?,
        };
        put(out, OrthopairPair(pair))
    })
}

/// Kind, `n`, `d` and the number of angles of a parameter set.
///
/// # Safety
/// `params` must be a live handle; every output pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_info(
    params: *const OrthopairParams,
    kind: *mut OrthopairKind,
    n: *mut usize,
    d: *mut usize,
    n_angles: *mut usize,
) -> OrthopairStatus {
    guard(|| {
        let (k, nn, dd, len) = match &handle(params)?.0 {
            StackParams::Otson(p) => (OrthopairKind::Otson, p.n(), p.d(), p.flat().len()),
            StackParams::Hoon(p) => (OrthopairKind::Hoon, p.n(), p.d(), p.flat().len()),
        };
        *out_ptr(kind)? = k;
        *out_ptr(n)? = nn;
        *out_ptr(d)? = dd;
        *out_ptr(n_angles)? = len;
        Ok(())
    })
}

/// Copies the angles, stage by stage, into `buf` (`len` doubles).
///
/// # Safety
/// `params` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_angles(
    params: *const OrthopairParams,
    buf: *mut f64,
    len: usize,
) -> OrthopairStatus {
    guard(|| {
        let flat = match &handle(params)?.0 {
            StackParams::Otson(p) => p.flat(),
            StackParams::Hoon(p) => p.flat(),
        };
        write_matrix(&DMatrix::from_row_slice(1, flat.len(), &flat), buf, len)
    })
}

/// `γ` of a HOON parameter set; [`OrthopairStatus::Domain`] for OTSON.
///
/// # Safety
/// `params` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_gamma(params: *const OrthopairParams, out: *mut f64) -> OrthopairStatus {
    guard(|| match &handle(params)?.0 {
        StackParams::Hoon(p) => {
            *out_ptr(out)? = p.gamma();
            Ok(())
        }
        StackParams::Otson(_) => Err(Error::Unsupported("OTSON parameters have no gamma".into()).into()),
    })
}

/// Reads a parameter file from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_from_json(
    json: *const c_char,
    out: *mut *mut OrthopairParams,
) -> OrthopairStatus {
    guard(|| {
        let params = io::parse_params(c_str(json)?)?.to_params()?;
        put(out, OrthopairParams(params))
    })
}

/// Serializes a parameter set as JSON. Free the result with [`orthopair_string_free`].
///
/// # Safety
/// `params` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_to_json(
    params: *const OrthopairParams,
    out: *mut *mut c_char,
) -> OrthopairStatus {
    guard(|| {
        let text = io::params_to_string(&ParamFile::from_params(&handle(params)?.0))?;
        write_string(text, out)
    })
}

/// Releases a parameter handle. Null is ignored.
///
/// # Safety
/// `params` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn orthopair_params_free(params: *mut OrthopairParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// `[C; A] v` applied from the rotations without forming the stack.
///
/// `v` holds `n` doubles and `out` holds `n + d`. `mults`, if not null,
/// receives the number of multiplications performed.
///
/// # Safety
/// `params` must be a live handle; `v` and `out` must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn orthopair_stack_matvec(
    params: *const OrthopairParams,
    v: *const f64,
    v_len: usize,
    out: *mut f64,
    out_len: usize,
    mults: *mut u64,
) -> OrthopairStatus {
    guard(|| {
        let s = ImplicitStack::new(handle(params)?.0.clone());
        let v = DVector::from_column_slice(slice(v, v_len)?);
        let applied = stack_matvec(&s, &v)?;
        write_matrix(&DMatrix::from_row_slice(1, applied.value.len(), applied.value.as_slice()), out, out_len)?;
        if let Some(m) = mults.as_mut() {
            *m = applied.mults;
        }
        Ok(())
    })
}
