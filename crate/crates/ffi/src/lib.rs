//! C ABI for the cordes operator-calculus library.
//!
//! Conventions:
//! - Objects cross the boundary as opaque handles (`CordesSymbol`,
//!   `CordesOp`) created and destroyed by this library.
//! - Every fallible call returns a `CordesStatus`; on failure the
//!   thread-local error message is readable via
//!   `cordes_last_error_message`.
//! - Out-parameters are written only on `CORDES_STATUS_OK`.
//! - Passing a null required pointer returns `CORDES_STATUS_NULL_POINTER`;
//!   handles must not be used after their `_free` call.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use libc::{c_char, c_double, size_t};

use cordes_core::error::CordesError;
use cordes_core::grid::Grid;
use cordes_core::io;
use cordes_core::module_space::FiberSet;
use cordes_core::quantize::{op_norm, quantize, ModuleOp};
use cordes_core::recover::{recover_symbol, RecoveryParams};
use cordes_core::symbols::{sample_family, Symbol, SymbolFamily};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CordesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Utf8 = 3,
    Numerical = 4,
    Io = 5,
}

/// Opaque phase-space symbol handle.
pub struct CordesSymbol {
    inner: Symbol,
}

/// Opaque module-operator handle.
pub struct CordesOp {
    inner: ModuleOp,
}

/// Quadrature and finite-difference parameters for symbol recovery;
/// mirrors the library's RecoveryParams.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CordesRecoveryParams {
    pub t: c_double,
    pub w: c_double,
    pub qx: u32,
    pub qxi: u32,
    pub qeta: u32,
    pub delta: c_double,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("no interior NUL");
    });
}

fn status_of(err: &CordesError) -> CordesStatus {
    match err {
        CordesError::Io(_) => CordesStatus::Io,
        CordesError::Numerical(_) => CordesStatus::Numerical,
        _ => CordesStatus::InvalidArgument,
    }
}

fn fail(err: CordesError) -> CordesStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn null_pointer(what: &str) -> CordesStatus {
    set_error(&format!("null pointer argument: {what}"));
    CordesStatus::NullPointer
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CordesStatus> {
    if ptr.is_null() {
        return Err(null_pointer(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("argument {what} is not valid UTF-8"));
        CordesStatus::Utf8
    })
}

/// Copy the most recent error message for this thread into `buf`
/// (NUL-terminated, truncated to `len` bytes); returns the full message
/// length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn cordes_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Build a symbol by sampling a JSON-described family (the same tagged
/// format the CLI config uses) on an n-dimensional grid with `per_axis`
/// nodes per axis on [-half_width, half_width) and `fibers` numbered
/// fibers.
#[no_mangle]
pub unsafe extern "C" fn cordes_symbol_create(
    family_json: *const c_char,
    n: size_t,
    per_axis: size_t,
    half_width: c_double,
    fibers: size_t,
    out: *mut *mut CordesSymbol,
) -> CordesStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    let json = match read_str(family_json, "family_json") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let family: SymbolFamily = match serde_json::from_str(json) {
        Ok(f) => f,
        Err(e) => return fail(CordesError::Serde(e)),
    };
    let grid = match Grid::new(n, per_axis, half_width) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let fiber_set = match FiberSet::numbered(fibers) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    match sample_family(&family, &grid, &fiber_set) {
        Ok(sym) => {
            *out = Box::into_raw(Box::new(CordesSymbol { inner: sym }));
            CordesStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a symbol handle.
#[no_mangle]
pub unsafe extern "C" fn cordes_symbol_free(symbol: *mut CordesSymbol) {
    if !symbol.is_null() {
        drop(Box::from_raw(symbol));
    }
}

/// Kohn-Nirenberg quantization of a symbol.
#[no_mangle]
pub unsafe extern "C" fn cordes_quantize(
    symbol: *const CordesSymbol,
    out: *mut *mut CordesOp,
) -> CordesStatus {
    if symbol.is_null() {
        return null_pointer("symbol");
    }
    if out.is_null() {
        return null_pointer("out");
    }
    match quantize(&(*symbol).inner) {
        Ok(op) => {
            *out = Box::into_raw(Box::new(CordesOp { inner: op }));
            CordesStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release an operator handle.
#[no_mangle]
pub unsafe extern "C" fn cordes_op_free(op: *mut CordesOp) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Module operator norm (supremum of the fiberwise spectral norms).
#[no_mangle]
pub unsafe extern "C" fn cordes_op_norm(op: *const CordesOp, out: *mut c_double) -> CordesStatus {
    if op.is_null() {
        return null_pointer("op");
    }
    if out.is_null() {
        return null_pointer("out");
    }
    *out = op_norm(&(*op).inner);
    CordesStatus::Ok
}

/// Number of fibers of an operator.
#[no_mangle]
pub unsafe extern "C" fn cordes_op_fibers(op: *const CordesOp, out: *mut size_t) -> CordesStatus {
    if op.is_null() {
        return null_pointer("op");
    }
    if out.is_null() {
        return null_pointer("out");
    }
    *out = (*op).inner.fibers.len();
    CordesStatus::Ok
}

/// Recover the symbol of `op` at one phase-space point (z, zeta), each of
/// length n; writes one complex value per fiber into out_re / out_im
/// (arrays of length `fibers`).
#[no_mangle]
pub unsafe extern "C" fn cordes_recover_symbol(
    op: *const CordesOp,
    z: *const c_double,
    zeta: *const c_double,
    n: size_t,
    params: *const CordesRecoveryParams,
    out_re: *mut c_double,
    out_im: *mut c_double,
) -> CordesStatus {
    if op.is_null() {
        return null_pointer("op");
    }
    for (p, what) in [
        (z as *const (), "z"),
        (zeta as *const (), "zeta"),
        (params as *const (), "params"),
        (out_re as *const (), "out_re"),
        (out_im as *const (), "out_im"),
    ] {
        if p.is_null() {
            return null_pointer(what);
        }
    }
    let zs = std::slice::from_raw_parts(z, n).to_vec();
    let zetas = std::slice::from_raw_parts(zeta, n).to_vec();
    let p = &*params;
    let rp = RecoveryParams {
        t: p.t,
        w: p.w,
        qx: p.qx as usize,
        qxi: p.qxi as usize,
        qeta: p.qeta as usize,
        half_step: true,
        delta: p.delta,
    };
    match recover_symbol(&(*op).inner, &[(zs, zetas)], &rp) {
        Ok(values) => {
            for (fi, v) in values[0].iter().enumerate() {
                *out_re.add(fi) = v.re;
                *out_im.add(fi) = v.im;
            }
            CordesStatus::Ok
        }
        Err(e) => fail(e),
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, CordesStatus> {
    read_str(ptr, what).map(Path::new)
}

/// Save a symbol as a JSON manifest plus raw sidecar next to it.
#[no_mangle]
pub unsafe extern "C" fn cordes_symbol_save(
    symbol: *const CordesSymbol,
    manifest_path: *const c_char,
) -> CordesStatus {
    if symbol.is_null() {
        return null_pointer("symbol");
    }
    let path = match path_arg(manifest_path, "manifest_path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match io::save_symbol(&(*symbol).inner, path) {
        Ok(()) => CordesStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Load a symbol from its JSON manifest.
#[no_mangle]
pub unsafe extern "C" fn cordes_symbol_load(
    manifest_path: *const c_char,
    out: *mut *mut CordesSymbol,
) -> CordesStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    let path = match path_arg(manifest_path, "manifest_path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match io::load_symbol(path) {
        Ok(sym) => {
            *out = Box::into_raw(Box::new(CordesSymbol { inner: sym }));
            CordesStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Save an operator as a JSON manifest plus raw sidecar next to it.
#[no_mangle]
pub unsafe extern "C" fn cordes_op_save(
    op: *const CordesOp,
    manifest_path: *const c_char,
) -> CordesStatus {
    if op.is_null() {
        return null_pointer("op");
    }
    let path = match path_arg(manifest_path, "manifest_path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match io::save_op(&(*op).inner, path) {
        Ok(()) => CordesStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Load an operator from its JSON manifest.
#[no_mangle]
pub unsafe extern "C" fn cordes_op_load(
    manifest_path: *const c_char,
    out: *mut *mut CordesOp,
) -> CordesStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    let path = match path_arg(manifest_path, "manifest_path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match io::load_op(path) {
        Ok(op) => {
            *out = Box::into_raw(Box::new(CordesOp { inner: op }));
            CordesStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn gaussian_symbol() -> *mut CordesSymbol {
        let json = CString::new(r#"{"family":"gaussian","width":1.0}"#).unwrap();
        let mut sym: *mut CordesSymbol = ptr::null_mut();
        let status =
            unsafe { cordes_symbol_create(json.as_ptr(), 1, 32, 8.0, 2, &mut sym) };
        assert_eq!(status, CordesStatus::Ok);
        assert!(!sym.is_null());
        sym
    }

    #[test]
    fn create_quantize_norm_and_free() {
        let sym = gaussian_symbol();
        let mut op: *mut CordesOp = ptr::null_mut();
        unsafe {
            assert_eq!(cordes_quantize(sym, &mut op), CordesStatus::Ok);
            let mut fibers = 0usize;
            assert_eq!(cordes_op_fibers(op, &mut fibers), CordesStatus::Ok);
            assert_eq!(fibers, 2);
            let mut norm = 0.0f64;
            assert_eq!(cordes_op_norm(op, &mut norm), CordesStatus::Ok);
            assert!(norm > 0.0 && norm.is_finite());
            cordes_op_free(op);
            cordes_symbol_free(sym);
        }
    }

    #[test]
    fn bad_json_reports_error_message() {
        let json = CString::new(r#"{"family":"no-such-family"}"#).unwrap();
        let mut sym: *mut CordesSymbol = ptr::null_mut();
        let status = unsafe { cordes_symbol_create(json.as_ptr(), 1, 32, 8.0, 1, &mut sym) };
        assert_eq!(status, CordesStatus::InvalidArgument);
        let mut buf = vec![0i8; 256];
        let len = unsafe { cordes_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(len > 0);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert!(msg.contains("serialization") || msg.contains("unknown"), "{msg}");
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out: *mut CordesSymbol = ptr::null_mut();
        let status = unsafe { cordes_symbol_create(ptr::null(), 1, 32, 8.0, 1, &mut out) };
        assert_eq!(status, CordesStatus::NullPointer);
        unsafe {
            let mut norm = 0.0;
            assert_eq!(
                cordes_op_norm(ptr::null(), &mut norm),
                CordesStatus::NullPointer
            );
        }
    }

    #[test]
    fn save_load_roundtrip_through_the_abi() {
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(
            dir.path().join("op.json").to_str().unwrap().to_string(),
        )
        .unwrap();
        let sym = gaussian_symbol();
        let mut op: *mut CordesOp = ptr::null_mut();
        unsafe {
            assert_eq!(cordes_quantize(sym, &mut op), CordesStatus::Ok);
            assert_eq!(cordes_op_save(op, path.as_ptr()), CordesStatus::Ok);
            let mut back: *mut CordesOp = ptr::null_mut();
            assert_eq!(cordes_op_load(path.as_ptr(), &mut back), CordesStatus::Ok);
            let (mut n1, mut n2) = (0.0f64, 0.0f64);
            assert_eq!(cordes_op_norm(op, &mut n1), CordesStatus::Ok);
            assert_eq!(cordes_op_norm(back, &mut n2), CordesStatus::Ok);
            assert!((n1 - n2).abs() <= 1e-12);
            cordes_op_free(back);
            cordes_op_free(op);
            cordes_symbol_free(sym);
        }
    }

    #[test]
    fn recover_identity_symbol_at_origin() {
        let json = CString::new(r#"{"family":"constant","value":1.0}"#).unwrap();
        let mut sym: *mut CordesSymbol = ptr::null_mut();
        unsafe {
            assert_eq!(
                cordes_symbol_create(json.as_ptr(), 1, 64, 16.0, 1, &mut sym),
                CordesStatus::Ok
            );
            let mut op: *mut CordesOp = ptr::null_mut();
            assert_eq!(cordes_quantize(sym, &mut op), CordesStatus::Ok);
            let params = CordesRecoveryParams {
                t: 16.0,
                w: 16.0,
                qx: 40,
                qxi: 40,
                qeta: 40,
                delta: 0.5,
            };
            let (z, zeta) = ([0.0f64], [0.0f64]);
            let (mut re, mut im) = (0.0f64, 0.0f64);
            assert_eq!(
                cordes_recover_symbol(op, z.as_ptr(), zeta.as_ptr(), 1, &params, &mut re, &mut im),
                CordesStatus::Ok
            );
            assert!((re - 1.0).abs() <= 5e-2, "re = {re}");
            assert!(im.abs() <= 5e-2, "im = {im}");
            cordes_op_free(op);
            cordes_symbol_free(sym);
        }
    }
}
