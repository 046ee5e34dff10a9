//! C ABI for `ozaki2`.
//!
//! A configuration lives behind an opaque `Oz2Config` handle. Every call
//! returns an `Oz2Status`; details of the most recent failure on the calling
//! thread are available from `oz2_last_error_message`. Matrices are
//! column-major with leading dimensions, as in BLAS.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use num_complex::Complex;
use ozaki2::perf::{predicted_tflops, PerfParams};
use ozaki2::{ComplexStrategy, EmuConfig, EmuError, Mode, Precision};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oz2Status {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Dimension = 3,
    Domain = 4,
    Panic = 5,
    Other = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oz2Mode {
    Fast = 0,
    Accurate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oz2Strategy {
    Karatsuba = 0,
    ExpandRows = 1,
    ExpandCols = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oz2Precision {
    Single = 0,
    Double = 1,
}

/// Single-precision complex value, layout-compatible with `float _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Oz2Complex32 {
    pub re: f32,
    pub im: f32,
}

/// Double-precision complex value, layout-compatible with `double _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Oz2Complex64 {
    pub re: f64,
    pub im: f64,
}

/// Opaque emulation settings.
pub struct Oz2Config(EmuConfig);

// Enum arguments must hold one of the declared values; anything else is
// undefined behaviour, as for any C enum passed to Rust.

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &EmuError) -> Oz2Status {
    match e {
        EmuError::Config(_) => Oz2Status::Config,
        EmuError::Dimension(_) => Oz2Status::Dimension,
        EmuError::Domain(_) => Oz2Status::Domain,
        _ => Oz2Status::Other,
    }
}

/// Runs `f`, recording errors and converting panics to `Oz2Status::Panic`.
fn guard(f: impl FnOnce() -> Result<(), (Oz2Status, String)>) -> Oz2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            Oz2Status::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            Oz2Status::Panic
        }
    }
}

fn lib_err(e: EmuError) -> (Oz2Status, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (Oz2Status, String) {
    (Oz2Status::NullPointer, format!("{what} is null"))
}

/// Elements spanned by a `rows x cols` view with leading dimension `ld`.
fn span(rows: usize, cols: usize, ld: usize) -> Result<usize, (Oz2Status, String)> {
    if rows == 0 || cols == 0 {
        return Ok(0);
    }
    if ld < rows {
        return Err((Oz2Status::Dimension, format!("leading dimension {ld} < rows {rows}")));
    }
    (cols - 1)
        .checked_mul(ld)
        .and_then(|x| x.checked_add(rows))
        .ok_or_else(|| (Oz2Status::Dimension, format!("{rows}x{cols} with ld {ld} overflows")))
}

/// # Safety
/// `p` must be null only if `len == 0`, otherwise valid for `len` reads.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (Oz2Status, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// As [`input`], for writes.
unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (Oz2Status, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn config<'a>(cfg: *const Oz2Config) -> Result<&'a EmuConfig, (Oz2Status, String)> {
    cfg.as_ref().map(|c| &c.0).ok_or_else(|| null("config"))
}

fn update(cfg: *mut Oz2Config, f: impl FnOnce(&mut EmuConfig)) -> Oz2Status {
    guard(|| {
        // SAFETY: the caller passes a handle from `oz2_config_new` or null.
        let c = unsafe { cfg.as_mut() }.ok_or_else(|| null("config"))?;
        let mut next = c.0.clone();
        f(&mut next);
        next.validate().map_err(lib_err)?;
        c.0 = next;
        Ok(())
    })
}

/// New configuration: accurate mode, default moduli count, Karatsuba
/// complex kernel, all cores. Release with `oz2_config_free`.
#[no_mangle]
pub extern "C" fn oz2_config_new() -> *mut Oz2Config {
    Box::into_raw(Box::new(Oz2Config(EmuConfig::default())))
}

/// # Safety
/// `cfg` must come from `oz2_config_new` and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_free(cfg: *mut Oz2Config) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_set_mode(cfg: *mut Oz2Config, mode: Oz2Mode) -> Oz2Status {
    update(cfg, |c| {
        c.mode = match mode {
            Oz2Mode::Fast => Mode::Fast,
            Oz2Mode::Accurate => Mode::Accurate,
        }
    })
}

/// Number of moduli; 0 restores the default for each routine.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_set_num_moduli(cfg: *mut Oz2Config, num_moduli: usize) -> Oz2Status {
    update(cfg, |c| c.num_moduli = (num_moduli > 0).then_some(num_moduli))
}

/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_set_n_block(cfg: *mut Oz2Config, n_block: usize) -> Oz2Status {
    update(cfg, |c| c.n_block = n_block)
}

/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_set_strategy(cfg: *mut Oz2Config, strategy: Oz2Strategy) -> Oz2Status {
    update(cfg, |c| {
        c.strategy = match strategy {
            Oz2Strategy::Karatsuba => ComplexStrategy::Karatsuba,
            Oz2Strategy::ExpandRows => ComplexStrategy::ExpandRows,
            Oz2Strategy::ExpandCols => ComplexStrategy::ExpandCols,
        }
    })
}

/// Worker threads; 0 uses the global pool.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn oz2_config_set_threads(cfg: *mut Oz2Config, threads: usize) -> Oz2Status {
    update(cfg, |c| c.threads = threads)
}

type LibGemm<T> = fn(&EmuConfig, usize, usize, usize, &[T], usize, &[T], usize, &mut [T], usize) -> ozaki2::Result<()>;

/// Shared body of the GEMM entry points; `E` is the C element type and `T`
/// the layout-identical library type.
///
/// # Safety
/// See the public entry points.
#[allow(clippy::too_many_arguments)]
unsafe fn gemm<E, T>(
    lib: LibGemm<T>,
    cfg: *const Oz2Config,
    (m, n, k): (usize, usize, usize),
    (a, lda): (*const E, usize),
    (b, ldb): (*const E, usize),
    (c, ldc): (*mut E, usize),
) -> Oz2Status {
    guard(|| {
        let cfg = config(cfg)?;
        let a = input(a.cast::<T>(), span(m, k, lda)?, "a")?;
        let b = input(b.cast::<T>(), span(k, n, ldb)?, "b")?;
        let c = output(c.cast::<T>(), span(m, n, ldc)?, "c")?;
        lib(cfg, m, n, k, a, lda.max(1), b, ldb.max(1), c, ldc.max(1)).map_err(lib_err)
    })
}

/// `C = A B`, single-precision real.
///
/// # Safety
/// `cfg` must be a live handle. `a`, `b` and `c` must be valid for the
/// column-major views `m x k`, `k x n` and `m x n` with the given leading
/// dimensions; they may be null only when the view is empty. `c` must not
/// alias `a` or `b`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn oz2_sgemm(
    cfg: *const Oz2Config,
    m: usize,
    n: usize,
    k: usize,
    a: *const f32,
    lda: usize,
    b: *const f32,
    ldb: usize,
    c: *mut f32,
    ldc: usize,
) -> Oz2Status {
    gemm::<f32, f32>(ozaki2::sgemm, cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B`, double-precision real.
///
/// # Safety
/// As for `oz2_sgemm`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn oz2_dgemm(
    cfg: *const Oz2Config,
    m: usize,
    n: usize,
    k: usize,
    a: *const f64,
    lda: usize,
    b: *const f64,
    ldb: usize,
    c: *mut f64,
    ldc: usize,
) -> Oz2Status {
    gemm::<f64, f64>(ozaki2::dgemm, cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B`, single-precision complex.
///
/// # Safety
/// As for `oz2_sgemm`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn oz2_cgemm(
    cfg: *const Oz2Config,
    m: usize,
    n: usize,
    k: usize,
    a: *const Oz2Complex32,
    lda: usize,
    b: *const Oz2Complex32,
    ldb: usize,
    c: *mut Oz2Complex32,
    ldc: usize,
) -> Oz2Status {
    gemm::<_, Complex<f32>>(ozaki2::cgemm, cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B`, double-precision complex.
///
/// # Safety
/// As for `oz2_sgemm`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn oz2_zgemm(
    cfg: *const Oz2Config,
    m: usize,
    n: usize,
    k: usize,
    a: *const Oz2Complex64,
    lda: usize,
    b: *const Oz2Complex64,
    ldb: usize,
    c: *mut Oz2Complex64,
    ldc: usize,
) -> Oz2Status {
    gemm::<_, Complex<f64>>(ozaki2::zgemm, cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// Predicted complex-GEMM throughput in TFLOPS. `num_moduli` 0 selects the
/// default for the precision and mode; `c` below zero means `c = num_moduli`.
///
/// # Safety
/// `out` must be valid for one write, or null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn oz2_predict_tflops(
    precision: Oz2Precision,
    mode: Oz2Mode,
    m: usize,
    n: usize,
    k: usize,
    num_moduli: usize,
    c: f64,
    bandwidth: f64,
    int8_ops: f64,
    out: *mut f64,
) -> Oz2Status {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let precision = match precision {
            Oz2Precision::Single => Precision::Single,
            Oz2Precision::Double => Precision::Double,
        };
        let mode = match mode {
            Oz2Mode::Fast => Mode::Fast,
            Oz2Mode::Accurate => Mode::Accurate,
        };
        let nm = if num_moduli == 0 {
            ozaki2::emulate::default_num_moduli(ozaki2::Domain::Complex, precision, mode)
        } else {
            num_moduli
        };
        let mut pp = PerfParams::new(precision, mode, (m, n, k), nm, bandwidth, int8_ops);
        if c >= 0.0 {
            pp = pp.with_c(c);
        }
        pp.validate().map_err(lib_err)?;
        *out = predicted_tflops(&pp);
        Ok(())
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn oz2_status_message(status: Oz2Status) -> *const c_char {
    let s: &'static CStr = match status {
        Oz2Status::Ok => c"ok",
        Oz2Status::NullPointer => c"null pointer argument",
        Oz2Status::Config => c"invalid configuration",
        Oz2Status::Dimension => c"inconsistent dimensions",
        Oz2Status::Domain => c"input outside the supported domain",
        Oz2Status::Panic => c"internal panic",
        Oz2Status::Other => c"unexpected error",
    };
    s.as_ptr()
}

/// Detail for the most recent failed call on this thread ("" after a
/// success). Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn oz2_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// Layout checks for the complex element casts.
const _: () = {
    assert!(std::mem::size_of::<Oz2Complex32>() == std::mem::size_of::<Complex<f32>>());
    assert!(std::mem::align_of::<Oz2Complex32>() == std::mem::align_of::<Complex<f32>>());
    assert!(std::mem::size_of::<Oz2Complex64>() == std::mem::size_of::<Complex<f64>>());
    assert!(std::mem::align_of::<Oz2Complex64>() == std::mem::align_of::<Complex<f64>>());
};
