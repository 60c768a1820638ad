//! C ABI for surflab.
//!
//! Objects are opaque handles created by `*_new`-style functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`SurflabStatus`]; on failure the message is available through
//! [`surflab_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surflab::affine_deform::{margulis_invariant, Cocycle};
use surflab::fuchsian::{self, BallOptions};
use surflab::principal_rep::Representation;
use surflab::spectra::{self, LengthFunctional, LengthSpectrum};
use surflab::surface_group::{solve_cocycle_space, Word};
use surflab::Error;

/// Status codes. `Ok` is zero; the nonzero library codes match the
/// command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurflabStatus {
    Ok = 0,
    InvalidInput = 1,
    Numerical = 2,
    NullPointer = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Length function selector for [`surflab_spectrum_entropy`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurflabLength {
    Hyperbolic = 0,
    LastRoot = 1,
}

pub struct SurflabRepresentation(Representation);
pub struct SurflabCocycle(Cocycle);
pub struct SurflabSpectrum(LengthSpectrum);

/// Per-class data.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SurflabClass {
    pub trace: f64,
    pub l_hyp: f64,
    pub l_lastroot: f64,
    pub word_length: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SurflabEntropy {
    pub estimate: f64,
    pub residual: f64,
    pub critical_exponent: f64,
    pub count: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SurflabAverage {
    pub value: f64,
    pub weighted: f64,
    pub count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Small(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SurflabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SurflabStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            if e.exit_code() == 2 {
                SurflabStatus::Numerical
            } else {
                SurflabStatus::InvalidInput
            }
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SurflabStatus::NullPointer
        }
        Ok(Err(Failure::Small(needed))) => {
            set_error(format!("buffer too small: {needed} elements needed"));
            SurflabStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("panic inside surflab".into());
            SurflabStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn word(s: *const c_char) -> FfiResult<Word> {
    if s.is_null() {
        return Err(Failure::Null("word"));
    }
    let text = CStr::from_ptr(s).to_str().map_err(|_| Error::invalid("word is not UTF-8"))?;
    Ok(text.parse::<Word>()?)
}

unsafe fn fill(buf: *mut f64, len: usize, values: &[f64]) -> FfiResult<()> {
    if values.len() > len {
        return Err(Failure::Small(values.len()));
    }
    if buf.is_null() {
        return Err(Failure::Null("buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `len` bytes, and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn surflab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// The octagon group composed with the principal representation into
/// `SO(p, p-1)`.
///
/// # Safety
/// `out` must be a valid pointer; the handle it receives is released with
/// [`surflab_representation_free`].
#[no_mangle]
pub unsafe extern "C" fn surflab_representation_fuchsian(p: usize, out: *mut *mut SurflabRepresentation) -> SurflabStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = Box::into_raw(Box::new(SurflabRepresentation(Representation::fuchsian(p)?)));
        Ok(())
    })
}

/// # Safety
/// `rep` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surflab_representation_free(rep: *mut SurflabRepresentation) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// Dimension `2p - 1` of `V`, or 0 for a null handle.
///
/// # Safety
/// `rep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn surflab_representation_dim(rep: *const SurflabRepresentation) -> usize {
    rep.as_ref().map(|r| r.0.dim()).unwrap_or(0)
}

/// Distance of the relator image from `+-identity`.
///
/// # Safety
/// `rep` must be a live handle and `residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_representation_relator_residual(
    rep: *const SurflabRepresentation,
    residual: *mut f64,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        *out(residual, "residual")? = r.0.relator_residual().unwrap_or(0.0);
        Ok(())
    })
}

/// Image of a word such as `"abAB"` (capitals are inverses), written
/// row-major into `buf`, which must hold `dim * dim` values.
///
/// # Safety
/// `rep` must be a live handle, `w` a NUL-terminated string and `buf`
/// valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surflab_representation_evaluate(
    rep: *const SurflabRepresentation,
    w: *const c_char,
    buf: *mut f64,
    len: usize,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        let m = r.0.evaluate(&word(w)?);
        let row_major: Vec<f64> = m.transpose().as_slice().to_vec();
        fill(buf, len, &row_major)
    })
}

/// Random cocycle from a Gaussian combination of a basis of the cocycle
/// space, reproducible from `seed`.
///
/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_cocycle_random(
    rep: *const SurflabRepresentation,
    seed: u64,
    out: *mut *mut SurflabCocycle,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        let c = Cocycle::random(&solve_cocycle_space(&r.0)?, seed)?;
        *self::out(out, "out")? = Box::into_raw(Box::new(SurflabCocycle(c)));
        Ok(())
    })
}

/// Coboundary `v - rho(g) v` of a vector of length `dim`.
///
/// # Safety
/// `rep` must be a live handle, `v` valid for `len` reads and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_cocycle_coboundary(
    rep: *const SurflabRepresentation,
    v: *const f64,
    len: usize,
    out: *mut *mut SurflabCocycle,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        if v.is_null() {
            return Err(Failure::Null("v"));
        }
        if len != r.0.dim() {
            return Err(Error::invalid(format!("vector has length {len}, expected {}", r.0.dim())).into());
        }
        let v = nalgebra::DVector::from_column_slice(std::slice::from_raw_parts(v, len));
        *self::out(out, "out")? = Box::into_raw(Box::new(SurflabCocycle(Cocycle::coboundary(&r.0, &v))));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surflab_cocycle_free(c: *mut SurflabCocycle) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Margulis invariant of the class of a word.
///
/// # Safety
/// Handles must be live, `w` NUL-terminated and `alpha` valid.
#[no_mangle]
pub unsafe extern "C" fn surflab_margulis_invariant(
    rep: *const SurflabRepresentation,
    c: *const SurflabCocycle,
    w: *const c_char,
    alpha: *mut f64,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        let c = deref(c, "cocycle")?;
        *out(alpha, "alpha")? = margulis_invariant(&r.0, &c.0, &word(w)?)?;
        Ok(())
    })
}

/// Conjugacy classes with hyperbolic length at most `max_length`, with
/// the Margulis functionals attached.
///
/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_new(
    rep: *const SurflabRepresentation,
    max_length: f64,
    slack: f64,
    out: *mut *mut SurflabSpectrum,
) -> SurflabStatus {
    guard(|| {
        let r = deref(rep, "rep")?;
        let slot = self::out(out, "out")?;
        let sl2 = r.0.sl2().ok_or_else(|| Error::invalid("spectra need an SL(2,R) lift"))?;
        let reps = fuchsian::enumerate_class_representatives(sl2, max_length, slack, BallOptions::default())?;
        let mut spec = spectra::length_spectrum(&r.0, &reps, None)?;
        spec.attach_margulis(&r.0)?;
        *slot = Box::into_raw(Box::new(SurflabSpectrum(spec)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_free(s: *mut SurflabSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_len(s: *const SurflabSpectrum) -> usize {
    s.as_ref().map(|s| s.0.len()).unwrap_or(0)
}

/// Class `i` in order of increasing hyperbolic length.
///
/// # Safety
/// `s` must be a live handle and `class` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_class(
    s: *const SurflabSpectrum,
    i: usize,
    class: *mut SurflabClass,
) -> SurflabStatus {
    guard(|| {
        let s = deref(s, "spectrum")?;
        let c = s.0.classes().get(i).ok_or_else(|| Error::invalid(format!("class index {i} out of range")))?;
        *out(class, "class")? = SurflabClass {
            trace: c.trace,
            l_hyp: c.l_hyp,
            l_lastroot: c.l_lastroot,
            word_length: c.word_length(),
        };
        Ok(())
    })
}

/// Entropy fitted over `[t0, t1]`.
///
/// # Safety
/// `s` must be a live handle and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_entropy(
    s: *const SurflabSpectrum,
    length: SurflabLength,
    t0: f64,
    t1: f64,
    result: *mut SurflabEntropy,
) -> SurflabStatus {
    guard(|| {
        let s = deref(s, "spectrum")?;
        let f = match length {
            SurflabLength::Hyperbolic => LengthFunctional::Hyperbolic,
            SurflabLength::LastRoot => LengthFunctional::LastRoot,
        };
        let e = spectra::spectrum_entropy(&s.0, &f, [t0, t1])?;
        *out(result, "result")? = SurflabEntropy {
            estimate: e.estimate,
            residual: e.residual,
            critical_exponent: e.critical_exponent,
            count: e.count,
        };
        Ok(())
    })
}

/// Margulis invariants of every class, in spectrum order.
///
/// # Safety
/// Handles must be live and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_alphas(
    s: *const SurflabSpectrum,
    c: *const SurflabCocycle,
    buf: *mut f64,
    len: usize,
) -> SurflabStatus {
    guard(|| {
        let s = deref(s, "spectrum")?;
        let c = deref(c, "cocycle")?;
        fill(buf, len, &s.0.alphas(&c.0)?)
    })
}

/// Closed-orbit average of the Margulis invariant over last-root lengths
/// in `[t0, t1]`, with exponential weights at rate `entropy`.
///
/// # Safety
/// Handles must be live and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surflab_spectrum_bm_average(
    s: *const SurflabSpectrum,
    c: *const SurflabCocycle,
    t0: f64,
    t1: f64,
    entropy: f64,
    result: *mut SurflabAverage,
) -> SurflabStatus {
    guard(|| {
        let s = deref(s, "spectrum")?;
        let c = deref(c, "cocycle")?;
        let a = spectra::bm_average(&s.0.l_lastroot(), &s.0.alphas(&c.0)?, [t0, t1], entropy)?;
        *out(result, "result")? = SurflabAverage { value: a.value, weighted: a.weighted, count: a.count };
        Ok(())
    })
}
