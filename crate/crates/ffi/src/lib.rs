//! C ABI over cadtalker. Objects cross the boundary as opaque handles;
//! every call returns a `CtStatus`, and the message for the most recent
//! failure on the calling thread is available from `ct_last_error`.
//!
//! Strings returned through out-parameters are owned by the caller and must
//! be released with `ct_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cadtalker::blocks::read_ground_truth;
use cadtalker::dataset::evaluate;
use cadtalker::geometry::Shape;
use cadtalker::nalgebra::Point3;
use cadtalker::pipeline::{comment_pipeline, PipelineError, PipelineOptions};
use cadtalker::program::{Program, ProgramError};
use cadtalker::vision::{OracleConfig, OracleProvider};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    GeometryError = 4,
    ProviderError = 5,
    PipelineFailed = 6,
    BlockMismatch = 7,
    InvalidArgument = 8,
    Panic = 9,
}

/// Parsed and block-analyzed program.
pub struct CtProgram {
    program: Program,
    shape: Option<Shape>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: CtStatus, msg: impl std::fmt::Display) -> CtStatus {
    set_error(&msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> CtStatus) -> CtStatus {
    set_error("");
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(CtStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, CtStatus> {
    if p.is_null() {
        return Err(fail(CtStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(CtStatus::InvalidUtf8, "argument is not UTF-8"))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> CtStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            CtStatus::Ok
        }
        Err(_) => fail(CtStatus::InvalidArgument, "result contains a NUL byte"),
    }
}

fn program_status(e: &ProgramError) -> CtStatus {
    fail(CtStatus::ParseError, e)
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ct_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses, expands and analyzes `source`. On success `*out` owns a new handle.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_program_parse(source: *const c_char, out: *mut *mut CtProgram) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return fail(CtStatus::NullArgument, "null out pointer");
        }
        *out = ptr::null_mut();
        let src = match text(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match Program::from_text(src) {
            Ok(program) => {
                *out = Box::into_raw(Box::new(CtProgram { program, shape: None }));
                CtStatus::Ok
            }
            Err(e) => program_status(&e),
        }
    })
}

/// # Safety
/// `p` must come from `ct_program_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ct_program_free(p: *mut CtProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of commentable blocks, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_program_block_count(p: *const CtProgram) -> usize {
    p.as_ref().map_or(0, |p| p.program.blocks.len())
}

/// Block forest as JSON.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_program_blocks_json(p: *const CtProgram, out: *mut *mut c_char) -> CtStatus {
    guard(|| {
        let (Some(p), false) = (p.as_ref(), out.is_null()) else {
            return fail(CtStatus::NullArgument, "null argument");
        };
        put_string(out, p.program.blocks.to_json().to_string())
    })
}

/// Whether point `(x, y, z)` lies in the program's solid.
///
/// # Safety
/// `p` must be a live handle; `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_program_contains(p: *mut CtProgram, x: f64, y: f64, z: f64, inside: *mut bool) -> CtStatus {
    guard(|| {
        let (Some(p), false) = (p.as_mut(), inside.is_null()) else {
            return fail(CtStatus::NullArgument, "null argument");
        };
        if p.shape.is_none() {
            match p.program.shape() {
                Ok(s) => p.shape = Some(s),
                Err(e) => return fail(CtStatus::GeometryError, e),
            }
        }
        *inside = p.shape.as_ref().expect("just built").contains_point(&Point3::new(x, y, z));
        CtStatus::Ok
    })
}

/// Labels the program with the ground-truth oracle provider. Labels come
/// from comments already in the source. Writes the commented source and
/// the run report (JSON, without timings).
///
/// # Safety
/// `p` must be a live handle; `category` a NUL-terminated string; both out
/// pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ct_program_comment_oracle(
    p: *const CtProgram,
    category: *const c_char,
    seed: u64,
    resolution: u32,
    out_source: *mut *mut c_char,
    out_report: *mut *mut c_char,
) -> CtStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return fail(CtStatus::NullArgument, "null program");
        };
        if out_source.is_null() || out_report.is_null() {
            return fail(CtStatus::NullArgument, "null out pointer");
        }
        let category = match text(category) {
            Ok(c) => c,
            Err(s) => return s,
        };
        if resolution == 0 {
            return fail(CtStatus::InvalidArgument, "resolution must be positive");
        }
        let oracle = match OracleProvider::new(OracleConfig { seed, ..OracleConfig::default() }) {
            Ok(o) => o,
            Err(e) => return fail(CtStatus::ProviderError, e),
        };
        let mut opts = PipelineOptions::new(category);
        opts.render.resolution = resolution;
        opts.timings = false;
        match comment_pipeline(&p.program.source, &oracle, &opts) {
            Ok((src, report)) => {
                let s = put_string(out_source, src.text);
                if s != CtStatus::Ok {
                    return s;
                }
                put_string(out_report, report.to_json().to_string())
            }
            Err(e) => {
                let status = match &e {
                    PipelineError::Program(_) => CtStatus::ParseError,
                    PipelineError::Geometry(_) | PipelineError::Render(_) => CtStatus::GeometryError,
                    PipelineError::Provider { .. } => CtStatus::ProviderError,
                    _ => CtStatus::PipelineFailed,
                };
                fail(status, e)
            }
        }
    })
}

/// Metrics JSON comparing the comments of `pred` against those of `gt`.
///
/// # Safety
/// Both arguments must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_eval(pred: *const CtProgram, gt: *const CtProgram, out: *mut *mut c_char) -> CtStatus {
    guard(|| {
        let (Some(pred), Some(gt), false) = (pred.as_ref(), gt.as_ref(), out.is_null()) else {
            return fail(CtStatus::NullArgument, "null argument");
        };
        if !pred.program.blocks.same_structure(&gt.program.blocks) {
            return fail(CtStatus::BlockMismatch, "programs have different block sets");
        }
        let read = |p: &Program| read_ground_truth(&p.source, &p.blocks);
        let (pa, ga) = match (read(&pred.program), read(&gt.program)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return fail(CtStatus::ParseError, e),
        };
        match evaluate(&pa, &ga) {
            Ok(r) => put_string(out, serde_json::to_value(&r).expect("plain data").to_string()),
            Err(e) => fail(CtStatus::InvalidArgument, e),
        }
    })
}
