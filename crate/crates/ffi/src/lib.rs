//! C interface to `slide-opt`.
//!
//! Every function returns a [`SlideStatus`]. On failure the message is kept in
//! thread-local storage and read with [`slide_last_error`]. Handles are opaque
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slide_opt::bench::{run_experiment, ExperimentConfig};
use slide_opt::nalgebra::DVector;
use slide_opt::oracles::{make_problem, CompositeProblem, ProblemSpec};
use slide_opt::run::{RunOptions, RunRecord};
use slide_opt::schedule::{default_d_tilde_fixed, default_d_tilde_stochastic, SlidingSchedule};
use slide_opt::sliding::gs_run;
use slide_opt::stochastic::sgs_run;
use slide_opt::stream::StreamKey;
use slide_opt::SlideError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlideStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Unsupported = 4,
    CertificationFailed = 5,
    NoReference = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

/// Oracle call counts of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlideCounts {
    pub grad_calls: u64,
    pub subgrad_calls: u64,
    pub stoch_calls: u64,
}

/// A composite problem with its certified reference, once attached.
pub struct SlideProblem(CompositeProblem);

/// The result of one run.
pub struct SlideRun(RunRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &SlideError) -> SlideStatus {
    match e {
        SlideError::InvalidConfig { .. } | SlideError::UnknownFamily(_) => SlideStatus::InvalidConfig,
        SlideError::Unsupported(_) | SlideError::Unbounded | SlideError::MissingStochasticOracle => {
            SlideStatus::Unsupported
        }
        SlideError::CertificationFailed { .. } => SlideStatus::CertificationFailed,
        SlideError::Io(_) => SlideStatus::Io,
        _ => SlideStatus::InvalidArgument,
    }
}

struct Fail(SlideStatus, String);

impl From<SlideError> for Fail {
    fn from(e: SlideError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SlideStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SlideStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlideStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlideStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SlideStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn problem_ref<'a>(p: *const SlideProblem) -> Result<&'a CompositeProblem, Fail> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("problem"))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slide_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a desk instance by name, e.g. `"quad_l1"`.
///
/// # Safety
/// `name` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_desk(name: *const c_char, out: *mut *mut SlideProblem) -> SlideStatus {
    guard(|| {
        let spec = ProblemSpec::desk(str_arg(name, "name")?)?;
        write_handle(out, SlideProblem(make_problem(&spec)?))
    })
}

/// Builds a problem from a TOML problem table (the fields of a `[problem]` section).
///
/// # Safety
/// `toml_text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_from_toml(
    toml_text: *const c_char,
    out: *mut *mut SlideProblem,
) -> SlideStatus {
    guard(|| {
        let spec: ProblemSpec = toml::from_str(str_arg(toml_text, "toml_text")?)
            .map_err(|e| Fail(SlideStatus::InvalidConfig, e.message().to_string()))?;
        write_handle(out, SlideProblem(make_problem(&spec)?))
    })
}

/// # Safety
/// `problem` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_free(problem: *mut SlideProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_dim(problem: *const SlideProblem, out: *mut usize) -> SlideStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        *out.as_mut().ok_or_else(|| null("out"))? = p.dim();
        Ok(())
    })
}

/// Computes and attaches a reference optimum certified to `tol`.
///
/// # Safety
/// `problem` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_attach_reference(problem: *mut SlideProblem, tol: f64) -> SlideStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        p.0.attach_reference(tol)?;
        Ok(())
    })
}

/// `Ψ*` of the attached reference.
///
/// # Safety
/// `problem` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_reference_value(problem: *const SlideProblem, out: *mut f64) -> SlideStatus {
    guard(|| {
        let r = problem_ref(problem)?
            .reference()
            .ok_or_else(|| Fail(SlideStatus::NoReference, "no reference attached".into()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.value;
        Ok(())
    })
}

/// `Ψ(x)` for `x` of length `len`.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slide_problem_objective(
    problem: *const SlideProblem,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> SlideStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if x.is_null() {
            return Err(null("x"));
        }
        if len != p.dim() {
            return Err(SlideError::DimensionMismatch {
                expected: p.dim(),
                got: len,
            }
            .into());
        }
        let v = DVector::from_column_slice(std::slice::from_raw_parts(x, len));
        *out.as_mut().ok_or_else(|| null("out"))? = p.objective(&v);
        Ok(())
    })
}

/// Gradient sliding for `n` outer iterations with the fixed-horizon policy and
/// the default `D̃` (needs a bounded feasible set).
///
/// # Safety
/// `problem` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_run_gs(problem: *const SlideProblem, n: usize, out: *mut *mut SlideRun) -> SlideStatus {
    guard(|| {
        let p = problem_ref(problem)?.fork();
        let d_tilde = default_d_tilde_fixed(p.diameter()?, p.modulus());
        let s = SlidingSchedule::fixed_horizon(p.lipschitz(), p.nonsmooth_bound(), p.modulus(), n, d_tilde)?;
        write_handle(out, SlideRun(gs_run(&p, &s, n, &RunOptions::default())?))
    })
}

/// Stochastic gradient sliding for `n` outer iterations with samples keyed by `seed`.
///
/// # Safety
/// `problem` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_run_sgs(
    problem: *const SlideProblem,
    n: usize,
    seed: u64,
    out: *mut *mut SlideRun,
) -> SlideStatus {
    guard(|| {
        let p = problem_ref(problem)?.fork();
        let d_tilde = default_d_tilde_stochastic(p.diameter()?, p.modulus());
        let s = SlidingSchedule::stochastic_fixed_horizon(
            p.lipschitz(),
            p.nonsmooth_bound(),
            p.sigma(),
            p.modulus(),
            n,
            d_tilde,
        )?;
        let rec = sgs_run(&p, &s, n, StreamKey::new(seed), &RunOptions::default())?;
        write_handle(out, SlideRun(rec))
    })
}

/// # Safety
/// `run` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn slide_run_free(run: *mut SlideRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Copies the output point into `buf` (of capacity `len`). `BufferTooSmall`
/// if `len` is less than the dimension.
///
/// # Safety
/// `run` must be valid and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slide_run_output(run: *const SlideRun, buf: *mut f64, len: usize) -> SlideStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let x = &r.0.output;
        if len < x.len() {
            return Err(Fail(
                SlideStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", x.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, x.len()).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// # Safety
/// `run` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slide_run_counts(run: *const SlideRun, out: *mut SlideCounts) -> SlideStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let c = r.0.counts;
        *out.as_mut().ok_or_else(|| null("out"))? = SlideCounts {
            grad_calls: c.grad,
            subgrad_calls: c.subgrad,
            stoch_calls: c.stoch,
        };
        Ok(())
    })
}

/// `Ψ(output) − Ψ*`; `NoReference` unless the problem had a reference when the run started.
///
/// # Safety
/// `run` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn slide_run_final_gap(run: *const SlideRun, out: *mut f64) -> SlideStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let gap = r
            .0
            .final_gap()
            .ok_or_else(|| Fail(SlideStatus::NoReference, "no reference attached".into()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = gap;
        Ok(())
    })
}

/// Runs a TOML experiment config and returns the JSON summary in `out_json`,
/// to be released with [`slide_string_free`].
///
/// # Safety
/// `config_toml` must be a valid C string and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slide_experiment_run(config_toml: *const c_char, out_json: *mut *mut c_char) -> SlideStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let config = ExperimentConfig::from_toml(str_arg(config_toml, "config_toml")?)?;
        let report = run_experiment(&config)?;
        let json = CString::new(report.summary_json()).expect("json has no nul bytes");
        *out_json = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn slide_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
