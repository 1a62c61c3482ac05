//! C ABI over `pdsflow`.
//!
//! Every entry point returns a [`PdsStatus`]. On failure the message is kept per thread
//! and can be fetched with [`pds_last_error_message`]. Handles are opaque and owned by
//! the caller once returned; release them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pdsflow::analysis::{forward_lipschitz_profile, CertifyOptions, PointSampler, Verdict};
use pdsflow::cones::{temporal_tangent_union, PolyhedronJson};
use pdsflow::domain::{DomainSpec, PiecewiseDomain};
use pdsflow::integrator::{simulate, FieldSpec, Scheme, SimulationConfig, Trajectory, VectorField};
use pdsflow::projection::{project_to_set, SetProjectionOptions};
use pdsflow::scenarios::Scenario;
use pdsflow::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    EmptyTangent = 4,
    ProjectionFailed = 5,
    SimulationAborted = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdsVerdict {
    ForwardLipschitz = 0,
    Divergent = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdsScheme {
    CatchingUp = 0,
    TangentEuler = 1,
}

/// A time-varying piecewise domain, optionally with the field and start of a scenario.
pub struct PdsDomain {
    domain: PiecewiseDomain,
    field: Option<VectorField>,
}

pub struct PdsTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> PdsStatus {
    match e {
        Error::Infeasible { .. } => PdsStatus::Infeasible,
        Error::EmptyTangent { .. } => PdsStatus::EmptyTangent,
        Error::SetProjectionFailed { .. } | Error::IterationCap { .. } => {
            PdsStatus::ProjectionFailed
        }
        Error::Step { source, .. } => status_of(source),
        _ => PdsStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> PdsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> PdsStatus) -> PdsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside pdsflow");
            PdsStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return PdsStatus::NullPointer;
        })+
    };
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, PdsStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        PdsStatus::InvalidArgument
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. Free with [`pds_string_free`].
#[no_mangle]
pub extern "C" fn pds_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |m| m.clone().into_raw())
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in scenario by name (`wedge`, `parabola`, `two-bus`, ...), including its field.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pds_domain_from_scenario(
    name: *const c_char,
    out: *mut *mut PdsDomain,
) -> PdsStatus {
    guard(|| {
        non_null!(name, out);
        let name = match read_str(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let built = Scenario::by_name(name).and_then(|s| Ok((s.build_domain()?, s.build_field()?)));
        match built {
            Ok((domain, field)) => {
                *out = Box::into_raw(Box::new(PdsDomain {
                    domain,
                    field: Some(field),
                }));
                PdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Domain from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pds_domain_from_json(
    json: *const c_char,
    out: *mut *mut PdsDomain,
) -> PdsStatus {
    guard(|| {
        non_null!(json, out);
        let text = match read_str(json) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let spec: DomainSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(Error::InvalidArgument(format!("domain json: {e}"))),
        };
        match spec.build() {
            Ok(domain) => {
                *out = Box::into_raw(Box::new(PdsDomain {
                    domain,
                    field: None,
                }));
                PdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `d` must come from a `pds_domain_from_*` call or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_domain_free(d: *mut PdsDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// State dimension, or 0 for NULL.
///
/// # Safety
/// `d` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_domain_dim(d: *const PdsDomain) -> usize {
    d.as_ref().map_or(0, |d| d.domain.dim())
}

unsafe fn vector<'a>(d: &PdsDomain, p: *const f64, n: usize) -> Result<&'a [f64], PdsStatus> {
    if n != d.domain.dim() {
        set_error(format!("expected {} components, got {n}", d.domain.dim()));
        return Err(PdsStatus::InvalidArgument);
    }
    Ok(slice::from_raw_parts(p, n))
}

/// # Safety
/// `x` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_domain_contains(
    d: *const PdsDomain,
    x: *const f64,
    n: usize,
    t: f64,
    out: *mut bool,
) -> PdsStatus {
    guard(|| {
        non_null!(d, x, out);
        let d = &*d;
        match vector(d, x, n) {
            Ok(x) => {
                *out = d.domain.contains(x, t);
                PdsStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Nearest point of `X(t)` to `y`, written to `out_x` (length `n`), with its piece index.
///
/// # Safety
/// `y` and `out_x` must point to `n` doubles; `out_piece` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_project_to_set(
    d: *const PdsDomain,
    y: *const f64,
    n: usize,
    t: f64,
    out_x: *mut f64,
    out_piece: *mut usize,
) -> PdsStatus {
    guard(|| {
        non_null!(d, y, out_x);
        let d = &*d;
        let y = match vector(d, y, n) {
            Ok(y) => y,
            Err(s) => return s,
        };
        match project_to_set(y, &d.domain, t, &SetProjectionOptions::default()) {
            Ok(p) => {
                slice::from_raw_parts_mut(out_x, n).copy_from_slice(&p.point);
                if !out_piece.is_null() {
                    *out_piece = p.piece_index;
                }
                PdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Tangent polyhedra of every piece containing `x`, as a JSON array. Free with
/// [`pds_string_free`].
///
/// # Safety
/// `x` must point to `n` doubles and `out_json` be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_cone_json(
    d: *const PdsDomain,
    x: *const f64,
    n: usize,
    t: f64,
    out_json: *mut *mut c_char,
) -> PdsStatus {
    guard(|| {
        non_null!(d, x, out_json);
        let d = &*d;
        let x = match vector(d, x, n) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match temporal_tangent_union(&d.domain, x, t) {
            Ok(u) => {
                let members: Vec<PolyhedronJson> = u
                    .members
                    .iter()
                    .map(|(i, p)| PolyhedronJson::new(*i, p))
                    .collect();
                *out_json =
                    into_c_string(serde_json::to_string(&members).expect("polyhedra serialize"));
                PdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Sampled forward Lipschitz verdict at `t` on the default delta grid.
///
/// # Safety
/// `center` must point to `n` doubles; `out_verdict` and `out_l_hat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_certify(
    d: *const PdsDomain,
    t: f64,
    center: *const f64,
    n: usize,
    radius: f64,
    samples: usize,
    seed: u64,
    out_verdict: *mut PdsVerdict,
    out_l_hat: *mut f64,
) -> PdsStatus {
    guard(|| {
        non_null!(d, center, out_verdict, out_l_hat);
        let d = &*d;
        let c = match vector(d, center, n) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let sampler = PointSampler {
            center: c.to_vec(),
            radius,
            count: samples,
            seed,
            ..PointSampler::default()
        };
        let grid = pdsflow::analysis::DEFAULT_DELTA_GRID;
        match forward_lipschitz_profile(&d.domain, t, &sampler, &grid, &CertifyOptions::default()) {
            Ok(p) => {
                *out_verdict = match p.verdict {
                    Verdict::ForwardLipschitz => PdsVerdict::ForwardLipschitz,
                    Verdict::Divergent => PdsVerdict::Divergent,
                    Verdict::Inconclusive => PdsVerdict::Inconclusive,
                };
                *out_l_hat = p.l_hat;
                PdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Simulates from `x0`. `field_json` selects the field; NULL uses the scenario's field.
/// On an aborted run the status is `SIMULATION_ABORTED` and `out` still receives the
/// partial trajectory.
///
/// # Safety
/// `x0` must point to `n` doubles, `field_json` be NULL or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pds_simulate(
    d: *const PdsDomain,
    field_json: *const c_char,
    x0: *const f64,
    n: usize,
    t0: f64,
    t_end: f64,
    dt: f64,
    scheme: PdsScheme,
    out: *mut *mut PdsTrajectory,
) -> PdsStatus {
    guard(|| {
        non_null!(d, x0, out);
        *out = ptr::null_mut();
        let d = &*d;
        let x0 = match vector(d, x0, n) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let field = if field_json.is_null() {
            match &d.field {
                Some(f) => f.clone(),
                None => {
                    return fail(Error::InvalidArgument(
                        "domain has no field; pass field_json".into(),
                    ))
                }
            }
        } else {
            let text = match read_str(field_json) {
                Ok(s) => s,
                Err(s) => return s,
            };
            match serde_json::from_str::<FieldSpec>(text)
                .map_err(|e| Error::InvalidArgument(format!("field json: {e}")))
            {
                Ok(spec) => match spec.build() {
                    Ok(f) => f,
                    Err(e) => return fail(e),
                },
                Err(e) => return fail(e),
            }
        };
        let scheme = match scheme {
            PdsScheme::CatchingUp => Scheme::CatchingUp,
            PdsScheme::TangentEuler => Scheme::TangentEuler,
        };
        match simulate(
            &d.domain,
            &field,
            x0,
            &SimulationConfig::new(t0, t_end, dt, scheme),
        ) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PdsTrajectory { inner }));
                PdsStatus::Ok
            }
            Err(f) => {
                set_error(f.to_string());
                *out = Box::into_raw(Box::new(PdsTrajectory { inner: *f.partial }));
                PdsStatus::SimulationAborted
            }
        }
    })
}

/// # Safety
/// `tr` must come from [`pds_simulate`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_trajectory_free(tr: *mut PdsTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `tr` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_trajectory_len(tr: *const PdsTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies node `k`: its time, its state (length `n`) and its piece index.
///
/// # Safety
/// `out_x` must point to `n` writable doubles; `out_t` and `out_piece` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pds_trajectory_node(
    tr: *const PdsTrajectory,
    k: usize,
    out_t: *mut f64,
    out_x: *mut f64,
    n: usize,
    out_piece: *mut usize,
) -> PdsStatus {
    guard(|| {
        non_null!(tr, out_x);
        let tr = &(*tr).inner;
        if k >= tr.len() {
            set_error(format!("node {k} out of range ({} nodes)", tr.len()));
            return PdsStatus::InvalidArgument;
        }
        let x = &tr.states[k];
        if n != x.len() {
            set_error(format!("expected {} components, got {n}", x.len()));
            return PdsStatus::InvalidArgument;
        }
        slice::from_raw_parts_mut(out_x, n).copy_from_slice(x);
        if !out_t.is_null() {
            *out_t = tr.times[k];
        }
        if !out_piece.is_null() {
            *out_piece = tr.piece_indices[k];
        }
        PdsStatus::Ok
    })
}

/// Trajectory as CSV (`t, x1..xn, piece, feas_residual, speed`). Free with [`pds_string_free`].
///
/// # Safety
/// `out_csv` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_trajectory_csv(
    tr: *const PdsTrajectory,
    out_csv: *mut *mut c_char,
) -> PdsStatus {
    guard(|| {
        non_null!(tr, out_csv);
        let mut buf = Vec::new();
        if let Err(e) = (*tr).inner.write_csv(&mut buf) {
            return fail(Error::InvalidArgument(e.to_string()));
        }
        *out_csv = into_c_string(String::from_utf8(buf).expect("csv is utf-8"));
        PdsStatus::Ok
    })
}
