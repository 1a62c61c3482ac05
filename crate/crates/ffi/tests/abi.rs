use std::ffi::{CStr, CString};
use std::ptr;

use pdsflow_ffi::*;

fn last_error() -> String {
    let p = pds_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { pds_string_free(p) };
    s
}

fn scenario(name: &str) -> *mut PdsDomain {
    let name = CString::new(name).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { pds_domain_from_scenario(name.as_ptr(), &mut d) },
        PdsStatus::Ok
    );
    d
}

#[test]
fn wedge_cone_and_projection() {
    let d = scenario("wedge");
    assert_eq!(unsafe { pds_domain_dim(d) }, 2);
    let x = [0.0, 0.0];
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { pds_cone_json(d, x.as_ptr(), 2, 0.0, &mut json) },
        PdsStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { pds_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);

    let mut out = [0.0; 2];
    let mut piece = usize::MAX;
    assert_eq!(
        unsafe { pds_project_to_set(d, x.as_ptr(), 2, 0.01, out.as_mut_ptr(), &mut piece) },
        PdsStatus::Ok
    );
    assert!((out[0] - 0.01).abs() < 1e-9 && out[1].abs() < 1e-9);
    assert_eq!(piece, 0);
    unsafe { pds_domain_free(d) };
}

#[test]
fn errors_are_reported() {
    let d = scenario("wedge");
    let bad = [0.0, -1.0];
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { pds_cone_json(d, bad.as_ptr(), 2, 0.0, &mut json) },
        PdsStatus::Infeasible
    );
    assert!(last_error().contains("infeasible"));
    assert_eq!(
        unsafe { pds_cone_json(d, bad.as_ptr(), 3, 0.0, &mut json) },
        PdsStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { pds_cone_json(ptr::null(), bad.as_ptr(), 2, 0.0, &mut json) },
        PdsStatus::NullPointer
    );
    let name = CString::new("nope").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { pds_domain_from_scenario(name.as_ptr(), &mut h) },
        PdsStatus::InvalidArgument
    );
    assert!(last_error().contains("nope"));
    unsafe { pds_domain_free(d) };
}

#[test]
fn certify_separates_wedge_and_parabola() {
    for (name, expected) in [
        ("wedge", PdsVerdict::ForwardLipschitz),
        ("parabola", PdsVerdict::Divergent),
    ] {
        let d = scenario(name);
        let c = [0.0, 0.0];
        let mut verdict = PdsVerdict::Inconclusive;
        let mut l_hat = 0.0;
        let s =
            unsafe { pds_certify(d, 0.0, c.as_ptr(), 2, 0.05, 20, 0, &mut verdict, &mut l_hat) };
        assert_eq!(s, PdsStatus::Ok);
        assert_eq!(verdict, expected, "{name}");
        unsafe { pds_domain_free(d) };
    }
}

#[test]
fn simulate_and_read_back() {
    let d = scenario("moving-wall");
    let x0 = [0.0];
    let mut tr = ptr::null_mut();
    let s = unsafe {
        pds_simulate(
            d,
            ptr::null(),
            x0.as_ptr(),
            1,
            0.0,
            1.0,
            0.01,
            PdsScheme::CatchingUp,
            &mut tr,
        )
    };
    assert_eq!(s, PdsStatus::Ok);
    assert_eq!(unsafe { pds_trajectory_len(tr) }, 101);
    let (mut t, mut x, mut piece) = (0.0, [0.0], 9);
    assert_eq!(
        unsafe { pds_trajectory_node(tr, 50, &mut t, x.as_mut_ptr(), 1, &mut piece) },
        PdsStatus::Ok
    );
    assert!((x[0] - t).abs() < 1e-12 && piece == 0);
    assert_eq!(
        unsafe { pds_trajectory_node(tr, 101, &mut t, x.as_mut_ptr(), 1, &mut piece) },
        PdsStatus::InvalidArgument
    );
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { pds_trajectory_csv(tr, &mut csv) }, PdsStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    unsafe { pds_string_free(csv) };
    assert!(text.starts_with("t,x1,piece,feas_residual,speed\n"));
    unsafe {
        pds_trajectory_free(tr);
        pds_domain_free(d);
    }
}

#[test]
fn aborted_simulation_returns_partial_trajectory() {
    let spec = CString::new(
        r#"{"dimension":2,"pieces":[{"inequalities":[
        {"kind":"affine","coeffs":[0,-1]},
        {"kind":"quadratic","matrix":[[-1,0],[0,0]],"linear":[0,1],"time":1}]}]}"#,
    )
    .unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { pds_domain_from_json(spec.as_ptr(), &mut d) },
        PdsStatus::Ok
    );
    let field = CString::new(r#"{"kind":"zero","dimension":2}"#).unwrap();
    let x0 = [0.0, 0.0];
    let mut tr = ptr::null_mut();
    let s = unsafe {
        pds_simulate(
            d,
            field.as_ptr(),
            x0.as_ptr(),
            2,
            0.0,
            0.1,
            0.01,
            PdsScheme::TangentEuler,
            &mut tr,
        )
    };
    assert_eq!(s, PdsStatus::SimulationAborted);
    assert_eq!(unsafe { pds_trajectory_len(tr) }, 1);
    assert!(last_error().contains("aborted"));
    unsafe {
        pds_trajectory_free(tr);
        pds_domain_free(d);
    }
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pdsflow.h")).unwrap();
    for name in [
        "pds_domain_from_scenario",
        "pds_simulate",
        "pds_trajectory_free",
        "PDS_STATUS_OK",
        "typedef struct PdsDomain",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
