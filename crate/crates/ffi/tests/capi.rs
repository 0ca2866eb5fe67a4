use std::ffi::{CStr, CString};
use std::ptr;

use tangent_mbd_ffi::*;

fn last_error() -> String {
    let p = tmbd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn scenario(name: &str, overrides: &[(&str, f64)]) -> Result<*mut TmbdScenario, (TmbdStatus, String)> {
    let name = CString::new(name).unwrap();
    let keys: Vec<CString> = overrides.iter().map(|(k, _)| CString::new(*k).unwrap()).collect();
    let key_ptrs: Vec<*const std::ffi::c_char> = keys.iter().map(|k| k.as_ptr()).collect();
    let values: Vec<f64> = overrides.iter().map(|(_, v)| *v).collect();
    let mut out = ptr::null_mut();
    let st = unsafe { tmbd_scenario_new(name.as_ptr(), key_ptrs.as_ptr(), values.as_ptr(), overrides.len(), &mut out) };
    if st == TmbdStatus::Ok {
        assert!(tmbd_last_error_message().is_null());
        Ok(out)
    } else {
        assert!(out.is_null());
        Err((st, last_error()))
    }
}

fn defaults(sc: *const TmbdScenario) -> TmbdRunOptions {
    let mut o = std::mem::MaybeUninit::<TmbdRunOptions>::uninit();
    assert_eq!(unsafe { tmbd_run_options_default(sc, o.as_mut_ptr()) }, TmbdStatus::Ok);
    unsafe { o.assume_init() }
}

fn run(sc: *const TmbdScenario, o: &TmbdRunOptions) -> *mut TmbdTrajectory {
    let mut tr = ptr::null_mut();
    assert_eq!(unsafe { tmbd_scenario_run(sc, o, &mut tr) }, TmbdStatus::Ok, "{}", last_error());
    tr
}

#[test]
fn pendulum_round_trip() {
    let sc = scenario("pendulum-constrained", &[]).unwrap();
    let (mut n, mut m) = (0, 0);
    assert_eq!(unsafe { tmbd_scenario_dims(sc, &mut n, &mut m) }, TmbdStatus::Ok);
    assert_eq!((n, m), (3, 2));

    let mut w = 0.0;
    assert_eq!(unsafe { tmbd_scenario_omega_max(sc, &mut w) }, TmbdStatus::Ok);
    assert!((w - 3.1304951).abs() < 1e-6);
    let limit = tmbd_newmark_dt_limit(w, 0.5, 1.0 / 12.0);
    assert!((limit - 0.78246).abs() < 5e-6);

    let mut o = defaults(sc);
    assert_eq!(o.method, TmbdMethod::TangentNewmark as u32);
    o.dt = 0.6;
    o.t_end = 60.0;
    let tr = run(sc, &o);
    assert_eq!(unsafe { tmbd_trajectory_len(tr) }, 101);
    assert!(!unsafe { tmbd_trajectory_diverged(tr) });

    let mut len = 0;
    assert_eq!(unsafe { tmbd_trajectory_vector(tr, 100, 0, ptr::null_mut(), 0, &mut len) }, TmbdStatus::Ok);
    assert_eq!(len, 3);
    let mut x = [0.0; 3];
    assert_eq!(unsafe { tmbd_trajectory_vector(tr, 100, 0, x.as_mut_ptr(), 3, &mut len) }, TmbdStatus::Ok);
    assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs() < 1e-10);

    let (mut t, mut e, mut norms, mut it) = (0.0, 0.0, [0.0; 3], 0u32);
    assert_eq!(
        unsafe { tmbd_trajectory_record(tr, 100, &mut t, &mut e, norms.as_mut_ptr(), &mut it) },
        TmbdStatus::Ok
    );
    assert!((t - 60.0).abs() < 1e-9);
    assert!(norms[0] < 1e-10 && it >= 1);

    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { tmbd_trajectory_vector(tr, 0, 3, small.as_mut_ptr(), 1, ptr::null_mut()) },
        TmbdStatus::BufferTooSmall
    );
    assert!(last_error().contains("needed"));
    assert_eq!(unsafe { tmbd_trajectory_vector(tr, 0, 7, ptr::null_mut(), 0, ptr::null_mut()) }, TmbdStatus::InvalidArgument);
    assert_eq!(unsafe { tmbd_trajectory_record(tr, 101, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, TmbdStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { tmbd_trajectory_write_csv(tr, path.as_ptr()) }, TmbdStatus::Ok);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 101);

    unsafe {
        tmbd_trajectory_free(tr);
        tmbd_scenario_free(sc);
    }
}

#[test]
fn classical_divergence_is_reported_on_the_trajectory() {
    let sc = scenario("pendulum-constrained", &[]).unwrap();
    let mut o = defaults(sc);
    o.method = TmbdMethod::ClassicalIndex3 as u32;
    let tr = run(sc, &o);
    assert!(unsafe { tmbd_trajectory_diverged(tr) });
    assert!(unsafe { tmbd_trajectory_len(tr) } < 6001);
    unsafe {
        tmbd_trajectory_free(tr);
        tmbd_scenario_free(sc);
    }
}

#[test]
fn overrides_reach_the_model() {
    let sc = scenario("pendulum-minimal", &[("length", 4.0)]).unwrap();
    let mut w = 0.0;
    assert_eq!(unsafe { tmbd_scenario_omega_max(sc, &mut w) }, TmbdStatus::Ok);
    assert!(w < 3.0);
    let (mut n, mut m) = (0, 0);
    assert_eq!(unsafe { tmbd_scenario_dims(sc, &mut n, &mut m) }, TmbdStatus::Ok);
    assert_eq!((n, m), (1, 0));
    unsafe { tmbd_scenario_free(sc) };
}

#[test]
fn errors_map_to_status_codes() {
    let (st, msg) = scenario("no-such-thing", &[]).unwrap_err();
    assert_eq!(st, TmbdStatus::Config);
    assert!(msg.contains("unknown scenario"));
    let (st, _) = scenario("pendulum-minimal", &[("colour", 1.0)]).unwrap_err();
    assert_eq!(st, TmbdStatus::Config);
    let (st, _) = scenario("pendulum-minimal", &[("mass", -1.0)]).unwrap_err();
    assert_ne!(st, TmbdStatus::Ok);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tmbd_scenario_new(ptr::null(), ptr::null(), ptr::null(), 0, &mut out) }, TmbdStatus::NullPointer);
    let name = CString::new("pendulum-minimal").unwrap();
    assert_eq!(unsafe { tmbd_scenario_new(name.as_ptr(), ptr::null(), ptr::null(), 2, &mut out) }, TmbdStatus::NullPointer);
    assert_eq!(unsafe { tmbd_scenario_new(name.as_ptr(), ptr::null(), ptr::null(), 0, ptr::null_mut()) }, TmbdStatus::NullPointer);

    let sc = scenario("pendulum-minimal", &[]).unwrap();
    let mut o = defaults(sc);
    let mut tr = ptr::null_mut();
    o.method = 9;
    assert_eq!(unsafe { tmbd_scenario_run(sc, &o, &mut tr) }, TmbdStatus::InvalidArgument);
    o.method = TmbdMethod::TangentNewmark as u32;
    assert_eq!(unsafe { tmbd_scenario_run(sc, &o, &mut tr) }, TmbdStatus::Config);
    o.method = TmbdMethod::NewmarkMinimal as u32;
    o.dt = -1.0;
    assert_eq!(unsafe { tmbd_scenario_run(sc, &o, &mut tr) }, TmbdStatus::InvalidArgument);
    assert!(tr.is_null());
    assert!(last_error().contains("dt"));

    assert_eq!(unsafe { tmbd_trajectory_len(ptr::null()) }, 0);
    assert!(!unsafe { tmbd_trajectory_diverged(ptr::null()) });
    unsafe {
        tmbd_scenario_free(ptr::null_mut());
        tmbd_trajectory_free(ptr::null_mut());
        tmbd_scenario_free(sc);
    }
}

#[test]
fn errors_are_per_thread() {
    let _ = scenario("no-such-thing", &[]);
    assert!(!tmbd_last_error_message().is_null());
    std::thread::spawn(|| assert!(tmbd_last_error_message().is_null()))
        .join()
        .unwrap();
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(tmbd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
