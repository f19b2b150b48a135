use std::ffi::{c_char, CStr, CString};
use std::ptr;

use viscoflow_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = vf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    vf_string_free(p);
    s
}

fn scenario(name: &str) -> *mut VfExperiment {
    let mut exp = ptr::null_mut();
    let st = unsafe { vf_experiment_from_scenario(cstr(name).as_ptr(), &mut exp) };
    assert_eq!(st, VfStatus::Ok);
    assert!(!exp.is_null());
    exp
}

#[test]
fn ball_scenario_round_trip() {
    unsafe {
        let exp = scenario("example1_ball");
        let mut dim = 0usize;
        assert_eq!(vf_experiment_dim(exp, &mut dim), VfStatus::Ok);
        assert_eq!(dim, 2);

        let mut trace = ptr::null_mut();
        assert_eq!(vf_experiment_run(exp, &mut trace), VfStatus::Ok);
        let mut cause = VfStopCause::Diverged;
        assert_eq!(vf_trace_stop_cause(trace, &mut cause), VfStatus::Ok);
        assert_eq!(cause, VfStopCause::ResidualMet);

        let mut k = 0usize;
        assert_eq!(vf_trace_iterations(trace, &mut k), VfStatus::Ok);
        assert!(k > 0);
        let mut tdim = 0usize;
        assert_eq!(vf_trace_dim(trace, &mut tdim), VfStatus::Ok);
        assert_eq!(tdim, 2);

        let mut x = [0.0f64; 2];
        assert_eq!(vf_trace_iterate(trace, k, x.as_mut_ptr(), 2), VfStatus::Ok);
        assert!((x[0] - 1.0).abs() < 1e-3 && x[1].abs() < 1e-3, "{x:?}");

        let mut r = -1.0;
        assert_eq!(vf_trace_step_residual(trace, k - 1, &mut r), VfStatus::Ok);
        assert!((0.0..=1e-9).contains(&r), "{r}");

        assert_eq!(vf_trace_iterate(trace, k + 1, x.as_mut_ptr(), 2), VfStatus::OutOfRange);
        assert!(last_error().contains("beyond"));
        assert_eq!(vf_trace_step_residual(trace, k, &mut r), VfStatus::OutOfRange);

        let mut q = [0.0f64; 2];
        assert_eq!(vf_experiment_q_map(exp, q.as_mut_ptr(), 2), VfStatus::Ok);
        assert!((q[0] - 1.0).abs() < 1e-3 && q[1].abs() < 1e-3, "{q:?}");

        let mut json = ptr::null_mut();
        assert_eq!(vf_experiment_limit_report_json(exp, x.as_ptr(), 2, &mut json), VfStatus::Ok);
        let rep: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(rep["pass"], true);

        let mut sha = ptr::null_mut();
        assert_eq!(vf_experiment_config_sha256(exp, &mut sha), VfStatus::Ok);
        assert_eq!(take_string(sha).len(), 64);

        vf_trace_free(trace);
        vf_experiment_free(exp);
    }
}

#[test]
fn json_config_matches_bundled_scenario() {
    let text = viscoflow::scenarios::json("example2_mann").unwrap();
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(vf_experiment_from_json(cstr(text).as_ptr(), &mut a), VfStatus::Ok);
        let b = scenario("example2_mann");
        let (mut sa, mut sb) = (ptr::null_mut(), ptr::null_mut());
        vf_experiment_config_sha256(a, &mut sa);
        vf_experiment_config_sha256(b, &mut sb);
        assert_eq!(take_string(sa), take_string(sb));
        vf_experiment_free(a);
        vf_experiment_free(b);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut exp = ptr::null_mut();
        let st = vf_experiment_from_json(cstr("{not json").as_ptr(), &mut exp);
        assert_eq!(st, VfStatus::Config);
        assert!(exp.is_null());
        assert!(last_error().contains("schema"));

        let bad_alpha = viscoflow::scenarios::json("example1_ball")
            .unwrap()
            .replace(r#"{"family": "harmonic"}"#, r#"{"family": "constant", "value": 1.5}"#);
        assert_eq!(vf_experiment_from_json(cstr(&bad_alpha).as_ptr(), &mut exp), VfStatus::Hypothesis);
        assert!(last_error().contains("(i)"));

        assert_eq!(vf_experiment_from_scenario(cstr("nope").as_ptr(), &mut exp), VfStatus::Config);
        assert_eq!(vf_experiment_from_json(ptr::null(), &mut exp), VfStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(vf_experiment_dim(ptr::null(), ptr::null_mut()), VfStatus::NullPointer);

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            vf_experiment_from_json(invalid.as_ptr().cast(), &mut exp),
            VfStatus::InvalidUtf8
        );

        let e = scenario("example1_ball");
        let mut small = [0.0f64; 1];
        assert_eq!(vf_experiment_q_map(e, small.as_mut_ptr(), 1), VfStatus::BufferTooSmall);
        assert!(last_error().contains("needed"));

        let mut dim = 0;
        assert_eq!(vf_experiment_dim(e, &mut dim), VfStatus::Ok);
        assert!(vf_last_error_message().is_null());
        vf_experiment_free(e);

        vf_experiment_free(ptr::null_mut());
        vf_trace_free(ptr::null_mut());
        vf_string_free(ptr::null_mut());
    }
}

#[test]
fn projection_onto_sets() {
    unsafe {
        let ball = cstr(r#"{"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}"#);
        let x = [3.0, 4.0];
        let mut out = [0.0; 2];
        assert_eq!(vf_project(ball.as_ptr(), x.as_ptr(), out.as_mut_ptr(), 2), VfStatus::Ok);
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);

        let boxed = cstr(r#"{"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}"#);
        let x = [-2.0, 0.25];
        assert_eq!(vf_project(boxed.as_ptr(), x.as_ptr(), out.as_mut_ptr(), 2), VfStatus::Ok);
        assert_eq!(out, [0.0, 0.25]);

        let x3 = [1.0, 2.0, 3.0];
        let mut out3 = [0.0; 3];
        assert_eq!(
            vf_project(ball.as_ptr(), x3.as_ptr(), out3.as_mut_ptr(), 3),
            VfStatus::DimensionMismatch
        );

        let bogus = cstr(r#"{"kind": "torus"}"#);
        assert_eq!(vf_project(bogus.as_ptr(), x.as_ptr(), out.as_mut_ptr(), 2), VfStatus::Config);
    }
}

#[test]
fn schedule_validation() {
    let cases = [
        (r#"{"family": "harmonic"}"#, VfStatus::Ok, 0, Some("certified")),
        (r#"{"family": "power", "p": 2.0, "c": 1.0}"#, VfStatus::Ok, 1, Some("violated")),
        (r#"{"family": "constant", "value": 0.3}"#, VfStatus::Ok, 1, Some("violated")),
        (r#"{"family": "zigzag"}"#, VfStatus::Config, -1, None),
    ];
    for (text, status, flag, verdict) in cases {
        let mut json = ptr::null_mut();
        let mut violated = -1;
        let st = unsafe { vf_validate_schedule_json(cstr(text).as_ptr(), 1, 10_000, &mut json, &mut violated) };
        assert_eq!(st, status, "{text}");
        assert_eq!(violated, flag, "{text}");
        if let Some(v) = verdict {
            let rep: serde_json::Value = serde_json::from_str(&unsafe { take_string(json) }).unwrap();
            assert_eq!(rep["verdict"], v);
        } else {
            assert!(json.is_null());
        }
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(vf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const HEADER: &str = include_str!("../include/viscoflow.h");

#[test]
fn header_declares_every_export() {
    for name in [
        "vf_last_error_message",
        "vf_version",
        "vf_string_free",
        "vf_experiment_from_json",
        "vf_experiment_from_scenario",
        "vf_experiment_free",
        "vf_experiment_dim",
        "vf_experiment_config_sha256",
        "vf_experiment_run",
        "vf_experiment_q_map",
        "vf_experiment_limit_report_json",
        "vf_trace_free",
        "vf_trace_iterations",
        "vf_trace_dim",
        "vf_trace_stop_cause",
        "vf_trace_iterate",
        "vf_trace_step_residual",
        "vf_project",
        "vf_validate_schedule_json",
        "VF_STATUS_BUFFER_TOO_SMALL",
        "VF_STOP_CAUSE_MAX_ITERS",
    ] {
        assert!(HEADER.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"viscoflow.h\"\nint main(void) { VfStatus s = VF_STATUS_OK; return (int)s; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which(bin: &str) -> Result<String, ()> {
    let path = std::env::var_os("PATH").ok_or(())?;
    std::env::split_paths(&path)
        .map(|d| d.join(bin))
        .find(|p| p.is_file())
        .map(|p| p.display().to_string())
        .ok_or(())
}
