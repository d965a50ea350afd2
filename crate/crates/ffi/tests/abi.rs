use std::ffi::{c_char, CStr, CString};
use std::ptr;

use vlasov_dg_ffi::*;

fn name(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        vdg_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn small_config(scenario: &str) -> VdgConfig {
    let mut cfg = std::mem::MaybeUninit::<VdgConfig>::uninit();
    let st = unsafe { vdg_config_default(name(scenario).as_ptr(), cfg.as_mut_ptr()) };
    assert_eq!(st, VdgStatus::Ok);
    let mut cfg = unsafe { cfg.assume_init() };
    cfg.nx = 6;
    cfg.nv = 6;
    cfg.degree = 2;
    cfg
}

#[test]
fn forced_run_through_the_abi() {
    let mut cfg = small_config("forced");
    cfg.fixed_dt = 0.01;
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(vdg_simulation_new(name("forced").as_ptr(), &cfg, &mut sim), VdgStatus::Ok);
        assert!(!sim.is_null());
        let mut dt = 0.0;
        assert_eq!(vdg_simulation_step(sim, &mut dt), VdgStatus::Ok);
        assert_eq!(dt, 0.01);
        assert_eq!(vdg_simulation_advance_to(sim, 0.1), VdgStatus::Ok);
        let mut t = 0.0;
        assert_eq!(vdg_simulation_time(sim, &mut t), VdgStatus::Ok);
        assert!((t - 0.1).abs() < 1e-14);

        let mut d = VdgDiagnostics::default();
        assert_eq!(vdg_simulation_diagnostics(sim, &mut d), VdgStatus::Ok);
        assert!(d.mass > 0.0 && d.mass_dev.abs() < 1e-10);

        let mut len = 0;
        assert_eq!(vdg_simulation_num_coeffs(sim, &mut len), VdgStatus::Ok);
        assert_eq!(len, 36 * 9);
        let mut coeffs = vec![0.0; len];
        assert_eq!(vdg_simulation_copy_coeffs(sim, coeffs.as_mut_ptr(), len), VdgStatus::Ok);
        assert!(coeffs.iter().all(|c| c.is_finite()));
        assert_eq!(vdg_simulation_copy_coeffs(sim, coeffs.as_mut_ptr(), len - 1), VdgStatus::LengthMismatch);

        let mut f = 0.0;
        assert_eq!(vdg_simulation_evaluate(sim, 0.0, 0.25, &mut f), VdgStatus::Ok);
        assert!(f > 0.0);
        assert_eq!(vdg_simulation_evaluate(sim, 10.0, 0.0, &mut f), VdgStatus::InvalidArgument);

        let mut err = 0.0;
        assert_eq!(vdg_simulation_l2_error(sim, &mut err), VdgStatus::Ok);
        assert!(err > 0.0 && err < 1.0);
        vdg_simulation_free(sim);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    let cfg = small_config("weak-landau");
    let mut sim = ptr::null_mut();
    unsafe {
        let st = vdg_simulation_new(name("no-such-scenario").as_ptr(), &cfg, &mut sim);
        assert_eq!(st, VdgStatus::Config);
        assert!(sim.is_null());
        assert!(last_error().contains("no-such-scenario"));

        assert_eq!(vdg_simulation_new(ptr::null(), &cfg, &mut sim), VdgStatus::NullPointer);
        assert_eq!(vdg_simulation_step(ptr::null_mut(), ptr::null_mut()), VdgStatus::NullPointer);

        let mut bad = cfg;
        bad.nv = 5;
        assert_eq!(vdg_simulation_new(name("weak-landau").as_ptr(), &bad, &mut sim), VdgStatus::Config);

        // Without an exact solution there is no error norm.
        assert_eq!(vdg_simulation_new(name("weak-landau").as_ptr(), &cfg, &mut sim), VdgStatus::Ok);
        let mut err = 0.0;
        assert_eq!(vdg_simulation_l2_error(sim, &mut err), VdgStatus::Config);
        assert_eq!(vdg_simulation_advance_to(sim, f64::NAN), VdgStatus::InvalidArgument);
        vdg_simulation_free(sim);
        vdg_simulation_free(ptr::null_mut());
    }
}

#[test]
fn message_length_query() {
    unsafe {
        let mut sim = ptr::null_mut();
        let cfg = small_config("forced");
        vdg_simulation_new(name("x").as_ptr(), &cfg, &mut sim);
        let full = vdg_last_error_message(ptr::null_mut(), 0);
        let mut small = [0 as c_char; 4];
        assert_eq!(vdg_last_error_message(small.as_mut_ptr(), small.len()), full);
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(vdg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vlasov_dg.h")).unwrap();
    for sym in [
        "vdg_config_default",
        "vdg_simulation_new",
        "vdg_simulation_free",
        "vdg_simulation_step",
        "vdg_simulation_advance_to",
        "vdg_simulation_diagnostics",
        "vdg_simulation_copy_coeffs",
        "vdg_last_error_message",
        "typedef struct VdgSimulation VdgSimulation",
        "VDG_STATUS_BLOW_UP",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"vlasov_dg.h\"\nint main(void) { VdgConfig c; (void)c; return VDG_STATUS_OK; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("vdg-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
