use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hermite_fp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hfp_last_error()) }
        .to_string_lossy()
        .into_owned()
}

const BISTABLE: [f64; 5] = [0.0, 0.0, -0.5, 0.0, 0.25];

#[test]
fn white_map_matches_core() {
    let mut map = ptr::null_mut();
    unsafe {
        assert_eq!(
            hfp_map_white(BISTABLE.as_ptr(), 5, 1.0, &mut map),
            HfpStatus::Ok
        );
        let mut r = 0.0;
        assert_eq!(hfp_map_evaluate(map, 0.3, 3.0, &mut r), HfpStatus::Ok);
        let core = hermite_fp::bifurcation::SelfConsistencyMap::white_exact(
            hermite_fp::Poly1::new(BISTABLE.to_vec()),
            1.0,
        )
        .unwrap();
        assert_eq!(r, core.evaluate(0.3, 3.0).unwrap());

        let mut buf = [0.0; 8];
        let mut n = 0;
        assert_eq!(
            hfp_map_fixed_points(map, 3.0, -2.0, 2.0, 101, buf.as_mut_ptr(), 8, &mut n),
            HfpStatus::Ok
        );
        assert_eq!(n, 3);
        assert!(buf[..3].iter().any(|m| m.abs() < 1e-8));

        let mut small = [0.0; 1];
        let st = hfp_map_fixed_points(map, 3.0, -2.0, 2.0, 101, small.as_mut_ptr(), 1, &mut n);
        assert_eq!(st, HfpStatus::BufferTooSmall);
        assert_eq!(n, 3);
        hfp_map_free(map);
    }
}

#[test]
fn steady_state_through_handles() {
    unsafe {
        let quad = [0.0, 0.0, 0.5];
        let mut p = ptr::null_mut();
        assert_eq!(
            hfp_problem_white(quad.as_ptr(), 3, 0.0, 1.0, &mut p),
            HfpStatus::Ok
        );
        assert_eq!(hfp_problem_dims(p), 1);
        let mut b = ptr::null_mut();
        let deg = [40usize];
        let sig = [0.5];
        assert_eq!(
            hfp_basis_new(
                p,
                HFP_SHAPE_TRIANGLE,
                deg.as_ptr(),
                sig.as_ptr(),
                1,
                HFP_WEIGHT_ZERO,
                &mut b
            ),
            HfpStatus::Ok
        );
        assert_eq!(hfp_basis_len(b), 41);
        let mut f = ptr::null_mut();
        assert_eq!(hfp_steady_state(p, b, 0.0, &mut f), HfpStatus::Ok);
        let mut m = 1.0;
        assert_eq!(hfp_field_first_moment(f, &mut m), HfpStatus::Ok);
        assert!(m.abs() < 1e-10);
        let mut rho = 0.0;
        assert_eq!(
            hfp_field_evaluate(f, [0.0].as_ptr(), 1, &mut rho),
            HfpStatus::Ok
        );
        // standard normal density at the origin
        assert!((rho - 0.398_942_280_401_432_7).abs() < 1e-2, "{rho}");
        assert_eq!(
            hfp_field_evaluate(f, [0.0, 0.0].as_ptr(), 2, &mut rho),
            HfpStatus::DimensionMismatch
        );

        let mut need = 0;
        assert_eq!(
            hfp_field_coeffs(f, ptr::null_mut(), 0, &mut need),
            HfpStatus::BufferTooSmall
        );
        assert_eq!(need, 41);
        let mut c = vec![0.0; need];
        assert_eq!(
            hfp_field_coeffs(f, c.as_mut_ptr(), need, &mut need),
            HfpStatus::Ok
        );
        assert!(c[0] > 0.0);

        hfp_field_free(f);
        hfp_basis_free(b);
        hfp_problem_free(p);
    }
}

#[test]
fn spectral_colored_map_is_odd() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            hfp_problem_colored(HFP_MODEL_OU, BISTABLE.as_ptr(), 5, 1.0, 2.0, 0.2, &mut p),
            HfpStatus::Ok
        );
        let mut b = ptr::null_mut();
        let deg = [24usize, 10];
        let sig = [0.3, 1.0];
        assert_eq!(
            hfp_basis_new(
                p,
                HFP_SHAPE_RECTANGLE,
                deg.as_ptr(),
                sig.as_ptr(),
                2,
                HFP_WEIGHT_BETA_V,
                &mut b
            ),
            HfpStatus::Ok
        );
        let mut map = ptr::null_mut();
        assert_eq!(hfp_map_spectral(p, b, &mut map), HfpStatus::Ok);
        let (mut a, mut c) = (0.0, 0.0);
        assert_eq!(hfp_map_evaluate(map, 0.4, 2.5, &mut a), HfpStatus::Ok);
        assert_eq!(hfp_map_evaluate(map, -0.4, 2.5, &mut c), HfpStatus::Ok);
        assert!((a + c).abs() < 1e-8, "{a} {c}");
        hfp_map_free(map);
        hfp_basis_free(b);
        hfp_problem_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p = ptr::null_mut();
        let st = hfp_problem_colored(9, BISTABLE.as_ptr(), 5, 1.0, 1.0, 0.1, &mut p);
        assert_eq!(st, HfpStatus::InvalidArgument);
        assert!(last_error().contains("noise model"));
        assert!(p.is_null());

        assert_eq!(
            hfp_problem_white(BISTABLE.as_ptr(), 5, 1.0, -1.0, &mut p),
            HfpStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());

        let mut z = 0.0;
        assert_eq!(hfp_zeta(HFP_MODEL_OU, &mut z), HfpStatus::Ok);
        assert!(last_error().is_empty());
        assert!((z - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);

        assert_eq!(
            hfp_map_evaluate(ptr::null(), 0.0, 1.0, &mut z),
            HfpStatus::NullPointer
        );
        assert_eq!(
            hfp_zeta(HFP_MODEL_OU, ptr::null_mut()),
            HfpStatus::NullPointer
        );
        hfp_problem_free(ptr::null_mut());
    }
}

#[test]
fn seeded_particles_repeat() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            hfp_problem_colored(HFP_MODEL_OU, BISTABLE.as_ptr(), 5, 1.0, 4.0, 0.2, &mut p),
            HfpStatus::Ok
        );
        let run = || {
            let (mut m, mut se) = (0.0, 0.0);
            assert_eq!(
                hfp_mc_simulate(p, 200, 0.0, 1.0, 1.0, 11, &mut m, &mut se),
                HfpStatus::Ok
            );
            (m, se)
        };
        assert_eq!(run(), run());
        hfp_problem_free(p);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/hermite_fp.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else {
            continue;
        };
        let name = &rest[..rest.find('(').unwrap()];
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}

/// Build the static library for the current sources and return its path.
fn find_static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--quiet", "-p", "hermite-fp-ffi", "--lib"])
        .env("CARGO_TARGET_DIR", profile_dir.parent()?)
        .status()
        .ok()?;
    let lib = profile_dir.join("libhermite_fp_ffi.a");
    (status.success() && lib.exists()).then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = find_static_lib() else {
        eprintln!("static library not built; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(stdout.contains("roots 3"), "{stdout}");
}
