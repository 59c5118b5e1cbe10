use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hermite_fp::bifurcation::SelfConsistencyMap;
use hermite_fp::io::{sha256_hex, CsvTable};
use hermite_fp::operators::bistable_potential;
use hermite_fp::run::verify_branch_file;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hermite-fp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_config(cmd: &str, dir: &Path, text: &str) -> Output {
    let cfg = dir.join(format!("{cmd}.toml"));
    fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    run(&[
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                sha256_hex(&fs::read(e.path()).unwrap()),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn zeta_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["zeta", "--out", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    for line in [
        "model,zeta,alpha",
        "OU,0.70711,0",
        "H,0.70711,0",
        "B,0.624,0",
        "NS,0.944,",
    ] {
        assert!(text.contains(line), "missing '{line}' in\n{text}");
    }
    let t = CsvTable::read(&dir.path().join("zeta.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.header.get("config-hash").is_some());
}

#[test]
fn bifurcate_branches_reverify() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        "bifurcate",
        dir.path(),
        "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbeta_range = [1, 4]\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let map = SelfConsistencyMap::white_exact(bistable_potential(), 1.0).unwrap();
    let out_dir = dir.path().join("out");
    let mut n = 0;
    for k in 0.. {
        let path = out_dir.join(format!("branch_{k}.csv"));
        if !path.exists() {
            break;
        }
        let t = CsvTable::read(&path).unwrap();
        assert_eq!(
            t.columns,
            ["beta", "m", "stability", "backend", "epsilon", "model"]
        );
        assert!(verify_branch_file(&path, &map).unwrap() < 1e-6);
        n += 1;
    }
    assert!(n >= 2, "{n} branches");
    let bif = CsvTable::read(&out_dir.join("bifurcations.csv"))
        .unwrap()
        .floats("beta")
        .unwrap();
    assert!(bif.iter().any(|b| (b - 2.188).abs() < 1e-2), "{bif:?}");
}

#[test]
fn compare_three_backends() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        "compare",
        dir.path(),
        "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbetas = [6]\nnoise = \"OU\"\nepsilon = 0.1\n\
         [numerics]\ndegrees = [30, 12]\n[mc]\nn_particles = 1000\nburn_in = 10\nwindow = 10\nseed = 4\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = CsvTable::read(&dir.path().join("out/compare.csv")).unwrap();
    let i = t.column("agree").unwrap();
    assert_eq!(t.rows[0][i], "true", "{:?}", t.rows);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("solve-linear", "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbeta = 2\nm = 0.3\nnoise = \"OU\"\nepsilon = 0.2\n[numerics]\ndegrees = [20, 8]\n"),
        ("mc", "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbetas = [3, 6]\nnoise = \"B\"\nepsilon = 0.2\n[mc]\nn_particles = 300\nburn_in = 2\nwindow = 2\nseed = 11\n"),
    ];
    for (cmd, text) in cases {
        let mut seen = Vec::new();
        for _ in 0..2 {
            let out_dir = dir.path().join("out");
            let _ = fs::remove_dir_all(&out_dir);
            let out = run_config(cmd, dir.path(), text);
            assert!(
                out.status.success(),
                "{cmd}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            seen.push(digests(&out_dir));
        }
        assert!(!seen[0].is_empty());
        assert_eq!(seen[0], seen[1], "{cmd}");
    }
}

#[test]
fn seed_flag_changes_particles() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbetas = [4]\n[mc]\nn_particles = 200\nburn_in = 1\nwindow = 1\n";
    let cfg = dir.path().join("mc.toml");
    fs::write(&cfg, text).unwrap();
    let mut m = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = run(&[
            "mc",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success());
        m.push(
            CsvTable::read(&out.join("mc.csv"))
                .unwrap()
                .floats("m_hat")
                .unwrap()[0],
        );
    }
    assert_ne!(m[0], m[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = run_config(
        "solve-linear",
        dir.path(),
        "[problem]\npotential = [0, 0, 0.5]\nbeta = 1\nthetaa = 1\n",
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("thetaa"));
    let missing = run(&[
        "solve-linear",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(4));
    // no steady state is reachable in so short a run
    let stuck = run_config(
        "self-consistency",
        dir.path(),
        "[problem]\npotential = [0, 0, -0.5, 0, 0.25]\ntheta = 1\nbeta = 3\n[numerics]\ndegrees = [30]\nbackend = \"spectral-mckean\"\nt_final = 0.01\nsteady_tol = 1e-14\n",
    );
    assert_eq!(
        stuck.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&stuck.stderr)
    );
    let unknown = run(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
}
