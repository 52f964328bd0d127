use std::fs;
use std::path::Path;
use std::process::Command;

fn sle(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sle"));
    c.args(args).env_remove("SLE_OUT_DIR");
    c
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

fn out_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn sample_writes_traces_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let args = [
        "sample",
        "--kappa",
        "2",
        "--dt",
        "1e-3",
        "--t-max",
        "0.5",
        "--seed",
        "7",
        "--replicas",
        "4",
        "--out",
        &out,
    ];
    assert_eq!(code(&mut sle(&args)), 0);
    for k in 0..4 {
        assert!(dir.path().join(format!("trace-{k:04}.txt")).exists());
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    for line in ["kappa = 2", "dt = 0.001", "t_max = 0.5", "seed = 7", "replicas = 4"] {
        assert!(manifest.contains(line), "{manifest}");
    }

    // The manifest reproduces the run.
    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("manifest.txt");
    let status = sle(&[
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out_arg(again.path()),
    ])
    .status()
    .unwrap();
    assert!(status.success());
    for k in 0..4 {
        let name = format!("trace-{k:04}.txt");
        assert_eq!(
            fs::read(dir.path().join(&name)).unwrap(),
            fs::read(again.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn flags_override_the_file_and_env_sets_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "kappa = 8/3\ndt = 0.01\nt_max = 0.1\nseed = 3\n").unwrap();
    let out = dir.path().join("from-env");
    let status = sle(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "5"])
        .env("SLE_OUT_DIR", &out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("dt = 0.01"));
    let trace = fs::read_to_string(out.join("trace-0000.txt")).unwrap();
    assert!(trace.contains("seed=5\n"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "kappa = 2\nwalkers = 10\n").unwrap();
    let o = sle(&["sample", "--config", cfg.to_str().unwrap(), "--out", &out])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("walkers"));
    let o = sle(&["sample", "--out", &out]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa"));
    assert_eq!(code(&mut sle(&["sample", "--kappa", "-1", "--out", &out])), 2);
    assert_eq!(
        code(&mut sle(&[
            "cover", "--kappa", "2", "--m", "3", "--M", "2", "--out", &out
        ])),
        2
    );
    assert_eq!(code(&mut sle(&["frobnicate"])), 2);
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // Far too short a horizon for the conformal radius to settle.
    let args = [
        "green-verify",
        "--kappa",
        "2",
        "--n",
        "20",
        "--t-max",
        "0.2",
        "--out",
        &out_arg(dir.path()),
    ];
    let o = sle(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_give_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let args = [
            "green-verify",
            "--kappa",
            "2",
            "--n",
            "40",
            "--eps",
            "0.2,0.1",
            "--no-timestamp",
            "--out",
            &out_arg(d.path()),
        ];
        assert_eq!(code(&mut sle(&args)), 0);
    }
    for f in ["green.csv", "green.schema.txt", "green.svg", "manifest.txt"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        if f == "manifest.txt" {
            // Only the output directory differs.
            let strip = |v: Vec<u8>| {
                String::from_utf8(v)
                    .unwrap()
                    .lines()
                    .filter(|l| !l.starts_with("out ="))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(x), strip(y));
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
    let csv = fs::read_to_string(a.path().join("green.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn hcap_check_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "hcap-check",
        "--kappa",
        "8/3",
        "--walkers",
        "2000",
        "--workers",
        "1",
        "--out",
        &out_arg(dir.path()),
    ];
    assert_eq!(code(&mut sle(&args)), 0);
    let csv = fs::read_to_string(dir.path().join("hcap.csv")).unwrap();
    assert!(csv.starts_with("t,expected,estimate,stderr,z_score,walkers,y0\n1,0.75,"));
    assert!(!dir.path().join("hcap.svg").exists());
}
