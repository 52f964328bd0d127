use std::fs;

use proptest::prelude::*;
use sle_core::io::{read_trace, write_trace, TraceMeta};
use sle_core::loewner::{trace, DrivingPath};
use sle_core::sampler::{sample_chordal, SamplerConfig};
use sle_core::Error;

fn meta(cfg: &SamplerConfig) -> TraceMeta {
    TraceMeta {
        dt: cfg.dt,
        t_max: cfg.t_max,
        seed: cfg.seed,
        replica: cfg.replica,
    }
}

#[test]
fn sampled_trace_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let cfg = SamplerConfig::new(8.0 / 3.0, 1e-3, 1.0, 7).unwrap().with_replica(3);
    let (driving, tr) = sample_chordal(&cfg).unwrap();
    write_trace(&path, &meta(&cfg), &tr).unwrap();
    let (m, d, back) = read_trace(&path).unwrap();
    assert_eq!(m, meta(&cfg));
    assert_eq!(*d, *driving);
    assert_eq!(back, tr);
    for (a, b) in back.points.iter().zip(&tr.points) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn arbitrary_paths_round_trip(
        kappa in 0.5f64..8.0,
        values in prop::collection::vec(-3.0f64..3.0, 1..40),
        dt in 1e-6f64..0.1,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let n = values.len() - 1;
        let mut v = values.clone();
        v[0] = 0.0;
        let d = DrivingPath::new(kappa, (0..=n).map(|i| i as f64 * dt).collect(), v).unwrap();
        let tr = trace(&d);
        let m = TraceMeta { dt, t_max: n as f64 * dt, seed: 1, replica: 2 };
        write_trace(&path, &m, &tr).unwrap();
        let (m2, d2, back) = read_trace(&path).unwrap();
        prop_assert_eq!(m2, m);
        prop_assert_eq!(&*d2, &d);
        prop_assert_eq!(back.points, tr.points);
    }
}

fn written() -> (tempfile::TempDir, std::path::PathBuf, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let cfg = SamplerConfig::new(2.0, 0.01, 0.1, 1).unwrap();
    let (_, tr) = sample_chordal(&cfg).unwrap();
    write_trace(&path, &meta(&cfg), &tr).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    (dir, path, text)
}

#[test]
fn truncated_file_names_the_missing_row() {
    let (_dir, path, text) = written();
    let kept: Vec<&str> = text.lines().take(9 + 5).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    match read_trace(&path) {
        Err(Error::Format { reason, .. }) => assert!(reason.contains("row 6 of 11"), "{reason}"),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn inconsistent_kappa_and_a_is_rejected() {
    let (_dir, path, text) = written();
    fs::write(&path, text.replace("a=1\n", "a=0.9\n")).unwrap();
    match read_trace(&path) {
        Err(Error::Format { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn wrong_version_and_corrupted_rows_are_rejected() {
    let (_dir, path, text) = written();
    fs::write(&path, text.replace("v1", "v2")).unwrap();
    assert!(matches!(read_trace(&path), Err(Error::Format { line: 1, .. })));
    let bad: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 12 {
                "0.03,x,1,1".to_string()
            } else {
                l.to_string()
            }
        })
        .collect();
    fs::write(&path, bad.join("\n") + "\n").unwrap();
    assert!(matches!(read_trace(&path), Err(Error::Format { line: 13, .. })));
}
