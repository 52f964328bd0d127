use std::fs;

use sle_core::io::{emit_report, Plot, ReportOptions, Scale, Series, Table};

fn table() -> Table {
    Table::new("demo", &[("x", "abscissa"), ("y", "ordinate")])
}

fn plot(points: Vec<(f64, f64)>) -> Plot {
    Plot {
        title: "demo".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Linear,
        series: vec![Series {
            label: "y".into(),
            points,
            errors: None,
            scatter: false,
        }],
        reference: Some(1.0),
        note: Some("slope 1".into()),
    }
}

#[test]
fn empty_results_give_header_only_and_no_plot() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(dir.path(), &table(), Some(&plot(vec![])), &ReportOptions::default()).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(fs::read_to_string(dir.path().join("demo.csv")).unwrap(), "x,y\n");
    assert!(!dir.path().join("demo.svg").exists());
    let schema = fs::read_to_string(dir.path().join("demo.schema.txt")).unwrap();
    assert!(schema.contains("x: abscissa\ny: ordinate\n"));
}

#[test]
fn three_point_trend_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = table();
    let pts = vec![(0.5, 0.4), (0.1, 0.3), (0.02, 0.2)];
    for (x, y) in &pts {
        t.push(&[*x, *y]);
    }
    emit_report(dir.path(), &t, Some(&plot(pts)), &ReportOptions::default()).unwrap();
    let svg = fs::read_to_string(dir.path().join("demo.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("slope 1"));
    assert!(svg.contains("generated at unix time"));
    assert_eq!(svg.matches("<circle").count(), 3);
}

#[test]
fn suppressed_timestamp_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut t = table();
    t.push(&[1.0, 2.0]);
    t.push(&[2.0, -0.0]);
    let opts = ReportOptions { no_timestamp: true };
    let p = plot(vec![(1.0, 2.0), (2.0, 0.0)]);
    emit_report(a.path(), &t, Some(&p), &opts).unwrap();
    emit_report(b.path(), &t, Some(&p), &opts).unwrap();
    for f in ["demo.csv", "demo.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    assert!(!fs::read_to_string(a.path().join("demo.svg"))
        .unwrap()
        .contains("generated"));
    assert_eq!(
        fs::read_to_string(a.path().join("demo.csv")).unwrap(),
        "x,y\n1,2\n2,0\n"
    );
}
