//! Plain-text trace files.
//!
//! ```text
//! # sle-trace v1
//! kappa=2
//! a=1
//! dt=0.001
//! t_max=1
//! seed=7
//! replica=0
//! points=1001
//! t,v,re,im
//! 0,0,0,0
//! ...
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::loewner::{DrivingPath, Trace};
use crate::Complex;

pub const TRACE_MAGIC: &str = "# sle-trace v1";

/// Header fields besides those carried by the driving path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceMeta {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub replica: u64,
}

pub fn write_trace(path: &Path, meta: &TraceMeta, trace: &Trace) -> Result<()> {
    let d = &trace.driving;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_MAGIC}")?;
    writeln!(w, "kappa={}", d.kappa())?;
    writeln!(w, "a={}", d.a())?;
    writeln!(w, "dt={}", meta.dt)?;
    writeln!(w, "t_max={}", meta.t_max)?;
    writeln!(w, "seed={}", meta.seed)?;
    writeln!(w, "replica={}", meta.replica)?;
    writeln!(w, "points={}", trace.points.len())?;
    writeln!(w, "t,v,re,im")?;
    for ((t, v), p) in d.times().iter().zip(d.values()).zip(&trace.points) {
        writeln!(w, "{t},{v},{},{}", p.re, p.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_trace`]. Grid points after the first that
/// sit on the real axis are reported as degenerate, as the tracer does.
pub fn read_trace(path: &Path) -> Result<(TraceMeta, Arc<DrivingPath>, Trace)> {
    let fail = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = BufReader::new(File::open(path)?)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, l)) => Ok((n, l?)),
            None => Err(Error::Format {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("file ends before {what}"),
            }),
        }
    };
    let (n, magic) = next("the version line")?;
    if magic.trim_end() != TRACE_MAGIC {
        return Err(fail(n, format!("expected `{TRACE_MAGIC}`, found `{magic}`")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (n, l) = next(key)?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((n, v.trim().to_string())),
            _ => Err(fail(n, format!("expected `{key}=...`, found `{l}`"))),
        }
    };
    fn parse<T: std::str::FromStr>(
        fail: &impl Fn(usize, String) -> Error,
        (n, v): (usize, String),
        key: &str,
    ) -> Result<T> {
        v.parse().map_err(|_| fail(n, format!("bad value `{v}` for {key}")))
    }
    let kappa: f64 = parse(&fail, field("kappa")?, "kappa")?;
    let (a_line, a_raw) = field("a")?;
    let a: f64 = parse(&fail, (a_line, a_raw), "a")?;
    if (kappa * a - 2.0).abs() > 1e-12 {
        return Err(fail(a_line, format!("kappa·a = {} (must be 2)", kappa * a)));
    }
    let meta = TraceMeta {
        dt: parse(&fail, field("dt")?, "dt")?,
        t_max: parse(&fail, field("t_max")?, "t_max")?,
        seed: parse(&fail, field("seed")?, "seed")?,
        replica: parse(&fail, field("replica")?, "replica")?,
    };
    let count: usize = parse(&fail, field("points")?, "points")?;
    let (n, cols) = next("the column line")?;
    if cols.trim_end() != "t,v,re,im" {
        return Err(fail(n, format!("expected column line `t,v,re,im`, found `{cols}`")));
    }
    let (mut times, mut values, mut points) = (
        Vec::with_capacity(count),
        Vec::with_capacity(count),
        Vec::with_capacity(count),
    );
    for row in 1..=count {
        let (n, l) = next(&format!("row {row} of {count}"))
            .map_err(|_| fail(n + row, format!("truncated: row {row} of {count} is missing")))?;
        let cells: Vec<&str> = l.split(',').collect();
        let nums: Option<Vec<f64>> = (cells.len() == 4)
            .then(|| cells.iter().map(|c| c.trim().parse().ok()).collect())
            .flatten();
        let Some(nums) = nums else {
            return Err(fail(n, format!("row {row}: expected four numbers, found `{l}`")));
        };
        times.push(nums[0]);
        values.push(nums[1]);
        points.push(Complex::new(nums[2], nums[3]));
    }
    if let Some((n, l)) = lines.find(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty())) {
        l?;
        return Err(fail(n, format!("more rows than the declared {count}")));
    }
    let driving = Arc::new(DrivingPath::new(kappa, times, values).map_err(|e| fail(0, e.to_string()))?);
    if (driving.a() - a).abs() > 1e-15 * a.abs().max(1.0) {
        return Err(fail(
            a_line,
            format!("a = {a} does not match 2/kappa = {}", driving.a()),
        ));
    }
    let degenerate = points
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, p)| p.im == 0.0)
        .map(|(i, _)| i)
        .collect();
    let trace = Trace {
        driving: driving.clone(),
        points,
        degenerate,
    };
    Ok((meta, driving, trace))
}
