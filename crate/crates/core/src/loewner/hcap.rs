//! Half-plane capacity by Brownian walkers.
//!
//! `hcap(A) = lim_{y→∞} y·E^{iy}[Im B_τ]` where `τ` is the exit time of
//! `H \ A`. At finite `y` the bias is of relative order `(R/y)²` for a hull
//! of radius `R`, because the expansion coefficients of the mapping-out
//! function are real.

use rayon::prelude::*;

use super::Trace;
use crate::error::{param, Result};
use crate::rng::{Stream, StreamKey};
use crate::stats::MeanEstimate;
use crate::walk::{Exit, SlitDomain, WalkOptions};
use crate::Complex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HcapOptions {
    pub seed: u64,
    pub replica: u64,
    /// Start height; defaults to 100 times the hull radius.
    pub y0: Option<f64>,
    /// Walker absorption band, as a fraction of the hull radius.
    pub band: f64,
    pub budget: u64,
}

impl Default for HcapOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            replica: 0,
            y0: None,
            band: 1e-4,
            budget: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HcapEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub y0: f64,
}

/// Monte Carlo estimate of `hcap(γ(0, t])`.
pub fn hcap_mc(trace: &Trace, t: f64, n_walkers: usize, opts: &HcapOptions) -> Result<HcapEstimate> {
    let k = trace
        .driving
        .grid_index(t)
        .ok_or_else(|| param("t", format!("{t} is not a grid time of the trace")))?;
    if n_walkers < 2 {
        return Err(param("n_walkers", "need at least two walkers"));
    }
    let hull = &trace.points[..=k];
    let radius = trace.radius_until(k);
    if k == 0 || radius == 0.0 {
        return Ok(HcapEstimate {
            value: 0.0,
            stderr: 0.0,
            n: n_walkers,
            y0: opts.y0.unwrap_or(0.0),
        });
    }
    let y0 = opts.y0.unwrap_or(100.0 * radius);
    if !(y0 > radius) {
        return Err(param("y0", format!("must exceed the hull radius {radius}")));
    }
    let dom = SlitDomain::new(&[hull]);
    let walk = WalkOptions {
        band: opts.band * radius,
        budget: opts.budget,
    };
    let key = StreamKey::new(opts.seed, opts.replica, Stream::Walkers);
    let heights = (0..n_walkers as u64)
        .into_par_iter()
        .map(|i| {
            let exit = dom.walk(Complex::new(0.0, y0), &mut key.sequence(i), &walk)?;
            Ok(match exit {
                Exit::RealAxis(_) => 0.0,
                Exit::Polyline { at, .. } => y0 * at.im,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = MeanEstimate::of(&heights);
    Ok(HcapEstimate {
        value: m.mean,
        stderr: m.stderr,
        n: n_walkers,
        y0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::{trace, DrivingPath};

    #[test]
    fn empty_hull_has_zero_capacity() {
        let path = DrivingPath::constant(4.0, 0.01, 10).unwrap();
        let tr = trace(&path);
        let e = hcap_mc(&tr, 0.0, 10, &HcapOptions::default()).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn vertical_slit_capacity() {
        // Slit [0, iL] with L² = 2at has capacity L²/2 = at.
        let path = DrivingPath::constant(4.0, 0.01, 200).unwrap();
        let tr = trace(&path);
        let e = hcap_mc(&tr, 2.0, 20_000, &HcapOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 3.5 * e.stderr, "{e:?}");
    }

    #[test]
    fn rejects_off_grid_time() {
        let path = DrivingPath::constant(4.0, 0.01, 10).unwrap();
        let tr = trace(&path);
        assert!(hcap_mc(&tr, 0.015, 10, &HcapOptions::default()).is_err());
    }
}
