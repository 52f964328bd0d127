//! Planar Brownian motion by distance-capped Gaussian steps.
//!
//! From `z` at distance `r` from the boundary, the next step is a centered
//! Gaussian with `σ = r/3`, redrawn until it lands strictly inside the disk of
//! radius `r`. The step law is rotationally symmetric and supported in that
//! disk, so for every harmonic function the mean-value property makes the walk
//! a martingale: exit distributions are those of Brownian motion up to the
//! absorption band.

use crate::error::{Error, Result};
use crate::geometry::{side_of, SegmentIndex};
use crate::rng::Philox;
use crate::Complex;

/// Walker parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkOptions {
    /// Absorb once the distance to the boundary falls below this.
    pub band: f64,
    /// Maximum number of steps per walker.
    pub budget: u64,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            band: 1e-4,
            budget: 1_000_000,
        }
    }
}

/// Where a walker was absorbed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exit {
    /// On the real axis at this abscissa.
    RealAxis(f64),
    /// Next to a polyline segment, on the given side (`> 0` is left of the
    /// segment's direction).
    Polyline {
        at: Complex,
        line: usize,
        segment: usize,
        side: f64,
    },
}

/// A slit domain: the upper half-plane minus a set of polylines.
#[derive(Clone, Debug)]
pub struct SlitDomain {
    index: SegmentIndex,
    /// First segment of each polyline inside the index.
    offsets: Vec<usize>,
}

impl SlitDomain {
    pub fn new(polylines: &[&[Complex]]) -> Self {
        let mut offsets = Vec::with_capacity(polylines.len());
        let mut total = 0;
        for l in polylines {
            offsets.push(total);
            total += l.len().saturating_sub(1).max(usize::from(l.len() == 1));
        }
        Self {
            index: SegmentIndex::new(polylines),
            offsets,
        }
    }

    pub fn half_plane() -> Self {
        Self::new(&[])
    }

    /// Lower bound on the distance to the boundary, with the nearest slit
    /// segment when that segment is closer than the real axis.
    fn distance(&self, z: Complex) -> (f64, Option<usize>) {
        let (d, near) = self.index.distance_bound(z, z.im);
        match near {
            Some(n) if n.distance < z.im => (d, Some(n.segment)),
            _ => (d.min(z.im), None),
        }
    }

    /// Run one walker from `z` until absorption.
    pub fn walk(&self, z: Complex, rng: &mut Philox, opts: &WalkOptions) -> Result<Exit> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!(
                "walker must start in the upper half-plane, got {z}"
            )));
        }
        let mut z = z;
        for _ in 0..opts.budget {
            let (r, seg) = self.distance(z);
            if r <= opts.band {
                return Ok(self.classify(z, seg));
            }
            let sigma = r / 3.0;
            let step = loop {
                let (x, y) = rng.normal_pair();
                let s = Complex::new(x, y) * sigma;
                if s.norm_sqr() < r * r {
                    break s;
                }
            };
            z += step;
        }
        Err(Error::WalkerBudgetExceeded { budget: opts.budget })
    }

    fn classify(&self, z: Complex, seg: Option<usize>) -> Exit {
        let seg = seg.or_else(|| {
            // The bound may be loose; ask for the exact nearest segment.
            let (_, n) = self.index.distance_bound(z, z.im);
            n.filter(|n| n.distance < z.im).map(|n| n.segment)
        });
        match seg {
            None => Exit::RealAxis(z.re),
            Some(k) => {
                let (a, b, line) = self.index.segment(k);
                Exit::Polyline {
                    at: z,
                    line,
                    segment: k - self.offsets[line],
                    side: side_of(z, a, b),
                }
            }
        }
    }
}

/// A tagged piece of the boundary of a [`SlitDomain`].
#[derive(Clone, Debug, PartialEq)]
pub enum Arc {
    NegativeRealAxis,
    PositiveRealAxis,
    /// Left side (relative to its direction) of polyline `i`.
    LeftSide(usize),
    RightSide(usize),
    /// Union of several arcs.
    Union(Vec<Arc>),
}

impl Arc {
    pub fn contains(&self, exit: &Exit) -> bool {
        match (self, exit) {
            (Arc::NegativeRealAxis, Exit::RealAxis(x)) => *x < 0.0,
            (Arc::PositiveRealAxis, Exit::RealAxis(x)) => *x > 0.0,
            (Arc::LeftSide(i), Exit::Polyline { line, side, .. }) => line == i && *side > 0.0,
            (Arc::RightSide(i), Exit::Polyline { line, side, .. }) => line == i && *side < 0.0,
            (Arc::Union(arcs), e) => arcs.iter().any(|a| a.contains(e)),
            _ => false,
        }
    }
}
