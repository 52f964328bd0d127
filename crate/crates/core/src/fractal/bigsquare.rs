//! Probability that the mass collected between two nested hitting times stays
//! below the big-square threshold.
//!
//! The target is the chain of squares `D_k` whose base-`l` digits all equal
//! `digit`. `D*_k` is `D_k` enlarged about its center. For a replica that
//! reaches `D_{k+1}`, the mass of `γ[τ*_k, τ*_{k+1}]` in `D_k` is compared with
//! `l^{−dk}/ε`; replicas that never reach `D_{k+1}` are rejected.

use rayon::prelude::*;

use super::minkowski::{for_near_segments, minkowski_mass_pieces};
use super::square::LadicGrid;
use crate::error::{param, Error, Result};
use crate::geometry::{segment_rect_distance, Rect};
use crate::observables::dimension;
use crate::sampler::{sample_refined, Refinement, SamplerConfig};
use crate::stats::wilson_stderr;
use crate::Complex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BigSquareOptions {
    pub grid: LadicGrid,
    /// Repeated base-`l` digit of the target chain.
    pub digit: u64,
    /// Side factor of `D*` relative to `D`.
    pub enlargement: f64,
    /// A replica is rejected once its tip is this many times
    /// `|center(D_k)| + side(D_k)` away from `center(D_k)`.
    pub far: f64,
    pub min_accepted: usize,
}

impl Default for BigSquareOptions {
    fn default() -> Self {
        Self {
            grid: LadicGrid::standard(16).expect("valid base"),
            digit: 7,
            enlargement: 3.0,
            far: 10.0,
            min_accepted: 100,
        }
    }
}

/// Masses of the accepted replicas, in units of `l^{−dk}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BigSquareSample {
    pub k: u32,
    pub attempted: usize,
    pub scaled_masses: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BigSquareEstimate {
    pub q: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub attempted: usize,
}

impl BigSquareSample {
    /// Fraction of accepted replicas with mass below `l^{−dk}/ε`.
    pub fn estimate(&self, epsilon: f64) -> BigSquareEstimate {
        let n = self.scaled_masses.len();
        let below = self.scaled_masses.iter().filter(|&&m| m < 1.0 / epsilon).count();
        BigSquareEstimate {
            q: below as f64 / n as f64,
            stderr: wilson_stderr(below, n),
            accepted: n,
            attempted: self.attempted,
        }
    }
}

/// Runs replicas `0..n` of `cfg` and keeps those whose trace reaches
/// `D_{k+1}`.
pub fn big_square_masses(cfg: &SamplerConfig, k: u32, n: usize, opts: &BigSquareOptions) -> Result<BigSquareSample> {
    cfg.validate()?;
    if !(opts.enlargement >= 1.0) {
        return Err(param("enlargement", "must be at least 1"));
    }
    let grid = opts.grid;
    let d = dimension(cfg.kappa);
    let outer_sq = grid.chain(k, opts.digit)?;
    let inner_sq = grid.chain(k + 1, opts.digit)?;
    let outer = grid.rect(&outer_sq);
    let inner = grid.rect(&inner_sq);
    let outer_star = outer.scaled_about_center(opts.enlargement);
    let inner_star = inner.scaled_about_center(opts.enlargement);
    if !(inner_star.x0 >= outer.x0
        && inner_star.x1 <= outer.x1
        && inner_star.y0 >= outer.y0
        && inner_star.y1 <= outer.y1)
    {
        return Err(param(
            "enlargement",
            "the enlarged inner square must stay inside the outer square",
        ));
    }
    let side = grid.side(k);
    let eps = side / 10.0;
    let center = outer.center();
    let far = opts.far * (center.norm() + side);
    let refine = Refinement::around(outer, grid.side(k + 1) / 4.0);
    let weight = grid.weight(k, d);
    let masses = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let mut prev = Complex::new(0.0, 0.0);
            let mut hit = false;
            let run = sample_refined(&cfg.with_replica(r), &refine, |_, tip| {
                let touched = segment_rect_distance(prev, tip, &inner) == 0.0;
                prev = tip;
                hit = touched;
                touched || (tip - center).norm() > far
            })?;
            let pieces = run.pieces();
            let mut reached = false;
            for_near_segments(&pieces, &inner, 0.0, |_, _| reached = true);
            if !(hit && reached) {
                return Ok(None);
            }
            let (Some(from), Some(to)) = (first_in(&pieces, &outer_star), first_in(&pieces, &inner_star)) else {
                return Ok(None);
            };
            let mass = minkowski_mass_pieces(&between(&pieces, from, to), &outer, eps, d)?;
            Ok(Some(mass / weight))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BigSquareSample {
        k,
        attempted: n,
        scaled_masses: masses.into_iter().flatten().collect(),
    })
}

/// `(piece, index)` of the first point inside `r`.
fn first_in(pieces: &[&[Complex]], r: &Rect) -> Option<(usize, usize)> {
    pieces
        .iter()
        .enumerate()
        .find_map(|(i, p)| p.iter().position(|z| r.contains(*z)).map(|j| (i, j)))
}

/// The pieces from point `from` to point `to`, both included.
fn between<'a>(pieces: &[&'a [Complex]], from: (usize, usize), to: (usize, usize)) -> Vec<&'a [Complex]> {
    (from.0..=to.0)
        .map(|i| {
            let lo = if i == from.0 { from.1 } else { 0 };
            let hi = if i == to.0 { to.1 + 1 } else { pieces[i].len() };
            &pieces[i][lo..hi]
        })
        .collect()
}

/// Estimate of `P[mass of γ[τ*_k, τ*_{k+1}] in D_k < l^{−dk}/ε | γ reaches D_{k+1}]`.
pub fn big_square_prob_mc(
    cfg: &SamplerConfig,
    k: u32,
    epsilon: f64,
    n: usize,
    opts: &BigSquareOptions,
) -> Result<BigSquareEstimate> {
    if !(epsilon > 0.0) {
        return Err(param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let sample = big_square_masses(cfg, k, n, opts)?;
    let accepted = sample.scaled_masses.len();
    if accepted < opts.min_accepted {
        return Err(Error::Starved {
            accepted,
            required: opts.min_accepted,
        });
    }
    Ok(sample.estimate(epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starved_when_too_few_reach_the_square() {
        let cfg = SamplerConfig::new(8.0 / 3.0, 0.05, 20.0, 3).unwrap();
        let r = big_square_prob_mc(&cfg, 0, 1.0, 20, &BigSquareOptions::default());
        assert!(matches!(r, Err(Error::Starved { required: 100, .. })), "{r:?}");
    }

    #[test]
    fn extreme_thresholds() {
        let cfg = SamplerConfig::new(8.0 / 3.0, 0.05, 20.0, 5).unwrap();
        let s = big_square_masses(&cfg, 0, 60, &BigSquareOptions::default()).unwrap();
        assert!(!s.scaled_masses.is_empty());
        assert!(s.scaled_masses.iter().all(|m| *m > 0.0));
        assert_eq!(s.estimate(1e12).q, 0.0);
        assert_eq!(s.estimate(1e-12).q, 1.0);
    }

    #[test]
    fn oversized_enlargement_is_rejected() {
        let cfg = SamplerConfig::new(2.0, 0.05, 1.0, 0).unwrap();
        let opts = BigSquareOptions {
            enlargement: 100.0,
            ..Default::default()
        };
        assert!(big_square_masses(&cfg, 0, 1, &opts).is_err());
    }
}
