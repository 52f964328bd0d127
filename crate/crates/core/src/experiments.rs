//! Replica pipelines shared by the command line and the acceptance suite.
//!
//! Every pipeline samples chordal traces refined around a region of interest
//! and stops a replica once its tip is `far` away from the origin.

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::fractal::{
    box_counts_pieces, build_cover, mu_field_pieces, occupancy_pieces, CoverReport, DimensionFit, LadicGrid,
    LadicSquare,
};
use crate::geometry::Rect;
use crate::observables::{dimension, integrate_green};
use crate::sampler::{sample_refined, RefinedSample, Refinement, SamplerConfig};
use crate::stats::MeanEstimate;

/// Refined replica `r`, stopped at `|tip| > far`.
pub fn refined_replica(cfg: &SamplerConfig, focus: Rect, h_min: f64, far: f64, r: u64) -> Result<RefinedSample> {
    let refine = Refinement::around(focus, h_min);
    sample_refined(&cfg.with_replica(r), &refine, |_, tip| tip.norm() > far)
}

/// Mean cover weights at one ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverSummary {
    pub epsilon: f64,
    pub y1: MeanEstimate,
    pub y2: MeanEstimate,
    pub total: MeanEstimate,
    pub mean_big: f64,
    pub mean_residual: f64,
}

/// Covers of `replicas` traces: masses on levels `m..M` and occupancy on
/// level `M`, traces resolved to a quarter of the level-`M` side.
pub fn cover_experiment(
    cfg: &SamplerConfig,
    grid: &LadicGrid,
    m: u32,
    big_m: u32,
    eps: &[f64],
    replicas: usize,
    far: f64,
) -> Result<Vec<CoverSummary>> {
    if m >= big_m {
        return Err(param("m", format!("need m < M, got m = {m}, M = {big_m}")));
    }
    let d = dimension(cfg.kappa);
    let h_min = 0.95 * grid.side(big_m) / 4.0;
    let per_replica = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let s = refined_replica(cfg, grid.domain(), h_min, far, r)?;
            let pieces = s.pieces();
            let field = mu_field_pieces(&pieces, grid, m, big_m - 1, d)?;
            let occ = occupancy_pieces(&pieces, grid, big_m)?;
            eps.iter()
                .map(|&e| build_cover(&field, &occ, e))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(eps
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| {
            let col = |f: &dyn Fn(&CoverReport) -> f64| per_replica.iter().map(|c| f(&c[i])).collect::<Vec<f64>>();
            let n = replicas.max(1) as f64;
            CoverSummary {
                epsilon,
                y1: MeanEstimate::of(&col(&|c| c.y1)),
                y2: MeanEstimate::of(&col(&|c| c.y2)),
                total: MeanEstimate::of(&col(&|c| c.y1 + c.y2)),
                mean_big: col(&|c| c.big_squares.len() as f64).iter().sum::<f64>() / n,
                mean_residual: col(&|c| c.residual_squares.len() as f64).iter().sum::<f64>() / n,
            }
        })
        .collect())
}

/// Mean mass of one square against the Green's function integral over it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareMass {
    pub square: LadicSquare,
    pub mass: MeanEstimate,
    pub green_integral: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

/// `E[μ(D)]` for every level-`m` square of the grid's unit square.
pub fn natural_measure_experiment(
    cfg: &SamplerConfig,
    grid: &LadicGrid,
    m: u32,
    replicas: usize,
    far: f64,
) -> Result<Vec<SquareMass>> {
    let d = dimension(cfg.kappa);
    let h_min = 0.9 * grid.side(m) / 10.0;
    let fields = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let s = refined_replica(cfg, grid.domain(), h_min, far, r)?;
            mu_field_pieces(&s.pieces(), grid, m, m, d)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = grid.count(m)?;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let square = LadicSquare::new(m, i, j);
            let xs: Vec<f64> = fields.iter().map(|f| f.get(&square)).collect();
            let mass = MeanEstimate::of(&xs);
            let green_integral = integrate_green(&grid.rect(&square), cfg.kappa, 8)?;
            out.push(SquareMass {
                square,
                mass,
                green_integral,
                ratio: mass.mean / green_integral,
                ratio_stderr: mass.stderr / green_integral,
            });
        }
    }
    Ok(out)
}

/// Box dimension from counts pooled over `replicas` traces, with cells of
/// side `l^{−k}` anchored at the corner of `window`.
pub fn dimension_experiment(
    cfg: &SamplerConfig,
    l: u64,
    levels: std::ops::RangeInclusive<u32>,
    window: &Rect,
    replicas: usize,
    far: f64,
) -> Result<DimensionFit> {
    let levels: Vec<u32> = levels.collect();
    if levels.len() < 4 {
        return Err(param("levels", "need at least four levels"));
    }
    let finest = *levels.iter().max().unwrap();
    let h_min = 0.95 * (l as f64).powi(-(finest as i32)) / 4.0;
    let counts = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let s = refined_replica(cfg, *window, h_min, far, r)?;
            box_counts_pieces(&s.pieces(), l, &levels, Some(window))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: Vec<u64> = (0..levels.len()).map(|i| counts.iter().map(|c| c[i]).sum()).collect();
    DimensionFit::from_counts(l, &levels, total)
}
