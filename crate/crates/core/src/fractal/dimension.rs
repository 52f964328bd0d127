//! Box-counting dimension.

use super::cover::occupied_cells;
use super::minkowski::check_resolution;
use crate::error::{param, Error, Result};
use crate::geometry::Rect;
use crate::loewner::Trace;
use crate::stats::linear_fit;
use crate::Complex;

/// Least-squares fit of `ln N(s)` against `ln(1/s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionFit {
    /// Cell sides, strictly decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Occupied cells of side `l^{−k}` for each `k` in `levels`, anchored at the
/// origin or at the corner of `window`.
pub fn box_counts(trace: &Trace, l: u64, levels: &[u32], window: Option<&Rect>) -> Result<Vec<u64>> {
    box_counts_pieces(&[&trace.points], l, levels, window)
}

pub fn box_counts_pieces(pieces: &[&[Complex]], l: u64, levels: &[u32], window: Option<&Rect>) -> Result<Vec<u64>> {
    if l < 2 {
        return Err(param("l", format!("base must be at least 2, got {l}")));
    }
    let Some(&finest) = levels.iter().max() else {
        return Ok(vec![]);
    };
    let limit = (l as f64).powi(-(finest as i32)) / 4.0;
    match window {
        Some(w) => check_resolution(pieces, w, limit, limit)?,
        None => {
            let seg = pieces
                .iter()
                .map(|p| crate::geometry::max_segment_length(p, None))
                .fold(0.0, f64::max);
            if seg > limit {
                return Err(Error::Resolution { segment: seg, limit });
            }
        }
    }
    let origin = window.map_or(Complex::new(0.0, 0.0), |w| Complex::new(w.x0, w.y0));
    Ok(levels
        .iter()
        .map(|&k| occupied_cells(pieces, origin, (l as f64).powi(-(k as i32)), window).len() as u64)
        .collect())
}

pub fn box_dimension(
    trace: &Trace,
    l: u64,
    levels: std::ops::RangeInclusive<u32>,
    window: Option<&Rect>,
) -> Result<DimensionFit> {
    box_dimension_pooled(&[&[&trace.points]], l, levels, window)
}

/// Box dimension from counts summed over several curves, each given as
/// polyline pieces.
pub fn box_dimension_pooled(
    curves: &[&[&[Complex]]],
    l: u64,
    levels: std::ops::RangeInclusive<u32>,
    window: Option<&Rect>,
) -> Result<DimensionFit> {
    let levels: Vec<u32> = levels.collect();
    if levels.len() < 4 {
        return Err(param("levels", "need at least four levels"));
    }
    let mut counts = vec![0u64; levels.len()];
    for curve in curves {
        for (c, n) in counts.iter_mut().zip(box_counts_pieces(curve, l, &levels, window)?) {
            *c += n;
        }
    }
    DimensionFit::from_counts(l, &levels, counts)
}

impl DimensionFit {
    /// Fit to pooled counts at the given levels.
    pub fn from_counts(l: u64, levels: &[u32], counts: Vec<u64>) -> Result<Self> {
        if counts.contains(&0) {
            return Err(param("window", "no trace meets the window"));
        }
        let scales: Vec<f64> = levels.iter().map(|&k| (l as f64).powi(-(k as i32))).collect();
        let x: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
        let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
        let fit = linear_fit(&x, &y);
        Ok(Self {
            scales,
            counts,
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
        })
    }
}
