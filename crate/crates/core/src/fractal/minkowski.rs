//! Minkowski-content proxy for the natural-parametrization mass.
//!
//! `μ_ε(R) = ε^{d−2}·Area{z ∈ R : dist(z, γ) ≤ ε}` with the area counted on a
//! grid of pitch `ε/4` aligned with the corner of `R`. Relative to the
//! natural parametrization it carries an unknown constant factor.

use std::collections::HashMap;

use rayon::prelude::*;

use super::raster::{CellGrid, CellSet};
use super::square::{LadicGrid, LadicSquare};
use crate::error::{param, Error, Result};
use crate::geometry::{max_segment_length, segment_rect_distance, Rect};
use crate::loewner::Trace;
use crate::Complex;

/// Cells per square side in [`mu_field`]: `ε = side/10`, pitch `ε/4`.
const CELLS_PER_SIDE: i64 = 40;

pub fn minkowski_mass(trace: &Trace, region: &Rect, eps: f64, d: f64) -> Result<f64> {
    minkowski_mass_pieces(&[&trace.points], region, eps, d)
}

/// [`minkowski_mass`] of a union of polylines.
pub fn minkowski_mass_pieces(pieces: &[&[Complex]], region: &Rect, eps: f64, d: f64) -> Result<f64> {
    let side = region.width().min(region.height());
    if !(eps > 0.0 && eps <= side / 10.0 * (1.0 + 1e-12)) {
        return Err(param("eps", format!("need 0 < eps <= {}", side / 10.0)));
    }
    check_resolution(pieces, region, eps, eps)?;
    let pitch = eps / 4.0;
    let g = CellGrid {
        origin: Complex::new(region.x0, region.y0),
        pitch,
        nx: (region.width() / pitch + 0.5).floor() as i64,
        ny: (region.height() / pitch + 0.5).floor() as i64,
    };
    let mut set = CellSet::default();
    for_near_segments(pieces, region, eps, |a, b| set.mark_sausage(&g, a, b, eps));
    Ok(eps.powf(d - 2.0) * set.count() as f64 * pitch * pitch)
}

/// `RESOLUTION` unless every chord within `margin` of `region` is at most
/// `limit` long.
pub(crate) fn check_resolution(pieces: &[&[Complex]], region: &Rect, margin: f64, limit: f64) -> Result<()> {
    let seg = pieces
        .iter()
        .map(|p| max_segment_length(p, Some((region, margin))))
        .fold(0.0, f64::max);
    if seg > limit {
        return Err(Error::Resolution { segment: seg, limit });
    }
    Ok(())
}

/// Calls `f` on every chord within `margin` of `region`; a single point is
/// treated as a degenerate chord.
pub(crate) fn for_near_segments(
    pieces: &[&[Complex]],
    region: &Rect,
    margin: f64,
    mut f: impl FnMut(Complex, Complex),
) {
    for points in pieces {
        if let [p] = points {
            if region.distance(*p) <= margin {
                f(*p, *p);
            }
            continue;
        }
        for w in points.windows(2) {
            if segment_rect_distance(w[0], w[1], region) <= margin {
                f(w[0], w[1]);
            }
        }
    }
}

/// Estimated mass per l-adic square on levels `m..=max_level`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureField {
    pub grid: LadicGrid,
    pub m: u32,
    pub max_level: u32,
    pub d: f64,
    /// Nonzero masses only.
    pub mass: HashMap<LadicSquare, f64>,
}

impl MeasureField {
    pub fn empty(grid: LadicGrid, m: u32, max_level: u32, d: f64) -> Self {
        Self {
            grid,
            m,
            max_level,
            d,
            mass: HashMap::new(),
        }
    }

    pub fn get(&self, sq: &LadicSquare) -> f64 {
        self.mass.get(sq).copied().unwrap_or(0.0)
    }

    /// Nonzero squares of one level, sorted.
    pub fn level(&self, k: u32) -> Vec<(LadicSquare, f64)> {
        let mut v: Vec<_> = self
            .mass
            .iter()
            .filter(|(s, _)| s.level == k)
            .map(|(s, m)| (*s, *m))
            .collect();
        v.sort_by_key(|(s, _)| *s);
        v
    }

    pub fn total(&self, k: u32) -> f64 {
        self.level(k).iter().map(|(_, m)| m).sum()
    }

    /// `|μ(parent) − Σ μ(children)| / max(μ(parent), floor)` for every
    /// nonzero parent on levels `m..max_level`.
    pub fn child_sum_discrepancies(&self, floor: f64) -> Vec<f64> {
        let l = self.grid.l;
        let mut sums: HashMap<LadicSquare, f64> = HashMap::new();
        for (s, m) in &self.mass {
            if s.level > self.m {
                *sums.entry(s.parent(l).unwrap()).or_default() += m;
            }
        }
        let mut parents: Vec<_> = self.mass.iter().filter(|(s, _)| s.level < self.max_level).collect();
        parents.sort_by_key(|(s, _)| **s);
        parents
            .into_iter()
            .map(|(s, m)| (m - sums.get(s).copied().unwrap_or(0.0)).abs() / m.max(floor))
            .collect()
    }
}

/// Mass of every square of levels `m..=max_level` inside `[0,1]² + z0`, with
/// `ε = side/10` on each level. Every chord within `ε` of the unit square
/// must be at most the finest level's `ε`.
pub fn mu_field(trace: &Trace, grid: &LadicGrid, m: u32, max_level: u32, d: f64) -> Result<MeasureField> {
    mu_field_pieces(&[&trace.points], grid, m, max_level, d)
}

pub fn mu_field_pieces(
    pieces: &[&[Complex]],
    grid: &LadicGrid,
    m: u32,
    max_level: u32,
    d: f64,
) -> Result<MeasureField> {
    if m > max_level {
        return Err(param("m", format!("level range {m}..={max_level} is empty")));
    }
    if !(d > 0.0 && d <= 2.0) {
        return Err(param("d", format!("must lie in (0, 2], got {d}")));
    }
    let domain = grid.domain();
    let eps_fine = grid.side(max_level) / 10.0;
    check_resolution(pieces, &domain, eps_fine, eps_fine)?;
    let levels: Vec<u32> = (m..=max_level).collect();
    let per_level = levels
        .par_iter()
        .map(|&k| {
            let n = grid.count(k)? as i64;
            let side = grid.side(k);
            let eps = side / 10.0;
            let pitch = side / CELLS_PER_SIDE as f64;
            let g = CellGrid {
                origin: grid.z0,
                pitch,
                nx: n * CELLS_PER_SIDE,
                ny: n * CELLS_PER_SIDE,
            };
            let mut set = CellSet::default();
            for_near_segments(pieces, &domain, eps, |a, b| set.mark_sausage(&g, a, b, eps));
            let unit = eps.powf(d - 2.0) * pitch * pitch;
            Ok(set
                .block_counts(CELLS_PER_SIDE)
                .into_iter()
                .map(|((i, j), c)| (LadicSquare::new(k, i as u64, j as u64), c as f64 * unit))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut field = MeasureField::empty(*grid, m, max_level, d);
    field.mass = per_level.into_iter().flatten().collect();
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::DrivingPath;
    use std::sync::Arc;

    fn polyline_trace(points: Vec<Complex>) -> Trace {
        let n = points.len();
        let driving = DrivingPath::constant(2.0, 1.0, n - 1).unwrap();
        Trace {
            driving: Arc::new(driving),
            points,
            degenerate: vec![],
        }
    }

    fn segment(a: Complex, b: Complex, n: usize) -> Vec<Complex> {
        (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
    }

    #[test]
    fn far_trace_has_no_mass() {
        let tr = polyline_trace(segment(Complex::new(0.0, 0.0), Complex::new(0.0, 1.0), 200));
        let r = Rect::new(1.0, 0.0, 2.0, 1.0);
        assert_eq!(minkowski_mass(&tr, &r, 0.05, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn straight_segment_sausage() {
        // Area of the ε-sausage of a unit segment is 2ε + πε².
        let tr = polyline_trace(segment(Complex::new(0.0, 0.5), Complex::new(1.0, 0.5), 200));
        let r = Rect::new(-0.1, 0.0, 1.1, 1.0);
        let m = minkowski_mass(&tr, &r, 0.01, 1.0).unwrap();
        assert!((m - (2.0 + std::f64::consts::PI * 0.01)).abs() < 0.01, "{m}");
    }

    #[test]
    fn coarse_trace_is_rejected() {
        let tr = polyline_trace(segment(Complex::new(0.0, 0.5), Complex::new(1.0, 0.5), 10));
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            minkowski_mass(&tr, &r, 0.01, 1.0),
            Err(Error::Resolution { .. })
        ));
        assert!(minkowski_mass(&tr, &r, 0.5, 1.0).is_err());
    }

    #[test]
    fn field_of_disjoint_trace_is_empty() {
        let grid = LadicGrid::standard(4).unwrap();
        let tr = polyline_trace(segment(Complex::new(0.0, 0.0), Complex::new(0.0, 1.0), 1000));
        let f = mu_field(&tr, &grid, 0, 2, 1.25).unwrap();
        assert!(f.mass.is_empty());
    }

    #[test]
    fn field_of_vertical_segment() {
        // A vertical line through the unit square: mass 2 per unit length at d = 1.
        let grid = LadicGrid::standard(4).unwrap();
        let tr = polyline_trace(segment(Complex::new(0.03, 1.5), Complex::new(0.03, 3.5), 4000));
        let f = mu_field(&tr, &grid, 0, 2, 1.0).unwrap();
        for k in 0..=2 {
            assert!((f.total(k) - 2.0).abs() < 0.05, "level {k}: {}", f.total(k));
        }
        assert!(f.child_sum_discrepancies(1e-3).iter().all(|e| *e < 0.1));
    }
}
