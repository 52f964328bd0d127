//! The big-square cover and occupancy sums.

use std::collections::{BTreeSet, HashSet};

use super::minkowski::{check_resolution, for_near_segments, MeasureField};
use super::square::{LadicGrid, LadicSquare};
use crate::error::{param, Result};
use crate::geometry::{cells_on_segment, clip_segment, Rect};
use crate::loewner::Trace;
use crate::Complex;

/// Cells `[i s, (i+1) s) × [j s, (j+1) s) + origin` met by the polyline,
/// clipped to `clip` when given.
pub(crate) fn occupied_cells(
    pieces: &[&[Complex]],
    origin: Complex,
    side: f64,
    clip: Option<&Rect>,
) -> HashSet<(i64, i64)> {
    let mut cells = HashSet::new();
    let range = clip.map(|r| {
        let lo = |x: f64, o: f64| ((x - o) / side).floor() as i64;
        let hi = |x: f64, o: f64| ((x - o) / side).ceil() as i64 - 1;
        (
            lo(r.x0, origin.re),
            hi(r.x1, origin.re),
            lo(r.y0, origin.im),
            hi(r.y1, origin.im),
        )
    });
    let mut visit = |a: Complex, b: Complex| {
        let (a, b) = match clip {
            Some(r) => match clip_segment(a, b, r) {
                Some(s) => s,
                None => return,
            },
            None => (a, b),
        };
        cells_on_segment(a, b, origin, side, |i, j| {
            if range.is_none_or(|(i0, i1, j0, j1)| i >= i0 && i <= i1 && j >= j0 && j <= j1) {
                cells.insert((i, j));
            }
        });
    };
    for points in pieces {
        match points {
            [p] => visit(*p, *p),
            _ => points.windows(2).for_each(|w| visit(w[0], w[1])),
        }
    }
    cells
}

/// Level-`level` squares of `grid` met by a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    pub grid: LadicGrid,
    pub level: u32,
    pub squares: BTreeSet<LadicSquare>,
}

/// Squares of `level` inside `[0,1]² + z0` that the polyline meets, with
/// chords clipped exactly. Chords near the unit square must be at most a
/// quarter of the square side.
pub fn occupancy(trace: &Trace, grid: &LadicGrid, level: u32) -> Result<Occupancy> {
    occupancy_pieces(&[&trace.points], grid, level)
}

pub fn occupancy_pieces(pieces: &[&[Complex]], grid: &LadicGrid, level: u32) -> Result<Occupancy> {
    let n = grid.count(level)?;
    let side = grid.side(level);
    let domain = grid.domain();
    check_resolution(pieces, &domain, side / 4.0, side / 4.0)?;
    let mut near = Vec::new();
    for_near_segments(pieces, &domain, 0.0, |a, b| near.push((a, b)));
    let mut squares = BTreeSet::new();
    for (a, b) in near {
        for (i, j) in occupied_cells(&[&[a, b]], grid.z0, side, Some(&domain)) {
            if i >= 0 && j >= 0 && (i as u64) < n && (j as u64) < n {
                squares.insert(LadicSquare::new(level, i as u64, j as u64));
            }
        }
    }
    Ok(Occupancy {
        grid: *grid,
        level,
        squares,
    })
}

/// The cover made of maximal big squares on levels `m..M` and the occupied
/// level-`M` squares outside all of them.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverReport {
    pub l: u64,
    pub m: u32,
    pub max_level: u32,
    pub epsilon: f64,
    pub d: f64,
    pub big_squares: Vec<LadicSquare>,
    pub residual_squares: Vec<LadicSquare>,
    pub y1: f64,
    pub y2: f64,
}

impl CoverReport {
    /// `(Y₁, Y₂)` recomputed from the square lists.
    pub fn recompute(&self) -> (f64, f64) {
        let w = |k: u32| (self.l as f64).powf(-self.d * k as f64);
        let y1 = self.big_squares.iter().map(|s| w(s.level)).sum();
        let y2 = self.residual_squares.len() as f64 * w(self.max_level);
        (y1, y2)
    }

    pub fn total(&self) -> f64 {
        self.y1 + self.y2
    }
}

/// Big iff `μ(D) > l^{−dk}/ε`. Squares are scanned from coarse to fine and a
/// big square is kept only when none of its ancestors was kept.
pub fn build_cover(field: &MeasureField, occ: &Occupancy, epsilon: f64) -> Result<CoverReport> {
    if !(epsilon > 0.0) {
        return Err(param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let (m, big_m) = (field.m, occ.level);
    if m >= big_m {
        return Err(param("m", format!("need m < M, got m = {m}, M = {big_m}")));
    }
    if field.grid != occ.grid {
        return Err(param("occupancy", "field and occupancy use different grids"));
    }
    if field.max_level + 1 < big_m {
        return Err(param(
            "field",
            format!("levels {m}..={} do not reach M − 1 = {}", field.max_level, big_m - 1),
        ));
    }
    let grid = field.grid;
    let l = grid.l;
    let mut kept: HashSet<LadicSquare> = HashSet::new();
    let mut big_squares = Vec::new();
    let covered =
        |kept: &HashSet<LadicSquare>, s: &LadicSquare, below: u32| (m..below).any(|j| kept.contains(&s.ancestor(j, l)));
    for k in m..big_m {
        let threshold = grid.weight(k, field.d) / epsilon;
        for (s, mu) in field.level(k) {
            if mu > threshold && !covered(&kept, &s, k) {
                kept.insert(s);
                big_squares.push(s);
            }
        }
    }
    let residual_squares: Vec<_> = occ
        .squares
        .iter()
        .filter(|s| !covered(&kept, s, big_m))
        .copied()
        .collect();
    let mut report = CoverReport {
        l,
        m,
        max_level: big_m,
        epsilon,
        d: field.d,
        big_squares,
        residual_squares,
        y1: 0.0,
        y2: 0.0,
    };
    (report.y1, report.y2) = report.recompute();
    Ok(report)
}

/// `Σ (√2·l^{−k})^α` over the cells of side `l^{−k}` met by the trace; the
/// grid is anchored at the origin, or at the corner of `window` when the sum
/// is restricted to it.
pub fn hausdorff_upper(trace: &Trace, alpha: f64, level: u32, l: u64, window: Option<&Rect>) -> Result<f64> {
    if l < 2 {
        return Err(param("l", format!("base must be at least 2, got {l}")));
    }
    if !(alpha >= 0.0) {
        return Err(param("alpha", format!("must be nonnegative, got {alpha}")));
    }
    let side = (l as f64).powi(-(level as i32));
    let count = match window {
        Some(w) => {
            check_resolution(&[&trace.points], w, side / 4.0, side / 4.0)?;
            occupied_cells(&[&trace.points], Complex::new(w.x0, w.y0), side, Some(w)).len()
        }
        None => {
            let seg = trace.resolution(None);
            if seg > side / 4.0 {
                return Err(crate::Error::Resolution {
                    segment: seg,
                    limit: side / 4.0,
                });
            }
            occupied_cells(&[&trace.points], Complex::new(0.0, 0.0), side, None).len()
        }
    };
    Ok(count as f64 * (std::f64::consts::SQRT_2 * side).powf(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::DrivingPath;
    use proptest::prelude::*;
    use std::collections::HashMap;
    use std::sync::Arc;

    fn polyline_trace(points: Vec<Complex>) -> Trace {
        let driving = DrivingPath::constant(2.0, 1.0, points.len() - 1).unwrap();
        Trace {
            driving: Arc::new(driving),
            points,
            degenerate: vec![],
        }
    }

    fn grid() -> LadicGrid {
        LadicGrid::standard(4).unwrap()
    }

    fn field(masses: &[(LadicSquare, f64)]) -> MeasureField {
        let mut f = MeasureField::empty(grid(), 1, 2, 1.5);
        f.mass = masses.iter().copied().collect::<HashMap<_, _>>();
        f
    }

    fn occ(squares: &[LadicSquare]) -> Occupancy {
        Occupancy {
            grid: grid(),
            level: 3,
            squares: squares.iter().copied().collect(),
        }
    }

    #[test]
    fn single_big_square() {
        let s = LadicSquare::new(1, 2, 1);
        let inside = LadicSquare::new(3, 2 * 16 + 3, 16 + 5);
        let r = build_cover(&field(&[(s, 10.0)]), &occ(&[inside]), 1.0).unwrap();
        assert_eq!(r.big_squares, vec![s]);
        assert!(r.residual_squares.is_empty());
        assert_eq!(r.y1, 4f64.powf(-1.5));
        assert_eq!(r.y2, 0.0);
    }

    #[test]
    fn no_big_squares() {
        let s = LadicSquare::new(3, 7, 9);
        let r = build_cover(&field(&[]), &occ(&[s]), 1.0).unwrap();
        assert_eq!((r.y1, r.y2), (0.0, 4f64.powf(-4.5)));
        assert_eq!(r.residual_squares, vec![s]);
    }

    #[test]
    fn nested_big_squares_keep_the_coarsest() {
        let s = LadicSquare::new(1, 0, 0);
        let c = LadicSquare::new(2, 1, 1);
        let r = build_cover(&field(&[(s, 10.0), (c, 10.0)]), &occ(&[]), 1.0).unwrap();
        assert_eq!(r.big_squares, vec![s]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_cover(&field(&[]), &occ(&[]), 0.0).is_err());
        let mut o = occ(&[]);
        o.level = 1;
        assert!(build_cover(&field(&[]), &o, 1.0).is_err());
    }

    #[test]
    fn occupancy_of_a_vertical_line() {
        let pts: Vec<_> = (0..=400)
            .map(|i| Complex::new(0.01, 1.9 + i as f64 * 1.2 / 400.0))
            .collect();
        let o = occupancy(&polyline_trace(pts), &grid(), 2).unwrap();
        assert_eq!(o.squares.len(), 16);
        assert!(o.squares.iter().all(|s| s.n1 == 8));
    }

    #[test]
    fn hausdorff_sums() {
        let pts: Vec<_> = (0..=5000).map(|i| Complex::new(0.3 + i as f64 / 5000.0, 0.4)).collect();
        let tr = polyline_trace(pts);
        assert!(hausdorff_upper(&tr, 0.0, 2, 4, None).unwrap() >= 1.0);
        for k in 1..=5 {
            let v = hausdorff_upper(&tr, 1.0, k, 4, None).unwrap();
            assert!((1.0..=4.0).contains(&v), "k = {k}: {v}");
        }
        let coarse = hausdorff_upper(&tr, 1.0, 6, 4, None);
        assert!(matches!(coarse, Err(crate::Error::Resolution { .. })));
        assert!(hausdorff_upper(&tr, 1.5, 3, 4, None).unwrap() <= hausdorff_upper(&tr, 1.0, 3, 4, None).unwrap());
    }

    fn arb_field() -> impl Strategy<Value = (Vec<(LadicSquare, f64)>, Vec<LadicSquare>)> {
        let sq = |k: u32| (0..4u64.pow(k), 0..4u64.pow(k)).prop_map(move |(i, j)| LadicSquare::new(k, i, j));
        (
            prop::collection::vec(((1u32..=2).prop_flat_map(sq), 0.0..0.5f64), 0..40),
            prop::collection::vec(sq(3), 0..80),
        )
    }

    proptest! {
        #[test]
        fn cover_invariants((masses, occupied) in arb_field(), e1 in 0.05..5.0f64, shrink in 0.1..1.0f64) {
            let f = field(&masses);
            let o = occ(&occupied);
            let r = build_cover(&f, &o, e1).unwrap();
            for (i, a) in r.big_squares.iter().enumerate() {
                for b in &r.big_squares[i + 1..] {
                    prop_assert!(!a.contains(b, 4) && !b.contains(a, 4));
                }
            }
            for s in &o.squares {
                let inside = r.big_squares.iter().filter(|b| b.contains(s, 4)).count();
                let residual = r.residual_squares.contains(s) as usize;
                prop_assert_eq!(inside + residual, 1);
            }
            prop_assert_eq!(r.recompute(), (r.y1, r.y2));
            // A smaller ε raises every threshold, so its cover squares all lie
            // inside cover squares of the larger ε.
            let r2 = build_cover(&f, &o, e1 * shrink).unwrap();
            for s in &r2.big_squares {
                prop_assert!(r.big_squares.iter().any(|b| b.contains(s, 4)));
            }
        }
    }
}
