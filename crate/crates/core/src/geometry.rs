//! Planar helpers shared by the walkers and the covering code.

use std::collections::HashMap;

use crate::Complex;

/// Axis-aligned closed rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Square with lower-left corner `corner` and side `side`.
    pub fn square(corner: Complex, side: f64) -> Self {
        Self::new(corner.re, corner.im, corner.re + side, corner.im + side)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Complex {
        Complex::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Complex) -> bool {
        p.re >= self.x0 && p.re <= self.x1 && p.im >= self.y0 && p.im <= self.y1
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance(&self, p: Complex) -> f64 {
        let dx = (self.x0 - p.re).max(p.re - self.x1).max(0.0);
        let dy = (self.y0 - p.im).max(p.im - self.y1).max(0.0);
        dx.hypot(dy)
    }

    pub fn inflate(&self, by: f64) -> Self {
        Self::new(self.x0 - by, self.y0 - by, self.x1 + by, self.y1 + by)
    }

    /// Same center, side lengths multiplied by `factor`.
    pub fn scaled_about_center(&self, factor: f64) -> Self {
        let c = self.center();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        Self::new(c.re - hw, c.im - hh, c.re + hw, c.im + hh)
    }

    pub fn scale(&self, r: f64) -> Self {
        Self::new(self.x0 * r, self.y0 * r, self.x1 * r, self.y1 * r)
    }

    pub fn translate(&self, by: Complex) -> Self {
        Self::new(self.x0 + by.re, self.y0 + by.im, self.x1 + by.re, self.y1 + by.im)
    }

    pub fn bounding(points: &[Complex]) -> Option<Self> {
        let first = points.first()?;
        let mut r = Self::new(first.re, first.im, first.re, first.im);
        for p in &points[1..] {
            r.x0 = r.x0.min(p.re);
            r.x1 = r.x1.max(p.re);
            r.y0 = r.y0.min(p.im);
            r.y1 = r.y1.max(p.im);
        }
        Some(r)
    }
}

/// Distance from `p` to the segment `[a, b]`.
#[inline]
pub fn segment_distance(p: Complex, a: Complex, b: Complex) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Which side of the directed segment `a → b` the point lies on.
#[inline]
pub fn side_of(p: Complex, a: Complex, b: Complex) -> f64 {
    let ab = b - a;
    let ap = p - a;
    ab.re * ap.im - ab.im * ap.re
}

/// Minimum distance from `p` to a polyline, by brute force.
pub fn polyline_distance(p: Complex, points: &[Complex]) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => (p - points[0]).norm(),
        _ => points
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Longest segment of a polyline, optionally restricted to segments that come
/// within `margin` of `region`.
pub fn max_segment_length(points: &[Complex], region: Option<(&Rect, f64)>) -> f64 {
    points
        .windows(2)
        .filter(|w| match region {
            None => true,
            Some((r, margin)) => segment_rect_distance(w[0], w[1], r) <= margin,
        })
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0, f64::max)
}

/// Lower bound style distance from a segment to a rectangle: exact when the
/// segment misses the rectangle, 0 when it touches it.
pub fn segment_rect_distance(a: Complex, b: Complex, r: &Rect) -> f64 {
    if r.contains(a) || r.contains(b) || clip_segment(a, b, r).is_some() {
        return 0.0;
    }
    let corners = [
        Complex::new(r.x0, r.y0),
        Complex::new(r.x1, r.y0),
        Complex::new(r.x1, r.y1),
        Complex::new(r.x0, r.y1),
    ];
    let mut d = r.distance(a).min(r.distance(b));
    for c in corners {
        d = d.min(segment_distance(c, a, b));
    }
    d
}

/// Liang–Barsky clip of `[a, b]` against a closed rectangle.
pub fn clip_segment(a: Complex, b: Complex, r: &Rect) -> Option<(Complex, Complex)> {
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [
        (-d.re, a.re - r.x0),
        (d.re, r.x1 - a.re),
        (-d.im, a.im - r.y0),
        (d.im, r.y1 - a.im),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((a + d * t0, a + d * t1))
}

/// Half-open grid cells `[i s, (i+1) s) × [j s, (j+1) s)` (relative to
/// `origin`) crossed by the segment `[a, b]`, visited in order.
pub fn cells_on_segment(a: Complex, b: Complex, origin: Complex, side: f64, mut visit: impl FnMut(i64, i64)) {
    let pa = (a - origin) / side;
    let pb = (b - origin) / side;
    let mut i = pa.re.floor() as i64;
    let mut j = pa.im.floor() as i64;
    let iend = pb.re.floor() as i64;
    let jend = pb.im.floor() as i64;
    visit(i, j);
    let d = pb - pa;
    let step_i: i64 = if d.re > 0.0 { 1 } else { -1 };
    let step_j: i64 = if d.im > 0.0 { 1 } else { -1 };
    let inv = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x.abs() };
    let tdx = inv(d.re);
    let tdy = inv(d.im);
    let next_boundary = |p: f64, cell: i64, step: i64| {
        if step > 0 {
            (cell + 1) as f64 - p
        } else {
            p - cell as f64
        }
    };
    let mut tx = if d.re == 0.0 {
        f64::INFINITY
    } else {
        next_boundary(pa.re, i, step_i) * tdx
    };
    let mut ty = if d.im == 0.0 {
        f64::INFINITY
    } else {
        next_boundary(pa.im, j, step_j) * tdy
    };
    let total = (iend - i).abs() + (jend - j).abs();
    for _ in 0..total {
        if tx < ty {
            i += step_i;
            tx += tdx;
        } else {
            j += step_j;
            ty += tdy;
        }
        visit(i, j);
        if i == iend && j == jend {
            break;
        }
    }
}

/// Uniform-grid bucket index over tagged segments, for distance queries from
/// Brownian walkers.
#[derive(Clone, Debug)]
pub struct SegmentIndex {
    segments: Vec<(Complex, Complex, u32)>,
    bounds: Rect,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

/// Nearest segment hit by a query.
#[derive(Clone, Copy, Debug)]
pub struct Nearest {
    pub distance: f64,
    pub segment: usize,
}

const MAX_RINGS: i64 = 24;

impl SegmentIndex {
    /// `polylines` are tagged by their position in the slice.
    pub fn new(polylines: &[&[Complex]]) -> Self {
        let mut segments = Vec::new();
        for (tag, line) in polylines.iter().enumerate() {
            for w in line.windows(2) {
                segments.push((w[0], w[1], tag as u32));
            }
            if line.len() == 1 {
                segments.push((line[0], line[0], tag as u32));
            }
        }
        let pts: Vec<Complex> = segments.iter().flat_map(|s| [s.0, s.1]).collect();
        let bounds = Rect::bounding(&pts).unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0));
        let extent = bounds.width().max(bounds.height()).max(1e-12);
        let mut lens: Vec<f64> = segments.iter().map(|s| (s.1 - s.0).norm()).collect();
        lens.sort_by(f64::total_cmp);
        let median = lens.get(lens.len() / 2).copied().unwrap_or(0.0);
        let cell = (extent / 512.0).max(2.0 * median).max(1e-9);
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (k, &(a, b, _)) in segments.iter().enumerate() {
            let lo = Complex::new(a.re.min(b.re), a.im.min(b.im));
            let hi = Complex::new(a.re.max(b.re), a.im.max(b.im));
            let (i0, j0) = ((lo.re / cell).floor() as i64, (lo.im / cell).floor() as i64);
            let (i1, j1) = ((hi.re / cell).floor() as i64, (hi.im / cell).floor() as i64);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets.entry((i, j)).or_default().push(k as u32);
                }
            }
        }
        Self {
            segments,
            bounds,
            cell,
            buckets,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn segment(&self, k: usize) -> (Complex, Complex, usize) {
        let s = self.segments[k];
        (s.0, s.1, s.2 as usize)
    }

    /// Returns a lower bound `r` on the distance from `p` to the segments,
    /// never above `cap`, together with the nearest segment when the bound is
    /// attained exactly.
    pub fn distance_bound(&self, p: Complex, cap: f64) -> (f64, Option<Nearest>) {
        if self.segments.is_empty() {
            return (cap, None);
        }
        let to_box = self.bounds.distance(p);
        if to_box >= cap {
            return (cap, None);
        }
        if to_box > MAX_RINGS as f64 * self.cell {
            return (to_box, None);
        }
        let ci = (p.re / self.cell).floor() as i64;
        let cj = (p.im / self.cell).floor() as i64;
        let mut best: Option<Nearest> = None;
        for ring in 0..=MAX_RINGS {
            // Every cell not yet scanned is at least this far away.
            let floor = (ring as f64 - 1.0).max(0.0) * self.cell;
            if let Some(b) = best {
                if b.distance <= floor {
                    return (b.distance.min(cap), best);
                }
            }
            if floor >= cap {
                let d = best.map_or(cap, |b| b.distance.min(cap));
                return (d, best.filter(|b| b.distance <= cap));
            }
            for (i, j) in ring_cells(ci, cj, ring) {
                if let Some(list) = self.buckets.get(&(i, j)) {
                    for &k in list {
                        let (a, b, _) = self.segments[k as usize];
                        let d = segment_distance(p, a, b);
                        if best.is_none_or(|n| d < n.distance) {
                            best = Some(Nearest {
                                distance: d,
                                segment: k as usize,
                            });
                        }
                    }
                }
            }
        }
        let floor = (MAX_RINGS as f64 * self.cell).min(cap);
        match best {
            Some(b) if b.distance <= floor => (b.distance, Some(b)),
            _ => (floor, None),
        }
    }
}

fn ring_cells(ci: i64, cj: i64, ring: i64) -> impl Iterator<Item = (i64, i64)> {
    let r = ring;
    let top_bottom = (-r..=r).flat_map(move |di| {
        let rows: Vec<i64> = if r == 0 { vec![0] } else { vec![-r, r] };
        rows.into_iter().map(move |dj| (ci + di, cj + dj))
    });
    let sides = (-r + 1..r).flat_map(move |dj| [(ci - r, cj + dj), (ci + r, cj + dj)]);
    top_bottom.chain(sides.filter(move |_| r > 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn segment_distance_cases() {
        let a = c(0.0, 0.0);
        let b = c(1.0, 0.0);
        assert_eq!(segment_distance(c(0.5, 2.0), a, b), 2.0);
        assert_eq!(segment_distance(c(-3.0, 4.0), a, b), 5.0);
        assert_eq!(segment_distance(c(2.0, 0.0), a, a), 2.0);
    }

    #[test]
    fn clip_and_rect_distance() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        let (p, q) = clip_segment(c(-1.0, 0.5), c(2.0, 0.5), &r).unwrap();
        assert!((p - c(0.0, 0.5)).norm() < 1e-15 && (q - c(1.0, 0.5)).norm() < 1e-15);
        assert!(clip_segment(c(-1.0, 2.0), c(2.0, 2.0), &r).is_none());
        assert!((segment_rect_distance(c(-1.0, 2.0), c(2.0, 2.0), &r) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_walk_matches_dense_sampling() {
        let a = c(0.13, 0.71);
        let b = c(3.37, -1.29);
        let mut walked = Vec::new();
        cells_on_segment(a, b, c(0.0, 0.0), 0.25, |i, j| walked.push((i, j)));
        let mut sampled = std::collections::BTreeSet::new();
        for k in 0..=200_000 {
            let p = a + (b - a) * (k as f64 / 200_000.0);
            sampled.insert(((p.re / 0.25).floor() as i64, (p.im / 0.25).floor() as i64));
        }
        let walked_set: std::collections::BTreeSet<_> = walked.iter().copied().collect();
        assert_eq!(walked_set, sampled);
        assert_eq!(walked.len(), walked_set.len());
    }

    #[test]
    fn index_bound_is_exact_near_and_safe_far() {
        let line: Vec<Complex> = (0..=1000).map(|k| c(k as f64 / 1000.0, 0.0)).collect();
        let idx = SegmentIndex::new(&[&line]);
        let (d, n) = idx.distance_bound(c(0.5, 0.01), 1.0);
        assert!((d - 0.01).abs() < 1e-12);
        assert!(n.is_some());
        let (d, _) = idx.distance_bound(c(0.5, 50.0), 100.0);
        assert!(d <= 50.0 && d > 0.0);
        let (d, _) = idx.distance_bound(c(0.5, 0.3), 0.05);
        assert_eq!(d, 0.05);
    }
}
