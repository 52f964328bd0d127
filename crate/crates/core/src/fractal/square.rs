//! l-adic squares anchored at an offset `z0`.

use crate::error::{param, Result};
use crate::geometry::Rect;
use crate::Complex;

/// `[n1 l^{-k}, (n1+1) l^{-k}] × [n2 l^{-k}, (n2+1) l^{-k}] + z0`; the base
/// and offset live in the owning [`LadicGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LadicSquare {
    pub level: u32,
    pub n1: u64,
    pub n2: u64,
}

impl LadicSquare {
    pub fn new(level: u32, n1: u64, n2: u64) -> Self {
        Self { level, n1, n2 }
    }

    /// The square at `level` (≤ own level) containing this one.
    pub fn ancestor(&self, level: u32, l: u64) -> Self {
        assert!(level <= self.level, "ancestor level above square level");
        let f = l.pow(self.level - level);
        Self::new(level, self.n1 / f, self.n2 / f)
    }

    pub fn parent(&self, l: u64) -> Option<Self> {
        (self.level > 0).then(|| self.ancestor(self.level - 1, l))
    }

    /// Closed-square containment in the grid sense (`self ⊇ other`).
    pub fn contains(&self, other: &Self, l: u64) -> bool {
        other.level >= self.level && other.ancestor(self.level, l) == *self
    }

    pub fn children(&self, l: u64) -> impl Iterator<Item = Self> + '_ {
        let level = self.level + 1;
        (0..l).flat_map(move |i| (0..l).map(move |j| Self::new(level, self.n1 * l + i, self.n2 * l + j)))
    }
}

/// Base `l` and offset `z0` shared by a family of squares. Level 0 is the
/// unit square `[0, 1]² + z0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadicGrid {
    pub l: u64,
    pub z0: Complex,
}

impl LadicGrid {
    pub fn new(l: u64, z0: Complex) -> Result<Self> {
        if l < 2 {
            return Err(param("l", format!("base must be at least 2, got {l}")));
        }
        Ok(Self { l, z0 })
    }

    /// Base `l` over `[0, 1]² − 1/2 + 2i`.
    pub fn standard(l: u64) -> Result<Self> {
        Self::new(l, Complex::new(-0.5, 2.0))
    }

    /// Squares per side at `level`.
    pub fn count(&self, level: u32) -> Result<u64> {
        self.l
            .checked_pow(level)
            .filter(|n| *n < 1 << 52)
            .ok_or_else(|| param("level", format!("{}^{level} squares per side is too many", self.l)))
    }

    pub fn side(&self, level: u32) -> f64 {
        (self.l as f64).powi(-(level as i32))
    }

    /// `l^{-d·level}`.
    pub fn weight(&self, level: u32, d: f64) -> f64 {
        (self.l as f64).powf(-d * level as f64)
    }

    pub fn domain(&self) -> Rect {
        Rect::square(self.z0, 1.0)
    }

    pub fn rect(&self, sq: &LadicSquare) -> Rect {
        let n = self.l.pow(sq.level) as f64;
        Rect::new(
            self.z0.re + sq.n1 as f64 / n,
            self.z0.im + sq.n2 as f64 / n,
            self.z0.re + (sq.n1 + 1) as f64 / n,
            self.z0.im + (sq.n2 + 1) as f64 / n,
        )
    }

    /// Square of `level` whose half-open cell holds `p`.
    pub fn locate(&self, p: Complex, level: u32) -> Option<LadicSquare> {
        let n = self.count(level).ok()?;
        let q = (p - self.z0) * n as f64;
        let (i, j) = (q.re.floor(), q.im.floor());
        (i >= 0.0 && j >= 0.0 && i < n as f64 && j < n as f64).then(|| LadicSquare::new(level, i as u64, j as u64))
    }

    /// The square at `level` whose base-`l` digits all equal `digit`.
    pub fn chain(&self, level: u32, digit: u64) -> Result<LadicSquare> {
        if digit >= self.l {
            return Err(param("digit", format!("must be below the base {}", self.l)));
        }
        let n = (0..level).fold(0, |acc, _| acc * self.l + digit);
        Ok(LadicSquare::new(level, n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_geometry() {
        let g = LadicGrid::standard(16).unwrap();
        let r = g.rect(&LadicSquare::new(0, 0, 0));
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (-0.5, 2.0, 0.5, 3.0));
        let r = g.rect(&LadicSquare::new(1, 15, 0));
        assert_eq!((r.x0, r.x1, r.y0), (-0.5 + 15.0 / 16.0, 0.5, 2.0));
        assert_eq!(g.side(2), 1.0 / 256.0);
    }

    #[test]
    fn ancestry() {
        let s = LadicSquare::new(3, 4 * 16 * 16 + 5 * 16 + 6, 1);
        assert_eq!(s.ancestor(1, 16), LadicSquare::new(1, 4, 0));
        assert!(LadicSquare::new(1, 4, 0).contains(&s, 16));
        assert!(!LadicSquare::new(1, 5, 0).contains(&s, 16));
        assert_eq!(s.parent(16).unwrap().level, 2);
        assert_eq!(LadicSquare::new(1, 2, 3).children(4).count(), 16);
    }

    #[test]
    fn locate_and_chain() {
        let g = LadicGrid::standard(16).unwrap();
        let c = g.chain(2, 7).unwrap();
        assert_eq!((c.n1, c.n2), (7 * 16 + 7, 7 * 16 + 7));
        let center = g.rect(&c).center();
        assert_eq!(g.locate(center, 2), Some(c));
        assert_eq!(g.locate(Complex::new(0.0, 0.0), 1), None);
    }
}
