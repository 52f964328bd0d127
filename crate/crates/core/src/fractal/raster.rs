//! Sparse bit grids for sausage areas and square occupancy.

use std::collections::HashMap;

use crate::Complex;

const TILE: i64 = 64;

/// A set of grid cells stored as 64×64 bit tiles.
#[derive(Default)]
pub(crate) struct CellSet {
    tiles: HashMap<(i64, i64), Box<[u64; 64]>>,
}

/// Cells `(i, j)` of pitch `pitch` with centers `origin + (i+½, j+½)·pitch`,
/// restricted to `0 ≤ i < nx`, `0 ≤ j < ny`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CellGrid {
    pub origin: Complex,
    pub pitch: f64,
    pub nx: i64,
    pub ny: i64,
}

impl CellGrid {
    fn center(&self, i: i64, j: i64) -> Complex {
        self.origin + Complex::new((i as f64 + 0.5) * self.pitch, (j as f64 + 0.5) * self.pitch)
    }

    /// Index range of centers in `[lo, hi]` along one axis.
    fn span(&self, lo: f64, hi: f64, origin: f64, n: i64) -> (i64, i64) {
        let a = ((lo - origin) / self.pitch - 0.5).ceil().max(0.0);
        let b = ((hi - origin) / self.pitch - 0.5).floor().min((n - 1) as f64);
        (a as i64, b as i64)
    }
}

impl CellSet {
    pub fn count(&self) -> u64 {
        self.tiles
            .values()
            .map(|t| t.iter().map(|w| w.count_ones() as u64).sum::<u64>())
            .sum()
    }

    /// Per-block counts for blocks of `block × block` cells.
    pub fn block_counts(&self, block: i64) -> HashMap<(i64, i64), u64> {
        let mut out: HashMap<(i64, i64), u64> = HashMap::new();
        for (&(ti, tj), tile) in &self.tiles {
            for (r, &word) in tile.iter().enumerate() {
                if word == 0 {
                    continue;
                }
                let i = ti * TILE + r as i64;
                let mut j0 = tj * TILE;
                while j0 < (tj + 1) * TILE {
                    let bj = j0.div_euclid(block);
                    let j1 = ((bj + 1) * block).min((tj + 1) * TILE);
                    let (lo, hi) = ((j0 - tj * TILE) as u32, (j1 - tj * TILE) as u32);
                    let mask = if hi - lo == 64 {
                        u64::MAX
                    } else {
                        ((1u64 << (hi - lo)) - 1) << lo
                    };
                    let c = (word & mask).count_ones() as u64;
                    if c > 0 {
                        *out.entry((i.div_euclid(block), bj)).or_default() += c;
                    }
                    j0 = j1;
                }
            }
        }
        out
    }

    /// Mark every cell whose center lies within `eps` of `[a, b]`.
    pub fn mark_sausage(&mut self, g: &CellGrid, a: Complex, b: Complex, eps: f64) {
        let (i0, i1) = g.span(a.re.min(b.re) - eps, a.re.max(b.re) + eps, g.origin.re, g.nx);
        let (j0, j1) = g.span(a.im.min(b.im) - eps, a.im.max(b.im) + eps, g.origin.im, g.ny);
        if i0 > i1 || j0 > j1 {
            return;
        }
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let eps2 = eps * eps;
        let near = |p: Complex| {
            let ap = p - a;
            let t = if len2 == 0.0 {
                0.0
            } else {
                ((ap * ab.conj()).re / len2).clamp(0.0, 1.0)
            };
            (ap - ab * t).norm_sqr() <= eps2
        };
        for ti in i0.div_euclid(TILE)..=i1.div_euclid(TILE) {
            for tj in j0.div_euclid(TILE)..=j1.div_euclid(TILE) {
                let tile = self.tiles.entry((ti, tj)).or_insert_with(|| Box::new([0; 64]));
                for i in i0.max(ti * TILE)..=i1.min(ti * TILE + TILE - 1) {
                    for j in j0.max(tj * TILE)..=j1.min(tj * TILE + TILE - 1) {
                        let bit = 1u64 << (j - tj * TILE);
                        let r = (i - ti * TILE) as usize;
                        if tile[r] & bit == 0 && near(g.center(i, j)) {
                            tile[r] |= bit;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_area() {
        let g = CellGrid {
            origin: Complex::new(-1.0, -1.0),
            pitch: 1.0 / 512.0,
            nx: 1024,
            ny: 1024,
        };
        let mut s = CellSet::default();
        let p = Complex::new(0.0, 0.0);
        s.mark_sausage(&g, p, p, 0.5);
        s.mark_sausage(&g, p, p, 0.5);
        let area = s.count() as f64 * g.pitch * g.pitch;
        assert!((area - std::f64::consts::PI / 4.0).abs() < 1e-3, "{area}");
    }

    #[test]
    fn block_counts_partition_total() {
        let g = CellGrid {
            origin: Complex::new(0.0, 0.0),
            pitch: 0.01,
            nx: 200,
            ny: 200,
        };
        let mut s = CellSet::default();
        s.mark_sausage(&g, Complex::new(0.1, 0.2), Complex::new(1.9, 1.3), 0.07);
        let blocks = s.block_counts(40);
        assert_eq!(blocks.values().sum::<u64>(), s.count());
        assert!(blocks.keys().all(|&(i, j)| (0..5).contains(&i) && (0..5).contains(&j)));
    }
}
