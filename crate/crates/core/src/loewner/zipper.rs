//! Fast backward composition of many slit maps.
//!
//! Every aligned run of `2^h` steps (`h >= min_level`) is summarized by one
//! truncated Laurent series of its inverse map,
//!
//! ```text
//! Ψ(W) = W + c₀ + Σ_{p=1..L} c_p (W − c)^{−p},
//! ```
//!
//! expanded about the midpoint `c` of the real interval that contains all of
//! the run's singularities. The blocks form a binary hierarchy built
//! incrementally as steps are pushed. Pulling a point back walks the step
//! sequence from the end and, at each aligned position, applies the largest
//! block whose series is accurate at the current point, falling back to one
//! exact step otherwise. All coefficients are real because every map commutes
//! with complex conjugation.

use super::{forward_real, inverse_slit_step, Step};
use crate::Complex;

/// Tuning of the block hierarchy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZipperOptions {
    /// Number of Laurent terms `L` kept per block.
    pub terms: usize,
    /// Smallest block size is `2^min_level` steps.
    pub min_level: u32,
    /// A block is only used when `radius / |W − c|` is at most this.
    pub max_ratio: f64,
    /// Bound on the estimated truncation error, relative to `|W − c|`.
    pub tol: f64,
}

impl Default for ZipperOptions {
    fn default() -> Self {
        Self {
            terms: 28,
            min_level: 2,
            max_ratio: 0.9,
            tol: 1e-10,
        }
    }
}

/// Truncated Laurent expansion of a composed inverse map.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent {
    /// Singularities lie in `[lo, hi]` on the real axis.
    pub lo: f64,
    pub hi: f64,
    pub c0: f64,
    /// `coef[p - 1]` multiplies `(W − center)^{−p}`.
    pub coef: Vec<f64>,
}

impl Laurent {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Series of one inverse step `W ↦ sqrt(W² − s²) + ΔV`, `s² = 2aΔt`.
    pub fn leaf(step: Step, a: f64, terms: usize) -> Self {
        let s2 = 2.0 * a * step.dt;
        let s = s2.sqrt();
        let mut coef = vec![0.0; terms];
        // W·sqrt(1 − s²/W²) = Σ t_m s^{2m} W^{1−2m}, t_m = (−1)^m C(1/2, m).
        let mut t = 1.0;
        let mut pow = 1.0;
        let mut m = 1;
        while 2 * m - 1 <= terms {
            t *= (m as f64 - 1.5) / m as f64;
            pow *= s2;
            coef[2 * m - 2] = t * pow;
            m += 1;
        }
        Self {
            lo: -s,
            hi: s,
            c0: step.dv,
            coef,
        }
    }

    /// Evaluate the truncated series.
    #[inline]
    pub fn eval(&self, w: Complex) -> Complex {
        let x = (w - self.center()).inv();
        let mut acc = Complex::new(0.0, 0.0);
        for &c in self.coef.iter().rev() {
            acc = (acc + c) * x;
        }
        w + self.c0 + acc
    }

    /// Evaluate when the truncation error at `w` is below tolerance.
    #[inline]
    pub fn try_eval(&self, w: Complex, opts: &ZipperOptions) -> Option<Complex> {
        let u = (w - self.center()).norm();
        let r = self.radius();
        if r > opts.max_ratio * u {
            return None;
        }
        let rho = r / u;
        let n = self.coef.len();
        let inv = 1.0 / u;
        let tail = (self.coef[n - 1].abs() * inv + self.coef[n - 2].abs()) * inv.powi(n as i32 - 1);
        if tail > opts.tol * u * (1.0 - rho) {
            return None;
        }
        Some(self.eval(w))
    }

    /// Coefficients about a shifted center: `v = u + h`.
    fn translated(coef: &[f64], h: f64) -> Vec<f64> {
        let n = coef.len();
        let mut out = vec![0.0; n];
        for p in 1..=n {
            let b = coef[p - 1];
            if b == 0.0 {
                continue;
            }
            // b (u + h)^{−p} = b Σ_j C(−p, j) h^j u^{−p−j}
            let mut term = b;
            for j in 0..=(n - p) {
                out[p + j - 1] += term;
                term *= -((p + j) as f64) / (j + 1) as f64 * h;
            }
        }
        out
    }

    /// `early ∘ late` expanded about the center of `[lo, hi]`.
    pub fn compose(early: &Laurent, late: &Laurent, lo: f64, hi: f64) -> Laurent {
        let n = late.coef.len();
        let c = 0.5 * (lo + hi);
        let bt = Self::translated(&late.coef, c - late.center());
        // X − c_E = u (1 + Q), Q = e u^{−1} + Σ b̃_q u^{−q−1}.
        let mut q = vec![0.0; n + 1];
        q[1] = c + late.c0 - early.center();
        q[2..=n].copy_from_slice(&bt[..n - 1]);
        let mut p = vec![0.0; n + 1];
        p[0] = 1.0;
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += q[j] * p[k - j];
            }
            p[k] = -s;
        }
        let mut out = bt;
        let mut pw = p.clone();
        for (i, &ap) in early.coef.iter().enumerate() {
            let pp = i + 1;
            if ap != 0.0 {
                for qq in pp..=n {
                    out[qq - 1] += ap * pw[qq - pp];
                }
            }
            if pp == n {
                break;
            }
            // pw ← pw · P, keeping degrees up to n − pp − 1.
            let deg = n - pp - 1;
            let mut next = vec![0.0; deg + 1];
            for k in 0..=deg {
                let mut s = 0.0;
                for j in 0..=k {
                    s += pw[j] * p[k - j];
                }
                next[k] = s;
            }
            pw = next;
        }
        Laurent {
            lo,
            hi,
            c0: early.c0 + late.c0,
            coef: out,
        }
    }
}

/// Incrementally built hierarchy of Laurent blocks over a step sequence.
#[derive(Clone, Debug)]
pub struct Zipper {
    a: f64,
    opts: ZipperOptions,
    steps: Vec<Step>,
    /// `levels[i][j]` covers steps `[j·2^h, (j+1)·2^h)` with `h = min_level + i`.
    levels: Vec<Vec<Laurent>>,
}

impl Zipper {
    pub fn new(a: f64, opts: ZipperOptions) -> Self {
        assert!(opts.terms >= 2, "at least two Laurent terms");
        Self {
            a,
            opts,
            steps: Vec::new(),
            levels: Vec::new(),
        }
    }

    pub fn from_steps(a: f64, opts: ZipperOptions, steps: impl IntoIterator<Item = Step>) -> Self {
        let mut z = Self::new(a, opts);
        for s in steps {
            z.push(s);
        }
        z
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
        let n = self.steps.len();
        let h0 = self.opts.min_level;
        let mut h = h0;
        while n.is_multiple_of(1usize << h) {
            let size = 1usize << h;
            let start = n - size;
            let block = if h == h0 {
                self.build_base(start, n)
            } else {
                let lvl = &self.levels[(h - h0 - 1) as usize];
                let j = 2 * (start / size);
                let half = size / 2;
                self.merge(&lvl[j], &lvl[j + 1], start + half..n)
            };
            let i = (h - h0) as usize;
            if self.levels.len() <= i {
                self.levels.push(Vec::new());
            }
            debug_assert_eq!(self.levels[i].len(), start / size);
            self.levels[i].push(block);
            h += 1;
        }
    }

    fn build_base(&self, start: usize, end: usize) -> Laurent {
        let leaf = |k: usize| Laurent::leaf(self.steps[k], self.a, self.opts.terms);
        let mut acc = leaf(end - 1);
        for k in (start..end - 1).rev() {
            acc = self.merge(&leaf(k), &acc, k + 1..end);
        }
        acc
    }

    fn merge(&self, early: &Laurent, late: &Laurent, late_steps: std::ops::Range<usize>) -> Laurent {
        let mut lo = early.lo;
        let mut hi = early.hi;
        for s in &self.steps[late_steps] {
            lo = forward_real(lo, *s, self.a, -1.0);
            hi = forward_real(hi, *s, self.a, 1.0);
        }
        Laurent::compose(early, late, lo.min(late.lo), hi.max(late.hi))
    }

    fn block(&self, h: u32, index: usize) -> Option<&Laurent> {
        self.levels
            .get((h - self.opts.min_level) as usize)
            .and_then(|l| l.get(index))
    }

    /// Apply the inverse maps of steps `p-1, ..., 0` to `w`, which is given
    /// in driving-relative coordinates at step `p`.
    pub fn pull_back(&self, w: Complex, p: usize) -> Complex {
        assert!(p <= self.steps.len());
        let h0 = self.opts.min_level;
        let top = h0 + self.levels.len() as u32;
        let mut w = w;
        let mut p = p;
        while p > 0 {
            let tz = p.trailing_zeros().min(top.saturating_sub(1));
            let mut used = false;
            if tz >= h0 {
                for h in (h0..=tz).rev() {
                    if let Some(b) = self.block(h, (p >> h) - 1) {
                        if let Some(v) = b.try_eval(w, &self.opts) {
                            w = v;
                            p -= 1 << h;
                            used = true;
                            break;
                        }
                    }
                }
            }
            if !used {
                p -= 1;
                w = inverse_slit_step(w, self.steps[p], self.a);
            }
        }
        w
    }

    /// Reference implementation: one exact inverse step at a time.
    pub fn pull_back_exact(&self, w: Complex, p: usize) -> Complex {
        self.steps[..p]
            .iter()
            .rev()
            .fold(w, |w, s| inverse_slit_step(w, *s, self.a))
    }

    /// Laurent series of the inverse of the whole flow over steps `[0, p)`,
    /// composed from the stored blocks and leaf series.
    pub fn series(&self, p: usize) -> Option<Laurent> {
        let h0 = self.opts.min_level;
        let mut acc: Option<(Laurent, usize)> = None;
        let mut q = p;
        while q > 0 {
            let tz = q.trailing_zeros();
            let (piece, size) = match (tz >= h0).then(|| {
                (h0..=tz)
                    .rev()
                    .find_map(|h| self.block(h, (q >> h) - 1).map(|b| (b.clone(), 1usize << h)))
            }) {
                Some(Some(x)) => x,
                _ => (Laurent::leaf(self.steps[q - 1], self.a, self.opts.terms), 1),
            };
            q -= size;
            acc = Some(match acc {
                None => (piece, q),
                Some((late, late_start)) => (self.merge(&piece, &late, late_start..p), q),
            });
        }
        acc.map(|(l, _)| l)
    }
}
