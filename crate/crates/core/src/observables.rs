//! Green's function, the stopped local martingale, the one-point constant
//! `c*`, harmonic measure, and Monte Carlo checks of the one-point estimate.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::geometry::Rect;
use crate::loewner::{PointState, PointTrajectory};
use crate::rng::{Stream, StreamKey};
use crate::sampler::{FlowEvent, FlowOptions, PointFlow, SamplerConfig};
use crate::stats::{wilson_stderr, MeanEstimate};
use crate::walk::{Arc, SlitDomain, WalkOptions};
use crate::Complex;

/// `d = 1 + min(κ/8, 1)`.
pub fn dimension(kappa: f64) -> f64 {
    1.0 + (kappa / 8.0).min(1.0)
}

/// Exponents of the SLE Green's function for one `κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenParams {
    pub kappa: f64,
    pub a: f64,
    pub d: f64,
}

impl GreenParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 8.0) {
            return Err(param("kappa", format!("must lie in (0, 8), got {kappa}")));
        }
        Ok(Self {
            kappa,
            a: 2.0 / kappa,
            d: dimension(kappa),
        })
    }

    /// `G(z) = Im(z)^{d−2} sin^{4a−1}(arg z)`.
    pub fn green(&self, z: Complex) -> f64 {
        let s = z.im / z.norm();
        z.im.powf(self.d - 2.0) * s.powf(4.0 * self.a - 1.0)
    }

    /// The same function written as `|z|^{d−2} sin^{κ/8 + 8/κ − 2}(arg z)`.
    pub fn green_polar(&self, z: Complex) -> f64 {
        let s = z.im / z.norm();
        let e = self.kappa / 8.0 + 8.0 / self.kappa - 2.0;
        z.norm().powf(self.d - 2.0) * s.powf(e)
    }

    /// `Υ^{d−2} S^{4a−1}`.
    pub fn green_general(&self, upsilon: f64, s: f64) -> f64 {
        upsilon.powf(self.d - 2.0) * s.powf(4.0 * self.a - 1.0)
    }

    /// `M = |g'|^{2−d} G(Z)`.
    pub fn martingale(&self, st: &PointState) -> f64 {
        ((2.0 - self.d) * st.log_gp).exp() * self.green(st.z)
    }
}

/// Chordal Green's function in the upper half-plane.
pub fn green_h(z: Complex, kappa: f64) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Green's function needs Im z > 0, got {z}")));
    }
    Ok(GreenParams::new(kappa)?.green(z))
}

/// Green's function from conformal radius and angle data.
pub fn green_general(upsilon: f64, s: f64, kappa: f64) -> Result<f64> {
    if !(upsilon > 0.0) {
        return Err(Error::Domain(format!("upsilon must be positive, got {upsilon}")));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    Ok(GreenParams::new(kappa)?.green_general(upsilon, s))
}

/// `M_t(z)` at the recorded sample nearest below `t`.
pub fn local_mart(traj: &PointTrajectory, t: f64, kappa: f64) -> Result<f64> {
    if let Some(ts) = traj.swallow_time {
        if t >= ts {
            return Err(Error::DeadPoint { t, swallow_time: ts });
        }
    }
    let i = traj.samples.partition_point(|s| s.t <= t);
    if i == 0 {
        return Err(param("t", format!("{t} precedes the trajectory")));
    }
    let s = &traj.samples[i - 1];
    let g = GreenParams::new(kappa)?;
    Ok(s.g_prime_abs.powf(2.0 - g.d) * g.green(s.z))
}

/// `c* = 2 / ∫₀^π sin^{4a} x dx`.
pub fn c_star(kappa: f64) -> f64 {
    c_star_for_exponent(8.0 / kappa)
}

pub(crate) fn c_star_for_exponent(p: f64) -> f64 {
    2.0 / adaptive_simpson(&|x: f64| x.sin().powf(p), 0.0, PI, 1e-12)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Midpoint-rule integral of `G` over `region`, starting from a `mesh`×`mesh`
/// grid and doubling until two refinements agree to `1e-6` relative.
pub fn integrate_green(region: &Rect, kappa: f64, mesh: usize) -> Result<f64> {
    let g = GreenParams::new(kappa)?;
    if region.area() == 0.0 {
        return Ok(0.0);
    }
    if !(region.y0 > 0.0) {
        return Err(Error::Domain(format!(
            "region must stay above the real axis, bottom at {}",
            region.y0
        )));
    }
    let mid = |m: usize| {
        let (hx, hy) = (region.width() / m as f64, region.height() / m as f64);
        let mut s = 0.0;
        for j in 0..m {
            let y = region.y0 + (j as f64 + 0.5) * hy;
            for i in 0..m {
                s += g.green(Complex::new(region.x0 + (i as f64 + 0.5) * hx, y));
            }
        }
        s * hx * hy
    };
    let mut m = mesh.max(1);
    let mut prev = mid(m);
    loop {
        m *= 2;
        let next = mid(m);
        if (next - prev).abs() <= 1e-6 * next.abs() || m >= 1 << 13 {
            return Ok(next);
        }
        prev = next;
    }
}

/// One-point estimate at one `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenEstimate {
    pub z: Complex,
    pub epsilon: f64,
    pub n: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `c*·ε^{2−d}·G(z)`.
    pub theory: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// Knobs of the Green Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenOptions {
    pub flow: FlowOptions,
    /// The curve counts as gone once its tip is this many times `|z|` away.
    pub far_factor: f64,
    /// Relative change of `Υ` over one unit of capacity time below which it
    /// counts as settled.
    pub settle: f64,
    /// Fraction of unsettled replicas tolerated at `t_max`.
    pub max_unsettled: f64,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            far_factor: 10.0,
            settle: 1e-4,
            max_unsettled: 0.01,
        }
    }
}

/// Final state of one Green replica.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenRun {
    pub upsilon: f64,
    pub settled: bool,
    pub t_end: f64,
}

/// Run one chordal replica until `Υ_t(z) <= eps_min`, the point is swallowed
/// or escapes, `Υ` has settled with the tip far away, or `t_max`.
pub fn green_run(cfg: &SamplerConfig, z: Complex, eps_min: f64, opts: &GreenOptions) -> Result<GreenRun> {
    let mut flow = PointFlow::new(
        cfg,
        z,
        false,
        FlowOptions {
            record: true,
            ..opts.flow
        },
    )?;
    let far = opts.far_factor * z.norm();
    let mut next_mark = 1.0;
    let mut mark_upsilon = flow.state.upsilon();
    let mut next_tip_check = 1.0;
    loop {
        let u = flow.state.upsilon();
        if u <= eps_min {
            return Ok(GreenRun {
                upsilon: u,
                settled: true,
                t_end: flow.t,
            });
        }
        match flow.step()? {
            FlowEvent::Advanced => {}
            FlowEvent::Swallowed | FlowEvent::Escaped => {
                return Ok(GreenRun {
                    upsilon: flow.state.upsilon(),
                    settled: true,
                    t_end: flow.t,
                })
            }
            FlowEvent::End => {
                return Ok(GreenRun {
                    upsilon: u,
                    settled: false,
                    t_end: flow.t,
                })
            }
        }
        if flow.on_base_grid() && flow.t >= next_mark {
            let u = flow.state.upsilon();
            let calm = (mark_upsilon - u) <= opts.settle * u;
            if calm && flow.t >= next_tip_check {
                if flow.tip().norm() > far {
                    return Ok(GreenRun {
                        upsilon: u,
                        settled: true,
                        t_end: flow.t,
                    });
                }
                next_tip_check = 2.0 * flow.t;
            }
            mark_upsilon = u;
            next_mark = flow.t.floor() + 1.0;
        }
    }
}

/// Estimate `P{Υ_∞(z) <= ε}` for every `ε` in `eps` from one ensemble.
pub fn green_hit_prob_mc_multi(
    z: Complex,
    eps: &[f64],
    n: usize,
    cfg: &SamplerConfig,
    opts: &GreenOptions,
) -> Result<Vec<GreenEstimate>> {
    let g = GreenParams::new(cfg.kappa)?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("z must lie in the upper half-plane, got {z}")));
    }
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(param("epsilon", "need one or more positive values"));
    }
    if n == 0 {
        return Err(param("n", "need at least one replica"));
    }
    if cfg.dt > 1.0 {
        return Err(param("dt", "base step must not exceed one unit of capacity time"));
    }
    let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let runs = (0..n as u64)
        .into_par_iter()
        .map(|r| green_run(&cfg.with_replica(r), z, eps_min, opts))
        .collect::<Result<Vec<_>>>()?;
    let unsettled = runs.iter().filter(|r| !r.settled).count();
    if unsettled as f64 > opts.max_unsettled * n as f64 {
        return Err(Error::Horizon {
            unstable: unsettled,
            total: n,
        });
    }
    let cs = c_star(cfg.kappa);
    Ok(eps
        .iter()
        .map(|&e| {
            let hits = runs.iter().filter(|r| r.upsilon <= e).count();
            let p_hat = hits as f64 / n as f64;
            let theory = cs * e.powf(2.0 - g.d) * g.green(z);
            GreenEstimate {
                z,
                epsilon: e,
                n,
                hits,
                p_hat,
                theory,
                ratio: p_hat / theory,
                stderr: wilson_stderr(hits, n),
            }
        })
        .collect())
}

/// Single-`ε` form of [`green_hit_prob_mc_multi`] with default options.
pub fn green_hit_prob_mc(z: Complex, epsilon: f64, n: usize, cfg: &SamplerConfig) -> Result<GreenEstimate> {
    Ok(green_hit_prob_mc_multi(z, &[epsilon], n, cfg, &GreenOptions::default())?[0])
}

/// Ensemble means of `M_{t∧τ}(z)`, `τ = inf{t: Υ_t(z) <= ε}`, at each
/// checkpoint time (which must be base-grid times of `cfg`).
pub fn stopped_martingale_mc(
    z: Complex,
    epsilon: f64,
    checkpoints: &[f64],
    n: usize,
    cfg: &SamplerConfig,
    flow: &FlowOptions,
) -> Result<Vec<MeanEstimate>> {
    let g = GreenParams::new(cfg.kappa)?;
    let mut marks = Vec::with_capacity(checkpoints.len());
    for &c in checkpoints {
        let k = (c / cfg.dt).round();
        if !(c > 0.0 && c <= cfg.t_max) || (k * cfg.dt - c).abs() > 1e-9 * c {
            return Err(param(
                "checkpoints",
                format!("{c} is not a base-grid time in (0, t_max]"),
            ));
        }
        marks.push(k as u64);
    }
    let last = *marks.iter().max().ok_or_else(|| param("checkpoints", "empty"))?;
    let opts = FlowOptions {
        upsilon_floor: Some(epsilon),
        record: false,
        ..*flow
    };
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut f = PointFlow::new(&cfg.with_replica(r), z, false, opts)?;
            let mut out = vec![f64::NAN; marks.len()];
            let mut frozen: Option<f64> = None;
            loop {
                if frozen.is_none() && f.state.upsilon() <= epsilon {
                    frozen = Some(g.martingale(&f.state));
                }
                if f.on_base_grid() {
                    for (slot, &m) in out.iter_mut().zip(&marks) {
                        if m == f.base_index() {
                            *slot = frozen.unwrap_or_else(|| g.martingale(&f.state));
                        }
                    }
                    if f.base_index() >= last {
                        return Ok(out);
                    }
                }
                if let Some(v) = frozen {
                    // Nothing changes after the stopping time.
                    for (slot, &m) in out.iter_mut().zip(&marks) {
                        if m >= f.base_index() && slot.is_nan() {
                            *slot = v;
                        }
                    }
                    return Ok(out);
                }
                match f.step()? {
                    FlowEvent::Advanced => {}
                    FlowEvent::Swallowed => frozen = Some(0.0),
                    FlowEvent::Escaped => frozen = Some(g.martingale(&f.state)),
                    FlowEvent::End => return Ok(out),
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..marks.len())
        .map(|j| MeanEstimate::of(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect())
}

/// Harmonic measure estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Fraction of Brownian walkers from `z` that leave `H \ boundary` through
/// `arc`.
pub fn harmonic_measure_mc(
    boundary: &[&[Complex]],
    z: Complex,
    arc: &Arc,
    n: usize,
    seed: u64,
    walk: &WalkOptions,
) -> Result<HmEstimate> {
    if n == 0 {
        return Err(param("n", "need at least one walker"));
    }
    let dom = SlitDomain::new(boundary);
    let key = StreamKey::new(seed, 0, Stream::Walkers);
    let hits = (0..n as u64)
        .into_par_iter()
        .map(|i| dom.walk(z, &mut key.sequence(i), walk).map(|e| arc.contains(&e)))
        .collect::<Result<Vec<bool>>>()?;
    let h = hits.iter().filter(|&&b| b).count();
    Ok(HmEstimate {
        value: h as f64 / n as f64,
        stderr: wilson_stderr(h, n),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::{evolve_point, DrivingPath};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn green_examples() {
        assert_eq!(green_h(Complex::new(0.0, 1.0), 2.0).unwrap(), 1.0);
        assert_relative_eq!(
            green_h(Complex::new(0.0, 2.0), 2.0).unwrap(),
            0.594_603_557_501_360_5,
            max_relative = 1e-12
        );
        let g = GreenParams::new(8.0 / 3.0).unwrap();
        let z = Complex::new(1.0, 1.0);
        assert_relative_eq!(
            g.green(3.0 * z),
            3f64.powf(g.d - 2.0) * g.green(z),
            max_relative = 1e-12
        );
        assert!(green_h(Complex::new(1.0, 0.0), 2.0).is_err());
    }

    #[test]
    fn green_general_matches_half_plane() {
        for y in [0.3, 1.0, 2.0, 7.5] {
            let z = Complex::new(0.0, y);
            assert_relative_eq!(
                green_general(y, 1.0, 2.0).unwrap(),
                green_h(z, 2.0).unwrap(),
                max_relative = 1e-12
            );
        }
        assert_eq!(green_general(1.0, 1.0, 3.0).unwrap(), 1.0);
        assert!(green_general(0.0, 0.5, 3.0).is_err());
        assert!(green_general(1.0, 1.5, 3.0).is_err());
        // Conformal covariance under z ↦ rz: Υ scales by r, S is unchanged.
        let (r, z) = (2.5, Complex::new(0.4, 0.9));
        let s = z.im / z.norm();
        let lhs = green_general(r * z.im, s, 6.0).unwrap();
        assert_relative_eq!(lhs, green_h(r * z, 6.0).unwrap(), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn two_green_forms_agree(x in -5.0f64..5.0, y in 0.01f64..5.0, kappa in 0.1f64..7.99) {
            let g = GreenParams::new(kappa).unwrap();
            let z = Complex::new(x, y);
            let (u, v) = (g.green(z), g.green_polar(z));
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(v.abs()));
        }

        #[test]
        fn green_scaling(x in -3.0f64..3.0, y in 0.05f64..3.0, r in 0.1f64..10.0, kappa in 0.5f64..7.5) {
            let g = GreenParams::new(kappa).unwrap();
            let z = Complex::new(x, y);
            let lhs = g.green(r * z);
            let rhs = r.powf(g.d - 2.0) * g.green(z);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn c_star_closed_forms() {
        assert!((c_star_for_exponent(1.0) - 1.0).abs() < 1e-10);
        assert!((c_star_for_exponent(2.0) - 4.0 / PI).abs() < 1e-10);
        assert!((c_star(8.0 / 3.0) - 1.5).abs() < 1e-10);
        assert!((c_star(2.0) - 16.0 / (3.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn martingale_at_time_zero() {
        let path = DrivingPath::constant(8.0 / 3.0, 0.01, 10).unwrap();
        let z = Complex::new(0.3, 1.2);
        let traj = evolve_point(&path, z).unwrap();
        assert_eq!(
            local_mart(&traj, 0.0, 8.0 / 3.0).unwrap(),
            green_h(z, 8.0 / 3.0).unwrap()
        );
        let dead = evolve_point(&DrivingPath::constant(4.0, 0.01, 200).unwrap(), Complex::new(0.0, 1.0)).unwrap();
        assert!(matches!(local_mart(&dead, 1.5, 4.0), Err(Error::DeadPoint { .. })));
    }

    #[test]
    fn integrate_green_scaling_and_degenerate() {
        let kappa = 8.0 / 3.0;
        let d = dimension(kappa);
        let sq = Rect::new(-0.5, 2.0, 0.5, 3.0);
        let i1 = integrate_green(&sq, kappa, 8).unwrap();
        let i2 = integrate_green(&sq.scale(2.0), kappa, 8).unwrap();
        assert!(i1 > 0.0);
        assert!((i2 / i1 - 2f64.powf(d)).abs() < 1e-5 * 2f64.powf(d));
        assert_eq!(integrate_green(&Rect::new(0.0, 1.0, 0.0, 2.0), kappa, 8).unwrap(), 0.0);
        assert!(integrate_green(&Rect::new(0.0, 0.0, 1.0, 1.0), kappa, 8).is_err());
    }

    #[test]
    fn harmonic_measure_half_plane() {
        let hm = harmonic_measure_mc(
            &[],
            Complex::new(0.0, 1.0),
            &Arc::NegativeRealAxis,
            4000,
            1,
            &WalkOptions::default(),
        )
        .unwrap();
        assert!((hm.value - 0.5).abs() < 3.0 * hm.stderr, "{hm:?}");
        let th = PI / 4.0;
        let z = Complex::from_polar(1.0, th);
        let hm = harmonic_measure_mc(&[], z, &Arc::NegativeRealAxis, 4000, 2, &WalkOptions::default()).unwrap();
        assert!((hm.value - 0.25).abs() < 3.0 * hm.stderr, "{hm:?}");
    }

    #[test]
    fn sine_is_comparable_to_smaller_harmonic_measure() {
        // Half-plane: S(i) = 1 and both arcs have measure 1/2.
        let hm = harmonic_measure_mc(
            &[],
            Complex::new(0.0, 1.0),
            &Arc::PositiveRealAxis,
            4000,
            3,
            &WalkOptions::default(),
        )
        .unwrap();
        let r = 1.0 / hm.value.min(1.0 - hm.value);
        assert!((0.25..=4.0).contains(&r), "{r}");
        // Vertical slit [0, i]; the two arcs run from the tip to ∞ along either side.
        let path = DrivingPath::constant(4.0, 0.01, 100).unwrap();
        let tr = crate::loewner::trace(&path);
        let left = Arc::Union(vec![Arc::LeftSide(0), Arc::NegativeRealAxis]);
        for (k, z) in [Complex::new(0.5, 0.5), Complex::new(-1.0, 2.0), Complex::new(0.2, 0.1)]
            .into_iter()
            .enumerate()
        {
            let s = evolve_point(&path, z).unwrap().last().s;
            let hm =
                harmonic_measure_mc(&[&tr.points], z, &left, 4000, 10 + k as u64, &WalkOptions::default()).unwrap();
            let r = s / hm.value.min(1.0 - hm.value);
            assert!((0.25..=4.0).contains(&r), "z = {z}: {r}");
        }
    }

    #[test]
    fn epsilon_above_height_hits_immediately() {
        let cfg = SamplerConfig::new(2.0, 0.01, 1.0, 3).unwrap();
        let e = green_hit_prob_mc(Complex::new(0.0, 1.0), 1.0, 50, &cfg).unwrap();
        assert_eq!(e.p_hat, 1.0);
    }
}
