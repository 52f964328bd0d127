//! Chordal Loewner flow with piecewise-constant driving.
//!
//! On each step `[t_k, t_{k+1}]` the driving function is held at its right
//! endpoint `V(t_{k+1})`, so the elementary map is the explicit vertical slit
//! map and the mapped tip lands exactly on `V(t_{k+1})`. In coordinates
//! relative to the driving point, one forward step is
//!
//! ```text
//! Z ↦ sqrt((Z − ΔV)² + 2aΔt)
//! ```
//!
//! and its inverse is `W ↦ sqrt(W² − 2aΔt) + ΔV`, both taken on the branch
//! with nonnegative imaginary part.

mod hcap;
mod zipper;

pub use hcap::{hcap_mc, HcapEstimate, HcapOptions};

use std::sync::Arc;

pub use zipper::{Laurent, Zipper, ZipperOptions};

use crate::error::{param, Error, Result};
use crate::geometry::{self, Rect};
use crate::Complex;

/// Points whose mapped image exceeds this modulus are treated as escaped.
pub const ESCAPE_BOUND: f64 = 1e9;

/// Relative size of the imaginary part below which a point counts as pinned
/// onto the real axis.
const SWALLOW_REL: f64 = 1e-13;

/// Sampled driving function on a strictly increasing capacity-time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivingPath {
    kappa: f64,
    a: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

/// One elementary step of the flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub dt: f64,
    pub dv: f64,
}

impl DrivingPath {
    pub fn new(kappa: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(param("kappa", format!("must be positive, got {kappa}")));
        }
        if times.is_empty() || times.len() != values.len() {
            return Err(param("times", "need equal, nonzero numbers of times and values"));
        }
        if times[0] != 0.0 {
            return Err(param("times", "grid must start at t = 0"));
        }
        if values[0] != 0.0 {
            return Err(param("values", "driving must start at V(0) = 0"));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(param(
                "times",
                format!("not strictly increasing at {} -> {}", w[0], w[1]),
            ));
        }
        if values.iter().chain(times.iter()).any(|x| !x.is_finite()) {
            return Err(param("values", "non-finite entry"));
        }
        Ok(Self {
            kappa,
            a: 2.0 / kappa,
            times,
            values,
        })
    }

    /// `V ≡ 0` on a uniform grid of `n` steps.
    pub fn constant(kappa: f64, dt: f64, n: usize) -> Result<Self> {
        Self::from_fn(kappa, dt, n, |_| 0.0)
    }

    /// `V(t) = f(t)` sampled on a uniform grid of `n` steps; `f(0)` must be 0.
    pub fn from_fn(kappa: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(param("dt", "must be positive"));
        }
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(kappa, times, values)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of grid points (steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn step(&self, k: usize) -> Step {
        Step {
            dt: self.times[k + 1] - self.times[k],
            dv: self.values[k + 1] - self.values[k],
        }
    }

    pub fn steps(&self) -> impl ExactSizeIterator<Item = Step> + '_ {
        (0..self.times.len() - 1).map(move |k| self.step(k))
    }

    /// Piecewise-linear interpolation of `V`; clamps outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.index_at(t);
        if k + 1 >= self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Largest grid index with `times[k] <= t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).saturating_sub(1)
    }

    /// Grid index whose time equals `t` up to rounding.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&x| x < t - 1e-12 * t.abs().max(1.0));
        (k < self.times.len() && (self.times[k] - t).abs() <= 1e-9 * t.abs().max(1.0)).then_some(k)
    }
}

/// Capacity-parametrized curve `γ(t_i)` generated by a driving path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub driving: Arc<DrivingPath>,
    pub points: Vec<Complex>,
    /// Grid indices where the backward composition collapsed onto the real
    /// axis; those points were projected to `Im = 0`.
    pub degenerate: Vec<usize>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.driving.times[i]
    }

    /// Points `γ(t_0..=t_i)` for the grid time `t`.
    pub fn prefix(&self, t: f64) -> &[Complex] {
        let k = self.driving.index_at(t);
        &self.points[..=k.min(self.points.len() - 1)]
    }

    /// Longest chord of the polyline, optionally only near `region`.
    pub fn resolution(&self, near: Option<(&Rect, f64)>) -> f64 {
        geometry::max_segment_length(&self.points, near)
    }

    pub fn check_degenerate(&self) -> Result<()> {
        if self.degenerate.is_empty() {
            Ok(())
        } else {
            Err(Error::NumericDegenerate {
                count: self.degenerate.len(),
            })
        }
    }

    /// Euclidean radius of the hull up to grid index `i`.
    pub fn radius_until(&self, i: usize) -> f64 {
        self.points[..=i].iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Root of `w` with nonnegative imaginary part. On the real axis, `hint`
/// selects the sign of the real part.
#[inline]
pub fn upper_sqrt(w: Complex, hint: f64) -> Complex {
    let r = w.sqrt();
    if r.im < 0.0 || (r.im == 0.0 && (r.re > 0.0) != (hint > 0.0) && r.re != 0.0) {
        -r
    } else {
        r
    }
}

/// One forward step of the flow on a point in driving-relative coordinates:
/// shift by `dv`, then apply the vertical-slit map of capacity `2a·dt`.
///
/// Returns [`Error::Swallowed`] when the image is pinned onto the real axis.
pub fn slit_step(z: Complex, dv: f64, dt: f64, a: f64) -> Result<Complex> {
    Ok(slit_step_with_derivative(z, dv, dt, a)?.0)
}

/// [`slit_step`] plus the modulus of the step's derivative.
#[inline]
pub fn slit_step_with_derivative(z: Complex, dv: f64, dt: f64, a: f64) -> Result<(Complex, f64)> {
    if dt < 0.0 {
        return Err(param("dt", "must be nonnegative"));
    }
    let w = z - dv;
    if dt == 0.0 {
        return Ok((w, 1.0));
    }
    let cap = 2.0 * a * dt;
    if w.im == 0.0 && w.re == 0.0 {
        return Err(Error::Swallowed);
    }
    let r = upper_sqrt(w * w + cap, w.re);
    if z.im > 0.0 && r.im <= SWALLOW_REL * (r.norm() + cap.sqrt()) {
        return Err(Error::Swallowed);
    }
    Ok((r, w.norm() / r.norm()))
}

/// Inverse of one step: `W ↦ sqrt(W² − 2a·dt) + dv`.
#[inline]
pub fn inverse_slit_step(w: Complex, step: Step, a: f64) -> Complex {
    upper_sqrt(w * w - 2.0 * a * step.dt, w.re) + step.dv
}

/// Real-axis restriction of the forward step. `side` decides points sitting
/// exactly on the slit base.
#[inline]
pub(crate) fn forward_real(x: f64, step: Step, a: f64, side: f64) -> f64 {
    let u = x - step.dv;
    let r = (u * u + 2.0 * a * step.dt).sqrt();
    if u > 0.0 || (u == 0.0 && side > 0.0) {
        r
    } else {
        -r
    }
}

/// State of one tracked interior point under the forward flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState {
    /// `Z_t = g_t(z) − V_t`.
    pub z: Complex,
    /// `log |g_t'(z)|`.
    pub log_gp: f64,
}

impl PointState {
    pub fn new(z: Complex) -> Self {
        Self { z, log_gp: 0.0 }
    }

    pub fn upsilon(&self) -> f64 {
        self.z.im * (-self.log_gp).exp()
    }

    pub fn sin_arg(&self) -> f64 {
        self.z.im / self.z.norm()
    }

    pub fn g_prime_abs(&self) -> f64 {
        self.log_gp.exp()
    }

    #[inline]
    pub fn advance(&mut self, step: Step, a: f64) -> Result<()> {
        let (z, d) = slit_step_with_derivative(self.z, step.dv, step.dt, a)?;
        self.z = z;
        self.log_gp += d.ln();
        Ok(())
    }
}

/// One recorded sample of a tracked point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSample {
    pub t: f64,
    pub z: Complex,
    pub upsilon: f64,
    pub s: f64,
    pub g_prime_abs: f64,
}

impl PointSample {
    fn from_state(t: f64, st: &PointState) -> Self {
        Self {
            t,
            z: st.z,
            upsilon: st.upsilon(),
            s: st.sin_arg(),
            g_prime_abs: st.g_prime_abs(),
        }
    }
}

/// History of `Z_t`, `Υ_t`, `S_t` and `|g_t'|` for one interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTrajectory {
    pub z0: Complex,
    pub samples: Vec<PointSample>,
    /// Midpoint of the step in which the point was swallowed.
    pub swallow_time: Option<f64>,
    /// Set when `|Z|` exceeded [`ESCAPE_BOUND`]; `Υ` is frozen from there on.
    pub escaped: bool,
}

impl PointTrajectory {
    pub fn last(&self) -> &PointSample {
        self.samples.last().unwrap()
    }
}

/// Forward-evolve `z` along every step of `driving`.
pub fn evolve_point(driving: &DrivingPath, z: Complex) -> Result<PointTrajectory> {
    if !(z.im > 0.0) || !z.re.is_finite() {
        return Err(Error::Domain(format!(
            "tracked point must lie in the open upper half-plane, got {z}"
        )));
    }
    let a = driving.a();
    let mut st = PointState::new(z);
    let mut samples = Vec::with_capacity(driving.len());
    samples.push(PointSample::from_state(0.0, &st));
    let mut swallow_time = None;
    let mut escaped = false;
    for k in 0..driving.len() - 1 {
        let step = driving.step(k);
        match st.advance(step, a) {
            Ok(()) => {}
            Err(Error::Swallowed) => {
                swallow_time = Some(driving.times[k] + 0.5 * step.dt);
                break;
            }
            Err(e) => return Err(e),
        }
        if st.z.norm() > ESCAPE_BOUND {
            escaped = true;
            break;
        }
        samples.push(PointSample::from_state(driving.times[k + 1], &st));
    }
    Ok(PointTrajectory {
        z0: z,
        samples,
        swallow_time,
        escaped,
    })
}

/// Tip offset used at grid index `k >= 1`.
pub fn tip_offset(driving: &DrivingPath, k: usize) -> f64 {
    (driving.times[k] - driving.times[k - 1]).sqrt() / 10.0
}

/// Reconstruct `γ(t_i)` at every grid time by backward composition from
/// `V(t_i) + i·offset`, `offset = sqrt(Δt)/10`.
pub fn trace(driving: &DrivingPath) -> Trace {
    trace_with(Arc::new(driving.clone()), ZipperOptions::default())
}

/// [`trace`] on a shared path with explicit zipper options.
pub fn trace_with(driving: Arc<DrivingPath>, opts: ZipperOptions) -> Trace {
    let mut zip = Zipper::new(driving.a(), opts);
    let v0 = driving.values[0];
    let mut points = Vec::with_capacity(driving.len());
    let mut degenerate = Vec::new();
    points.push(Complex::new(v0, 0.0));
    for k in 0..driving.len() - 1 {
        zip.push(driving.step(k));
        let off = tip_offset(&driving, k + 1);
        let mut p = zip.pull_back(Complex::new(0.0, off), k + 1) + v0;
        if !(p.im > 0.0) {
            p.im = 0.0;
            degenerate.push(k + 1);
        }
        points.push(p);
    }
    Trace {
        driving,
        points,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn slit_step_closed_forms() {
        assert!(matches!(slit_step(c(0.0, 1.0), 0.0, 0.5, 1.0), Err(Error::Swallowed)));
        let z = slit_step(c(0.0, 2.0), 0.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(z.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(z.im, 3f64.sqrt(), epsilon = 1e-15);
        let z0 = c(0.3, 0.7);
        assert_eq!(slit_step(z0, 0.0, 0.0, 0.5).unwrap(), z0);
        let tiny = slit_step(z0, 0.0, 1e-300, 0.5).unwrap();
        assert!((tiny - z0).norm() < 1e-15);
    }

    #[test]
    fn slit_step_real_points_stay_real() {
        let x = slit_step(c(2.0, 0.0), 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(x.re, 6f64.sqrt());
        assert_eq!(x.im, 0.0);
        let x = slit_step(c(-2.0, 0.0), 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(x.re, -(6f64.sqrt()));
    }

    #[test]
    fn inverse_undoes_forward() {
        let step = Step { dt: 0.01, dv: 0.05 };
        for z in [c(0.3, 0.2), c(-1.0, 0.01), c(0.0, 3.0), c(5.0, 5.0)] {
            let w = slit_step(z, step.dv, step.dt, 0.75).unwrap();
            let back = inverse_slit_step(w, step, 0.75);
            assert!((back - z).norm() < 1e-13, "{z} -> {w} -> {back}");
        }
    }

    #[test]
    fn driving_path_validation() {
        assert!(DrivingPath::new(2.0, vec![0.0, 1.0], vec![0.0, 1.0]).is_ok());
        assert!(DrivingPath::new(2.0, vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(DrivingPath::new(2.0, vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
        assert!(DrivingPath::new(-1.0, vec![0.0], vec![0.0]).is_err());
        let p = DrivingPath::new(3.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.a() * p.kappa(), 2.0);
    }

    #[test]
    fn evolve_constant_driving_closed_form() {
        // g_t(z) = sqrt(z² + 2at), g_t'(z) = z / g_t(z).
        let a = 0.5;
        let kappa = 2.0 / a;
        let path = DrivingPath::constant(kappa, 0.01, 200).unwrap();
        let z = c(0.0, 2.0);
        let traj = evolve_point(&path, z).unwrap();
        assert_eq!(traj.samples.len(), 201);
        let s0 = traj.samples[0];
        assert_eq!(s0.upsilon, 2.0);
        assert_eq!(s0.s, 1.0);
        assert_eq!(s0.g_prime_abs, 1.0);
        for s in &traj.samples {
            let g = (z * z + 2.0 * a * s.t).sqrt();
            assert!((s.z - g).norm() < 1e-12);
            let gp = (z / g).norm();
            assert_relative_eq!(s.g_prime_abs, gp, max_relative = 1e-12);
            assert_relative_eq!(s.upsilon, g.im / gp, max_relative = 1e-12);
        }
    }

    #[test]
    fn swallow_time_of_point_above_slit() {
        // sqrt(z² + 2at) vanishes at t = Im(z)²/(2a) = 1 for z = i, a = 1/2.
        let path = DrivingPath::constant(4.0, 0.01, 150).unwrap();
        let traj = evolve_point(&path, c(0.0, 1.0)).unwrap();
        let t = traj.swallow_time.expect("swallowed");
        assert!((t - 1.0).abs() <= 0.01, "{t}");
        assert!(traj.samples.iter().all(|s| s.t < t));
    }

    #[test]
    fn upsilon_is_monotone() {
        let path = DrivingPath::from_fn(8.0 / 3.0, 1e-3, 2000, |t| (7.0 * t).sin()).unwrap();
        let traj = evolve_point(&path, c(0.2, 0.4)).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].upsilon <= w[0].upsilon * (1.0 + 1e-12));
        }
    }

    #[test]
    fn vertical_slit_trace() {
        let a = 0.5;
        let path = DrivingPath::constant(2.0 / a, 1e-3, 1000).unwrap();
        let tr = trace(&path);
        assert_eq!(tr.points[0], c(0.0, 0.0));
        for (k, p) in tr.points.iter().enumerate().skip(1) {
            let t = path.times()[k];
            let off = tip_offset(&path, k);
            assert!(p.re.abs() < 1e-12);
            assert!((p.im - (2.0 * a * t).sqrt()).abs() <= off, "t={t}: {p}");
        }
        assert!(tr.degenerate.is_empty());
    }

    #[test]
    fn escape_guard_stops_trajectory() {
        let path = DrivingPath::from_fn(2.0, 1.0, 10, |t| 1e10 * t).unwrap();
        let traj = evolve_point(&path, c(0.0, 1.0)).unwrap();
        assert!(traj.escaped);
        assert!(traj.samples.len() < 11);
    }
}
