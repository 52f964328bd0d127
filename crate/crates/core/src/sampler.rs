//! Random driving functions: chordal SLE, two-sided radial SLE through an
//! interior point, and Brownian scaling.
//!
//! Brownian paths are built by the Lévy construction on top of a base grid of
//! spacing `dt`: base increments and bridge midpoints are addressed by their
//! position in the dyadic hierarchy, so a path can be refined locally to any
//! depth and the refined path always passes through the coarser samples.

use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::geometry::Rect;
use crate::loewner::{
    inverse_slit_step, tip_offset, trace_with, upper_sqrt, DrivingPath, PointState, Step, Trace, Zipper, ZipperOptions,
    ESCAPE_BOUND,
};
use crate::rng::{Stream, StreamKey};
use crate::Complex;

/// Depth of the finest dyadic subdivision of a base step.
pub const MAX_DEPTH: u32 = 40;
const FRAC_ONE: u64 = 1 << MAX_DEPTH;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub kappa: f64,
    /// Base capacity step.
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub replica: u64,
}

impl SamplerConfig {
    pub fn new(kappa: f64, dt: f64, t_max: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            kappa,
            dt,
            t_max,
            seed,
            replica: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 8.0) {
            return Err(param("kappa", format!("must lie in (0, 8), got {}", self.kappa)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(param(
                "t_max",
                format!("must be at least dt = {}, got {}", self.dt, self.t_max),
            ));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        2.0 / self.kappa
    }

    pub fn with_replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    /// Number of base steps; the last one may be shorter than `dt`.
    pub fn base_steps(&self) -> usize {
        let n = self.t_max / self.dt;
        let r = n.round();
        if (n - r).abs() <= 1e-9 * n {
            r as usize
        } else {
            n.ceil() as usize
        }
    }
}

/// Interior target of a two-sided radial run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialTarget {
    pub z: Complex,
    /// Stop once `Υ_t(z)` falls to this value.
    pub stop_upsilon: f64,
}

impl RadialTarget {
    pub fn new(z: Complex, stop_upsilon: f64) -> Result<Self> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!(
                "target must lie in the upper half-plane, got {z}"
            )));
        }
        if !(stop_upsilon > 0.0 && stop_upsilon < z.im) {
            return Err(param("stop_upsilon", format!("must lie in (0, Im z = {})", z.im)));
        }
        Ok(Self { z, stop_upsilon })
    }
}

/// Position on the dyadic time grid: base index plus a fraction of the base
/// step in units of `2^-MAX_DEPTH`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GridPos {
    pub k: u64,
    pub frac: u64,
}

impl GridPos {
    pub const ZERO: GridPos = GridPos { k: 0, frac: 0 };

    /// Coarsest depth at which this position is a grid point.
    pub fn depth(&self) -> u32 {
        if self.frac == 0 {
            0
        } else {
            MAX_DEPTH - self.frac.trailing_zeros()
        }
    }

    /// Position one step of the given depth later.
    pub fn advance(&self, depth: u32) -> GridPos {
        debug_assert!(depth >= self.depth() && depth <= MAX_DEPTH);
        let f = self.frac + (1u64 << (MAX_DEPTH - depth));
        if f == FRAC_ONE {
            GridPos { k: self.k + 1, frac: 0 }
        } else {
            GridPos { k: self.k, frac: f }
        }
    }
}

/// Standard Brownian motion sampled lazily on a dyadically refinable grid.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    key: StreamKey,
    dt: f64,
    t_max: f64,
    n: u64,
    base: Vec<f64>,
}

impl BrownianPath {
    pub fn new(cfg: &SamplerConfig) -> Self {
        Self {
            key: StreamKey::new(cfg.seed, cfg.replica, Stream::Driving),
            dt: cfg.dt,
            t_max: cfg.t_max,
            n: cfg.base_steps() as u64,
            base: vec![0.0],
        }
    }

    pub fn base_steps(&self) -> u64 {
        self.n
    }

    fn base_len(&self, k: u64) -> f64 {
        if k + 1 == self.n {
            self.t_max - k as f64 * self.dt
        } else {
            self.dt
        }
    }

    pub fn time(&self, p: GridPos) -> f64 {
        if p.k >= self.n {
            return self.t_max;
        }
        let t0 = p.k as f64 * self.dt;
        if p.frac == 0 {
            t0
        } else {
            t0 + p.frac as f64 / FRAC_ONE as f64 * self.base_len(p.k)
        }
    }

    pub fn is_end(&self, p: GridPos) -> bool {
        p.k >= self.n
    }

    fn base_value(&mut self, k: u64) -> f64 {
        while self.base.len() as u64 <= k {
            let i = self.base.len() as u64 - 1;
            let inc = self.base_len(i).sqrt() * self.key.normal(i, 0);
            let v = self.base[i as usize] + inc;
            self.base.push(v);
        }
        self.base[k as usize]
    }

    /// `W` at a grid position.
    pub fn value(&mut self, p: GridPos) -> f64 {
        let mut vl = self.base_value(p.k);
        if p.frac == 0 {
            return vl;
        }
        let mut vr = self.base_value(p.k + 1);
        let len = self.base_len(p.k);
        let (mut l, mut r) = (0u64, FRAC_ONE);
        let mut h = 1u64;
        loop {
            let mid = l + (r - l) / 2;
            let span = (r - l) as f64 / FRAC_ONE as f64 * len;
            let vm = 0.5 * (vl + vr) + 0.5 * span.sqrt() * self.key.normal(p.k, h);
            if p.frac == mid {
                return vm;
            }
            if p.frac < mid {
                r = mid;
                vr = vm;
                h *= 2;
            } else {
                l = mid;
                vl = vm;
                h = 2 * h + 1;
            }
        }
    }
}

/// Chordal SLE on the uniform base grid.
pub fn sample_chordal(cfg: &SamplerConfig) -> Result<(Arc<DrivingPath>, Trace)> {
    let driving = Arc::new(chordal_driving(cfg)?);
    let tr = trace_with(driving.clone(), ZipperOptions::default());
    Ok((driving, tr))
}

/// Driving function only (no trace).
pub fn chordal_driving(cfg: &SamplerConfig) -> Result<DrivingPath> {
    cfg.validate()?;
    let mut bm = BrownianPath::new(cfg);
    let n = bm.base_steps();
    let mut times = Vec::with_capacity(n as usize + 1);
    let mut values = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let p = GridPos { k, frac: 0 };
        times.push(bm.time(p));
        values.push(bm.value(p));
    }
    DrivingPath::new(cfg.kappa, times, values)
}

/// Spatially adaptive step control for trace sampling: a step is accepted
/// when the tip moves by at most `clamp(slope·dist(tip, focus), h_min, h_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Refinement {
    pub focus: Rect,
    pub slope: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Deepest dyadic subdivision of a base step.
    pub max_depth: u32,
    /// Give up after this many accepted steps.
    pub max_steps: usize,
}

impl Refinement {
    pub fn around(focus: Rect, h_min: f64) -> Self {
        Self {
            focus,
            slope: 0.2,
            h_min,
            h_max: f64::INFINITY,
            max_depth: 30,
            max_steps: 20_000_000,
        }
    }

    pub fn local_bound(&self, p: Complex) -> f64 {
        (self.slope * self.focus.distance(p)).clamp(self.h_min, self.h_max)
    }
}

/// Outcome of a refined run.
#[derive(Clone, Debug)]
pub struct RefinedSample {
    pub driving: Arc<DrivingPath>,
    pub trace: Trace,
    /// Steps accepted at the depth cap regardless of their displacement.
    pub forced: usize,
    /// Set when the stop callback ended the run before `t_max`.
    pub stopped: bool,
    /// The trace as one or more polylines. Inside a forced step extra points
    /// are taken on the image of that step's elementary slit; when the slit is
    /// attached to the hull far from the previous tip (deep in a fjord) a new
    /// piece starts there.
    pub curve: Vec<Vec<Complex>>,
}

impl RefinedSample {
    pub fn pieces(&self) -> Vec<&[Complex]> {
        self.curve.iter().map(|p| p.as_slice()).collect()
    }
}

/// Chordal SLE with Brownian-bridge refinement wherever the tip is close to
/// `refine.focus`. `stop(t, tip)` may end the run early.
pub fn sample_refined(
    cfg: &SamplerConfig,
    refine: &Refinement,
    mut stop: impl FnMut(f64, Complex) -> bool,
) -> Result<RefinedSample> {
    cfg.validate()?;
    if !(refine.h_min > 0.0 && refine.h_max >= refine.h_min && refine.slope > 0.0) {
        return Err(param("refine", "need 0 < h_min <= h_max and slope > 0"));
    }
    let a = cfg.a();
    let mut bm = BrownianPath::new(cfg);
    let mut zip = Zipper::new(a, ZipperOptions::default());
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut points = vec![Complex::new(0.0, 0.0)];
    let mut curve = Vec::new();
    let mut piece = points.clone();
    let mut degenerate = Vec::new();
    let mut pos = GridPos::ZERO;
    let mut depth = 0u32;
    let (mut t, mut v, mut tip) = (0.0, 0.0, Complex::new(0.0, 0.0));
    let mut forced = 0;
    let mut stopped = false;
    while !bm.is_end(pos) {
        if zip.len() >= refine.max_steps {
            return Err(param("refine", format!("more than {} steps needed", refine.max_steps)));
        }
        depth = depth.max(pos.depth());
        let bound_here = refine.local_bound(tip);
        let (next, step, cand, disp, forced_here) = loop {
            let next = pos.advance(depth);
            let (tn, vn) = (bm.time(next), bm.value(next));
            let step = Step { dt: tn - t, dv: vn - v };
            let w = inverse_slit_step(Complex::new(0.0, step.dt.sqrt() / 10.0), step, a);
            let cand = zip.pull_back(w, zip.len());
            let disp = (cand - tip).norm();
            let bound = bound_here.min(refine.local_bound(cand));
            if disp <= bound {
                break (next, step, cand, disp / bound, false);
            }
            if depth >= refine.max_depth {
                forced += 1;
                break (next, step, cand, 1.0, true);
            }
            depth += 1;
        };
        if forced_here {
            let top = (2.0 * a * step.dt).sqrt();
            let at = |y: f64| zip.pull_back(Complex::new(step.dv, y), zip.len());
            let base = (top * 1e-9, at(top * 1e-9));
            if (base.1 - tip).norm() > refine.local_bound(tip).min(refine.local_bound(base.1)) {
                curve.push(std::mem::take(&mut piece));
            }
            piece.push(base.1);
            fill_slit(&at, refine, base, (top, cand), 0, &mut piece);
        }
        zip.push(step);
        t = bm.time(next);
        v = bm.value(next);
        times.push(t);
        values.push(v);
        tip = cand;
        if !(tip.im > 0.0) {
            tip.im = 0.0;
            degenerate.push(points.len());
        }
        points.push(tip);
        piece.push(tip);
        pos = next;
        if disp < 0.5 && depth > 0 && pos.depth() < depth {
            depth -= 1;
        }
        if stop(t, tip) {
            stopped = true;
            break;
        }
    }
    curve.push(piece);
    let driving = Arc::new(DrivingPath::new(cfg.kappa, times, values)?);
    Ok(RefinedSample {
        trace: Trace {
            driving: driving.clone(),
            points,
            degenerate,
        },
        driving,
        forced,
        stopped,
        curve,
    })
}

/// Bisects the slit height until consecutive curve points obey the local
/// bound, pushing the interior points in order.
fn fill_slit(
    at: &impl Fn(f64) -> Complex,
    refine: &Refinement,
    lo: (f64, Complex),
    hi: (f64, Complex),
    depth: u32,
    out: &mut Vec<Complex>,
) {
    let bound = refine.local_bound(lo.1).min(refine.local_bound(hi.1));
    if (hi.1 - lo.1).norm() <= bound || depth >= 60 {
        return;
    }
    let y = 0.5 * (lo.0 + hi.0);
    let mid = (y, at(y));
    fill_slit(at, refine, lo, mid, depth + 1, out);
    out.push(mid.1);
    fill_slit(at, refine, mid, hi, depth + 1, out);
}

/// Drift of the two-sided radial driving in the Brownian sign convention:
/// `(1 − 4a)·Re Z / |Z|²`.
pub fn two_sided_drift(z: Complex, a: f64) -> f64 {
    (1.0 - 4.0 * a) * z.re / z.norm_sqr()
}

/// Options for the point-adaptive flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    /// Steps are at most `eta·|Z|²`.
    pub eta: f64,
    /// When `Υ < 2·floor`, steps are further capped at `dt·(Υ/(2·floor))²`.
    pub upsilon_floor: Option<f64>,
    pub max_depth: u32,
    /// Keep the step history (needed for tips and for building a trace).
    pub record: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            upsilon_floor: None,
            max_depth: MAX_DEPTH,
            record: true,
        }
    }
}

/// What ended a step of [`PointFlow`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowEvent {
    Advanced,
    Swallowed,
    Escaped,
    End,
}

/// Forward flow of one interior point under a driving function that is
/// generated on the fly, with steps refined as the point nears the curve.
///
/// Plain mode samples chordal SLE. With `two_sided`, the driving follows the
/// two-sided radial SDE `dV = −(1 − 4a)X/|Z|² dt + dW` (Euler–Maruyama).
#[derive(Clone, Debug)]
pub struct PointFlow {
    kappa: f64,
    a: f64,
    dt: f64,
    bm: BrownianPath,
    pos: GridPos,
    w: f64,
    pub t: f64,
    pub v: f64,
    pub state: PointState,
    two_sided: bool,
    opts: FlowOptions,
    times: Vec<f64>,
    values: Vec<f64>,
    steps: usize,
}

impl PointFlow {
    pub fn new(cfg: &SamplerConfig, z: Complex, two_sided: bool, opts: FlowOptions) -> Result<Self> {
        cfg.validate()?;
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!(
                "tracked point must lie in the upper half-plane, got {z}"
            )));
        }
        Ok(Self {
            kappa: cfg.kappa,
            a: cfg.a(),
            dt: cfg.dt,
            bm: BrownianPath::new(cfg),
            pos: GridPos::ZERO,
            w: 0.0,
            t: 0.0,
            v: 0.0,
            state: PointState::new(z),
            two_sided,
            opts,
            times: vec![0.0],
            values: vec![0.0],
            steps: 0,
        })
    }

    /// True when the current time is a base-grid point.
    pub fn on_base_grid(&self) -> bool {
        self.pos.frac == 0
    }

    pub fn base_index(&self) -> u64 {
        self.pos.k
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn depth_for(&self, h: f64) -> u32 {
        let len = self.bm.time(GridPos {
            k: self.pos.k + 1,
            frac: 0,
        }) - self.bm.time(GridPos { k: self.pos.k, frac: 0 });
        let mut d = self.pos.depth();
        let mut size = len / (1u64 << d) as f64;
        while size > h && d < self.opts.max_depth {
            d += 1;
            size *= 0.5;
        }
        d
    }

    pub fn step(&mut self) -> Result<FlowEvent> {
        if self.bm.is_end(self.pos) {
            return Ok(FlowEvent::End);
        }
        let z = self.state.z;
        let mut h = self.dt.min(self.opts.eta * z.norm_sqr());
        if let Some(floor) = self.opts.upsilon_floor {
            let u = self.state.upsilon();
            if u < 2.0 * floor {
                h = h.min(self.dt * (u / (2.0 * floor)).powi(2));
            }
        }
        let depth = self.depth_for(h);
        let next = self.pos.advance(depth);
        let tn = self.bm.time(next);
        let wn = self.bm.value(next);
        let dt = tn - self.t;
        let mut dv = wn - self.w;
        if self.two_sided {
            dv -= two_sided_drift(z, self.a) * dt;
        }
        let step = Step { dt, dv };
        self.pos = next;
        self.w = wn;
        self.t = tn;
        self.v += dv;
        self.steps += 1;
        if self.opts.record {
            self.times.push(tn);
            self.values.push(self.v);
        }
        match self.state.advance(step, self.a) {
            Ok(()) => {}
            Err(Error::Swallowed) => return Ok(FlowEvent::Swallowed),
            Err(e) => return Err(e),
        }
        if self.state.z.norm() > ESCAPE_BOUND {
            return Ok(FlowEvent::Escaped);
        }
        Ok(FlowEvent::Advanced)
    }

    /// Current tip `γ(t)` by direct backward composition of the recorded
    /// steps. Costs one square root per step.
    pub fn tip(&self) -> Complex {
        assert!(self.opts.record, "tip needs the recorded step history");
        let n = self.times.len() - 1;
        if n == 0 {
            return Complex::new(0.0, 0.0);
        }
        let mut w = Complex::new(0.0, (self.times[n] - self.times[n - 1]).sqrt() / 10.0);
        for k in (0..n).rev() {
            let step = Step {
                dt: self.times[k + 1] - self.times[k],
                dv: self.values[k + 1] - self.values[k],
            };
            w = upper_sqrt(w * w - 2.0 * self.a * step.dt, w.re) + step.dv;
        }
        w
    }

    /// The recorded driving function.
    pub fn driving(&self) -> Result<DrivingPath> {
        assert!(self.opts.record, "driving needs the recorded step history");
        DrivingPath::new(self.kappa, self.times.clone(), self.values.clone())
    }
}

/// Two-sided radial SLE through `target.z`, run until `Υ_t(z) <=
/// target.stop_upsilon` or `t_max`.
#[derive(Clone, Debug)]
pub struct TwoSidedSample {
    pub driving: Arc<DrivingPath>,
    pub trace: Trace,
    pub final_upsilon: f64,
    /// False when `t_max` was reached first.
    pub reached: bool,
}

pub fn sample_two_sided(cfg: &SamplerConfig, target: &RadialTarget) -> Result<TwoSidedSample> {
    let (flow, reached) = run_two_sided(cfg, target, true)?;
    let driving = Arc::new(flow.driving()?);
    let trace = trace_with(driving.clone(), ZipperOptions::default());
    Ok(TwoSidedSample {
        driving,
        trace,
        final_upsilon: flow.state.upsilon(),
        reached,
    })
}

/// Drive the two-sided flow without building a trace. Returns the flow and
/// whether the stopping level was reached.
pub fn run_two_sided(cfg: &SamplerConfig, target: &RadialTarget, record: bool) -> Result<(PointFlow, bool)> {
    let opts = FlowOptions {
        upsilon_floor: Some(target.stop_upsilon),
        record,
        ..FlowOptions::default()
    };
    let mut flow = PointFlow::new(cfg, target.z, true, opts)?;
    loop {
        if flow.state.upsilon() <= target.stop_upsilon {
            return Ok((flow, true));
        }
        match flow.step()? {
            FlowEvent::Advanced => {}
            FlowEvent::End | FlowEvent::Escaped => return Ok((flow, false)),
            FlowEvent::Swallowed => {
                return Err(Error::TargetSwallowedEarly {
                    stop_upsilon: target.stop_upsilon,
                })
            }
        }
    }
}

/// Brownian scaling `t ↦ t/r²`, `V ↦ V/r`, `γ ↦ γ/r`.
pub fn rescale(driving: &DrivingPath, trace: &Trace, r: f64) -> Result<(Arc<DrivingPath>, Trace)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param("r", format!("must be positive, got {r}")));
    }
    let r2 = r * r;
    let times = driving.times().iter().map(|t| t / r2).collect();
    let values = driving.values().iter().map(|v| v / r).collect();
    let d = Arc::new(DrivingPath::new(driving.kappa(), times, values)?);
    let points = trace.points.iter().map(|p| p / r).collect();
    Ok((
        d.clone(),
        Trace {
            driving: d,
            points,
            degenerate: trace.degenerate.clone(),
        },
    ))
}

/// Tip of `driving` at grid index `k` by direct backward composition.
pub fn tip_direct(driving: &DrivingPath, k: usize) -> Complex {
    if k == 0 {
        return Complex::new(driving.values()[0], 0.0);
    }
    let a = driving.a();
    let mut w = Complex::new(0.0, tip_offset(driving, k));
    for j in (0..k).rev() {
        w = inverse_slit_step(w, driving.step(j), a);
    }
    w + driving.values()[0]
}
