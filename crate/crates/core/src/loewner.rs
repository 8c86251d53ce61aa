//! Dipolar Loewner flow in the strip, `∂_t g_t = coth((g_t - ξ_t)/2)`, with
//! piecewise constant driving. Over a step with frozen driving the flow is
//! solved exactly by `cosh(w_{t+δ}/2) = e^{δ/2} cosh(w_t/2)`, so the only
//! discretisation error is the driving function's.

use crate::error::{Error, Result};
use crate::geometry::MARKED_EPS;
use crate::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Images closer than this to the real line count as swallowed.
pub const SWALLOW_EPS: f64 = 1e-12;
/// Points closer than this to the driving point count as swallowed.
pub const TIP_GUARD: f64 = 1e-6;
/// Default half-width of the band of `Re w_T` classified as undecided.
pub const UNDECIDED_EPS: f64 = 1e-3;
// beyond this |Re w| the step is a pure translation to machine precision
const FAR: f64 = 600.0;

/// Gaussian increments `√κ ΔB`, one per step, drawn from a ChaCha stream
/// keyed on `(seed, path)`; step `k` always gets the `k`-th draw.
#[derive(Debug, Clone)]
pub struct BrownianDriver {
    rng: ChaCha8Rng,
    scale: f64,
}

impl BrownianDriver {
    pub fn new(kappa: f64, dt: f64, seed: u64, path: u64) -> BrownianDriver {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        BrownianDriver {
            rng,
            scale: (kappa * dt).sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let g: f64 = StandardNormal.sample(&mut self.rng);
        self.scale * g
    }
}

/// A realised driving function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    pub kappa: f64,
    pub dt: f64,
    pub increments: Vec<f64>,
    pub seed: u64,
}

impl DrivingPath {
    pub fn brownian(
        kappa: f64,
        dt: f64,
        n_steps: usize,
        seed: u64,
        path: u64,
    ) -> Result<DrivingPath> {
        check_step(dt)?;
        if !(kappa >= 0.0) {
            return Err(Error::InvalidConfig(format!("kappa = {kappa}")));
        }
        let mut drv = BrownianDriver::new(kappa, dt, seed, path);
        let increments = (0..n_steps).map(|_| drv.next_increment()).collect();
        Ok(DrivingPath {
            kappa,
            dt,
            increments,
            seed,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.increments.len() as f64
    }
}

fn check_step(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::BadStep(delta));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Left,
    Right,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PointStatus {
    Alive,
    Swallowed { time: f64, side: Side },
}

/// A point followed by the flow: `w = w_t(z₀) = g_t(z₀) - ξ_t` and
/// `(w′, w″, w‴)`. Swallowed points keep their last values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub z0: C64,
    pub w: C64,
    pub jet: [C64; 3],
    pub status: PointStatus,
}

impl TrackedPoint {
    pub fn is_alive(&self) -> bool {
        self.status == PointStatus::Alive
    }

    fn on_dirichlet(&self) -> bool {
        self.z0.im == 0.0
    }

    fn on_neumann(&self) -> bool {
        self.z0.im == PI
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerState {
    pub t: f64,
    pub xi: f64,
    pub points: Vec<TrackedPoint>,
    pending: Vec<Option<(C64, [C64; 3])>>,
}

/// Branch of `acosh` whose double lands in the closed strip, continuous
/// with the sign of `Re w` on the real line.
fn strip_acosh(c: C64, re_sign: f64) -> C64 {
    let u = c.acosh();
    if u.im < 0.0 || (u.im == 0.0 && re_sign < 0.0) {
        -u
    } else {
        u
    }
}

/// One exact step map `φ(w) = 2 acosh(e^{δ/2} cosh(w/2))` with its first
/// three derivatives.
fn step_map(w: C64, e: f64, delta: f64) -> (C64, [C64; 3]) {
    if w.re.abs() > FAR {
        let s = if w.re > 0.0 { delta } else { -delta };
        return (
            w + s,
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        );
    }
    let h = w * 0.5;
    let c = h.cosh() * e;
    let u = strip_acosh(c, w.re);
    let s = u.sinh();
    let c1 = h.sinh() * (e / 2.0);
    let c2 = c * 0.25;
    let c3 = c1 * 0.25;
    let s2 = s * s;
    let s3 = s2 * s;
    let u1 = c1 / s;
    let u2 = c2 / s - c1 * c1 * c / s3;
    let c1_3 = c1 * c1 * c1;
    let u3 = c3 / s - c * c1 * c2 * 3.0 / s3 - c1_3 / s3 + c * c * c1_3 * 3.0 / (s3 * s2);
    (u * 2.0, [u1 * 2.0, u2 * 2.0, u3 * 2.0])
}

impl LoewnerState {
    pub fn new(points: &[C64]) -> Result<LoewnerState> {
        let mut tracked = Vec::with_capacity(points.len());
        for &z in points {
            let z = C64::new(z.re, z.im + 0.0);
            if !crate::geometry::Chart::StripInf.contains(z) {
                return Err(Error::OutsideDomain(z));
            }
            if z.norm() < MARKED_EPS {
                return Err(Error::PoleAtDriving(z));
            }
            let z = C64::new(z.re, z.im.clamp(0.0, PI));
            tracked.push(TrackedPoint {
                z0: z,
                w: z,
                jet: [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                status: PointStatus::Alive,
            });
        }
        Ok(LoewnerState {
            t: 0.0,
            xi: 0.0,
            pending: vec![None; tracked.len()],
            points: tracked,
        })
    }

    pub fn step(&mut self, dxi: f64, delta: f64) -> Result<()> {
        self.step_with(dxi, delta, |_, _| {})
    }

    /// Advance by `δ` with the driving frozen, then jump it by `Δξ`. Before
    /// committing, `on_swallow` sees the pre-step state and the indices of
    /// points swallowed during this step.
    pub fn step_with<F>(&mut self, dxi: f64, delta: f64, mut on_swallow: F) -> Result<()>
    where
        F: FnMut(&LoewnerState, &[usize]),
    {
        check_step(delta)?;
        let e = (delta / 2.0).exp();
        let mut swallowed = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            self.pending[i] = None;
            if !p.is_alive() {
                continue;
            }
            let (mut w, d) = step_map(p.w, e, delta);
            let interior = !p.on_dirichlet();
            if (interior && w.im <= 2.0 * SWALLOW_EPS) || p.w.norm() < TIP_GUARD || !w.is_finite() {
                swallowed.push(i);
                continue;
            }
            w -= dxi;
            if p.on_dirichlet() {
                w.im = 0.0;
            } else if p.on_neumann() {
                w.im = PI;
            }
            let [j1, j2, j3] = p.jet;
            let jet = [
                d[0] * j1,
                d[1] * j1 * j1 + d[0] * j2,
                d[2] * j1 * j1 * j1 + d[1] * j1 * j2 * 3.0 + d[0] * j3,
            ];
            self.pending[i] = Some((w, jet));
        }
        if !swallowed.is_empty() {
            on_swallow(self, &swallowed);
        }
        let t_new = self.t + delta;
        for (i, p) in self.points.iter_mut().enumerate() {
            if !p.is_alive() {
                continue;
            }
            match self.pending[i] {
                Some((w, jet)) => {
                    p.w = w;
                    p.jet = jet;
                }
                None => {
                    let side = if p.w.re < 0.0 {
                        Side::Left
                    } else {
                        Side::Right
                    };
                    p.status = PointStatus::Swallowed { time: t_new, side };
                }
            }
        }
        self.t = t_new;
        self.xi += dxi;
        Ok(())
    }

    /// Run a whole driving path.
    pub fn run(&mut self, driving: &DrivingPath) -> Result<()> {
        for &dxi in &driving.increments {
            self.step(dxi, driving.dt)?;
        }
        Ok(())
    }
}

/// Side of the curve a point ends up on.
pub fn classify_side(point: &TrackedPoint, eps_undecided: f64) -> Classification {
    match point.status {
        PointStatus::Swallowed {
            side: Side::Left, ..
        } => Classification::Left,
        PointStatus::Swallowed {
            side: Side::Right, ..
        } => Classification::Right,
        PointStatus::Alive => {
            if point.w.re < -eps_undecided {
                Classification::Left
            } else if point.w.re > eps_undecided {
                Classification::Right
            } else {
                Classification::Undecided
            }
        }
    }
}

/// Tips `γ_t` of the trace at a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub times: Vec<f64>,
    pub tips: Vec<C64>,
}

fn inverse_step(v: C64, e_inv: f64) -> C64 {
    let c = (v * 0.5).cosh() * e_inv;
    strip_acosh(c, v.re) * 2.0
}

fn in_closed_strip(z: C64) -> bool {
    z.is_finite() && z.im >= -1e-9 && z.im <= PI + 1e-9
}

fn tip_at(driving: &DrivingPath, k: usize, substeps: u32) -> C64 {
    let delta = driving.dt / substeps as f64;
    let e_inv = (-delta / 2.0).exp();
    // slit tip created during step k, in the coordinates before that step
    let mut tau = C64::new(0.0, 2.0 * e_inv.acos());
    for _ in 1..substeps {
        tau = inverse_step(tau, e_inv);
    }
    for j in (0..k - 1).rev() {
        tau += driving.increments[j];
        for _ in 0..substeps {
            tau = inverse_step(tau, e_inv);
        }
    }
    tau
}

/// Trace `γ_t = lim_{z→0} w_t^{-1}(z)` at every `every`-th step up to `T`,
/// by pulling the newest slit tip back through all earlier step maps.
pub fn trace_curve(driving: &DrivingPath, horizon: f64, every: usize) -> Result<CurveSample> {
    check_step(driving.dt)?;
    let n = (horizon / driving.dt).round() as usize;
    if n > driving.increments.len() {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} beyond the driving path's {}",
            driving.horizon()
        )));
    }
    let every = every.max(1);
    let mut times = vec![0.0];
    let mut tips = vec![C64::new(0.0, 0.0)];
    for k in (every..=n).step_by(every) {
        let mut tip = tip_at(driving, k, 1);
        if !in_closed_strip(tip) {
            tip = tip_at(driving, k, 2);
            if !in_closed_strip(tip) {
                return Err(Error::TraceInstability(k));
            }
        }
        times.push(k as f64 * driving.dt);
        tips.push(tip);
    }
    Ok(CurveSample { times, tips })
}
