//! Numerical checks of the structural identities at the level of
//! correlation functions: kernel boundary behaviour, Virasoro one-point
//! functions and their transport, OPE coefficients, Ward's OPE for the
//! bi-vertex, Virasoro mode actions on the rooted vertex, Ward's equation and
//! the BPZ-Cardy equation. Each check returns an [`IdentityReport`].

use crate::bcc::{hat_correlate, Insertion};
use crate::calculus::{
    central, circle_derivative, laurent_coefficient, relative_residual, wirtinger, Stencil,
};
use crate::correlators::{
    correlate, green_quadrant, green_strip, kernel_j_j, kernel_j_phi, vertex_series_check,
    CorrelationRequest, FieldBase, FieldSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{
    lie_coefficients, lie_minus, lie_plus, loewner_vector_field, map, pull_back, Chart,
    ConformalType,
};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Trapezoid nodes on contour circles.
pub const CONTOUR_NODES: usize = 64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    /// Evaluation points of each grid entry, as `[re, im]`.
    pub grid: Vec<Vec<[f64; 2]>>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Index of the worst grid entry.
    pub worst: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(
        name: impl Into<String>,
        tolerance: f64,
        entries: Vec<(Vec<C64>, f64)>,
    ) -> IdentityReport {
        let mut worst = 0;
        let mut max_residual: f64 = 0.0;
        for (i, (_, r)) in entries.iter().enumerate() {
            if !r.is_finite() || *r > max_residual {
                max_residual = if r.is_finite() { *r } else { f64::INFINITY };
                worst = i;
                if !r.is_finite() {
                    break;
                }
            }
        }
        let (grid, residuals) = entries
            .into_iter()
            .map(|(pts, r)| (pts.iter().map(|z| [z.re, z.im]).collect(), r))
            .unzip();
        IdentityReport {
            name: name.into(),
            grid,
            residuals,
            max_residual,
            worst,
            tolerance,
            pass: max_residual.is_finite() && max_residual < tolerance,
        }
    }

    /// Same residuals judged against another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> IdentityReport {
        self.tolerance = tolerance;
        self.pass = self.max_residual.is_finite() && self.max_residual < tolerance;
        self
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: max residual {:.3e} (tolerance {:.1e}, {} points)",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.max_residual,
            self.tolerance,
            self.residuals.len()
        )
    }
}

fn field(base: FieldBase) -> FieldSpec {
    FieldSpec::new(base)
}

fn strip_grid() -> Vec<C64> {
    let mut g = Vec::new();
    for &x in &[-3.0, -1.0, 0.0, 0.5, 2.0] {
        for &y in &[0.3, 1.1, 2.0, 2.9] {
            g.push(c(x, y));
        }
    }
    g
}

/// Boundary behaviour, symmetry and conformal invariance of the strip
/// kernels.
pub fn kernel_suite() -> Result<Vec<IdentityReport>> {
    let grid = strip_grid();
    let mut dirichlet = Vec::new();
    let mut neumann = Vec::new();
    let mut symmetry = Vec::new();
    let mut invariance = Vec::new();
    let mut current = Vec::new();
    let h = 1e-5;
    for &z in &grid {
        for &x in &[-2.5, -0.4, 0.0, 1.3] {
            dirichlet.push((vec![c(x, 0.0), z], green_strip(c(x, 0.0), z)?.abs()));
            let g = |y: f64| green_strip(c(x, y), z);
            // one-sided second order difference from inside the strip
            let dy = (3.0 * g(PI)? - 4.0 * g(PI - h)? + g(PI - 2.0 * h)?) / (2.0 * h);
            neumann.push((vec![c(x, PI), z], dy.abs()));
            let on_r = kernel_j_phi(c(x, 0.0), z)?;
            let on_top = kernel_j_phi(c(x, PI), z)?;
            current.push((vec![c(x, 0.0), z], on_r.re.abs() / on_r.norm().max(1.0)));
            current.push((vec![c(x, PI), z], on_top.im.abs() / on_top.norm().max(1.0)));
        }
        for &w in &grid {
            if (w - z).norm() < 1e-9 {
                continue;
            }
            let (a, b) = (green_strip(z, w)?, green_strip(w, z)?);
            symmetry.push((vec![z, w], (a - b).abs() / a.abs().max(1.0)));
            // the quadrant's map to the strip is 2 log
            let (zq, wq) = ((z * 0.5).exp(), (w * 0.5).exp());
            let q = green_quadrant(zq, wq)?;
            invariance.push((vec![z, w], (q - a).abs() / a.abs().max(1.0)));
        }
    }
    Ok(vec![
        IdentityReport::new("green_dirichlet_zero", f64::MIN_POSITIVE, dirichlet),
        IdentityReport::new("green_neumann_derivative", 1e-8, neumann),
        IdentityReport::new("green_symmetry", 1e-12, symmetry),
        IdentityReport::new("green_quadrant_strip_invariance", 1e-10, invariance),
        IdentityReport::new("current_boundary_phase", 1e-12, current),
    ])
}

/// `E T(z)` in `chart`.
pub fn virasoro_onepoint(z: C64, chart: Chart) -> Result<C64> {
    correlate(&CorrelationRequest {
        chart,
        fields: vec![(field(FieldBase::T), z)],
        insertion: None,
    })
}

fn half_plane_grid() -> Vec<C64> {
    let mut g = Vec::new();
    for &x in &[-2.0, -0.6, 0.0, 0.4, 1.5] {
        for &y in &[0.2, 0.7, 1.6] {
            g.push(c(x, y));
        }
    }
    g
}

/// `E T = 1/48` in the strip, `¼/(1-z²)²` in `(ℍ,-1,1)`, and transport
/// between charts as a Schwarzian form of order 1/12.
pub fn virasoro_transport_check() -> Result<IdentityReport> {
    let mut entries = Vec::new();
    for z in strip_grid() {
        entries.push((
            vec![z],
            (virasoro_onepoint(z, Chart::StripInf)? - 1.0 / 48.0).norm(),
        ));
    }
    let ty = ConformalType::Schwarzian {
        mu: c(1.0 / 12.0, 0.0),
    };
    for z in half_plane_grid() {
        let e_h = virasoro_onepoint(z, Chart::HalfPlanePm1)?;
        let one = c(1.0, 0.0);
        let closed = c(0.25, 0.0) / ((one - z * z) * (one - z * z));
        entries.push((vec![z], relative_residual(e_h, closed)));
        for other in [Chart::HalfPlane0Inf, Chart::Quadrant, Chart::StripInf] {
            let h = map(Chart::HalfPlanePm1, other, z)?;
            let moved = pull_back(virasoro_onepoint(h.value, other)?, ty, &h)?;
            entries.push((vec![z], relative_residual(moved, e_h)));
        }
    }
    Ok(IdentityReport::new(
        "virasoro_onepoint_transport",
        1e-10,
        entries,
    ))
}

/// Leading Laurent coefficient of `E[J(ζ)J(z)]`, which is `-1`.
pub fn jj_leading_check(radius: f64) -> Result<IdentityReport> {
    let mut entries = Vec::new();
    for z in strip_grid() {
        check_circle(z, radius, &[])?;
        let f = |zeta: C64| kernel_j_j(zeta, z).unwrap_or(c(f64::NAN, 0.0));
        let lead = laurent_coefficient(f, z, radius, CONTOUR_NODES, -2);
        entries.push((vec![z], (lead + 1.0).norm()));
    }
    Ok(IdentityReport::new("jj_leading_coefficient", 1e-6, entries))
}

/// `Σ αⁿ E[Φ^{*n}]/n!` from OPE coefficients against `E 𝒱^α`.
pub fn vertex_series_report(alpha: f64) -> Result<IdentityReport> {
    let mut entries = Vec::new();
    for z in strip_grid() {
        entries.push((vec![z], vertex_series_check(alpha, 24, z)?));
    }
    Ok(IdentityReport::new(
        format!("vertex_series_alpha_{alpha}"),
        1e-8,
        entries,
    ))
}

/// The circle `|ζ - z| = radius` must stay inside the strip and away from
/// the other points by a factor 4.
fn check_circle(z: C64, radius: f64, others: &[C64]) -> Result<()> {
    let collide = Error::ContourCollision { center: z, radius };
    if !(radius > 0.0) || z.im - radius <= 0.0 || z.im + radius >= PI {
        return Err(collide);
    }
    if others.iter().any(|o| (o - z).norm() <= 4.0 * radius) {
        return Err(collide);
    }
    Ok(())
}

/// Charge of the bi-vertex in Ward's OPE check.
pub const OPE_ALPHA: C64 = C64 { re: 0.7, im: 0.2 };
/// Probe point of the OPE check.
pub const OPE_PROBE: C64 = C64 { re: -0.7, im: 2.0 };

/// Ward's OPE `T(ζ)V^α(z,z₀) ∼ -(α²/2)V^α/(ζ-z)² + ∂V^α/(ζ-z)` against a
/// probe `Φ(z₁)`: the `-3`, `-2` and `-1` Laurent coefficients of
/// `E[T(ζ)V^α(z,z₀)Φ(z₁)]` around `z`.
pub fn ward_ope_bivertex_check(z: C64, z0: C64, radius: f64) -> Result<Vec<IdentityReport>> {
    let z1 = OPE_PROBE;
    if !(radius < (z - z0).norm() / 4.0) {
        return Err(Error::ContourCollision { center: z, radius });
    }
    check_circle(z, radius, &[z0, z1])?;
    let bv = field(FieldBase::BiVertex {
        alpha: OPE_ALPHA,
        root: z0,
    });
    let phi = field(FieldBase::Phi);
    let vphi = |w: C64| {
        correlate(&CorrelationRequest::strip(vec![(bv, w), (phi, z1)])).unwrap_or(c(f64::NAN, 0.0))
    };
    let tvphi = |zeta: C64| {
        correlate(&CorrelationRequest::strip(vec![
            (field(FieldBase::T), zeta),
            (bv, z),
            (phi, z1),
        ]))
        .unwrap_or(c(f64::NAN, 0.0))
    };
    let coef = |k: i32| laurent_coefficient(tvphi, z, radius, CONTOUR_NODES, k);
    let r = vphi(z);
    let dr_radius = ((z - z0).norm().min((z - z1).norm()) / 4.0)
        .min(z.im / 2.0)
        .min((PI - z.im) / 2.0);
    let dr = circle_derivative(vphi, z, 1, dr_radius, CONTOUR_NODES);
    let pts = vec![z, z0, z1];
    Ok(vec![
        IdentityReport::new(
            "ope_bivertex_order_-3",
            1e-8,
            vec![(pts.clone(), coef(-3).norm())],
        ),
        IdentityReport::new(
            "ope_bivertex_order_-2",
            1e-6,
            vec![(
                pts.clone(),
                relative_residual(coef(-2), -OPE_ALPHA * OPE_ALPHA * 0.5 * r),
            )],
        ),
        IdentityReport::new(
            "ope_bivertex_order_-1",
            1e-6,
            vec![(pts, relative_residual(coef(-1), dr))],
        ),
    ])
}

fn rooted(a: f64) -> FieldSpec {
    field(FieldBase::RootedVertex(c(0.0, a)))
}

/// Grid of `(z, z₁)` strip pairs for the mode checks.
pub const MODE_GRID: [(C64, C64); 4] = [
    (C64 { re: 0.3, im: 1.1 }, C64 { re: -0.7, im: 2.0 }),
    (C64 { re: -0.8, im: 2.0 }, C64 { re: 0.9, im: 2.6 }),
    (C64 { re: 1.2, im: 0.7 }, C64 { re: 0.2, im: 2.5 }),
    (C64 { re: -1.5, im: 1.5 }, C64 { re: -0.3, im: 0.6 }),
];

/// `Lₙ` acting on `V⋆^{ia}` with `a = 1/√2`, at correlation level against
/// `Φ(z₁)`: `L₁V = 0`, `L₀V = ¼V`, `L₋₁V = ∂V`, `L₋₂V = ∂²V`. The mode is
/// the Laurent coefficient of order `-n-2` of `E[T(ζ)V(z)Φ(z₁)]`.
pub fn mode_action_check(n: i32) -> Result<IdentityReport> {
    if !(-2..=1).contains(&n) {
        return Err(Error::Unsupported(format!("mode L_{n}")));
    }
    let a = FRAC_1_SQRT_2;
    let radius = 1e-2;
    let phi = field(FieldBase::Phi);
    let mut entries = Vec::new();
    for (z, z1) in MODE_GRID {
        check_circle(z, radius, &[z1])?;
        let r = |w: C64| {
            correlate(&CorrelationRequest::strip(vec![(rooted(a), w), (phi, z1)]))
                .unwrap_or(c(f64::NAN, 0.0))
        };
        let t = |zeta: C64| {
            correlate(&CorrelationRequest::strip(vec![
                (field(FieldBase::T), zeta),
                (rooted(a), z),
                (phi, z1),
            ]))
            .unwrap_or(c(f64::NAN, 0.0))
        };
        let mode = laurent_coefficient(t, z, radius, CONTOUR_NODES, -n - 2);
        let dr_radius = ((z - z1).norm() / 4.0)
            .min(z.im / 2.0)
            .min((PI - z.im) / 2.0);
        let residual = match n {
            1 => mode.norm(),
            0 => relative_residual(mode, r(z) * 0.25),
            _ => relative_residual(
                mode,
                circle_derivative(r, z, (-n) as u32, dr_radius, CONTOUR_NODES),
            ),
        };
        entries.push((vec![z, z1], residual));
    }
    let tol = match n {
        1 => 1e-7,
        -2 => 1e-5,
        _ => 1e-6,
    };
    Ok(IdentityReport::new(
        format!("mode_action_L{n}"),
        tol,
        entries,
    ))
}

/// How `z`-derivatives of holomorphic correlations are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeScheme {
    /// Cauchy integrals on a circle: exact up to rounding.
    Spectral,
    /// Second order central differences along the real direction.
    Central { h: f64 },
}

fn holo_derivative<F: Fn(C64) -> C64>(
    f: F,
    z: C64,
    order: u32,
    radius: f64,
    scheme: DerivativeScheme,
) -> C64 {
    match scheme {
        DerivativeScheme::Spectral => circle_derivative(f, z, order, radius, CONTOUR_NODES),
        DerivativeScheme::Central { h } => {
            central(|x| f(c(x, z.im)), z.re, h, order, Stencil::Three)
        }
    }
}

/// Distance in `(ℍ,-1,1)` from `z` to the branch cut of `z ↦ E[V⋆(z)Φ(z₁)]`,
/// the image of the strip ray `s(z₁) + ℝ₊`, which runs from `z₁` to `1`.
fn cut_clearance(z: C64, z1: C64) -> f64 {
    let one = c(1.0, 0.0);
    let s1 = ((one + z1) / (one - z1)).ln();
    let mut best = (z - z1).norm();
    for k in 0..=400 {
        let t = 1e-4 * (1e6f64).powf(k as f64 / 400.0);
        best = best.min((z - ((s1 + t) * 0.5).tanh()).norm());
    }
    best
}

/// Both sides of Ward's equation in the identity chart of `(ℍ,-1,1)`, for
/// `X = Φ(z₁)` and the rooted vertex `V⋆^{ia}(z)`.
pub fn ward_equation_sides(z: C64, z1: C64, scheme: DerivativeScheme) -> Result<(C64, C64)> {
    for p in [z, z1] {
        if (p - 1.0).norm() < 1e-6 || (p + 1.0).norm() < 1e-6 {
            return Err(Error::PoleAtMarkedPoint(p));
        }
        if !(p.im > 0.0) {
            return Err(Error::OutsideDomain(p));
        }
    }
    let a = FRAC_1_SQRT_2;
    let chart = Chart::HalfPlanePm1;
    let req = |fields: Vec<(FieldSpec, C64)>| CorrelationRequest {
        chart,
        fields,
        insertion: None,
    };
    let v = rooted(a);
    let r = |w: C64| correlate(&req(vec![(v, w), (field(FieldBase::Phi), z1)]));
    let r0 = r(z)?;
    let d_z1 = correlate(&req(vec![(v, z), (field(FieldBase::J), z1)]))?;
    let dbar_z1 = correlate(&req(vec![(v, z), (field(FieldBase::Jbar), z1)]))?;
    let ty = ConformalType::scalar();
    let lhs = lie_plus(&loewner_vector_field(z, z1)?, ty).apply(r0, d_z1, dbar_z1)
        + lie_minus(&loewner_vector_field(z.conj(), z1)?, ty).apply(r0, d_z1, dbar_z1);
    // stay clear of the probe, the branch cut, the boundary and the marked
    // points
    let radius = [
        cut_clearance(z, z1) / 2.0,
        z.im / 2.0,
        (z - 1.0).norm() / 4.0,
        (z + 1.0).norm() / 4.0,
    ]
    .into_iter()
    .fold(0.25, f64::min);
    let rr = |w: C64| r(w).unwrap_or(c(f64::NAN, 0.0));
    let d1 = holo_derivative(rr, z, 1, radius, scheme);
    let d2 = holo_derivative(rr, z, 2, radius, scheme);
    let one = c(1.0, 0.0);
    let q = one - z * z;
    let h = 0.25;
    let rhs = q * q * 0.5 * d2 - z * q * 1.5 * d1 + (z * z * 3.0 - 1.0) * 0.5 * h * r0 - r0 / 8.0;
    Ok((lhs, rhs))
}

/// 5×5 grid of `(z, z₁)` in `ℍ`.
pub fn ward_grid() -> Vec<(C64, C64)> {
    let zs = [
        c(0.2, 0.7),
        c(-0.5, 1.3),
        c(1.4, 0.6),
        c(-2.0, 2.5),
        c(0.0, 0.35),
    ];
    let z1s = [
        c(-0.4, 0.5),
        c(0.7, 1.8),
        c(2.5, 0.9),
        c(-1.6, 0.3),
        c(0.1, 3.0),
    ];
    zs.iter()
        .flat_map(|&z| z1s.iter().map(move |&z1| (z, z1)))
        .collect()
}

/// Ward's equation on a list of `(z, z₁)` pairs.
pub fn ward_equation_check_on(
    pairs: &[(C64, C64)],
    scheme: DerivativeScheme,
) -> Result<IdentityReport> {
    let mut entries = Vec::new();
    for &(z, z1) in pairs {
        let (lhs, rhs) = ward_equation_sides(z, z1, scheme)?;
        entries.push((vec![z, z1], relative_residual(lhs, rhs)));
    }
    Ok(IdentityReport::new("ward_equation", 1e-6, entries))
}

/// Ward's equation on [`ward_grid`].
pub fn ward_equation_check(scheme: DerivativeScheme) -> Result<IdentityReport> {
    ward_equation_check_on(&ward_grid(), scheme)
}

/// Ratio of the worst Ward residuals with central differences at `h` and
/// `h/2`; second order discretisation gives about 4.
pub fn ward_step_scaling(h: f64) -> Result<IdentityReport> {
    let coarse = ward_equation_check(DerivativeScheme::Central { h })?;
    let fine = ward_equation_check(DerivativeScheme::Central { h: h / 2.0 })?;
    let ratio = coarse.max_residual / fine.max_residual;
    Ok(step_ratio_report("ward_equation_step_scaling", ratio))
}

fn step_ratio_report(name: &str, ratio: f64) -> IdentityReport {
    // residual is the distance of the observed order from 2
    let order = ratio.log2();
    let mut r = IdentityReport::new(name, 0.33, vec![(vec![], (order - 2.0).abs())]);
    r.name = format!("{name} (ratio {ratio:.3})");
    r
}

/// Fields whose hat expectation enters the BPZ-Cardy check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BpzObservable {
    Phi,
    Current,
    Virasoro,
    Vertex(f64),
}

impl BpzObservable {
    pub fn field(&self) -> FieldSpec {
        field(match *self {
            BpzObservable::Phi => FieldBase::Phi,
            BpzObservable::Current => FieldBase::J,
            BpzObservable::Virasoro => FieldBase::T,
            BpzObservable::Vertex(alpha) => FieldBase::Vertex(c(alpha, 0.0)),
        })
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            BpzObservable::Virasoro => 1e-5,
            _ => 1e-6,
        }
    }

    pub fn name(&self) -> String {
        match self {
            BpzObservable::Phi => "phi".into(),
            BpzObservable::Current => "current".into(),
            BpzObservable::Virasoro => "virasoro".into(),
            BpzObservable::Vertex(a) => format!("vertex_{a}"),
        }
    }
}

/// `Ê_ξ[X(z)]` in the identity chart of `(ℍ,-1,1)`, the insertion sitting
/// at the strip image of `ξ`.
pub fn hat_in_half_plane(obs: BpzObservable, xi: f64, z: C64) -> Result<C64> {
    let one = c(1.0, 0.0);
    let p = ((one + xi) / (one - xi)).ln().re;
    hat_correlate(&CorrelationRequest {
        chart: Chart::HalfPlanePm1,
        fields: vec![(obs.field(), z)],
        insertion: Some(Insertion::at(p)),
    })
}

/// Finite difference rule for the `ξ` derivatives of the BPZ-Cardy check.
/// The default five point step balances truncation against the `ε/h²`
/// rounding of the second difference; `1e-4` is rounding dominated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiDifference {
    pub h: f64,
    pub stencil: Stencil,
}

impl Default for XiDifference {
    fn default() -> Self {
        XiDifference {
            h: 1e-3,
            stencil: Stencil::Five,
        }
    }
}

/// Both sides of BPZ-Cardy: `Ê_ξ[ℒ_{v_ξ}X]` and
/// `((1-ξ²)²/2 ∂²_ξ - ξ(1-ξ²)∂_ξ) Ê_ξ[X]`.
pub fn bpz_cardy_sides(
    obs: BpzObservable,
    xi: f64,
    z: C64,
    diff: XiDifference,
) -> Result<(C64, C64)> {
    if (xi - 1.0).abs() < 0.05 || (xi + 1.0).abs() < 0.05 || xi.abs() >= 1.0 {
        return Err(Error::NearMarkedPoint(xi));
    }
    let ty = obs.field().conformal_type().expect("underived field");
    let f = |w: C64| hat_in_half_plane(obs, xi, w).unwrap_or(c(f64::NAN, 0.0));
    let (dz, dzbar) = wirtinger(f, z, 1e-3, Stencil::Five);
    let v = loewner_vector_field(c(xi, 0.0), z)?;
    let lhs = lie_coefficients(&v, ty).apply(hat_in_half_plane(obs, xi, z)?, dz, dzbar);
    let g = |x: f64| hat_in_half_plane(obs, x, z).unwrap_or(c(f64::NAN, 0.0));
    let g1 = central(g, xi, diff.h, 1, diff.stencil);
    let g2 = central(g, xi, diff.h, 2, diff.stencil);
    let q = 1.0 - xi * xi;
    Ok((lhs, g2 * (q * q / 2.0) - g1 * (xi * q)))
}

/// Ten points of `ℍ` away from the marked points.
pub fn bpz_points() -> Vec<C64> {
    vec![
        c(0.0, 0.6),
        c(-0.2, 0.6),
        c(0.5, 0.3),
        c(-0.7, 1.2),
        c(1.8, 0.8),
        c(-2.5, 1.5),
        c(0.3, 2.0),
        c(-0.4, 0.25),
        c(1.1, 1.6),
        c(0.0, 3.5),
    ]
}

/// Ten driving positions in `(-1, 1)`.
pub fn bpz_xis() -> Vec<f64> {
    (0..10).map(|k| -0.85 + 0.17 * k as f64 + 0.013).collect()
}

pub fn bpz_cardy_check_on(
    obs: BpzObservable,
    xis: &[f64],
    zs: &[C64],
    diff: XiDifference,
) -> Result<IdentityReport> {
    let mut entries = Vec::new();
    for &xi in xis {
        for &z in zs {
            let (lhs, rhs) = bpz_cardy_sides(obs, xi, z, diff)?;
            entries.push((vec![c(xi, 0.0), z], relative_residual(lhs, rhs)));
        }
    }
    Ok(IdentityReport::new(
        format!("bpz_cardy_{}", obs.name()),
        obs.tolerance(),
        entries,
    ))
}

/// BPZ-Cardy at one `ξ` over [`bpz_points`].
pub fn bpz_cardy_check(obs: BpzObservable, xi: f64) -> Result<IdentityReport> {
    bpz_cardy_check_on(obs, &[xi], &bpz_points(), XiDifference::default())
}

/// Ratio of worst BPZ-Cardy residuals for three point differences at `h`
/// and `h/2`.
pub fn bpz_step_scaling(obs: BpzObservable, h: f64) -> Result<IdentityReport> {
    let (xis, zs) = (bpz_xis(), bpz_points());
    let coarse = bpz_cardy_check_on(
        obs,
        &xis,
        &zs,
        XiDifference {
            h,
            stencil: Stencil::Three,
        },
    )?;
    let fine = bpz_cardy_check_on(
        obs,
        &xis,
        &zs,
        XiDifference {
            h: h / 2.0,
            stencil: Stencil::Three,
        },
    )?;
    Ok(step_ratio_report(
        &format!("bpz_cardy_{}_step_scaling", obs.name()),
        coarse.max_residual / fine.max_residual,
    ))
}

/// Kernel, OPE and Virasoro checks.
pub fn ope_suite() -> Result<Vec<IdentityReport>> {
    Ok(vec![
        virasoro_transport_check()?,
        jj_leading_check(1e-4)?,
        vertex_series_report(0.3)?,
    ])
}

/// Ward's OPE, the mode actions, Ward's equation and BPZ-Cardy.
pub fn identity_suite() -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for (z, z0) in [(c(0.3, 1.1), c(-1.0, 0.5)), (c(-0.4, 2.2), c(1.2, 1.9))] {
        out.extend(ward_ope_bivertex_check(z, z0, 1e-2)?);
    }
    for n in [1, 0, -1, -2] {
        out.push(mode_action_check(n)?);
    }
    out.push(ward_equation_check(DerivativeScheme::Spectral)?);
    out.push(ward_step_scaling(1e-2)?);
    let (xis, zs) = (bpz_xis(), bpz_points());
    for obs in [
        BpzObservable::Phi,
        BpzObservable::Current,
        BpzObservable::Virasoro,
        BpzObservable::Vertex(0.5),
    ] {
        out.push(bpz_cardy_check_on(obs, &xis, &zs, XiDifference::default())?);
    }
    out.push(bpz_step_scaling(BpzObservable::Phi, 1e-2)?);
    out.push(bpz_step_scaling(BpzObservable::Virasoro, 1e-2)?);
    Ok(out)
}

/// Every identity check.
pub fn run_suite() -> Result<Vec<IdentityReport>> {
    let mut out = kernel_suite()?;
    out.extend(ope_suite()?);
    out.extend(identity_suite()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_bookkeeping() {
        let r = IdentityReport::new(
            "x",
            1e-3,
            vec![(vec![c(0.0, 1.0)], 1e-4), (vec![c(1.0, 1.0)], 2e-3)],
        );
        assert!(!r.pass);
        assert_eq!(r.worst, 1);
        assert_eq!(r.max_residual, 2e-3);
        let nan = IdentityReport::new("y", 1.0, vec![(vec![], f64::NAN)]);
        assert!(!nan.pass);
        assert!(r.with_tolerance(1e-2).pass);
    }

    #[test]
    fn strip_and_half_plane_one_point() {
        assert!(
            (virasoro_onepoint(c(0.4, 1.0), Chart::StripInf).unwrap() - 1.0 / 48.0).norm() < 1e-15
        );
        let z = c(0.3, 0.5);
        let one = c(1.0, 0.0);
        let want = c(0.25, 0.0) / ((one - z * z) * (one - z * z));
        assert!((virasoro_onepoint(z, Chart::HalfPlanePm1).unwrap() - want).norm() < 1e-12);
        assert!(virasoro_transport_check().unwrap().pass);
    }

    #[test]
    fn kernels_pass() {
        for r in kernel_suite().unwrap() {
            assert!(r.pass, "{}", r.summary());
        }
    }

    #[test]
    fn contour_collisions_are_reported() {
        let e = ward_ope_bivertex_check(c(0.3, 1.1), c(0.33, 1.1), 1e-2).unwrap_err();
        assert!(matches!(e, Error::ContourCollision { .. }));
        let e = ward_ope_bivertex_check(c(0.3, 0.005), c(-1.0, 0.5), 1e-2).unwrap_err();
        assert!(matches!(e, Error::ContourCollision { .. }));
    }

    #[test]
    fn ope_coefficients_do_not_depend_on_the_radius() {
        let (z, z0) = (c(0.3, 1.1), c(-1.0, 0.5));
        let bv = field(FieldBase::BiVertex {
            alpha: OPE_ALPHA,
            root: z0,
        });
        let f = |zeta: C64| {
            correlate(&CorrelationRequest::strip(vec![
                (field(FieldBase::T), zeta),
                (bv, z),
                (field(FieldBase::Phi), OPE_PROBE),
            ]))
            .unwrap()
        };
        let a = laurent_coefficient(f, z, 1e-2, CONTOUR_NODES, -2);
        let b = laurent_coefficient(f, z, 1e-3, CONTOUR_NODES, -2);
        assert!(relative_residual(a, b) < 1e-5);
    }

    #[test]
    fn mode_rejects_other_n() {
        assert!(mode_action_check(2).is_err());
    }

    #[test]
    fn ward_marked_point_probe() {
        assert!(matches!(
            ward_equation_sides(c(0.2, 0.7), c(1.0, 0.0), DerivativeScheme::Spectral),
            Err(Error::PoleAtMarkedPoint(_))
        ));
    }

    #[test]
    fn ward_reflected_probe() {
        // both residuals vanish, so they agree after reflecting the probe
        for (z, z1) in [(c(0.2, 0.7), c(-0.4, 0.5)), (c(-0.5, 1.3), c(0.7, 1.8))] {
            let (l1, r1) = ward_equation_sides(z, z1, DerivativeScheme::Spectral).unwrap();
            let (l2, r2) = ward_equation_sides(z, -z1.conj(), DerivativeScheme::Spectral).unwrap();
            let (a, b) = (relative_residual(l1, r1), relative_residual(l2, r2));
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn ward_with_degenerate_probes() {
        let pairs = [
            (c(0.2, 0.7), c(3.0, 0.01)),
            (c(-0.5, 1.3), c(0.0, 40.0)),
            (c(0.4, 0.9), c(-25.0, 5.0)),
        ];
        let r = ward_equation_check_on(&pairs, DerivativeScheme::Spectral).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn bpz_near_marked_point() {
        assert_eq!(
            bpz_cardy_sides(
                BpzObservable::Phi,
                0.97,
                c(0.0, 1.0),
                XiDifference::default()
            ),
            Err(Error::NearMarkedPoint(0.97))
        );
    }

    #[test]
    fn bpz_symmetric_configuration_is_real() {
        for y in [0.4, 1.0, 2.5] {
            let (l, r) =
                bpz_cardy_sides(BpzObservable::Phi, 0.0, c(0.0, y), XiDifference::default())
                    .unwrap();
            assert!(l.im.abs() < 1e-10 && r.im.abs() < 1e-10, "{l} {r}");
        }
    }

    #[test]
    fn single_xi_bpz() {
        let r = bpz_cardy_check(BpzObservable::Phi, 0.3).unwrap();
        assert!(r.pass, "{}", r.summary());
    }
}
