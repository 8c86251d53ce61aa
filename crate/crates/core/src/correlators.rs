//! Gaussian free field in the strip with Dirichlet data on `ℝ` and Neumann
//! data on `ℝ + πi`: Green's functions, two-point kernels of `Φ`, `J` and the
//! chiral boson `Φ⁺`, and a Wick engine for correlations of derivative and
//! vertex fields.
//!
//! All kernels are written in the strip chart `(S, -∞, ∞)`. Other charts are
//! reached through [`crate::geometry`] jets.

use crate::bcc::Insertion;
use crate::error::{Error, Result};
use crate::geometry::{Chart, ConformalType, Jet, MARKED_EPS};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

const COINCIDENT_EPS: f64 = 1e-12;
const CUT_EPS: f64 = 1e-12;
/// Largest `∂` or `∂̄` order accepted on a field.
pub const MAX_DERIV: u8 = 3;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Strip points are stored with `+0.0` imaginary parts on the Dirichlet
/// line so that conjugation produces the `-0.0` side.
pub(crate) fn normalize(z: C64) -> C64 {
    C64::new(z.re, z.im + 0.0)
}

fn check_strip(z: C64) -> Result<C64> {
    if !Chart::StripInf.contains(z) {
        return Err(Error::OutsideDomain(z));
    }
    Ok(normalize(z))
}

fn check_apart(a: C64, b: C64) -> Result<()> {
    if (a - b).norm() < COINCIDENT_EPS {
        return Err(Error::DiagonalSingularity(a, b));
    }
    Ok(())
}

/// Polynomials `P_k` with `(d/dx)^k csch x = csch x · P_k(coth x)`,
/// coefficients from the constant term up.
fn csch_polys(max: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for k in 0..max {
        let p = &out[k];
        let mut next = vec![0.0; p.len() + 1];
        // -c P(c)
        for (i, &a) in p.iter().enumerate() {
            next[i + 1] -= a;
        }
        // (1 - c²) P'(c)
        for (i, &a) in p.iter().enumerate().skip(1) {
            let d = a * i as f64;
            next[i - 1] += d;
            next[i + 1] -= d;
        }
        out.push(next);
    }
    out
}

fn horner(p: &[f64], x: C64) -> C64 {
    p.iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * x + a)
}

/// `L(u) = Log tanh(u/4)` on the principal branch.
pub(crate) fn log_tanh(u: C64) -> C64 {
    (u * 0.25).tanh().ln()
}

/// `n`-th derivative of `L(u) = log tanh(u/4)`; `n = 0` gives the principal
/// value.
pub(crate) fn log_tanh_deriv(n: usize, u: C64) -> Result<C64> {
    if n == 0 {
        return Ok(log_tanh(u));
    }
    let x = u * 0.5;
    let s = x.sinh();
    if s.norm() < MARKED_EPS {
        return Err(Error::DiagonalSingularity(u, c(0.0, 0.0)));
    }
    let polys = csch_polys(n - 1);
    let coth = x.cosh() / s;
    Ok(horner(&polys[n - 1], coth) / s * 0.5f64.powi(n as i32))
}

/// `G(ζ,z) = log|tanh((ζ-z̄)/4)| - log|tanh((ζ-z)/4)|`.
pub fn green_strip(zeta: C64, z: C64) -> Result<f64> {
    let (zeta, z) = (check_strip(zeta)?, check_strip(z)?);
    check_apart(zeta, z)?;
    let a = ((zeta - z.conj()) * 0.25).tanh().norm();
    let b = ((zeta - z) * 0.25).tanh().norm();
    Ok(a.ln() - b.ln())
}

/// Green's function of the first quadrant, Dirichlet on `ℝ₊`, Neumann on
/// `iℝ₊`.
pub fn green_quadrant(zeta: C64, z: C64) -> Result<f64> {
    for p in [zeta, z] {
        if !Chart::Quadrant.contains(p) {
            return Err(Error::OutsideDomain(p));
        }
    }
    check_apart(zeta, z)?;
    let num = (zeta - z.conj()) * (zeta + z);
    let den = (zeta - z) * (zeta + z.conj());
    Ok((num / den).norm().ln())
}

/// `E[J(ζ)Φ(z)]` in the strip.
pub fn kernel_j_phi(zeta: C64, z: C64) -> Result<C64> {
    phi_phi(zeta, (1, 0), z, (0, 0))
}

/// `E[J(ζ)J(z)] = -1/(4 sinh((ζ-z)/2) tanh((ζ-z)/2))`.
pub fn kernel_j_j(zeta: C64, z: C64) -> Result<C64> {
    phi_phi(zeta, (1, 0), z, (1, 0))
}

/// Covariance of `∂^j∂̄^kΦ(ζ)` and `∂^m∂̄^nΦ(z)`. The four terms come from
/// `2G = L(ζ-z̄) + L(ζ̄-z) - L(ζ-z) - L(ζ̄-z̄)` taken modulo branches, with
/// `L = log tanh(·/4)`.
pub fn phi_phi(zeta: C64, (j, k): (u8, u8), z: C64, (m, n): (u8, u8)) -> Result<C64> {
    let (zeta, z) = (check_strip(zeta)?, check_strip(z)?);
    check_apart(zeta, z)?;
    if j + k + m + n == 0 {
        return Ok(c(2.0 * green_strip(zeta, z)?, 0.0));
    }
    let sign = |p: u8| if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    let (j, k, m, n) = (j as usize, k as usize, m as usize, n as usize);
    let mut acc = c(0.0, 0.0);
    if k == 0 && m == 0 {
        acc += log_tanh_deriv(j + n, zeta - z.conj())? * sign(n as u8);
    }
    if j == 0 && n == 0 {
        acc += log_tanh_deriv(k + m, zeta.conj() - z)? * sign(m as u8);
    }
    if k == 0 && n == 0 {
        acc -= log_tanh_deriv(j + m, zeta - z)? * sign(m as u8);
    }
    if j == 0 && m == 0 {
        acc -= log_tanh_deriv(k + n, zeta.conj() - z.conj())? * sign(n as u8);
    }
    Ok(acc)
}

/// Root of a chiral boson `Φ⁺(z, z₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Root {
    /// The marked boundary point `q₋ = -∞` of the strip.
    MinusInfinity,
    Point(C64),
}

/// Raise if `z₁` sits on the cut `z + ℝ₋` of `L(z₁ - z)`. Two points on the
/// Dirichlet line are resolved by the signed zero of their difference.
fn check_cut(z: C64, z1: C64) -> Result<()> {
    if (z.im - z1.im).abs() < CUT_EPS && z1.re < z.re && !(z.im == 0.0 && z1.im == 0.0) {
        return Err(Error::BranchCutCrossing(z));
    }
    Ok(())
}

/// `2G⁺(z, z₁) = Log tanh((z̄₁-z)/4) - Log tanh((z₁-z)/4)`, the covariance of
/// `Φ⁺(z, q₋)` with `Φ(z₁)`.
///
/// The branch is the one continuous in `z` on the strip with the ray
/// `z₁ + ℝ₊` removed and vanishing at `q₋`; its real part is `G(z, z₁)`.
pub fn complex_green(z: C64, z1: C64) -> Result<C64> {
    let (z, z1) = (check_strip(z)?, check_strip(z1)?);
    check_apart(z, z1)?;
    check_cut(z, z1)?;
    Ok(log_tanh(z1.conj() - z) - log_tanh(z1 - z))
}

/// Covariance of `Φ⁺(z, root)` with `∂^m∂̄^nΦ(z₁)`.
pub fn phi_plus_phi(z: C64, root: Root, z1: C64, (m, n): (u8, u8)) -> Result<C64> {
    let z1 = check_strip(z1)?;
    let single = |p: C64| -> Result<C64> {
        let p = check_strip(p)?;
        check_apart(p, z1)?;
        if m == 0 && n == 0 {
            return complex_green(p, z1);
        }
        let mut acc = c(0.0, 0.0);
        if m == 0 {
            acc += log_tanh_deriv(n as usize, z1.conj() - p)?;
        }
        if n == 0 {
            acc -= log_tanh_deriv(m as usize, z1 - p)?;
        }
        Ok(acc)
    };
    let mut v = single(z)?;
    if let Root::Point(z0) = root {
        v -= single(z0)?;
    }
    Ok(v)
}

/// `E[Φ⁺(z, root) J(z₁)]`.
pub fn phi_plus_j(z: C64, root: Root, z1: C64) -> Result<C64> {
    phi_plus_phi(z, root, z1, (1, 0))
}

fn chiral_factor(a: Option<C64>, b: Option<C64>) -> Result<C64> {
    // Log tanh((a-b)/4), with tanh(-∞) = -1, tanh(+∞) = 1 and the doubly
    // infinite factor renormalised to 1 as for rooted vertex fields.
    match (a, b) {
        (None, None) => Ok(c(0.0, 0.0)),
        (None, Some(_)) => Ok(c(0.0, PI)),
        (Some(_), None) => Ok(c(0.0, 0.0)),
        (Some(a), Some(b)) => {
            check_apart(a, b)?;
            let u = a - b;
            if u.im.abs() < CUT_EPS && u.re < 0.0 {
                return Err(Error::BranchCutCrossing(a));
            }
            Ok(log_tanh(u))
        }
    }
}

fn root_point(r: Root) -> Result<Option<C64>> {
    match r {
        Root::MinusInfinity => Ok(None),
        Root::Point(p) => Ok(Some(check_strip(p)?)),
    }
}

/// `E[Φ⁺(z, z₀)Φ⁺(z', z₀')]`, the principal sector.
pub fn phi_plus_phi_plus(z: C64, root: Root, zp: C64, root_p: Root) -> Result<C64> {
    let a = Some(check_strip(z)?);
    let b = Some(check_strip(zp)?);
    let a0 = root_point(root)?;
    let b0 = root_point(root_p)?;
    Ok(chiral_factor(a, b0)? + chiral_factor(a0, b)?
        - chiral_factor(a, b)?
        - chiral_factor(a0, b0)?)
}

/// The two-point kernels by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel2pt {
    PhiPhi,
    JPhi,
    JJ,
    PhiPlusPhi { root: Root },
    PhiPlusJ { root: Root },
    PhiPlusPhiPlus { root_a: Root, root_b: Root },
}

impl Kernel2pt {
    /// Evaluate in `chart`; derivative fields pick up the chart factor `w′`
    /// of their point, chiral roots are carried through the chart map.
    pub fn eval(&self, chart: Chart, a: C64, b: C64) -> Result<C64> {
        let ja = chart.to_strip(a)?;
        let jb = chart.to_strip(b)?;
        let (wa, wb) = (ja.value, jb.value);
        let root = |r: Root| -> Result<Root> {
            Ok(match r {
                Root::MinusInfinity => Root::MinusInfinity,
                Root::Point(p) => Root::Point(chart.to_strip(p)?.value),
            })
        };
        Ok(match *self {
            Kernel2pt::PhiPhi => phi_phi(wa, (0, 0), wb, (0, 0))?,
            Kernel2pt::JPhi => ja.d(1)? * kernel_j_phi(wa, wb)?,
            Kernel2pt::JJ => ja.d(1)? * jb.d(1)? * kernel_j_j(wa, wb)?,
            Kernel2pt::PhiPlusPhi { root: r } => phi_plus_phi(wa, root(r)?, wb, (0, 0))?,
            Kernel2pt::PhiPlusJ { root: r } => jb.d(1)? * phi_plus_j(wa, root(r)?, wb)?,
            Kernel2pt::PhiPlusPhiPlus { root_a, root_b } => {
                phi_plus_phi_plus(wa, root(root_a)?, wb, root(root_b)?)?
            }
        })
    }
}

/// Base field of a Fock space field in the OPE family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldBase {
    Phi,
    PhiPlus(Root),
    J,
    Jbar,
    T,
    /// Non-chiral vertex field `𝒱^α = C^{α²} e^{⊙αΦ}`.
    Vertex(C64),
    /// Chiral bi-vertex `V^α(z, z₀)`.
    BiVertex {
        alpha: C64,
        root: C64,
    },
    /// Rooted vertex `V⋆^α(z) = V^α(z, q₋)`.
    RootedVertex(C64),
}

/// A base field with `∂^dz ∂̄^dzbar` applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub base: FieldBase,
    pub dz: u8,
    pub dzbar: u8,
}

impl FieldSpec {
    pub fn new(base: FieldBase) -> FieldSpec {
        FieldSpec {
            base,
            dz: 0,
            dzbar: 0,
        }
    }

    pub fn derivs(mut self, dz: u8, dzbar: u8) -> FieldSpec {
        self.dz = dz;
        self.dzbar = dzbar;
        self
    }

    /// Transformation law of the underived field. Derivative fields have
    /// none in general and return `None`.
    pub fn conformal_type(&self) -> Option<ConformalType> {
        if self.dz + self.dzbar > 0 {
            return None;
        }
        let zero = c(0.0, 0.0);
        Some(match self.base {
            FieldBase::Phi | FieldBase::PhiPlus(_) => ConformalType::scalar(),
            FieldBase::J => ConformalType::differential(1.0, 0.0),
            FieldBase::Jbar => ConformalType::differential(0.0, 1.0),
            FieldBase::T => ConformalType::Schwarzian {
                mu: c(1.0 / 12.0, 0.0),
            },
            FieldBase::Vertex(a) => {
                let l = -a * a * 0.5;
                ConformalType::Differential {
                    lambda: l,
                    lambda_bar: l,
                }
            }
            FieldBase::RootedVertex(a) | FieldBase::BiVertex { alpha: a, .. } => {
                ConformalType::Differential {
                    lambda: -a * a * 0.5,
                    lambda_bar: zero,
                }
            }
        })
    }
}

/// A correlation `E[X₁(z₁)⋯Xₙ(zₙ)]` in a chart, optionally with the
/// boundary condition changing insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRequest {
    pub chart: Chart,
    pub fields: Vec<(FieldSpec, C64)>,
    pub insertion: Option<Insertion>,
}

impl CorrelationRequest {
    pub fn strip(fields: Vec<(FieldSpec, C64)>) -> CorrelationRequest {
        CorrelationRequest {
            chart: Chart::StripInf,
            fields,
            insertion: None,
        }
    }

    pub fn with_insertion(mut self, ins: Insertion) -> CorrelationRequest {
        self.insertion = Some(ins);
        self
    }
}

/// A Gaussian atom in strip coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Atom {
    Phi { z: C64, j: u8, k: u8 },
    Chiral { z: C64, root: Root },
}

pub(crate) fn covariance(a: &Atom, b: &Atom) -> Result<C64> {
    match (*a, *b) {
        (Atom::Phi { z: za, j, k }, Atom::Phi { z: zb, j: m, k: n }) => {
            phi_phi(za, (j, k), zb, (m, n))
        }
        (Atom::Chiral { z, root }, Atom::Phi { z: z1, j, k })
        | (Atom::Phi { z: z1, j, k }, Atom::Chiral { z, root }) => {
            phi_plus_phi(z, root, z1, (j, k))
        }
        (Atom::Chiral { z, root }, Atom::Chiral { z: zp, root: rp }) => {
            phi_plus_phi_plus(z, root, zp, rp)
        }
    }
}

/// One field written as `prefactor · Σ coef · (Wick monomial) ⊙ e^{⊙αY}`.
#[derive(Debug, Clone)]
pub(crate) struct Expanded {
    pub prefactor: C64,
    pub terms: Vec<(C64, Vec<Atom>)>,
    pub vertex: Option<(C64, Atom)>,
}

fn binomial(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn principal_pow(base: C64, exponent: C64) -> C64 {
    (base.ln() * exponent).exp()
}

fn expand(chart: Chart, spec: &FieldSpec, z: C64) -> Result<Expanded> {
    if spec.dz > MAX_DERIV || spec.dzbar > MAX_DERIV {
        return Err(Error::Unsupported(format!(
            "derivative order ({}, {}) above {MAX_DERIV}",
            spec.dz, spec.dzbar
        )));
    }
    let is_strip = matches!(chart, Chart::StripInf | Chart::Strip0);
    if !is_strip && spec.dz + spec.dzbar > 0 {
        return Err(Error::Unsupported(
            "derivative fields outside the strip chart".into(),
        ));
    }
    let jet: Jet = chart.to_strip(z)?;
    let w = normalize(jet.value);
    let w1 = jet.d(1)?;
    let one = c(1.0, 0.0);
    let plain = |atoms: Vec<Atom>| Expanded {
        prefactor: one,
        terms: vec![(one, atoms)],
        vertex: None,
    };
    let zero_field = Expanded {
        prefactor: one,
        terms: vec![],
        vertex: None,
    };
    let (j, k) = (spec.dz, spec.dzbar);
    let no_derivs = |what: &str| -> Result<()> {
        if j + k > 0 {
            return Err(Error::Unsupported(format!("derivatives of {what}")));
        }
        Ok(())
    };
    Ok(match spec.base {
        FieldBase::Phi => plain(vec![Atom::Phi { z: w, j, k }]),
        FieldBase::J => {
            let mut e = plain(vec![Atom::Phi { z: w, j: j + 1, k }]);
            e.prefactor = w1;
            e
        }
        FieldBase::Jbar => {
            let mut e = plain(vec![Atom::Phi { z: w, j, k: k + 1 }]);
            e.prefactor = w1.conj();
            e
        }
        FieldBase::PhiPlus(root) => {
            if k > 0 {
                zero_field
            } else if j == 0 {
                let root = match root {
                    Root::MinusInfinity => Root::MinusInfinity,
                    Root::Point(p) => Root::Point(normalize(chart.to_strip(p)?.value)),
                };
                plain(vec![Atom::Chiral { z: w, root }])
            } else {
                plain(vec![Atom::Phi { z: w, j, k: 0 }])
            }
        }
        FieldBase::T => {
            if k > 0 {
                zero_field
            } else {
                // ∂^j(-½ J⊙J) by Leibniz, plus the constant for j = 0
                let mut terms = Vec::new();
                for i in 0..=j {
                    let atoms = vec![
                        Atom::Phi {
                            z: w,
                            j: i + 1,
                            k: 0,
                        },
                        Atom::Phi {
                            z: w,
                            j: j - i + 1,
                            k: 0,
                        },
                    ];
                    terms.push((c(-0.5 * binomial(j, i), 0.0) * w1 * w1, atoms));
                }
                if j == 0 {
                    terms.push((w1 * w1 / 48.0 + jet.schwarzian()? / 12.0, vec![]));
                }
                Expanded {
                    prefactor: one,
                    terms,
                    vertex: None,
                }
            }
        }
        FieldBase::Vertex(alpha) => {
            no_derivs("vertex fields")?;
            if w.im <= 0.0 || w.im >= PI {
                return Err(Error::Unsupported(
                    "non-chiral vertex fields on the boundary".into(),
                ));
            }
            let a2 = alpha * alpha;
            let l = w1.ln();
            let log_c = c((4.0 * (w.im / 2.0).tan()).ln(), 0.0) - (l + l.conj()) * 0.5;
            Expanded {
                prefactor: (a2 * log_c).exp(),
                terms: vec![(one, vec![])],
                vertex: Some((alpha, Atom::Phi { z: w, j: 0, k: 0 })),
            }
        }
        FieldBase::BiVertex { alpha, root } => {
            no_derivs("vertex fields")?;
            let j0 = chart.to_strip(root)?;
            let w0 = normalize(j0.value);
            check_apart(w, w0)?;
            let a2 = alpha * alpha;
            let pre = principal_pow(((w - w0) * 0.25).tanh(), a2)
                * principal_pow(w1, -a2 * 0.5)
                * principal_pow(j0.d(1)?, -a2 * 0.5);
            Expanded {
                prefactor: pre,
                terms: vec![(one, vec![])],
                vertex: Some((
                    alpha,
                    Atom::Chiral {
                        z: w,
                        root: Root::Point(w0),
                    },
                )),
            }
        }
        FieldBase::RootedVertex(alpha) => {
            no_derivs("vertex fields")?;
            Expanded {
                prefactor: principal_pow(w1, -alpha * alpha * 0.5),
                terms: vec![(one, vec![])],
                vertex: Some((
                    alpha,
                    Atom::Chiral {
                        z: w,
                        root: Root::MinusInfinity,
                    },
                )),
            }
        }
    })
}

/// Strip images of all points a request touches, with the insertion last.
fn request_points(req: &CorrelationRequest) -> Result<Vec<C64>> {
    let mut pts = Vec::new();
    for (spec, z) in &req.fields {
        pts.push(normalize(req.chart.to_strip(*z)?.value));
        if let FieldBase::BiVertex { root, .. } = spec.base {
            pts.push(normalize(req.chart.to_strip(root)?.value));
        }
        if let FieldBase::PhiPlus(Root::Point(root)) = spec.base {
            pts.push(normalize(req.chart.to_strip(root)?.value));
        }
    }
    Ok(pts)
}

pub(crate) fn prepare(req: &CorrelationRequest) -> Result<Vec<Expanded>> {
    let pts = request_points(req)?;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            check_apart(pts[a], pts[b])?;
        }
        if let Some(ins) = req.insertion {
            if (pts[a] - c(ins.p, 0.0)).norm() < MARKED_EPS {
                return Err(Error::InsertionSingularity(pts[a]));
            }
        }
    }
    req.fields
        .iter()
        .map(|(spec, z)| expand(req.chart, spec, *z))
        .collect()
}

/// Means of atoms shifted by a deterministic function, as for hat fields.
pub(crate) type MeanShift<'a> = &'a dyn Fn(&Atom) -> Result<C64>;

/// Gaussian expectation of the product of expanded fields, with extra vertex
/// factors and an optional deterministic mean shift of every atom.
pub(crate) fn gaussian_sum(
    fields: &[Expanded],
    extra_vertices: &[(C64, Atom)],
    shift: Option<MeanShift>,
) -> Result<C64> {
    let mut vertices: Vec<(C64, Atom)> = fields.iter().filter_map(|f| f.vertex).collect();
    let mut prefactor: C64 = fields.iter().map(|f| f.prefactor).product();
    if let Some(shift) = shift {
        for (alpha, y) in &vertices {
            prefactor *= (*alpha * shift(y)?).exp();
        }
    }
    vertices.extend_from_slice(extra_vertices);
    let mut log_norm = c(0.0, 0.0);
    for a in 0..vertices.len() {
        for b in a + 1..vertices.len() {
            log_norm += vertices[a].0 * vertices[b].0 * covariance(&vertices[a].1, &vertices[b].1)?;
        }
    }
    let mean_of = |atom: &Atom| -> Result<C64> {
        let mut m = c(0.0, 0.0);
        for (alpha, y) in &vertices {
            m += *alpha * covariance(atom, y)?;
        }
        if let Some(shift) = shift {
            m += shift(atom)?;
        }
        Ok(m)
    };
    if fields.iter().any(|f| f.terms.is_empty()) {
        return Ok(c(0.0, 0.0));
    }
    // sum over one term per field
    let mut total = c(0.0, 0.0);
    let mut choice = vec![0usize; fields.len()];
    loop {
        let mut coef = c(1.0, 0.0);
        let mut atoms = Vec::new();
        for (g, f) in fields.iter().enumerate() {
            let (cf, at) = &f.terms[choice[g]];
            coef *= *cf;
            atoms.extend(at.iter().map(|a| (g, *a)));
        }
        if coef.norm() != 0.0 {
            let means = atoms
                .iter()
                .map(|(_, a)| mean_of(a))
                .collect::<Result<Vec<_>>>()?;
            let moment = WickMoment::new(&atoms, means)?;
            total += coef * moment.expectation();
        }
        // advance the mixed-radix counter
        let mut g = 0;
        loop {
            if g == fields.len() {
                return Ok(total * prefactor * log_norm.exp());
            }
            choice[g] += 1;
            if choice[g] < fields[g].terms.len() {
                break;
            }
            choice[g] = 0;
            g += 1;
        }
    }
}

/// Moment of a product of Wick monomials of jointly Gaussian atoms with the
/// given means: Isserlis' sum over partial matchings that never pair two
/// atoms of the same monomial, unmatched atoms contributing their means.
#[derive(Debug, Clone)]
pub struct WickMoment {
    groups: Vec<usize>,
    means: Vec<C64>,
    cov: Vec<Vec<C64>>,
}

impl WickMoment {
    pub(crate) fn new(atoms: &[(usize, Atom)], means: Vec<C64>) -> Result<WickMoment> {
        let n = atoms.len();
        let mut cov = vec![vec![c(0.0, 0.0); n]; n];
        for a in 0..n {
            for b in a + 1..n {
                if atoms[a].0 != atoms[b].0 {
                    let v = covariance(&atoms[a].1, &atoms[b].1)?;
                    cov[a][b] = v;
                    cov[b][a] = v;
                }
            }
        }
        Ok(WickMoment {
            groups: atoms.iter().map(|a| a.0).collect(),
            means,
            cov,
        })
    }

    /// Build directly from a covariance matrix, groups and means.
    pub fn from_parts(groups: Vec<usize>, means: Vec<C64>, cov: Vec<Vec<C64>>) -> WickMoment {
        WickMoment { groups, means, cov }
    }

    pub fn expectation(&self) -> C64 {
        let n = self.groups.len();
        assert!(n < 25, "Wick moment of {n} atoms");
        let mut memo = HashMap::new();
        self.rec((1u32 << n) - 1, &mut memo)
    }

    fn rec(&self, mask: u32, memo: &mut HashMap<u32, C64>) -> C64 {
        if mask == 0 {
            return c(1.0, 0.0);
        }
        if let Some(v) = memo.get(&mask) {
            return *v;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = c(0.0, 0.0);
        if self.means[i].norm() != 0.0 {
            acc += self.means[i] * self.rec(rest, memo);
        }
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            if self.groups[j] != self.groups[i] && self.cov[i][j].norm() != 0.0 {
                acc += self.cov[i][j] * self.rec(rest & !(1 << j), memo);
            }
        }
        memo.insert(mask, acc);
        acc
    }
}

/// `E[X₁(z₁)⋯Xₙ(zₙ)]`. With an insertion, returns the normalised
/// `Ê = E[V⋆^{ia}(p)X]/E[V⋆^{ia}(p)]` through the vertex machinery.
pub fn correlate(req: &CorrelationRequest) -> Result<C64> {
    let fields = prepare(req)?;
    let extra: Vec<(C64, Atom)> = match req.insertion {
        Some(ins) => {
            ins.validate()?;
            vec![(
                c(0.0, ins.a),
                Atom::Chiral {
                    z: c(ins.p, 0.0),
                    root: Root::MinusInfinity,
                },
            )]
        }
        None => vec![],
    };
    gaussian_sum(&fields, &extra, None)
}

/// `2c(z)` for the strip, `c = log(4 tan(y/2))`.
pub fn two_c(z: C64) -> f64 {
    2.0 * (4.0 * (z.im / 2.0).tan()).ln()
}

/// `2c(z)` read off the OPE: the mean of `E[Φ(ζ)Φ(z)] - log 1/|ζ-z|²` over
/// four points `|ζ-z| = eps`.
pub fn two_c_from_ope(z: C64, eps: f64) -> Result<f64> {
    let mut acc = 0.0;
    for d in [c(eps, 0.0), c(-eps, 0.0), c(0.0, eps), c(0.0, -eps)] {
        acc += 2.0 * green_strip(z + d, z)? + (eps * eps).ln();
    }
    Ok(acc / 4.0)
}

/// `E[Φ^{*n}]` for `n = 0..=max` from the OPE recursion
/// `Φ * Φ^{⊙j} = Φ^{⊙(j+1)} + 2c j Φ^{⊙(j-1)}`.
pub fn ope_power_means(two_c: f64, max: usize) -> Vec<f64> {
    // a[j]: coefficient of Φ^{⊙j} in Φ^{*n}
    let mut a = vec![0.0; max + 2];
    a[0] = 1.0;
    let mut out = vec![1.0];
    for _ in 0..max {
        let mut next = vec![0.0; max + 2];
        for j in 0..=max {
            if a[j] == 0.0 {
                continue;
            }
            next[j + 1] += a[j];
            if j > 0 {
                next[j - 1] += two_c * j as f64 * a[j];
            }
        }
        a = next;
        out.push(a[0]);
    }
    out
}

/// `E[Φ^{*n}]` solved from `Φ^{⊙n} = (2c)^{n/2} H_n(Φ/√(2c))` and
/// `E[Φ^{⊙n}] = 0` for `n ≥ 1`, with probabilists' Hermite polynomials.
pub fn hermite_power_means(two_c: f64, max: usize) -> Vec<f64> {
    // H_{n+1} = x H_n - n H_{n-1}
    let mut h: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for n in 1..max {
        let mut next = vec![0.0; n + 2];
        for (k, &a) in h[n].iter().enumerate() {
            next[k + 1] += a;
        }
        for (k, &a) in h[n - 1].iter().enumerate() {
            next[k] -= n as f64 * a;
        }
        h.push(next);
    }
    let mut m = vec![1.0];
    for n in 1..=max {
        let mut s = 0.0;
        for k in 0..n {
            s += h[n][k] * two_c.powf((n - k) as f64 / 2.0) * m[k];
        }
        m.push(-s);
    }
    m
}

/// Largest disagreement between `E[Φ^{*n}]` built from the numerically read
/// OPE constant and from the Hermite-Wick relation with the closed form
/// `2c`, over a grid of strip points.
pub fn ope_coefficient_check(n: usize) -> Result<f64> {
    if n > 6 {
        return Err(Error::Unsupported(format!("OPE power {n} above 6")));
    }
    let mut worst: f64 = 0.0;
    for &x in &[-2.0, -0.5, 0.0, 1.0, 3.0] {
        for &y in &[0.4, 1.2, PI / 2.0, 2.3, 2.9] {
            let z = c(x, y);
            let ope = ope_power_means(two_c_from_ope(z, 1e-4)?, n)[n];
            let herm = hermite_power_means(two_c(z), n)[n];
            worst = worst.max((ope - herm).abs() / herm.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// `Σ_{n≤N} αⁿ E[Φ^{*n}]/n!` against the vertex one-point function
/// `C^{α²}`, relative residual.
pub fn vertex_series_check(alpha: f64, terms: usize, z: C64) -> Result<f64> {
    let means = ope_power_means(two_c_from_ope(z, 1e-4)?, terms);
    let mut sum = 0.0;
    let mut fact = 1.0;
    for (n, m) in means.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
        }
        sum += alpha.powi(n as i32) * m / fact;
    }
    let closed = correlate(&CorrelationRequest::strip(vec![(
        FieldSpec::new(FieldBase::Vertex(c(alpha, 0.0))),
        z,
    )]))?;
    Ok((c(sum, 0.0) - closed).norm() / closed.norm())
}
