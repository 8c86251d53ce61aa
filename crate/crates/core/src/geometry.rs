//! Canonical charts of the model domains, 3-jets of the maps between them,
//! the Schwarzian derivative and the transformation and Lie derivative laws
//! of differentials and forms.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Exclusion radius around marked points and poles, in chart coordinates.
pub const MARKED_EPS: f64 = 1e-9;
const DOMAIN_EPS: f64 = 1e-12;

/// Canonical model domains. Every chart is related to the strip
/// `S = {0 < Im z < π}` with `q₋ = -∞`, `q₊ = +∞` by a fixed analytic map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    /// `(S, -∞, +∞)`.
    StripInf,
    /// `(S, 0, -∞, +∞)`: the strip with the seed at the origin.
    Strip0,
    /// `(ℍ, -1, 1)` through `u = tanh(z/2)`.
    HalfPlanePm1,
    /// `(ℍ, 0, ∞)` through `u = e^z`.
    HalfPlane0Inf,
    /// First quadrant through `u = e^{z/2}`: Dirichlet on `ℝ₊`, Neumann on `iℝ₊`.
    Quadrant,
}

/// Value and up to three derivatives of a holomorphic map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: C64,
    derivs: [C64; 3],
    order: usize,
}

impl Jet {
    pub fn new(value: C64, derivs: &[C64]) -> Jet {
        assert!(derivs.len() <= 3, "jets carry at most three derivatives");
        let mut d = [C64::new(0.0, 0.0); 3];
        d[..derivs.len()].copy_from_slice(derivs);
        Jet {
            value,
            derivs: d,
            order: derivs.len(),
        }
    }

    pub fn full(value: C64, d1: C64, d2: C64, d3: C64) -> Jet {
        Jet {
            value,
            derivs: [d1, d2, d3],
            order: 3,
        }
    }

    pub fn identity(z: C64) -> Jet {
        Jet::full(
            z,
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `k`-th derivative, `1 <= k <= 3`.
    pub fn d(&self, k: usize) -> Result<C64> {
        if k == 0 {
            return Ok(self.value);
        }
        if k > self.order {
            return Err(Error::InsufficientJet {
                have: self.order,
                need: k,
            });
        }
        Ok(self.derivs[k - 1])
    }

    /// Jet of `outer ∘ inner`; `outer` must be taken at `inner.value`.
    pub fn compose(outer: &Jet, inner: &Jet) -> Jet {
        let [f1, f2, f3] = outer.derivs;
        let [g1, g2, g3] = inner.derivs;
        Jet {
            value: outer.value,
            derivs: [
                f1 * g1,
                f2 * g1 * g1 + f1 * g2,
                f3 * g1 * g1 * g1 + f2 * g1 * g2 * 3.0 + f1 * g3,
            ],
            order: outer.order.min(inner.order),
        }
    }

    pub fn schwarzian(&self) -> Result<C64> {
        schwarzian(self.d(1)?, self.d(2)?, self.d(3)?)
    }
}

/// `h‴/h′ - (3/2)(h″/h′)²`.
pub fn schwarzian(d1: C64, d2: C64, d3: C64) -> Result<C64> {
    if d1.norm() == 0.0 || !d1.is_finite() {
        return Err(Error::DegenerateMap(d1));
    }
    let r = d2 / d1;
    Ok(d3 / d1 - r * r * 1.5)
}

/// Turn a negative zero imaginary part into a positive one, so that boundary
/// points of `ℍ` on the negative axis get argument `π` rather than `-π`.
fn lift(z: C64) -> C64 {
    C64::new(z.re, z.im + 0.0)
}

fn ln_upper(z: C64) -> C64 {
    lift(z).ln()
}

impl Chart {
    pub const ALL: [Chart; 5] = [
        Chart::StripInf,
        Chart::Strip0,
        Chart::HalfPlanePm1,
        Chart::HalfPlane0Inf,
        Chart::Quadrant,
    ];

    /// Closed domain membership, with a rounding slack of `1e-12`.
    pub fn contains(&self, z: C64) -> bool {
        if !z.is_finite() {
            return false;
        }
        match self {
            Chart::StripInf | Chart::Strip0 => z.im >= -DOMAIN_EPS && z.im <= PI + DOMAIN_EPS,
            Chart::HalfPlanePm1 | Chart::HalfPlane0Inf => z.im >= -DOMAIN_EPS,
            Chart::Quadrant => z.im >= -DOMAIN_EPS && z.re >= -DOMAIN_EPS,
        }
    }

    fn is_strip(&self) -> bool {
        matches!(self, Chart::StripInf | Chart::Strip0)
    }

    /// Jet of the canonical map from this chart onto the strip at `z`.
    pub fn to_strip(&self, z: C64) -> Result<Jet> {
        if !self.contains(z) {
            return Err(Error::OutsideDomain(z));
        }
        let one = C64::new(1.0, 0.0);
        match self {
            Chart::StripInf | Chart::Strip0 => Ok(Jet::identity(z)),
            Chart::HalfPlanePm1 => {
                if (z - one).norm() < MARKED_EPS || (z + one).norm() < MARKED_EPS {
                    return Err(Error::PoleAtMarkedPoint(z));
                }
                let q = one - z * z;
                let s = ln_upper((one + z) / (one - z));
                Ok(Jet::full(
                    s,
                    2.0 / q,
                    z * 4.0 / (q * q),
                    (one + z * z * 3.0) * 4.0 / (q * q * q),
                ))
            }
            Chart::HalfPlane0Inf => {
                if z.norm() < MARKED_EPS {
                    return Err(Error::PoleAtMarkedPoint(z));
                }
                let r = one / z;
                Ok(Jet::full(ln_upper(z), r, -r * r, r * r * r * 2.0))
            }
            Chart::Quadrant => {
                if z.norm() < MARKED_EPS {
                    return Err(Error::PoleAtMarkedPoint(z));
                }
                let r = one / z;
                let l = lift(z).ln();
                Ok(Jet::full(l * 2.0, r * 2.0, -r * r * 2.0, r * r * r * 4.0))
            }
        }
    }

    /// Jet of the canonical map from the strip onto this chart at `s`.
    pub fn from_strip(&self, s: C64) -> Result<Jet> {
        if !Chart::StripInf.contains(s) {
            return Err(Error::OutsideDomain(s));
        }
        let one = C64::new(1.0, 0.0);
        let jet = match self {
            Chart::StripInf | Chart::Strip0 => Jet::identity(s),
            Chart::HalfPlanePm1 => {
                // tanh(s/2) has a pole at iπ, the point at infinity of ℍ
                if (s - C64::new(0.0, PI)).norm() < MARKED_EPS {
                    return Err(Error::PoleAtMarkedPoint(s));
                }
                let h = (s * 0.5).tanh();
                let d1 = (one - h * h) * 0.5;
                let d2 = -h * d1;
                let d3 = -d1 * d1 + h * h * d1;
                Jet::full(h, d1, d2, d3)
            }
            Chart::HalfPlane0Inf => {
                let e = s.exp();
                Jet::full(e, e, e, e)
            }
            Chart::Quadrant => {
                let e = (s * 0.5).exp();
                Jet::full(e, e * 0.5, e * 0.25, e * 0.125)
            }
        };
        if !jet.value.is_finite() || !jet.derivs.iter().all(|d| d.is_finite()) {
            return Err(Error::PoleAtMarkedPoint(s));
        }
        Ok(jet)
    }
}

/// Jet of the canonical transition map `chart_to ∘ chart_from⁻¹` at `z`.
pub fn map(chart_from: Chart, chart_to: Chart, z: C64) -> Result<Jet> {
    if !chart_from.contains(z) {
        return Err(Error::OutsideDomain(z));
    }
    if chart_from == chart_to || (chart_from.is_strip() && chart_to.is_strip()) {
        return Ok(Jet::identity(z));
    }
    let inner = chart_from.to_strip(z)?;
    let outer = chart_to.from_strip(inner.value)?;
    Ok(Jet::compose(&outer, &inner))
}

/// How a field changes under a change of chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConformalType {
    Differential { lambda: C64, lambda_bar: C64 },
    PrePreSchwarzian { mu: C64 },
    PreSchwarzian { mu: C64 },
    Schwarzian { mu: C64 },
}

impl ConformalType {
    pub fn differential(lambda: f64, lambda_bar: f64) -> ConformalType {
        ConformalType::Differential {
            lambda: C64::new(lambda, 0.0),
            lambda_bar: C64::new(lambda_bar, 0.0),
        }
    }

    pub fn scalar() -> ConformalType {
        ConformalType::differential(0.0, 0.0)
    }

    /// Number of transition map derivatives the law needs.
    pub fn required_order(&self) -> usize {
        match self {
            ConformalType::Differential { .. } | ConformalType::PrePreSchwarzian { .. } => 1,
            ConformalType::PreSchwarzian { .. } => 2,
            ConformalType::Schwarzian { .. } => 3,
        }
    }
}

fn differential_factor(lambda: C64, lambda_bar: C64, d1: C64) -> C64 {
    // conj(Log h′) rather than Log conj(h′): keeps (h′)^λ (h̄′)^λ = |h′|^{2λ}
    let l = d1.ln();
    (lambda * l + lambda_bar * l.conj()).exp()
}

/// Value of a field in chart `φ` at `z`, given its value in chart `φ̃` at
/// `h(z)`, where `h = φ̃ ∘ φ⁻¹` is described by `h`.
pub fn pull_back(value: C64, ty: ConformalType, h: &Jet) -> Result<C64> {
    let d1 = h.d(1)?;
    if ty.required_order() > 1 {
        h.d(ty.required_order())?;
    }
    if d1.norm() == 0.0 {
        return Err(Error::DegenerateMap(d1));
    }
    Ok(match ty {
        ConformalType::Differential { lambda, lambda_bar } => {
            value * differential_factor(lambda, lambda_bar, d1)
        }
        ConformalType::PrePreSchwarzian { mu } => value + mu * d1.ln(),
        ConformalType::PreSchwarzian { mu } => d1 * value + mu * h.d(2)? / d1,
        ConformalType::Schwarzian { mu } => d1 * d1 * value + mu * h.schwarzian()?,
    })
}

/// Inverse of [`pull_back`]: value in chart `φ̃` at `h(z)` from the value in
/// chart `φ` at `z`.
pub fn push_forward(value: C64, ty: ConformalType, h: &Jet) -> Result<C64> {
    let d1 = h.d(1)?;
    if ty.required_order() > 1 {
        h.d(ty.required_order())?;
    }
    if d1.norm() == 0.0 {
        return Err(Error::DegenerateMap(d1));
    }
    Ok(match ty {
        ConformalType::Differential { lambda, lambda_bar } => {
            value / differential_factor(lambda, lambda_bar, d1)
        }
        ConformalType::PrePreSchwarzian { mu } => value - mu * d1.ln(),
        ConformalType::PreSchwarzian { mu } => (value - mu * h.d(2)? / d1) / d1,
        ConformalType::Schwarzian { mu } => (value - mu * h.schwarzian()?) / (d1 * d1),
    })
}

/// A holomorphic vector field and its first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorJet {
    pub v: C64,
    pub d1: C64,
    pub d2: C64,
    pub d3: C64,
}

impl VectorJet {
    pub fn scale(&self, c: C64) -> VectorJet {
        VectorJet {
            v: self.v * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
            d3: self.d3 * c,
        }
    }
}

/// `ℒX = d·∂X + dbar·∂̄X + mult·X + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieCoefficients {
    pub d: C64,
    pub dbar: C64,
    pub mult: C64,
    pub shift: C64,
}

impl LieCoefficients {
    pub fn apply(&self, x: C64, dx: C64, dbar_x: C64) -> C64 {
        self.d * dx + self.dbar * dbar_x + self.mult * x + self.shift
    }

    fn combine(a: &LieCoefficients, ca: C64, b: &LieCoefficients, cb: C64) -> LieCoefficients {
        LieCoefficients {
            d: a.d * ca + b.d * cb,
            dbar: a.dbar * ca + b.dbar * cb,
            mult: a.mult * ca + b.mult * cb,
            shift: a.shift * ca + b.shift * cb,
        }
    }
}

/// Coefficients of the Lie derivative `ℒ_v` on a field of the given type.
/// Forms carry the `v̄∂̄` term as well; it drops out on holomorphic forms.
pub fn lie_coefficients(v: &VectorJet, ty: ConformalType) -> LieCoefficients {
    let zero = C64::new(0.0, 0.0);
    let (mult, shift) = match ty {
        ConformalType::Differential { lambda, lambda_bar } => {
            (lambda * v.d1 + lambda_bar * v.d1.conj(), zero)
        }
        ConformalType::PrePreSchwarzian { mu } => (zero, mu * v.d1),
        ConformalType::PreSchwarzian { mu } => (v.d1, mu * v.d2),
        ConformalType::Schwarzian { mu } => (v.d1 * 2.0, mu * v.d3),
    };
    LieCoefficients {
        d: v.v,
        dbar: v.v.conj(),
        mult,
        shift,
    }
}

/// `ℒ⁺_v = (ℒ_v - iℒ_{iv})/2`.
pub fn lie_plus(v: &VectorJet, ty: ConformalType) -> LieCoefficients {
    let i = C64::i();
    let a = lie_coefficients(v, ty);
    let b = lie_coefficients(&v.scale(i), ty);
    LieCoefficients::combine(&a, C64::new(0.5, 0.0), &b, -i * 0.5)
}

/// `ℒ⁻_v = (ℒ_v + iℒ_{iv})/2`.
pub fn lie_minus(v: &VectorJet, ty: ConformalType) -> LieCoefficients {
    let i = C64::i();
    let a = lie_coefficients(v, ty);
    let b = lie_coefficients(&v.scale(i), ty);
    LieCoefficients::combine(&a, C64::new(0.5, 0.0), &b, i * 0.5)
}

/// The dipolar Loewner vector field `v_ξ(z) = (1-z²)(1-ξz) / (2(ξ-z))` in
/// `(ℍ,-1,1)` and its first three derivatives. `ξ` may be complex; the
/// field is still meromorphic in `z`.
pub fn loewner_vector_field(xi: C64, z: C64) -> Result<VectorJet> {
    let dz = xi - z;
    if dz.norm() < MARKED_EPS {
        return Err(Error::PoleAtDriving(z));
    }
    let one = C64::new(1.0, 0.0);
    let q = one - xi * xi;
    let r = q * q;
    let inv = one / dz;
    // polynomial part plus the pole at ξ
    let v = (-xi * z * z + q * z + xi * (2.0 - xi * xi)) * 0.5 + r * inv * 0.5;
    let d1 = (-xi * z * 2.0 + q) * 0.5 + r * inv * inv * 0.5;
    let d2 = -xi + r * inv * inv * inv;
    let d3 = r * inv * inv * inv * inv * 3.0;
    Ok(VectorJet { v, d1, d2, d3 })
}
