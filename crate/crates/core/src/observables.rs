//! Martingale observables: hat expectations evaluated in the moving chart
//! `w_t`, i.e. `M_t(z) = (M ∥ w_t⁻¹)(z)`, using the jets tracked by the
//! Loewner flow for the transformation factors.

use crate::bcc::{hat_correlate, hat_expectation, mean_shift, Insertion};
use crate::correlators::{CorrelationRequest, FieldBase, FieldSpec};
use crate::error::{Error, Result};
use crate::geometry::{pull_back, ConformalType, Jet};
use crate::loewner::{LoewnerState, TrackedPoint};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObservableKind {
    /// `(1/π) arg tanh(w/4)`, the normalised `Φ̂`.
    Schramm,
    Current,
    Virasoro,
    /// Non-chiral vertex `𝒱^α`.
    Vertex {
        alpha: f64,
    },
    /// Two-point chiral bi-vertex `V^α(z, z₀)`.
    BiVertex {
        alpha: f64,
    },
    /// Two-point `Φ̂(z₁)Φ̂(z₂)`.
    PhiPhi,
    /// `(1/π) arg tanh(w/3)`: not a martingale, used to check the drift
    /// test has power.
    NegativeControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub name: String,
    pub kind: ObservableKind,
    /// Underlying field string, one field per point, hat applied.
    pub fields: Vec<FieldSpec>,
    /// Transformation law at each point.
    pub types: Vec<ConformalType>,
}

fn scalar_spec(name: &str, kind: ObservableKind, base: FieldBase) -> ObservableSpec {
    let field = FieldSpec::new(base);
    ObservableSpec {
        name: name.into(),
        kind,
        fields: vec![field],
        types: vec![field.conformal_type().expect("underived field")],
    }
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind) -> ObservableSpec {
        let cplx = |x: f64| C64::new(x, 0.0);
        match kind {
            ObservableKind::Schramm => scalar_spec("schramm", kind, FieldBase::Phi),
            ObservableKind::NegativeControl => {
                scalar_spec("negative_control", kind, FieldBase::Phi)
            }
            ObservableKind::Current => scalar_spec("current", kind, FieldBase::J),
            ObservableKind::Virasoro => scalar_spec("virasoro", kind, FieldBase::T),
            ObservableKind::Vertex { alpha } => scalar_spec(
                &format!("vertex_{alpha}"),
                kind,
                FieldBase::Vertex(cplx(alpha)),
            ),
            ObservableKind::BiVertex { alpha } => {
                // the root is filled in at evaluation time
                let f = FieldSpec::new(FieldBase::BiVertex {
                    alpha: cplx(alpha),
                    root: C64::new(0.0, 1.0),
                });
                let ty = f.conformal_type().expect("underived field");
                ObservableSpec {
                    name: format!("bivertex_{alpha}"),
                    kind,
                    fields: vec![f, f],
                    types: vec![ty, ty],
                }
            }
            ObservableKind::PhiPhi => {
                let f = FieldSpec::new(FieldBase::Phi);
                ObservableSpec {
                    name: "phi_phi".into(),
                    kind,
                    fields: vec![f, f],
                    types: vec![ConformalType::scalar(); 2],
                }
            }
        }
    }

    /// Number of points the observable takes.
    pub fn arity(&self) -> usize {
        self.fields.len()
    }

    /// Whether the observable is real valued, so only its real part carries
    /// information.
    pub fn is_real(&self) -> bool {
        matches!(
            self.kind,
            ObservableKind::Schramm
                | ObservableKind::NegativeControl
                | ObservableKind::Vertex { .. }
                | ObservableKind::PhiPhi
        )
    }

    /// Value in the strip chart at strip points `w`, before any transport.
    pub fn chart_value(&self, w: &[C64]) -> Result<C64> {
        if w.len() != self.arity() {
            return Err(Error::InvalidConfig(format!(
                "{} takes {} points, got {}",
                self.name,
                self.arity(),
                w.len()
            )));
        }
        let ins = Insertion::default();
        match self.kind {
            ObservableKind::Schramm => {
                Ok(C64::new(mean_shift(w[0], ins)? / (2.0 * ins.a * PI), 0.0))
            }
            ObservableKind::NegativeControl => {
                let z = crate::correlators::normalize(w[0]);
                let t = (z / 3.0).tanh();
                Ok(C64::new(C64::new(t.re, t.im + 0.0).arg() / PI, 0.0))
            }
            ObservableKind::BiVertex { alpha } => {
                let f = FieldSpec::new(FieldBase::BiVertex {
                    alpha: C64::new(alpha, 0.0),
                    root: w[1],
                });
                hat_expectation(f, w[0], ins)
            }
            ObservableKind::PhiPhi => hat_correlate(
                &CorrelationRequest::strip(vec![(self.fields[0], w[0]), (self.fields[1], w[1])])
                    .with_insertion(ins),
            ),
            _ => hat_expectation(self.fields[0], w[0], ins),
        }
    }

    /// `M_t` at the tracked points `idx` of `state`. Stopped if any of them
    /// has been swallowed.
    pub fn evaluate(&self, state: &LoewnerState, idx: &[usize]) -> Result<C64> {
        let pts: Vec<&TrackedPoint> = idx
            .iter()
            .map(|&i| {
                state
                    .points
                    .get(i)
                    .ok_or_else(|| Error::InvalidConfig(format!("no tracked point {i}")))
            })
            .collect::<Result<_>>()?;
        if pts.iter().any(|p| !p.is_alive()) {
            return Err(Error::Stopped);
        }
        let w: Vec<C64> = pts.iter().map(|p| p.w).collect();
        let mut value = self.chart_value(&w)?;
        for (p, ty) in pts.iter().zip(&self.types) {
            let jet = Jet::full(p.w, p.jet[0], p.jet[1], p.jet[2]);
            value = pull_back(value, *ty, &jet)?;
        }
        Ok(value)
    }
}

/// The martingale observables exercised by the drift tests: one per
/// transformation law, plus two vertex charges and two 2-point functions.
pub fn catalog() -> Vec<ObservableSpec> {
    [
        ObservableKind::Schramm,
        ObservableKind::Current,
        ObservableKind::Virasoro,
        ObservableKind::Vertex { alpha: 0.25 },
        ObservableKind::Vertex { alpha: 0.5 },
        ObservableKind::BiVertex {
            alpha: std::f64::consts::SQRT_2,
        },
        ObservableKind::PhiPhi,
    ]
    .into_iter()
    .map(ObservableSpec::new)
    .collect()
}

/// Look up a catalog entry, or the negative control, by name.
pub fn by_name(name: &str) -> Result<ObservableSpec> {
    catalog()
        .into_iter()
        .chain(std::iter::once(ObservableSpec::new(
            ObservableKind::NegativeControl,
        )))
        .find(|s| s.name == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown observable {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcc::hat_current;
    use crate::correlators::green_strip;
    use crate::geometry::{map, Chart};
    use crate::loewner::DrivingPath;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn at_zero(spec: &ObservableSpec, z: &[C64]) -> C64 {
        let st = LoewnerState::new(z).unwrap();
        let idx: Vec<usize> = (0..z.len()).collect();
        spec.evaluate(&st, &idx).unwrap()
    }

    #[test]
    fn catalog_has_every_law() {
        let cat = catalog();
        assert!(cat.len() >= 6);
        let names: std::collections::HashSet<_> = cat.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names.len(), cat.len());
        assert!(by_name("negative_control").is_ok());
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn schramm_at_neumann_midpoint() {
        let v = at_zero(&ObservableSpec::new(ObservableKind::Schramm), &[c(0.0, PI)]);
        assert!((v - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn initial_values_are_closed_forms() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let z = c(0.7, 1.3);
        let z2 = c(-0.4, 2.1);
        let j = at_zero(&ObservableSpec::new(ObservableKind::Current), &[z]);
        let want = c(0.0, -a / 2.0) / (z * 0.5).sinh();
        assert!((j - want).norm() < 1e-12);
        assert!((j - hat_current(z, Insertion::default()).unwrap()).norm() < 1e-12);

        let t = at_zero(&ObservableSpec::new(ObservableKind::Virasoro), &[z]);
        let s = (z * 0.5).sinh();
        assert!((t - (c(1.0 / 48.0, 0.0) + 1.0 / (s * s * 16.0))).norm() < 1e-12);

        let alpha = 0.5;
        let v = at_zero(&ObservableSpec::new(ObservableKind::Vertex { alpha }), &[z]);
        let m = 2.0 * a * (z * 0.25).tanh().arg();
        let want = (4.0 * (z.im / 2.0).tan()).powf(alpha * alpha) * (alpha * m).exp();
        assert!((v - c(want, 0.0)).norm() < 1e-12 * want);

        let pp = at_zero(&ObservableSpec::new(ObservableKind::PhiPhi), &[z, z2]);
        let m2 = 2.0 * a * (z2 * 0.25).tanh().arg();
        let want = 2.0 * green_strip(z, z2).unwrap() + m * m2;
        assert!((pp - c(want, 0.0)).norm() < 1e-12);

        let b = at_zero(
            &ObservableSpec::new(ObservableKind::BiVertex { alpha: 2f64.sqrt() }),
            &[z, z2],
        );
        let lt = |u: C64| (u * 0.25).tanh().ln();
        let want =
            ((z - z2) * 0.25).tanh().powi(2) * (c(0.0, -a) * 2f64.sqrt() * (lt(z) - lt(z2))).exp();
        assert!((b - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn stopped_when_swallowed_and_frozen_after() {
        let spec = ObservableSpec::new(ObservableKind::Schramm);
        let mut st = LoewnerState::new(&[c(0.0, 0.05), c(1.0, 1.0)]).unwrap();
        st.step(0.0, 1e-3).unwrap();
        assert_eq!(spec.evaluate(&st, &[0]), Err(Error::Stopped));
        assert!(spec.evaluate(&st, &[1]).is_ok());
        let pair = ObservableSpec::new(ObservableKind::PhiPhi);
        assert_eq!(pair.evaluate(&st, &[1, 0]), Err(Error::Stopped));
    }

    #[test]
    fn moving_chart_matches_the_half_plane_route() {
        // M_t through the strip chart equals the half-plane chart value
        // pulled back through s ∘ w_t, with s the strip → ℍ map
        let drv = DrivingPath::brownian(4.0, 1e-3, 300, 21, 0).unwrap();
        let z = c(0.9, 1.4);
        let mut st = LoewnerState::new(&[z]).unwrap();
        st.run(&drv).unwrap();
        let p = st.points[0];
        let spec = ObservableSpec::new(ObservableKind::Virasoro);
        let direct = spec.evaluate(&st, &[0]).unwrap();
        let ty = spec.types[0];
        let to_h = map(Chart::StripInf, Chart::HalfPlanePm1, p.w).unwrap();
        let in_h =
            crate::geometry::push_forward(spec.chart_value(&[p.w]).unwrap(), ty, &to_h).unwrap();
        let total = Jet::compose(&to_h, &Jet::full(p.w, p.jet[0], p.jet[1], p.jet[2]));
        let via_h = pull_back(in_h, ty, &total).unwrap();
        assert!((direct - via_h).norm() < 1e-9 * direct.norm().max(1.0));
    }
}
