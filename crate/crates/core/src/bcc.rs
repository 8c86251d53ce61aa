//! The boundary condition changing insertion `e^{⊙iaΦ⁺(p, q₋)}` and the
//! hat fields it produces. Inserting it at `p` on the Dirichlet line shifts
//! the field by the harmonic function `2a arg tanh((z-p)/4)`, so that hat
//! correlations are ordinary Gaussian correlations with shifted means.

use crate::correlators::{
    self, log_tanh, log_tanh_deriv, normalize, Atom, CorrelationRequest, FieldBase, FieldSpec, Root,
};
use crate::error::{Error, Result};
use crate::geometry::MARKED_EPS;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Insertion `e^{⊙iaΦ⁺(p, q₋)}` at strip coordinate `p` on the Dirichlet
/// line, rooted at `q₋ = -∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub p: f64,
    pub a: f64,
}

impl Default for Insertion {
    fn default() -> Self {
        Insertion {
            p: 0.0,
            a: FRAC_1_SQRT_2,
        }
    }
}

impl Insertion {
    pub fn at(p: f64) -> Insertion {
        Insertion {
            p,
            ..Insertion::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() || !self.p.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "insertion charge {} at {}",
                self.a, self.p
            )));
        }
        Ok(())
    }

    /// Strip point relative to the insertion, checked against it.
    fn offset(&self, z: C64) -> Result<C64> {
        self.validate()?;
        let z = normalize(z);
        if !crate::geometry::Chart::StripInf.contains(z) {
            return Err(Error::OutsideDomain(z));
        }
        let u = normalize(z - self.p);
        if u.norm() < MARKED_EPS {
            return Err(Error::InsertionSingularity(z));
        }
        Ok(u)
    }

    /// `ℓ(z) = Log tanh((z-p)/4)`; `ℓ(-∞) = iπ`.
    fn ell(&self, root: Root) -> Result<C64> {
        match root {
            Root::MinusInfinity => Ok(c(0.0, PI)),
            Root::Point(z) => Ok(log_tanh(self.offset(z)?)),
        }
    }
}

/// `2a arg tanh((z-p)/4)`, the mean of `Φ̂ - Φ`.
pub fn mean_shift(z: C64, ins: Insertion) -> Result<f64> {
    let u = ins.offset(z)?;
    let t = (u * 0.25).tanh();
    Ok(2.0 * ins.a * C64::new(t.re, t.im + 0.0).arg())
}

/// Mean of a Gaussian atom under the insertion, from the closed form of the
/// shift: `m = -iaℓ + iaℓ̄` for `Φ`, `-ia(ℓ(z) - ℓ(z₀))` for `Φ⁺(z, z₀)`.
pub(crate) fn atom_shift(atom: &Atom, ins: Insertion) -> Result<C64> {
    let ia = c(0.0, ins.a);
    match *atom {
        Atom::Phi { z, j, k } => {
            let u = ins.offset(z)?;
            Ok(match (j, k) {
                (0, 0) => c(mean_shift(z, ins)?, 0.0),
                (j, 0) => -ia * log_tanh_deriv(j as usize, u)?,
                (0, k) => ia * log_tanh_deriv(k as usize, u)?.conj(),
                _ => c(0.0, 0.0),
            })
        }
        Atom::Chiral { z, root } => Ok(-ia * (ins.ell(Root::Point(z))? - ins.ell(root)?)),
    }
}

/// `ĵ(z) = -(ia/2)/sinh((z-p)/2)`.
pub fn hat_current(z: C64, ins: Insertion) -> Result<C64> {
    let u = ins.offset(z)?;
    Ok(c(0.0, -ins.a / 2.0) / (u * 0.5).sinh())
}

/// Closed-form hat one-point functions in the strip chart. Other field
/// strings go through [`hat_correlate`].
pub fn hat_expectation(spec: FieldSpec, z: C64, ins: Insertion) -> Result<C64> {
    if spec.dz + spec.dzbar > 0 {
        return hat_correlate(&CorrelationRequest::strip(vec![(spec, z)]).with_insertion(ins));
    }
    let u = ins.offset(z)?;
    let a = ins.a;
    match spec.base {
        FieldBase::Phi => Ok(c(mean_shift(z, ins)?, 0.0)),
        FieldBase::J => hat_current(z, ins),
        FieldBase::Jbar => Ok(hat_current(z, ins)?.conj()),
        FieldBase::T => {
            let s = (u * 0.5).sinh();
            Ok(c(1.0 / 48.0, 0.0) + 1.0 / (s * s * 16.0))
        }
        FieldBase::Vertex(alpha) => {
            if z.im <= 0.0 || z.im >= PI {
                return Err(Error::Unsupported(
                    "non-chiral vertex fields on the boundary".into(),
                ));
            }
            let log_c = (4.0 * (z.im / 2.0).tan()).ln();
            Ok((alpha * alpha * log_c + alpha * mean_shift(z, ins)?).exp())
        }
        FieldBase::BiVertex { alpha, root } => {
            let u0 = ins.offset(root)?;
            if (u - u0).norm() < MARKED_EPS {
                return Err(Error::DiagonalSingularity(z, root));
            }
            let lt = log_tanh(u) - log_tanh(u0);
            let pre = (((z - root) * 0.25).tanh().ln() * alpha * alpha).exp();
            Ok(pre * (c(0.0, -a) * alpha * lt).exp())
        }
        FieldBase::PhiPlus(_) | FieldBase::RootedVertex(_) => {
            hat_correlate(&CorrelationRequest::strip(vec![(spec, z)]).with_insertion(ins))
        }
    }
}

/// Hat correlation through the shift rules `𝒳 ↦ 𝒳̂`: every Gaussian atom
/// gets the closed-form mean shift and every vertex factor `e^{⊙αY}` the
/// factor `e^{α m_Y}`. Independent of the vertex route in
/// [`correlators::correlate`].
pub fn hat_correlate(req: &CorrelationRequest) -> Result<C64> {
    let ins = req.insertion.unwrap_or_default();
    ins.validate()?;
    let fields = correlators::prepare(&CorrelationRequest {
        insertion: Some(ins),
        ..req.clone()
    })?;
    let shift = move |atom: &Atom| atom_shift(atom, ins);
    correlators::gaussian_sum(&fields, &[], Some(&shift))
}

/// Relative residual between the vertex ratio route and the mean shift
/// route for one request.
pub fn hat_consistency_check(req: &CorrelationRequest) -> Result<f64> {
    let ins = req.insertion.unwrap_or_default();
    let req = CorrelationRequest {
        insertion: Some(ins),
        ..req.clone()
    };
    let a = correlators::correlate(&req)?;
    let b = hat_correlate(&req)?;
    Ok(crate::calculus::relative_residual(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pull_back, push_forward, Chart};
    use proptest::prelude::*;

    fn spec(base: FieldBase) -> FieldSpec {
        FieldSpec::new(base)
    }

    fn grid() -> Vec<C64> {
        let mut g = Vec::new();
        for &x in &[-3.0, -1.2, -0.3, 0.4, 2.5] {
            for &y in &[0.3, 1.1, 2.0, 2.9] {
                g.push(c(x, y));
            }
        }
        g
    }

    #[test]
    fn mean_shift_examples() {
        let ins = Insertion::default();
        let a = ins.a;
        assert!((mean_shift(c(0.0, PI), ins).unwrap() - a * PI).abs() < 1e-14);
        assert_eq!(mean_shift(c(1.3, 0.0), ins).unwrap(), 0.0);
        assert!((mean_shift(c(-1.3, 0.0), ins).unwrap() - 2.0 * a * PI).abs() < 1e-14);
        assert!(matches!(
            mean_shift(c(0.0, 0.0), ins),
            Err(Error::InsertionSingularity(_))
        ));
    }

    #[test]
    fn mean_shift_jumps_across_the_insertion() {
        let ins = Insertion::at(0.7);
        let jump = mean_shift(c(0.7 - 1e-3, 0.0), ins).unwrap()
            - mean_shift(c(0.7 + 1e-3, 0.0), ins).unwrap();
        let want = 2.0 * ins.a * PI;
        assert!((jump - want).abs() < 1e-4 * want);
    }

    #[test]
    fn mean_shift_is_harmonic() {
        let ins = Insertion::default();
        let h = 2e-3;
        for z in grid() {
            let m = |d: C64| mean_shift(z + d, ins).unwrap();
            // fourth order five point second differences in x and y
            let second = |e: C64| {
                -m(e * 2.0) + m(e) * 16.0 - m(c(0.0, 0.0)) * 30.0 + m(-e) * 16.0 - m(-e * 2.0)
            };
            let lap = (second(c(h, 0.0)) + second(c(0.0, h))) / (12.0 * h * h);
            assert!(lap.abs() < 1e-6, "{z}: {lap}");
        }
    }

    #[test]
    fn hat_examples() {
        let ins = Insertion::default();
        let ipi = c(0.0, PI);
        let j = hat_expectation(spec(FieldBase::J), ipi, ins).unwrap();
        assert!((j - c(-0.5 * FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let t = hat_expectation(spec(FieldBase::T), ipi, ins).unwrap();
        assert!((t - c(-1.0 / 24.0, 0.0)).norm() < 1e-15);
        let z = c(0.4, 1.3);
        let p = hat_expectation(spec(FieldBase::Phi), z, ins).unwrap();
        assert_eq!(p.re, mean_shift(z, ins).unwrap());
    }

    #[test]
    fn stress_tensor_is_shifted_wick_square() {
        let ins = Insertion::default();
        for z in grid() {
            let j = hat_current(z, ins).unwrap();
            let t = hat_expectation(spec(FieldBase::T), z, ins).unwrap();
            assert!((t - (c(1.0 / 48.0, 0.0) - j * j * 0.5)).norm() < 1e-10);
        }
    }

    #[test]
    fn routes_agree_on_simple_strings() {
        for z in grid() {
            let one = CorrelationRequest::strip(vec![]);
            assert!(hat_consistency_check(&one).unwrap() < 1e-14);
            for base in [FieldBase::Phi, FieldBase::J] {
                let req = CorrelationRequest::strip(vec![(spec(base), z)]);
                assert!(
                    hat_consistency_check(&req).unwrap() < 1e-10,
                    "{base:?} at {z}"
                );
                let closed = hat_expectation(spec(base), z, Insertion::default()).unwrap();
                let ratio =
                    correlators::correlate(&req.clone().with_insertion(Insertion::default()))
                        .unwrap();
                assert!((closed - ratio).norm() < 1e-10 * closed.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn routes_agree_on_composite_strings() {
        let ins = Insertion::at(-0.4);
        let z = [c(0.3, 1.0), c(-1.1, 2.2), c(1.7, 0.6)];
        let cases = vec![
            vec![(spec(FieldBase::T), z[0]), (spec(FieldBase::Phi), z[1])],
            vec![
                (spec(FieldBase::J).derivs(1, 0), z[0]),
                (spec(FieldBase::Jbar), z[2]),
            ],
            vec![
                (spec(FieldBase::Vertex(c(0.5, 0.0))), z[0]),
                (spec(FieldBase::Phi).derivs(0, 2), z[1]),
            ],
            vec![
                (
                    spec(FieldBase::BiVertex {
                        alpha: c(0.8, 0.1),
                        root: z[1],
                    }),
                    z[0],
                ),
                (spec(FieldBase::J), z[2]),
            ],
            vec![
                (spec(FieldBase::RootedVertex(c(0.0, 0.7))), z[0]),
                (spec(FieldBase::T), z[2]),
            ],
        ];
        for fields in cases {
            let req = CorrelationRequest::strip(fields.clone()).with_insertion(ins);
            let r = hat_consistency_check(&req).unwrap();
            assert!(r < 1e-10, "{fields:?}: {r}");
        }
    }

    #[test]
    fn closed_forms_match_ratio_route_for_vertices() {
        let ins = Insertion::default();
        let (z, z0) = (c(0.6, 1.4), c(-0.9, 2.3));
        for s in [
            spec(FieldBase::T),
            spec(FieldBase::Vertex(c(0.5, 0.0))),
            spec(FieldBase::BiVertex {
                alpha: c(2f64.sqrt(), 0.0),
                root: z0,
            }),
        ] {
            let closed = hat_expectation(s, z, ins).unwrap();
            let ratio = correlators::correlate(
                &CorrelationRequest::strip(vec![(s, z)]).with_insertion(ins),
            )
            .unwrap();
            assert!((closed - ratio).norm() < 1e-12 * closed.norm(), "{s:?}");
        }
    }

    #[test]
    fn hat_one_point_functions_survive_a_chart_round_trip() {
        let ins = Insertion::default();
        for z in grid() {
            let h = Chart::HalfPlanePm1.from_strip(z).unwrap();
            for s in [
                spec(FieldBase::Phi),
                spec(FieldBase::J),
                spec(FieldBase::T),
                spec(FieldBase::Vertex(c(0.3, 0.0))),
            ] {
                let ty = s.conformal_type().unwrap();
                let v = hat_expectation(s, z, ins).unwrap();
                // strip → (ℍ,-1,1) is `h`; the value in ℍ at h(z) is the push forward
                let in_h = push_forward(v, ty, &h).unwrap();
                let back = pull_back(in_h, ty, &h).unwrap();
                assert!((back - v).norm() < 1e-10 * v.norm().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn routes_agree_for_phi_anywhere(x in -4.0..4.0f64, y in 0.05..3.1f64, p in -1.0..1.0f64) {
            let z = c(x, y);
            let req = CorrelationRequest::strip(vec![(spec(FieldBase::Phi), z)]).with_insertion(Insertion::at(p));
            prop_assert!(hat_consistency_check(&req).unwrap() < 1e-10);
        }
    }
}
