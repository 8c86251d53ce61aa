use dipolar_cft::correlators::green_strip;
use dipolar_cft::loewner::{DrivingPath, LoewnerState, PointStatus};
use dipolar_cft::montecarlo::schramm_formula;
use dipolar_cft::observables::{ObservableKind, ObservableSpec};
use dipolar_cft::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn interior() -> impl Strategy<Value = C64> {
    (-4.0..4.0f64, 0.05..(PI - 0.05)).prop_map(|(x, y)| C64::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flow_keeps_points_in_the_closed_strip(z in interior(), seed in 0u64..1000) {
        let drv = DrivingPath::brownian(4.0, 1e-3, 400, seed, 0).unwrap();
        let mut st = LoewnerState::new(&[z, C64::new(z.re, 0.0), C64::new(z.re, PI)]).unwrap();
        st.run(&drv).unwrap();
        for p in &st.points {
            if p.is_alive() {
                prop_assert!(p.w.im >= 0.0 && p.w.im <= PI, "{}", p.w);
                prop_assert!(p.jet[0].norm() > 0.0);
            }
        }
        // boundary lines are preserved exactly
        if st.points[1].is_alive() {
            prop_assert_eq!(st.points[1].w.im, 0.0);
        }
        prop_assert_eq!(st.points[2].w.im, PI);
    }

    #[test]
    fn swallow_times_are_in_range(z in interior(), seed in 0u64..1000) {
        let drv = DrivingPath::brownian(4.0, 1e-3, 400, seed, 3).unwrap();
        let mut st = LoewnerState::new(&[z]).unwrap();
        st.run(&drv).unwrap();
        if let PointStatus::Swallowed { time, .. } = st.points[0].status {
            prop_assert!(time > 0.0 && time <= st.t + 1e-12);
        }
    }

    #[test]
    fn schramm_values_are_probabilities(z in interior()) {
        let p = schramm_formula(z);
        prop_assert!((0.0..=1.0).contains(&p));
        let spec = ObservableSpec::new(ObservableKind::Schramm);
        let st = LoewnerState::new(&[z]).unwrap();
        let v = spec.evaluate(&st, &[0]).unwrap();
        prop_assert!((v.re - p).abs() < 1e-12 && v.im == 0.0);
    }

    #[test]
    fn green_is_positive_and_symmetric(z in interior(), w in interior()) {
        prop_assume!((z - w).norm() > 1e-3);
        let g = green_strip(z, w).unwrap();
        prop_assert!(g > 0.0);
        prop_assert_eq!(g, green_strip(w, z).unwrap());
    }
}
