//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --release --test acceptance`.

use dipolar_cft::calculus::circle_derivative;
use dipolar_cft::loewner::{trace_curve, DrivingPath, LoewnerState};
use dipolar_cft::montecarlo::{
    drift_test, lattice_green_check, run_ensemble, schramm_estimate, to_c64, EnsembleConfig,
    DRIFT_POINTS, SCHRAMM_POINTS,
};
use dipolar_cft::observables::catalog;
use dipolar_cft::virasoro_checks::{kernel_suite, identity_suite, ope_suite, IdentityReport};
use dipolar_cft::{Result, C64};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

type Criterion = (&'static str, f64, fn() -> Result<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn reports(rs: Vec<IdentityReport>) -> Outcome {
    let failed: Vec<String> = rs.iter().filter(|r| !r.pass).map(|r| r.summary()).collect();
    let worst = rs
        .iter()
        .map(|r| r.max_residual / r.tolerance)
        .fold(0.0, f64::max);
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks, worst residual/tolerance {worst:.2e}", rs.len())
        } else {
            failed.join("; ")
        },
    }
}

fn kernels() -> Result<Outcome> {
    Ok(reports(kernel_suite()?))
}

fn ope() -> Result<Outcome> {
    Ok(reports(ope_suite()?))
}

fn identities() -> Result<Outcome> {
    Ok(reports(identity_suite()?))
}

fn loewner_oracle() -> Result<Outcome> {
    // frozen driving: cosh(w_t/2) = e^{t/2} cosh(z/2)
    let pts = [
        C64::new(1.0, 1.0),
        C64::new(-0.7, 2.5),
        C64::new(3.0, 0.4),
        C64::new(-2.0, PI),
        C64::new(1.5, 0.0),
    ];
    let mut st = LoewnerState::new(&pts)?;
    for _ in 0..10_000 {
        st.step(0.0, 1e-3)?;
    }
    let cosh_err = st
        .points
        .iter()
        .map(|p| {
            let want = (p.z0 * 0.5).cosh() * (st.t / 2.0).exp();
            ((p.w * 0.5).cosh() - want).norm() / want.norm()
        })
        .fold(0.0, f64::max);

    // jets against derivatives of the composed map on a circle
    let drv = DrivingPath::brownian(4.0, 1e-3, 1000, 11, 0)?;
    let flow = |z: C64| {
        let mut s = LoewnerState::new(&[z]).expect("inside the strip");
        s.run(&drv).expect("flow runs");
        s.points[0].w
    };
    let mut jet_err: f64 = 0.0;
    for z in [C64::new(1.0, 1.5), C64::new(-0.8, 2.4), C64::new(2.0, 0.7)] {
        let mut s = LoewnerState::new(&[z])?;
        s.run(&drv)?;
        let p = s.points[0];
        if !p.is_alive() {
            return Ok(Outcome {
                pass: false,
                detail: format!("probe {z} swallowed"),
            });
        }
        for k in 0..3 {
            let d = circle_derivative(flow, z, k as u32 + 1, 0.05, 48);
            jet_err = jet_err.max((d - p.jet[k]).norm() / p.jet[k].norm().max(1e-300));
        }
    }

    let drv0 = DrivingPath::brownian(0.0, 1e-3, 1000, 1, 0)?;
    let curve = trace_curve(&drv0, 1.0, 1)?;
    let re_max = curve.tips.iter().map(|z| z.re.abs()).fold(0.0, f64::max);

    Ok(Outcome {
        pass: cosh_err < 1e-12 && jet_err < 1e-6 && re_max < 1e-8,
        detail: format!("cosh identity {cosh_err:.2e}, jet vs circle derivative {jet_err:.2e}, max |Re γ| {re_max:.2e}"),
    })
}

fn schramm() -> Result<Outcome> {
    let cfg = EnsembleConfig {
        n_paths: 2000,
        dt: 1e-3,
        horizon: 8.0,
        kappa: 4.0,
        ..EnsembleConfig::default()
    };
    let points: Vec<C64> = SCHRAMM_POINTS.iter().map(|&p| to_c64(p)).collect();
    let rep = schramm_estimate(&cfg, &points)?;
    let centre = rep
        .rows
        .iter()
        .find(|r| r.point == [0.0, PI])
        .map(|r| (r.exact - 0.5).abs() < 1e-14)
        .unwrap_or(false);
    let undecided = rep
        .rows
        .iter()
        .map(|r| r.undecided_fraction)
        .fold(0.0, f64::max);
    let max_z = rep.max_abs_z();
    Ok(Outcome {
        pass: rep.rows.len() == 10 && centre && max_z <= 3.0 && undecided < 0.05,
        detail: format!(
            "{} points, max |z| {max_z:.3}, max undecided {:.2}%",
            rep.rows.len(),
            100.0 * undecided
        ),
    })
}

fn drift() -> Result<Outcome> {
    let pairs = [(0.0, 0.5), (0.5, 1.0)];
    let cfg = EnsembleConfig {
        n_paths: 4000,
        horizon: 1.0,
        checkpoints: vec![0.0, 0.5, 1.0],
        points: DRIFT_POINTS.to_vec(),
        observables: catalog().into_iter().map(|s| s.name).collect(),
        ..EnsembleConfig::default()
    };
    let rep = drift_test(&run_ensemble(&cfg)?, &pairs)?;
    let control_cfg = EnsembleConfig {
        observables: vec!["negative_control".into()],
        ..cfg.clone()
    };
    let control = drift_test(&run_ensemble(&control_cfg)?, &pairs)?;
    let control_z = control.max_abs_z();
    Ok(Outcome {
        pass: rep.all_pass() && rep.n_tested > 0 && rep.n_inconclusive == 0 && control_z > 5.0,
        detail: format!(
            "{} catalog observables, {} cells, {} failed, max |z| {:.3}; negative control max |z| {control_z:.2}",
            cfg.observables.len(),
            rep.n_tested,
            rep.n_failed,
            rep.max_abs_z()
        ),
    })
}

fn lattice() -> Result<Outcome> {
    let l = 6.0 * PI;
    let coarse = lattice_green_check(1.0 / 32.0, l)?;
    let fine = lattice_green_check(1.0 / 64.0, l)?;
    let ratio = fine.max_rel_error / coarse.max_rel_error;
    Ok(Outcome {
        pass: fine.max_rel_error <= 0.05 && ratio < 0.7,
        detail: format!(
            "relative error {:.3e} at mesh 1/32, {:.3e} at 1/64, ratio {ratio:.3}",
            coarse.max_rel_error, fine.max_rel_error
        ),
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 kernel and boundary suite", 1.0, kernels),
        ("2 OPE and Virasoro suite", 5.0, ope),
        ("3 Ward, mode and BPZ-Cardy identities", 30.0, identities),
        ("4 Loewner integrator oracle", 5.0, loewner_oracle),
        ("5 Schramm's formula", 600.0, schramm),
        ("6 martingale drift", 900.0, drift),
        ("7 lattice Green's function", 60.0, lattice),
    ];
    let mut all = true;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let secs = start.elapsed().as_secs_f64();
        all &= out.pass;
        println!(
            "{} criterion {name}: {} [{secs:.1} s, budget {budget} s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
