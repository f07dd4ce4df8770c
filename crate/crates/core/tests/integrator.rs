use nalgebra::{DMatrix, DVector};
use wso_dirk::integrator::*;
use wso_dirk::linalg::Matrix;
use wso_dirk::problems::{burgers_mol, prothero_robinson, Boundary, Burgers, GridSpec, LinearDecay};
use wso_dirk::tableau::{registry, registry_get};
use wso_dirk::{ButcherTableau, Error};

/// `u' = M u + g(t)` with `g(t) = (sin t, 1, t^2)`.
struct Affine3 {
    m: DMatrix<f64>,
}

impl Affine3 {
    fn new() -> Self {
        Self {
            m: DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.5, -30.0, 4.0, 0.0, 2.0, -500.0]),
        }
    }

    fn g(t: f64) -> DVector<f64> {
        DVector::from_vec(vec![t.sin(), 1.0, t * t])
    }
}

impl OdeSystem for Affine3 {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let v = &self.m * DVector::from_column_slice(u) + Self::g(t);
        out.copy_from_slice(v.as_slice());
    }
    fn jacobian(&self, _t: f64, _u: &[f64]) -> Matrix {
        Matrix::Dense(self.m.clone())
    }
    fn linearity(&self) -> Linearity {
        Linearity::Affine
    }
    fn initial_state(&self, _t0: f64) -> Vec<f64> {
        vec![1.0, -1.0, 0.5]
    }
    fn describe(&self) -> String {
        "affine3".into()
    }
}

/// One DIRK step for the affine system by direct stage solves.
fn affine_step_oracle(t: &ButcherTableau, sys: &Affine3, tn: f64, un: &[f64], dt: f64) -> Vec<f64> {
    let s = t.stages();
    let un = DVector::from_column_slice(un);
    let mut k: Vec<DVector<f64>> = vec![];
    for i in 0..s {
        let ti = tn + t.c()[i] * dt;
        let mut rhs = un.clone();
        for (j, kj) in k.iter().enumerate() {
            rhs += kj * (dt * t.a()[(i, j)]);
        }
        let aii = dt * t.a()[(i, i)];
        rhs += Affine3::g(ti) * aii;
        let lhs = DMatrix::identity(3, 3) - &sys.m * aii;
        let ui = lhs.lu().solve(&rhs).unwrap();
        k.push(&sys.m * &ui + Affine3::g(ti));
    }
    let mut out = un;
    for (j, kj) in k.iter().enumerate() {
        out += kj * (dt * t.b()[j]);
    }
    out.as_slice().to_vec()
}

/// Logistic equation `u' = u (1 - u)`.
struct Logistic;

impl OdeSystem for Logistic {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, u: &[f64], out: &mut [f64]) {
        out[0] = u[0] * (1.0 - u[0]);
    }
    fn jacobian(&self, _t: f64, u: &[f64]) -> Matrix {
        Matrix::Dense(DMatrix::from_element(1, 1, 1.0 - 2.0 * u[0]))
    }
    fn initial_state(&self, _t0: f64) -> Vec<f64> {
        vec![0.1]
    }
    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some(vec![0.1 / (0.1 + 0.9 * (-t).exp())])
    }
    fn describe(&self) -> String {
        "logistic".into()
    }
}

#[test]
fn backward_euler_decay() {
    let be = registry_get("backward-euler").unwrap();
    let sys = LinearDecay { lambda: -1.0 };
    let run = integrate(&be, &sys, 0.0, &[1.0], 1.0, 1.0, NewtonSettings::default()).unwrap();
    assert_eq!(run.steps, 1);
    assert!((run.state[0] - 0.5).abs() < 1e-15);
}

#[test]
fn affine_steps_match_direct_solves_in_one_iteration() {
    let sys = Affine3::new();
    for e in registry() {
        let t = &e.tableau;
        let u0 = sys.initial_state(0.0);
        let mut stepper = DirkStepper::new(t, &sys, NewtonSettings::default()).unwrap();
        let mut u = u0.clone();
        let mut o = u0;
        for n in 0..5 {
            let tn = 0.07 * f64::from(n);
            u = stepper.step(tn, &u, 0.07).unwrap();
            o = affine_step_oracle(t, &sys, tn, &o, 0.07);
            for r in stepper.stage_reports().iter().filter(|r| r.iterations > 0) {
                assert_eq!(r.iterations, 1, "{}", t.name());
            }
        }
        for (x, y) in u.iter().zip(&o) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()), "{}: {x} vs {y}", t.name());
        }
    }
}

#[test]
fn stiffly_accurate_output_equals_quadrature() {
    let sys = Logistic;
    let t = registry_get("wso3-p4").unwrap();
    let mut stepper = DirkStepper::new(&t, &sys, NewtonSettings::default()).unwrap();
    let u = stepper.step(0.0, &[0.1], 0.2).unwrap();
    let q = stepper.quadrature_output().unwrap();
    assert!((u[0] - q[0]).abs() < 1e-12);
    assert_eq!(stepper.stage_values().len(), t.stages());
}

#[test]
fn nonlinear_convergence_rates() {
    let sys = Logistic;
    for (name, p) in [("wso3-p3", 3.0), ("wso3-p4", 4.0), ("wso2-p3", 3.0)] {
        let t = registry_get(name).unwrap();
        let err = |dt: f64| {
            let run = integrate(&t, &sys, 0.0, &[0.1], 2.0, dt, NewtonSettings::default()).unwrap();
            (run.state[0] - sys.exact(2.0).unwrap()[0]).abs()
        };
        let rate = (err(0.1) / err(0.05)).log2();
        assert!((rate - p).abs() < 0.35, "{name}: {rate}");
    }
}

#[test]
fn newton_failure_is_wrapped_with_step_context() {
    let t = registry_get("wso3-p3").unwrap();
    let newton = NewtonSettings {
        max_iters: 1,
        ..NewtonSettings::default()
    };
    match integrate(&t, &Logistic, 0.0, &[0.1], 1.0, 0.5, newton) {
        Err(Error::Step { step, time, source }) => {
            assert_eq!(step, 1);
            assert_eq!(time, 0.0);
            assert!(matches!(*source, Error::NewtonDivergence { iterations: 1, .. }));
        }
        other => panic!("expected a step error, got {other:?}"),
    }
}

#[test]
fn step_planning() {
    assert_eq!(step_plan(0.0, 1.0, 0.1).unwrap(), (10, None));
    let (n, last) = step_plan(0.0, 1.0, 0.3).unwrap();
    assert_eq!(n, 3);
    assert!((last.unwrap() - 0.1).abs() < 1e-15);
    assert!(step_plan(0.0, 1.0, 0.0).is_err());
    assert!(step_plan(0.0, 1.0, -0.1).is_err());
    assert!(step_plan(1.0, 0.0, 0.1).is_err());
}

#[test]
fn shortened_last_step_lands_on_t_end() {
    let t = registry_get("wso3-p3").unwrap();
    let sys = LinearDecay { lambda: -1.0 };
    let run = integrate_trajectory(&t, &sys, 0.0, &[1.0], 1.0, 0.3, NewtonSettings::default()).unwrap();
    assert_eq!(run.steps, 4);
    assert!(run.shortened_last_step.is_some());
    let traj = run.trajectory.unwrap();
    assert_eq!(traj.len(), 5);
    assert!((traj.last().unwrap().0 - 1.0).abs() < 1e-15);
    let mut u = vec![1.0];
    for k in 0..3 {
        u = dirk_step(&t, &sys, 0.3 * k as f64, &u, 0.3, NewtonSettings::default()).unwrap();
    }
    let u = dirk_step(&t, &sys, 0.9, &u, run.shortened_last_step.unwrap(), NewtonSettings::default()).unwrap();
    assert!((run.state[0] - u[0]).abs() < 1e-15);
    assert!((run.state[0] - (-1.0f64).exp()).abs() < 1e-3);
}

#[test]
fn rejects_non_dirk_and_bad_settings() {
    let r = 3f64.sqrt() / 6.0;
    let gauss = ButcherTableau::from_rows(&[&[0.25, 0.25 - r], &[0.25 + r, 0.25]], &[0.5, 0.5], "gauss2").unwrap();
    let sys = LinearDecay { lambda: -1.0 };
    assert!(DirkStepper::new(&gauss, &sys, NewtonSettings::default()).is_err());
    let be = registry_get("backward-euler").unwrap();
    let bad = NewtonSettings {
        max_iters: 0,
        ..NewtonSettings::default()
    };
    assert!(integrate(&be, &sys, 0.0, &[1.0], 1.0, 0.5, bad).is_err());
    assert!(dirk_step(&be, &sys, 0.0, &[1.0, 2.0], 0.5, NewtonSettings::default()).is_err());
}

#[test]
fn prothero_robinson_is_tracked_in_the_stiff_regime() {
    let t = registry_get("wso3-p3").unwrap();
    let sys = prothero_robinson(-1e4).unwrap();
    let run = integrate(&t, &sys, 0.0, &sys.initial_state(0.0), 10.0, 1e-2, NewtonSettings::default()).unwrap();
    let err = (run.state[0] - sys.exact(10.0).unwrap()[0]).abs();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn newton_converges_quadratically_on_burgers() {
    let sys = burgers_mol(Burgers::DEFAULT_NU, GridSpec::new(Burgers::DEFAULT_CELLS, Boundary::Neumann).unwrap()).unwrap();
    let t = registry_get("wso3-p3").unwrap();
    let newton = NewtonSettings {
        rel_tol: 1e-15,
        abs_tol: 1e-15,
        max_iters: 8,
    };
    let mut stepper = DirkStepper::new(&t, &sys, newton).unwrap();
    let _ = stepper.step(0.0, &sys.initial_state(0.0), 1.0 / 16.0);
    assert_eq!(stepper.stage_reports().len(), t.stages());
    // below this the residual is rounding noise of the O(1/h) operators
    let noise = 1e-10;
    for (i, r) in stepper.stage_reports().iter().enumerate() {
        let r = &r.residual_norms;
        let ratios: Vec<f64> = (1..r.len() - 1)
            .filter(|&k| r[k + 1] > noise)
            .map(|k| r[k + 1] / (r[k] * r[k]))
            .collect();
        assert!(!ratios.is_empty(), "stage {}: {r:?}", i + 1);
        assert!(ratios.iter().all(|q| *q < 1.0), "stage {}: {ratios:?}", i + 1);
    }
}
