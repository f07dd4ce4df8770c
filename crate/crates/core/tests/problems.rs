use std::f64::consts::PI;

use wso_dirk::integrator::{integrate, NewtonSettings, Observable, OdeSystem};
use wso_dirk::problems::*;
use wso_dirk::tableau::{registry, registry_get};

fn fd_jacobian_defect(sys: &dyn OdeSystem, t: f64, u: &[f64]) -> f64 {
    let n = sys.dim();
    let jac = sys.jacobian(t, u).to_dense();
    let mut worst: f64 = 0.0;
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let h = 1e-6 * u[k].abs().max(1.0);
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[k] += h;
        um[k] -= h;
        sys.rhs(t, &up, &mut fp);
        sys.rhs(t, &um, &mut fm);
        for i in 0..n {
            let d = (fp[i] - fm[i]) / (2.0 * h);
            worst = worst.max((d - jac[(i, k)]).abs() / (1.0 + jac[(i, k)].abs()));
        }
    }
    worst
}

#[test]
fn phi_derivatives_cycle() {
    let t = 0.37;
    assert!((phi_derivative(0, t) - (t + PI / 4.0).sin()).abs() < 1e-15);
    assert!((phi_derivative(1, t) - (t + PI / 4.0).cos()).abs() < 1e-15);
    assert!((phi_derivative(2, t) + (t + PI / 4.0).sin()).abs() < 1e-15);
    assert!((phi_derivative(5, t) - phi_derivative(1, t)).abs() < 1e-14);
}

#[test]
fn prothero_robinson_exact_solution_satisfies_ode() {
    let sys = prothero_robinson(-1e4).unwrap();
    let mut out = [0.0];
    for t in [0.0, 0.4, 3.3] {
        sys.rhs(t, &sys.exact(t).unwrap(), &mut out);
        assert!((out[0] - phi_derivative(1, t)).abs() < 1e-10);
    }
    assert!(prothero_robinson(1.0).is_err());
    assert_eq!(sys.initial_state(0.0), vec![(PI / 4.0).sin()]);
}

#[test]
fn grid_spec_validation() {
    assert!(GridSpec::new(15, Boundary::Dirichlet).is_err());
    let g = GridSpec::new(16, Boundary::Neumann).unwrap();
    assert!((g.h() - 1.0 / 16.0).abs() < 1e-16);
    assert!((g.node(16) - 1.0).abs() < 1e-16);
    assert!(schrodinger_mol(2.0 * PI, 5.0, g).is_err());
    assert!(burgers_mol(0.1, GridSpec::new(16, Boundary::Dirichlet).unwrap()).is_err());
}

#[test]
fn schrodinger_semidiscretization_is_consistent() {
    let sys = schrodinger_mol(2.0 * PI, 5.0, GridSpec::new(400, Boundary::Dirichlet).unwrap()).unwrap();
    let t = 0.3;
    let u = sys.exact(t).unwrap();
    let mut f = vec![0.0; sys.dim()];
    sys.rhs(t, &u, &mut f);
    // u_t = -iω u
    let mut worst: f64 = 0.0;
    for (i, p) in u.chunks_exact(2).enumerate() {
        let (re, im) = (sys.omega * p[1], -sys.omega * p[0]);
        worst = worst.max((f[2 * i] - re).abs()).max((f[2 * i + 1] - im).abs());
    }
    assert!(worst < 1e-6, "{worst}");
    // affine: J u = f(u) - f(0)
    let jac = sys.jacobian(t, &u);
    let ju = jac.mul_vec(&u);
    let mut f0 = vec![0.0; sys.dim()];
    sys.rhs(t, &vec![0.0; sys.dim()], &mut f0);
    let defect = ju.iter().zip(f.iter().zip(&f0)).map(|(a, (b, c))| (a - (b - c)).abs()).fold(0.0, f64::max);
    assert!(defect < 1e-8 * jac.inf_norm(), "{defect}");
    for obs in [Observable::U, Observable::Ux, Observable::Uxx] {
        assert!(sys.observable_error(obs, t, &u, &u).unwrap() < 1e-14);
    }
}

#[test]
fn burgers_semidiscretization_is_consistent() {
    let sys = burgers_mol(0.1, GridSpec::new(256, Boundary::Neumann).unwrap()).unwrap();
    let t = 0.45;
    let u = sys.exact(t).unwrap();
    let mut f = vec![0.0; sys.dim()];
    sys.rhs(t, &u, &mut f);
    let h = sys.grid.h();
    let worst = (0..=256)
        .map(|i| (f[i] - Burgers::exact_ut(i as f64 * h, t)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
    assert!(fd_jacobian_defect(&sys, t, &u) < 1e-6);
}

#[test]
fn burgers_spatial_error_decays() {
    let err = |n: usize| {
        let sys = burgers_mol(0.1, GridSpec::new(n, Boundary::Neumann).unwrap()).unwrap();
        let u = sys.exact(0.2).unwrap();
        let mut f = vec![0.0; sys.dim()];
        sys.rhs(0.2, &u, &mut f);
        (0..=n)
            .map(|i| (f[i] - Burgers::exact_ut(i as f64 / n as f64, 0.2)).abs())
            .fold(0.0, f64::max)
    };
    let rate = (err(128) / err(256)).log2();
    assert!(rate > 3.5, "{rate}");
}

#[test]
fn burgers_diffusion_operator_is_stable() {
    // at u = 0 the Jacobian is ν D2 plus -h(t) on the two wall diagonals,
    // since the wall slope in u u_x is the prescribed datum
    let n = 32;
    let sys = burgers_mol(0.1, GridSpec::new(n, Boundary::Neumann).unwrap()).unwrap();
    let j = sys.jacobian(0.0, &vec![0.0; sys.dim()]);
    let j1 = j.mul_vec(&vec![1.0; n + 1]);
    let mut jac = j.to_dense();
    for (i, v) in j1.iter().enumerate() {
        let expect = match i {
            0 => -Burgers::exact_ux(0.0, 0.0),
            _ if i == n => -Burgers::exact_ux(1.0, 0.0),
            _ => 0.0,
        };
        assert!((v - expect).abs() < 1e-9 * (1.0 + expect.abs()), "row {i}: {v} vs {expect}");
    }
    jac[(0, 0)] += Burgers::exact_ux(0.0, 0.0);
    jac[(n, n)] += Burgers::exact_ux(1.0, 0.0);
    let eig = jac.complex_eigenvalues();
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    assert!(max_re < 1e-8, "{max_re}");
}

#[test]
fn vdp_jacobian_and_reference() {
    let sys = van_der_pol(500.0).unwrap();
    assert!(fd_jacobian_defect(&sys, 0.0, &[1.7, -0.4]) < 1e-6);
    assert!(van_der_pol(-1.0).is_err());

    let coarse = VdpReferenceParams {
        mu: 5.0,
        dt: 1e-3,
        t_end: 1.0,
        checkpoint_every: 250,
    };
    let fine = VdpReferenceParams { dt: 5e-4, checkpoint_every: 500, ..coarse };
    let a = VdpReference::generate(coarse).unwrap();
    let b = VdpReference::generate(fine).unwrap();
    assert_eq!(a.rows.len(), 5);
    let end_a = a.at(1.0).unwrap();
    let end_b = b.at(1.0).unwrap();
    // RK4: halving dt reduces the error ~16x, so the difference bounds it
    assert!((end_a[0] - end_b[0]).abs() < 1e-9);
    assert!(a.at(0.3).is_none());

    let back = VdpReference::from_text(&a.to_text()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn vdp_reference_cache() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub").join("ref.txt");
    let params = VdpReferenceParams {
        mu: 2.0,
        dt: 1e-3,
        t_end: 0.5,
        checkpoint_every: 100,
    };
    let first = VdpReference::load_or_generate(&path, params).unwrap();
    assert!(path.exists());
    let again = VdpReference::load_or_generate(&path, params).unwrap();
    assert_eq!(first, again);
    let other = VdpReferenceParams { mu: 3.0, ..params };
    let regenerated = VdpReference::load_or_generate(&path, other).unwrap();
    assert_eq!(regenerated.params, other);
    assert!(VdpReference::from_text("garbage").is_err());
}

#[test]
fn recursion_oracle_matches_integrator() {
    for lambda in [-1.0, -1e2, -1e4] {
        let sys = prothero_robinson(lambda).unwrap();
        for e in registry() {
            let t = &e.tableau;
            let dt = 0.01;
            let run = integrate(t, &sys, 0.0, &sys.initial_state(0.0), 1.0, dt, NewtonSettings::default()).unwrap();
            let err = run.state[0] - sys.exact(1.0).unwrap()[0];
            let oracle = RecursionOracle::new(t.clone(), lambda, RecursionOracle::DEFAULT_JMAX)
                .unwrap()
                .run(0.0, dt, 100)
                .unwrap();
            let predicted = *oracle.errors.last().unwrap();
            let slack = 10.0 * oracle.tail_bound + 100.0 * f64::EPSILON;
            assert!((err - predicted).abs() <= slack, "{} λ={lambda}: {err:e} vs {predicted:e}", t.name());
        }
    }
}

#[test]
fn oracle_rejects_short_series() {
    assert!(RecursionOracle::new(registry_get("wso3-p3").unwrap(), -1.0, 1).is_err());
}

#[test]
fn burgers_rhs_uses_the_manufactured_forcing() {
    let sys = burgers_mol(0.1, GridSpec::new(64, Boundary::Neumann).unwrap()).unwrap();
    let t = 0.8;
    let u = vec![0.0; sys.dim()];
    let mut f = vec![0.0; sys.dim()];
    sys.rhs(t, &u, &mut f);
    // with u = 0 only ν u_xx (wall slope terms) and the forcing remain
    for i in 1..64 {
        let x = i as f64 / 64.0;
        assert!((f[i] - sys.forcing(x, t)).abs() < 1e-10 * (1.0 + sys.forcing(x, t).abs()));
    }
}
