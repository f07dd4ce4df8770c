use proptest::prelude::*;
use wso_dirk::convergence::*;
use wso_dirk::integrator::Observable;
use wso_dirk::tableau::registry_get;
use wso_dirk::{Error, Execution};

fn power_law(c: f64, p: f64, dts: &[f64]) -> Vec<(f64, Option<f64>)> {
    dts.iter().map(|dt| (*dt, Some(c * dt.powf(p)))).collect()
}

#[test]
fn fit_recovers_power_law() {
    let dts: Vec<f64> = (0..10).map(|k| 0.1 / 2f64.powi(k)).collect();
    let w = SlopeWindow::new("all", 0.0, 1.0);
    let fit = fit_slope(&power_law(3.7, 2.5, &dts), &w).unwrap();
    assert!((fit.slope - 2.5).abs() < 1e-10);
    assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-9);
    assert!(fit.residual < 1e-10);
    assert_eq!(fit.points, 10);
}

#[test]
fn fit_skips_failed_and_nonpositive_rows() {
    let mut rows = power_law(1.0, 3.0, &[0.1, 0.05, 0.025, 0.0125]);
    rows.push((0.2, None));
    rows.push((0.3, Some(0.0)));
    let fit = fit_slope(&rows, &SlopeWindow::new("w", 0.0, 1.0)).unwrap();
    assert_eq!(fit.points, 4);
    assert!((fit.slope - 3.0).abs() < 1e-10);
}

#[test]
fn underfilled_window() {
    let rows = power_law(1.0, 3.0, &[0.1, 0.05, 0.025]);
    match fit_slope(&rows, &SlopeWindow::new("w", 0.04, 1.0)) {
        Err(Error::UnderfilledWindow { found }) => assert_eq!(found, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn divisor_lists_divide_the_interval() {
    for dt in log_spaced_divisors(10.0, 1e-5, 1.0, 24) {
        let n = 10.0 / dt;
        assert!((n - n.round()).abs() < 1e-9 * n);
    }
    let h = half_octave_divisors(1.2, 16, 16384);
    assert_eq!(h.len(), 21);
    assert!((h[0] - 0.075).abs() < 1e-15 && (h[20] - 1.2 / 16384.0).abs() < 1e-18);
}

#[test]
fn study_on_linear_decay() {
    let t = registry_get("wso3-p3").unwrap();
    let mut spec = StudySpec::new(t, ProblemSpec::LinearDecay { lambda: -1.0 });
    spec.execution = Execution::Sequential;
    let seq = run_study(&spec).unwrap();
    spec.execution = Execution::Parallel;
    let par = run_study(&spec).unwrap();
    assert_eq!(seq, par);
    assert!(seq.rows.windows(2).all(|w| w[0].dt > w[1].dt));
    let slope = seq.slope("all", Observable::U).unwrap();
    assert!((slope - 3.0).abs() < 0.2, "{slope}");
}

#[test]
fn csv_round_trip() {
    let t = registry_get("wso2-p3").unwrap();
    let mut spec = StudySpec::new(t, ProblemSpec::LinearDecay { lambda: -2.0 });
    spec.dt_list = vec![0.25, 0.125, 0.0625, 0.03125];
    let table = run_study(&spec).unwrap();
    let mut buf = vec![];
    emit_csv(&table, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("# scheme = wso2-p3"));
    assert!(text.contains("# floor_factor = 20"));
    let parsed = parse_csv(&text).unwrap();
    assert_eq!(parsed.columns, vec!["dt", "err_u"]);
    assert_eq!(parsed.rows.len(), 4);
    for (row, r) in parsed.rows.iter().zip(&table.rows) {
        assert_eq!(row[0], r.dt);
        assert_eq!(row[1], r.errors.as_ref().unwrap()[0]);
    }
}

#[test]
fn empty_table_emits_header_only() {
    let table = ConvergenceTable::new("x", "y", vec![Observable::U, Observable::Ux]);
    let mut buf = vec![];
    emit_csv(&table, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().last().unwrap(), "dt,err_u,err_ux");
    assert!(parse_csv(&text).unwrap().rows.is_empty());
}

#[test]
fn failed_rows_become_nan() {
    let mut table = ConvergenceTable::new("x", "y", vec![Observable::U]);
    table.rows.push(StudyRow {
        dt: 0.5,
        steps: 0,
        errors: Err("newton diverged".into()),
    });
    let mut buf = vec![];
    emit_csv(&table, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("# failed dt"));
    assert!(parse_csv(&text).unwrap().rows[0][1].is_nan());
}

fn table_of(points: &[(f64, f64)]) -> ConvergenceTable {
    let mut table = ConvergenceTable::new("x", "y", vec![Observable::U]);
    for &(dt, e) in points {
        table.rows.push(StudyRow {
            dt,
            steps: 1,
            errors: Ok(vec![e]),
        });
    }
    table.floor_factor = 20.0;
    table.refit(&[SlopeWindow::new("w", 0.0, 1.0)]);
    table
}

#[test]
fn floor_filter_drops_saturated_rows() {
    let table = table_of(&[
        (0.1, 1e-3),
        (0.05, 1.25e-4),
        (0.025, 1.5625e-5),
        (0.0125, 1e-9),
        (0.00625, 1.1e-9),
        (0.003125, 0.9e-9),
        (0.0015625, 1e-9),
    ]);
    assert!((table.slope("w", Observable::U).unwrap() - 3.0).abs() < 1e-10);
}

#[test]
fn floor_filter_keeps_clean_series() {
    let pts: Vec<(f64, f64)> = (0..8).map(|k| (0.5f64.powi(k), 0.5f64.powi(3 * k))).collect();
    let table = table_of(&pts);
    let fit = table.fits[0].fit.unwrap();
    assert_eq!(fit.points, 8);
    assert!((fit.slope - 3.0).abs() < 1e-10);
}

#[test]
fn malformed_csv() {
    assert!(matches!(parse_csv("dt,err_u\n0.1,abc\n"), Err(Error::Parse { line: 2, .. })));
    assert!(parse_csv("dt,err_u\n0.1\n").is_err());
}

#[test]
fn invalid_study() {
    let t = registry_get("wso2-p3").unwrap();
    let mut spec = StudySpec::new(t, ProblemSpec::LinearDecay { lambda: -1.0 });
    spec.dt_list = vec![0.1, -0.1];
    assert!(run_study(&spec).is_err());
}

proptest! {
    #[test]
    fn fit_exact_on_synthetic_power_laws(c in 1e-6f64..1e3, p in 0.5f64..6.0, n in 3usize..15) {
        let dts: Vec<f64> = (0..n).map(|k| 0.2 * 0.7f64.powi(k as i32)).collect();
        let fit = fit_slope(&power_law(c, p, &dts), &SlopeWindow::new("w", 0.0, 1.0)).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
    }
}
