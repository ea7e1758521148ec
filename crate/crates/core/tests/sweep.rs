use ctsboson::basis::{SchemeKind, TruncationScheme};
use ctsboson::sweep::{
    format_g12, read_records, run_sweep, write_records, Overrides, ResultRecord, SchemeSpec, Solver, SweepSpec,
    CSV_HEADER,
};
use ctsboson::Error;
use proptest::prelude::*;

fn gutzwiller_spec() -> SweepSpec<f64> {
    let schemes = vec![
        SchemeSpec::new(TruncationScheme::fock(5)),
        SchemeSpec::new(TruncationScheme::fock(20)),
        SchemeSpec::new(TruncationScheme::cts(5, 0.0)),
    ];
    SweepSpec::new(Solver::Gutzwiller, schemes, vec![0.5, 1.5], vec![0.0, 0.02, 0.04, 0.06])
}

fn strip_time(mut rows: Vec<ResultRecord>) -> Vec<ResultRecord> {
    rows.iter_mut().for_each(|r| r.time_ms = 0.0);
    rows
}

#[test]
fn gutzwiller_sweep_shape_and_order() {
    let rows = run_sweep(&gutzwiller_spec()).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 4);
    // scheme order as given, then μ, then J
    assert!(rows[..8].iter().all(|r| r.scheme_kind == SchemeKind::Fock && r.n_c == 5));
    assert!(rows[16..].iter().all(|r| r.scheme_kind == SchemeKind::Cts));
    for chain in rows.chunks(4) {
        assert!(chain.windows(2).all(|w| w[0].j_over_u < w[1].j_over_u));
        assert!(chain.iter().all(|r| r.mu_over_u == chain[0].mu_over_u));
    }
    assert!(rows.iter().all(|r| r.converged && r.e_paper.is_some() && r.l_bath.is_none()));
}

#[test]
fn parallel_equals_serial() {
    let mut spec = gutzwiller_spec();
    spec.workers = Some(1);
    let serial = strip_time(run_sweep(&spec).unwrap());
    spec.workers = Some(4);
    let parallel = strip_time(run_sweep(&spec).unwrap());
    assert_eq!(serial, parallel);
    assert_eq!(serial, strip_time(run_sweep(&spec).unwrap()));
}

#[test]
fn bdmft_parallel_equals_serial() {
    let schemes = vec![SchemeSpec::new(TruncationScheme::fock(4)), SchemeSpec::new(TruncationScheme::cts(3, 0.0))];
    let mut spec = SweepSpec::new(Solver::Bdmft, schemes, vec![0.4], vec![0.1, 0.2]);
    spec.l_b = 1;
    spec.workers = Some(1);
    let serial = strip_time(run_sweep(&spec).unwrap());
    spec.workers = Some(3);
    let parallel = strip_time(run_sweep(&spec).unwrap());
    assert_eq!(serial, parallel);
    assert!(serial.iter().all(|r| r.l_bath == Some(1) && r.e_paper.is_none()));
}

#[test]
fn warm_and_cold_agree() {
    let mut spec = gutzwiller_spec();
    let warm = run_sweep(&spec).unwrap();
    spec.cold_start = true;
    let cold = run_sweep(&spec).unwrap();
    for (a, b) in warm.iter().zip(&cold) {
        assert!((a.e_tot - b.e_tot).abs() < 1e-8, "{a:?} vs {b:?}");
    }
}

#[test]
fn empty_lists_rejected() {
    let mut spec = gutzwiller_spec();
    spec.j_values.clear();
    assert!(matches!(run_sweep(&spec), Err(Error::InvalidInput(_))));
    let mut spec = gutzwiller_spec();
    spec.j_values = vec![-0.1];
    assert!(run_sweep(&spec).is_err());
}

#[test]
fn failing_points_become_rows() {
    let schemes = vec![SchemeSpec::new(TruncationScheme::fock(4))];
    let mut spec = SweepSpec::new(Solver::Bdmft, schemes, vec![0.4], vec![0.1, 0.2]);
    // rejected by the solver's own validation, not by the sweep
    spec.overrides = Overrides { n_omega: Some(8), ..Overrides::default() };
    let rows = run_sweep(&spec).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| !r.converged && r.phi.is_nan()));
}

#[test]
fn csv_layout() {
    let rows = run_sweep(&gutzwiller_spec()).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.split('\n');
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), rows.len() + 1);
    let parsed = read_records(text.as_bytes()).unwrap();
    assert_eq!(parsed.len(), rows.len());
    for (p, r) in parsed.iter().zip(&rows) {
        assert!((p.e_tot - r.e_tot).abs() <= 1e-11 * r.e_tot.abs().max(1.0));
        assert_eq!(p.converged, r.converged);
    }
}

#[test]
fn rejects_wrong_header() {
    assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
}

fn quantize(x: f64) -> f64 {
    format_g12(x).parse().unwrap()
}

prop_compose! {
    fn record()(
        gutz in any::<bool>(),
        cts in any::<bool>(),
        n_c in 1usize..30,
        z in 1usize..13,
        l_b in 1usize..5,
        floats in prop::collection::vec(-1e6f64..1e6, 10),
        tiny in -1e-9f64..1e-9,
        iters in 0usize..100_000,
        converged in any::<bool>(),
    ) -> ResultRecord {
        ResultRecord {
            solver: if gutz { Solver::Gutzwiller } else { Solver::Bdmft },
            scheme_kind: if cts { SchemeKind::Cts } else { SchemeKind::Fock },
            n_c,
            alpha_opt: quantize(floats[0].abs()),
            mu_over_u: quantize(floats[1]),
            j_over_u: quantize(floats[2].abs()),
            z,
            l_bath: (!gutz).then_some(l_b),
            phi: quantize(tiny.abs()),
            n_mean: quantize(floats[4]),
            e_tot: quantize(floats[5]),
            e_paper: gutz.then(|| quantize(floats[6])),
            g_c0: quantize(floats[7] * 1e-12),
            e_kin_con: quantize(floats[8]),
            iters,
            time_ms: quantize(floats[9].abs()),
            converged,
        }
    }
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec(record(), 0..20)) {
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn g12_has_twelve_significant_digits(x in -1e300f64..1e300) {
        let y: f64 = format_g12(x).parse().unwrap();
        prop_assert!((y - x).abs() <= 5e-12 * x.abs());
        prop_assert_eq!(format_g12(y), format_g12(x));
    }
}
