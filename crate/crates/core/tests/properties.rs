use ctsboson::basis::{build_operators, cts_moments, TruncationScheme};
use ctsboson::bdmft::hybridization_from_bath;
use ctsboson::gutzwiller::{self, GutzwillerConfig};
use ctsboson::impurity::{lehmann_green, solve_impurity, AndersonParams, MatsubaraGrid};
use ctsboson::{F32, F64};
use num_complex::Complex;
use proptest::prelude::*;

fn bath_params(phi_c: F64, eps: Vec<F64>, v: Vec<F64>, w: Vec<F64>) -> AndersonParams<F64> {
    AndersonParams { j_over_u: 0.1, mu_over_u: 0.6, z: 6, phi_c, eps, v, w }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_state_maps_back_into_basis(alpha in 1e-3f64..6.0, n_c in 2usize..16) {
        let ops = build_operators(&TruncationScheme::cts(n_c, alpha)).unwrap();
        let n_tail = ops.n[(n_c, n_c)];
        prop_assert!(ops.b_leakage().abs() <= 1e-12 * n_tail.max(1.0));
        prop_assert!((ops.b[(n_c, n_c)] - alpha).abs() <= 1e-15 * alpha.max(1.0));
        // b† lifts |α⟩ out of the span, never the other way round
        prop_assert!(ops.b_dag_leakage() >= -1e-12 * n_tail.max(1.0));
    }

    #[test]
    fn tail_moments_are_physical(alpha in 0.0f64..6.0, n_c in 2usize..16) {
        let (n, nn) = cts_moments(alpha, n_c).unwrap();
        let nc = n_c as f64;
        prop_assert!(n >= nc - 1e-12);
        prop_assert!(nn >= nc * (nc - 1.0) - 1e-9);
        // Var(n) = ⟨n(n−1)⟩ + ⟨n⟩ − ⟨n⟩²
        prop_assert!(nn + n - n * n >= -1e-9 * n * n);
    }

    #[test]
    fn tiny_alpha_is_next_fock_state(n_c in 2usize..14) {
        let cts = build_operators(&TruncationScheme::cts(n_c, 1e-12)).unwrap();
        let fock = build_operators(&TruncationScheme::fock(n_c + 1)).unwrap();
        prop_assert!(cts.b.max_abs_diff(&fock.b) < 1e-10);
        prop_assert!(cts.n.max_abs_diff(&fock.n) < 1e-10);
        prop_assert!(cts.nn.max_abs_diff(&fock.nn) < 1e-9);
    }

    #[test]
    fn hybridization_matches_pole_sum(
        eps in prop::collection::vec(1e-3f64..5.0, 1..4),
        v in prop::collection::vec(-1.0f64..1.0, 3),
        w in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let l = eps.len();
        let p = bath_params(0.0, eps.clone(), v[..l].to_vec(), w[..l].to_vec());
        let grid = MatsubaraGrid::new(20.0, 64).unwrap();
        let d = hybridization_from_bath(&p, &grid);
        for (k, &om) in grid.omegas.iter().enumerate() {
            let iw = Complex::new(0.0, om);
            let mut d11 = Complex::new(0.0, 0.0);
            let mut d12 = Complex::new(0.0, 0.0);
            for i in 0..l {
                let (up, down) = (1.0 / (iw - eps[i]), 1.0 / (iw + eps[i]));
                d11 += v[i] * v[i] * up - w[i] * w[i] * down;
                d12 += v[i] * w[i] * (up - down);
            }
            prop_assert!((d.g11[k] - d11).norm() <= 1e-13 * (1.0 + d11.norm()));
            prop_assert!((d.g12[k] - d12).norm() <= 1e-13 * (1.0 + d12.norm()));
            prop_assert!(d.g11[k].re <= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn green_function_spectral_properties(
        phi_c in 0.0f64..0.8,
        eps in prop::collection::vec(0.05f64..3.0, 1..3),
        v in prop::collection::vec(-0.5f64..0.5, 2),
        w in prop::collection::vec(-0.3f64..0.3, 2),
        alpha in 0.2f64..2.5,
    ) {
        let l = eps.len();
        let p = bath_params(phi_c, eps, v[..l].to_vec(), w[..l].to_vec());
        let ops = build_operators(&TruncationScheme::cts(4, alpha)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        let grid = MatsubaraGrid::new(40.0, 64).unwrap();
        let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
        for k in 0..grid.len() {
            prop_assert!(g.g11[k].re <= 1e-14);
            prop_assert!(g.g12[k].im.abs() <= 1e-14);
        }
        // iω g11 → ⟨[b, b†]⟩ at large ω
        let far = MatsubaraGrid::new(1e-4, 64).unwrap();
        let gf = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &far);
        let psi = ed.ground_vector();
        let norm2 = |x: Vec<f64>| x.iter().map(|a| a * a).sum::<f64>();
        let commutator = norm2(ed.space.apply_impurity(&ops.b_dag, psi)) - norm2(ed.space.apply_impurity(&ops.b, psi));
        let k = far.len() - 1;
        let tail = Complex::new(0.0, far.omegas[k]) * gf.g11[k];
        prop_assert!((tail.re - commutator).abs() <= 1e-3 * commutator.abs().max(1.0), "{tail} vs {commutator}");
    }

    #[test]
    fn gutzwiller_variational_order(j in 0.0f64..0.5, mu in 0.0f64..3.5, n_c in 2usize..6) {
        let energy = |s| gutzwiller::solve(&GutzwillerConfig::new(j, mu, 6, s)).unwrap().e_site;
        let e_cts = energy(TruncationScheme::cts(n_c, 0.0));
        let e_next = energy(TruncationScheme::fock(n_c + 1));
        let e_same = energy(TruncationScheme::fock(n_c));
        prop_assert!(e_cts <= e_next + 1e-12, "{e_cts} vs {e_next}");
        prop_assert!(e_next <= e_same + 1e-12);
    }
}

#[test]
fn single_precision_pipeline() {
    let ops = build_operators(&TruncationScheme::<F32>::cts(4, 1.5)).unwrap();
    assert!(ops.b_leakage().abs() < 1e-4);
    let mut cfg = GutzwillerConfig::<F32>::new(0.4, 0.4, 6, TruncationScheme::cts(5, 0.0));
    cfg.tol_phi = 1e-5;
    cfg.alpha_tol = 1e-4;
    let r = gutzwiller::solve(&cfg).unwrap();
    let reference = gutzwiller::solve(&GutzwillerConfig::<F64>::new(0.4, 0.4, 6, TruncationScheme::cts(5, 0.0))).unwrap();
    assert!(r.converged);
    assert!((r.e_site as f64 - reference.e_site).abs() < 1e-4 * reference.e_site.abs());
}
