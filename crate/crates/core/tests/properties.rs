use ion_cat::dynamics::lindblad_rhs;
use ion_cat::io::{Scenario, StateDump};
use ion_cat::model::{build_hamiltonian, jump_operators, ModelSpec, Variant};
use ion_cat::observables::{fidelity_pure, partial_trace_internal, wigner_joint};
use ion_cat::reduction::reduce_with_dim;
use ion_cat::{total_parity, Cx, DensityMatrix, HilbertSpace, StateVector};
use proptest::prelude::*;

const W_MAX: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

fn amps(n: usize) -> impl Strategy<Value = Vec<Cx<f64>>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| Cx::new(a, b)).collect())
}

/// Mixture of two random kets.
fn density(space: HilbertSpace) -> impl Strategy<Value = DensityMatrix<f64>> {
    let n = space.total_dim();
    (amps(n), amps(n), 0.0..1.0f64).prop_map(move |(a, b, w)| {
        let ra = StateVector::from_amplitudes(&space, a).unwrap().to_density();
        let rb = StateVector::from_amplitudes(&space, b).unwrap().to_density();
        ra.mix(&rb, w).unwrap()
    })
}

fn spec() -> impl Strategy<Value = ModelSpec<f64>> {
    (
        0.05..0.3f64,
        0.05..0.3f64,
        0.0..4.0f64,
        0.0..20.0f64,
        0.0..0.1f64,
        0.0..2.0f64,
        -3.0..3.0f64,
        prop_oneof![Just(Variant::Ideal), Just(Variant::HigherOrder), Just(Variant::Series { j_max: 1 })],
    )
        .prop_map(|(ex, ey, eps, g, gv, deph, phi, variant)| ModelSpec {
            mode_count: 2,
            eta: vec![ex, ey],
            lambda_rate: 1.0,
            epsilon: eps,
            gamma: g,
            gamma_vib: vec![gv, gv / 2.0],
            dephasing_rate: deph,
            phi0: phi,
            variant,
            mode_dims: vec![3, 4],
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_keeps_trace_and_hermiticity(s in spec(), rho in density(HilbertSpace::new(&[3, 4]).unwrap())) {
        let h = build_hamiltonian(&s).unwrap();
        let d = lindblad_rhs(&rho, &h, &jump_operators(&s).unwrap()).unwrap();
        let tr = (0..d.nrows()).map(|i| d[[i, i]]).sum::<Cx<f64>>();
        prop_assert!(tr.norm() < 1e-12, "trace {tr}");
        let herm = d.indexed_iter().map(|((i, j), z)| (z - d[[j, i]].conj()).norm()).fold(0.0, f64::max);
        prop_assert!(herm < 1e-12);
    }

    #[test]
    fn hamiltonians_are_hermitian_and_conserve_parity(s in spec()) {
        let h = build_hamiltonian(&s).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
        let p = total_parity(h.space());
        prop_assert!(h.commutator(&p).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn wigner_is_bounded_and_linear(
        r1 in density(HilbertSpace::vibrational(&[6, 6]).unwrap()),
        r2 in density(HilbertSpace::vibrational(&[6, 6]).unwrap()),
        w in 0.0..1.0f64,
        b in (-0.6..0.6f64, -0.6..0.6f64),
        c in (-0.6..0.6f64, -0.6..0.6f64),
    ) {
        let (beta, chi) = (Cx::new(b.0, b.1), Cx::new(c.0, c.1));
        let w1 = wigner_joint(&r1, beta, chi).unwrap();
        let w2 = wigner_joint(&r2, beta, chi).unwrap();
        let wm = wigner_joint(&r1.mix(&r2, w).unwrap(), beta, chi).unwrap();
        prop_assert!(w1.abs() <= W_MAX + 1e-6);
        prop_assert!((wm - (w * w1 + (1.0 - w) * w2)).abs() < 1e-10);
    }

    #[test]
    fn dump_round_trip_is_exact(rho in density(HilbertSpace::new(&[3, 2]).unwrap())) {
        let back: DensityMatrix<f64> = StateDump::from_json(&StateDump::from_density(&rho).to_json())
            .unwrap()
            .to_density()
            .unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
    }

    #[test]
    fn fidelity_ignores_global_phase(
        rho in density(HilbertSpace::vibrational(&[3, 3]).unwrap()),
        psi in amps(9),
        phase in -6.0..6.0f64,
    ) {
        let psi = StateVector::from_amplitudes(&HilbertSpace::vibrational(&[3, 3]).unwrap(), psi).unwrap();
        let f = fidelity_pure(&rho, &psi).unwrap();
        let g = fidelity_pure(&rho, &psi.with_phase(phase)).unwrap();
        prop_assert!((f - g).abs() < 1e-14);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn internal_trace_keeps_trace(rho in density(HilbertSpace::new(&[2, 3]).unwrap())) {
        let v = partial_trace_internal(&rho);
        prop_assert!((v.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(v.hermiticity_error() < 1e-12);
    }

    #[test]
    fn lift_keeps_norm_and_parity(psi in amps(12)) {
        let s = ModelSpec { variant: Variant::Ideal, gamma_vib: vec![], ..ModelSpec::<f64>::two_mode_reference(7) };
        let red = reduce_with_dim(&s, 6).unwrap();
        let psi = StateVector::from_amplitudes(&red.space, psi).unwrap();
        let full = s.space().unwrap();
        let up = red.lift(&psi, &full).unwrap();
        prop_assert!((up.norm() - 1.0).abs() < 1e-12);
        let pr = psi.expect(&total_parity(&red.space)).unwrap().re;
        let pf = up.expect(&total_parity(&full)).unwrap().re;
        prop_assert!((pr - pf).abs() < 1e-12);
    }

    #[test]
    fn scenario_round_trip(
        eps in 0.1..30.0f64,
        g in 0.0..200.0f64,
        gv in prop::option::of(0.0..0.01f64),
        dims in (4usize..30, 4usize..30),
        t in 0.1..10.0f64,
    ) {
        let src = format!(
            "name = \"p\"\n[model]\nmode_count = 2\neta = [0.15, 0.1]\nepsilon = {eps:?}\nGamma = {g:?}\n{}mode_dims = [{}, {}]\n\
             [initial_state]\nkind = \"symmetric_one_phonon\"\n[evolution]\nt_final = {t:?}\n",
            gv.map(|v| format!("gamma_vib = [{v:?}, {v:?}]\n")).unwrap_or_default(),
            dims.0,
            dims.1,
        );
        let s = Scenario::<f64>::from_toml(&src).unwrap();
        let again = Scenario::<f64>::from_toml(&s.canonical()).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(again.hash(), s.hash());
    }
}
