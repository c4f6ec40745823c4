use dlambda::analysis::{
    ecs_entropy, entangled_coherent_state, entanglement_entropy, fidelity, reduce, EntropyBase,
};
use dlambda::fock::{build_space, CatSign, Mode, StateVector};
use dlambda::Cx;
use proptest::prelude::*;

fn state_from(space: &dlambda::fock::FockSpace, coeffs: &[(f64, f64)]) -> StateVector<f64> {
    let amps = (0..space.dim()).map(|i| {
        let (a, b) = coeffs[i % coeffs.len()];
        Cx::new(a * ((i * 7 + 1) as f64).sin(), b * ((i * 3 + 2) as f64).cos())
    });
    StateVector::from_amplitudes(amps.collect()).normalized("test").unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schmidt_symmetry(c in coeffs()) {
        let space = build_space(3).unwrap();
        let psi = state_from(&space, &c);
        let left = reduce(&space, &psi, &[Mode::Probe1, Mode::A]).unwrap();
        let right = reduce(&space, &psi, &[Mode::Probe2, Mode::C, Mode::D]).unwrap();
        let (sl, sr) = (entanglement_entropy(&left, EntropyBase::Nats), entanglement_entropy(&right, EntropyBase::Nats));
        prop_assert!((sl - sr).abs() <= 1e-9, "{} vs {}", sl, sr);
    }

    #[test]
    fn partial_trace_is_consistent(c in coeffs()) {
        let space = build_space(3).unwrap();
        let psi = state_from(&space, &c);
        let both = reduce(&space, &psi, &[Mode::Probe1, Mode::Probe2]).unwrap();
        let direct = reduce(&space, &psi, &[Mode::Probe1]).unwrap();
        let nested = both.trace_out(&[Mode::Probe2]).unwrap();
        prop_assert!((nested.trace() - 1.0).abs() <= 1e-12);
        prop_assert!(nested.hermiticity_residual() <= 1e-13);
        let diff = nested.matrix().as_slice().iter().zip(direct.matrix().as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        prop_assert!(diff <= 1e-13);
    }

    #[test]
    fn fidelity_is_symmetric_and_phase_blind(a in coeffs(), b in coeffs(), phase in 0.0f64..6.3) {
        let space = build_space(2).unwrap();
        let (x, y) = (state_from(&space, &a), state_from(&space, &b));
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((f - fidelity(&y, &x).unwrap()).abs() <= 1e-14);
        prop_assert!((f - fidelity(&x.scaled(Cx::from_polar(1.0, phase)), &y).unwrap()).abs() <= 1e-14);
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&f));
    }
}

#[test]
fn ecs_entropy_matches_closed_form() {
    let space = build_space(14).unwrap();
    for (a1, a2) in [(0.5f64, 0.5f64), (1.0, 0.3), (0.8, 0.8)] {
        for sign in [CatSign::Plus, CatSign::Minus] {
            let psi = entangled_coherent_state(&space, Cx::new(a1, 0.0), Cx::new(a2, 0.0), sign).unwrap();
            let s = entanglement_entropy(&reduce(&space, &psi, &[Mode::Probe1]).unwrap(), EntropyBase::Bits);
            let closed = ecs_entropy(Cx::new(a1, 0.0), Cx::new(a2, 0.0), sign, EntropyBase::Bits);
            assert!((s - closed).abs() < 1e-6, "{a1} {a2} {sign:?}: {s} vs {closed}");
        }
    }
}
