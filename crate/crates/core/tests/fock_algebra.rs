use dlambda::fock::{
    build_space, coherent_state, hopping, ladder, number, product_state, total_number, BasisState, LadderKind, Mode,
    SparseOperator, NUM_MODES,
};
use dlambda::Cx;
use proptest::prelude::*;

fn mode(i: usize) -> Mode {
    Mode::ALL[i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonical_commutators(m in 1usize..=6, i in 0..NUM_MODES, j in 0..NUM_MODES) {
        let space = build_space(m).unwrap();
        let a = ladder::<f64>(&space, mode(i), LadderKind::Lower);
        let ad = ladder::<f64>(&space, mode(j), LadderKind::Raise);
        let comm = SparseOperator::commutator(&a, &ad);
        let expected = if i == j { SparseOperator::identity(space.dim()) } else { SparseOperator::zero(space.dim()) };
        prop_assert!(comm.sub(&expected).max_abs_restricted(&space, m - 1) <= 1e-14);
    }

    #[test]
    fn hopping_conserves_excitation(m in 1usize..=5, i in 0..NUM_MODES, j in 0..NUM_MODES) {
        prop_assume!(i != j);
        let space = build_space(m).unwrap();
        let h = hopping::<f64>(&space, mode(i), mode(j));
        let n = total_number::<f64>(&space);
        prop_assert!(SparseOperator::commutator(&h, &n).max_abs() <= 1e-14);
    }

    #[test]
    fn number_operator_reads_occupations(m in 0usize..=5, k in 0..NUM_MODES) {
        let space = build_space(m).unwrap();
        let n = number::<f64>(&space, mode(k));
        for (idx, s) in space.states().iter().enumerate() {
            let psi = dlambda::fock::StateVector::basis(&space, s).unwrap();
            let v = n.apply(&psi).amplitudes()[idx].re;
            prop_assert_eq!(v, s.get(mode(k)) as f64);
        }
    }

    #[test]
    fn coherent_states_are_normalized(re in -1.2f64..1.2, im in -1.2f64..1.2) {
        let space = build_space(14).unwrap();
        let psi = coherent_state(&space, Mode::Probe2, Cx::new(re, im)).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        prop_assert!((psi.mean_occupation(&space, Mode::Probe2) - (re * re + im * im)).abs() < 1e-5);
    }
}

#[test]
fn construction_is_deterministic() {
    let a = build_space(7).unwrap();
    let b = build_space(7).unwrap();
    assert_eq!(a.states(), b.states());
    let ta: Vec<_> = ladder::<f64>(&a, Mode::C, LadderKind::Raise).entries().collect();
    let tb: Vec<_> = ladder::<f64>(&b, Mode::C, LadderKind::Raise).entries().collect();
    assert_eq!(ta, tb);
}

#[test]
fn product_state_places_factors_in_their_modes() {
    let space = build_space(4).unwrap();
    let one = [Cx::<f64>::new(0.0, 0.0), Cx::new(1.0, 0.0)];
    let (psi, lost) = product_state(&space, &[(Mode::Probe1, &one[..]), (Mode::D, &one[..])]).unwrap();
    assert_eq!(lost, 0.0);
    let target = BasisState::single(Mode::Probe1, 1).with(Mode::D, 1);
    assert!((psi.amplitude(&space, &target).re - 1.0).abs() < 1e-15);
}
