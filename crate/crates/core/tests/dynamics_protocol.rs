use dlambda::dynamics::{
    evolve_with, run_storage_release, ControlSchedule, EvolveOptions, InputState, ProtocolSpec, Profile, Segment,
};
use dlambda::ensemble::CouplingParams;
use dlambda::fock::{build_space, Mode, StateVector};
use dlambda::Cx;
use proptest::prelude::*;

fn params() -> CouplingParams<f64> {
    CouplingParams::symmetric(1.0, 100.0).unwrap()
}

fn random_state(dim: usize, seed: &[f64]) -> StateVector<f64> {
    let amps = (0..dim)
        .map(|i| {
            let a = seed[i % seed.len()];
            Cx::new((a * (i as f64 + 1.0)).sin(), (a * (2 * i + 3) as f64).cos())
        })
        .collect();
    StateVector::from_amplitudes(amps).normalized("test").unwrap()
}

fn ramp_schedule() -> ControlSchedule<f64> {
    let ramp = Profile::CosineRamp { from: (20.0, 0.0), to: (0.5, 4.0) };
    ControlSchedule::new(vec![Segment::new(0.0, 1.0, ramp)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evolution_is_unitary_and_conserves_excitation(seed in proptest::collection::vec(0.1f64..5.0, 4)) {
        let space = build_space(3).unwrap();
        let psi = random_state(space.dim(), &seed);
        let traj = evolve_with(&space, &params(), &ramp_schedule(), &psi, 0.0, 1.0, &EvolveOptions::default()).unwrap();
        let out = traj.last();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
        prop_assert!((out.mean_excitation(&space) - psi.mean_excitation(&space)).abs() <= 1e-9);
    }

    #[test]
    fn evolution_is_linear(seed in proptest::collection::vec(0.1f64..5.0, 3), re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let space = build_space(2).unwrap();
        let a = random_state(space.dim(), &seed);
        let b = random_state(space.dim(), &[seed[2], seed[0] + 0.3]);
        let c = Cx::new(re, im);
        let opts = EvolveOptions::default();
        let run = |s: &StateVector<f64>| evolve_with(&space, &params(), &ramp_schedule(), s, 0.0, 1.0, &opts).unwrap().last().clone();
        let combined = run(&a.add_scaled(c, &b));
        let separate = run(&a).add_scaled(c, &run(&b));
        prop_assert!(combined.add_scaled(Cx::new(-1.0, 0.0), &separate).norm() <= 1e-9);
    }
}

#[test]
fn custom_input_matches_builtin_single_photon() {
    let space = build_space(1).unwrap();
    let p = params();
    let builtin = ProtocolSpec::new(&p, InputState::SinglePhoton, Mode::Probe1, 0.4).with_ramps(2.0);
    let photon = dlambda::fock::number_state(&space, Mode::Probe1, 1).unwrap();
    let custom = ProtocolSpec { input: InputState::Custom(photon), ..builtin.clone() };
    let x = run_storage_release(&space, &p, &builtin).unwrap();
    let y = run_storage_release(&space, &p, &custom).unwrap();
    assert_eq!(x.released, y.released);
    assert!(y.diagnostics.fidelity.is_none());
}

#[test]
fn infidelity_falls_as_ramps_lengthen() {
    let space = build_space(1).unwrap();
    let p = params();
    let infidelity = |ramp: f64| {
        let spec = ProtocolSpec::new(&p, InputState::SinglePhoton, Mode::Probe1, 0.7).with_ramps(ramp);
        1.0 - run_storage_release(&space, &p, &spec).unwrap().diagnostics.fidelity.unwrap()
    };
    let v: Vec<f64> = [1.0, 2.0, 4.0].into_iter().map(infidelity).collect();
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    assert!(v[2] < 1e-3);
}

#[test]
fn protocol_runs_are_reproducible() {
    let space = build_space(6).unwrap();
    let p = params();
    let spec = ProtocolSpec::new(&p, InputState::Coherent { alpha: Cx::new(0.5, 0.2) }, Mode::Probe1, 0.3).with_ramps(1.0);
    let a = run_storage_release(&space, &p, &spec).unwrap();
    let b = run_storage_release(&space, &p, &spec).unwrap();
    assert_eq!(a.released, b.released);
    assert_eq!(a.diagnostics.steps, b.diagnostics.steps);
}

#[test]
fn stored_state_is_a_spin_wave() {
    let space = build_space(2).unwrap();
    let p = params();
    let spec = ProtocolSpec::new(&p, InputState::SinglePhoton, Mode::Probe1, 0.0).with_ramps(4.0);
    let out = run_storage_release(&space, &p, &spec).unwrap();
    assert!(out.diagnostics.stored_leakage < 1e-3);
    assert!(out.stored.mean_occupation(&space, Mode::C) > 0.999);
}
