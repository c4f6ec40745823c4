use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

use dlambda::dynamics::ControlSchedule;
use dlambda::ensemble::MixingAngles;
use dlambda::propagation::io::{read_binary, write_binary, write_csv};
use dlambda::propagation::{
    controls_for, polariton_diagnostics, run_transport, simulate, FieldGrid, InputPulse, Scaled, SimulationSpec,
    StepOptions, Stepper, TransportSpec,
};
use dlambda::Cx;
use proptest::prelude::*;

fn medium(gn1: f64, gn2: f64, gamma: f64, length: f64) -> Scaled<f64> {
    Scaled { gn1, gn2, gamma, length, n_atoms: 1e8 }
}

fn gaussian(center: f64, width: f64) -> impl Fn(f64) -> Cx<f64> {
    move |z| Cx::new((-((z - center) / width).powi(2)).exp(), 0.0)
}

#[test]
fn lossless_medium_conserves_excitation() {
    let p = medium(5.0, 5.0, 0.0, 10.0);
    let (o1, o2) = controls_for(&p, FRAC_PI_4, 0.6);
    let mut grid = FieldGrid::new(&p, 1201, 2.0).unwrap();
    grid.load_polariton(p.angles(o1, o2, 0.0), gaussian(3.0, 0.5));
    let e0 = grid.energy();
    let schedule = ControlSchedule::constant(0.0, 10.0, o1, o2).unwrap();
    let (grid, rec) = simulate(&p, &SimulationSpec::new(1201, 2.0, 4.0, schedule), Some(grid)).unwrap();
    let drift = rec.energy.iter().fold(0.0f64, |m, (_, e)| m.max((e / e0 - 1.0).abs()));
    assert!(drift < 0.01, "energy drift {drift}");
    assert!(grid.time > 3.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rotation_identity_holds_every_step(theta in 0.2f64..1.4, phi in 0.0f64..1.5, g2 in 2.0f64..8.0) {
        let p = medium(5.0, g2, 1.0, 4.0);
        let (o1, o2) = controls_for(&p, theta, phi);
        let mut grid = FieldGrid::new(&p, 201, 1.0).unwrap();
        grid.load_polariton(MixingAngles::new(theta, phi), gaussian(1.5, 0.4));
        let mut st = Stepper::new(p, StepOptions::default());
        let dt = grid.dz;
        for _ in 0..60 {
            st.step(&mut grid, o1, o2, dt, (Cx::new(0.0, 0.0), Cx::new(0.0, 0.0))).unwrap();
            let d = polariton_diagnostics(&grid, &p, o1, o2, phi);
            prop_assert!(d.rotation_residual(&grid) <= 1e-12);
        }
    }
}

#[test]
fn single_control_reduces_to_three_level_system() {
    let p = medium(10.0, 10.0, 1.0, 20.0);
    let other = medium(10.0, 3.0, 1.0, 20.0);
    let (o1, o2) = controls_for(&p, FRAC_PI_3, 0.0);
    assert_eq!(o2, 0.0);
    let run = |m: &Scaled<f64>| {
        let schedule = ControlSchedule::constant(0.0, 30.0, o1, 0.0).unwrap();
        let mut spec = SimulationSpec::new(1500, 2.0, 8.0, schedule);
        spec.input = Some(InputPulse::gaussian_e1(1e-3, 2.0, 0.7));
        simulate(m, &spec, None).unwrap().0
    };
    let (a, b) = (run(&p), run(&other));
    assert!(a.e2.iter().chain(&a.s_bd).all(|z| z.norm() == 0.0));
    assert_eq!(a.e1, b.e1);
    assert_eq!(a.s_bc, b.s_bc);

    let spec = TransportSpec { nz: 2000, start: 0.25, width: 1.0, duration: 8.0, samples: 40 };
    let r = run_transport(&p, FRAC_PI_4, 0.0, &spec).unwrap();
    assert!(r.relative_error.abs() < 0.02, "{}", r.relative_error);
}

#[test]
fn solution_converges_under_refinement() {
    let p = medium(5.0, 5.0, 1.0, 10.0);
    let (o1, o2) = controls_for(&p, FRAC_PI_4, 0.3);
    let field = |cells: usize| {
        let mut grid = FieldGrid::new(&p, cells + 1, 2.0).unwrap();
        grid.load_polariton(MixingAngles::new(FRAC_PI_4, 0.3), gaussian(3.0, 1.0));
        let schedule = ControlSchedule::constant(0.0, 10.0, o1, o2).unwrap();
        simulate(&p, &SimulationSpec::new(cells + 1, 2.0, 3.0 - 1e-9, schedule), Some(grid)).unwrap().0
    };
    let (a, b, c) = (field(200), field(400), field(800));
    let coarse = |fine: &FieldGrid<f64>, k: usize| -> Vec<Cx<f64>> { (0..a.nz()).map(|i| fine.e1[i * k]).collect() };
    let diff = |x: &[Cx<f64>], y: &[Cx<f64>]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()));
    let d1 = diff(&a.e1, &coarse(&b, 2));
    let d2 = diff(&coarse(&b, 2), &coarse(&c, 4));
    assert!(d1 / d2 >= 2.0, "self-differences {d1:.3e} {d2:.3e}");
}

#[test]
fn snapshots_round_trip_through_binary_and_csv() {
    let p = medium(4.0, 4.0, 1.0, 2.0);
    let (o1, o2) = controls_for(&p, 0.8, 0.4);
    let schedule = ControlSchedule::constant(0.0, 5.0, o1, o2).unwrap();
    let mut spec = SimulationSpec::new(101, 0.5, 1.0, schedule);
    spec.input = Some(InputPulse::gaussian_e1(1e-3, 0.5, 0.2));
    spec.snapshot_every = Some(10);
    let (_, rec) = simulate(&p, &spec, None).unwrap();
    let mut buf = Vec::new();
    write_binary(&mut buf, rec.dz, &rec.snapshots).unwrap();
    let (dz, back) = read_binary(&mut buf.as_slice()).unwrap();
    assert_eq!(dz, rec.dz);
    assert_eq!(back, rec.snapshots);
    let mut csv = Vec::new();
    write_csv(&mut csv, rec.dz, &rec.snapshots).unwrap();
    let rows = String::from_utf8(csv).unwrap().lines().count();
    assert_eq!(rows, 1 + rec.snapshots.len() * 101);
}
