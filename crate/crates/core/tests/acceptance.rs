//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! The Fock-space protocol criteria dominate the runtime (a couple of
//! minutes in an optimized test build).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::process::ExitCode;
use std::time::Instant;

use dlambda::analysis::{entanglement_entropy, reduce, EntropyBase};
use dlambda::dynamics::{run_cat_protocol, run_storage_release, InputState, ProtocolSpec};
use dlambda::ensemble::{
    adiabatic_mixing_matrix, build_hamiltonian, dark_state, degeneracy_state, mixing_angles, polariton_set,
    spectral_norm, AngleKind, CouplingParams, DegeneracyIndex, MixingAngles, PolaritonSet,
};
use dlambda::fock::{build_space, BasisState, CatSign, FockSpace, Mode, SparseOperator};
use dlambda::propagation::scenarios::{
    run_bandwidth_change, run_storage_scenario, run_transport, transmission_scan, BandwidthSpec, PulseMatchingSpec,
    StorageSpec, TransportSpec,
};
use dlambda::propagation::{scenarios::pulse_matching_probe, ContinuumParams};
use dlambda::{Cx, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_d1a3;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn fock_params() -> CouplingParams<f64> {
    CouplingParams::symmetric(1.0, 100.0).unwrap()
}

fn continuum(gn: f64, length: f64) -> dlambda::propagation::Scaled<f64> {
    ContinuumParams { gn1: gn, gn2: gn, gamma: 1.0, c: 1.0, length, n_atoms: 1e8 }.internal().unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, symmetric: bool) -> (CouplingParams<f64>, f64, f64) {
    let g1 = rng.gen_range(0.2..2.0);
    let g2 = if symmetric { g1 } else { rng.gen_range(0.2..2.0) };
    let n = rng.gen_range(10.0..1000.0f64).round();
    let p = CouplingParams::new(g1, g2, n, 0.0).unwrap();
    (p, rng.gen_range(0.1..20.0), rng.gen_range(0.1..20.0))
}

fn dark_state_exactness() -> Result<Verdict> {
    let m = 8;
    let space = build_space(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (p, o1, o2) = random_params(&mut rng, false);
        let v = build_hamiltonian(&space, &p, o1, o2);
        let norm = spectral_norm(&p, o1, o2, m);
        let angles = mixing_angles(&p, o1, o2)?;
        for n in 0..=3 {
            let d = dark_state(&space, n, angles)?;
            worst = worst.max(v.apply(&d).norm() / norm);
        }
    }
    Ok(Verdict::new(worst <= 1e-10, format!("max |V D_n| / |V| = {worst:.2e} (limit 1e-10)")))
}

fn residual(a: &SparseOperator<f64>, b: &SparseOperator<f64>, space: &FockSpace) -> f64 {
    a.sub(b).max_abs_restricted(space, space.cutoff() - 1)
}

fn commutator_suite() -> Result<Verdict> {
    let space = build_space(6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (p, o1, o2) = random_params(&mut rng, true);
        let v = build_hamiltonian(&space, &p, o1, o2);
        let set = polariton_set(&space, &p, o1, o2)?;
        let (e1, e2) = set.energies.expect("symmetric couplings");
        let zero = SparseOperator::zero(space.dim());
        let comm = |x: &SparseOperator<f64>| SparseOperator::commutator(&v, &x.adjoint());
        let lift = |x: &SparseOperator<f64>, e: f64| x.adjoint().scaled(Cx::new(e, 0.0));
        let checks = [
            residual(&comm(&set.d), &zero, &space),
            residual(&comm(&set.q_plus), &lift(&set.q_plus, e1), &space),
            residual(&comm(&set.q_minus), &lift(&set.q_minus, -e1), &space),
            residual(&comm(&set.p_plus), &lift(&set.p_plus, e2), &space),
            residual(&comm(&set.p_minus), &lift(&set.p_minus, -e2), &space),
            residual(&SparseOperator::commutator(&set.p_plus.adjoint(), &set.q_plus.adjoint()), &zero, &space),
            residual(&SparseOperator::commutator(&set.p_minus.adjoint(), &set.q_minus.adjoint()), &zero, &space),
        ];
        worst = checks.iter().fold(worst, |m, &c| m.max(c));
    }
    Ok(Verdict::new(worst <= 1e-10, format!("max residual entry {worst:.2e} (limit 1e-10)")))
}

fn degeneracy_spectrum() -> Result<Verdict> {
    let space = build_space(6)?;
    let p = fock_params();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (o1, o2) in [(3.0, 4.0), (0.7, 12.0)] {
        let v = build_hamiltonian(&space, &p, o1, o2);
        let set = polariton_set(&space, &p, o1, o2)?;
        let (e1, _) = set.energies.expect("symmetric couplings");
        for idx in DegeneracyIndex::all_up_to(4) {
            let r = degeneracy_state(&space, &set, idx)?;
            let res = v.apply(&r.state).add_scaled(Cx::new(-r.eigenvalue, 0.0), &r.state).norm();
            worst = worst.max(res / r.eigenvalue.abs().max(e1));
            count += 1;
        }
    }
    Ok(Verdict::new(worst <= 1e-9, format!("{count} states, max relative residual {worst:.2e} (limit 1e-9)")))
}

fn adiabatic_no_mixing() -> Result<Verdict> {
    let space = build_space(8)?;
    let mut indices = Vec::new();
    for i in 0..=3 {
        for k in 0..=3 {
            for n in 0..=6 {
                if 2 * i + 2 * k + n <= 6 {
                    indices.push(DegeneracyIndex::zero_class(i, k, n));
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for (theta, phi) in [(0.3, 0.4), (1.1, 0.9), (0.8, 1.3)] {
        let set = PolaritonSet::from_angles(&space, MixingAngles::new(theta, phi), Some((11.0, 10.0)));
        for which in [AngleKind::Theta, AngleKind::Phi] {
            let mat = adiabatic_mixing_matrix(&space, &set, &indices, which, 1e-4)?;
            for (a, ia) in indices.iter().enumerate() {
                for (b, ib) in indices.iter().enumerate() {
                    if (ia.i, ia.k) != (ib.i, ib.k) {
                        worst = worst.max(mat[(a, b)].norm());
                    }
                }
            }
        }
    }
    Ok(Verdict::new(
        worst <= 1e-6,
        format!("{} zero-class states, max cross-sector overlap {worst:.2e} (limit 1e-6)", indices.len()),
    ))
}

fn coherent_spec(phi_e: f64, ramp: f64) -> ProtocolSpec<f64> {
    ProtocolSpec::new(&fock_params(), InputState::Coherent { alpha: Cx::new(1.0, 0.0) }, Mode::Probe1, phi_e)
        .with_ramps(ramp)
}

fn storage_release_fidelity() -> Result<Verdict> {
    let space = build_space(12)?;
    let p = fock_params();
    let mut parts = Vec::new();
    let fidelity = |phi_e: f64, ramp: f64| -> Result<f64> {
        Ok(run_storage_release(&space, &p, &coherent_spec(phi_e, ramp))?.diagnostics.fidelity.unwrap())
    };
    let mut pass = true;
    let mut at_zero = 0.0;
    for phi_e in [0.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_2] {
        let f = fidelity(phi_e, 2.0)?;
        if phi_e == 0.0 {
            at_zero = f;
        }
        pass &= f >= 0.99;
        parts.push(format!("F({phi_e:.3})={f:.5}"));
    }
    // Ramp durations 1, 2 and 4 in units of 10 / (g sqrt N).
    let infid = [1.0 - fidelity(0.0, 1.0)?, 1.0 - at_zero, 1.0 - fidelity(0.0, 4.0)?];
    let monotone = infid.windows(2).all(|w| w[1] < w[0]);
    pass &= monotone;
    parts.push(format!("1-F over ramps 1,2,4: {:.2e} {:.2e} {:.2e}", infid[0], infid[1], infid[2]));
    Ok(Verdict::new(pass, parts.join(", ")))
}

fn mes_generation() -> Result<Verdict> {
    let p = fock_params();
    let space = build_space(12)?;
    let spec = ProtocolSpec::new(
        &p,
        InputState::Cat { alpha: Cx::new(1.0, 0.0), sign: CatSign::Minus },
        Mode::Probe1,
        FRAC_PI_4,
    )
    .with_ramps(2.0);
    let out = run_cat_protocol(&space, &p, &spec)?;
    let f_cat = out.diagnostics.fidelity.unwrap();
    let entropy = entanglement_entropy(&reduce(&space, &out.released, &[Mode::Probe1])?, EntropyBase::Bits);

    let small = build_space(2)?;
    let spec = ProtocolSpec::new(&p, InputState::SinglePhoton, Mode::Probe1, FRAC_PI_4).with_ramps(4.0);
    let f_one = run_storage_release(&small, &p, &spec)?.diagnostics.fidelity.unwrap();
    let pass = (entropy - 1.0).abs() <= 1e-3 && f_cat >= 0.99 && f_one >= 0.999;
    Ok(Verdict::new(pass, format!("S = {entropy:.5} bit, F(cat) = {f_cat:.5}, F(photon) = {f_one:.6}")))
}

fn dsp_transport() -> Result<Verdict> {
    let s = continuum(10.0, 20.0);
    let spec = TransportSpec { nz: 2000, start: 0.25, width: 1.0, duration: 8.0, samples: 40 };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for theta in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
        let r = run_transport(&s, theta, 0.0, &spec)?;
        worst = worst.max(r.relative_error.abs());
        parts.push(format!("v/c={:.4} (cos^2 {:.4})", r.velocity, r.expected));
    }
    Ok(Verdict::new(worst <= 0.02, format!("{}, max error {:.2}%", parts.join(", "), 100.0 * worst)))
}

fn pulse_matching() -> Result<Verdict> {
    let cp = ContinuumParams { gn1: 1e5 * 1e4, gn2: 1e5 * 1e4, gamma: 1e8, c: 3e8, length: 0.6, n_atoms: 1e8 };
    let s = cp.internal()?;
    let o = s.gn1 / 2f64.sqrt();
    let spec = PulseMatchingSpec::standard(&s, o, o);
    let r = pulse_matching_probe(&s, o, o, &spec)?;
    let ratio_err = (r.final_ratio - Cx::new(r.tan_phi, 0.0)).norm() / r.tan_phi;
    let rate_err = (r.fitted_rate / r.predicted_rate - 1.0).abs();
    let lifetime = cp.time_unit() / r.fitted_rate;
    let in_factor = (lifetime / 1e-10).max(1e-10 / lifetime) <= 2.0;
    Ok(Verdict::new(
        ratio_err <= 0.01 && rate_err <= 0.10 && in_factor,
        format!(
            "E2/E1 = {:.6}, rate {:.3} vs {:.3} ({:.2}%), s lifetime {lifetime:.3e} s",
            r.final_ratio.norm(),
            r.fitted_rate,
            r.predicted_rate,
            100.0 * rate_err
        ),
    ))
}

fn continuum_split() -> Result<Verdict> {
    let s = continuum(10.0, 20.0);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for phi_e in [FRAC_PI_6, FRAC_PI_4] {
        let o = run_storage_scenario(&s, &StorageSpec::standard(&s, phi_e))?;
        let err = (o.ratio / o.expected_ratio - 1.0).abs();
        worst = worst.max(err);
        parts.push(format!("W2/W1={:.5} (tan^2 {:.5})", o.ratio, o.expected_ratio));
    }
    Ok(Verdict::new(worst <= 0.02, format!("{}, max error {:.2e}", parts.join(", "), worst)))
}

fn bandwidth_law() -> Result<Verdict> {
    let s = continuum(20.0, 20.0);
    let spec = BandwidthSpec::standard(&s, FRAC_PI_6, FRAC_PI_3, 0.0, 0.05)?;
    let res = run_bandwidth_change(&s, &spec)?;
    let err = (res.measured_ratio / res.predicted_ratio - 1.0).abs();
    let tr = transmission_scan(&s, FRAC_PI_6, 0.0, &[0.1], 10)?;
    let t = tr[0].transmission;
    Ok(Verdict::new(
        err <= 0.05 && t >= 0.95,
        format!(
            "width ratio {:.4} vs {:.4} ({:.2}%), transmission at bandwidth/window 0.1: {t:.4}",
            res.measured_ratio,
            res.predicted_ratio,
            100.0 * err
        ),
    ))
}

fn cross_engine() -> Result<Verdict> {
    let p = fock_params();
    let space = build_space(2)?;
    let s = continuum(10.0, 20.0);
    let one = |m: Mode| BasisState::single(m, 1);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for phi_e in [FRAC_PI_6, FRAC_PI_4] {
        let spec = ProtocolSpec::new(&p, InputState::SinglePhoton, Mode::Probe1, phi_e).with_ramps(4.0);
        let out = run_storage_release(&space, &p, &spec)?;
        let p1 = out.released.amplitude(&space, &one(Mode::Probe1)).norm_sqr();
        let p2 = out.released.amplitude(&space, &one(Mode::Probe2)).norm_sqr();
        let fock = ((p1 / (p1 + p2)).sqrt(), (p2 / (p1 + p2)).sqrt());
        let cont = run_storage_scenario(&s, &StorageSpec::standard(&s, phi_e))?.amplitude_split;
        let ideal = (phi_e.cos(), phi_e.sin());
        for (a, b) in [(fock.0, cont.0), (fock.1, cont.1), (fock.0, ideal.0), (fock.1, ideal.1)] {
            worst = worst.max((a - b).abs() / b);
        }
        parts.push(format!("fock ({:.4}, {:.4}) continuum ({:.4}, {:.4})", fock.0, fock.1, cont.0, cont.1));
    }
    Ok(Verdict::new(worst <= 0.02, format!("{}, max deviation {:.2e}", parts.join("; "), worst)))
}

type Check = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("dark-state exactness", dark_state_exactness),
        ("commutator suite", commutator_suite),
        ("degeneracy spectrum", degeneracy_spectrum),
        ("adiabatic no-mixing", adiabatic_no_mixing),
        ("storage/release fidelity", storage_release_fidelity),
        ("entangled state generation", mes_generation),
        ("polariton transport", dsp_transport),
        ("pulse matching", pulse_matching),
        ("continuum release split", continuum_split),
        ("bandwidth law", bandwidth_law),
        ("cross-engine consistency", cross_engine),
    ];
    let mut failures = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        if !verdict.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<28} {} {} [{:.1}s]",
            n + 1,
            name,
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
