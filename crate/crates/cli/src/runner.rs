//! Scenario execution, run summaries and artifact files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dlambda::analysis::{ecs_entropy, entanglement_entropy, entanglement_vs_release_angle, mode_distribution, reduce, EntropyBase};
use dlambda::dynamics::{run_storage_release, ControlSchedule, InputState, Profile, ProtocolOutcome, ProtocolSpec, RampShape, Segment};
use dlambda::ensemble::{
    adiabatic_mixing_matrix, build_hamiltonian, dark_state, degeneracy_state, mixing_angles, polariton_set,
    spectral_norm, AngleKind, CouplingParams, DegeneracyIndex, MixingAngles, PolaritonSet,
};
use dlambda::fock::{build_space, BasisState, CatSign, FockSpace, Mode, SparseOperator};
use dlambda::propagation::{self as prop, io as field_io, ContinuumParams, Scaled};
use dlambda::Cx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// `<=` or `>=`.
    pub comparison: &'static str,
    pub tolerance: f64,
    pub pass: bool,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, comparison: "<=", tolerance, pass: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, comparison: ">=", tolerance, pass: value >= tolerance }
    }
}

/// Outcome of one run. Wall time is logged, not stored, so that summaries
/// are byte-identical across repeated runs.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub seed: u64,
    pub config_hash: String,
    pub pass: bool,
    pub metrics: Vec<Metric>,
    /// Further diagnostics without a tolerance.
    pub info: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub config: Config,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{header}")?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{:.12e}", x + 0.0)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }
}

#[derive(Default)]
struct Report {
    metrics: Vec<Metric>,
    info: BTreeMap<String, f64>,
}

impl Report {
    fn info(&mut self, k: &str, v: f64) {
        self.info.insert(k.to_string(), v);
    }
}

/// Runs the configured scenario, writing artifacts and `summary.json`
/// into `out`.
pub fn run(cfg: &Config, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut art = Artifacts { dir: out.to_path_buf(), written: Vec::new() };
    let start = std::time::Instant::now();
    let report = match cfg.scenario {
        Scenario::StoreRelease | Scenario::SinglePhoton => store_release(cfg, &mut art)?,
        Scenario::CatEntangle => cat_entangle(cfg, &mut art)?,
        Scenario::AlgebraCheck => algebra_check(cfg, &mut art)?,
        Scenario::AdiabaticScan => adiabatic_scan(cfg, &mut art)?,
        Scenario::Propagate1d => propagate(cfg, &mut art)?,
        Scenario::PulseMatching => pulse_matching(cfg, &mut art)?,
        Scenario::BandwidthScan => bandwidth(cfg, &mut art)?,
    };
    log::info!("{} finished in {:.2?}", cfg.scenario, start.elapsed());
    art.written.push("summary.json".into());
    let summary = RunSummary {
        scenario: cfg.scenario,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        pass: report.metrics.iter().all(|m| m.pass),
        metrics: report.metrics,
        info: report.info,
        artifacts: art.written.clone(),
        config: cfg.clone(),
    };
    let mut w = BufWriter::new(File::create(out.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(summary)
}

fn coupling(cfg: &Config) -> Result<CouplingParams<f64>> {
    let a = &cfg.atoms;
    Ok(CouplingParams::new(a.g1, a.g2, a.n_atoms, a.gamma)?)
}

fn protocol(cfg: &Config, params: &CouplingParams<f64>) -> ProtocolSpec<f64> {
    let p = &cfg.protocol;
    let alpha = Cx::new(p.alpha, p.alpha_im);
    let input = match p.input.as_str() {
        "coherent" => InputState::Coherent { alpha },
        "cat-plus" => InputState::Cat { alpha, sign: CatSign::Plus },
        "cat-minus" => InputState::Cat { alpha, sign: CatSign::Minus },
        _ => InputState::SinglePhoton,
    };
    let mode = if p.input_mode == "probe2" { Mode::Probe2 } else { Mode::Probe1 };
    let mut spec = ProtocolSpec::new(params, input, mode, p.phi_e);
    spec.theta_edge = p.theta_edge;
    if let Some(r) = p.ramp {
        spec = spec.with_ramps(r);
    }
    if let Some(h) = p.hold {
        spec.hold = h;
    }
    spec.ramp_shape = if p.ramp_shape == "cosine" { RampShape::Cosine } else { RampShape::MixingAngle };
    spec.monitor_threshold = (p.monitor_threshold > 0.0).then_some(p.monitor_threshold);
    spec
}

fn run_protocol(cfg: &Config) -> Result<(FockSpace, ProtocolOutcome<f64>)> {
    let params = coupling(cfg)?;
    let space = build_space(cfg.protocol.cutoff)?;
    let spec = protocol(cfg, &params);
    let out = run_storage_release(&space, &params, &spec).context("storage/release protocol")?;
    Ok((space, out))
}

fn protocol_artifacts(space: &FockSpace, out: &ProtocolOutcome<f64>, art: &mut Artifacts, r: &mut Report) -> Result<()> {
    let d = &out.diagnostics;
    art.csv("dark_population.csv", "t,population", d.dark_population.iter().map(|&(t, p)| vec![t, p]))?;
    let rows = [Mode::Probe1, Mode::Probe2].into_iter().enumerate().flat_map(|(k, m)| {
        mode_distribution(space, &out.released, m).into_iter().enumerate().map(move |(n, p)| vec![(k + 1) as f64, n as f64, p])
    });
    art.csv("photon_numbers.csv", "probe,n,probability", rows.collect::<Vec<_>>())?;
    r.info("min_dark_population", d.min_dark_population);
    r.info("stored_leakage", d.stored_leakage);
    r.info("steps", d.steps as f64);
    r.info("norm_drift", d.norm_drift);
    r.info("excitation_drift", d.excitation_drift);
    r.info("mean_photons_probe1", out.released.mean_occupation(space, Mode::Probe1));
    r.info("mean_photons_probe2", out.released.mean_occupation(space, Mode::Probe2));
    Ok(())
}

fn store_release(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let (space, out) = run_protocol(cfg)?;
    let mut r = Report::default();
    protocol_artifacts(&space, &out, art, &mut r)?;
    let f = out.diagnostics.fidelity.context("no ideal output for this input")?;
    r.metrics.push(Metric::at_least("fidelity", f, cfg.protocol.min_fidelity));
    if cfg.protocol.input == "single-photon" {
        let amp = |m: Mode| out.released.amplitude(&space, &BasisState::single(m, 1)).norm();
        r.info("amplitude_probe1", amp(Mode::Probe1));
        r.info("amplitude_probe2", amp(Mode::Probe2));
    }
    Ok(r)
}

fn cat_entangle(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let p = &cfg.protocol;
    let sign = match p.input.as_str() {
        "cat-plus" => CatSign::Plus,
        "cat-minus" => CatSign::Minus,
        other => bail!("cat-entangle needs a cat input, got '{other}'"),
    };
    let (space, out) = run_protocol(cfg)?;
    let mut r = Report::default();
    protocol_artifacts(&space, &out, art, &mut r)?;
    let alpha = Cx::new(p.alpha, p.alpha_im);
    let entropy = entanglement_entropy(&reduce(&space, &out.released, &[Mode::Probe1])?, EntropyBase::Bits);
    let ideal = ecs_entropy(alpha.scale(p.phi_e.cos()), alpha.scale(p.phi_e.sin()), sign, EntropyBase::Bits);
    r.info("entropy_bits", entropy);
    r.info("ideal_entropy_bits", ideal);
    r.metrics.push(Metric::at_least("fidelity", out.diagnostics.fidelity.unwrap_or(0.0), p.min_fidelity));
    r.metrics.push(Metric::at_most("entropy_error_bits", (entropy - ideal).abs(), p.entropy_tolerance));
    let grid: Vec<f64> = (0..9).map(|k| k as f64 * std::f64::consts::FRAC_PI_2 / 8.0).collect();
    let curve = entanglement_vs_release_angle(&space, alpha.norm(), sign, &grid, EntropyBase::Bits)?;
    art.csv("entropy_vs_phi.csv", "phi_e,entropy,closed_form", curve.iter().map(|c| vec![c.phi_e, c.entropy, c.entropy_closed_form]))?;
    Ok(r)
}

fn algebra_check(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let a = &cfg.algebra;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let draw = |rng: &mut ChaCha8Rng, symmetric: bool| -> Result<(CouplingParams<f64>, f64, f64)> {
        let g1 = rng.gen_range(0.2..2.0);
        let g2 = if symmetric { g1 } else { rng.gen_range(0.2..2.0) };
        let n = rng.gen_range(10.0..1000.0f64).round();
        Ok((CouplingParams::new(g1, g2, n, 0.0)?, rng.gen_range(0.1..20.0), rng.gen_range(0.1..20.0)))
    };

    let space = build_space(a.cutoff)?;
    let mut dark = 0.0f64;
    for k in 0..a.draws {
        let (p, o1, o2) = draw(&mut rng, false)?;
        let v = build_hamiltonian(&space, &p, o1, o2);
        let norm = spectral_norm(&p, o1, o2, a.cutoff);
        let angles = mixing_angles(&p, o1, o2)?;
        for n in 0..=a.max_n {
            let res = v.apply(&dark_state(&space, n, angles)?).norm() / norm;
            dark = dark.max(res);
            rows.push(vec![0.0, k as f64, n as f64, res]);
        }
    }

    let mut comm = 0.0f64;
    let headroom = a.cutoff - 1;
    for k in 0..a.draws {
        let (p, o1, o2) = draw(&mut rng, true)?;
        let v = build_hamiltonian(&space, &p, o1, o2);
        let set = polariton_set(&space, &p, o1, o2)?;
        let (e1, e2) = set.energies.context("polariton energies need g1 = g2")?;
        let zero = SparseOperator::zero(space.dim());
        let raise = |x: &SparseOperator<f64>, e: f64| x.adjoint().scaled(Cx::new(e, 0.0));
        let residual = |x: &SparseOperator<f64>, e: f64| {
            SparseOperator::commutator(&v, &x.adjoint()).sub(&raise(x, e)).max_abs_restricted(&space, headroom)
        };
        let pq = |x: &SparseOperator<f64>, y: &SparseOperator<f64>| {
            SparseOperator::commutator(&x.adjoint(), &y.adjoint()).sub(&zero).max_abs_restricted(&space, headroom)
        };
        let checks = [
            residual(&set.d, 0.0),
            residual(&set.q_plus, e1),
            residual(&set.q_minus, -e1),
            residual(&set.p_plus, e2),
            residual(&set.p_minus, -e2),
            pq(&set.p_plus, &set.q_plus),
            pq(&set.p_minus, &set.q_minus),
        ];
        for (j, c) in checks.iter().enumerate() {
            comm = comm.max(*c);
            rows.push(vec![1.0, k as f64, j as f64, *c]);
        }
    }

    let deg_space = build_space(a.max_total + 2)?;
    let p = CouplingParams::<f64>::symmetric(1.0, 100.0)?;
    let mut eig = 0.0f64;
    for (k, (o1, o2)) in [(3.0, 4.0), (0.7, 12.0)].into_iter().enumerate() {
        let v = build_hamiltonian(&deg_space, &p, o1, o2);
        let set = polariton_set(&deg_space, &p, o1, o2)?;
        let (e1, _) = set.energies.context("polariton energies need g1 = g2")?;
        for (j, idx) in DegeneracyIndex::all_up_to(a.max_total).into_iter().enumerate() {
            let st = degeneracy_state(&deg_space, &set, idx)?;
            let res = v.apply(&st.state).add_scaled(Cx::new(-st.eigenvalue, 0.0), &st.state).norm();
            let rel = res / st.eigenvalue.abs().max(e1);
            eig = eig.max(rel);
            rows.push(vec![2.0, k as f64, j as f64, rel]);
        }
    }

    let mix_space = build_space(a.cutoff)?;
    let limit = a.cutoff - 2;
    let mut indices = Vec::new();
    for i in 0..=limit / 2 {
        for k in 0..=limit / 2 {
            for n in 0..=limit {
                if 2 * i + 2 * k + n <= limit {
                    indices.push(DegeneracyIndex::zero_class(i, k, n));
                }
            }
        }
    }
    let mut mix = 0.0f64;
    for (k, (theta, phi)) in [(0.3, 0.4), (1.1, 0.9), (0.8, 1.3)].into_iter().enumerate() {
        let set = PolaritonSet::from_angles(&mix_space, MixingAngles::new(theta, phi), Some((11.0, 10.0)));
        for which in [AngleKind::Theta, AngleKind::Phi] {
            let m = adiabatic_mixing_matrix(&mix_space, &set, &indices, which, 1e-4)?;
            let mut worst = 0.0f64;
            for (x, ix) in indices.iter().enumerate() {
                for (y, iy) in indices.iter().enumerate() {
                    if (ix.i, ix.k) != (iy.i, iy.k) {
                        worst = worst.max(m[(x, y)].norm());
                    }
                }
            }
            mix = mix.max(worst);
            rows.push(vec![3.0, k as f64, if which == AngleKind::Theta { 0.0 } else { 1.0 }, worst]);
        }
    }

    art.csv("residuals.csv", "check,draw,item,residual", rows)?;
    let mut r = Report::default();
    r.metrics.push(Metric::at_most("dark_state_residual", dark, a.tolerance));
    r.metrics.push(Metric::at_most("commutator_residual", comm, a.tolerance));
    r.metrics.push(Metric::at_most("degeneracy_residual", eig, a.eigen_tolerance));
    r.metrics.push(Metric::at_most("cross_sector_overlap", mix, a.mixing_tolerance));
    r.info("zero_class_states", indices.len() as f64);
    Ok(r)
}

fn adiabatic_scan(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let unit = 1.0 / cfg.gn();
    let ramps = cfg.scan.ramps.clone().unwrap_or_else(|| vec![10.0 * unit, 20.0 * unit, 40.0 * unit]);
    let mut rows = Vec::new();
    let mut infid = Vec::new();
    for &ramp in &ramps {
        let mut c = cfg.clone();
        c.protocol.ramp = Some(ramp);
        let (_, out) = run_protocol(&c).with_context(|| format!("ramp {ramp} s"))?;
        let f = out.diagnostics.fidelity.context("no ideal output for this input")?;
        infid.push(1.0 - f);
        rows.push(vec![ramp, f, 1.0 - f, out.diagnostics.min_dark_population, out.diagnostics.steps as f64]);
    }
    art.csv("scan.csv", "ramp,fidelity,infidelity,min_dark_population,steps", rows)?;
    let violations = infid.windows(2).filter(|w| w[1] >= w[0]).count();
    let mut r = Report::default();
    r.metrics.push(Metric::at_most("monotonicity_violations", violations as f64, 0.0));
    r.metrics.push(Metric::at_least("fidelity_longest_ramp", 1.0 - infid[infid.len() - 1], cfg.protocol.min_fidelity));
    Ok(r)
}

fn continuum(cfg: &Config) -> Result<(ContinuumParams<f64>, Scaled<f64>)> {
    let m = &cfg.medium;
    let cp = ContinuumParams { gn1: m.gn1, gn2: m.gn2, gamma: m.gamma, c: m.c, length: m.length, n_atoms: m.n_atoms };
    let s = cp.internal()?;
    Ok((cp, s))
}

fn propagate(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let q = &cfg.propagate;
    let (cp, s) = continuum(cfg)?;
    let (tu, lu) = (cp.time_unit(), cp.length_unit());
    let mut segments: Vec<Segment<f64>> = q
        .segments
        .iter()
        .map(|g| {
            let from = (cp.rate_to_internal(g.omega1), cp.rate_to_internal(g.omega2));
            let profile = match (g.to_omega1, g.to_omega2) {
                (Some(a), Some(b)) => Profile::CosineRamp { from, to: (cp.rate_to_internal(a), cp.rate_to_internal(b)) },
                _ => Profile::Constant { omega1: from.0, omega2: from.1 },
            };
            Segment::new(g.start / tu, g.end / tu, profile)
        })
        .collect();
    // controls hold their final values after the last segment
    let last = segments[segments.len() - 1];
    let (o1, o2) = last.eval(last.t_end);
    segments.push(Segment::new(last.t_end, last.t_end.max(q.t_end / tu) + 1.0, Profile::Constant { omega1: o1, omega2: o2 }));
    let schedule = ControlSchedule::new(segments)?;
    let mut sim = prop::SimulationSpec::new(q.nz, q.pad / lu, q.t_end / tu, schedule);
    sim.courant = q.courant;
    sim.input = Some(prop::InputPulse {
        amplitude1: Cx::new(q.pulse.amplitude1, 0.0),
        amplitude2: Cx::new(q.pulse.amplitude2, 0.0),
        shape: prop::PulseShape::Gaussian { center: q.pulse.center / tu, width: q.pulse.width / tu },
    });
    sim.snapshot_every = (q.snapshot_every > 0).then_some(q.snapshot_every);
    sim.probe_planes = vec![0.0, s.length];
    let (_, rec) = prop::simulate(&s, &sim, None)?;

    let snaps: Vec<prop::Snapshot<f64>> =
        rec.snapshots.iter().map(|x| prop::Snapshot { t: x.t * tu, ..x.clone() }).collect();
    if q.format != "binary" {
        let mut w = art.create("fields.csv")?;
        field_io::write_csv(&mut w, rec.dz * lu, &snaps)?;
        w.flush()?;
    }
    if q.format != "csv" {
        let mut w = art.create("fields.dlfr")?;
        field_io::write_binary(&mut w, rec.dz * lu, &snaps)?;
        w.flush()?;
    }
    art.csv("energy.csv", "t,energy", rec.energy.iter().map(|&(t, e)| vec![t * tu, e]))?;
    let probe_rows = rec.probes.iter().flat_map(|p| {
        p.times.iter().zip(p.e1.iter().zip(&p.e2)).map(move |(&t, (a, b))| vec![t * tu, p.z * lu, a.re, a.im, b.re, b.im])
    });
    art.csv("probes.csv", "t,z,re_e1,im_e1,re_e2,im_e2", probe_rows.collect::<Vec<_>>())?;

    let mut r = Report::default();
    let arrival = |p: &prop::ProbeSeries<f64>| {
        let (mut m0, mut m1) = (0.0, 0.0);
        for (&t, (a, b)) in p.times.iter().zip(p.e1.iter().zip(&p.e2)) {
            let w = a.norm_sqr() + b.norm_sqr();
            m0 += w;
            m1 += w * t;
        }
        (m1 / m0, m0)
    };
    let (t_in, f_in) = arrival(&rec.probes[0]);
    let (t_out, f_out) = arrival(&rec.probes[1]);
    r.info("transmission", f_out / f_in);
    r.info("delay_s", (t_out - t_in) * tu);
    r.info("steps", rec.steps as f64);
    r.metrics.push(Metric::at_most("low_excitation_violations", rec.low_excitation_violations as f64, 0.0));
    if let [seg] = q.segments.as_slice() {
        if seg.to_omega1.is_none() {
            let angles = s.angles(cp.rate_to_internal(seg.omega1), cp.rate_to_internal(seg.omega2), 0.0);
            let expected = angles.theta.cos().powi(2);
            let measured = (s.length - rec.probes[0].z) / (t_out - t_in);
            r.info("group_velocity_m_per_s", measured * cfg.medium.c);
            r.info("expected_velocity_m_per_s", expected * cfg.medium.c);
            r.metrics.push(Metric::at_most("velocity_error", (measured / expected - 1.0).abs(), q.velocity_tolerance));
        }
    }
    Ok(r)
}

fn pulse_matching(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let pm = &cfg.pulse_matching;
    let (cp, s) = continuum(cfg)?;
    let tu = cp.time_unit();
    let default = s.gn1 / 2f64.sqrt();
    let o1 = pm.omega1.map_or(default, |x| cp.rate_to_internal(x));
    let o2 = pm.omega2.map_or(default, |x| cp.rate_to_internal(x));
    let spec = prop::PulseMatchingSpec::standard(&s, o1, o2);
    let rec = prop::pulse_matching_probe(&s, o1, o2, &spec)?;
    art.csv("s_norm.csv", "t,s_norm", rec.s_norm.iter().map(|&(t, n)| vec![t * tu, n]))?;
    art.csv("ratio.csv", "t,re_ratio,im_ratio", rec.ratio.iter().map(|&(t, z)| vec![t * tu, z.re, z.im]))?;
    let lifetime = tu / rec.fitted_rate;
    let mut r = Report::default();
    r.info("final_ratio_re", rec.final_ratio.re);
    r.info("final_ratio_im", rec.final_ratio.im);
    r.info("tan_phi", rec.tan_phi);
    r.info("fitted_rate", rec.fitted_rate);
    r.info("predicted_rate", rec.predicted_rate);
    r.info("lifetime_s", lifetime);
    r.metrics.push(Metric::at_most("ratio_error", (rec.final_ratio - Cx::new(rec.tan_phi, 0.0)).norm() / rec.tan_phi, pm.ratio_tolerance));
    r.metrics.push(Metric::at_most("rate_error", (rec.fitted_rate / rec.predicted_rate - 1.0).abs(), pm.rate_tolerance));
    let factor = (lifetime / pm.expected_lifetime).max(pm.expected_lifetime / lifetime);
    r.metrics.push(Metric::at_most("lifetime_factor", factor, pm.lifetime_factor));
    Ok(r)
}

fn bandwidth(cfg: &Config, art: &mut Artifacts) -> Result<Report> {
    let b = &cfg.bandwidth;
    let (cp, s) = continuum(cfg)?;
    let rate = 1.0 / cp.time_unit();
    let mut spec = prop::BandwidthSpec::standard(&s, b.theta0, b.theta1, b.phi, b.ratio)?;
    if let Some(nz) = b.nz {
        spec.nz = nz;
    }
    let scan = prop::bandwidth_scan(&s, &spec, &b.transmission_ratios, b.cells_per_width)?;
    let rows = scan.transmission.iter().map(|t| vec![t.ratio, t.pulse_bandwidth * rate, t.window * rate, t.transmission, t.predicted]);
    art.csv("transmission.csv", "ratio,pulse_bandwidth,window,transmission,predicted", rows.collect::<Vec<_>>())?;
    let c = &scan.change;
    let mut r = Report::default();
    r.info("width_ratio", c.measured_ratio);
    r.info("predicted_width_ratio", c.predicted_ratio);
    r.info("window0_measured", scan.windows.0.measured * rate);
    r.info("window0_predicted", scan.windows.0.predicted * rate);
    r.info("window1_measured", scan.windows.1.measured * rate);
    r.info("window1_predicted", scan.windows.1.predicted * rate);
    r.info("measured_window_ratio", scan.measured_window_ratio);
    r.info("measured_relative_bandwidth", scan.measured_relative_bandwidth);
    r.info("predicted_relative_bandwidth", scan.predicted_relative_bandwidth);
    r.metrics.push(Metric::at_most("width_ratio_error", (c.measured_ratio / c.predicted_ratio - 1.0).abs(), b.width_tolerance));
    for t in scan.transmission.iter().filter(|t| t.ratio <= b.narrowband_limit) {
        r.metrics.push(Metric::at_least(format!("transmission_at_{}", t.ratio), t.transmission, b.min_transmission));
    }
    Ok(r)
}
