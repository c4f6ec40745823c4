//! Continuum scenarios: polariton transport, storage and release, pulse
//! matching and bandwidth measurements. All quantities here are in the
//! solver's internal units (see the module docs).

use std::sync::Arc;

use num_traits::Zero;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{FieldGrid, Scaled, StepOptions, Stepper};
use crate::dynamics::{ControlSchedule, Profile, Segment};
use crate::ensemble::CouplingParams;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

/// Temporal shape of the field injected at `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PulseShape<T> {
    /// `exp(-((t - center) / width)^2)`.
    Gaussian { center: T, width: T },
    /// Raised-cosine switch-on over `[start, start + rise]`, then constant.
    Cw { start: T, rise: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPulse<T> {
    pub amplitude1: Cx<T>,
    pub amplitude2: Cx<T>,
    pub shape: PulseShape<T>,
}

impl<T: Real> InputPulse<T> {
    pub fn gaussian_e1(amplitude: T, center: T, width: T) -> Self {
        Self {
            amplitude1: Cx::new(amplitude, T::zero()),
            amplitude2: Cx::zero(),
            shape: PulseShape::Gaussian { center, width },
        }
    }

    pub fn envelope(&self, t: T) -> T {
        match self.shape {
            PulseShape::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-x * x).exp()
            }
            PulseShape::Cw { start, rise } => {
                if t <= start {
                    T::zero()
                } else if t >= start + rise {
                    T::one()
                } else {
                    (T::one() - (T::PI() * (t - start) / rise).cos()) / T::of(2.0)
                }
            }
        }
    }

    pub fn eval(&self, t: T) -> (Cx<T>, Cx<T>) {
        let f = self.envelope(t);
        (self.amplitude1.scale(f), self.amplitude2.scale(f))
    }

    /// `int |E1|^2 + |E2|^2 dt` of a Gaussian pulse (infinite for CW).
    pub fn energy(&self) -> T {
        let a = self.amplitude1.norm_sqr() + self.amplitude2.norm_sqr();
        match self.shape {
            PulseShape::Gaussian { width, .. } => a * width * (T::PI() / T::of(2.0)).sqrt(),
            PulseShape::Cw { .. } => T::infinity(),
        }
    }
}

/// Controls realizing the mixing angles `(theta, phi)` in internal units.
pub fn controls_for<T: Real>(params: &Scaled<T>, theta: T, phi: T) -> (T, T) {
    let cp = CouplingParams { g1: params.gn1, g2: params.gn2, n_atoms: T::one(), gamma: params.gamma };
    crate::dynamics::controls_for_angles(&cp, theta, phi)
}

fn couplings<T: Real>(params: &Scaled<T>) -> CouplingParams<T> {
    CouplingParams { g1: params.gn1, g2: params.gn2, n_atoms: T::one(), gamma: params.gamma }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSpec<T> {
    pub nz: usize,
    /// Vacuum beyond the medium.
    pub pad: T,
    /// `c dt / dz`, at most one.
    pub courant: T,
    pub t_end: T,
    pub schedule: ControlSchedule<T>,
    pub input: Option<InputPulse<T>>,
    /// Store a full snapshot every this many steps.
    pub snapshot_every: Option<usize>,
    /// Record `E1`, `E2` at these positions every step.
    pub probe_planes: Vec<T>,
    pub step: StepOptions,
    /// Fallback `phi` for diagnostics while both controls are off.
    pub held_phi: T,
}

impl<T: Real> SimulationSpec<T> {
    pub fn new(nz: usize, pad: T, t_end: T, schedule: ControlSchedule<T>) -> Self {
        Self {
            nz,
            pad,
            courant: T::one(),
            t_end,
            schedule,
            input: None,
            snapshot_every: None,
            probe_planes: Vec::new(),
            step: StepOptions::default(),
            held_phi: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub t: T,
    pub e1: Vec<Cx<T>>,
    pub e2: Vec<Cx<T>>,
    pub s_bc: Vec<Cx<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries<T> {
    pub z: T,
    pub index: usize,
    pub times: Vec<T>,
    pub e1: Vec<Cx<T>>,
    pub e2: Vec<Cx<T>>,
}

impl<T: Real> ProbeSeries<T> {
    /// `int |E|^2 dt` over samples with `t >= after`.
    pub fn fluence(&self, after: T) -> (T, T) {
        if self.times.len() < 2 {
            return (T::zero(), T::zero());
        }
        let dt = self.times[1] - self.times[0];
        let mut w = (T::zero(), T::zero());
        for k in 0..self.times.len() {
            if self.times[k] >= after {
                w.0 = w.0 + self.e1[k].norm_sqr() * dt;
                w.1 = w.1 + self.e2[k].norm_sqr() * dt;
            }
        }
        w
    }
}

#[derive(Clone, Debug)]
pub struct SimulationRecord<T> {
    pub dz: T,
    pub dt: T,
    pub medium_cells: usize,
    pub snapshots: Vec<Snapshot<T>>,
    pub probes: Vec<ProbeSeries<T>>,
    /// `(t, total excitation)` every step.
    pub energy: Vec<(T, T)>,
    /// Injected `int |E_in|^2 dt`.
    pub injected: T,
    pub low_excitation_violations: usize,
    pub steps: usize,
}

/// Runs the solver from `grid` (or an empty grid) up to `spec.t_end`.
///
/// Controls are evaluated at each step's midpoint; the inflow at the end of
/// the step.
pub fn simulate<T: Real>(
    params: &Scaled<T>,
    spec: &SimulationSpec<T>,
    initial: Option<FieldGrid<T>>,
) -> Result<(FieldGrid<T>, SimulationRecord<T>)> {
    if !(spec.courant > T::zero() && spec.courant <= T::one()) {
        return Err(Error::Cfl { courant: spec.courant.as_f64() });
    }
    let mut grid = match initial {
        Some(g) => g,
        None => FieldGrid::new(params, spec.nz, spec.pad)?,
    };
    let dt = spec.courant * grid.dz;
    let n_steps = ((spec.t_end - grid.time) / dt).ceil().max(T::zero()).to_usize().unwrap_or(0);
    let mut stepper = Stepper::new(*params, spec.step);
    let mut probes: Vec<ProbeSeries<T>> = spec
        .probe_planes
        .iter()
        .map(|&z| {
            let index = grid.index_of(z);
            ProbeSeries { z: grid.z(index), index, times: Vec::new(), e1: Vec::new(), e2: Vec::new() }
        })
        .collect();
    let mut rec = SimulationRecord {
        dz: grid.dz,
        dt,
        medium_cells: grid.medium_cells,
        snapshots: Vec::new(),
        probes: Vec::new(),
        energy: vec![(grid.time, grid.energy())],
        injected: T::zero(),
        low_excitation_violations: 0,
        steps: 0,
    };
    let snap = |g: &FieldGrid<T>| Snapshot { t: g.time, e1: g.e1.clone(), e2: g.e2.clone(), s_bc: g.s_bc.clone() };
    if spec.snapshot_every.is_some() {
        rec.snapshots.push(snap(&grid));
    }
    for k in 0..n_steps {
        let mid = grid.time + dt / T::of(2.0);
        let (o1, o2) = spec.schedule.controls(mid)?;
        let t_next = grid.time + dt;
        let inflow = spec.input.map(|p| p.eval(t_next)).unwrap_or((Cx::zero(), Cx::zero()));
        rec.injected = rec.injected + (inflow.0.norm_sqr() + inflow.1.norm_sqr()) * dt;
        let report = stepper.step(&mut grid, o1, o2, dt, inflow)?;
        if report.low_excitation_violated {
            rec.low_excitation_violations += 1;
        }
        rec.steps += 1;
        rec.energy.push((grid.time, grid.energy()));
        for p in probes.iter_mut() {
            p.times.push(grid.time);
            p.e1.push(grid.e1[p.index]);
            p.e2.push(grid.e2[p.index]);
        }
        if let Some(every) = spec.snapshot_every {
            if (k + 1) % every.max(1) == 0 {
                rec.snapshots.push(snap(&grid));
            }
        }
    }
    rec.probes = probes;
    Ok((grid, rec))
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T) {
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        sxy = sxy + (*a - mx) * (*b - my);
        sxx = sxx + (*a - mx) * (*a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSpec<T> {
    pub nz: usize,
    /// Initial centre of the polariton, as a fraction of `L`.
    pub start: T,
    /// Gaussian `1/e` half-width of `Psi` (internal length).
    pub width: T,
    pub duration: T,
    /// Centroid samples per run.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportResult<T> {
    pub theta: T,
    pub times: Vec<T>,
    pub centroids: Vec<T>,
    pub velocity: T,
    /// `c cos^2(theta)`.
    pub expected: T,
    pub relative_error: T,
}

/// Loads a Gaussian dark polariton inside the medium at constant controls
/// and fits the velocity of the `|Psi|^2` centroid.
pub fn run_transport<T: Real>(params: &Scaled<T>, theta: T, phi: T, spec: &TransportSpec<T>) -> Result<TransportResult<T>> {
    let (o1, o2) = controls_for(params, theta, phi);
    let schedule = ControlSchedule::constant(T::zero(), spec.duration * T::of(1.01) + T::one(), o1, o2)?;
    let mut grid = FieldGrid::new(params, spec.nz, T::zero())?;
    let angles = params.angles(o1, o2, phi);
    let (z0, w) = (spec.start * params.length, spec.width);
    grid.load_polariton(angles, |z| {
        let x = (z - z0) / w;
        Cx::new((-x * x).exp(), T::zero())
    });
    let dt = grid.dz;
    let total = (spec.duration / dt).round().to_usize().unwrap_or(1).max(1);
    let every = (total / spec.samples.max(2)).max(1);
    let mut sim = SimulationSpec::new(spec.nz, T::zero(), T::zero(), schedule);
    sim.held_phi = phi;
    let mut times = Vec::new();
    let mut centroids = Vec::new();
    let centroid = |g: &FieldGrid<T>| {
        let d = super::polariton_diagnostics(g, params, o1, o2, phi);
        let (mut m0, mut m1) = (T::zero(), T::zero());
        for (i, p) in d.psi.iter().enumerate() {
            let w = p.norm_sqr();
            m0 = m0 + w;
            m1 = m1 + w * g.z(i);
        }
        m1 / m0
    };
    times.push(grid.time);
    centroids.push(centroid(&grid));
    let mut done = 0;
    while done < total {
        let n = every.min(total - done);
        sim.t_end = grid.time + dt * (T::of_usize(n) - T::of(0.5));
        let (g, _) = simulate(params, &sim, Some(grid))?;
        grid = g;
        done += n;
        times.push(grid.time);
        centroids.push(centroid(&grid));
    }
    let (velocity, _) = linear_fit(&times, &centroids);
    let expected = theta.cos() * theta.cos();
    Ok(TransportResult { theta, times, centroids, velocity, expected, relative_error: (velocity - expected).abs() / expected })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec<T> {
    pub nz: usize,
    pub pad: T,
    /// Mixing angles while the pulse enters.
    pub theta0: T,
    pub phi0: T,
    /// Release angle.
    pub phi_e: T,
    /// Mixing angle after release.
    pub theta_release: T,
    pub pulse_center: T,
    pub pulse_width: T,
    pub amplitude: T,
    /// Start of the switch-off ramp.
    pub store_at: T,
    pub ramp: T,
    pub hold: T,
    /// Extra time after the release ramp for the pulse to leave.
    pub drain: T,
    pub snapshot_every: Option<usize>,
    pub step: StepOptions,
}

impl<T: Real> StorageSpec<T> {
    /// A working default for `g sqrt(N) ~ 10 Gamma` media of length ~ 20.
    pub fn standard(params: &Scaled<T>, phi_e: T) -> Self {
        let theta0 = T::FRAC_PI_4();
        let v0 = theta0.cos().powi(2);
        let width = T::of(0.12) * params.length / v0 / T::of(2.0);
        let center = T::of(3.0) * width;
        // front of the pulse (centre + 2.5 widths) stays within 80% of L
        let store_at = center + T::of(0.45) * params.length / v0 - T::of(1.5) * width;
        let ramp = T::of(4.0) * width;
        Self {
            nz: 2000,
            pad: T::of(0.25) * params.length,
            theta0,
            phi0: T::zero(),
            phi_e,
            theta_release: theta0,
            pulse_center: center,
            pulse_width: width,
            amplitude: T::of(1e-3),
            store_at,
            ramp,
            hold: ramp,
            drain: (params.length + T::of(0.25) * params.length) / v0 + T::of(6.0) * width,
            snapshot_every: None,
            step: StepOptions::default(),
        }
    }

    pub fn release_start(&self) -> T {
        self.store_at + self.ramp + self.hold
    }

    pub fn end(&self) -> T {
        self.release_start() + self.ramp + self.drain
    }

    /// Mixing-angle ramps: `theta0 -> pi/2` at `phi0`, hold, then
    /// `pi/2 -> theta_release` at `phi_e`.
    pub fn schedule(&self, params: &Scaled<T>) -> Result<ControlSchedule<T>> {
        let cp = couplings(params);
        let start = controls_for(params, self.theta0, self.phi0);
        let end = controls_for(params, self.theta_release, self.phi_e);
        let zero = (T::zero(), T::zero());
        let t1 = self.store_at;
        let t2 = t1 + self.ramp;
        let t3 = t2 + self.hold;
        let t4 = t3 + self.ramp;
        let mut segs = vec![
            Segment::new(T::zero(), t1, Profile::Constant { omega1: start.0, omega2: start.1 }),
            Segment::new(t1, t2, Profile::angle_ramp(&cp, start, zero)?),
        ];
        if self.hold > T::zero() {
            segs.push(Segment::new(t2, t3, Profile::Constant { omega1: T::zero(), omega2: T::zero() }));
        }
        segs.push(Segment::new(t3, t4, Profile::angle_ramp(&cp, zero, end)?));
        segs.push(Segment::new(t4, self.end().max(t4 + T::one()) + T::one(), Profile::Constant { omega1: end.0, omega2: end.1 }));
        ControlSchedule::new(segs)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StorageOutcome<T> {
    pub injected: T,
    /// Fluence leaving the medium before the release ramp starts.
    pub leaked: T,
    /// Released fluences `(W1, W2)` at the output plane.
    pub released: (T, T),
    /// `W2 / W1`.
    pub ratio: T,
    /// `tan^2(phi_e)`.
    pub expected_ratio: T,
    /// `(sqrt(W1/(W1+W2)), sqrt(W2/(W1+W2)))`.
    pub amplitude_split: (T, T),
    /// `int |S_bc|^2 dz` at the end of the hold.
    pub stored: T,
    /// `S_bc(z)` at the end of the hold.
    pub spin_wave: Vec<Cx<T>>,
    pub efficiency: T,
    /// Input bandwidth over the initial transparency window.
    pub bandwidth_ratio: T,
    pub low_excitation_violations: usize,
    #[serde(skip)]
    pub record: Option<SimulationRecord<T>>,
}

/// Injects a Gaussian `E1` pulse, stores it in the `b-c` coherence, and
/// releases it into both probe modes with the split set by `phi_e`.
pub fn run_storage_scenario<T: Real>(params: &Scaled<T>, spec: &StorageSpec<T>) -> Result<StorageOutcome<T>> {
    let schedule = spec.schedule(params)?;
    let (o1, o2) = controls_for(params, spec.theta0, spec.phi0);
    let bandwidth_ratio = T::one() / (spec.pulse_width * params.transparency_window(o1, o2));
    if bandwidth_ratio >= T::one() {
        log::warn!(
            "input bandwidth is {:.2} times the transparency window; expect absorption",
            bandwidth_ratio.as_f64()
        );
    }
    let (c0, s0) = (spec.phi0.cos(), spec.phi0.sin());
    let pulse = InputPulse {
        amplitude1: Cx::new(spec.amplitude * c0, T::zero()),
        amplitude2: Cx::new(spec.amplitude * s0, T::zero()),
        shape: PulseShape::Gaussian { center: spec.pulse_center, width: spec.pulse_width },
    };
    let out_plane = params.length + spec.pad * T::of(0.5);
    let mut sim = SimulationSpec::new(spec.nz, spec.pad, spec.store_at + spec.ramp + spec.hold, schedule.clone());
    sim.input = Some(pulse);
    sim.probe_planes = vec![out_plane];
    sim.snapshot_every = spec.snapshot_every;
    sim.step = spec.step;
    sim.held_phi = spec.phi0;
    let (grid, first) = simulate(params, &sim, None)?;
    let spin_wave = grid.s_bc.clone();
    let stored = spin_wave.iter().map(|s| s.norm_sqr()).sum::<T>() * grid.dz;
    sim.t_end = spec.end();
    sim.held_phi = spec.phi_e;
    let (_, second) = simulate(params, &sim, Some(grid))?;
    let record = merge_records(first, second);
    let probe = &record.probes[0];
    let release_start = spec.release_start();
    let leaked = {
        let (a, b) = probe.fluence(T::neg_infinity());
        let (c, d) = probe.fluence(release_start);
        a + b - c - d
    };
    let released = probe.fluence(release_start);
    let total = released.0 + released.1;
    let split = if total > T::zero() {
        ((released.0 / total).sqrt(), (released.1 / total).sqrt())
    } else {
        (T::zero(), T::zero())
    };
    let tan = spec.phi_e.tan();
    Ok(StorageOutcome {
        injected: record.injected,
        leaked,
        released,
        ratio: released.1 / released.0,
        expected_ratio: tan * tan,
        amplitude_split: split,
        stored,
        spin_wave,
        efficiency: total / record.injected,
        bandwidth_ratio,
        low_excitation_violations: record.low_excitation_violations,
        record: Some(record),
    })
}

fn merge_records<T: Real>(mut a: SimulationRecord<T>, b: SimulationRecord<T>) -> SimulationRecord<T> {
    a.snapshots.extend(b.snapshots.into_iter().skip(1));
    for (pa, pb) in a.probes.iter_mut().zip(b.probes) {
        pa.times.extend(pb.times);
        pa.e1.extend(pb.e1);
        pa.e2.extend(pb.e2);
    }
    a.energy.extend(b.energy.into_iter().skip(1));
    a.injected = a.injected + b.injected;
    a.low_excitation_violations += b.low_excitation_violations;
    a.steps += b.steps;
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseMatchingSpec<T> {
    pub nz: usize,
    pub pad: T,
    pub rise: T,
    pub t_end: T,
    pub amplitude: T,
    /// Samples of `int |s|^2 dz` per run.
    pub samples: usize,
}

impl<T: Real> PulseMatchingSpec<T> {
    /// Grid fine enough to resolve the `s` absorption length `Gamma/(g^2 N)`.
    pub fn standard(params: &Scaled<T>, omega1: T, omega2: T) -> Self {
        let kappa = params.s_decay_rate(omega1, omega2);
        let dz = T::of(0.05) / kappa;
        let nz = ((params.length * T::of(1.2)) / dz).ceil().to_usize().unwrap_or(1000) + 1;
        let angles = params.angles(omega1, omega2, T::zero());
        let v = angles.theta.cos().powi(2);
        let rise = T::of(20.0) / params.transparency_window(omega1, omega2).min(T::of(1e3) * kappa);
        Self {
            nz,
            pad: params.length * T::of(0.2),
            rise,
            // the switch-on transient rings for tens of transit times
            t_end: rise + T::of(50.0) * params.length / v,
            amplitude: T::of(1e-3),
            samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseMatchingRecord<T> {
    /// `(t, int |s|^2 dz)` over the medium.
    pub s_norm: Vec<(T, T)>,
    /// `(t, E2/E1)` at the output face of the medium.
    pub ratio: Vec<(T, Cx<T>)>,
    pub final_ratio: Cx<T>,
    pub tan_phi: T,
    /// Spatial decay rate of `|s|` fitted over the medium at the final time,
    /// times `c`.
    pub fitted_rate: T,
    pub predicted_rate: T,
    pub fit_points: usize,
}

/// Continuous-wave `E1` input with constant controls: `s` is absorbed and
/// `E2 / E1` locks to `tan(phi)`.
pub fn pulse_matching_probe<T: Real>(
    params: &Scaled<T>,
    omega1: T,
    omega2: T,
    spec: &PulseMatchingSpec<T>,
) -> Result<PulseMatchingRecord<T>> {
    if !(omega1 > T::zero() || omega2 > T::zero()) {
        return Err(Error::param("controls", "pulse matching needs a control field"));
    }
    let angles = params.angles(omega1, omega2, T::zero());
    let schedule = ControlSchedule::constant(T::zero(), spec.t_end * T::of(1.01) + T::one(), omega1, omega2)?;
    let mut sim = SimulationSpec::new(spec.nz, spec.pad, T::zero(), schedule);
    sim.input = Some(InputPulse {
        amplitude1: Cx::new(spec.amplitude, T::zero()),
        amplitude2: Cx::zero(),
        shape: PulseShape::Cw { start: T::zero(), rise: spec.rise },
    });
    sim.held_phi = angles.phi;
    let mut grid = FieldGrid::new(params, spec.nz, spec.pad)?;
    let exit = grid.medium_cells - 1;
    let (sp, cp) = angles.phi.sin_cos();
    let s_of = |g: &FieldGrid<T>, i: usize| g.e2[i].scale(cp) - g.e1[i].scale(sp);
    let mut s_norm = Vec::new();
    let mut ratio = Vec::new();
    let chunk = spec.t_end / T::of_usize(spec.samples.max(1));
    while grid.time < spec.t_end - grid.dz * T::of(0.5) {
        sim.t_end = (grid.time + chunk).min(spec.t_end);
        let (g, _) = simulate(params, &sim, Some(grid))?;
        grid = g;
        let sn = (0..grid.medium_cells).map(|i| s_of(&grid, i).norm_sqr()).sum::<T>() * grid.dz;
        s_norm.push((grid.time, sn));
        if grid.e1[exit].norm() > T::zero() {
            ratio.push((grid.time, grid.e2[exit] / grid.e1[exit]));
        }
    }
    // fit ln|s| over the part of the medium where s is well above round-off
    let s0 = s_of(&grid, 0).norm();
    let floor = s0 * T::of(1e-8);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..grid.medium_cells {
        let s = s_of(&grid, i).norm();
        if s <= floor || s >= s0 * T::of(0.5) {
            if s <= floor {
                break;
            }
            continue;
        }
        xs.push(grid.z(i));
        ys.push(s.ln());
    }
    let fitted_rate = if xs.len() >= 3 { -linear_fit(&xs, &ys).0 } else { T::nan() };
    let final_ratio = if grid.e1[exit].norm() > T::zero() { grid.e2[exit] / grid.e1[exit] } else { Cx::new(T::nan(), T::zero()) };
    Ok(PulseMatchingRecord {
        s_norm,
        ratio,
        final_ratio,
        tan_phi: angles.phi.tan(),
        fitted_rate,
        predicted_rate: params.s_decay_rate(omega1, omega2),
        fit_points: xs.len(),
    })
}

/// `|FFT|^2` of a uniformly sampled series zero-padded to `n` points, in
/// ascending frequency order; bin `k` sits at `(k - n/2) * 2 pi / (n dt)`.
fn power_spectrum<T: Real>(samples: &[Cx<T>], n: usize) -> Vec<f64> {
    let mut buf: Vec<num_complex::Complex<f64>> = samples
        .iter()
        .map(|z| num_complex::Complex::new(z.re.as_f64(), z.im.as_f64()))
        .chain(std::iter::repeat(num_complex::Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    (0..n).map(|k| buf[(k + n / 2) % n].norm_sqr()).collect()
}

fn padded_len(len: usize) -> usize {
    (len * 4).next_power_of_two()
}

/// Fractional bin where `f` first drops below `level`, walking from `start`
/// in direction `dir`.
fn crossing(f: &[f64], start: usize, dir: isize, level: f64) -> f64 {
    let mut k = start as isize;
    loop {
        let next = k + dir;
        if next < 0 || next >= f.len() as isize {
            return k as f64;
        }
        if f[next as usize] < level {
            let (p0, p1) = (f[k as usize], f[next as usize]);
            return k as f64 + dir as f64 * (p0 - level) / (p0 - p1);
        }
        k = next;
    }
}

/// Full width at half maximum of `|FFT|^2` of a uniformly sampled series
/// (angular frequency units, zero-padded to at least `4n` points).
pub fn spectral_fwhm<T: Real>(samples: &[Cx<T>], dt: T) -> T {
    let n = padded_len(samples.len());
    let power = power_spectrum(samples, n);
    let (peak_k, peak) = power.iter().enumerate().fold((0, 0.0), |m, (k, &p)| if p > m.1 { (k, p) } else { m });
    let width_bins = crossing(&power, peak_k, 1, peak / 2.0) - crossing(&power, peak_k, -1, peak / 2.0);
    T::of(width_bins * 2.0 * std::f64::consts::PI / (n as f64 * dt.as_f64()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMeasurement<T> {
    pub theta: T,
    /// `1/e` half-width of the measured intensity transmission spectrum.
    pub measured: T,
    /// `Omega_0^2 / (Gamma sqrt(OD))`.
    pub predicted: T,
    /// `1/e` point of the full linear EIT absorption
    /// `OD Gamma^2 / (Gamma^2 + (Omega_0^2/delta - delta)^2)`; the quadratic
    /// law above is its limit for `Omega_0^2 << Gamma^2 OD`.
    pub predicted_exact: T,
    /// Transmission at the line centre.
    pub peak_transmission: T,
}

/// Measures the transparency window at constant angles from the ratio of the
/// output and input spectra of a short Gaussian pulse.
pub fn measure_window<T: Real>(params: &Scaled<T>, theta: T, phi: T, cells_per_width: usize) -> Result<WindowMeasurement<T>> {
    let (o1, o2) = controls_for(params, theta, phi);
    let predicted = params.transparency_window(o1, o2);
    let v = theta.cos().powi(2);
    // a pulse three times broader than the window probes its edges
    let width = T::one() / (T::of(3.0) * predicted);
    let center = T::of(4.0) * width;
    let pad = T::of(0.02) * params.length;
    // in-window components travel at v; allow for the dispersive stretch
    let t_end = T::of(8.0) * width + (params.length / v) * T::of(1.5) + pad;
    let dz = (width / T::of_usize(cells_per_width.max(4))).min(params.length / T::of(500.0));
    let nz = ((params.length + pad) / dz).ceil().to_usize().unwrap_or(1000) + 1;
    let schedule = ControlSchedule::constant(T::zero(), t_end + T::one(), o1, o2)?;
    let mut sim = SimulationSpec::new(nz, pad, t_end, schedule);
    sim.input = Some(InputPulse {
        amplitude1: Cx::new(T::of(1e-3) * phi.cos(), T::zero()),
        amplitude2: Cx::new(T::of(1e-3) * phi.sin(), T::zero()),
        shape: PulseShape::Gaussian { center, width },
    });
    sim.probe_planes = vec![T::zero(), params.length + pad * T::of(0.5)];
    sim.held_phi = phi;
    let (_, rec) = simulate(params, &sim, None)?;
    let (c, s) = (phi.cos(), phi.sin());
    let e12 = |p: &ProbeSeries<T>| -> Vec<Cx<T>> { p.e1.iter().zip(&p.e2).map(|(a, b)| a.scale(c) + b.scale(s)).collect() };
    let input = e12(&rec.probes[0]);
    let output = e12(&rec.probes[1]);
    let n = padded_len(input.len());
    let pin = power_spectrum(&input, n);
    let pout = power_spectrum(&output, n);
    let floor = pin.iter().cloned().fold(0.0, f64::max) * 1e-6;
    let trans: Vec<f64> = pin.iter().zip(&pout).map(|(a, b)| if *a > floor { b / a } else { 0.0 }).collect();
    let mid = n / 2;
    let peak = trans[mid];
    let level = peak * (-1.0f64).exp();
    let half_bins = (crossing(&trans, mid, 1, level) - crossing(&trans, mid, -1, level)) / 2.0;
    let measured = T::of(half_bins * 2.0 * std::f64::consts::PI / (n as f64 * rec.dt.as_f64()));
    let od = params.optical_depth();
    let omega2 = o1 * o1 + o2 * o2;
    let b = params.gamma * (od - T::one()).max(T::zero()).sqrt();
    let predicted_exact = ((b * b + T::of(4.0) * omega2).sqrt() - b) / T::of(2.0);
    Ok(WindowMeasurement { theta, measured, predicted, predicted_exact, peak_transmission: T::of(peak) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec<T> {
    pub nz: usize,
    pub pad: T,
    pub theta0: T,
    pub theta1: T,
    pub phi: T,
    pub pulse_center: T,
    pub pulse_width: T,
    pub ramp_start: T,
    pub ramp: T,
    /// Probe planes as fractions of `L`.
    pub plane_in: T,
    pub plane_out: T,
    pub t_end: T,
}

impl<T: Real> BandwidthSpec<T> {
    /// Narrowband pulse (`Delta omega_p = ratio * Delta omega_tr(0)`) slowed
    /// from `theta0` to `theta1` while it is inside the medium. The probe
    /// planes sit just before and just after the ramp, so that the slowed
    /// pulse crosses little medium with the narrowed window. Errors when the
    /// layout does not fit into the medium.
    pub fn standard(params: &Scaled<T>, theta0: T, theta1: T, phi: T, ratio: T) -> Result<Self> {
        let (o1, o2) = controls_for(params, theta0, phi);
        let window = params.transparency_window(o1, o2);
        let width = T::one() / (ratio * window);
        let v0 = theta0.cos().powi(2);
        let v1 = theta1.cos().powi(2);
        let l = params.length;
        // spatial extent of the pulse inside the medium, in 1/e half-widths
        let half = width * v0;
        let center = T::of(3.0) * width;
        let z_in = T::of(0.05) * l;
        let z_ramp = z_in + T::of(3.0) * half;
        let ramp = T::of(4.0) * width;
        let z_after = z_ramp + ramp * (v0 + v1) / T::of(2.0);
        let z_out = z_after + T::of(3.0) * half;
        if z_out + T::of(0.5) * half > l {
            return Err(Error::param(
                "length",
                format!("pulse layout needs a medium longer than {}", (z_out + T::of(0.5) * half).as_f64()),
            ));
        }
        let ramp_start = center + z_ramp / v0;
        let t_end = ramp_start + ramp + (z_out - z_after) / v1 + T::of(3.0) * half / v1;
        Ok(Self {
            nz: 3000,
            pad: T::of(0.05) * l,
            theta0,
            theta1,
            phi,
            pulse_center: center,
            pulse_width: width,
            ramp_start,
            ramp,
            plane_in: z_in / l,
            plane_out: z_out / l,
            t_end,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResult<T> {
    pub width_in: T,
    pub width_out: T,
    pub measured_ratio: T,
    /// `cos^2 theta1 cos^2 phi1 / (cos^2 theta0 cos^2 phi0)`.
    pub predicted_ratio: T,
    /// `Delta omega_tr(t) / Delta omega_tr(0) = cot^2 theta1 / cot^2 theta0`.
    pub window_ratio: T,
    pub window0: T,
    pub pulse_bandwidth: T,
}

/// Measures the spectral width of `E1` at two probe planes around a change of
/// `theta` at fixed `phi`.
pub fn run_bandwidth_change<T: Real>(params: &Scaled<T>, spec: &BandwidthSpec<T>) -> Result<BandwidthResult<T>> {
    let cp = couplings(params);
    let a = controls_for(params, spec.theta0, spec.phi);
    let b = controls_for(params, spec.theta1, spec.phi);
    let r = spec.ramp_start;
    let schedule = ControlSchedule::new(vec![
        Segment::new(T::zero(), r, Profile::Constant { omega1: a.0, omega2: a.1 }),
        Segment::new(r, r + spec.ramp, Profile::angle_ramp(&cp, a, b)?),
        Segment::new(r + spec.ramp, spec.t_end + T::one(), Profile::Constant { omega1: b.0, omega2: b.1 }),
    ])?;
    let mut sim = SimulationSpec::new(spec.nz, spec.pad, spec.t_end, schedule);
    sim.input = Some(InputPulse {
        amplitude1: Cx::new(T::of(1e-3) * spec.phi.cos(), T::zero()),
        amplitude2: Cx::new(T::of(1e-3) * spec.phi.sin(), T::zero()),
        shape: PulseShape::Gaussian { center: spec.pulse_center, width: spec.pulse_width },
    });
    sim.probe_planes = vec![spec.plane_in * params.length, spec.plane_out * params.length];
    sim.held_phi = spec.phi;
    let (_, rec) = simulate(params, &sim, None)?;
    let width_in = spectral_fwhm(&rec.probes[0].e1, rec.dt);
    let width_out = spectral_fwhm(&rec.probes[1].e1, rec.dt);
    let c2 = |x: T| x.cos() * x.cos();
    let cot2 = |x: T| {
        let t = x.tan();
        T::one() / (t * t)
    };
    Ok(BandwidthResult {
        width_in,
        width_out,
        measured_ratio: width_out / width_in,
        predicted_ratio: c2(spec.theta1) / c2(spec.theta0),
        window_ratio: cot2(spec.theta1) / cot2(spec.theta0),
        window0: params.transparency_window(a.0, a.1),
        pulse_bandwidth: T::one() / spec.pulse_width,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPoint<T> {
    /// `Delta omega_p / Delta omega_tr`.
    pub ratio: T,
    pub pulse_bandwidth: T,
    pub window: T,
    pub transmission: T,
    /// `1 / sqrt(1 + 2 ratio^2)` for a Gaussian pulse through the quadratic
    /// EIT absorption profile; only meaningful for `ratio << 1`.
    pub predicted: T,
}

/// Transmitted energy fraction of Gaussian `E12` pulses at constant angles,
/// for pulse bandwidths given relative to the transparency window.
pub fn transmission_scan<T: Real>(
    params: &Scaled<T>,
    theta: T,
    phi: T,
    ratios: &[T],
    cells_per_width: usize,
) -> Result<Vec<TransmissionPoint<T>>> {
    let (o1, o2) = controls_for(params, theta, phi);
    let window = params.transparency_window(o1, o2);
    let v = theta.cos().powi(2);
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let width = T::one() / (ratio * window);
        let center = T::of(3.5) * width;
        let pad = T::of(0.02) * params.length;
        let t_end = T::of(7.0) * width + params.length / v + pad;
        let dz_target = (width * v / T::of_usize(cells_per_width)).min(params.length / T::of(500.0));
        let nz = ((params.length + pad) / dz_target).ceil().to_usize().unwrap_or(1000) + 1;
        let schedule = ControlSchedule::constant(T::zero(), t_end + T::one(), o1, o2)?;
        let mut sim = SimulationSpec::new(nz, pad, t_end, schedule);
        let pulse = InputPulse {
            amplitude1: Cx::new(T::of(1e-3) * phi.cos(), T::zero()),
            amplitude2: Cx::new(T::of(1e-3) * phi.sin(), T::zero()),
            shape: PulseShape::Gaussian { center, width },
        };
        sim.input = Some(pulse);
        sim.probe_planes = vec![params.length + pad * T::of(0.5)];
        sim.held_phi = phi;
        let (_, rec) = simulate(params, &sim, None)?;
        let (w1, w2) = rec.probes[0].fluence(T::neg_infinity());
        out.push(TransmissionPoint {
            ratio,
            pulse_bandwidth: T::one() / width,
            window,
            transmission: (w1 + w2) / pulse.energy(),
            predicted: T::one() / (T::one() + T::of(2.0) * ratio * ratio).sqrt(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthScan<T> {
    pub change: BandwidthResult<T>,
    /// Windows measured at `theta0` and `theta1`.
    pub windows: (WindowMeasurement<T>, WindowMeasurement<T>),
    /// Measured `Delta omega_tr(t) / Delta omega_tr(0)`, to compare with
    /// `change.window_ratio`.
    pub measured_window_ratio: T,
    /// Pulse-to-window ratio after the change relative to before.
    pub measured_relative_bandwidth: T,
    /// `sin^2 theta(t) / sin^2 theta(0)`, what the width and window laws
    /// combine to at fixed `phi`.
    pub predicted_relative_bandwidth: T,
    pub transmission: Vec<TransmissionPoint<T>>,
}

/// Width change, window scaling and transmission table for one medium.
pub fn bandwidth_scan<T: Real>(
    params: &Scaled<T>,
    spec: &BandwidthSpec<T>,
    transmission_ratios: &[T],
    cells_per_width: usize,
) -> Result<BandwidthScan<T>> {
    let change = run_bandwidth_change(params, spec)?;
    let w0 = measure_window(params, spec.theta0, spec.phi, cells_per_width)?;
    let w1 = measure_window(params, spec.theta1, spec.phi, cells_per_width)?;
    let measured_window_ratio = w1.measured / w0.measured;
    let s2 = |x: T| x.sin() * x.sin();
    let transmission = transmission_scan(params, spec.theta0, spec.phi, transmission_ratios, cells_per_width)?;
    Ok(BandwidthScan {
        measured_relative_bandwidth: change.measured_ratio / measured_window_ratio,
        predicted_relative_bandwidth: s2(spec.theta1) / s2(spec.theta0),
        change,
        windows: (w0, w1),
        measured_window_ratio,
        transmission,
    })
}
