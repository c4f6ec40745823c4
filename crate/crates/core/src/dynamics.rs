//! Time-dependent Schrödinger evolution under scheduled controls, the
//! storage/release protocols built on it, and the motional dephasing channel.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    mixing_angles_or_hold, spectral_norm, CouplingParams, DarkProjector, HamiltonianTerms, MixingAngles,
};
use crate::error::{Error, Result};
use crate::fock::{
    cat_state, coherent_amplitudes, coherent_state, number_state, BasisState, CatSign, FockSpace, Mode, StateVector,
};
use crate::linalg::symmetric_eigen;
use crate::scalar::{Cx, Real};

/// Largest admissible `dt * ||V||` for one propagator step.
pub const STEP_LIMIT: f64 = 0.1;
/// Dark-subspace population below which the protocols abort.
pub const DEFAULT_MONITOR_THRESHOLD: f64 = 0.9;
/// Default mixing angle at the strong-control edges of a protocol.
pub const DEFAULT_THETA_EDGE: f64 = 0.01;
/// Largest mixing angle accepted at the start of a storage protocol.
pub const MAX_THETA_EDGE: f64 = 0.05;

/// Time dependence of the two control amplitudes within one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile<T> {
    Constant { omega1: T, omega2: T },
    /// Raised-cosine interpolation of both amplitudes.
    CosineRamp { from: (T, T), to: (T, T) },
    /// Fixed control direction with magnitude `kappa cot(vartheta(t))`, where
    /// `cos(vartheta)` follows a raised cosine between the values at
    /// `atan(kappa/|from|)` and `atan(kappa/|to|)`. With `kappa` from
    /// [`Profile::angle_ramp`], `vartheta` is the mixing angle `theta`; the
    /// ratio of `theta'` to the polariton gap then follows the raised cosine
    /// envelope, and little time is spent at large control amplitudes.
    AngleRamp { from: (T, T), to: (T, T), kappa: T },
}

fn smoothstep<T: Real>(s: T) -> T {
    (T::one() - (T::PI() * s).cos()) / T::of(2.0)
}

fn magnitude<T: Real>(v: (T, T)) -> T {
    v.0.hypot(v.1)
}

impl<T: Real> Profile<T> {
    /// Mixing-angle ramp between two control vectors sharing a direction (or
    /// with one end zero).
    pub fn angle_ramp(params: &CouplingParams<T>, from: (T, T), to: (T, T)) -> Result<Self> {
        let dir = if magnitude(from) > T::zero() { from } else { to };
        let mag = magnitude(dir);
        if mag == T::zero() {
            return Err(Error::InvalidSchedule("angle ramp needs a nonzero endpoint".into()));
        }
        let (c, s) = (dir.0 / mag, dir.1 / mag);
        let r = params.g1 / params.g2;
        let kappa = params.gn1() / (c * c + s * s * r * r).sqrt();
        let p = Profile::AngleRamp { from, to, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: (T, T)| v.0 >= T::zero() && v.1 >= T::zero() && v.0.is_finite() && v.1.is_finite();
        match *self {
            Profile::Constant { omega1, omega2 } => {
                if !nonneg((omega1, omega2)) {
                    return Err(Error::InvalidSchedule("control amplitudes must be finite and >= 0".into()));
                }
            }
            Profile::CosineRamp { from, to } => {
                if !nonneg(from) || !nonneg(to) {
                    return Err(Error::InvalidSchedule("control amplitudes must be finite and >= 0".into()));
                }
            }
            Profile::AngleRamp { from, to, kappa } => {
                if !nonneg(from) || !nonneg(to) {
                    return Err(Error::InvalidSchedule("control amplitudes must be finite and >= 0".into()));
                }
                if !(kappa > T::zero()) {
                    return Err(Error::InvalidSchedule("angle ramp needs kappa > 0".into()));
                }
                let (mf, mt) = (magnitude(from), magnitude(to));
                if mf == T::zero() && mt == T::zero() {
                    return Err(Error::InvalidSchedule("angle ramp needs a nonzero endpoint".into()));
                }
                if mf > T::zero() && mt > T::zero() {
                    let cross = (from.0 * to.1 - from.1 * to.0).abs() / (mf * mt);
                    if cross > T::of(1e-9) {
                        return Err(Error::InvalidSchedule(
                            "angle ramp endpoints must share a control direction".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Controls at fractional position `s` in `[0, 1]` of the segment.
    pub fn eval(&self, s: T) -> (T, T) {
        let s = s.max(T::zero()).min(T::one());
        match *self {
            Profile::Constant { omega1, omega2 } => (omega1, omega2),
            Profile::CosineRamp { from, to } => {
                let w = smoothstep(s);
                (from.0 + (to.0 - from.0) * w, from.1 + (to.1 - from.1) * w)
            }
            Profile::AngleRamp { from, to, kappa } => {
                let w = smoothstep(s);
                if w <= T::zero() {
                    return from;
                }
                if w >= T::one() {
                    return to;
                }
                let (mf, mt) = (magnitude(from), magnitude(to));
                let dir = if mf > T::zero() { from } else { to };
                let md = magnitude(dir);
                let c0 = kappa.atan2(mf).cos();
                let c1 = kappa.atan2(mt).cos();
                let c = (c0 + (c1 - c0) * w).max(T::zero()).min(T::one());
                let m = if c == T::zero() { T::zero() } else { kappa * c / (T::one() - c * c).sqrt() };
                (dir.0 / md * m, dir.1 / md * m)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub t_start: T,
    pub t_end: T,
    pub profile: Profile<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(t_start: T, t_end: T, profile: Profile<T>) -> Self {
        Self { t_start, t_end, profile }
    }

    pub fn duration(&self) -> T {
        self.t_end - self.t_start
    }

    pub fn eval(&self, t: T) -> (T, T) {
        self.profile.eval((t - self.t_start) / self.duration())
    }
}

/// Contiguous, ordered list of control segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule<T> {
    segments: Vec<Segment<T>>,
}

impl<T: Real> ControlSchedule<T> {
    pub fn new(segments: Vec<Segment<T>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("schedule has no segments".into()));
        }
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.t_end > seg.t_start) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} has non-positive duration [{}, {}]",
                    seg.t_start, seg.t_end
                )));
            }
            seg.profile.validate().map_err(|e| Error::InvalidSchedule(format!("segment {k}: {e}")))?;
        }
        for (k, w) in segments.windows(2).enumerate() {
            let tol = T::of(1e-12) * w[0].t_end.abs().max(T::one());
            if w[1].t_start < w[0].t_end - tol {
                return Err(Error::InvalidSchedule(format!(
                    "segments {k} and {} overlap on [{}, {}]",
                    k + 1,
                    w[1].t_start,
                    w[0].t_end
                )));
            }
            if w[1].t_start > w[0].t_end + tol {
                return Err(Error::InvalidSchedule(format!(
                    "gap between segments {k} and {} on [{}, {}]",
                    k + 1,
                    w[0].t_end,
                    w[1].t_start
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Single constant segment.
    pub fn constant(t_start: T, t_end: T, omega1: T, omega2: T) -> Result<Self> {
        Self::new(vec![Segment::new(t_start, t_end, Profile::Constant { omega1, omega2 })])
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn start(&self) -> T {
        self.segments[0].t_start
    }

    pub fn end(&self) -> T {
        self.segments[self.segments.len() - 1].t_end
    }

    fn locate(&self, t: T) -> Result<usize> {
        let tol = T::of(1e-12) * t.abs().max(T::one());
        self.segments
            .iter()
            .position(|s| t >= s.t_start - tol && t <= s.t_end + tol)
            .ok_or(Error::ScheduleGap { t: t.as_f64() })
    }

    /// Controls `(Omega1, Omega2)` at time `t`.
    pub fn controls(&self, t: T) -> Result<(T, T)> {
        Ok(self.segments[self.locate(t)?].eval(t))
    }

    /// Mixing angles at `t`. When both controls vanish, `phi` is the last
    /// value it had while a control was on, or `fallback_phi` if none.
    pub fn angles_at(&self, params: &CouplingParams<T>, t: T, fallback_phi: T) -> Result<MixingAngles<T>> {
        let k = self.locate(t)?;
        let (o1, o2) = self.segments[k].eval(t);
        if o1 > T::zero() || o2 > T::zero() {
            return Ok(mixing_angles_or_hold(params, o1, o2, fallback_phi));
        }
        let mut phi = fallback_phi;
        'search: for seg in self.segments[..=k].iter().rev() {
            let probe_points = [T::one(), T::of(0.5), T::zero()];
            for s in probe_points {
                let tt = seg.t_start + (seg.t_end - seg.t_start) * s;
                if tt > t {
                    continue;
                }
                let (a, b) = seg.eval(tt);
                if a > T::zero() || b > T::zero() {
                    phi = mixing_angles_or_hold(params, a, b, fallback_phi).phi;
                    break 'search;
                }
            }
        }
        Ok(mixing_angles_or_hold(params, o1, o2, phi))
    }
}

/// Real CSR pattern of `V = G + Omega1 X1 + Omega2 X2` with one value array
/// per term, so that updating the controls is a single pass over the entries.
struct FusedHamiltonian<T> {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    probe: Vec<T>,
    c1: Vec<T>,
    c2: Vec<T>,
    values: Vec<T>,
    current: Option<(T, T)>,
}

impl<T: Real> FusedHamiltonian<T> {
    fn new(terms: &HamiltonianTerms<T>) -> Self {
        let dim = terms.dim();
        let mut entries: Vec<(usize, usize, usize, T)> = Vec::new();
        for (id, op) in [&terms.probe, &terms.control1, &terms.control2].iter().enumerate() {
            entries.extend(op.entries().map(|(r, c, v)| (r, c, id, v.re)));
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; dim + 1];
        let (mut indices, mut probe, mut c1, mut c2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, id, v) in entries {
            if last != Some((r, c)) {
                indices.push(c);
                probe.push(T::zero());
                c1.push(T::zero());
                c2.push(T::zero());
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
            let k = indices.len() - 1;
            match id {
                0 => probe[k] = probe[k] + v,
                1 => c1[k] = c1[k] + v,
                _ => c2[k] = c2[k] + v,
            }
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        let values = probe.clone();
        Self { indptr, indices, probe, c1, c2, values, current: None }
    }

    fn set_controls(&mut self, o1: T, o2: T) {
        if self.current == Some((o1, o2)) {
            return;
        }
        for k in 0..self.values.len() {
            self.values[k] = self.probe[k] + o1 * self.c1[k] + o2 * self.c2[k];
        }
        self.current = Some((o1, o2));
    }

    fn apply(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Cx::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc = acc + x[self.indices[k]].scale(self.values[k]);
            }
            *yr = acc;
        }
    }
}

fn dot<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Cx<T> {
    a.iter().zip(b).fold(Cx::zero(), |acc, (x, y)| acc + x.conj() * *y)
}

fn norm<T: Real>(a: &[Cx<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `exp(-i tau T) e_1` for the real symmetric tridiagonal `T`.
fn tridiagonal_exp_first_column<T: Real>(alphas: &[T], betas: &[T], tau: T) -> Vec<Cx<T>> {
    let m = alphas.len();
    let mut t = vec![T::zero(); m * m];
    for i in 0..m {
        t[i * m + i] = alphas[i];
        if i + 1 < m {
            t[i * m + i + 1] = betas[i];
            t[(i + 1) * m + i] = betas[i];
        }
    }
    let (vals, vecs) = symmetric_eigen(&t, m);
    (0..m)
        .map(|r| {
            (0..m).fold(Cx::zero(), |acc, k| {
                let phase = Cx::new(T::zero(), -tau * vals[k]).exp();
                acc + phase.scale(vecs[r * m + k] * vecs[k])
            })
        })
        .collect()
}

const FULL_REORTH_FROM: usize = 6;

/// Lanczos (Krylov-subspace) exponential with an a-posteriori choice of the
/// subspace dimension.
struct KrylovStepper<T> {
    basis: Vec<Vec<Cx<T>>>,
    w: Vec<Cx<T>>,
    tol: T,
    max_dim: usize,
}

impl<T: Real> KrylovStepper<T> {
    fn new(dim: usize, tol: T, max_dim: usize) -> Self {
        Self { basis: vec![vec![Cx::zero(); dim]; max_dim], w: vec![Cx::zero(); dim], tol, max_dim }
    }

    /// Overwrites `psi` with `exp(-i dt H) psi`; returns the subspace dimension.
    fn step(&mut self, h: &FusedHamiltonian<T>, psi: &mut [Cx<T>], dt: T) -> usize {
        let beta0 = norm(psi);
        if beta0 == T::zero() {
            return 0;
        }
        for (b, p) in self.basis[0].iter_mut().zip(psi.iter()) {
            *b = p.unscale(beta0);
        }
        let mut alphas: Vec<T> = Vec::with_capacity(self.max_dim);
        let mut betas: Vec<T> = Vec::with_capacity(self.max_dim);
        let mut coeffs = vec![Cx::new(T::one(), T::zero())];
        for j in 0..self.max_dim {
            h.apply(&self.basis[j], &mut self.w);
            if j > 0 {
                let b = betas[j - 1];
                for (wk, bk) in self.w.iter_mut().zip(&self.basis[j - 1]) {
                    *wk = *wk - bk.scale(b);
                }
            }
            let alpha = dot(&self.basis[j], &self.w).re;
            for (wk, bk) in self.w.iter_mut().zip(&self.basis[j]) {
                *wk = *wk - bk.scale(alpha);
            }
            // short steps converge in a handful of vectors, where the
            // three-term recurrence keeps the basis orthogonal to round-off
            if j >= FULL_REORTH_FROM {
                for i in 0..=j {
                    let c = dot(&self.basis[i], &self.w);
                    for (wk, bk) in self.w.iter_mut().zip(&self.basis[i]) {
                        *wk = *wk - c * *bk;
                    }
                }
            }
            let beta = norm(&self.w);
            alphas.push(alpha);
            coeffs = tridiagonal_exp_first_column(&alphas, &betas, dt);
            // a-posteriori estimate of the residual of the truncated expansion
            let err = dt.abs() * beta * coeffs[j].norm();
            let breakdown = beta <= T::eps() * T::of(16.0) * (alpha.abs() + T::one());
            if breakdown || err <= self.tol || j + 1 == self.max_dim {
                break;
            }
            betas.push(beta);
            let (head, tail) = self.basis.split_at_mut(j + 1);
            let _ = head;
            for (b, wk) in tail[0].iter_mut().zip(&self.w) {
                *b = wk.unscale(beta);
            }
        }
        for p in psi.iter_mut() {
            *p = Cx::zero();
        }
        for (c, b) in coeffs.iter().zip(&self.basis) {
            let c = c.scale(beta0);
            for (p, bk) in psi.iter_mut().zip(b) {
                *p = *p + c * *bk;
            }
        }
        coeffs.len()
    }
}

/// How the integrator chooses its step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepPolicy<T> {
    /// Uniform step, shortened slightly so that it divides the interval.
    Fixed(T),
    /// Per-step `dt` with `dt ||V(t + dt/2)|| = safety * 0.1`; steps end on
    /// segment boundaries.
    Auto { safety: T },
}

impl<T: Real> Default for StepPolicy<T> {
    fn default() -> Self {
        StepPolicy::Auto { safety: T::of(0.9) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions<T> {
    pub policy: StepPolicy<T>,
    /// Also record states at this spacing (plus the endpoints).
    pub sample_interval: Option<T>,
    pub krylov_tol: T,
    pub max_krylov_dim: usize,
    /// `phi` used while the controls are off and no earlier value exists.
    pub fallback_phi: T,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            policy: StepPolicy::default(),
            sample_interval: None,
            krylov_tol: T::of(1e-13),
            max_krylov_dim: 30,
            fallback_phi: T::zero(),
        }
    }
}

/// Recorded states plus integrator statistics.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<StateVector<T>>,
    pub steps: usize,
    pub max_krylov_dim: usize,
    /// `max | ||psi(t)|| - ||psi(0)|| |` over recorded states.
    pub norm_drift: T,
    /// `max | <N>(t) - <N>(0) |` over recorded states.
    pub excitation_drift: T,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &StateVector<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// Called after every step with the step count, time and state; an error
/// aborts the run.
pub type StepObserver<'a, T> = dyn FnMut(usize, T, &StateVector<T>) -> Result<()> + 'a;

/// Reusable integrator bound to one space and parameter set.
pub struct Evolver<'a, T> {
    space: &'a FockSpace,
    params: CouplingParams<T>,
    hamiltonian: FusedHamiltonian<T>,
    stepper: KrylovStepper<T>,
}

impl<'a, T: Real> Evolver<'a, T> {
    pub fn new(space: &'a FockSpace, params: &CouplingParams<T>, opts: &EvolveOptions<T>) -> Self {
        let terms = HamiltonianTerms::new(space, params);
        Self {
            space,
            params: *params,
            hamiltonian: FusedHamiltonian::new(&terms),
            stepper: KrylovStepper::new(space.dim(), opts.krylov_tol, opts.max_krylov_dim.max(2)),
        }
    }

    pub fn space(&self) -> &FockSpace {
        self.space
    }

    fn step_grid(&self, schedule: &ControlSchedule<T>, t0: T, t1: T, policy: StepPolicy<T>) -> Result<Vec<(T, T, usize)>> {
        match policy {
            StepPolicy::Fixed(dt) => {
                if !(dt > T::zero()) {
                    return Err(Error::param("dt", "must be positive"));
                }
                let n = ((t1 - t0) / dt - T::of(1e-9)).ceil().max(T::one());
                let n = n.to_usize().unwrap_or(1);
                Ok(vec![(t0, (t1 - t0) / T::of_usize(n), n)])
            }
            StepPolicy::Auto { safety } => {
                if !(safety > T::zero() && safety <= T::one()) {
                    return Err(Error::param("safety", "must lie in (0, 1]"));
                }
                let mut cuts: Vec<T> = schedule
                    .segments()
                    .iter()
                    .map(|s| s.t_end)
                    .filter(|&t| t > t0 && t < t1)
                    .collect();
                cuts.push(t1);
                let target = safety * T::of(STEP_LIMIT);
                let norm_at = |t: T| -> Result<T> {
                    let (o1, o2) = schedule.controls(t)?;
                    Ok(spectral_norm(&self.params, o1, o2, self.space.cutoff()))
                };
                let mut out = Vec::new();
                let mut t = t0;
                for &cut in &cuts {
                    while t < cut {
                        let left = cut - t;
                        // fixed point of dt = target / ||V(t + dt/2)||
                        let mut dt = left;
                        for _ in 0..4 {
                            let v = norm_at(t + dt / T::of(2.0))?;
                            let next = if v > T::zero() { (target / v).min(left) } else { left };
                            if next == dt {
                                break;
                            }
                            dt = next;
                        }
                        while dt * norm_at(t + dt / T::of(2.0))? > target {
                            dt = dt * T::of(0.8);
                        }
                        // avoid a sliver at the segment end
                        if left - dt < dt * T::of(0.25) && left > dt {
                            dt = left / T::of(2.0);
                        }
                        out.push((t, dt, 1));
                        t = if dt >= left { cut } else { t + dt };
                    }
                }
                if out.is_empty() {
                    out.push((t0, T::zero(), 0));
                }
                Ok(out)
            }
        }
    }

    /// Evolves `psi0` from `t0` to `t1`. `observer(step, t, psi)` is called
    /// after every step; returning an error aborts the run.
    pub fn run(
        &mut self,
        schedule: &ControlSchedule<T>,
        psi0: &StateVector<T>,
        t0: T,
        t1: T,
        opts: &EvolveOptions<T>,
        observer: &mut StepObserver<'_, T>,
    ) -> Result<Trajectory<T>> {
        if psi0.len() != self.space.dim() {
            return Err(Error::DimensionMismatch { left: psi0.len(), right: self.space.dim() });
        }
        if !(t1 >= t0) {
            return Err(Error::param("t1", "must not precede t0"));
        }
        schedule.controls(t0)?;
        schedule.controls(t1)?;
        let n0 = psi0.norm();
        let exc0 = psi0.mean_excitation(self.space);
        let mut traj = Trajectory {
            times: vec![t0],
            states: vec![psi0.clone()],
            steps: 0,
            max_krylov_dim: 0,
            norm_drift: T::zero(),
            excitation_drift: T::zero(),
        };
        if t1 == t0 {
            return Ok(traj);
        }
        let grid = self.step_grid(schedule, t0, t1, opts.policy)?;
        let mut psi = psi0.clone();
        let mut next_sample = opts.sample_interval.map(|s| t0 + s);
        let space = self.space;
        let record = |traj: &mut Trajectory<T>, t: T, psi: &StateVector<T>| {
            traj.norm_drift = traj.norm_drift.max((psi.norm() - n0).abs());
            traj.excitation_drift = traj.excitation_drift.max((psi.mean_excitation(space) - exc0).abs());
            traj.times.push(t);
            traj.states.push(psi.clone());
        };
        for (start, dt, n) in grid {
            for k in 0..n {
                let ta = start + dt * T::of_usize(k);
                let mid = ta + dt / T::of(2.0);
                let (o1, o2) = schedule.controls(mid)?;
                let product = dt * spectral_norm(&self.params, o1, o2, self.space.cutoff());
                if product > T::of(STEP_LIMIT) * (T::one() + T::of(1e-9)) {
                    return Err(Error::StepTooLarge { t: mid.as_f64(), product: product.as_f64(), limit: STEP_LIMIT });
                }
                self.hamiltonian.set_controls(o1, o2);
                let m = self.stepper.step(&self.hamiltonian, psi.amplitudes_mut(), dt);
                traj.steps += 1;
                traj.max_krylov_dim = traj.max_krylov_dim.max(m);
                let t = ta + dt;
                observer(traj.steps, t, &psi)?;
                if let Some(ts) = next_sample {
                    if t >= ts - dt * T::of(1e-6) && t < t1 - dt * T::of(1e-6) {
                        record(&mut traj, t, &psi);
                        next_sample = opts.sample_interval.map(|s| ts + s);
                    }
                }
            }
        }
        record(&mut traj, t1, &psi);
        Ok(traj)
    }
}

/// Evolves `psi0` over `[t0, t1]` with a uniform step `dt`, recording only
/// the endpoints. Each step applies `exp(-i dt V(t_mid))`.
pub fn evolve<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    schedule: &ControlSchedule<T>,
    psi0: &StateVector<T>,
    t0: T,
    t1: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let opts = EvolveOptions { policy: StepPolicy::Fixed(dt), ..EvolveOptions::default() };
    evolve_with(space, params, schedule, psi0, t0, t1, &opts)
}

pub fn evolve_with<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    schedule: &ControlSchedule<T>,
    psi0: &StateVector<T>,
    t0: T,
    t1: T,
    opts: &EvolveOptions<T>,
) -> Result<Trajectory<T>> {
    Evolver::new(space, params, opts).run(schedule, psi0, t0, t1, opts, &mut |_, _, _| Ok(()))
}

/// Quantum state injected into a probe mode.
#[derive(Clone, Debug, PartialEq)]
pub enum InputState<T> {
    Coherent { alpha: Cx<T> },
    Cat { alpha: Cx<T>, sign: CatSign },
    SinglePhoton,
    /// Arbitrary state; no ideal output is known for it.
    Custom(StateVector<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampShape {
    /// Raised cosine in the control amplitudes.
    Cosine,
    /// Raised cosine in the mixing angle `theta`.
    MixingAngle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec<T> {
    pub input: InputState<T>,
    /// Probe mode carrying the input (`Probe1` or `Probe2`).
    pub input_mode: Mode,
    /// Release angle `phi_e` in `[0, pi/2]`.
    pub phi_e: T,
    /// Mixing angle at the strong-control ends of the protocol.
    pub theta_edge: T,
    pub ramp_down: T,
    pub hold: T,
    pub ramp_up: T,
    pub ramp_shape: RampShape,
    pub policy: StepPolicy<T>,
    /// Abort when the dark-subspace population falls below this value.
    pub monitor_threshold: Option<T>,
    /// Steps between monitor samples.
    pub monitor_every: usize,
}

impl<T: Real> ProtocolSpec<T> {
    /// Defaults: `theta_edge = 0.01`, ramps of `20 / (g sqrt N)`, a hold of
    /// `2 / (g sqrt N)`, mixing-angle ramps and automatic steps.
    pub fn new(params: &CouplingParams<T>, input: InputState<T>, input_mode: Mode, phi_e: T) -> Self {
        let unit = T::one() / params.gn1().min(params.gn2());
        Self {
            input,
            input_mode,
            phi_e,
            theta_edge: T::of(DEFAULT_THETA_EDGE),
            ramp_down: T::of(20.0) * unit,
            hold: T::of(2.0) * unit,
            ramp_up: T::of(20.0) * unit,
            ramp_shape: RampShape::MixingAngle,
            policy: StepPolicy::default(),
            monitor_threshold: Some(T::of(DEFAULT_MONITOR_THRESHOLD)),
            monitor_every: 50,
        }
    }

    pub fn with_ramps(mut self, ramp: T) -> Self {
        self.ramp_down = ramp;
        self.ramp_up = ramp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_e >= T::zero() && self.phi_e <= T::FRAC_PI_2() * (T::one() + T::eps())) {
            return Err(Error::param("phi_e", format!("must lie in [0, pi/2], got {}", self.phi_e)));
        }
        if !matches!(self.input_mode, Mode::Probe1 | Mode::Probe2) {
            return Err(Error::param("input_mode", "input must enter a probe mode"));
        }
        if !(self.theta_edge > T::zero() && self.theta_edge <= T::of(MAX_THETA_EDGE)) {
            return Err(Error::param(
                "theta_edge",
                format!("must lie in (0, {MAX_THETA_EDGE}] for the strong-control regime, got {}", self.theta_edge),
            ));
        }
        for (name, v) in [("ramp_down", self.ramp_down), ("ramp_up", self.ramp_up)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !(self.hold >= T::zero()) || !self.hold.is_finite() {
            return Err(Error::param("hold", "must be >= 0"));
        }
        Ok(())
    }

    /// `phi` of the storage stage, fixed by the input mode.
    pub fn storage_phi(&self) -> T {
        if self.input_mode == Mode::Probe2 {
            T::FRAC_PI_2()
        } else {
            T::zero()
        }
    }

    pub fn total_duration(&self) -> T {
        self.ramp_down + self.hold + self.ramp_up
    }
}

/// Control vector with mixing angles `(theta, phi)`:
/// `Omega2 / Omega1 = (g2/g1) tan(phi)` and `tan(theta) = g1 sqrt(N) / Omega_eff`.
pub fn controls_for_angles<T: Real>(params: &CouplingParams<T>, theta: T, phi: T) -> (T, T) {
    let eff = params.gn1() / theta.tan();
    // Omega1 = eff cos(phi), Omega2 = eff sin(phi) g2/g1 gives Omega_eff = eff.
    let o1 = eff * phi.cos();
    let o2 = eff * phi.sin() * params.g2 / params.g1;
    (o1.max(T::zero()), o2.max(T::zero()))
}

/// Ramp-down, hold, ramp-up schedule of the storage/release protocol.
pub fn protocol_schedule<T: Real>(params: &CouplingParams<T>, spec: &ProtocolSpec<T>) -> Result<ControlSchedule<T>> {
    spec.validate()?;
    let start = controls_for_angles(params, spec.theta_edge, spec.storage_phi());
    let end = controls_for_angles(params, spec.theta_edge, spec.phi_e);
    let zero = (T::zero(), T::zero());
    let ramp = |from: (T, T), to: (T, T)| -> Result<Profile<T>> {
        match spec.ramp_shape {
            RampShape::Cosine => Ok(Profile::CosineRamp { from, to }),
            RampShape::MixingAngle => Profile::angle_ramp(params, from, to),
        }
    };
    let t1 = spec.ramp_down;
    let t2 = t1 + spec.hold;
    let t3 = t2 + spec.ramp_up;
    let mut segs = vec![Segment::new(T::zero(), t1, ramp(start, zero)?)];
    if spec.hold > T::zero() {
        segs.push(Segment::new(t1, t2, Profile::Constant { omega1: T::zero(), omega2: T::zero() }));
    }
    segs.push(Segment::new(t2, t3, ramp(zero, end)?));
    ControlSchedule::new(segs)
}

/// Single-mode amplitudes of the injected state, when it has a known form.
fn input_amplitudes<T: Real>(space: &FockSpace, input: &InputState<T>) -> Option<Vec<Cx<T>>> {
    let m = space.cutoff();
    match input {
        InputState::Coherent { alpha } => Some(coherent_amplitudes(*alpha, m)),
        InputState::Cat { alpha, sign } => Some(
            coherent_amplitudes(*alpha, m)
                .into_iter()
                .enumerate()
                .map(|(n, p)| {
                    let parity = if n % 2 == 0 { T::one() } else { -T::one() };
                    p * (T::one() + sign.value::<T>() * parity)
                })
                .collect(),
        ),
        InputState::SinglePhoton => {
            let mut v = vec![Cx::zero(); m + 1];
            if m >= 1 {
                v[1] = Cx::new(T::one(), T::zero());
            }
            Some(v)
        }
        InputState::Custom(_) => None,
    }
}

/// Ideal released state: each input Fock component `|n>` becomes
/// `(cos(phi_e) a1† + sin(phi_e) a2†)^n |0> / sqrt(n!)`, all atoms in `|b>`.
pub fn ideal_release<T: Real>(space: &FockSpace, amplitudes: &[Cx<T>], phi_e: T) -> Result<StateVector<T>> {
    let mut out = StateVector::zeros(space.dim());
    let angles = MixingAngles::new(T::zero(), phi_e);
    for (n, c) in amplitudes.iter().enumerate().take(space.cutoff() + 1) {
        if c.is_zero() {
            continue;
        }
        let dn = crate::ensemble::dark_state(space, n, angles)?;
        out = out.add_scaled(*c, &dn);
    }
    out.normalized("ideal release")
}

fn prepare_input<T: Real>(space: &FockSpace, spec: &ProtocolSpec<T>) -> Result<StateVector<T>> {
    match &spec.input {
        InputState::Coherent { alpha } => coherent_state(space, spec.input_mode, *alpha),
        InputState::Cat { alpha, sign } => cat_state(space, spec.input_mode, *alpha, *sign),
        InputState::SinglePhoton => number_state(space, spec.input_mode, 1),
        InputState::Custom(psi) => {
            if psi.len() != space.dim() {
                return Err(Error::DimensionMismatch { left: psi.len(), right: space.dim() });
            }
            psi.clone().normalized("custom input")
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolDiagnostics {
    /// `(t, dark-subspace population)` samples.
    pub dark_population: Vec<(f64, f64)>,
    pub min_dark_population: f64,
    pub steps: usize,
    pub max_krylov_dim: usize,
    pub norm_drift: f64,
    pub excitation_drift: f64,
    /// Population of the stored state outside `|0,0;0,n,0>`.
    pub stored_leakage: f64,
    /// Fidelity of the released state with the ideal output, when known.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ProtocolOutcome<T> {
    pub input: StateVector<T>,
    pub stored: StateVector<T>,
    pub released: StateVector<T>,
    pub expected: Option<StateVector<T>>,
    pub diagnostics: ProtocolDiagnostics,
}

/// Population outside the stored basis `{|0,0;0,n,0>}`.
pub fn stored_leakage<T: Real>(space: &FockSpace, psi: &StateVector<T>) -> T {
    psi.population_where(space, |s| s.total() != s.get(Mode::C))
}

/// Storage, hold and release with the release direction `phi_e`.
pub fn run_storage_release<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    spec: &ProtocolSpec<T>,
) -> Result<ProtocolOutcome<T>> {
    let schedule = protocol_schedule(params, spec)?;
    let input = prepare_input(space, spec)?;
    let expected = match input_amplitudes(space, &spec.input) {
        Some(a) => Some(ideal_release(space, &a, spec.phi_e)?),
        None => None,
    };
    let opts = EvolveOptions { policy: spec.policy, fallback_phi: spec.storage_phi(), ..EvolveOptions::default() };
    let mut evolver = Evolver::new(space, params, &opts);
    let projector = DarkProjector::new(space);
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let threshold = spec.monitor_threshold;
    let every = spec.monitor_every.max(1);
    let fallback = spec.storage_phi();
    let mut monitor = |step: usize, t: T, psi: &StateVector<T>| -> Result<()> {
        if !step.is_multiple_of(every) {
            return Ok(());
        }
        let angles = schedule.angles_at(params, t, fallback)?;
        let pop = projector.population(psi.amplitudes(), angles);
        samples.push((t.as_f64(), pop.as_f64()));
        if let Some(th) = threshold {
            if pop < th {
                return Err(Error::AdiabaticityViolated { t: t.as_f64(), population: pop.as_f64(), threshold: th.as_f64() });
            }
        }
        Ok(())
    };
    monitor(0, T::zero(), &input)?;
    let t_store = spec.ramp_down;
    let first = evolver.run(&schedule, &input, T::zero(), t_store, &opts, &mut monitor)?;
    let stored = first.last().clone();
    let mut offset_monitor = |step: usize, t: T, psi: &StateVector<T>| monitor(step + first.steps, t, psi);
    let second = evolver.run(&schedule, &stored, t_store, schedule.end(), &opts, &mut offset_monitor)?;
    let released = second.last().clone();
    let min_pop = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let fidelity = match &expected {
        Some(e) => Some(e.inner(&released)?.norm_sqr().as_f64()),
        None => None,
    };
    let n_in = input.norm();
    let exc_in = input.mean_excitation(space);
    let diagnostics = ProtocolDiagnostics {
        dark_population: samples,
        min_dark_population: min_pop,
        steps: first.steps + second.steps,
        max_krylov_dim: first.max_krylov_dim.max(second.max_krylov_dim),
        norm_drift: (first.norm_drift.max((released.norm() - n_in).abs())).as_f64(),
        excitation_drift: first.excitation_drift.max((released.mean_excitation(space) - exc_in).abs()).as_f64(),
        stored_leakage: stored_leakage(space, &stored).as_f64(),
        fidelity,
    };
    Ok(ProtocolOutcome { input, stored, released, expected, diagnostics })
}

/// [`run_storage_release`] with a cat-state input; the reported fidelity is
/// against the entangled coherent state
/// `(|a cos phi_e, a sin phi_e> ± |-a cos phi_e, -a sin phi_e>)` normalized.
pub fn run_cat_protocol<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    spec: &ProtocolSpec<T>,
) -> Result<ProtocolOutcome<T>> {
    if !matches!(spec.input, InputState::Cat { .. }) {
        return Err(Error::param("input", "cat protocol needs a cat-state input"));
    }
    run_storage_release(space, params, spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams<T> {
    /// Diffusion rate `D` (1/s).
    pub rate: T,
    /// Exposure time (s).
    pub time: T,
}

/// Stored-excitation density matrix after motional dephasing.
#[derive(Clone, Debug)]
pub struct DephasedState<T> {
    /// `rho[(n, m)]` over the collective occupation `n_C = 0..=M`.
    pub rho: crate::linalg::CMatrix<T>,
    pub populations: Vec<T>,
    pub purity: T,
}

/// Scales the `(n, m)` coherence of a stored state by `e^{-(n+m) D t / 2}`
/// (populations untouched), so that a superposition involving `|D_n>` decays
/// with the factor `e^{-n D t}` relative to the vacuum.
pub fn apply_motional_dephasing<T: Real>(
    space: &FockSpace,
    psi: &StateVector<T>,
    p: &DephasingParams<T>,
) -> Result<DephasedState<T>> {
    if !(p.rate >= T::zero()) || !(p.time >= T::zero()) {
        return Err(Error::param("dephasing", "rate and time must be >= 0"));
    }
    let outside = stored_leakage(space, psi);
    if outside > T::of(1e-6) {
        return Err(Error::NotStoredForm { outside: outside.as_f64() });
    }
    let m = space.cutoff();
    let amps: Vec<Cx<T>> = (0..=m).map(|n| psi.amplitude(space, &BasisState::single(Mode::C, n))).collect();
    let dt = p.rate * p.time;
    let rho = crate::linalg::CMatrix::from_fn(m + 1, m + 1, |a, b| {
        let base = amps[a] * amps[b].conj();
        if a == b {
            base
        } else {
            base.scale((-(T::of_usize(a + b)) * dt / T::of(2.0)).exp())
        }
    });
    let populations: Vec<T> = (0..=m).map(|n| rho[(n, n)].re).collect();
    let purity = rho.as_slice().iter().map(|z| z.norm_sqr()).sum();
    Ok(DephasedState { rho, populations, purity })
}
