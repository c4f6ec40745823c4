//! One-dimensional c-number envelope solver for the multi-mode equations.
//!
//! Fields `E1`, `E2` advect at `c` and are sourced by the optical
//! coherences; the coherences obey local linear equations:
//!
//! ```text
//! (d/dt + c d/dz) E1 = i g1 sqrt(N) S_ba
//! (d/dt + c d/dz) E2 = i g2 sqrt(N) S_bd
//! dS_ba/dt = -Gamma S_ba + i g1 sqrt(N) E1 + i Omega1 S_bc
//! dS_bc/dt = i Omega1 S_ba + i Omega2 S_bd
//! dS_bd/dt = -Gamma S_bd + i g2 sqrt(N) E2 + i Omega2 S_bc
//! ```
//!
//! with scaled coherences `S = sqrt(N) sigma`. Internally time is measured in
//! `1/Gamma` (or `1 / max g sqrt(N)` when `Gamma = 0`) and length in `c`
//! times that unit, so `c = 1`.
//!
//! A step is Strang-split: half a local step (exact 5x5 exponential), one
//! upwind advection step, half a local step.

pub mod io;
pub mod scenarios;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::ensemble::{mixing_angles_or_hold, CouplingParams, MixingAngles};
use crate::error::{Error, Result};
use crate::linalg::{expm, CMatrix};
use crate::scalar::{Cx, Real};

pub use scenarios::*;

/// Largest `|sigma|^2` for which the low-excitation treatment is trusted.
pub const LOW_EXCITATION_LIMIT: f64 = 0.1;

/// Physical parameters of the continuum engine in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumParams<T> {
    /// `g1 sqrt(N)` (rad/s).
    pub gn1: T,
    /// `g2 sqrt(N)` (rad/s).
    pub gn2: T,
    /// Optical coherence decay (rad/s).
    pub gamma: T,
    /// Speed of light (m/s).
    pub c: T,
    /// Medium length (m).
    pub length: T,
    pub n_atoms: T,
}

impl<T: Real> ContinuumParams<T> {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("gn1", self.gn1, false),
            ("gn2", self.gn2, false),
            ("gamma", self.gamma, true),
            ("c", self.c, false),
            ("length", self.length, false),
            ("n_atoms", self.n_atoms, false),
        ];
        for (name, v, zero_ok) in checks {
            let ok = v.is_finite() && if zero_ok { v >= T::zero() } else { v > T::zero() };
            if !ok {
                return Err(Error::param(name, format!("must be {}, got {v}", if zero_ok { ">= 0" } else { "> 0" })));
            }
        }
        if self.n_atoms < T::one() {
            return Err(Error::param("n_atoms", "must be >= 1"));
        }
        Ok(())
    }

    /// From single-atom couplings.
    pub fn from_coupling(p: &CouplingParams<T>, c: T, length: T) -> Self {
        Self { gn1: p.gn1(), gn2: p.gn2(), gamma: p.gamma, c, length, n_atoms: p.n_atoms }
    }

    /// Seconds per internal time unit.
    pub fn time_unit(&self) -> T {
        if self.gamma > T::zero() {
            T::one() / self.gamma
        } else {
            T::one() / self.gn1.max(self.gn2)
        }
    }

    /// Metres per internal length unit.
    pub fn length_unit(&self) -> T {
        self.c * self.time_unit()
    }

    /// Dimensionless copy used by the solver.
    pub fn internal(&self) -> Result<Scaled<T>> {
        self.validate()?;
        let tu = self.time_unit();
        Ok(Scaled {
            gn1: self.gn1 * tu,
            gn2: self.gn2 * tu,
            gamma: self.gamma * tu,
            length: self.length / self.length_unit(),
            n_atoms: self.n_atoms,
        })
    }

    /// Converts an SI control amplitude to internal units.
    pub fn rate_to_internal(&self, omega: T) -> T {
        omega * self.time_unit()
    }
}

/// Dimensionless engine parameters (`c = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaled<T> {
    pub gn1: T,
    pub gn2: T,
    pub gamma: T,
    pub length: T,
    pub n_atoms: T,
}

impl<T: Real> Scaled<T> {
    fn couplings(&self) -> CouplingParams<T> {
        CouplingParams { g1: self.gn1, g2: self.gn2, n_atoms: T::one(), gamma: self.gamma }
    }

    pub fn angles(&self, omega1: T, omega2: T, held_phi: T) -> MixingAngles<T> {
        mixing_angles_or_hold(&self.couplings(), omega1, omega2, held_phi)
    }

    /// Optical depth `2 (g sqrt N)^2 L / (c Gamma)` of probe 1.
    pub fn optical_depth(&self) -> T {
        T::of(2.0) * self.gn1 * self.gn1 * self.length / self.gamma
    }

    /// EIT transparency window `Omega0^2 / (Gamma sqrt(OD))`.
    pub fn transparency_window(&self, omega1: T, omega2: T) -> T {
        (omega1 * omega1 + omega2 * omega2) / (self.gamma * self.optical_depth().sqrt())
    }

    /// `tan^2(beta)` with the rates measured in units of `Gamma`.
    pub fn tan2_beta(&self, omega1: T, omega2: T) -> T {
        let (a, b) = (self.gn1 * self.gn1, self.gn2 * self.gn2);
        let (o1s, o2s) = (omega1 * omega1, omega2 * omega2);
        let den = (a * o2s + b * o1s) * (o1s + o2s);
        if den == T::zero() {
            return T::zero();
        }
        let num = o1s * o2s * (a - b) * (a - b);
        let g2 = if self.gamma > T::zero() { self.gamma * self.gamma } else { T::one() };
        num / den / g2
    }

    /// Absorption rate of the mismatch field `s`:
    /// `(g1^2 Omega2^2 + g2^2 Omega1^2) N cos^2(beta) / (Gamma Omega0^2)`.
    pub fn s_decay_rate(&self, omega1: T, omega2: T) -> T {
        let o0s = omega1 * omega1 + omega2 * omega2;
        let num = self.gn1 * self.gn1 * omega2 * omega2 + self.gn2 * self.gn2 * omega1 * omega1;
        let cos2b = T::one() / (T::one() + self.tan2_beta(omega1, omega2));
        num * cos2b / (self.gamma * o0s)
    }
}

/// Envelopes and scaled coherences on a uniform grid over `[0, L + pad]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid<T> {
    pub dz: T,
    /// Cells with index `< medium_cells` contain atoms.
    pub medium_cells: usize,
    pub time: T,
    pub e1: Vec<Cx<T>>,
    pub e2: Vec<Cx<T>>,
    /// `sqrt(N) sigma_ba`.
    pub s_ba: Vec<Cx<T>>,
    /// `sqrt(N) sigma_bc`.
    pub s_bc: Vec<Cx<T>>,
    /// `sqrt(N) sigma_bd`.
    pub s_bd: Vec<Cx<T>>,
    pub n_atoms: T,
}

impl<T: Real> FieldGrid<T> {
    /// Empty grid of `nz` cells covering `[0, length + pad]`.
    pub fn new(params: &Scaled<T>, nz: usize, pad: T) -> Result<Self> {
        if nz < 2 {
            return Err(Error::param("nz", "need at least two cells"));
        }
        if !(pad >= T::zero()) {
            return Err(Error::param("pad", "must be >= 0"));
        }
        let dz = (params.length + pad) / T::of_usize(nz - 1);
        let medium_cells = (0..nz).take_while(|&i| T::of_usize(i) * dz <= params.length * (T::one() + T::of(1e-12))).count();
        let zeros = vec![Cx::zero(); nz];
        Ok(Self {
            dz,
            medium_cells,
            time: T::zero(),
            e1: zeros.clone(),
            e2: zeros.clone(),
            s_ba: zeros.clone(),
            s_bc: zeros.clone(),
            s_bd: zeros,
            n_atoms: params.n_atoms,
        })
    }

    pub fn nz(&self) -> usize {
        self.e1.len()
    }

    pub fn z(&self, i: usize) -> T {
        T::of_usize(i) * self.dz
    }

    /// Index of the cell nearest to `z`.
    pub fn index_of(&self, z: T) -> usize {
        let i = (z / self.dz).round().max(T::zero()).to_usize().unwrap_or(0);
        i.min(self.nz() - 1)
    }

    /// Unscaled coherence `sigma_bc` at cell `i`.
    pub fn sigma_bc(&self, i: usize) -> Cx<T> {
        self.s_bc[i].unscale(self.n_atoms.sqrt())
    }

    /// `max |sigma|^2` over all coherences and cells.
    pub fn max_excitation(&self) -> T {
        let m = [&self.s_ba, &self.s_bc, &self.s_bd]
            .iter()
            .flat_map(|v| v.iter())
            .fold(T::zero(), |m, s| m.max(s.norm_sqr()));
        m / self.n_atoms
    }

    /// Total excitation `int (|E1|^2 + |E2|^2 + N|sigma|^2) dz / c`
    /// (internal units, trapezoid-free cell sum).
    pub fn energy(&self) -> T {
        let sum = |v: &[Cx<T>]| v.iter().map(|x| x.norm_sqr()).sum::<T>();
        (sum(&self.e1) + sum(&self.e2) + sum(&self.s_ba) + sum(&self.s_bc) + sum(&self.s_bd)) * self.dz
    }

    pub fn field_energy(&self) -> (T, T) {
        let sum = |v: &[Cx<T>]| v.iter().map(|x| x.norm_sqr()).sum::<T>() * self.dz;
        (sum(&self.e1), sum(&self.e2))
    }

    /// Loads a dark-state polariton `Psi(z)` at the given angles:
    /// `E1 = cos t cos p Psi`, `E2 = cos t sin p Psi`, `S_bc = -sin t Psi`,
    /// optical coherences zero. Cells outside the medium get only the
    /// photonic part.
    pub fn load_polariton(&mut self, angles: MixingAngles<T>, psi: impl Fn(T) -> Cx<T>) {
        let (st, ct) = angles.theta.sin_cos();
        let (sp, cp) = angles.phi.sin_cos();
        for i in 0..self.nz() {
            let p = psi(self.z(i));
            self.e1[i] = p.scale(ct * cp);
            self.e2[i] = p.scale(ct * sp);
            self.s_ba[i] = Cx::zero();
            self.s_bd[i] = Cx::zero();
            self.s_bc[i] = if i < self.medium_cells { p.scale(-st) } else { Cx::zero() };
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    /// Keep the `-i g E sigma sigma` products in the `sigma_bc` equation.
    pub second_order: bool,
    /// Turn the low-excitation warning into an error.
    pub strict_low_excitation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport<T> {
    pub max_excitation: T,
    pub low_excitation_violated: bool,
}

/// Local generator acting on `(E1, E2, S_ba, S_bc, S_bd)`.
pub fn local_generator<T: Real>(p: &Scaled<T>, omega1: T, omega2: T) -> CMatrix<T> {
    let i = |x: T| Cx::new(T::zero(), x);
    let mut a = CMatrix::zeros(5, 5);
    a[(0, 2)] = i(p.gn1);
    a[(1, 4)] = i(p.gn2);
    a[(2, 0)] = i(p.gn1);
    a[(2, 2)] = Cx::new(-p.gamma, T::zero());
    a[(2, 3)] = i(omega1);
    a[(3, 2)] = i(omega1);
    a[(3, 4)] = i(omega2);
    a[(4, 1)] = i(p.gn2);
    a[(4, 3)] = i(omega2);
    a[(4, 4)] = Cx::new(-p.gamma, T::zero());
    a
}

/// Reusable stepping state: caches the local propagator for the current
/// controls.
pub struct Stepper<T> {
    params: Scaled<T>,
    opts: StepOptions,
    cache: Option<((T, T, T), CMatrix<T>)>,
}

impl<T: Real> Stepper<T> {
    pub fn new(params: Scaled<T>, opts: StepOptions) -> Self {
        Self { params, opts, cache: None }
    }

    pub fn params(&self) -> &Scaled<T> {
        &self.params
    }

    fn local(&mut self, omega1: T, omega2: T, h: T) -> &CMatrix<T> {
        let key = (omega1, omega2, h);
        let stale = !matches!(&self.cache, Some((k, _)) if *k == key);
        if stale {
            let a = local_generator(&self.params, omega1, omega2).scale(Cx::new(h, T::zero()));
            self.cache = Some((key, expm(&a)));
        }
        &self.cache.as_ref().expect("cache filled above").1
    }

    fn apply_local(&mut self, grid: &mut FieldGrid<T>, omega1: T, omega2: T, h: T) {
        let m = self.local(omega1, omega2, h).clone();
        let mm = m.as_slice();
        for i in 0..grid.medium_cells {
            let x = [grid.e1[i], grid.e2[i], grid.s_ba[i], grid.s_bc[i], grid.s_bd[i]];
            let mut y = [Cx::zero(); 5];
            for (r, yr) in y.iter_mut().enumerate() {
                let row = &mm[r * 5..r * 5 + 5];
                *yr = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3] + row[4] * x[4];
            }
            grid.e1[i] = y[0];
            grid.e2[i] = y[1];
            grid.s_ba[i] = y[2];
            grid.s_bc[i] = y[3];
            grid.s_bd[i] = y[4];
        }
    }

    /// One Strang step of length `dt` with controls held at the given
    /// values and `inflow` as the boundary value of `(E1, E2)` at `z = 0`.
    pub fn step(
        &mut self,
        grid: &mut FieldGrid<T>,
        omega1: T,
        omega2: T,
        dt: T,
        inflow: (Cx<T>, Cx<T>),
    ) -> Result<StepReport<T>> {
        let courant = dt / grid.dz;
        if courant > T::one() + T::of(1e-12) {
            return Err(Error::Cfl { courant: courant.as_f64() });
        }
        let half = dt / T::of(2.0);
        self.apply_local(grid, omega1, omega2, half);
        advect(&mut grid.e1, courant, inflow.0);
        advect(&mut grid.e2, courant, inflow.1);
        if self.opts.second_order {
            self.second_order_update(grid, dt);
        }
        self.apply_local(grid, omega1, omega2, half);
        grid.time = grid.time + dt;
        let max_excitation = grid.max_excitation();
        let violated = max_excitation > T::of(LOW_EXCITATION_LIMIT);
        if violated {
            if self.opts.strict_low_excitation {
                return Err(Error::LowExcitation { max: max_excitation.as_f64(), limit: LOW_EXCITATION_LIMIT });
            }
            log::warn!(
                "low-excitation assumption violated at t = {}: max |sigma|^2 = {:.3e}",
                grid.time,
                max_excitation.as_f64()
            );
        }
        Ok(StepReport { max_excitation, low_excitation_violated: violated })
    }

    /// `sigma_bc += dt (-i g1 E1 sigma_ba^* sigma_bc - i g2 E2 sigma_bd^* sigma_bc)`,
    /// using `sigma_ac ~ sigma_ab sigma_bc` in the low-excitation limit.
    fn second_order_update(&self, grid: &mut FieldGrid<T>, dt: T) {
        let n = self.params.n_atoms;
        let (k1, k2) = (self.params.gn1 / n, self.params.gn2 / n);
        for i in 0..grid.medium_cells {
            let sbc = grid.s_bc[i];
            let d = grid.e1[i] * grid.s_ba[i].conj() * sbc * Cx::new(T::zero(), -k1)
                + grid.e2[i] * grid.s_bd[i].conj() * sbc * Cx::new(T::zero(), -k2);
            grid.s_bc[i] = sbc + d * dt;
        }
    }
}

/// Free function form of [`Stepper::step`].
pub fn step<T: Real>(
    grid: &mut FieldGrid<T>,
    params: &Scaled<T>,
    omega1: T,
    omega2: T,
    dt: T,
    inflow: (Cx<T>, Cx<T>),
    opts: StepOptions,
) -> Result<StepReport<T>> {
    Stepper::new(*params, opts).step(grid, omega1, omega2, dt, inflow)
}

/// First-order upwind transport; exact shift at Courant number one.
fn advect<T: Real>(e: &mut [Cx<T>], courant: T, inflow: Cx<T>) {
    if courant >= T::one() {
        for i in (1..e.len()).rev() {
            e[i] = e[i - 1];
        }
        e[0] = inflow;
        return;
    }
    for i in (1..e.len()).rev() {
        e[i] = e[i] - (e[i] - e[i - 1]).scale(courant);
    }
    e[0] = e[0] - (e[0] - inflow).scale(courant);
}

/// Polariton decomposition of the current fields.
#[derive(Clone, Debug, PartialEq)]
pub struct PolaritonFields<T> {
    /// Dark polariton `cos t E12 - sin t S_bc`.
    pub psi: Vec<Cx<T>>,
    /// Bright polariton `sin t E12 + cos t S_bc`.
    pub phi: Vec<Cx<T>>,
    /// `cos p E1 + sin p E2`.
    pub e12: Vec<Cx<T>>,
    /// Mismatch field `-sin p E1 + cos p E2`.
    pub s: Vec<Cx<T>>,
    pub angles: MixingAngles<T>,
    pub beta: T,
}

impl<T: Real> PolaritonFields<T> {
    /// `max | |Psi|^2 + |Phi|^2 - |E12|^2 - |S_bc|^2 |` over the grid.
    pub fn rotation_residual(&self, grid: &FieldGrid<T>) -> T {
        (0..self.psi.len()).fold(T::zero(), |m, i| {
            let lhs = self.psi[i].norm_sqr() + self.phi[i].norm_sqr();
            let rhs = self.e12[i].norm_sqr() + grid.s_bc[i].norm_sqr();
            m.max((lhs - rhs).abs())
        })
    }
}

/// Dark/bright polaritons, `E12`, `s` and `beta` for the given controls.
/// `held_phi` is used when both controls are off.
pub fn polariton_diagnostics<T: Real>(
    grid: &FieldGrid<T>,
    params: &Scaled<T>,
    omega1: T,
    omega2: T,
    held_phi: T,
) -> PolaritonFields<T> {
    let angles = params.angles(omega1, omega2, held_phi);
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    let n = grid.nz();
    let mut out = PolaritonFields {
        psi: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        e12: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        angles,
        beta: params.tan2_beta(omega1, omega2).sqrt().atan(),
    };
    for i in 0..n {
        let e12 = grid.e1[i].scale(cp) + grid.e2[i].scale(sp);
        let s = grid.e2[i].scale(cp) - grid.e1[i].scale(sp);
        out.psi.push(e12.scale(ct) - grid.s_bc[i].scale(st));
        out.phi.push(e12.scale(st) + grid.s_bc[i].scale(ct));
        out.e12.push(e12);
        out.s.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled(gn: f64, gamma: f64, length: f64) -> Scaled<f64> {
        Scaled { gn1: gn, gn2: gn, gamma, length, n_atoms: 1e6 }
    }

    #[test]
    fn unit_conversion() {
        let p = ContinuumParams::<f64> { gn1: 1e9, gn2: 1e9, gamma: 1e8, c: 3e8, length: 0.6, n_atoms: 1e8 };
        let s = p.internal().unwrap();
        assert!((s.gn1 - 10.0).abs() < 1e-12 && (s.gamma - 1.0).abs() < 1e-15 && (s.length - 0.2).abs() < 1e-12);
        let lossless = ContinuumParams { gamma: 0.0, ..p };
        assert!((lossless.internal().unwrap().gn1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_pulse_advects_at_c() {
        let p = scaled(1.0, 1.0, 1.0);
        let p = Scaled { gn1: 1e-300, gn2: 1e-300, ..p };
        let mut grid = FieldGrid::new(&p, 401, 3.0).unwrap();
        let shape = |z: f64| Cx::new((-((z - 1.0) / 0.2).powi(2)).exp(), 0.0);
        for i in 0..grid.nz() {
            grid.e1[i] = shape(grid.z(i));
        }
        let mut st = Stepper::new(p, StepOptions::default());
        let dt = grid.dz;
        for _ in 0..200 {
            st.step(&mut grid, 0.0, 0.0, dt, (Cx::zero(), Cx::zero())).unwrap();
        }
        for i in 0..grid.nz() {
            let z0 = grid.z(i) - grid.time;
            let expected = if z0 < -1e-9 { Cx::zero() } else { shape(z0) };
            assert!((grid.e1[i] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn cfl_is_enforced() {
        let p = scaled(1.0, 1.0, 1.0);
        let mut grid = FieldGrid::new(&p, 11, 0.0).unwrap();
        let dt = grid.dz * 1.5;
        let err = step(&mut grid, &p, 1.0, 0.0, dt, (Cx::zero(), Cx::zero()), StepOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }

    #[test]
    fn steady_optical_coherence_matches_adiabatic_elimination() {
        // one medium cell driven by a constant field without control:
        // S_ba relaxes to i g E1 / Gamma
        let p = Scaled { gn1: 0.05, gn2: 0.05, gamma: 1.0, length: 1e-9, n_atoms: 1e6 };
        let mut grid = FieldGrid::new(&p, 2, 1.0).unwrap();
        assert_eq!(grid.medium_cells, 1);
        let mut st = Stepper::new(p, StepOptions::default());
        let (o1, o2) = (0.0, 0.0);
        let dt = 1e-3;
        for _ in 0..20_000 {
            grid.e1[0] = Cx::new(1.0, 0.0);
            st.step(&mut grid, o1, o2, dt, (Cx::new(1.0, 0.0), Cx::zero())).unwrap();
        }
        let i = Cx::new(0.0, 1.0);
        let predicted = (i * p.gn1 * grid.e1[0] + i * o1 * grid.s_bc[0]) / p.gamma;
        assert!((grid.s_ba[0] - predicted).norm() <= 1e-4 * predicted.norm());
    }

    #[test]
    fn polariton_rotation_identity() {
        let p = scaled(3.0, 1.0, 5.0);
        let mut grid = FieldGrid::new(&p, 101, 1.0).unwrap();
        for i in 0..grid.nz() {
            let z = grid.z(i);
            grid.e1[i] = Cx::new(z.sin(), 0.2);
            grid.e2[i] = Cx::new(0.1, z.cos());
            grid.s_bc[i] = Cx::new(0.3 * z, -0.1);
        }
        let d = polariton_diagnostics(&grid, &p, 2.0, 1.0, 0.0);
        assert!(d.rotation_residual(&grid) < 1e-12);
        assert_eq!(d.beta, 0.0);
        let zero_theta = polariton_diagnostics(&grid, &Scaled { gn1: 1e-300, gn2: 1e-300, ..p }, 1.0, 0.0, 0.0);
        assert!((zero_theta.psi[7] - zero_theta.e12[7]).norm() < 1e-15);
        assert!((zero_theta.s[7] - grid.e2[7]).norm() < 1e-15);
    }

    #[test]
    fn unequal_couplings_give_nonzero_beta() {
        let p = Scaled { gn1: 3.0, gn2: 2.0, gamma: 1.0, length: 1.0, n_atoms: 1.0 };
        assert!(p.tan2_beta(1.0, 1.0) > 0.0);
        assert_eq!(p.tan2_beta(1.0, 0.0), 0.0);
        let sym = scaled(10.0, 1.0, 1.0);
        assert!((sym.s_decay_rate(1.0, 1.0) - 100.0).abs() < 1e-12);
    }
}
