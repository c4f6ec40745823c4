//! Bosonized double-Lambda ensemble: interaction Hamiltonian, mixing angles,
//! polariton operators, dark states and the degenerate eigenstate family.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hopping, mode_combination, FockSpace, Mode, SparseOperator, StateVector, NUM_MODES};
use crate::linalg::{symmetric_eigen, CMatrix};
use crate::scalar::{Cx, Real};

/// Physical parameters shared by both engines. Rates in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams<T> {
    pub g1: T,
    pub g2: T,
    /// Number of atoms.
    pub n_atoms: T,
    /// Transverse decay of the optical coherences.
    pub gamma: T,
}

impl<T: Real> CouplingParams<T> {
    pub fn new(g1: T, g2: T, n_atoms: T, gamma: T) -> Result<Self> {
        let p = Self { g1, g2, n_atoms, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric couplings `g1 = g2 = g`, lossless.
    pub fn symmetric(g: T, n_atoms: T) -> Result<Self> {
        Self::new(g, g, n_atoms, T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g1 > T::zero()) || !self.g1.is_finite() {
            return Err(Error::param("g1", format!("must be positive, got {}", self.g1)));
        }
        if !(self.g2 > T::zero()) || !self.g2.is_finite() {
            return Err(Error::param("g2", format!("must be positive, got {}", self.g2)));
        }
        if !(self.n_atoms >= T::one()) || !self.n_atoms.is_finite() {
            return Err(Error::param("n_atoms", format!("must be >= 1, got {}", self.n_atoms)));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Collective coupling `g1 sqrt(N)`.
    pub fn gn1(&self) -> T {
        self.g1 * self.n_atoms.sqrt()
    }

    pub fn gn2(&self) -> T {
        self.g2 * self.n_atoms.sqrt()
    }

    /// True when `g1` and `g2` agree to relative precision `1e-12`.
    pub fn is_symmetric(&self) -> bool {
        (self.g1 - self.g2).abs() <= T::of(1e-12) * self.g1.max(self.g2)
    }

    /// Polariton energies `(eps1, eps2)`; only defined for `g1 = g2`.
    pub fn polariton_energies(&self, omega1: T, omega2: T) -> Option<(T, T)> {
        if !self.is_symmetric() {
            return None;
        }
        let gn = self.gn1();
        Some(((gn * gn + omega1 * omega1 + omega2 * omega2).sqrt(), gn))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> MixingAngles<T> {
    pub fn new(theta: T, phi: T) -> Self {
        Self { theta, phi }
    }
}

/// Mixing angles for non-negative control amplitudes.
///
/// `theta = atan2(g1 sqrt(N), sqrt(Omega1^2 + Omega2^2 g1^2/g2^2))`,
/// `phi = atan2(g1 Omega2, g2 Omega1)`. Errors when both controls vanish.
pub fn mixing_angles<T: Real>(params: &CouplingParams<T>, omega1: T, omega2: T) -> Result<MixingAngles<T>> {
    check_controls(omega1, omega2)?;
    if omega1 == T::zero() && omega2 == T::zero() {
        return Err(Error::UndefinedMixingAngle);
    }
    Ok(angles_unchecked(params, omega1, omega2, T::zero()))
}

/// As [`mixing_angles`] but returns `theta = pi/2` and the supplied `phi`
/// when both controls are off.
pub fn mixing_angles_or_hold<T: Real>(params: &CouplingParams<T>, omega1: T, omega2: T, held_phi: T) -> MixingAngles<T> {
    angles_unchecked(params, omega1.max(T::zero()), omega2.max(T::zero()), held_phi)
}

fn angles_unchecked<T: Real>(p: &CouplingParams<T>, omega1: T, omega2: T, held_phi: T) -> MixingAngles<T> {
    let ratio = p.g1 / p.g2;
    let eff = (omega1 * omega1 + omega2 * omega2 * ratio * ratio).sqrt();
    let theta = p.gn1().atan2(eff);
    let phi = if omega1 == T::zero() && omega2 == T::zero() { held_phi } else { (p.g1 * omega2).atan2(p.g2 * omega1) };
    MixingAngles { theta, phi }
}

fn check_controls<T: Real>(omega1: T, omega2: T) -> Result<()> {
    if !(omega1 >= T::zero()) {
        return Err(Error::param("omega1", format!("must be >= 0, got {omega1}")));
    }
    if !(omega2 >= T::zero()) {
        return Err(Error::param("omega2", format!("must be >= 0, got {omega2}")));
    }
    Ok(())
}

/// The three control-independent pieces of the Hamiltonian,
/// `V = G + Omega1 X1 + Omega2 X2`.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms<T> {
    /// Probe couplings `g1 sqrt(N)(a1 A† + h.c.) + g2 sqrt(N)(a2 D† + h.c.)`.
    pub probe: SparseOperator<T>,
    /// `A†C + C†A`.
    pub control1: SparseOperator<T>,
    /// `D†C + C†D`.
    pub control2: SparseOperator<T>,
}

impl<T: Real> HamiltonianTerms<T> {
    pub fn new(space: &FockSpace, params: &CouplingParams<T>) -> Self {
        let pair = |to: Mode, from: Mode| hopping::<T>(space, to, from).add(&hopping(space, from, to));
        let probe = SparseOperator::linear_combination(
            space.dim(),
            &[
                (Cx::new(params.gn1(), T::zero()), &pair(Mode::A, Mode::Probe1)),
                (Cx::new(params.gn2(), T::zero()), &pair(Mode::D, Mode::Probe2)),
            ],
        );
        Self { probe, control1: pair(Mode::A, Mode::C), control2: pair(Mode::D, Mode::C) }
    }

    pub fn dim(&self) -> usize {
        self.probe.dim()
    }

    /// `y = V(Omega1, Omega2) x` without assembling `V`.
    pub fn apply_into(&self, omega1: T, omega2: T, x: &[Cx<T>], y: &mut [Cx<T>], scratch: &mut [Cx<T>]) {
        self.probe.apply_into(x, y);
        for (op, w) in [(&self.control1, omega1), (&self.control2, omega2)] {
            if w == T::zero() {
                continue;
            }
            op.apply_into(x, scratch);
            for (yi, si) in y.iter_mut().zip(scratch.iter()) {
                *yi = *yi + si.scale(w);
            }
        }
    }

    pub fn assemble(&self, omega1: T, omega2: T) -> SparseOperator<T> {
        SparseOperator::linear_combination(
            self.dim(),
            &[
                (Cx::new(T::one(), T::zero()), &self.probe),
                (Cx::new(omega1, T::zero()), &self.control1),
                (Cx::new(omega2, T::zero()), &self.control2),
            ],
        )
    }
}

/// Interaction Hamiltonian (rad/s, hbar = 1):
/// `V = g1 sqrt(N) a1 A† + Omega1 A†C + g2 sqrt(N) a2 D† + Omega2 D†C + h.c.`
pub fn build_hamiltonian<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    omega1: T,
    omega2: T,
) -> SparseOperator<T> {
    HamiltonianTerms::new(space, params).assemble(omega1, omega2)
}

/// The 5x5 single-excitation block of `V` in mode order `(p1, p2, A, C, D)`.
/// `V = sum_ij h_ij a_i† a_j`.
pub fn single_particle_matrix<T: Real>(params: &CouplingParams<T>, omega1: T, omega2: T) -> [[T; NUM_MODES]; NUM_MODES] {
    let mut h = [[T::zero(); NUM_MODES]; NUM_MODES];
    let mut set = |a: Mode, b: Mode, v: T| {
        h[a.index()][b.index()] = v;
        h[b.index()][a.index()] = v;
    };
    set(Mode::A, Mode::Probe1, params.gn1());
    set(Mode::A, Mode::C, omega1);
    set(Mode::D, Mode::Probe2, params.gn2());
    set(Mode::D, Mode::C, omega2);
    h
}

/// Eigenvalues (ascending) of the single-particle block.
pub fn single_particle_spectrum<T: Real>(params: &CouplingParams<T>, omega1: T, omega2: T) -> Vec<T> {
    let h = single_particle_matrix(params, omega1, omega2);
    let flat: Vec<T> = h.iter().flatten().copied().collect();
    symmetric_eigen(&flat, NUM_MODES).0
}

/// Exact spectral norm of `V` on a space with the given cutoff: the
/// many-body spectrum consists of sums of `<= cutoff` single-particle
/// eigenvalues.
pub fn spectral_norm<T: Real>(params: &CouplingParams<T>, omega1: T, omega2: T, cutoff: usize) -> T {
    let lam = single_particle_spectrum(params, omega1, omega2).into_iter().fold(T::zero(), |m, x| m.max(x.abs()));
    lam * T::of_usize(cutoff)
}

/// Dark- and bright-polariton annihilation operators for one set of angles.
#[derive(Clone, Debug)]
pub struct PolaritonSet<T> {
    pub angles: MixingAngles<T>,
    /// `(eps1, eps2)` when `g1 = g2`.
    pub energies: Option<(T, T)>,
    pub d: SparseOperator<T>,
    pub b: SparseOperator<T>,
    pub u: SparseOperator<T>,
    pub v: SparseOperator<T>,
    pub s: SparseOperator<T>,
    /// `Q+ = u + b`.
    pub q_plus: SparseOperator<T>,
    /// `Q- = u - b`.
    pub q_minus: SparseOperator<T>,
    /// `P+ = s + v`.
    pub p_plus: SparseOperator<T>,
    /// `P- = s - v`.
    pub p_minus: SparseOperator<T>,
}

/// Normal-mode coefficients over `(p1, p2, A, C, D)`.
pub(crate) struct PolaritonCoefficients<T> {
    pub d: [T; NUM_MODES],
    pub b: [T; NUM_MODES],
    pub u: [T; NUM_MODES],
    pub v: [T; NUM_MODES],
    pub s: [T; NUM_MODES],
}

impl<T: Real> PolaritonCoefficients<T> {
    pub fn new(angles: MixingAngles<T>) -> Self {
        let (st, ct) = angles.theta.sin_cos();
        let (sp, cp) = angles.phi.sin_cos();
        let z = T::zero();
        Self {
            d: [ct * cp, ct * sp, z, -st, z],
            b: [st * cp, st * sp, z, ct, z],
            u: [z, z, cp, z, sp],
            v: [z, z, -sp, z, cp],
            s: [-sp, cp, z, z, z],
        }
    }
}

fn combine<T: Real>(x: &[T; NUM_MODES], y: &[T; NUM_MODES], sign: T) -> [Cx<T>; NUM_MODES] {
    std::array::from_fn(|i| Cx::new(x[i] + sign * y[i], T::zero()))
}

fn lift<T: Real>(x: &[T; NUM_MODES]) -> [Cx<T>; NUM_MODES] {
    std::array::from_fn(|i| Cx::new(x[i], T::zero()))
}

impl<T: Real> PolaritonSet<T> {
    pub fn from_angles(space: &FockSpace, angles: MixingAngles<T>, energies: Option<(T, T)>) -> Self {
        let c = PolaritonCoefficients::new(angles);
        let one = T::one();
        Self {
            angles,
            energies,
            d: mode_combination(space, lift(&c.d)),
            b: mode_combination(space, lift(&c.b)),
            u: mode_combination(space, lift(&c.u)),
            v: mode_combination(space, lift(&c.v)),
            s: mode_combination(space, lift(&c.s)),
            q_plus: mode_combination(space, combine(&c.u, &c.b, one)),
            q_minus: mode_combination(space, combine(&c.u, &c.b, -one)),
            p_plus: mode_combination(space, combine(&c.s, &c.v, one)),
            p_minus: mode_combination(space, combine(&c.s, &c.v, -one)),
        }
    }
}

/// Polariton operators at the angles set by the controls.
pub fn polariton_set<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    omega1: T,
    omega2: T,
) -> Result<PolaritonSet<T>> {
    let angles = mixing_angles(params, omega1, omega2)?;
    Ok(PolaritonSet::from_angles(space, angles, params.polariton_energies(omega1, omega2)))
}

/// Dark state `|D_n> = (d†)^n |0> / sqrt(n!)` from its closed trinomial form
/// `sum sqrt(n!/(n1! n2! nc!)) x^n1 y^n2 w^nc |n1, n2; 0, nc, 0>` with
/// `(x, y, w) = (cos t cos p, cos t sin p, -sin t)`.
pub fn dark_state<T: Real>(space: &FockSpace, n: usize, angles: MixingAngles<T>) -> Result<StateVector<T>> {
    if n > space.cutoff() {
        return Err(Error::Headroom { required: n, cutoff: space.cutoff(), limit: space.cutoff() });
    }
    let c = PolaritonCoefficients::new(angles);
    let (x, y, w) = (c.d[0], c.d[1], c.d[3]);
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let mut psi = StateVector::zeros(space.dim());
    for (i, s) in space.states().iter().enumerate() {
        if s.total() != n || s.get(Mode::A) != 0 || s.get(Mode::D) != 0 {
            continue;
        }
        let (n1, n2, nc) = (s.get(Mode::Probe1), s.get(Mode::Probe2), s.get(Mode::C));
        let coef = T::of((0.5 * (ln_fact(n) - ln_fact(n1) - ln_fact(n2) - ln_fact(nc))).exp());
        let amp = coef * ipow(x, n1) * ipow(y, n2) * ipow(w, nc);
        psi.amplitudes_mut()[i] = Cx::new(amp, T::zero());
    }
    psi.normalize("dark state")?;
    Ok(psi)
}

fn ipow<T: Real>(x: T, n: usize) -> T {
    (0..n).fold(T::one(), |acc, _| acc * x)
}

/// Index of `(Q+†)^i (Q-†)^j (P+†)^k (P-†)^l |D_n>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DegeneracyIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub n: usize,
}

impl DegeneracyIndex {
    pub const fn new(i: usize, j: usize, k: usize, l: usize, n: usize) -> Self {
        Self { i, j, k, l, n }
    }

    /// Member `d(i, k; n) = r(i, i; k, k; n)` of the zero-eigenvalue class.
    pub const fn zero_class(i: usize, k: usize, n: usize) -> Self {
        Self { i, j: i, k, l: k, n }
    }

    pub const fn excitations(&self) -> usize {
        self.i + self.j + self.k + self.l + self.n
    }

    /// `(i - j) eps1 + (k - l) eps2`.
    pub fn eigenvalue<T: Real>(&self, eps1: T, eps2: T) -> T {
        let diff = |a: usize, b: usize| T::of_usize(a) - T::of_usize(b);
        diff(self.i, self.j) * eps1 + diff(self.k, self.l) * eps2
    }

    /// Every index with `i + j + k + l + n <= max_total`.
    pub fn all_up_to(max_total: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for i in 0..=max_total {
            for j in 0..=max_total - i {
                for k in 0..=max_total - i - j {
                    for l in 0..=max_total - i - j - k {
                        for n in 0..=max_total - i - j - k - l {
                            out.push(Self::new(i, j, k, l, n));
                        }
                    }
                }
            }
        }
        out
    }
}

/// A normalized degeneracy-class state with its eigenvalue.
#[derive(Clone, Debug)]
pub struct DegeneracyState<T> {
    pub index: DegeneracyIndex,
    pub state: StateVector<T>,
    pub eigenvalue: T,
}

fn check_headroom(space: &FockSpace, idx: &DegeneracyIndex) -> Result<()> {
    let limit = space.cutoff().saturating_sub(2);
    if space.cutoff() < 2 || idx.excitations() > limit {
        return Err(Error::Headroom { required: idx.excitations(), cutoff: space.cutoff(), limit });
    }
    Ok(())
}

/// Builds `(Q+†)^i (Q-†)^j (P+†)^k (P-†)^l |D_n>` and normalizes it.
///
/// Requires `g1 = g2` (energies present on the set) and
/// `i + j + k + l + n <= M - 2`.
pub fn degeneracy_state<T: Real>(space: &FockSpace, set: &PolaritonSet<T>, idx: DegeneracyIndex) -> Result<DegeneracyState<T>> {
    let (eps1, eps2) = set
        .energies
        .ok_or_else(|| Error::param("set", "polariton energies undefined; the degeneracy class needs g1 = g2"))?;
    check_headroom(space, &idx)?;
    let raising = [
        (set.q_plus.adjoint(), idx.i),
        (set.q_minus.adjoint(), idx.j),
        (set.p_plus.adjoint(), idx.k),
        (set.p_minus.adjoint(), idx.l),
    ];
    let mut psi = dark_state(space, idx.n, set.angles)?;
    for (op, power) in raising.iter().rev() {
        for _ in 0..*power {
            psi = op.apply(&psi);
        }
    }
    psi.normalize("degeneracy state")?;
    Ok(DegeneracyState { index: idx, state: psi, eigenvalue: idx.eigenvalue(eps1, eps2) })
}

/// As [`degeneracy_state`], checking `g1 = g2` on the coupling parameters.
pub fn degeneracy_state_for<T: Real>(
    space: &FockSpace,
    params: &CouplingParams<T>,
    set: &PolaritonSet<T>,
    idx: DegeneracyIndex,
) -> Result<DegeneracyState<T>> {
    if !params.is_symmetric() {
        return Err(Error::UnequalCouplings { g1: params.g1.as_f64(), g2: params.g2.as_f64() });
    }
    degeneracy_state(space, set, idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleKind {
    Theta,
    Phi,
}

/// `<r_a| d/d(angle) |r_b>` over the listed degeneracy states, by central
/// differences with step `h` in `[1e-6, 1e-3]`.
pub fn adiabatic_mixing_matrix<T: Real>(
    space: &FockSpace,
    set: &PolaritonSet<T>,
    indices: &[DegeneracyIndex],
    which: AngleKind,
    h: T,
) -> Result<CMatrix<T>> {
    if !(h >= T::of(1e-6) && h <= T::of(1e-3)) {
        return Err(Error::param("h", format!("finite-difference step must lie in [1e-6, 1e-3], got {h}")));
    }
    for idx in indices {
        check_headroom(space, idx)?;
    }
    let shifted = |delta: T| {
        let mut a = set.angles;
        match which {
            AngleKind::Theta => a.theta = a.theta + delta,
            AngleKind::Phi => a.phi = a.phi + delta,
        }
        PolaritonSet::from_angles(space, a, set.energies)
    };
    let plus = shifted(h);
    let minus = shifted(-h);
    let centre: Vec<StateVector<T>> =
        indices.iter().map(|&i| degeneracy_state(space, set, i).map(|s| s.state)).collect::<Result<_>>()?;
    let inv = Cx::new(T::one() / (T::of(2.0) * h), T::zero());
    let mut derivs = Vec::with_capacity(indices.len());
    for &idx in indices {
        let p = degeneracy_state(space, &plus, idx)?.state;
        let m = degeneracy_state(space, &minus, idx)?.state;
        derivs.push(p.add_scaled(-Cx::new(T::one(), T::zero()), &m).scaled(inv));
    }
    let n = indices.len();
    let mut out = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            out[(a, b)] = centre[a].inner(&derivs[b])?;
        }
    }
    Ok(out)
}

/// Total population of the dark subspace `{|D_n>}` at the given angles.
pub fn dark_population<T: Real>(space: &FockSpace, psi: &StateVector<T>, angles: MixingAngles<T>) -> Result<T> {
    let mut total = T::zero();
    for n in 0..=space.cutoff() {
        let dn = dark_state(space, n, angles)?;
        total = total + dn.inner(psi)?.norm_sqr();
    }
    Ok(total)
}

/// Same as [`dark_population`] using precomputed coefficients: `|D_n>` lives
/// on `(n1, n2, nc)` tuples only, so the overlap is a sparse sum.
pub(crate) struct DarkProjector {
    /// `(basis ordinal, n, log of multinomial prefactor, n1, n2, nc)`.
    entries: Vec<(usize, usize, f64, u8, u8, u8)>,
    cutoff: usize,
}

impl DarkProjector {
    pub fn new(space: &FockSpace) -> Self {
        let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
        let entries = space
            .states()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.get(Mode::A) == 0 && s.get(Mode::D) == 0)
            .map(|(i, s)| {
                let (n1, n2, nc) = (s.get(Mode::Probe1), s.get(Mode::Probe2), s.get(Mode::C));
                let n = s.total();
                let lc = 0.5 * (ln_fact(n) - ln_fact(n1) - ln_fact(n2) - ln_fact(nc));
                (i, n, lc, n1 as u8, n2 as u8, nc as u8)
            })
            .collect();
        Self { entries, cutoff: space.cutoff() }
    }

    pub fn population<T: Real>(&self, psi: &[Cx<T>], angles: MixingAngles<T>) -> T {
        let c = PolaritonCoefficients::new(angles);
        let (x, y, w) = (c.d[0], c.d[1], c.d[3]);
        let mut overlaps = vec![Cx::<T>::zero(); self.cutoff + 1];
        for &(i, n, lc, n1, n2, nc) in &self.entries {
            let a = T::of(lc.exp()) * ipow(x, n1 as usize) * ipow(y, n2 as usize) * ipow(w, nc as usize);
            overlaps[n] = overlaps[n] + psi[i].scale(a);
        }
        overlaps.iter().map(|o| o.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_space, BasisState};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn params() -> CouplingParams<f64> {
        CouplingParams::symmetric(1.0, 100.0).unwrap()
    }

    #[test]
    fn mixing_angle_examples() {
        let a = mixing_angles(&params(), 10.0, 0.0).unwrap();
        assert!((a.theta - FRAC_PI_4).abs() < 1e-15 && a.phi == 0.0);
        let a = mixing_angles(&params(), 3.0, 3.0).unwrap();
        assert!((a.phi - FRAC_PI_4).abs() < 1e-15);
        let a = mixing_angles(&params(), 1e9, 1e9).unwrap();
        assert!(a.theta < 1e-8);
        assert!(matches!(mixing_angles(&params(), 0.0, 0.0), Err(Error::UndefinedMixingAngle)));
        let held = mixing_angles_or_hold(&params(), 0.0, 0.0, 0.3);
        assert_eq!((held.theta, held.phi), (FRAC_PI_2, 0.3));
    }

    #[test]
    fn hamiltonian_matrix_elements() {
        let space = build_space(3).unwrap();
        let p = CouplingParams::<f64>::new(0.7, 1.3, 49.0, 0.0).unwrap();
        let v = build_hamiltonian(&space, &p, 2.0, 0.5);
        assert!(v.hermiticity_residual() <= 1e-14);
        let photon = space.index_of(&BasisState::single(Mode::Probe1, 1)).unwrap();
        let atom = space.index_of(&BasisState::single(Mode::A, 1)).unwrap();
        assert!((v.to_dense()[(photon, atom)].re - 0.7 * 7.0).abs() < 1e-14);

        let zero = build_hamiltonian(&space, &CouplingParams::new(1e-300, 1e-300, 1.0, 0.0).unwrap(), 0.0, 0.0);
        assert!(zero.max_abs() < 1e-299);
    }

    #[test]
    fn single_excitation_spectrum() {
        let p = params();
        let (o1, o2) = (3.0, 4.0);
        let space = build_space(1).unwrap();
        let dense = build_hamiltonian(&space, &p, o1, o2).to_dense();
        let vals = crate::linalg::hermitian_eigenvalues(&dense);
        let (e1, e2) = p.polariton_energies(o1, o2).unwrap();
        let mut expected = vec![0.0, 0.0, -e1, e1, -e2, e2];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (v, e) in vals.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-12, "{vals:?} vs {expected:?}");
        }
        assert!((spectral_norm(&p, o1, o2, 7) - 7.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn polariton_limits() {
        let space = build_space(3).unwrap();
        let set = PolaritonSet::<f64>::from_angles(&space, MixingAngles::new(0.0, 0.0), None);
        let a1 = crate::fock::ladder(&space, Mode::Probe1, crate::fock::LadderKind::Lower);
        assert!(set.d.sub(&a1).max_abs() < 1e-15);
        let set = PolaritonSet::<f64>::from_angles(&space, MixingAngles::new(FRAC_PI_2, 0.4), None);
        let c = crate::fock::ladder(&space, Mode::C, crate::fock::LadderKind::Lower);
        assert!(set.d.add(&c).max_abs() < 1e-15);
    }

    #[test]
    fn dark_state_examples() {
        let space = build_space(4).unwrap();
        let d0 = dark_state::<f64>(&space, 0, MixingAngles::new(0.3, 0.2)).unwrap();
        assert_eq!(d0, StateVector::vacuum(&space));
        let d1 = dark_state::<f64>(&space, 1, MixingAngles::new(0.0, 0.0)).unwrap();
        assert!((d1.amplitude(&space, &BasisState::single(Mode::Probe1, 1)).re - 1.0).abs() < 1e-15);
        let d1 = dark_state::<f64>(&space, 1, MixingAngles::new(0.0, FRAC_PI_4)).unwrap();
        let h = 0.5f64.sqrt();
        assert!((d1.amplitude(&space, &BasisState::single(Mode::Probe1, 1)).re - h).abs() < 1e-15);
        assert!((d1.amplitude(&space, &BasisState::single(Mode::Probe2, 1)).re - h).abs() < 1e-15);
        assert!(dark_state::<f64>(&space, 5, MixingAngles::new(0.1, 0.1)).is_err());
    }

    #[test]
    fn closed_form_matches_operator_powers() {
        let space = build_space(6).unwrap();
        let angles = MixingAngles::new(0.7, 1.1);
        let set = PolaritonSet::<f64>::from_angles(&space, angles, None);
        let dd = set.d.adjoint();
        let mut psi = StateVector::vacuum(&space);
        for n in 1..=6 {
            psi = dd.apply(&psi);
            let expected = psi.clone().normalized("test").unwrap();
            let closed = dark_state(&space, n, angles).unwrap();
            assert!(closed.add_scaled(Cx::new(-1.0, 0.0), &expected).norm() < 1e-12);
        }
    }

    #[test]
    fn dark_projector_agrees_with_explicit_overlaps() {
        let space = build_space(5).unwrap();
        let angles = MixingAngles::new(0.4, 0.9);
        let mut psi = dark_state::<f64>(&space, 2, angles).unwrap().add_scaled(
            Cx::new(0.3, 0.1),
            &StateVector::basis(&space, &BasisState::single(Mode::A, 1)).unwrap(),
        );
        psi.normalize("test").unwrap();
        let fast = DarkProjector::new(&space).population(psi.amplitudes(), angles);
        let slow = dark_population(&space, &psi, angles).unwrap();
        assert!((fast - slow).abs() < 1e-13);
    }

    #[test]
    fn degeneracy_requires_symmetric_couplings_and_headroom() {
        let space = build_space(4).unwrap();
        let p = CouplingParams::new(1.0, 2.0, 10.0, 0.0).unwrap();
        let set = polariton_set(&space, &p, 1.0, 1.0).unwrap();
        assert!(matches!(
            degeneracy_state_for(&space, &p, &set, DegeneracyIndex::new(0, 0, 0, 0, 1)),
            Err(Error::UnequalCouplings { .. })
        ));
        let set = polariton_set(&space, &params(), 1.0, 1.0).unwrap();
        assert!(matches!(
            degeneracy_state(&space, &set, DegeneracyIndex::new(1, 1, 0, 0, 1)),
            Err(Error::Headroom { .. })
        ));
        let r = degeneracy_state(&space, &set, DegeneracyIndex::new(0, 0, 0, 0, 2)).unwrap();
        let d2 = dark_state(&space, 2, set.angles).unwrap();
        assert!((r.state.inner(&d2).unwrap().norm() - 1.0).abs() < 1e-14);
    }
}
