//! Truncated five-mode bosonic Fock space.
//!
//! Modes are the two probe fields and the three bosonized collective atomic
//! excitations `A`, `C`, `D`. The space keeps every occupation tuple whose
//! total excitation number is at most the cutoff `M`; the interaction
//! Hamiltonian conserves that number, so excitation-conserving dynamics that
//! start below the cutoff never touch the truncation boundary.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Cx, Real};

pub const NUM_MODES: usize = 5;
pub const MAX_CUTOFF: usize = 16;
/// Largest admissible probability mass lost to truncation by the checked
/// state constructors.
pub const LEAKAGE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Probe1,
    Probe2,
    A,
    C,
    D,
}

impl Mode {
    pub const ALL: [Mode; NUM_MODES] = [Mode::Probe1, Mode::Probe2, Mode::A, Mode::C, Mode::D];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn is_photonic(self) -> bool {
        matches!(self, Mode::Probe1 | Mode::Probe2)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Probe1 => "p1",
            Mode::Probe2 => "p2",
            Mode::A => "A",
            Mode::C => "C",
            Mode::D => "D",
        };
        f.write_str(s)
    }
}

/// Occupations `(n_p1, n_p2, n_A, n_C, n_D)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BasisState(pub [u8; NUM_MODES]);

impl BasisState {
    pub const VACUUM: BasisState = BasisState([0; NUM_MODES]);

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    #[inline]
    pub fn get(&self, mode: Mode) -> usize {
        self.0[mode.index()] as usize
    }

    pub fn with(mut self, mode: Mode, n: usize) -> Self {
        self.0[mode.index()] = n as u8;
        self
    }

    pub fn single(mode: Mode, n: usize) -> Self {
        Self::VACUUM.with(mode, n)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.0;
        write!(f, "|{a},{b};{c},{d},{e}>")
    }
}

/// Ordered basis of all occupation tuples with total excitation `<= cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockSpace {
    cutoff: usize,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

/// Builds the truncated space; ordering is lexicographic in
/// `(n_p1, n_p2, n_A, n_C, n_D)`.
pub fn build_space(cutoff: usize) -> Result<FockSpace> {
    FockSpace::new(cutoff)
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff > MAX_CUTOFF {
            return Err(Error::CutoffOutOfRange { cutoff, max: MAX_CUTOFF });
        }
        let mut states = Vec::new();
        let mut occ = [0u8; NUM_MODES];
        enumerate(0, cutoff, &mut occ, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Self { cutoff, states, index })
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn state(&self, i: usize) -> BasisState {
        self.states[i]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    #[inline]
    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Ordinals of the basis states with total excitation `<= max_total`.
    pub fn indices_up_to(&self, max_total: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.states[i].total() <= max_total).collect()
    }
}

fn enumerate(mode: usize, remaining: usize, occ: &mut [u8; NUM_MODES], out: &mut Vec<BasisState>) {
    if mode == NUM_MODES {
        out.push(BasisState(*occ));
        return;
    }
    for n in 0..=remaining {
        occ[mode] = n as u8;
        enumerate(mode + 1, remaining - n, occ, out);
    }
    occ[mode] = 0;
}

/// Complex sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Cx<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, indptr: vec![0; dim + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, Cx::one())))
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, Cx<T>)>) -> Self {
        let mut t: Vec<(usize, usize, Cx<T>)> = triplets.into_iter().collect();
        t.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, Cx<T>)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| !e.2.is_zero());
        let mut indptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        Self {
            dim,
            indptr,
            indices: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored `(row, col, value)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Cx<T>)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Cx::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc = acc + self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &StateVector<T>) -> StateVector<T> {
        let mut y = vec![Cx::zero(); self.dim];
        self.apply_into(&x.amplitudes, &mut y);
        StateVector { amplitudes: y }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scaled(&self, s: Cx<T>) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (r, c, v * s)))
    }

    /// `sum_k c_k A_k` over operators of equal dimension.
    pub fn linear_combination(dim: usize, terms: &[(Cx<T>, &SparseOperator<T>)]) -> Self {
        Self::from_triplets(
            dim,
            terms.iter().flat_map(|(c, op)| {
                assert_eq!(op.dim, dim);
                op.entries().map(move |(r, col, v)| (r, col, v * *c))
            }),
        )
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::linear_combination(self.dim, &[(Cx::one(), self), (Cx::one(), rhs)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::linear_combination(self.dim, &[(Cx::one(), self), (-Cx::<T>::one(), rhs)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut acc = vec![Cx::<T>::zero(); self.dim];
        let mut touched = vec![false; self.dim];
        let mut cols = Vec::new();
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k];
                let a = self.values[k];
                for kk in rhs.indptr[mid]..rhs.indptr[mid + 1] {
                    let c = rhs.indices[kk];
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] = acc[c] + a * rhs.values[kk];
                }
            }
            for &c in &cols {
                triplets.push((r, c, acc[c]));
                acc[c] = Cx::zero();
                touched[c] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.dim, triplets)
    }

    /// `[a, b] = ab - ba`.
    pub fn commutator(a: &Self, b: &Self) -> Self {
        a.matmul(b).sub(&b.matmul(a))
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Largest entry magnitude among rows and columns whose basis states have
    /// total excitation `<= max_total`.
    pub fn max_abs_restricted(&self, space: &FockSpace, max_total: usize) -> T {
        assert_eq!(space.dim(), self.dim);
        self.entries()
            .filter(|(r, c, _)| space.state(*r).total() <= max_total && space.state(*c).total() <= max_total)
            .fold(T::zero(), |m, (_, _, v)| m.max(v.norm()))
    }

    /// Entrywise `max |A - A†|`.
    pub fn hermiticity_residual(&self) -> T {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Normalized complex amplitude vector over a [`FockSpace`] basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    amplitudes: Vec<Cx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn from_amplitudes(amplitudes: Vec<Cx<T>>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amplitudes: vec![Cx::zero(); dim] }
    }

    pub fn basis(space: &FockSpace, state: &BasisState) -> Result<Self> {
        let i = space.index_of(state).ok_or(Error::Headroom {
            required: state.total(),
            cutoff: space.cutoff(),
            limit: space.cutoff(),
        })?;
        let mut v = Self::zeros(space.dim());
        v.amplitudes[i] = Cx::one();
        Ok(v)
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        let mut v = Self::zeros(space.dim());
        v.amplitudes[0] = Cx::one();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Cx<T>] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Cx<T>> {
        self.amplitudes
    }

    pub fn amplitude(&self, space: &FockSpace, state: &BasisState) -> Cx<T> {
        space.index_of(state).map(|i| self.amplitudes[i]).unwrap_or_else(Cx::zero)
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm; fails on the zero vector.
    pub fn normalize(&mut self, what: &'static str) -> Result<()> {
        let n = self.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::ZeroVector(what));
        }
        let inv = T::one() / n;
        for a in &mut self.amplitudes {
            *a = a.scale(inv);
        }
        Ok(())
    }

    pub fn normalized(mut self, what: &'static str) -> Result<Self> {
        self.normalize(what)?;
        Ok(self)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Cx<T>> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { left: self.len(), right: other.len() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).fold(Cx::zero(), |acc, (a, b)| acc + a.conj() * *b))
    }

    pub fn scaled(&self, s: Cx<T>) -> Self {
        Self { amplitudes: self.amplitudes.iter().map(|a| *a * s).collect() }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: Cx<T>, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self { amplitudes: self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| *a + *b * s).collect() }
    }

    /// Expectation value `<psi|op|psi>`.
    pub fn expectation(&self, op: &SparseOperator<T>) -> Cx<T> {
        self.inner(&op.apply(self)).expect("operator and state share the space")
    }

    /// Total population on basis states selected by `pred`.
    pub fn population_where(&self, space: &FockSpace, pred: impl Fn(&BasisState) -> bool) -> T {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(&space.state(*i)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Mean occupation of `mode`.
    pub fn mean_occupation(&self, space: &FockSpace, mode: Mode) -> T {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * T::of_usize(space.state(i).get(mode)))
            .sum()
    }

    pub fn mean_excitation(&self, space: &FockSpace) -> T {
        self.amplitudes.iter().enumerate().map(|(i, a)| a.norm_sqr() * T::of_usize(space.state(i).total())).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderKind {
    Raise,
    Lower,
}

/// Creation or annihilation operator of one mode; raising past the cutoff
/// maps to zero.
pub fn ladder<T: Real>(space: &FockSpace, mode: Mode, kind: LadderKind) -> SparseOperator<T> {
    let mut triplets = Vec::new();
    for (col, s) in space.states().iter().enumerate() {
        let n = s.get(mode);
        match kind {
            LadderKind::Lower if n > 0 => {
                let row = space.index_of(&s.with(mode, n - 1)).expect("lowered state in space");
                triplets.push((row, col, Cx::new(T::of_usize(n).sqrt(), T::zero())));
            }
            LadderKind::Raise if s.total() < space.cutoff() => {
                let row = space.index_of(&s.with(mode, n + 1)).expect("raised state in space");
                triplets.push((row, col, Cx::new(T::of_usize(n + 1).sqrt(), T::zero())));
            }
            _ => {}
        }
    }
    SparseOperator::from_triplets(space.dim(), triplets)
}

/// Number operator `a†a` of one mode (diagonal).
pub fn number<T: Real>(space: &FockSpace, mode: Mode) -> SparseOperator<T> {
    SparseOperator::from_triplets(
        space.dim(),
        space.states().iter().enumerate().map(|(i, s)| (i, i, Cx::new(T::of_usize(s.get(mode)), T::zero()))),
    )
}

/// Total excitation operator `sum_modes a†a`.
pub fn total_number<T: Real>(space: &FockSpace) -> SparseOperator<T> {
    SparseOperator::from_triplets(
        space.dim(),
        space.states().iter().enumerate().map(|(i, s)| (i, i, Cx::new(T::of_usize(s.total()), T::zero()))),
    )
}

/// Excitation-conserving hop `a_to† a_from` (`to != from`). Never leaves the
/// truncated space, so no cutoff artifacts arise.
pub fn hopping<T: Real>(space: &FockSpace, to: Mode, from: Mode) -> SparseOperator<T> {
    assert_ne!(to, from, "hopping needs two distinct modes");
    let mut triplets = Vec::new();
    for (col, s) in space.states().iter().enumerate() {
        let nf = s.get(from);
        if nf == 0 {
            continue;
        }
        let nt = s.get(to);
        let target = s.with(from, nf - 1).with(to, nt + 1);
        let row = space.index_of(&target).expect("hop conserves total excitation");
        let amp = (T::of_usize(nf) * T::of_usize(nt + 1)).sqrt();
        triplets.push((row, col, Cx::new(amp, T::zero())));
    }
    SparseOperator::from_triplets(space.dim(), triplets)
}

/// Annihilation operator of the normal mode `sum_m c_m a_m`.
pub fn mode_combination<T: Real>(space: &FockSpace, coeffs: [Cx<T>; NUM_MODES]) -> SparseOperator<T> {
    let ops: Vec<(Cx<T>, SparseOperator<T>)> = Mode::ALL
        .iter()
        .zip(coeffs)
        .filter(|(_, c)| !c.is_zero())
        .map(|(m, c)| (c, ladder(space, *m, LadderKind::Lower)))
        .collect();
    let terms: Vec<(Cx<T>, &SparseOperator<T>)> = ops.iter().map(|(c, op)| (*c, op)).collect();
    SparseOperator::linear_combination(space.dim(), &terms)
}

/// Single-mode coherent amplitudes `P_n = alpha^n e^{-|alpha|^2/2} / sqrt(n!)`
/// for `n = 0..=n_max`, untruncated and unnormalized.
pub fn coherent_amplitudes<T: Real>(alpha: Cx<T>, n_max: usize) -> Vec<Cx<T>> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut p = Cx::new((-alpha.norm_sqr() / T::of(2.0)).exp(), T::zero());
    out.push(p);
    for n in 1..=n_max {
        p = p * alpha / T::of_usize(n).sqrt();
        out.push(p);
    }
    out
}

/// Probability mass of a coherent state beyond occupation `cutoff`.
pub fn truncation_leakage<T: Real>(alpha: Cx<T>, cutoff: usize) -> T {
    let kept: T = coherent_amplitudes(alpha, cutoff).iter().map(|p| p.norm_sqr()).sum();
    (T::one() - kept).max(T::zero())
}

/// Product state with the given single-mode amplitude lists (vacuum on
/// unlisted modes), truncated to the space and renormalized.
///
/// Returns the state together with the truncated probability mass.
pub fn product_state<T: Real>(space: &FockSpace, factors: &[(Mode, &[Cx<T>])]) -> Result<(StateVector<T>, T)> {
    let mut amps = vec![Cx::<T>::zero(); space.dim()];
    let mut full_norm = T::one();
    for (_, f) in factors {
        full_norm = full_norm * f.iter().map(|a| a.norm_sqr()).sum::<T>();
    }
    for (i, s) in space.states().iter().enumerate() {
        let mut a = Cx::<T>::one();
        for m in Mode::ALL {
            let n = s.get(m);
            match factors.iter().find(|(fm, _)| *fm == m) {
                Some((_, f)) => a = a * f.get(n).copied().unwrap_or_else(Cx::zero),
                None if n > 0 => a = Cx::zero(),
                None => {}
            }
            if a.is_zero() {
                break;
            }
        }
        amps[i] = a;
    }
    let mut v = StateVector::from_amplitudes(amps);
    let kept = v.norm_sqr();
    let leakage = ((full_norm - kept) / full_norm).max(T::zero());
    v.normalize("product state")?;
    Ok((v, leakage))
}

fn check_leakage<T: Real>(alpha: Cx<T>, cutoff: usize, leakage: T, tolerance: f64) -> Result<()> {
    if leakage.as_f64() > tolerance {
        return Err(Error::TruncationLeakage {
            alpha: alpha.norm().as_f64(),
            cutoff,
            leakage: leakage.as_f64(),
            tolerance,
        });
    }
    Ok(())
}

/// Truncated, renormalized coherent state `|alpha>` in `mode`, vacuum
/// elsewhere. Fails if more than [`LEAKAGE_TOLERANCE`] of the probability lies
/// beyond the cutoff.
pub fn coherent_state<T: Real>(space: &FockSpace, mode: Mode, alpha: Cx<T>) -> Result<StateVector<T>> {
    coherent_state_with_tolerance(space, mode, alpha, LEAKAGE_TOLERANCE)
}

pub fn coherent_state_with_tolerance<T: Real>(
    space: &FockSpace,
    mode: Mode,
    alpha: Cx<T>,
    tolerance: f64,
) -> Result<StateVector<T>> {
    let amps = coherent_amplitudes(alpha, space.cutoff());
    check_leakage(alpha, space.cutoff(), truncation_leakage(alpha, space.cutoff()), tolerance)?;
    Ok(product_state(space, &[(mode, &amps)])?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatSign {
    Plus,
    Minus,
}

impl CatSign {
    pub fn value<T: Real>(self) -> T {
        match self {
            CatSign::Plus => T::one(),
            CatSign::Minus => -T::one(),
        }
    }
}

/// Normalization `N±(alpha) = 2 ± 2 e^{-2|alpha|^2}` of an untruncated cat.
pub fn cat_normalization<T: Real>(alpha: Cx<T>, sign: CatSign) -> T {
    T::of(2.0) + sign.value::<T>() * T::of(2.0) * (-T::of(2.0) * alpha.norm_sqr()).exp()
}

/// `(|alpha> ± |-alpha>)` in `mode`, truncated and renormalized.
pub fn cat_state<T: Real>(space: &FockSpace, mode: Mode, alpha: Cx<T>, sign: CatSign) -> Result<StateVector<T>> {
    if sign == CatSign::Minus && alpha.is_zero() {
        return Err(Error::ZeroVector("odd cat state with alpha = 0"));
    }
    check_leakage(alpha, space.cutoff(), truncation_leakage(alpha, space.cutoff()), LEAKAGE_TOLERANCE)?;
    let s = sign.value::<T>();
    let amps: Vec<Cx<T>> = coherent_amplitudes(alpha, space.cutoff())
        .into_iter()
        .enumerate()
        .map(|(n, p)| {
            let parity = if n % 2 == 0 { T::one() } else { -T::one() };
            p * (T::one() + s * parity)
        })
        .collect();
    Ok(product_state(space, &[(mode, &amps)])?.0)
}

/// Fock state `|n>` in `mode`, vacuum elsewhere.
pub fn number_state<T: Real>(space: &FockSpace, mode: Mode, n: usize) -> Result<StateVector<T>> {
    StateVector::basis(space, &BasisState::single(mode, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_spaces() {
        assert_eq!(build_space(0).unwrap().dim(), 1);
        let s1 = build_space(1).unwrap();
        assert_eq!(s1.dim(), 6);
        assert_eq!(s1.state(0), BasisState::VACUUM);
        assert!(matches!(build_space(17), Err(Error::CutoffOutOfRange { .. })));
    }

    #[test]
    fn dimension_matches_brute_force_enumeration() {
        for m in 0..=8 {
            let mut count = 0;
            for a in 0..=m {
                for b in 0..=m {
                    for c in 0..=m {
                        for d in 0..=m {
                            for e in 0..=m {
                                if a + b + c + d + e <= m {
                                    count += 1;
                                }
                            }
                        }
                    }
                }
            }
            let space = build_space(m).unwrap();
            assert_eq!(space.dim(), count);
            assert_eq!(space.dim(), binomial(m + 5, 5));
        }
        assert_eq!(build_space(8).unwrap().dim(), 1287);
    }

    #[test]
    fn ordering_is_lexicographic_and_index_maps_invert() {
        let space = build_space(4).unwrap();
        for w in space.states().windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..space.dim() {
            assert_eq!(space.index_of(&space.state(i)), Some(i));
        }
        assert_eq!(space, build_space(4).unwrap());
    }

    #[test]
    fn lowering_annihilates_vacuum_and_number_operator() {
        let space = build_space(5).unwrap();
        let vac = StateVector::<f64>::vacuum(&space);
        for m in Mode::ALL {
            let a = ladder::<f64>(&space, m, LadderKind::Lower);
            assert!(a.apply(&vac).norm() == 0.0);
            let ad = ladder::<f64>(&space, m, LadderKind::Raise);
            let n_op = ad.matmul(&a);
            let three = number_state::<f64>(&space, m, 3).unwrap();
            let out = n_op.apply(&three);
            assert!((out.inner(&three).unwrap().re - 3.0).abs() < 1e-14);
            assert!(out.add_scaled(Cx::new(-3.0, 0.0), &three).norm() < 1e-14);
        }
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let space = build_space(4).unwrap();
        for m in Mode::ALL {
            let a = ladder::<f64>(&space, m, LadderKind::Lower);
            let ad = ladder::<f64>(&space, m, LadderKind::Raise);
            let comm = SparseOperator::commutator(&a, &ad).to_dense();
            let safe = space.indices_up_to(space.cutoff() - 1);
            for &i in &safe {
                for &j in &safe {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((comm[(i, j)] - Cx::new(expected, 0.0)).norm() < 1e-12);
                }
            }
            assert_eq!(a.adjoint(), ad);
        }
    }

    #[test]
    fn coherent_state_examples() {
        let space = build_space(10).unwrap();
        let vac = coherent_state::<f64>(&space, Mode::Probe1, Cx::new(0.0, 0.0)).unwrap();
        assert_eq!(vac, StateVector::vacuum(&space));

        let raw = coherent_amplitudes::<f64>(Cx::new(1.0, 0.0), 10);
        assert!((raw[1].re - (-0.5f64).exp()).abs() < 1e-15);

        let psi = coherent_state::<f64>(&space, Mode::Probe2, Cx::new(1.0, 0.0)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_leakage_bound_is_enforced() {
        // alpha = 2 leaks 1.13e-6 beyond M = 16, just over the default bound.
        let space = build_space(16).unwrap();
        let alpha = Cx::new(2.0, 0.0);
        let err = coherent_state::<f64>(&space, Mode::Probe1, alpha).unwrap_err();
        assert!(matches!(err, Error::TruncationLeakage { .. }));
        let psi = coherent_state_with_tolerance::<f64>(&space, Mode::Probe1, alpha, 1e-5).unwrap();
        // oracle: directly summed truncated Poisson series
        let mut num = 0.0;
        let mut den = 0.0;
        let mut p = (-4.0f64).exp();
        for n in 0..=16usize {
            if n > 0 {
                p *= 4.0 / n as f64;
            }
            num += n as f64 * p;
            den += p;
        }
        let mean = psi.mean_occupation(&space, Mode::Probe1);
        assert!((mean - num / den).abs() < 1e-12);
        assert!((mean - 4.0).abs() < 1e-4);
    }

    #[test]
    fn cat_state_examples() {
        let space = build_space(12).unwrap();
        let plus0 = cat_state::<f64>(&space, Mode::Probe2, Cx::new(0.0, 0.0), CatSign::Plus).unwrap();
        assert_eq!(plus0, StateVector::vacuum(&space));
        assert!(cat_state::<f64>(&space, Mode::Probe2, Cx::new(0.0, 0.0), CatSign::Minus).is_err());

        let space16 = build_space(16).unwrap();
        let odd =
            cat_state_with_leakage_check_skipped(&space16, Cx::new(2.0, 0.0));
        for (i, s) in space16.states().iter().enumerate() {
            if s.get(Mode::Probe1) % 2 == 0 {
                assert_eq!(odd.amplitudes()[i], Cx::new(0.0, 0.0));
            }
        }

        let cat = cat_state::<f64>(&space, Mode::Probe1, Cx::new(1.0, 0.0), CatSign::Plus).unwrap();
        assert!((cat.norm_sqr() - 1.0).abs() < 1e-12);
        let coh = coherent_state::<f64>(&space, Mode::Probe1, Cx::new(1.0, 0.0)).unwrap();
        let expected = (1.0 + (-2.0f64).exp()) / (2.0 + 2.0 * (-2.0f64).exp()).sqrt();
        assert!((coh.inner(&cat).unwrap().re - expected).abs() < 1e-9);
    }

    fn cat_state_with_leakage_check_skipped(space: &FockSpace, alpha: Cx<f64>) -> StateVector<f64> {
        let amps: Vec<Cx<f64>> = coherent_amplitudes(alpha, space.cutoff())
            .into_iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 1 { p * 2.0 } else { Cx::new(0.0, 0.0) })
            .collect();
        product_state(space, &[(Mode::Probe1, &amps)]).unwrap().0
    }

    #[test]
    fn excitation_conserving_bilinears_commute_with_total_number() {
        let space = build_space(5).unwrap();
        let n_tot = total_number::<f64>(&space);
        for &from in &Mode::ALL {
            for &to in &Mode::ALL {
                if from == to {
                    continue;
                }
                let h = hopping::<f64>(&space, to, from);
                assert!(SparseOperator::commutator(&n_tot, &h).max_abs() <= 1e-12);
                // hopping equals a_to† a_from wherever the product is exact
                let prod = ladder::<f64>(&space, to, LadderKind::Raise).matmul(&ladder(&space, from, LadderKind::Lower));
                assert!(h.sub(&prod).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn f32_space_and_ladders() {
        let space = build_space(3).unwrap();
        let a = ladder::<f32>(&space, Mode::C, LadderKind::Lower);
        let ad = ladder::<f32>(&space, Mode::C, LadderKind::Raise);
        let comm = SparseOperator::commutator(&a, &ad);
        assert!((comm.max_abs_restricted(&space, 2) - 1.0).abs() < 1e-6);
        let psi = coherent_state::<f32>(&build_space(12).unwrap(), Mode::Probe1, Cx::new(0.5, 0.0)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-6);
    }
}
