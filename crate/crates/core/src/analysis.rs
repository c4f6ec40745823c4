//! Fidelities, reduced density matrices and entanglement entropies.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, product_state, CatSign, FockSpace, Mode, StateVector};
use crate::linalg::{hermitian_eigenvalues, symmetric_eigen, CMatrix};
use crate::scalar::{Cx, Real};

/// Eigenvalues below this are dropped before taking logarithms.
pub const EIGEN_CLIP: f64 = 1e-14;

/// `|<psi|phi>|^2`.
pub fn fidelity<T: Real>(psi: &StateVector<T>, phi: &StateVector<T>) -> Result<T> {
    Ok(psi.inner(phi)?.norm_sqr())
}

/// Density matrix of a subset of modes over the occupation tuples that occur.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity<T> {
    modes: Vec<Mode>,
    /// Occupations of the kept modes, one tuple per row.
    basis: Vec<Vec<u8>>,
    rho: CMatrix<T>,
}

impl<T: Real> ReducedDensity<T> {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn trace(&self) -> T {
        self.rho.trace().re
    }

    pub fn hermiticity_residual(&self) -> T {
        self.rho.hermiticity_residual()
    }

    /// Matrix element between two occupation tuples of the kept modes.
    pub fn element(&self, row: &[u8], col: &[u8]) -> Cx<T> {
        let find = |t: &[u8]| self.basis.iter().position(|b| b.as_slice() == t);
        match (find(row), find(col)) {
            (Some(i), Some(j)) => self.rho[(i, j)],
            _ => Cx::zero(),
        }
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.dim();
        if n == 0 {
            return Vec::new();
        }
        if self.rho.as_slice().iter().all(|z| z.im == T::zero()) {
            let flat: Vec<T> = self.rho.as_slice().iter().map(|z| z.re).collect();
            return symmetric_eigen(&flat, n).0;
        }
        hermitian_eigenvalues(&self.rho)
    }

    pub fn purity(&self) -> T {
        self.rho.matmul(&self.rho).trace().re
    }

    /// Partial trace over `drop`, which must be a subset of the kept modes.
    pub fn trace_out(&self, drop: &[Mode]) -> Result<Self> {
        for m in drop {
            if !self.modes.contains(m) {
                return Err(Error::param("drop", format!("mode {m} is not part of this reduced state")));
            }
        }
        let keep_pos: Vec<usize> = (0..self.modes.len()).filter(|&k| !drop.contains(&self.modes[k])).collect();
        let env_pos: Vec<usize> = (0..self.modes.len()).filter(|&k| drop.contains(&self.modes[k])).collect();
        let pick = |t: &[u8], pos: &[usize]| pos.iter().map(|&k| t[k]).collect::<Vec<u8>>();
        let mut kept: Vec<Vec<u8>> = self.basis.iter().map(|t| pick(t, &keep_pos)).collect();
        kept.sort();
        kept.dedup();
        let index: BTreeMap<Vec<u8>, usize> = kept.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let mut rho = CMatrix::zeros(kept.len(), kept.len());
        for (i, ti) in self.basis.iter().enumerate() {
            for (j, tj) in self.basis.iter().enumerate() {
                if pick(ti, &env_pos) != pick(tj, &env_pos) {
                    continue;
                }
                let (a, b) = (index[&pick(ti, &keep_pos)], index[&pick(tj, &keep_pos)]);
                rho[(a, b)] = rho[(a, b)] + self.rho[(i, j)];
            }
        }
        let modes = keep_pos.iter().map(|&k| self.modes[k]).collect();
        Ok(Self { modes, basis: kept, rho })
    }
}

/// Partial trace of `|psi><psi|` over every mode not in `keep`.
///
/// Rows are the occupation tuples of the kept modes that carry nonzero
/// amplitude, in lexicographic order.
pub fn reduce<T: Real>(space: &FockSpace, psi: &StateVector<T>, keep: &[Mode]) -> Result<ReducedDensity<T>> {
    if psi.len() != space.dim() {
        return Err(Error::DimensionMismatch { left: psi.len(), right: space.dim() });
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() {
        return Err(Error::param("keep", "duplicate modes"));
    }
    let env: Vec<Mode> = Mode::ALL.iter().copied().filter(|m| !keep_sorted.contains(m)).collect();
    let kept_of = |i: usize| keep_sorted.iter().map(|m| space.state(i).get(*m) as u8).collect::<Vec<u8>>();
    let env_of = |i: usize| env.iter().map(|m| space.state(i).get(*m) as u8).collect::<Vec<u8>>();

    let mut basis: Vec<Vec<u8>> =
        (0..space.dim()).filter(|&i| !psi.amplitudes()[i].is_zero()).map(kept_of).collect();
    basis.sort();
    basis.dedup();
    let index: BTreeMap<Vec<u8>, usize> = basis.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();

    let mut groups: BTreeMap<Vec<u8>, Vec<(usize, Cx<T>)>> = BTreeMap::new();
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        groups.entry(env_of(i)).or_default().push((index[&kept_of(i)], *a));
    }
    let mut rho = CMatrix::zeros(basis.len(), basis.len());
    for members in groups.values() {
        for &(r, a) in members {
            for &(c, b) in members {
                rho[(r, c)] = rho[(r, c)] + a * b.conj();
            }
        }
    }
    let norm = psi.norm_sqr();
    if norm > T::zero() {
        rho = rho.scale(Cx::new(T::one() / norm, T::zero()));
    }
    Ok(ReducedDensity { modes: keep_sorted, basis, rho })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyBase {
    #[default]
    Bits,
    Nats,
}

/// Von Neumann entropy `-sum lambda log lambda` over eigenvalues above
/// [`EIGEN_CLIP`].
pub fn entanglement_entropy<T: Real>(rho: &ReducedDensity<T>, base: EntropyBase) -> T {
    entropy_of(&rho.eigenvalues(), base)
}

/// Entropy of a probability vector, same clipping as
/// [`entanglement_entropy`].
pub fn entropy_of<T: Real>(eigenvalues: &[T], base: EntropyBase) -> T {
    let clip = T::of(EIGEN_CLIP);
    let s: T = eigenvalues.iter().filter(|&&l| l > clip).map(|&l| -l * l.ln()).sum();
    match base {
        EntropyBase::Bits => s / T::LN_2(),
        EntropyBase::Nats => s,
    }
}

/// Occupation distribution `P(n)` of one mode.
pub fn mode_distribution<T: Real>(space: &FockSpace, psi: &StateVector<T>, mode: Mode) -> Vec<T> {
    let mut p = vec![T::zero(); space.cutoff() + 1];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        let n = space.state(i).get(mode);
        p[n] = p[n] + a.norm_sqr();
    }
    p
}

/// `(|a1, a2> ± |-a1, -a2>)` normalized, in the probe modes with all atoms
/// in the ground state, truncated to the space.
pub fn entangled_coherent_state<T: Real>(
    space: &FockSpace,
    alpha1: Cx<T>,
    alpha2: Cx<T>,
    sign: CatSign,
) -> Result<StateVector<T>> {
    let m = space.cutoff();
    let (c1, c2) = (coherent_amplitudes(alpha1, m), coherent_amplitudes(alpha2, m));
    let neg = |v: &[Cx<T>]| -> Vec<Cx<T>> {
        v.iter().enumerate().map(|(n, a)| if n % 2 == 1 { -*a } else { *a }).collect()
    };
    let (plus, _) = product_state(space, &[(Mode::Probe1, &c1), (Mode::Probe2, &c2)])?;
    let (minus, _) = product_state(space, &[(Mode::Probe1, &neg(&c1)), (Mode::Probe2, &neg(&c2))])?;
    plus.add_scaled(Cx::new(sign.value::<T>(), T::zero()), &minus).normalized("entangled coherent state")
}

/// Closed-form entropy of `|a1, a2> ± |-a1, -a2>` from the 2x2 Gram matrix
/// of `{|a1>, |-a1>}` with overlaps `p = e^{-2|a1|^2}`, `q = e^{-2|a2|^2}`.
///
/// The reduced state has eigenvalues proportional to `(1+p)(1±q)` and
/// `(1-p)(1∓q)`.
pub fn ecs_entropy<T: Real>(alpha1: Cx<T>, alpha2: Cx<T>, sign: CatSign, base: EntropyBase) -> T {
    let two = T::of(2.0);
    let p = (-two * alpha1.norm_sqr()).exp();
    let q = (-two * alpha2.norm_sqr()).exp();
    let s = sign.value::<T>();
    let l1 = (T::one() + p) * (T::one() + s * q);
    let l2 = (T::one() - p) * (T::one() - s * q);
    let z = l1 + l2;
    if z <= T::zero() {
        return T::zero();
    }
    entropy_of(&[l1 / z, l2 / z], base)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementPoint<T> {
    pub phi_e: T,
    pub alpha1: T,
    pub alpha2: T,
    /// Entropy of the numerically reduced ECS.
    pub entropy: T,
    /// Closed-form value from [`ecs_entropy`].
    pub entropy_closed_form: T,
}

/// Entropy of the released ECS with `a1 = a0 cos(phi_e)`, `a2 = a0 sin(phi_e)`
/// over a grid of release angles.
pub fn entanglement_vs_release_angle<T: Real>(
    space: &FockSpace,
    alpha0: T,
    sign: CatSign,
    grid: &[T],
    base: EntropyBase,
) -> Result<Vec<EntanglementPoint<T>>> {
    grid.iter()
        .map(|&phi| {
            if !(phi >= T::zero() && phi <= T::FRAC_PI_2() * (T::one() + T::eps())) {
                return Err(Error::param("phi_e", format!("grid value {phi} outside [0, pi/2]")));
            }
            let (a1, a2) = (alpha0 * phi.cos(), alpha0 * phi.sin());
            let (c1, c2) = (Cx::new(a1, T::zero()), Cx::new(a2, T::zero()));
            let psi = entangled_coherent_state(space, c1, c2, sign)?;
            let rho = reduce(space, &psi, &[Mode::Probe1])?;
            Ok(EntanglementPoint {
                phi_e: phi,
                alpha1: a1,
                alpha2: a2,
                entropy: entanglement_entropy(&rho, base),
                entropy_closed_form: ecs_entropy(c1, c2, sign, base),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_space, coherent_state, number_state, BasisState};

    #[test]
    fn fidelity_examples() {
        let space = build_space(12).unwrap();
        let a = coherent_state::<f64>(&space, Mode::Probe1, Cx::new(1.0, 0.0)).unwrap();
        let b = coherent_state::<f64>(&space, Mode::Probe1, Cx::new(-1.0, 0.0)).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        assert!((fidelity(&a, &b).unwrap() - (-4.0f64).exp()).abs() < 1e-9);
        let n1 = number_state::<f64>(&space, Mode::A, 1).unwrap();
        let n2 = number_state::<f64>(&space, Mode::D, 1).unwrap();
        assert_eq!(fidelity(&n1, &n2).unwrap(), 0.0);
        assert!(fidelity(&a, &StateVector::zeros(3)).is_err());
    }

    #[test]
    fn single_photon_split_reduces_to_half_half() {
        let space = build_space(3).unwrap();
        let h = 0.5f64.sqrt();
        let psi = number_state::<f64>(&space, Mode::Probe1, 1)
            .unwrap()
            .scaled(Cx::new(h, 0.0))
            .add_scaled(Cx::new(h, 0.0), &number_state(&space, Mode::Probe2, 1).unwrap());
        let rho = reduce(&space, &psi, &[Mode::Probe1]).unwrap();
        assert!((rho.element(&[0], &[0]).re - 0.5).abs() < 1e-15);
        assert!((rho.element(&[1], &[1]).re - 0.5).abs() < 1e-15);
        assert!(rho.element(&[0], &[1]).norm() < 1e-15);
        assert!((entanglement_entropy(&rho, EntropyBase::Bits) - 1.0).abs() < 1e-12);
        assert!((entanglement_entropy(&rho, EntropyBase::Nats) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_rank_one_reduction() {
        let space = build_space(8).unwrap();
        let c = coherent_amplitudes::<f64>(Cx::new(0.6, 0.2), 8);
        let d = coherent_amplitudes::<f64>(Cx::new(-0.3, 0.4), 8);
        let (psi, _) = product_state(&space, &[(Mode::Probe1, &c), (Mode::C, &d)]).unwrap();
        let rho = reduce(&space, &psi, &[Mode::Probe1]).unwrap();
        // truncation couples the factors weakly; still numerically pure
        assert!((rho.purity() - 1.0).abs() < 1e-6);
        assert!(entanglement_entropy(&rho, EntropyBase::Bits) < 1e-4);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minus_ecs_at_equal_split_is_one_ebit() {
        let space = build_space(14).unwrap();
        let a = Cx::<f64>::new(0.8, 0.0);
        let psi = entangled_coherent_state(&space, a, a, CatSign::Minus).unwrap();
        let rho = reduce(&space, &psi, &[Mode::Probe1]).unwrap();
        assert!((entanglement_entropy(&rho, EntropyBase::Bits) - 1.0).abs() < 1e-6);
        assert!((ecs_entropy(a, a, CatSign::Minus, EntropyBase::Bits) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mode_distribution_of_basis_state() {
        let space = build_space(4).unwrap();
        let psi = StateVector::<f64>::basis(&space, &BasisState::single(Mode::C, 3)).unwrap();
        let p = mode_distribution(&space, &psi, Mode::C);
        assert_eq!(p, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }
}
