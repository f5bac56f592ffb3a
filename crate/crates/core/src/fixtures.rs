//! Seeded test fixtures: states, elements and stationary maps.
//!
//! Every generator takes the RNG by `&mut` and draws in a documented order, so a
//! fixed seed reproduces the same fixture.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::unitary_exp;
use crate::maps::CpMap;
use crate::space::{BlockStructure, Element, NcSpace};
use crate::C64;

/// How the spectrum of a random density matrix is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateMode {
    /// `ρ = 1/Σd_k`.
    Tracial,
    /// Eigenvalues uniform in `[0.1, 1]` (normalized), random eigenbasis.
    Random,
    /// As `Random`, with the smallest eigenvalue forced to `1e-6`.
    NearDegenerate,
}

pub const NEAR_DEGENERATE_MIN: f64 = 1e-6;

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_c(rng: &mut impl Rng) -> C64 {
    let re = gaussian(rng);
    let im = gaussian(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries, drawn column by column.
pub fn gaussian_matrix(d: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d {
        for row in 0..d {
            m[(row, col)] = gaussian_c(rng);
        }
    }
    m
}

pub fn random_hermitian_matrix(d: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = gaussian_matrix(d, rng);
    (&g + g.adjoint()).scale(0.5)
}

pub fn random_unitary_matrix(d: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    unitary_exp(&random_hermitian_matrix(d, rng).scale(std::f64::consts::PI))
}

pub fn random_element(structure: &BlockStructure, rng: &mut impl Rng) -> Element {
    Element::from_blocks(structure.dims().iter().map(|&d| gaussian_matrix(d, rng)).collect())
}

pub fn random_hermitian(structure: &BlockStructure, rng: &mut impl Rng) -> Element {
    Element::from_blocks(
        structure
            .dims()
            .iter()
            .map(|&d| random_hermitian_matrix(d, rng))
            .collect(),
    )
}

pub fn random_psd(structure: &BlockStructure, rng: &mut impl Rng) -> Element {
    let g = random_element(structure, rng);
    &g * &g.adjoint()
}

/// Draws a faithful state. Order: all eigenvalues (block by block), then one random
/// unitary per block of size > 1.
pub fn random_state(structure: &BlockStructure, mode: StateMode, rng: &mut impl Rng) -> Result<NcSpace> {
    if mode == StateMode::Tracial {
        return NcSpace::tracial(structure.clone());
    }
    let total = structure.hilbert_dim();
    let mut eig: Vec<f64> = (0..total).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = eig.iter().sum();
    eig.iter_mut().for_each(|v| *v /= sum);
    if mode == StateMode::NearDegenerate {
        let rest: f64 = eig[1..].iter().sum();
        let scale = (1.0 - NEAR_DEGENERATE_MIN) / rest;
        eig[1..].iter_mut().for_each(|v| *v *= scale);
        eig[0] = NEAR_DEGENERATE_MIN;
    }
    let mut blocks = Vec::with_capacity(structure.num_blocks());
    let mut at = 0;
    for &d in structure.dims() {
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            eig[at..at + d].iter().map(|&v| C64::new(v, 0.0)),
        ));
        at += d;
        blocks.push(if d > 1 {
            let u = random_unitary_matrix(d, rng);
            &u * diag * u.adjoint()
        } else {
            diag
        });
    }
    NcSpace::new(structure.clone(), Element::from_blocks(blocks))
}

/// Groups the eigenvalue indices of one block into clusters of (numerically) equal
/// eigenvalues.
fn eigen_clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match clusters
            .iter_mut()
            .find(|c| (values[c[0]] - v).abs() <= 1e-12 * v.abs().max(1e-300))
        {
            Some(c) => c.push(k),
            None => clusters.push(vec![k]),
        }
    }
    clusters
}

/// A unitary commuting with `ρ`: `exp(iH)` with `H` Hermitian and supported inside the
/// eigenspaces of `ρ`. Draws one Hermitian matrix per eigenvalue cluster.
pub fn random_stationary_unitary(space: &NcSpace, rng: &mut impl Rng) -> Element {
    let spectrum = space.spectrum();
    let mut blocks = Vec::with_capacity(spectrum.len());
    for (k, values) in spectrum.iter().enumerate() {
        let d = values.len();
        let v = space.eigenvectors(k);
        let mut h = DMatrix::<C64>::zeros(d, d);
        for cluster in eigen_clusters(values) {
            let hc = random_hermitian_matrix(cluster.len(), rng).scale(std::f64::consts::PI);
            for (a, &i) in cluster.iter().enumerate() {
                for (b, &j) in cluster.iter().enumerate() {
                    h[(i, j)] = hc[(a, b)];
                }
            }
        }
        blocks.push(v * unitary_exp(&h) * v.adjoint());
    }
    Element::from_blocks(blocks)
}

/// Conjugation by [`random_stationary_unitary`].
pub fn random_stationary_automorphism(space: &NcSpace, rng: &mut impl Rng) -> Result<CpMap> {
    let u = random_stationary_unitary(space, rng);
    CpMap::conjugation(space, &u)
}

/// Pinching `x ↦ Σ_a P_a x P_a` onto the rank-one eigenprojections of `ρ`.
pub fn eigen_pinching(space: &NcSpace) -> Result<CpMap> {
    let s = space.structure();
    let mut kraus = Vec::new();
    for (k, &d) in s.dims().iter().enumerate() {
        let v = space.eigenvectors(k);
        for a in 0..d {
            let col = v.column(a);
            let p = col * col.adjoint();
            let mut blocks: Vec<DMatrix<C64>> = s.dims().iter().map(|&e| DMatrix::zeros(e, e)).collect();
            blocks[k] = p;
            kraus.push(Element::from_blocks(blocks));
        }
    }
    // Blocks other than k are killed by each Kraus operator, so the sum covers all blocks.
    CpMap::kraus(space, space, &kraus)
}

/// A random stationary Markov operator: a convex combination of `terms` stationary
/// automorphisms and the eigen-pinching. Draw order: automorphisms, then weights.
pub fn random_stationary_map(space: &NcSpace, terms: usize, rng: &mut impl Rng) -> Result<CpMap> {
    let mut maps = Vec::with_capacity(terms + 1);
    for _ in 0..terms {
        maps.push(random_stationary_automorphism(space, rng)?);
    }
    maps.push(eigen_pinching(space)?);
    let mut w: Vec<f64> = (0..maps.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    CpMap::convex_combination(&w, &maps)
}

/// `(σx)_k = x_{perm[k]}` on a commutative space.
pub fn permutation_automorphism(space: &NcSpace, perm: &[usize]) -> Result<CpMap> {
    let n = space.structure().num_blocks();
    if space.structure().dims().iter().any(|&d| d != 1) {
        return Err(Error::Precondition(
            "permutation action needs a commutative space".into(),
        ));
    }
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Precondition(format!("{perm:?} is not a permutation of 0..{n}")));
    }
    let mut m = DMatrix::zeros(n, n);
    for (k, &p) in perm.iter().enumerate() {
        m[(k, p)] = C64::new(1.0, 0.0);
    }
    CpMap::from_matrix(space.clone(), space.clone(), m)
}

/// A unital CP map on a single `M_2` that preserves the state but not the modular group:
/// `Q(x) = Σ_k tr(τ_k x) |f_k⟩⟨f_k|`, with `f` the standard basis rotated by `theta`,
/// `q_k = ⟨f_k|ρ|f_k⟩`, `τ_1 = ρ + q_2 D`, `τ_2 = ρ − q_1 D` and `D = eps·σ_x`.
pub fn measure_prepare_map(space: &NcSpace, theta: f64, eps: f64) -> Result<CpMap> {
    if space.structure().dims() != [2] {
        return Err(Error::Precondition(
            "measure-prepare fixture needs a single M_2 block".into(),
        ));
    }
    let rho = space.rho().blocks()[0].clone();
    let (c, s) = (theta.cos(), theta.sin());
    let f = [
        DVector::from_vec(vec![C64::new(c, 0.0), C64::new(s, 0.0)]),
        DVector::from_vec(vec![C64::new(-s, 0.0), C64::new(c, 0.0)]),
    ];
    let q: Vec<f64> = f.iter().map(|v| (v.adjoint() * &rho * v)[(0, 0)].re).collect();
    let dm = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(eps, 0.0),
            C64::new(eps, 0.0),
            C64::new(0.0, 0.0),
        ],
    );
    let tau = [&rho + dm.scale(q[1]), &rho - dm.scale(q[0])];
    let proj: Vec<DMatrix<C64>> = f.iter().map(|v| v * v.adjoint()).collect();
    CpMap::from_fn(space.clone(), space.clone(), |x| {
        let xb = &x.blocks()[0];
        let mut out = DMatrix::zeros(2, 2);
        for k in 0..2 {
            out += &proj[k] * (&tau[k] * xb).trace();
        }
        Element::single(out)
    })
}

/// `x ↦ xᵀ`, block by block.
pub fn transpose_map(space: &NcSpace) -> Result<CpMap> {
    CpMap::from_fn(space.clone(), space.clone(), |x| {
        Element::from_blocks(x.blocks().iter().map(|b| b.transpose()).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn states_have_requested_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = BlockStructure::new(vec![2, 3, 1]).unwrap();
        for mode in [StateMode::Tracial, StateMode::Random, StateMode::NearDegenerate] {
            let space = random_state(&s, mode, &mut rng).unwrap();
            assert_eq!(space.is_tracial(1e-12), mode == StateMode::Tracial);
            if mode == StateMode::NearDegenerate {
                assert!((space.min_eigenvalue() - NEAR_DEGENERATE_MIN).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_fixtures_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        for mode in [StateMode::Tracial, StateMode::Random, StateMode::NearDegenerate] {
            let space = random_state(&s, mode, &mut rng).unwrap();
            let q = random_stationary_map(&space, 2, &mut rng).unwrap().verified();
            let f = q.flags();
            assert!(f.unital.holds() && f.cp.holds() && f.preserves_state.holds() && f.commutes_with_modular.holds());
            let a = random_stationary_automorphism(&space, &mut rng).unwrap();
            assert!(a.multiplicativity_residual() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_fixture() {
        let s = BlockStructure::full(2).unwrap();
        let a = random_state(&s, StateMode::Random, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_state(&s, StateMode::Random, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.rho(), b.rho());
    }

    #[test]
    fn measure_prepare_breaks_only_modular_commutation() {
        let space = NcSpace::diagonal(&[0.5, 0.5]).unwrap();
        assert!(measure_prepare_map(&space, 0.3, 0.1).is_err());
        let space = NcSpace::from_density(DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.75, 0.0),
            C64::new(0.25, 0.0),
        ])))
        .unwrap();
        let q = measure_prepare_map(&space, 0.4, 0.05).unwrap().verified();
        let f = q.flags();
        assert!(f.unital.holds() && f.cp.holds() && f.preserves_state.holds());
        assert_eq!(f.commutes_with_modular, crate::Check::Fails);
    }

    #[test]
    fn permutation_validation() {
        let space = NcSpace::diagonal(&[0.25; 4]).unwrap();
        assert!(permutation_automorphism(&space, &[1, 2, 3, 0]).is_ok());
        assert!(permutation_automorphism(&space, &[1, 1, 3, 0]).is_err());
        assert!(permutation_automorphism(&space, &[1, 2, 3]).is_err());
    }
}
