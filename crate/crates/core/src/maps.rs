//! Linear maps between finite noncommutative probability spaces.
//!
//! A [`CpMap`] stores the dense matrix of the map in the global vectorization
//! convention together with tri-state flags recording which properties have been
//! verified. Adjoints are obtained by solving the linear system expressing their
//! defining pairing on a full matrix-unit basis, so the same code covers tracial and
//! non-tracial states.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::linalg::{max_abs, min_hermitian_eigenvalue, relative_difference};
use crate::space::{BlockStructure, Element, LpIndex, NcSpace};
use crate::C64;

/// Tolerance for unitality, state preservation and modular commutation.
pub const MAP_TOL: f64 = 1e-10;
/// Choi eigenvalues above `-CP_TOL` count as nonnegative.
pub const CP_TOL: f64 = 1e-10;
/// Pairing tolerance for the state adjoint.
pub const PAIRING_TOL: f64 = 1e-11;
/// Pairing tolerance for the KMS adjoint.
pub const KMS_PAIRING_TOL: f64 = 1e-10;

/// Result of a property check: not yet run, verified to hold, or verified to fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    #[default]
    Unchecked,
    Holds,
    Fails,
}

impl Check {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Check::Holds
        } else {
            Check::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Check::Holds
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapFlags {
    pub unital: Check,
    pub cp: Check,
    pub preserves_state: Check,
    pub commutes_with_modular: Check,
}

/// Outcome of the Choi test with the smallest Choi eigenvalue as witness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpWitness {
    pub is_cp: bool,
    pub min_eigenvalue: f64,
}

/// The two halves of stationarity, reported separately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityReport {
    /// `max |ψ(Q(e)) − φ(e)|` over matrix units.
    pub state_residual: f64,
    /// Scaled max-entry residual of `Q∘δ_φ − δ_ψ∘Q`, with `δ` the log-density commutator.
    pub modular_residual: f64,
    pub preserves_state: bool,
    pub commutes_with_modular: bool,
}

impl StationarityReport {
    pub fn is_stationary(&self) -> bool {
        self.preserves_state && self.commutes_with_modular
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpContractionReport {
    pub p: LpIndex,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// A linear map `Q : (A, φ) → (B, ψ)`.
#[derive(Clone, Debug)]
pub struct CpMap {
    source: NcSpace,
    target: NcSpace,
    matrix: DMatrix<C64>,
    flags: MapFlags,
}

/// Matrix of `x ↦ f(x)` in the vectorization convention, built column by column from
/// the images of the matrix units.
pub fn superoperator(
    source: &BlockStructure,
    target: &BlockStructure,
    f: impl Fn(&Element) -> Element,
) -> Result<DMatrix<C64>> {
    let units = source.matrix_units();
    let mut m = DMatrix::zeros(target.vec_dim(), source.vec_dim());
    for (col, u) in units.into_iter().enumerate() {
        let y = f(&Element::matrix_unit(source, u));
        y.check_conforms(target)?;
        m.set_column(col, &y.to_vector());
    }
    Ok(m)
}

/// Matrix of `x ↦ a·x·b` for block-diagonal `a`, `b`: block-diagonal with blocks `bᵀ ⊗ a`.
pub fn sandwich_superoperator(structure: &BlockStructure, a: &Element, b: &Element) -> DMatrix<C64> {
    let n = structure.vec_dim();
    let mut m = DMatrix::zeros(n, n);
    for ((off, ab), bb) in structure.offsets().into_iter().zip(a.blocks()).zip(b.blocks()) {
        let k = bb.transpose().kronecker(ab);
        m.view_mut((off, off), (k.nrows(), k.ncols())).copy_from(&k);
    }
    m
}

/// Matrix of the log-density commutator `x ↦ log ρ · x − x · log ρ`.
pub fn modular_generator_matrix(space: &NcSpace) -> DMatrix<C64> {
    let s = space.structure();
    let one = space.identity();
    let l = space.log_rho();
    sandwich_superoperator(s, l, &one) - sandwich_superoperator(s, &one, l)
}

/// Bilinear Gram matrix `G[a][b] = φ(e_a e_b)` over matrix units.
///
/// `e^k_{ij} e^k_{ml} = δ_{jm} e^k_{il}`, so the only nonzero entries are
/// `G[(k,i,j)][(k,j,l)] = ρ^k_{li}`.
pub fn bilinear_gram(space: &NcSpace) -> DMatrix<C64> {
    let s = space.structure();
    let n = s.vec_dim();
    let mut g = DMatrix::zeros(n, n);
    for ((&d, off), rho) in s.dims().iter().zip(s.offsets()).zip(space.rho().blocks()) {
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    g[(off + j * d + i, off + l * d + j)] = rho[(l, i)];
                }
            }
        }
    }
    g
}

/// Row vector of the state: `f[u] = φ(e_u)`, so `φ(x) = fᵀ vec(x)`.
pub fn state_functional(space: &NcSpace) -> DVector<C64> {
    // φ(e_{ij}) = ρ_{ji}, i.e. the vectorization of ρᵀ.
    let t = Element::from_blocks(space.rho().blocks().iter().map(|b| b.transpose()).collect());
    t.to_vector()
}

impl CpMap {
    pub fn from_matrix(source: NcSpace, target: NcSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let shape = (target.vec_dim(), source.vec_dim());
        if matrix.shape() != shape {
            return Err(shape_mismatch(format!("{shape:?}"), format!("{:?}", matrix.shape())));
        }
        Ok(CpMap {
            source,
            target,
            matrix,
            flags: MapFlags::default(),
        })
    }

    pub fn from_fn(source: NcSpace, target: NcSpace, f: impl Fn(&Element) -> Element) -> Result<Self> {
        let m = superoperator(source.structure(), target.structure(), f)?;
        Self::from_matrix(source, target, m)
    }

    pub fn identity(space: &NcSpace) -> Self {
        let n = space.vec_dim();
        CpMap {
            source: space.clone(),
            target: space.clone(),
            matrix: DMatrix::identity(n, n),
            flags: MapFlags {
                unital: Check::Holds,
                cp: Check::Holds,
                preserves_state: Check::Holds,
                commutes_with_modular: Check::Holds,
            },
        }
    }

    /// `x ↦ u x u*` on a single space.
    pub fn conjugation(space: &NcSpace, u: &Element) -> Result<Self> {
        space.check(u)?;
        let m = sandwich_superoperator(space.structure(), u, &u.adjoint());
        Self::from_matrix(space.clone(), space.clone(), m)
    }

    /// `x ↦ Σ_k K_k x K_k*` with Kraus operators in the source algebra.
    pub fn kraus(source: &NcSpace, target: &NcSpace, ops: &[Element]) -> Result<Self> {
        if source.structure() != target.structure() {
            return Err(shape_mismatch(source.structure(), target.structure()));
        }
        let n = source.vec_dim();
        let mut m = DMatrix::zeros(n, n);
        for k in ops {
            source.check(k)?;
            m += sandwich_superoperator(source.structure(), k, &k.adjoint());
        }
        Self::from_matrix(source.clone(), target.clone(), m)
    }

    /// `Σ_k w_k Q_k` for maps sharing source and target.
    pub fn convex_combination(weights: &[f64], maps: &[CpMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Precondition("convex combination of no maps".into()))?;
        if weights.len() != maps.len() {
            return Err(shape_mismatch(maps.len(), weights.len()));
        }
        let mut m = DMatrix::zeros(first.matrix.nrows(), first.matrix.ncols());
        for (w, q) in weights.iter().zip(maps) {
            if !q.source.same_as(&first.source) || !q.target.same_as(&first.target) {
                return Err(shape_mismatch(first.source.structure(), q.source.structure()));
            }
            m += q.matrix.scale(*w);
        }
        Self::from_matrix(first.source.clone(), first.target.clone(), m)
    }

    pub fn source(&self) -> &NcSpace {
        &self.source
    }

    pub fn target(&self) -> &NcSpace {
        &self.target
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn flags(&self) -> MapFlags {
        self.flags
    }

    pub fn apply(&self, x: &Element) -> Result<Element> {
        self.source.check(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &Element) -> Element {
        let v = &self.matrix * x.to_vector();
        Element::from_vector(self.target.structure(), &v).expect("map matrix has target shape")
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &CpMap) -> Result<CpMap> {
        if !other.target.same_as(&self.source) {
            return Err(shape_mismatch(self.source.structure(), other.target.structure()));
        }
        Self::from_matrix(other.source.clone(), self.target.clone(), &self.matrix * &other.matrix)
    }

    /// Inverse of an invertible map, with source and target swapped.
    pub fn inverse(&self) -> Result<CpMap> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("map matrix is not invertible".into()))?;
        Self::from_matrix(self.target.clone(), self.source.clone(), inv)
    }

    /// Relative Frobenius distance between the map matrices.
    pub fn distance(&self, other: &CpMap) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        relative_difference(&self.matrix, &other.matrix)
    }

    pub fn unital_residual(&self) -> f64 {
        let one = self.apply_unchecked(&self.source.identity());
        (&one - &self.target.identity())
            .blocks()
            .iter()
            .map(max_abs)
            .fold(0.0, f64::max)
    }

    pub fn is_unital(&self) -> bool {
        self.unital_residual() < MAP_TOL
    }

    /// `max ‖Q(e_a e_b) − Q(e_a) Q(e_b)‖_max` over pairs of matrix units.
    pub fn multiplicativity_residual(&self) -> f64 {
        let s = self.source.structure();
        let units = s.matrix_units();
        let images: Vec<Element> = units
            .iter()
            .map(|&u| self.apply_unchecked(&Element::matrix_unit(s, u)))
            .collect();
        let mut worst: f64 = 0.0;
        for (a, ua) in units.iter().enumerate() {
            for (b, ub) in units.iter().enumerate() {
                let prod = &images[a] * &images[b];
                let lhs = if ua.block == ub.block && ua.col == ub.row {
                    let idx = s.unit_index(crate::space::MatrixUnit {
                        block: ua.block,
                        row: ua.row,
                        col: ub.col,
                    });
                    images[idx].clone()
                } else {
                    self.target.zero()
                };
                let r = (&lhs - &prod).blocks().iter().map(max_abs).fold(0.0, f64::max);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Choi test, block pair by block pair.
    ///
    /// For source block `k` (size `d`) and target block `l` (size `e`) the Choi matrix is
    /// `C[(i e + r), (j e + s)] = Q(e^k_{ij})_l[r, s] / d`.
    pub fn is_completely_positive(&self) -> CpWitness {
        let s = self.source.structure();
        let t = self.target.structure();
        let mut min_ev = f64::INFINITY;
        for (k, &d) in s.dims().iter().enumerate() {
            let images: Vec<Vec<Element>> = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let u = crate::space::MatrixUnit {
                                block: k,
                                row: i,
                                col: j,
                            };
                            self.apply_unchecked(&Element::matrix_unit(s, u))
                        })
                        .collect()
                })
                .collect();
            for (l, &e) in t.dims().iter().enumerate() {
                let mut choi = DMatrix::<C64>::zeros(d * e, d * e);
                for i in 0..d {
                    for j in 0..d {
                        let blk = &images[i][j].blocks()[l];
                        for r in 0..e {
                            for c in 0..e {
                                choi[(i * e + r, j * e + c)] = blk[(r, c)] / d as f64;
                            }
                        }
                    }
                }
                min_ev = min_ev.min(min_hermitian_eigenvalue(&choi));
            }
        }
        CpWitness {
            is_cp: min_ev > -CP_TOL,
            min_eigenvalue: min_ev,
        }
    }

    pub fn state_residual(&self) -> f64 {
        let f_src = state_functional(&self.source);
        let f_tgt = state_functional(&self.target);
        let pulled = self.matrix.transpose() * f_tgt;
        (pulled - f_src).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn modular_residual(&self) -> f64 {
        let ds = modular_generator_matrix(&self.source);
        let dt = modular_generator_matrix(&self.target);
        let scale = 1f64.max(max_abs(&ds)).max(max_abs(&dt));
        max_abs(&(&self.matrix * &ds - &dt * &self.matrix)) / scale
    }

    pub fn check_stationary(&self) -> StationarityReport {
        let state_residual = self.state_residual();
        let modular_residual = self.modular_residual();
        StationarityReport {
            state_residual,
            modular_residual,
            preserves_state: state_residual < MAP_TOL,
            commutes_with_modular: modular_residual < MAP_TOL,
        }
    }

    /// A copy with every flag computed.
    pub fn verified(&self) -> CpMap {
        let st = self.check_stationary();
        CpMap {
            flags: MapFlags {
                unital: Check::from_bool(self.is_unital()),
                cp: Check::from_bool(self.is_completely_positive().is_cp),
                preserves_state: Check::from_bool(st.preserves_state),
                commutes_with_modular: Check::from_bool(st.commutes_with_modular),
            },
            ..self.clone()
        }
    }

    /// The map `R : B → A` with `φ(R(b) a) = ψ(b Q(a))`; requires stationarity.
    pub fn adjoint_wrt_states(&self) -> Result<CpMap> {
        let st = self.check_stationary();
        if !st.is_stationary() {
            return Err(Error::NotStationary {
                state_residual: st.state_residual,
                modular_residual: st.modular_residual,
            });
        }
        let g_src = bilinear_gram(&self.source);
        let g_tgt = bilinear_gram(&self.target);
        // Rᵀ G_src = G_tgt Q  ⇔  G_srcᵀ R = Qᵀ G_tgtᵀ.
        let rhs = self.matrix.transpose() * g_tgt.transpose();
        let r = g_src
            .transpose()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("state Gram matrix".into()))?;
        let adj = CpMap::from_matrix(self.target.clone(), self.source.clone(), r)?;
        let res = state_pairing_residual(self, &adj);
        if res > PAIRING_TOL {
            return Err(Error::PairingResidual(res));
        }
        Ok(adj.verified())
    }

    /// The map `R : B → A` with `φ(R(b) σ_{−i/2}(a)) = ψ(σ_{i/2}(b) Q(a))`; requires only
    /// unitality and `ψ∘Q = φ`.
    pub fn kms_adjoint(&self) -> Result<CpMap> {
        let sr = self.state_residual();
        if sr >= MAP_TOL {
            return Err(Error::NotStatePreserving(sr));
        }
        if !self.is_unital() {
            return Err(Error::Precondition("map is not unital".into()));
        }
        let (lhs, rhs) = kms_system(self);
        let r = lhs
            .transpose()
            .lu()
            .solve(&(self.matrix.transpose() * rhs))
            .ok_or_else(|| Error::Singular("KMS Gram matrix".into()))?;
        let adj = CpMap::from_matrix(self.target.clone(), self.source.clone(), r)?;
        let res = kms_pairing_residual(self, &adj);
        if res > KMS_PAIRING_TOL {
            return Err(Error::PairingResidual(res));
        }
        Ok(adj.verified())
    }

    /// Density `D` of the functional `ψ∘Q` on the source: `ψ(Q(x)) = tr(D x)`.
    pub fn pulled_back_density(&self) -> Element {
        let row = self.matrix.transpose() * state_functional(&self.target);
        let e = Element::from_vector(self.source.structure(), &row).expect("source shape");
        Element::from_blocks(e.blocks().iter().map(|b| b.transpose()).collect())
    }

    /// Ratios `‖Q(a)‖_p / ‖a‖_p` over samples, for a CP map with `Q(1) ≤ 1` and `ψ∘Q ≤ φ`.
    pub fn lp_extension_norm_check(&self, p: LpIndex, samples: &[Element]) -> Result<LpContractionReport> {
        let w = self.is_completely_positive();
        if !w.is_cp {
            return Err(Error::Precondition(format!(
                "map is not completely positive (Choi eigenvalue {:e})",
                w.min_eigenvalue
            )));
        }
        let slack = &self.target.identity() - &self.apply_unchecked(&self.source.identity());
        let m = slack.min_eigenvalue();
        if m < -MAP_TOL {
            return Err(Error::Precondition(format!("Q(1) ≤ 1 fails (eigenvalue {m:e})")));
        }
        let gap = self.source.rho() - &self.pulled_back_density();
        let m = gap.min_eigenvalue();
        if m < -MAP_TOL {
            return Err(Error::Precondition(format!("ψ∘Q ≤ φ fails (eigenvalue {m:e})")));
        }
        let mut ratios = Vec::with_capacity(samples.len());
        for a in samples {
            let before = self.source.lp_norm(p, a)?;
            let after = self.target.lp_norm(p, &self.apply_unchecked(a))?;
            ratios.push(if before == 0.0 { 0.0 } else { after / before });
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        Ok(LpContractionReport {
            p,
            ratios,
            max_ratio,
            pass: max_ratio <= 1.0 + 1e-10,
        })
    }
}

/// `(G_src S, G_tgtᵀ T)` where `S`, `T` are the matrices of `σ_{−i/2}` on the source and
/// `σ_{i/2}` on the target; the KMS adjoint solves `(G_src S)ᵀ R = Qᵀ G_tgtᵀ T`.
fn kms_system(q: &CpMap) -> (DMatrix<C64>, DMatrix<C64>) {
    let (src, tgt) = (q.source(), q.target());
    let s = sandwich_superoperator(src.structure(), &src.rho_power(0.5), &src.rho_power(-0.5));
    let t = sandwich_superoperator(tgt.structure(), &tgt.rho_power(-0.5), &tgt.rho_power(0.5));
    (bilinear_gram(src) * s, bilinear_gram(tgt).transpose() * t)
}

/// `max |φ(R(e_b) e_a) − ψ(e_b Q(e_a))|` over matrix units, scaled by the size of the
/// right-hand side.
pub fn state_pairing_residual(q: &CpMap, r: &CpMap) -> f64 {
    let lhs = r.matrix().transpose() * bilinear_gram(q.source());
    let rhs = bilinear_gram(q.target()) * q.matrix();
    max_abs(&(lhs - &rhs)) / 1f64.max(max_abs(&rhs))
}

/// Residual of the KMS pairing over matrix units, scaled as [`state_pairing_residual`].
pub fn kms_pairing_residual(q: &CpMap, r: &CpMap) -> f64 {
    let (lhs_g, rhs_t) = kms_system(q);
    let lhs = r.matrix().transpose() * lhs_g;
    let rhs = rhs_t.transpose() * q.matrix();
    max_abs(&(lhs - &rhs)) / 1f64.max(max_abs(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MatrixUnit;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn m2(rho: [f64; 2]) -> NcSpace {
        NcSpace::from_density(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(rho[0], 0.0),
            c(rho[1], 0.0),
        ])))
        .unwrap()
    }

    fn transpose_map(space: &NcSpace) -> CpMap {
        CpMap::from_fn(space.clone(), space.clone(), |x| {
            Element::from_blocks(x.blocks().iter().map(|b| b.transpose()).collect())
        })
        .unwrap()
    }

    fn hadamard() -> Element {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Element::single(DMatrix::from_row_slice(
            2,
            2,
            &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)],
        ))
    }

    #[test]
    fn identity_map_applies_as_identity() {
        let space = m2([0.7, 0.3]);
        let x = Element::single(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(4.0, 0.5)],
        ));
        assert_eq!(CpMap::identity(&space).apply(&x).unwrap(), x);
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let space = m2([0.5, 0.5]);
        let q = CpMap::conjugation(&space, &hadamard()).unwrap();
        let h = Element::single(DMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(-1.0, 0.0)],
        ));
        let y = q.apply(&h).unwrap();
        let mut a: Vec<f64> = h.blocks()[0]
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        let mut b: Vec<f64> = y.blocks()[0]
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn kraus_matches_direct_evaluation() {
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        let space = NcSpace::tracial(s.clone()).unwrap();
        let k1 = Element::from_blocks(vec![
            DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.2), c(0.0, 0.3), c(0.4, 0.0)]),
            DMatrix::from_element(1, 1, c(0.6, 0.0)),
        ]);
        let k2 = Element::from_blocks(vec![
            DMatrix::from_row_slice(2, 2, &[c(0.0, 0.1), c(0.7, 0.0), c(0.2, 0.0), c(0.0, -0.3)]),
            DMatrix::from_element(1, 1, c(0.0, 0.8)),
        ]);
        let q = CpMap::kraus(&space, &space, &[k1.clone(), k2.clone()]).unwrap();
        let x = Element::from_blocks(vec![
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 1.0), c(-1.0, 0.0), c(0.5, 0.5)]),
            DMatrix::from_element(1, 1, c(3.0, -1.0)),
        ]);
        // Direct blockwise K x K*.
        let mut direct = space.zero();
        for k in [&k1, &k2] {
            let blocks: Vec<DMatrix<C64>> = k
                .blocks()
                .iter()
                .zip(x.blocks())
                .map(|(kb, xb)| kb * xb * kb.adjoint())
                .collect();
            direct = &direct + &Element::from_blocks(blocks);
        }
        assert!(q.apply(&x).unwrap().distance(&direct) < 1e-14);
        assert!(q.is_completely_positive().is_cp);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let space = m2([0.5, 0.5]);
        let t = transpose_map(&space);
        let w = t.is_completely_positive();
        assert!(!w.is_cp);
        // Independent computation: the Choi matrix of the transpose map on M_2 is SWAP/2.
        let mut swap = DMatrix::<C64>::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                swap[(i * 2 + j, j * 2 + i)] = c(0.5, 0.0);
            }
        }
        let oracle = min_hermitian_eigenvalue(&swap);
        assert!((w.min_eigenvalue - oracle).abs() < 1e-14);
        assert!((oracle + 0.5).abs() < 1e-14);
    }

    #[test]
    fn convex_combination_of_conjugations_is_cp() {
        let space = m2([0.5, 0.5]);
        let z = Element::single(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(1.0, 0.0),
            c(-1.0, 0.0),
        ])));
        let a = CpMap::conjugation(&space, &hadamard()).unwrap();
        let b = CpMap::conjugation(&space, &z).unwrap();
        let q = CpMap::convex_combination(&[0.3, 0.7], &[a, b]).unwrap();
        assert!(q.is_completely_positive().is_cp);
        assert!(q.is_unital());
    }

    #[test]
    fn stationarity_of_conjugations() {
        let space = m2([2.0 / 3.0, 1.0 / 3.0]);
        let phase = Element::single(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.0, 1.0),
            c(1.0, 0.0),
        ])));
        let st = CpMap::conjugation(&space, &phase).unwrap().check_stationary();
        assert!(st.is_stationary());
        let st = CpMap::conjugation(&space, &hadamard()).unwrap().check_stationary();
        assert!(!st.preserves_state || !st.commutes_with_modular);
        // The Hadamard swaps the two eigenvalues: φ(H e11 H) = 1/2 ≠ 2/3.
        assert!((st.state_residual - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tracial_state_preserving_maps_are_stationary() {
        let space = m2([0.5, 0.5]);
        let q = CpMap::conjugation(&space, &hadamard()).unwrap();
        assert!(q.check_stationary().is_stationary());
    }

    #[test]
    fn adjoint_of_automorphism_is_inverse() {
        let space = m2([0.8, 0.2]);
        let u = Element::single(DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, 0.4),
            C64::from_polar(1.0, -1.1),
        ])));
        let q = CpMap::conjugation(&space, &u).unwrap();
        let adj = q.adjoint_wrt_states().unwrap();
        let inv = CpMap::conjugation(&space, &u.adjoint()).unwrap();
        assert!(adj.distance(&inv) < 1e-12);
        let id = CpMap::identity(&space);
        assert!(id.adjoint_wrt_states().unwrap().distance(&id) < 1e-13);
    }

    #[test]
    fn adjoint_rejects_non_stationary() {
        let space = m2([2.0 / 3.0, 1.0 / 3.0]);
        let q = CpMap::conjugation(&space, &hadamard()).unwrap();
        assert!(matches!(q.adjoint_wrt_states(), Err(Error::NotStationary { .. })));
        assert!(matches!(q.kms_adjoint(), Err(Error::NotStatePreserving(_))));
    }

    #[test]
    fn tracial_adjoint_matches_entrywise_transpose() {
        // On a tracial M_3, φ(R(b) a) = φ(b Q(a)) with φ = tr/3 gives
        // R(e_{kl})_{ji} = Q(e_{ij})_{lk}.
        let space = NcSpace::tracial(BlockStructure::full(3).unwrap()).unwrap();
        let s = space.structure().clone();
        let perm = Element::single(DMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        ));
        let diag = Element::single(DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, 0.3),
            C64::from_polar(1.0, 1.3),
            C64::from_polar(1.0, -0.6),
        ])));
        let q = CpMap::convex_combination(
            &[0.25, 0.75],
            &[
                CpMap::conjugation(&space, &perm).unwrap(),
                CpMap::conjugation(&space, &diag).unwrap(),
            ],
        )
        .unwrap();
        let r = q.adjoint_wrt_states().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let qa = q
                    .apply(&Element::matrix_unit(
                        &s,
                        MatrixUnit {
                            block: 0,
                            row: i,
                            col: j,
                        },
                    ))
                    .unwrap();
                for k in 0..3 {
                    for l in 0..3 {
                        let rb = r
                            .apply(&Element::matrix_unit(
                                &s,
                                MatrixUnit {
                                    block: 0,
                                    row: k,
                                    col: l,
                                },
                            ))
                            .unwrap();
                        assert!((rb.blocks()[0][(j, i)] - qa.blocks()[0][(l, k)]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn kms_adjoint_closed_form_and_pairing() {
        // A state-preserving map that does not commute with the modular group.
        let space = m2([0.7, 0.3]);
        let q = crate::fixtures::measure_prepare_map(&space, 0.4, 0.05).unwrap();
        let st = q.check_stationary();
        assert!(st.preserves_state && !st.commutes_with_modular);
        let r = q.kms_adjoint().unwrap();
        assert!(r.flags().unital.holds() && r.flags().cp.holds());
        // Brute-force pairing over all matrix-unit pairs.
        let s = space.structure();
        let mut worst: f64 = 0.0;
        for ua in s.matrix_units() {
            let a = Element::matrix_unit(s, ua);
            for ub in s.matrix_units() {
                let b = Element::matrix_unit(s, ub);
                let lhs = space
                    .state_eval(&(&r.apply(&b).unwrap() * &space.modular_action_imaginary(-0.5, &a).unwrap()))
                    .unwrap();
                let rhs = space
                    .state_eval(&(&space.modular_action_imaginary(0.5, &b).unwrap() * &q.apply(&a).unwrap()))
                    .unwrap();
                worst = worst.max((lhs - rhs).norm());
            }
        }
        assert!(worst < 1e-12, "{worst}");
        // Closed form ρ^{-1/2} Q'(ρ^{1/2} b ρ^{1/2}) ρ^{-1/2}, Q' the trace dual.
        let dual = CpMap::from_matrix(space.clone(), space.clone(), transpose_dual(&q)).unwrap();
        let h = space.rho_power(0.5);
        let hi = space.rho_power(-0.5);
        for ub in s.matrix_units() {
            let b = Element::matrix_unit(s, ub);
            let closed = &(&hi * &dual.apply(&(&(&h * &b) * &h)).unwrap()) * &hi;
            assert!(closed.distance(&r.apply(&b).unwrap()) < 1e-12);
        }
    }

    /// Matrix of the map `Q'` with `tr(Q'(b) a) = tr(b Q(a))`.
    fn transpose_dual(q: &CpMap) -> DMatrix<C64> {
        let s = q.source().structure();
        let units = s.matrix_units();
        let n = units.len();
        let mut m = DMatrix::zeros(n, n);
        // tr(e_{kl} Q(e_{ij})) = Q(e_{ij})_{lk}; Q'(e_{kl}) has (j,i) entry equal to that.
        for (col, ub) in units.iter().enumerate() {
            for ua in &units {
                let qa = q.apply(&Element::matrix_unit(s, *ua)).unwrap();
                let v = qa.blocks()[ub.block][(ub.col, ub.row)];
                let row = s.unit_index(MatrixUnit {
                    block: ua.block,
                    row: ua.col,
                    col: ua.row,
                });
                m[(row, col)] += v;
            }
        }
        m
    }

    #[test]
    fn kms_adjoint_agrees_with_state_adjoint_when_stationary() {
        let space = m2([0.9, 0.1]);
        let u = Element::single(DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, 0.2),
            C64::from_polar(1.0, 2.0),
        ])));
        let q = CpMap::conjugation(&space, &u).unwrap();
        let a = q.adjoint_wrt_states().unwrap();
        let k = q.kms_adjoint().unwrap();
        assert!(a.distance(&k) < 1e-10);
        let id = CpMap::identity(&space);
        assert!(id.kms_adjoint().unwrap().distance(&id) < 1e-12);
    }

    #[test]
    fn lp_check_for_identity() {
        let space = m2([0.6, 0.4]);
        let x = Element::single(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(-2.0, 0.0)],
        ));
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let r = CpMap::identity(&space)
                .lp_extension_norm_check(LpIndex::new(p).unwrap(), std::slice::from_ref(&x))
                .unwrap();
            assert!((r.max_ratio - 1.0).abs() < 1e-13 && r.pass);
        }
        let t = transpose_map(&space);
        assert!(t.lp_extension_norm_check(LpIndex::TWO, &[x]).is_err());
    }

    #[test]
    fn composition_and_inverse() {
        let space = m2([0.5, 0.5]);
        let q = CpMap::conjugation(&space, &hadamard()).unwrap();
        let qq = q.compose(&q).unwrap();
        assert!(qq.distance(&CpMap::identity(&space)) < 1e-14);
        assert!(q.inverse().unwrap().distance(&q) < 1e-14);
        assert!(q.multiplicativity_residual() < 1e-14);
        let avg = CpMap::convex_combination(&[0.5, 0.5], &[q.clone(), CpMap::identity(&space)]).unwrap();
        assert!(avg.multiplicativity_residual() > 0.1);
        let other = NcSpace::tracial(BlockStructure::full(3).unwrap()).unwrap();
        assert!(q.compose(&CpMap::identity(&other)).is_err());
    }
}
