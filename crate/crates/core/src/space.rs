//! Finite noncommutative probability spaces.
//!
//! An algebra is a direct sum of full matrix blocks `M_{d_1} ⊕ … ⊕ M_{d_m}`; a state is
//! given by a block-diagonal density matrix `ρ` with `φ(x) = tr(ρ x)`. All modular
//! quantities (`ρ^{it}`, `ρ^{s}`, `log ρ`) come from a single Hermitian
//! eigendecomposition per block computed when the space is built.
//!
//! Elements are vectorized block by block, each block column-stacked. Every map matrix
//! in the crate uses this convention.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::linalg::{frobenius, spectral_norm, HermEigen};
use crate::C64;

/// Minimum admissible eigenvalue of a density matrix.
pub const EPS_FAITHFUL: f64 = 1e-12;

const DENSITY_TOL: f64 = 1e-10;

/// Block sizes `d_1, …, d_m` of a block-diagonal matrix algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockStructure {
    dims: Vec<usize>,
}

/// The matrix unit `E_{row,col}` sitting in one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixUnit {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::EmptyStructure);
        }
        Ok(BlockStructure { dims })
    }

    /// `n` one-dimensional blocks: the commutative algebra `C^n`.
    pub fn commutative(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn full(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    /// Complex dimension of the algebra, `Σ d_k²`.
    pub fn vec_dim(&self) -> usize {
        self.dims.iter().map(|d| d * d).sum()
    }

    /// Dimension of the Hilbert space the algebra acts on, `Σ d_k`.
    pub fn hilbert_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Offset of each block in the vectorization.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.dims
            .iter()
            .map(|d| {
                let o = acc;
                acc += d * d;
                o
            })
            .collect()
    }

    /// The structure repeated `times` times in a row.
    pub fn repeated(&self, times: usize) -> Result<Self> {
        let dims = (0..times).flat_map(|_| self.dims.iter().copied()).collect();
        Self::new(dims)
    }

    /// Matrix units in vectorization order.
    pub fn matrix_units(&self) -> Vec<MatrixUnit> {
        let mut out = Vec::with_capacity(self.vec_dim());
        for (block, &d) in self.dims.iter().enumerate() {
            for col in 0..d {
                for row in 0..d {
                    out.push(MatrixUnit { block, row, col });
                }
            }
        }
        out
    }

    pub fn unit_index(&self, unit: MatrixUnit) -> usize {
        self.offsets()[unit.block] + unit.col * self.dims[unit.block] + unit.row
    }
}

impl fmt::Display for BlockStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| format!("M{d}")).collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// A block-diagonal complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    blocks: Vec<DMatrix<C64>>,
}

impl Element {
    /// Builds an element from square blocks.
    pub fn from_blocks(blocks: Vec<DMatrix<C64>>) -> Self {
        debug_assert!(blocks.iter().all(|b| b.is_square()));
        Element { blocks }
    }

    pub fn single(block: DMatrix<C64>) -> Self {
        Element::from_blocks(vec![block])
    }

    /// Element of a commutative algebra: one 1×1 block per value.
    pub fn diagonal(values: &[C64]) -> Self {
        Element::from_blocks(values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect())
    }

    pub fn diagonal_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Element::diagonal(&v)
    }

    pub fn identity(structure: &BlockStructure) -> Self {
        Element::from_blocks(structure.dims().iter().map(|&d| DMatrix::identity(d, d)).collect())
    }

    pub fn zero(structure: &BlockStructure) -> Self {
        Element::from_blocks(structure.dims().iter().map(|&d| DMatrix::zeros(d, d)).collect())
    }

    pub fn matrix_unit(structure: &BlockStructure, unit: MatrixUnit) -> Self {
        let mut e = Element::zero(structure);
        e.blocks[unit.block][(unit.row, unit.col)] = C64::new(1.0, 0.0);
        e
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DMatrix<C64>> {
        self.blocks
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn conforms_to(&self, structure: &BlockStructure) -> bool {
        self.blocks.len() == structure.num_blocks()
            && self
                .blocks
                .iter()
                .zip(structure.dims())
                .all(|(b, &d)| b.nrows() == d && b.ncols() == d)
    }

    pub fn check_conforms(&self, structure: &BlockStructure) -> Result<()> {
        if self.conforms_to(structure) {
            Ok(())
        } else {
            Err(shape_mismatch(structure, format!("{:?}", self.dims())))
        }
    }

    pub fn adjoint(&self) -> Element {
        Element::from_blocks(self.blocks.iter().map(|b| b.adjoint()).collect())
    }

    pub fn scale(&self, c: C64) -> Element {
        Element::from_blocks(self.blocks.iter().map(|b| b * c).collect())
    }

    pub fn scale_re(&self, c: f64) -> Element {
        Element::from_blocks(self.blocks.iter().map(|b| b.scale(c)).collect())
    }

    /// `self + c·other`, in place.
    pub fn axpy(&mut self, c: C64, other: &Element) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b * c;
        }
    }

    /// Block-wise trace sum `Σ_k tr(x_k)`.
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| frobenius(b).powi(2)).sum::<f64>().sqrt()
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn op_norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| frobenius(&(b - b.adjoint())))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(crate::linalg::min_hermitian_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_vector(&self) -> DVector<C64> {
        let n: usize = self.blocks.iter().map(|b| b.len()).sum();
        let mut v = DVector::zeros(n);
        let mut offset = 0;
        for b in &self.blocks {
            // nalgebra storage is column-major, which is the column-stacking we want.
            v.rows_mut(offset, b.len()).copy_from_slice(b.as_slice());
            offset += b.len();
        }
        v
    }

    pub fn from_vector(structure: &BlockStructure, v: &DVector<C64>) -> Result<Self> {
        if v.len() != structure.vec_dim() {
            return Err(shape_mismatch(structure.vec_dim(), v.len()));
        }
        let mut offset = 0;
        let blocks = structure
            .dims()
            .iter()
            .map(|&d| {
                let b = DMatrix::from_column_slice(d, d, &v.as_slice()[offset..offset + d * d]);
                offset += d * d;
                b
            })
            .collect();
        Ok(Element::from_blocks(blocks))
    }

    /// Concatenation of several elements into one element with all their blocks.
    pub fn direct_sum(parts: &[Element]) -> Element {
        Element::from_blocks(parts.iter().flat_map(|p| p.blocks.iter().cloned()).collect())
    }

    pub fn distance(&self, other: &Element) -> f64 {
        (self - other).frobenius_norm()
    }
}

fn zip_blocks(a: &Element, b: &Element, f: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64>) -> Element {
    assert_eq!(a.dims(), b.dims(), "element block structures differ");
    Element::from_blocks(a.blocks.iter().zip(&b.blocks).map(|(x, y)| f(x, y)).collect())
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        zip_blocks(self, rhs, |x, y| x + y)
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        zip_blocks(self, rhs, |x, y| x - y)
    }
}

impl Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        zip_blocks(self, rhs, |x, y| x * y)
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scale_re(-1.0)
    }
}

/// Exponent `p ∈ [1, ∞]` of a noncommutative L^p norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpIndex(f64);

impl LpIndex {
    pub const ONE: LpIndex = LpIndex(1.0);
    pub const TWO: LpIndex = LpIndex(2.0);
    pub const INFINITY: LpIndex = LpIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidLpIndex(p));
        }
        Ok(LpIndex(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for LpIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

struct SpaceInner {
    structure: BlockStructure,
    rho: Element,
    eigen: Vec<HermEigen>,
    log_rho: Element,
}

/// A finite noncommutative probability space `(A, φ)`.
///
/// Cloning is cheap; the density matrix and its eigendecomposition are shared.
#[derive(Clone)]
pub struct NcSpace {
    inner: Arc<SpaceInner>,
}

impl fmt::Debug for NcSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NcSpace")
            .field("structure", &self.inner.structure)
            .field("min_eigenvalue", &self.min_eigenvalue())
            .finish()
    }
}

impl NcSpace {
    /// Builds a space from a density matrix, rejecting non-Hermitian, non-normalized or
    /// non-faithful input.
    pub fn new(structure: BlockStructure, rho: Element) -> Result<Self> {
        rho.check_conforms(&structure)?;
        let dev = rho.hermitian_deviation();
        if dev > DENSITY_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let rho = Element::from_blocks(rho.blocks().iter().map(crate::linalg::hermitian_part).collect());
        let eigen: Vec<HermEigen> = rho.blocks().iter().map(HermEigen::new).collect();
        let min = eigen.iter().map(|e| e.min()).fold(f64::INFINITY, f64::min);
        if min.is_nan() || min <= EPS_FAITHFUL {
            return Err(Error::NotFaithful(min));
        }
        let log_rho = Element::from_blocks(eigen.iter().map(|e| e.apply_fn(|l| C64::new(l.ln(), 0.0))).collect());
        Ok(NcSpace {
            inner: Arc::new(SpaceInner {
                structure,
                rho,
                eigen,
                log_rho,
            }),
        })
    }

    /// The normalized trace `tr(x)/Σd_k`.
    pub fn tracial(structure: BlockStructure) -> Result<Self> {
        let n = structure.hilbert_dim() as f64;
        let rho = Element::identity(&structure).scale_re(1.0 / n);
        Self::new(structure, rho)
    }

    /// Single-block space `(M_d, tr(ρ·))`.
    pub fn from_density(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(shape_mismatch(
                "square matrix",
                format!("{}x{}", rho.nrows(), rho.ncols()),
            ));
        }
        let structure = BlockStructure::full(rho.nrows())?;
        Self::new(structure, Element::single(rho))
    }

    /// Commutative space `C^n` with the probability vector `probs`.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let structure = BlockStructure::commutative(probs.len())?;
        Self::new(structure, Element::diagonal_real(probs))
    }

    /// `⊕_i (w_i·ρ)` on `A^{n}`: the state `b ↦ Σ_i w_i φ(b_i)`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Result<NcSpace> {
        let structure = self.structure().repeated(weights.len())?;
        let parts: Vec<Element> = weights.iter().map(|&w| self.rho().scale_re(w)).collect();
        NcSpace::new(structure, Element::direct_sum(&parts))
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.inner.structure
    }

    pub fn rho(&self) -> &Element {
        &self.inner.rho
    }

    pub fn log_rho(&self) -> &Element {
        &self.inner.log_rho
    }

    pub fn vec_dim(&self) -> usize {
        self.inner.structure.vec_dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.inner.eigen.iter().map(|e| e.min()).fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues of `ρ`, block by block.
    pub fn spectrum(&self) -> Vec<Vec<f64>> {
        self.inner
            .eigen
            .iter()
            .map(|e| e.values.iter().copied().collect())
            .collect()
    }

    pub fn eigenvectors(&self, block: usize) -> &DMatrix<C64> {
        &self.inner.eigen[block].vectors
    }

    /// True when the modular group is trivial, i.e. `ρ` is scalar on every block.
    pub fn is_tracial(&self, tol: f64) -> bool {
        self.inner.eigen.iter().all(|e| {
            let lo = e.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = e.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo <= tol
        })
    }

    /// Same algebra and (numerically) the same state.
    pub fn same_as(&self, other: &NcSpace) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.structure() == other.structure() && self.rho().distance(other.rho()) <= 1e-12)
    }

    pub fn check(&self, x: &Element) -> Result<()> {
        x.check_conforms(self.structure())
    }

    pub fn identity(&self) -> Element {
        Element::identity(self.structure())
    }

    pub fn zero(&self) -> Element {
        Element::zero(self.structure())
    }

    /// `ρ^s` for real `s`.
    pub fn rho_power(&self, s: f64) -> Element {
        self.spectral_fn(|l| C64::new(l.powf(s), 0.0))
    }

    /// `ρ^{it} = exp(i t log ρ)`.
    pub fn rho_imag_power(&self, t: f64) -> Element {
        self.spectral_fn(|l| C64::from_polar(1.0, t * l.ln()))
    }

    fn spectral_fn(&self, f: impl Fn(f64) -> C64) -> Element {
        Element::from_blocks(self.inner.eigen.iter().map(|e| e.apply_fn(&f)).collect())
    }

    /// `φ(x) = tr(ρ x)`.
    pub fn state_eval(&self, x: &Element) -> Result<C64> {
        self.check(x)?;
        Ok(self.state_unchecked(x))
    }

    pub(crate) fn state_unchecked(&self, x: &Element) -> C64 {
        self.rho()
            .blocks()
            .iter()
            .zip(x.blocks())
            .map(|(r, b)| (r * b).trace())
            .sum()
    }

    /// GNS inner product `⟨a, b⟩ = φ(b* a)`.
    pub fn gns_inner(&self, a: &Element, b: &Element) -> Result<C64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.state_unchecked(&(&b.adjoint() * a)))
    }

    pub fn gns_norm(&self, a: &Element) -> Result<f64> {
        Ok(self.gns_inner(a, a)?.re.max(0.0).sqrt())
    }

    /// Modular automorphism `σ_t(x) = ρ^{it} x ρ^{-it}`.
    pub fn modular_action(&self, t: f64, x: &Element) -> Result<Element> {
        self.check(x)?;
        let u = self.rho_imag_power(t);
        Ok(&(&u * x) * &u.adjoint())
    }

    /// Analytic continuation `σ_{is}(x) = ρ^{-s} x ρ^{s}`.
    pub fn modular_action_imaginary(&self, s: f64, x: &Element) -> Result<Element> {
        self.check(x)?;
        Ok(&(&self.rho_power(-s) * x) * &self.rho_power(s))
    }

    /// Generator of the modular group: `x ↦ log ρ · x − x · log ρ`.
    pub fn modular_generator(&self, x: &Element) -> Element {
        let l = self.log_rho();
        &(l * x) - &(x * l)
    }

    /// `‖ρ^{1/2p} x ρ^{1/2p}‖_{S_p}`, and the operator norm of `x` for `p = ∞`.
    pub fn lp_norm(&self, p: LpIndex, x: &Element) -> Result<f64> {
        self.check(x)?;
        if p.is_infinite() {
            return Ok(x.op_norm());
        }
        let pv = p.value();
        let w = self.rho_power(1.0 / (2.0 * pv));
        let y = &(&w * x) * &w;
        let sum: f64 = y
            .blocks()
            .iter()
            .flat_map(|b| b.singular_values().iter().copied().collect::<Vec<_>>())
            .map(|s| s.powf(pv))
            .sum();
        Ok(sum.powf(1.0 / pv))
    }
}
