//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Eigendecomposition of a Hermitian matrix: real eigenvalues (ascending) and a unitary
/// matrix of eigenvectors in the columns.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermEigen {
    pub fn new(m: &DMatrix<C64>) -> Self {
        let sym = hermitian_part(m);
        let eig = sym.symmetric_eigen();
        // Sort ascending so callers can rely on the order.
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        HermEigen { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V f(Λ) V*` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let c = f(self.values[k]);
            for r in 0..n {
                scaled[(r, k)] *= c;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    HermEigen::new(m).min()
}

pub fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `‖a − b‖_F / max(1, ‖a‖_F, ‖b‖_F)`.
pub fn relative_difference(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let scale = 1f64.max(frobenius(a)).max(frobenius(b));
    frobenius(&(a - b)) / scale
}

pub fn vec_relative_difference(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    let scale = 1f64.max(a.norm()).max(b.norm());
    (a - b).norm() / scale
}

/// Exponential `exp(i·H)` of a Hermitian matrix.
pub fn unitary_exp(h: &DMatrix<C64>) -> DMatrix<C64> {
    HermEigen::new(h).apply_fn(|lambda| C64::from_polar(1.0, lambda))
}

/// Orthonormal basis (standard inner product) of the null space of `Σ_m A_mᴴ A_m`,
/// i.e. of the joint kernel of the `A_m`.
pub fn joint_kernel(ops: &[DMatrix<C64>], dim: usize) -> Vec<DVector<C64>> {
    let mut gram = DMatrix::<C64>::zeros(dim, dim);
    for a in ops {
        gram += a.adjoint() * a;
    }
    let eig = HermEigen::new(&gram);
    let scale = eig.values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    (0..dim)
        .filter(|&k| eig.values[k] < tol)
        .map(|k| eig.vectors.column(k).into_owned())
        .collect()
}
