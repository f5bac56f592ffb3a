//! Unital *-subalgebras, fixed-point algebras and conditional expectations.
//!
//! Subspaces are stored through the weighted vectorization `w(x) = vec(x ρ^{1/2})`, in
//! which the GNS inner product `φ(b* a)` becomes the standard one. A GNS-orthonormal
//! basis is then an orthonormal set of columns, and the state-preserving conditional
//! expectation is the orthogonal projection onto their span.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{joint_kernel, max_abs};
use crate::maps::{sandwich_superoperator, CpMap};
use crate::space::{Element, NcSpace};
use crate::C64;

/// Tolerance on closure, span membership and modular invariance.
pub const SPAN_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-9;

fn check_cap(len: usize, cap: usize) -> Result<()> {
    if len > cap {
        return Err(Error::ResourceCap {
            what: "generated subalgebra dimension".into(),
            requested: len as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Subalgebra {
    ambient: NcSpace,
    basis: Vec<Element>,
    /// Orthonormal columns `w(b)` of the basis elements.
    frame: DMatrix<C64>,
}

fn weight(space: &NcSpace, x: &Element) -> DVector<C64> {
    (x * &space.rho_power(0.5)).to_vector()
}

fn unweight(space: &NcSpace, v: &DVector<C64>) -> Element {
    let x = Element::from_vector(space.structure(), v).expect("ambient shape");
    &x * &space.rho_power(-0.5)
}

/// Incremental Gram–Schmidt. The complex frame `q_1, …, q_k` is stored through the real
/// embedding `[Re q; Im q]`, `[−Im q; Re q]`, whose real span matches the complex span,
/// so that batches of candidates can be screened with real matrix products.
struct Orthonormalizer {
    real: DMatrix<f64>,
    len: usize,
}

fn embed(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

impl Orthonormalizer {
    fn new(dim: usize) -> Self {
        Orthonormalizer {
            real: DMatrix::zeros(2 * dim, 2 * dim),
            len: 0,
        }
    }

    fn dim(&self) -> usize {
        self.real.nrows() / 2
    }

    fn project_out(&self, v: &DVector<f64>) -> DVector<f64> {
        let f = self.real.columns(0, 2 * self.len);
        let mut r = v.clone();
        r.gemv(-1.0, &f, &f.tr_mul(v), 1.0);
        r
    }

    /// Residuals of the columns of `cands` (real embeddings) against the current frame.
    fn screen(&self, cands: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.real.columns(0, 2 * self.len);
        let coef = f.tr_mul(cands);
        cands - f * coef
    }

    /// Adds `v` if it is independent of the current span; returns whether it was added.
    fn push(&mut self, v: &DVector<C64>) -> bool {
        let e = embed(v);
        let scale = e.norm();
        self.push_scaled(&e, scale, RANK_TOL)
    }

    /// Adds the embedded vector `e` when its component outside the span exceeds
    /// `tol · scale`. Judging against `scale` rather than `‖e‖` rejects rounding noise in
    /// a product that should vanish.
    fn push_scaled(&mut self, e: &DVector<f64>, scale: f64, tol: f64) -> bool {
        if scale == 0.0 || e.norm() == 0.0 || self.len == self.dim() {
            return false;
        }
        let r = self.project_out(e);
        if r.norm() <= tol * scale {
            return false;
        }
        let r = self.project_out(&r);
        let n = r.norm();
        if n <= tol * scale {
            return false;
        }
        let q = r.unscale(n);
        let half = self.dim();
        let iq = DVector::from_fn(2 * half, |k, _| if k < half { -q[k + half] } else { q[k - half] });
        self.real.set_column(2 * self.len, &q);
        self.real.set_column(2 * self.len + 1, &iq);
        self.len += 1;
        true
    }

    fn len(&self) -> usize {
        self.len
    }

    fn into_matrix(self) -> DMatrix<C64> {
        let half = self.dim();
        DMatrix::from_fn(half, self.len, |i, j| {
            C64::new(self.real[(i, 2 * j)], self.real[(i + half, 2 * j)])
        })
    }
}

impl Subalgebra {
    fn from_frame(ambient: &NcSpace, frame: DMatrix<C64>) -> Self {
        let basis = frame
            .column_iter()
            .map(|c| unweight(ambient, &c.into_owned()))
            .collect();
        Subalgebra {
            ambient: ambient.clone(),
            basis,
            frame,
        }
    }

    /// The span of `elems` together with `1`, after checking that it is closed under
    /// adjoints and pairwise products of basis elements.
    pub fn from_spanning_set(ambient: &NcSpace, elems: &[Element]) -> Result<Self> {
        let mut ortho = Orthonormalizer::new(ambient.vec_dim());
        ortho.push(&weight(ambient, &ambient.identity()));
        for e in elems {
            ambient.check(e)?;
            ortho.push(&weight(ambient, e));
        }
        let sub = Self::from_frame(ambient, ortho.into_matrix());
        let res = sub.closure_residual();
        if res > SPAN_TOL {
            return Err(Error::NotAnAlgebra(res));
        }
        Ok(sub)
    }

    /// The unital *-algebra generated by `gens`, grown from `1` by left multiplication
    /// with the generators and their adjoints until the span stabilizes. Closed by
    /// construction, so no pairwise closure check is run.
    pub fn generated_by(ambient: &NcSpace, gens: &[Element], cap: usize) -> Result<Self> {
        let mut all = Vec::with_capacity(2 * gens.len());
        for g in gens {
            ambient.check(g)?;
            let norm = g.op_norm();
            all.push((g.clone(), norm));
            let a = g.adjoint();
            if a.distance(g) > 1e-14 * norm {
                all.push((a, norm));
            }
        }
        let dim = ambient.vec_dim();
        let mut ortho = Orthonormalizer::new(dim);
        let mut elems = vec![ambient.identity()];
        let mut norms = vec![1.0];
        ortho.push(&weight(ambient, &elems[0]));
        let mut next = 0;
        while next < elems.len() && ortho.len() < dim {
            let v = elems[next].clone();
            let v_norm = norms[next];
            next += 1;
            let prods: Vec<Element> = all.iter().map(|(g, _)| g * &v).collect();
            let mut cands = DMatrix::<f64>::zeros(2 * dim, prods.len());
            for (j, p) in prods.iter().enumerate() {
                cands.set_column(j, &embed(&weight(ambient, p)));
            }
            let base = ortho.len();
            let screened = ortho.screen(&cands);
            for (j, (p, (_, g_norm))) in prods.into_iter().zip(&all).enumerate() {
                let scale = g_norm * v_norm;
                // Account for directions accepted earlier in this batch before the full test.
                let fresh = ortho.real.columns(2 * base, 2 * (ortho.len() - base));
                let col = screened.column(j);
                let rest = col - fresh * fresh.tr_mul(&col);
                if rest.norm() <= RANK_TOL * scale {
                    continue;
                }
                if ortho.push_scaled(&cands.column(j).into_owned(), scale, RANK_TOL) {
                    check_cap(ortho.len(), cap)?;
                    norms.push(p.op_norm());
                    elems.push(p);
                }
            }
        }
        Ok(Self::from_frame(ambient, ortho.into_matrix()))
    }

    pub fn whole(ambient: &NcSpace) -> Self {
        let units = ambient.structure().matrix_units();
        let elems: Vec<Element> = units
            .into_iter()
            .map(|u| Element::matrix_unit(ambient.structure(), u))
            .collect();
        let mut ortho = Orthonormalizer::new(ambient.vec_dim());
        ortho.push(&weight(ambient, &ambient.identity()));
        for e in &elems {
            ortho.push(&weight(ambient, e));
        }
        Self::from_frame(ambient, ortho.into_matrix())
    }

    pub fn scalars(ambient: &NcSpace) -> Self {
        Self::from_frame(ambient, DMatrix::from_columns(&[weight(ambient, &ambient.identity())]))
    }

    pub fn ambient(&self) -> &NcSpace {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// GNS-orthonormal basis.
    pub fn basis(&self) -> &[Element] {
        &self.basis
    }

    /// GNS-orthogonal projection onto the span.
    pub fn project(&self, x: &Element) -> Element {
        let w = weight(&self.ambient, x);
        let coef = self.frame.adjoint() * &w;
        unweight(&self.ambient, &(&self.frame * coef))
    }

    /// `‖x − proj(x)‖_GNS / max(1, ‖x‖_GNS)`.
    pub fn span_residual(&self, x: &Element) -> f64 {
        let w = weight(&self.ambient, x);
        let r = &w - &self.frame * (self.frame.adjoint() * &w);
        r.norm() / 1f64.max(w.norm())
    }

    /// Worst span residual of products `b_i b_j` and adjoints `b_i*` of basis elements.
    pub fn closure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.basis {
            worst = worst.max(self.span_residual(&a.adjoint()));
            for b in &self.basis {
                worst = worst.max(self.span_residual(&(a * b)));
            }
        }
        worst
    }

    /// Worst span residual of `log ρ · b − b · log ρ` over the basis.
    pub fn modular_invariance_residual(&self) -> f64 {
        self.basis
            .iter()
            .map(|b| self.span_residual(&self.ambient.modular_generator(b)))
            .fold(0.0, f64::max)
    }
}

/// `{x : m(x) = x for every m}` for a family of automorphisms of `space`.
pub fn fixed_point_algebra(space: &NcSpace, maps: &[CpMap]) -> Result<Subalgebra> {
    let n = space.vec_dim();
    let mut ops = Vec::with_capacity(maps.len());
    for m in maps {
        if !m.source().same_as(space) || !m.target().same_as(space) {
            return Err(crate::error::shape_mismatch(space.structure(), m.source().structure()));
        }
        ops.push(m.matrix() - DMatrix::<C64>::identity(n, n));
    }
    let kernel = joint_kernel(&ops, n);
    let elems: Vec<Element> = kernel
        .iter()
        .map(|v| Element::from_vector(space.structure(), v).expect("ambient shape"))
        .collect();
    Subalgebra::from_spanning_set(space, &elems)
}

/// The `φ`-preserving conditional expectation onto a modular-invariant subalgebra,
/// realized as the GNS-orthogonal projection and verified before it is returned.
pub fn conditional_expectation(space: &NcSpace, sub: &Subalgebra) -> Result<CpMap> {
    if !sub.ambient().same_as(space) {
        return Err(crate::error::shape_mismatch(
            space.structure(),
            sub.ambient().structure(),
        ));
    }
    let inv = sub.modular_invariance_residual();
    if inv > SPAN_TOL {
        return Err(Error::NotModularInvariant(inv));
    }
    let s = space.structure();
    let one = space.identity();
    let w = sandwich_superoperator(s, &one, &space.rho_power(0.5));
    let w_inv = sandwich_superoperator(s, &one, &space.rho_power(-0.5));
    let proj = &sub.frame * sub.frame.adjoint();
    let m = w_inv * proj * w;
    let e = CpMap::from_matrix(space.clone(), space.clone(), m)?.verified();
    verify_expectation(&e, sub)?;
    Ok(e)
}

fn fail(what: &str, residual: f64) -> Error {
    Error::VerificationFailed {
        what: what.into(),
        residual,
    }
}

fn verify_expectation(e: &CpMap, sub: &Subalgebra) -> Result<()> {
    let space = e.source();
    let idem = max_abs(&(e.matrix() * e.matrix() - e.matrix()));
    if idem > SPAN_TOL {
        return Err(fail("idempotence of conditional expectation", idem));
    }
    let flags = e.flags();
    if !flags.unital.holds() {
        return Err(fail("unitality of conditional expectation", e.unital_residual()));
    }
    if !flags.preserves_state.holds() {
        return Err(fail(
            "state preservation of conditional expectation",
            e.state_residual(),
        ));
    }
    if !flags.cp.holds() {
        return Err(fail(
            "complete positivity of conditional expectation",
            -e.is_completely_positive().min_eigenvalue,
        ));
    }
    let samples = deterministic_samples(space, 3);
    for y in &samples {
        let pos = y * &y.adjoint();
        let m = e.apply_unchecked(&pos).min_eigenvalue();
        if m < -SPAN_TOL {
            return Err(fail("positivity of conditional expectation", -m));
        }
    }
    let picks: Vec<&Element> = sub.basis().iter().take(6).collect();
    for a in &picks {
        for b in &picks {
            for x in &samples {
                let lhs = e.apply_unchecked(&(&(*a * x) * *b));
                let rhs = &(*a * &e.apply_unchecked(x)) * *b;
                let r = lhs.distance(&rhs) / 1f64.max(rhs.frobenius_norm());
                if r > SPAN_TOL {
                    return Err(fail("bimodule property of conditional expectation", r));
                }
            }
        }
    }
    Ok(())
}

/// Fixed, seed-free elements with generic entries.
fn deterministic_samples(space: &NcSpace, count: usize) -> Vec<Element> {
    let units = space.structure().matrix_units();
    (0..count)
        .map(|s| {
            let mut x = space.zero();
            for (k, u) in units.iter().enumerate() {
                let t = (k + 1) as f64 * (s as f64 + 1.37);
                x.axpy(
                    C64::new(t.sin(), (0.61 * t).cos()),
                    &Element::matrix_unit(space.structure(), *u),
                );
            }
            x
        })
        .collect()
}
