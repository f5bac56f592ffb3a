//! Tuples `b = (b_i)_{i∈I}` in `B = A^{|I|}`.

use std::ops::{Add, Mul, Sub};

use crate::error::{shape_mismatch, Result};
use crate::space::{BlockStructure, Element, LpIndex, NcSpace};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct Tuple {
    comps: Vec<Element>,
}

impl Tuple {
    pub fn new(comps: Vec<Element>) -> Self {
        Tuple { comps }
    }

    /// The constant tuple `x̃ = (x, …, x)`.
    pub fn constant(x: &Element, len: usize) -> Self {
        Tuple::new(vec![x.clone(); len])
    }

    pub fn identity(space: &NcSpace, len: usize) -> Self {
        Tuple::constant(&space.identity(), len)
    }

    pub fn zero(space: &NcSpace, len: usize) -> Self {
        Tuple::constant(&space.zero(), len)
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn components(&self) -> &[Element] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Element> {
        self.comps
    }

    pub fn get(&self, i: usize) -> &Element {
        &self.comps[i]
    }

    pub fn map(&self, f: impl Fn(&Element) -> Element) -> Tuple {
        Tuple::new(self.comps.iter().map(f).collect())
    }

    pub fn scale_re(&self, c: f64) -> Tuple {
        self.map(|x| x.scale_re(c))
    }

    pub fn scale(&self, c: C64) -> Tuple {
        self.map(|x| x.scale(c))
    }

    pub fn adjoint(&self) -> Tuple {
        self.map(Element::adjoint)
    }

    /// `self + c·other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Tuple) {
        let c = C64::new(c, 0.0);
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(c, b);
        }
    }

    pub fn check(&self, space: &NcSpace, len: usize) -> Result<()> {
        if self.comps.len() != len {
            return Err(shape_mismatch(format!("{len} components"), self.comps.len()));
        }
        self.comps.iter().try_for_each(|c| space.check(c))
    }

    /// Maximum operator norm over components: the operator norm in `B`.
    pub fn op_norm(&self) -> f64 {
        self.comps.iter().map(Element::op_norm).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ_i w_i ‖b_i‖_p^p)^{1/p}`, the L^p norm for the state `Σ_i w_i φ(b_i)`.
    pub fn lp_norm(&self, space: &NcSpace, weights: &[f64], p: LpIndex) -> Result<f64> {
        if p.is_infinite() {
            return Ok(self.op_norm());
        }
        let pv = p.value();
        let mut acc = 0.0;
        for (w, c) in weights.iter().zip(&self.comps) {
            acc += w * space.lp_norm(p, c)?.powf(pv);
        }
        Ok(acc.powf(1.0 / pv))
    }

    /// `Σ_i w_i b_i`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Element {
        let mut acc = self.comps[0].scale_re(0.0);
        for (w, c) in weights.iter().zip(&self.comps) {
            acc.axpy(C64::new(*w, 0.0), c);
        }
        acc
    }

    /// The tuple as one element of the enlarged block algebra.
    pub fn to_element(&self) -> Element {
        Element::direct_sum(&self.comps)
    }

    /// Splits an element of `base` repeated `len` times back into a tuple.
    pub fn from_element(x: &Element, base: &BlockStructure, len: usize) -> Result<Tuple> {
        let m = base.num_blocks();
        if x.blocks().len() != m * len {
            return Err(shape_mismatch(m * len, x.blocks().len()));
        }
        let comps = x.blocks().chunks(m).map(|c| Element::from_blocks(c.to_vec())).collect();
        Ok(Tuple::new(comps))
    }

    pub fn distance(&self, other: &Tuple) -> f64 {
        (self - other).op_norm()
    }

    /// `‖a − b‖_F / max(1, ‖a‖_F, ‖b‖_F)`.
    pub fn relative_distance(&self, other: &Tuple) -> f64 {
        let scale = 1f64.max(self.frobenius_norm()).max(other.frobenius_norm());
        (self - other).frobenius_norm() / scale
    }

    /// Every matrix unit of every component: a basis of `A^{len}`.
    pub fn basis(space: &NcSpace, len: usize) -> Vec<Tuple> {
        let s = space.structure();
        let zero = space.zero();
        let mut out = Vec::with_capacity(len * s.vec_dim());
        for c in 0..len {
            for u in s.matrix_units() {
                let mut comps = vec![zero.clone(); len];
                comps[c] = Element::matrix_unit(s, u);
                out.push(Tuple::new(comps));
            }
        }
        out
    }
}

fn zip(a: &Tuple, b: &Tuple, f: impl Fn(&Element, &Element) -> Element) -> Tuple {
    assert_eq!(a.len(), b.len(), "tuple lengths differ");
    Tuple::new(a.comps.iter().zip(&b.comps).map(|(x, y)| f(x, y)).collect())
}

impl Add for &Tuple {
    type Output = Tuple;
    fn add(self, rhs: &Tuple) -> Tuple {
        zip(self, rhs, |x, y| x + y)
    }
}

impl Sub for &Tuple {
    type Output = Tuple;
    fn sub(self, rhs: &Tuple) -> Tuple {
        zip(self, rhs, |x, y| x - y)
    }
}

impl Mul for &Tuple {
    type Output = Tuple;
    fn mul(self, rhs: &Tuple) -> Tuple {
        zip(self, rhs, |x, y| x * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_round_trip() {
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        let a = Element::identity(&s);
        let b = a.scale_re(2.0);
        let t = Tuple::new(vec![a, b]);
        let e = t.to_element();
        assert_eq!(e.blocks().len(), 4);
        assert_eq!(Tuple::from_element(&e, &s, 2).unwrap(), t);
        assert!(Tuple::from_element(&e, &s, 3).is_err());
    }

    #[test]
    fn lp_norm_of_identity_is_one() {
        let space = NcSpace::diagonal(&[0.3, 0.7]).unwrap();
        let t = Tuple::identity(&space, 3);
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let v = t.lp_norm(&space, &[0.2, 0.3, 0.5], LpIndex::new(p).unwrap()).unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
