use crate::error::{Error, Result};
use crate::free::action::FreeAction;
use crate::free::system::TransitionSystem;
use crate::maps::CpMap;
use crate::space::{Element, NcSpace};
use crate::tuple::Tuple;
use crate::C64;

/// The Markov operator `P(b)_i = P_i(Σ_j p(ij) b_j)` on `B = A^{|I|}` with state
/// `φ_B(b) = Σ_i p(i) φ(b_i)`, or its adjoint
/// `P*(b)_i = (1/p(i)) Σ_j p(j) p(ji) P_j*(b_j)`.
#[derive(Clone, Debug)]
pub struct BufetovOperator {
    system: TransitionSystem,
    space: NcSpace,
    maps: Vec<CpMap>,
    adjoint_maps: Option<Vec<CpMap>>,
    is_adjoint: bool,
}

impl BufetovOperator {
    pub fn new(system: TransitionSystem, maps: Vec<CpMap>) -> Result<Self> {
        let space = maps
            .first()
            .ok_or_else(|| Error::Precondition("no component maps".into()))?
            .source()
            .clone();
        if maps.len() != system.len() {
            return Err(crate::error::shape_mismatch(
                format!("{} component maps", system.len()),
                maps.len(),
            ));
        }
        for m in &maps {
            if !m.source().same_as(&space) || !m.target().same_as(&space) {
                return Err(crate::error::shape_mismatch(space.structure(), m.source().structure()));
            }
        }
        Ok(BufetovOperator {
            system,
            space,
            maps,
            adjoint_maps: None,
            is_adjoint: false,
        })
    }

    /// `P` for a free action and the non-backtracking system. Since `σ_j* = σ_{−j}` for
    /// automorphisms, the adjoint components are known without solving.
    pub fn from_action(action: &FreeAction) -> Result<Self> {
        let mut op = Self::new(action.system()?, action.maps().to_vec())?;
        let adj = (0..action.maps().len())
            .map(|i| action.maps()[action.inverse_index(i)].clone())
            .collect();
        op.adjoint_maps = Some(adj);
        Ok(op)
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.system
    }

    pub fn space(&self) -> &NcSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    pub fn is_adjoint(&self) -> bool {
        self.is_adjoint
    }

    pub fn component_maps(&self) -> &[CpMap] {
        &self.maps
    }

    /// `P*`; the component adjoints are computed with the generic state-adjoint solver
    /// unless they are already known.
    pub fn adjoint(&self) -> Result<BufetovOperator> {
        let adjoint_maps = match &self.adjoint_maps {
            Some(a) => a.clone(),
            None => self
                .maps
                .iter()
                .map(CpMap::adjoint_wrt_states)
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(BufetovOperator {
            system: self.system.clone(),
            space: self.space.clone(),
            maps: self.maps.clone(),
            adjoint_maps: Some(adjoint_maps),
            is_adjoint: !self.is_adjoint,
        })
    }

    /// Same as [`adjoint`](Self::adjoint) but always runs the generic solver.
    pub fn adjoint_by_solver(&self) -> Result<BufetovOperator> {
        let mut plain = self.clone();
        plain.adjoint_maps = None;
        plain.adjoint()
    }

    pub fn apply(&self, b: &Tuple) -> Result<Tuple> {
        b.check(&self.space, self.len())?;
        Ok(self.apply_unchecked(b))
    }

    pub(crate) fn apply_unchecked(&self, b: &Tuple) -> Tuple {
        let m = self.len();
        let comps = b.components();
        if !self.is_adjoint {
            let out = (0..m)
                .map(|i| {
                    let mut mix = comps[0].scale_re(0.0);
                    for (j, c) in comps.iter().enumerate() {
                        let p = self.system.p(i, j);
                        if p != 0.0 {
                            mix.axpy(C64::new(p, 0.0), c);
                        }
                    }
                    self.maps[i].apply_unchecked(&mix)
                })
                .collect();
            Tuple::new(out)
        } else {
            let adj = self.adjoint_maps.as_ref().expect("adjoint components present");
            let pulled: Vec<Element> = comps.iter().zip(adj).map(|(c, q)| q.apply_unchecked(c)).collect();
            let pi = self.system.stationary();
            let out = (0..m)
                .map(|i| {
                    let mut acc = comps[0].scale_re(0.0);
                    for (j, c) in pulled.iter().enumerate() {
                        let w = pi[j] * self.system.p(j, i) / pi[i];
                        if w != 0.0 {
                            acc.axpy(C64::new(w, 0.0), c);
                        }
                    }
                    acc
                })
                .collect();
            Tuple::new(out)
        }
    }

    pub fn power(&self, n: usize, b: &Tuple) -> Result<Tuple> {
        b.check(&self.space, self.len())?;
        let mut cur = b.clone();
        for _ in 0..n {
            cur = self.apply_unchecked(&cur);
        }
        Ok(cur)
    }

    /// `s_n(x) = Σ_i p(i) Pⁿ(x̃)_i`, at a cost of `n` applications of `P`.
    pub fn sphere_average_fast(&self, n: usize, x: &Element) -> Result<Element> {
        self.space.check(x)?;
        let b = self.power(n, &Tuple::constant(x, self.len()))?;
        Ok(b.weighted_sum(self.system.stationary()))
    }

    /// `s_0(x), …, s_{n_max}(x)` from one running power.
    pub fn sphere_averages(&self, n_max: usize, x: &Element) -> Result<Vec<Element>> {
        self.space.check(x)?;
        let mut cur = Tuple::constant(x, self.len());
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(cur.weighted_sum(self.system.stationary()));
        for _ in 0..n_max {
            cur = self.apply_unchecked(&cur);
            out.push(cur.weighted_sum(self.system.stationary()));
        }
        Ok(out)
    }

    /// `c_n(x) = (1/n) Σ_{k<n} s_k(x)`, accumulated along one running power.
    pub fn cesaro_average(&self, n: usize, x: &Element) -> Result<Element> {
        if n == 0 {
            return Err(Error::Precondition("Cesàro mean needs n >= 1".into()));
        }
        self.space.check(x)?;
        let mut cur = Tuple::constant(x, self.len());
        let mut sum = cur.clone();
        for _ in 1..n {
            cur = self.apply_unchecked(&cur);
            sum.axpy(1.0, &cur);
        }
        Ok(sum.weighted_sum(self.system.stationary()).scale_re(1.0 / n as f64))
    }

    /// `φ_B(b) = Σ_i p(i) φ(b_i)`.
    pub fn state(&self, b: &Tuple) -> Result<C64> {
        b.check(&self.space, self.len())?;
        Ok(b.components()
            .iter()
            .zip(self.system.stationary())
            .map(|(c, w)| self.space.state_unchecked(c) * *w)
            .sum())
    }

    /// `(B, φ_B)` materialized as one block algebra with density `⊕_i p(i) ρ`.
    pub fn b_space(&self) -> Result<NcSpace> {
        self.space.weighted_sum(self.system.stationary())
    }

    /// The operator as a dense map on [`b_space`](Self::b_space).
    pub fn to_cp_map(&self) -> Result<CpMap> {
        let bs = self.b_space()?;
        let base = self.space.structure().clone();
        let m = self.len();
        CpMap::from_fn(bs.clone(), bs, |x| {
            let t = Tuple::from_element(x, &base, m).expect("enlarged shape");
            self.apply_unchecked(&t).to_element()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::permutation_automorphism;
    use nalgebra::DMatrix;

    fn perm_setup() -> (NcSpace, FreeAction, BufetovOperator) {
        let space = NcSpace::diagonal(&[0.25; 4]).unwrap();
        let a = permutation_automorphism(&space, &[1, 2, 3, 0]).unwrap();
        let b = permutation_automorphism(&space, &[1, 0, 3, 2]).unwrap();
        let action = FreeAction::from_generators(&space, vec![a, b]).unwrap();
        let p = BufetovOperator::from_action(&action).unwrap();
        (space, action, p)
    }

    #[test]
    fn unital_and_state_preserving() {
        let (space, _, p) = perm_setup();
        let one = Tuple::identity(&space, 4);
        assert!(p.apply(&one).unwrap().distance(&one) < 1e-15);
        let b = Tuple::new(
            (0..4)
                .map(|k| Element::diagonal_real(&[k as f64, 1.0, -2.0, 0.5 * k as f64]))
                .collect(),
        );
        let before = p.state(&b).unwrap();
        let after = p.state(&p.apply(&b).unwrap()).unwrap();
        assert!((before - after).norm() < 1e-14);
    }

    #[test]
    fn identity_components_average_allowed_columns() {
        let space = NcSpace::diagonal(&[0.5, 0.5]).unwrap();
        let sys = TransitionSystem::nevo_stein(2).unwrap();
        let p = BufetovOperator::new(sys, vec![CpMap::identity(&space); 4]).unwrap();
        let b = Tuple::new((0..4).map(|k| Element::diagonal_real(&[k as f64, 1.0])).collect());
        let out = p.apply(&b).unwrap();
        // Component i averages b_j over j ≠ −i, i.e. over all j except index 3 − i.
        for i in 0..4 {
            let expected: f64 = (0..4).filter(|&j| j != 3 - i).map(|j| j as f64).sum::<f64>() / 3.0;
            assert!((out.get(i).blocks()[0][(0, 0)].re - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_matrix_system_is_self_adjoint() {
        let space = NcSpace::diagonal(&[0.5, 0.5]).unwrap();
        let sys = TransitionSystem::new(vec![1, 2], DMatrix::identity(2, 2), vec![0.5, 0.5]).unwrap();
        let p = BufetovOperator::new(sys, vec![CpMap::identity(&space); 2]).unwrap();
        let ps = p.adjoint().unwrap();
        let b = Tuple::new(vec![
            Element::diagonal_real(&[1.0, 2.0]),
            Element::diagonal_real(&[3.0, -1.0]),
        ]);
        assert!(p.apply(&b).unwrap().distance(&ps.apply(&b).unwrap()) < 1e-15);
    }

    #[test]
    fn trivial_action_adjoint_transposes_weights() {
        // With σ = id and uniform p(i): P*(b)_i = Σ_j p(ji) b_j.
        let space = NcSpace::diagonal(&[0.5, 0.5]).unwrap();
        let action = FreeAction::trivial(&space, 2).unwrap();
        let ps = BufetovOperator::from_action(&action).unwrap().adjoint().unwrap();
        let b = Tuple::new(
            (0..4)
                .map(|k| Element::diagonal_real(&[k as f64 + 0.5, -(k as f64)]))
                .collect(),
        );
        let out = ps.apply(&b).unwrap();
        let sys = action.system().unwrap();
        for i in 0..4 {
            let mut expected = b.get(0).scale_re(0.0);
            for j in 0..4 {
                expected.axpy(C64::new(sys.p(j, i), 0.0), b.get(j));
            }
            assert!(out.get(i).distance(&expected) < 1e-15);
        }
    }

    #[test]
    fn fast_sphere_edge_cases() {
        let (space, _, p) = perm_setup();
        let x = Element::diagonal_real(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(p.sphere_average_fast(0, &x).unwrap(), x);
        assert!(p.cesaro_average(1, &x).unwrap().distance(&x) < 1e-15);
        assert!(p.cesaro_average(0, &x).is_err());
        let one = space.identity();
        assert!(p.sphere_average_fast(7, &one).unwrap().distance(&one) < 1e-14);
        assert!(p.cesaro_average(5, &one).unwrap().distance(&one) < 1e-14);
    }

    #[test]
    fn b_space_state() {
        let (_, _, p) = perm_setup();
        let bs = p.b_space().unwrap();
        assert_eq!(bs.structure().num_blocks(), 16);
        let q = p.to_cp_map().unwrap();
        assert!(q.check_stationary().preserves_state);
    }
}
