use crate::error::{Error, Result};
use crate::free::system::{TransitionSystem, DEFAULT_WORD_CAP};
use crate::maps::CpMap;
use crate::space::{Element, NcSpace};
use crate::tuple::Tuple;
use crate::C64;

const INVERSE_TOL: f64 = 1e-11;

/// Stationary automorphisms `σ_{−d}, …, σ_{−1}, σ_1, …, σ_d` with `σ_{−i} = σ_i^{−1}`,
/// stored in the index order of [`TransitionSystem::nevo_stein`].
#[derive(Clone, Debug)]
pub struct FreeAction {
    space: NcSpace,
    d: usize,
    sigmas: Vec<CpMap>,
}

impl FreeAction {
    /// Builds the action from `σ_1, …, σ_d`; inverses are computed by matrix inversion.
    pub fn from_generators(space: &NcSpace, gens: Vec<CpMap>) -> Result<Self> {
        let d = gens.len();
        if d == 0 {
            return Err(Error::Precondition("a free action needs at least one generator".into()));
        }
        let mut inverses = Vec::with_capacity(d);
        for (k, g) in gens.iter().enumerate() {
            if !g.source().same_as(space) || !g.target().same_as(space) {
                return Err(crate::error::shape_mismatch(space.structure(), g.source().structure()));
            }
            let st = g.check_stationary();
            if !st.is_stationary() {
                return Err(Error::Precondition(format!(
                    "generator {} is not stationary (state {:e}, modular {:e})",
                    k + 1,
                    st.state_residual,
                    st.modular_residual
                )));
            }
            let m = g.multiplicativity_residual();
            if m > INVERSE_TOL || !g.is_unital() {
                return Err(Error::Precondition(format!(
                    "generator {} is not a unital homomorphism (residual {m:e})",
                    k + 1
                )));
            }
            inverses.push(g.inverse()?);
        }
        // Index order: −d, …, −1, 1, …, d.
        let mut sigmas: Vec<CpMap> = inverses.into_iter().rev().collect();
        sigmas.extend(gens);
        let action = FreeAction {
            space: space.clone(),
            d,
            sigmas,
        };
        for i in 0..d {
            let r = action.sigmas[i]
                .compose(&action.sigmas[2 * d - 1 - i])?
                .distance(&CpMap::identity(space));
            if r > INVERSE_TOL {
                return Err(Error::VerificationFailed {
                    what: "σ_i ∘ σ_{−i} = id".into(),
                    residual: r,
                });
            }
        }
        Ok(action)
    }

    /// `σ_k(x) = u_k x u_k*`.
    pub fn from_unitaries(space: &NcSpace, unitaries: &[Element]) -> Result<Self> {
        let gens = unitaries
            .iter()
            .map(|u| CpMap::conjugation(space, u))
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(space, gens)
    }

    /// Every generator acts as the identity.
    pub fn trivial(space: &NcSpace, d: usize) -> Result<Self> {
        Self::from_generators(space, vec![CpMap::identity(space); d])
    }

    pub fn space(&self) -> &NcSpace {
        &self.space
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// All `2d` maps in index order.
    pub fn maps(&self) -> &[CpMap] {
        &self.sigmas
    }

    /// `σ_label` for `label ∈ {−d,…,−1,1,…,d}`.
    pub fn sigma(&self, label: i64) -> Result<&CpMap> {
        let d = self.d as i64;
        let idx = match label {
            l if (-d..0).contains(&l) => l + d,
            l if (1..=d).contains(&l) => l + d - 1,
            _ => return Err(Error::IndexOutOfRange(format!("generator label {label}"))),
        };
        Ok(&self.sigmas[idx as usize])
    }

    /// Index of `σ_{−i}` given the index of `σ_i`.
    pub fn inverse_index(&self, idx: usize) -> usize {
        2 * self.d - 1 - idx
    }

    /// The non-backtracking transition system on the generators.
    pub fn system(&self) -> Result<TransitionSystem> {
        TransitionSystem::nevo_stein(self.d)
    }

    /// Maps generating the even subgroup: `σ_i∘σ_j` for `j ≠ −i`.
    pub fn even_generators(&self) -> Result<Vec<CpMap>> {
        let m = 2 * self.d;
        let mut out = Vec::with_capacity(m * (m - 1));
        for i in 0..m {
            for j in 0..m {
                if j != self.inverse_index(i) {
                    out.push(self.sigmas[i].compose(&self.sigmas[j])?);
                }
            }
        }
        Ok(out)
    }
}

/// `P_w(x) = P_{w_0}(P_{w_1}(⋯ P_{w_{n−1}}(x)))`.
fn apply_word(maps: &[CpMap], word: &[usize], x: &Element) -> Element {
    word.iter()
        .rev()
        .fold(x.clone(), |acc, &i| maps[i].apply_unchecked(&acc))
}

/// `Σ_{w∈I(n)} p_{n−1}(w) P_w(x)` by enumeration, in canonical word order.
pub fn word_average_brute(
    system: &TransitionSystem,
    maps: &[CpMap],
    n: usize,
    x: &Element,
    cap: u128,
) -> Result<Element> {
    check_maps(system, maps, x)?;
    let ws = system.words_capped(n, cap)?;
    let mut acc = x.scale_re(0.0);
    for (w, p) in ws.words.iter().zip(&ws.weights) {
        acc.axpy(C64::new(*p, 0.0), &apply_word(maps, w, x));
    }
    Ok(acc)
}

/// Componentwise right-hand side of the word formula for `Pⁿ(x̃)`:
/// `(1/p(i)) Σ_{w∈I(n), w_0=i} p_{n−1}(w) P_w(x)`, and `x̃` itself for `n = 0`.
pub fn word_components_brute(
    system: &TransitionSystem,
    maps: &[CpMap],
    n: usize,
    x: &Element,
    cap: u128,
) -> Result<Tuple> {
    check_maps(system, maps, x)?;
    let m = system.len();
    if n == 0 {
        return Ok(Tuple::constant(x, m));
    }
    let ws = system.words_capped(n, cap)?;
    let mut comps = vec![x.scale_re(0.0); m];
    for (w, p) in ws.words.iter().zip(&ws.weights) {
        comps[w[0]].axpy(C64::new(*p, 0.0), &apply_word(maps, w, x));
    }
    Ok(Tuple::new(
        comps
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.scale_re(1.0 / system.stationary()[i]))
            .collect(),
    ))
}

fn check_maps(system: &TransitionSystem, maps: &[CpMap], x: &Element) -> Result<()> {
    if maps.len() != system.len() {
        return Err(crate::error::shape_mismatch(
            format!("{} maps", system.len()),
            maps.len(),
        ));
    }
    maps.iter().try_for_each(|m| m.source().check(x))
}

/// `s_n(x) = (1/#S_n) Σ_{|w|=n} σ_w(x)` over reduced words.
pub fn sphere_average_brute(action: &FreeAction, n: usize, x: &Element) -> Result<Element> {
    action.space().check(x)?;
    let system = action.system()?;
    let ws = system.words_capped(n, DEFAULT_WORD_CAP)?;
    let inv = 1.0 / ws.words.len() as f64;
    let mut acc = x.scale_re(0.0);
    for w in &ws.words {
        acc.axpy(C64::new(inv, 0.0), &apply_word(action.maps(), w, x));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::permutation_automorphism;

    fn perm_action() -> (NcSpace, FreeAction) {
        let space = NcSpace::diagonal(&[0.25; 4]).unwrap();
        let a = permutation_automorphism(&space, &[1, 2, 3, 0]).unwrap();
        let b = permutation_automorphism(&space, &[1, 0, 3, 2]).unwrap();
        let action = FreeAction::from_generators(&space, vec![a, b]).unwrap();
        (space, action)
    }

    #[test]
    fn inverse_layout() {
        let (space, action) = perm_action();
        for l in [1i64, 2] {
            let id = action.sigma(l).unwrap().compose(action.sigma(-l).unwrap()).unwrap();
            assert!(id.distance(&CpMap::identity(&space)) < 1e-15);
        }
        assert!(action.sigma(3).is_err());
        assert!(action.sigma(0).is_err());
    }

    #[test]
    fn brute_average_of_unit_and_trivial_action() {
        let (space, action) = perm_action();
        let one = space.identity();
        for n in 0..4 {
            assert!(sphere_average_brute(&action, n, &one).unwrap().distance(&one) < 1e-14);
        }
        let trivial = FreeAction::trivial(&space, 2).unwrap();
        let x = Element::diagonal_real(&[1.0, -2.0, 0.5, 3.0]);
        for n in 0..4 {
            assert!(sphere_average_brute(&trivial, n, &x).unwrap().distance(&x) < 1e-14);
        }
    }

    #[test]
    fn brute_average_matches_permutation_orbits() {
        // Oracle: act on points directly. (σ_w x)_k = x_{π_{w_{n-1}}(⋯π_{w_0}(k))}.
        let (_, action) = perm_action();
        let gens: [[usize; 4]; 2] = [[1, 2, 3, 0], [1, 0, 3, 2]];
        let inv = |p: &[usize; 4]| {
            let mut q = [0usize; 4];
            for (k, &v) in p.iter().enumerate() {
                q[v] = k;
            }
            q
        };
        let perms = [inv(&gens[1]), inv(&gens[0]), gens[0], gens[1]];
        let x = [1.0, -2.0, 0.5, 3.0];
        let labels = [-2i64, -1, 1, 2];
        for n in 1..5 {
            let words = crate::free::enumerate_sphere(2, n, 1000).unwrap();
            let mut oracle = [0.0; 4];
            for w in &words {
                for (k, slot) in oracle.iter_mut().enumerate() {
                    let mut pt = k;
                    for l in w {
                        let idx = labels.iter().position(|v| v == l).unwrap();
                        pt = perms[idx][pt];
                    }
                    *slot += x[pt] / words.len() as f64;
                }
            }
            let got = sphere_average_brute(&action, n, &Element::diagonal_real(&x)).unwrap();
            for (k, want) in oracle.iter().enumerate() {
                assert!((got.blocks()[k][(0, 0)].re - want).abs() < 1e-14, "n = {n}");
            }
        }
    }

    #[test]
    fn rejects_non_automorphisms() {
        let space = NcSpace::diagonal(&[0.25; 4]).unwrap();
        let a = permutation_automorphism(&space, &[1, 2, 3, 0]).unwrap();
        let avg = CpMap::convex_combination(&[0.5, 0.5], &[a, CpMap::identity(&space)]).unwrap();
        assert!(FreeAction::from_generators(&space, vec![avg]).is_err());
        let skewed = NcSpace::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = permutation_automorphism(&skewed, &[1, 2, 3, 0]).unwrap();
        assert!(FreeAction::from_generators(&skewed, vec![p]).is_err());
    }
}
