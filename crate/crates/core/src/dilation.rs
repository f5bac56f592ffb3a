//! Finite stages of the path-algebra dilation of the Markov operator `P`.
//!
//! Level `n` is `B_n = A^{I(n+1)}`, tuples indexed by the words of length `n + 1`, with
//! the state `φ_n(b) = Σ_w p_n(w) φ(b_w)`. Level `0` is `B` itself. The maps between
//! levels are structured index rewirings:
//!
//! - `α_n(b)_w = b_{w_0⋯w_{n−1}}` (extend in time),
//! - `β_n(b)_w = σ_{w_0}(b_{w_1⋯w_n})` (shift, then act),
//! - `α_n*(b)_v = Σ_j p(v_{n−1} j) b_{vj}`,
//! - `β_n*(b)_v = (1/p(v_0)) Σ_i p(i) p(i v_0) σ_i^{−1}(b_{iv})`,
//!
//! and `J_q(b)_w = σ_{w_0}∘⋯∘σ_{w_{q−1}}(b_{w_q})` embeds `B` at time `q`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::free::{BufetovOperator, FreeAction, TransitionSystem};
use crate::maps::{state_pairing_residual, CpMap};
use crate::report::CheckRecord;
use crate::space::{Element, MatrixUnit, NcSpace};
use crate::subalgebra::Subalgebra;
use crate::tuple::Tuple;
use crate::{C64, DILATION_TOL};

/// Default cap on the number of components of the working level.
pub const DEFAULT_COMPONENT_CAP: u128 = 10_000;

/// Tolerance of the structural relations (intertwining, state compatibility, pairings).
pub const STRUCTURE_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
struct Level {
    words: Vec<Vec<usize>>,
    weights: Vec<f64>,
    /// Index at level `n−1` of `w_0⋯w_{n−1}`.
    prefix: Vec<usize>,
    /// Index at level `n−1` of `w_1⋯w_n`.
    suffix: Vec<usize>,
    /// For each word `v` of level `n−1`: `(j, index of vj)`.
    children: Vec<Vec<(usize, usize)>>,
    /// For each word `v` of level `n−1`: `(i, index of iv)`.
    left: Vec<Vec<(usize, usize)>>,
    space: NcSpace,
}

#[derive(Clone, Debug)]
pub struct DilationTower {
    action: FreeAction,
    system: TransitionSystem,
    levels: Vec<Level>,
}

impl DilationTower {
    /// The tower of depth `r` over the non-backtracking system of the action.
    pub fn new(action: &FreeAction, depth: usize) -> Result<Self> {
        Self::with_cap(action, depth, DEFAULT_COMPONENT_CAP)
    }

    pub fn with_cap(action: &FreeAction, depth: usize, cap: u128) -> Result<Self> {
        let system = action.system()?;
        let top = system.count_words(depth + 1);
        if top > cap {
            return Err(Error::ResourceCap {
                what: format!("dilation level {depth}"),
                requested: top,
                cap,
            });
        }
        let mut levels: Vec<Level> = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let ws = system.words(n + 1)?;
            let space = action.space().weighted_sum(&ws.weights)?;
            let mut level = Level {
                words: ws.words,
                weights: ws.weights,
                prefix: Vec::new(),
                suffix: Vec::new(),
                children: Vec::new(),
                left: Vec::new(),
                space,
            };
            if n > 0 {
                let prev = &levels[n - 1];
                let prev_index: HashMap<&[usize], usize> =
                    prev.words.iter().enumerate().map(|(k, w)| (w.as_slice(), k)).collect();
                level.children = vec![Vec::new(); prev.words.len()];
                level.left = vec![Vec::new(); prev.words.len()];
                for (k, w) in level.words.iter().enumerate() {
                    let p = prev_index[&w[..n]];
                    let s = prev_index[&w[1..]];
                    level.prefix.push(p);
                    level.suffix.push(s);
                    level.children[p].push((w[n], k));
                    level.left[s].push((w[0], k));
                }
            }
            levels.push(level);
        }
        Ok(DilationTower {
            action: action.clone(),
            system,
            levels,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn action(&self) -> &FreeAction {
        &self.action
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.system
    }

    pub fn base(&self) -> &NcSpace {
        self.action.space()
    }

    /// `|I(n+1)|`.
    pub fn level_len(&self, n: usize) -> usize {
        self.levels[n].words.len()
    }

    pub fn level_words(&self, n: usize) -> &[Vec<usize>] {
        &self.levels[n].words
    }

    pub fn level_weights(&self, n: usize) -> &[f64] {
        &self.levels[n].weights
    }

    /// `(B_n, φ_n)` as one block algebra.
    pub fn level_space(&self, n: usize) -> &NcSpace {
        &self.levels[n].space
    }

    pub fn bufetov(&self) -> Result<BufetovOperator> {
        BufetovOperator::from_action(&self.action)
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.depth() {
            return Err(Error::IndexOutOfRange(format!(
                "level {n} above depth {}",
                self.depth()
            )));
        }
        Ok(())
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth() {
            return Err(Error::IndexOutOfRange(format!(
                "map index {n} outside 1..={}",
                self.depth()
            )));
        }
        Ok(())
    }

    fn check_elem(&self, n: usize, b: &Tuple) -> Result<()> {
        b.check(self.base(), self.level_len(n))
    }

    /// `φ_n(b)`.
    pub fn state(&self, n: usize, b: &Tuple) -> Result<C64> {
        self.check_level(n)?;
        self.check_elem(n, b)?;
        Ok(b.components()
            .iter()
            .zip(&self.levels[n].weights)
            .map(|(c, w)| self.base().state_unchecked(c) * *w)
            .sum())
    }

    /// `α_n : B_{n−1} → B_n`.
    pub fn alpha(&self, n: usize, b: &Tuple) -> Result<Tuple> {
        self.check_step(n)?;
        self.check_elem(n - 1, b)?;
        Ok(self.alpha_raw(n, b))
    }

    fn alpha_raw(&self, n: usize, b: &Tuple) -> Tuple {
        Tuple::new(self.levels[n].prefix.iter().map(|&p| b.get(p).clone()).collect())
    }

    /// `β_n : B_{n−1} → B_n`.
    pub fn beta(&self, n: usize, b: &Tuple) -> Result<Tuple> {
        self.check_step(n)?;
        self.check_elem(n - 1, b)?;
        Ok(self.beta_raw(n, b))
    }

    fn beta_raw(&self, n: usize, b: &Tuple) -> Tuple {
        let level = &self.levels[n];
        let maps = self.action.maps();
        Tuple::new(
            level
                .words
                .iter()
                .zip(&level.suffix)
                .map(|(w, &s)| maps[w[0]].apply_unchecked(b.get(s)))
                .collect(),
        )
    }

    /// `α_n* : B_n → B_{n−1}`.
    pub fn alpha_star(&self, n: usize, b: &Tuple) -> Result<Tuple> {
        self.check_step(n)?;
        self.check_elem(n, b)?;
        Ok(self.alpha_star_raw(n, b))
    }

    fn alpha_star_raw(&self, n: usize, b: &Tuple) -> Tuple {
        let prev = &self.levels[n - 1];
        let level = &self.levels[n];
        let zero = self.base().zero();
        Tuple::new(
            prev.words
                .iter()
                .zip(&level.children)
                .map(|(v, kids)| {
                    let last = *v.last().unwrap();
                    let mut acc = zero.clone();
                    for &(j, k) in kids {
                        acc.axpy(C64::new(self.system.p(last, j), 0.0), b.get(k));
                    }
                    acc
                })
                .collect(),
        )
    }

    /// `β_n* : B_n → B_{n−1}`.
    pub fn beta_star(&self, n: usize, b: &Tuple) -> Result<Tuple> {
        self.check_step(n)?;
        self.check_elem(n, b)?;
        Ok(self.beta_star_raw(n, b))
    }

    fn beta_star_raw(&self, n: usize, b: &Tuple) -> Tuple {
        let prev = &self.levels[n - 1];
        let level = &self.levels[n];
        let maps = self.action.maps();
        let pi = self.system.stationary();
        let zero = self.base().zero();
        Tuple::new(
            prev.words
                .iter()
                .zip(&level.left)
                .map(|(v, ext)| {
                    let v0 = v[0];
                    let mut acc = zero.clone();
                    for &(i, k) in ext {
                        let w = pi[i] * self.system.p(i, v0) / pi[v0];
                        let inv = &maps[self.action.inverse_index(i)];
                        acc.axpy(C64::new(w, 0.0), &inv.apply_unchecked(b.get(k)));
                    }
                    acc
                })
                .collect(),
        )
    }

    /// `α_r ∘ ⋯ ∘ α_{n+1}` from level `n` to level `r`.
    fn alpha_up(&self, n: usize, r: usize, b: &Tuple) -> Tuple {
        (n + 1..=r).fold(b.clone(), |c, k| self.alpha_raw(k, &c))
    }

    fn alpha_down(&self, r: usize, n: usize, c: &Tuple) -> Tuple {
        (n + 1..=r).rev().fold(c.clone(), |c, k| self.alpha_star_raw(k, &c))
    }

    fn beta_up(&self, n: usize, r: usize, b: &Tuple) -> Tuple {
        (n + 1..=r).fold(b.clone(), |c, k| self.beta_raw(k, &c))
    }

    fn beta_down(&self, r: usize, n: usize, c: &Tuple) -> Tuple {
        (n + 1..=r).rev().fold(c.clone(), |c, k| self.beta_star_raw(k, &c))
    }

    fn check_qr(&self, q: usize, r: usize) -> Result<()> {
        if q > r || r > self.depth() {
            return Err(Error::IndexOutOfRange(format!(
                "need q <= r <= {}, got q = {q}, r = {r}",
                self.depth()
            )));
        }
        Ok(())
    }

    /// `J_q(b)_w = σ_{w_0}∘⋯∘σ_{w_{q−1}}(b_{w_q})` at level `r`, by the direct formula.
    pub fn embed_j(&self, q: usize, r: usize, b: &Tuple) -> Result<Tuple> {
        self.check_qr(q, r)?;
        self.check_elem(0, b)?;
        let maps = self.action.maps();
        Ok(Tuple::new(
            self.levels[r]
                .words
                .iter()
                .map(|w| {
                    w[..q]
                        .iter()
                        .rev()
                        .fold(b.get(w[q]).clone(), |acc, &i| maps[i].apply_unchecked(&acc))
                })
                .collect(),
        ))
    }

    /// `J_q = α_r ∘ ⋯ ∘ α_{q+1} ∘ β_q ∘ ⋯ ∘ β_1`.
    pub fn embed_j_composed(&self, q: usize, r: usize, b: &Tuple) -> Result<Tuple> {
        self.check_qr(q, r)?;
        self.check_elem(0, b)?;
        Ok(self.alpha_up(q, r, &self.beta_up(0, q, b)))
    }

    /// `E_{n]}` on `B_r`: `α_r∘⋯∘α_{n+1}∘α_{n+1}*∘⋯∘α_r*`.
    pub fn expect_past(&self, n: usize, r: usize, c: &Tuple) -> Result<Tuple> {
        self.check_qr(n, r)?;
        self.check_elem(r, c)?;
        Ok(self.alpha_up(n, r, &self.alpha_down(r, n, c)))
    }

    /// `E_{[n}` on `B_r`: `β_c ∘ β_c*` with `β_c = β_r∘⋯∘β_{r−n+1}`.
    pub fn expect_future(&self, n: usize, r: usize, c: &Tuple) -> Result<Tuple> {
        self.check_qr(n, r)?;
        self.check_elem(r, c)?;
        Ok(self.beta_up(r - n, r, &self.beta_down(r, r - n, c)))
    }

    /// Generators of `B` as a *-algebra: in each component, the matrix units `e_ij` with
    /// `i <= j` of each block. Including the diagonal units keeps the products found by
    /// [`Subalgebra::generated_by`] well separated when the action is close to diagonal.
    fn base_generators(&self) -> Vec<Tuple> {
        let s = self.base().structure();
        let len = self.system.len();
        let zero = self.base().zero();
        let mut out = Vec::new();
        for c in 0..len {
            for (block, &d) in s.dims().iter().enumerate() {
                let units = (0..d).flat_map(|row| (row..d).map(move |col| MatrixUnit { block, row, col }));
                for u in units {
                    let mut comps = vec![zero.clone(); len];
                    comps[c] = Element::matrix_unit(s, u);
                    out.push(Tuple::new(comps));
                }
            }
        }
        out
    }

    fn generated(&self, r: usize, times: std::ops::RangeInclusive<usize>) -> Result<Subalgebra> {
        let gens = self.base_generators();
        let mut elems = Vec::new();
        for q in times {
            for g in &gens {
                elems.push(self.embed_j(q, r, g)?.to_element());
            }
        }
        let space = self.level_space(r);
        Subalgebra::generated_by(space, &elems, space.vec_dim())
    }

    /// The subalgebra of `B_r` generated by `J_n(B), …, J_r(B)`.
    pub fn future_subalgebra(&self, n: usize, r: usize) -> Result<Subalgebra> {
        self.check_qr(n, r)?;
        self.generated(r, n..=r)
    }

    /// The subalgebra of `B_r` generated by `J_0(B), …, J_n(B)`.
    pub fn past_subalgebra(&self, n: usize, r: usize) -> Result<Subalgebra> {
        self.check_qr(n, r)?;
        self.generated(r, 0..=n)
    }

    /// `E_{[n}` computed as the GNS-orthogonal projection onto [`future_subalgebra`](Self::future_subalgebra).
    pub fn expect_future_by_projection(&self, sub: &Subalgebra, c: &Tuple) -> Result<Tuple> {
        let r = self
            .levels
            .iter()
            .position(|l| l.space.same_as(sub.ambient()))
            .ok_or_else(|| Error::Precondition("subalgebra does not live on a tower level".into()))?;
        self.check_elem(r, c)?;
        let x = sub.project(&c.to_element());
        Tuple::from_element(&x, self.base().structure(), self.level_len(r))
    }

    /// Residual of `β^q ∘ E_{n]} = E_{n+q]} ∘ β^q` over a basis of `B_{r−q}`, where `β^q`
    /// is `β_r ∘ ⋯ ∘ β_{r−q+1}`.
    pub fn check_covariance(&self, n: usize, q: usize, r: usize) -> Result<CheckRecord> {
        if n + q > r || r > self.depth() {
            return Err(Error::IndexOutOfRange(format!("need n + q <= r <= {}", self.depth())));
        }
        let m = r - q;
        let mut worst: f64 = 0.0;
        for x in Tuple::basis(self.base(), self.level_len(m)) {
            let lhs = self.beta_up(m, r, &self.alpha_up(n, m, &self.alpha_down(m, n, &x)));
            let shifted = self.beta_up(m, r, &x);
            let rhs = self.alpha_up(n + q, r, &self.alpha_down(r, n + q, &shifted));
            worst = worst.max(lhs.relative_distance(&rhs));
        }
        Ok(CheckRecord::new(
            "covariance",
            vec![n as i64, q as i64, r as i64],
            worst,
            DILATION_TOL,
        ))
    }

    /// Dense matrix of `α_n` between the materialized level spaces.
    pub fn alpha_map(&self, n: usize) -> Result<CpMap> {
        self.check_step(n)?;
        self.dense(n - 1, n, |t| self.alpha_raw(n, t))
    }

    pub fn beta_map(&self, n: usize) -> Result<CpMap> {
        self.check_step(n)?;
        self.dense(n - 1, n, |t| self.beta_raw(n, t))
    }

    pub fn alpha_star_map(&self, n: usize) -> Result<CpMap> {
        self.check_step(n)?;
        self.dense(n, n - 1, |t| self.alpha_star_raw(n, t))
    }

    pub fn beta_star_map(&self, n: usize) -> Result<CpMap> {
        self.check_step(n)?;
        self.dense(n, n - 1, |t| self.beta_star_raw(n, t))
    }

    fn dense(&self, from: usize, to: usize, f: impl Fn(&Tuple) -> Tuple) -> Result<CpMap> {
        let base = self.base().structure().clone();
        let len = self.level_len(from);
        CpMap::from_fn(self.level_space(from).clone(), self.level_space(to).clone(), |x| {
            let t = Tuple::from_element(x, &base, len).expect("level shape");
            f(&t).to_element()
        })
    }

    /// Residual of `Pⁿ = α_1*∘⋯∘α_n*∘β_n∘⋯∘β_1` over a basis of `B`.
    pub fn chain_formula_residual(&self, n: usize) -> Result<f64> {
        self.check_level(n)?;
        let p = self.bufetov()?;
        let mut worst: f64 = 0.0;
        for b in Tuple::basis(self.base(), self.system.len()) {
            let chain = self.alpha_down(n, 0, &self.beta_up(0, n, &b));
            worst = worst.max(chain.relative_distance(&p.power(n, &b)?));
        }
        Ok(worst)
    }

    /// Structural relations: size law, intertwining, state compatibility, the adjoint
    /// pairings (checked on the dense matrices) and `α*α = β*β = id`.
    pub fn structure_suite(&self) -> Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        let r = self.depth();
        for n in 0..=r {
            let expected = self.system.count_words(n + 1);
            out.push(CheckRecord::flag(
                "level size",
                vec![n as i64],
                self.level_len(n) as u128 == expected,
            ));
            let total: f64 = self.level_weights(n).iter().sum();
            out.push(CheckRecord::new(
                "level weights sum",
                vec![n as i64],
                (total - 1.0).abs(),
                1e-12,
            ));
        }
        for n in 1..=r {
            let basis = Tuple::basis(self.base(), self.level_len(n - 1));
            let (mut ab, mut sa, mut sb, mut aa, mut bb) = (0f64, 0f64, 0f64, 0f64, 0f64);
            for b in &basis {
                if n < r {
                    let lhs = self.alpha_raw(n + 1, &self.beta_raw(n, b));
                    let rhs = self.beta_raw(n + 1, &self.alpha_raw(n, b));
                    ab = ab.max(lhs.relative_distance(&rhs));
                }
                let phi = self.state(n - 1, b)?;
                sa = sa.max((self.state(n, &self.alpha_raw(n, b))? - phi).norm());
                sb = sb.max((self.state(n, &self.beta_raw(n, b))? - phi).norm());
                aa = aa.max(self.alpha_star_raw(n, &self.alpha_raw(n, b)).relative_distance(b));
                bb = bb.max(self.beta_star_raw(n, &self.beta_raw(n, b)).relative_distance(b));
            }
            let idx = vec![n as i64];
            if n < r {
                out.push(CheckRecord::new(
                    "intertwining alpha beta",
                    idx.clone(),
                    ab,
                    STRUCTURE_TOL,
                ));
            }
            out.push(CheckRecord::new(
                "state compatibility alpha",
                idx.clone(),
                sa,
                STRUCTURE_TOL,
            ));
            out.push(CheckRecord::new(
                "state compatibility beta",
                idx.clone(),
                sb,
                STRUCTURE_TOL,
            ));
            out.push(CheckRecord::new("alpha* alpha = id", idx.clone(), aa, STRUCTURE_TOL));
            out.push(CheckRecord::new("beta* beta = id", idx.clone(), bb, STRUCTURE_TOL));
            let am = self.alpha_map(n)?;
            let bm = self.beta_map(n)?;
            out.push(CheckRecord::new(
                "alpha* pairing",
                idx.clone(),
                state_pairing_residual(&am, &self.alpha_star_map(n)?),
                STRUCTURE_TOL,
            ));
            out.push(CheckRecord::new(
                "beta* pairing",
                idx,
                state_pairing_residual(&bm, &self.beta_star_map(n)?),
                STRUCTURE_TOL,
            ));
        }
        // φ_r ∘ α_r ∘ ⋯ ∘ α_{n+1} = φ_n.
        for n in 0..r {
            let mut worst: f64 = 0.0;
            for b in Tuple::basis(self.base(), self.level_len(n)) {
                let up = self.alpha_up(n, r, &b);
                worst = worst.max((self.state(r, &up)? - self.state(n, &b)?).norm());
            }
            out.push(CheckRecord::new(
                "state chain",
                vec![n as i64, r as i64],
                worst,
                STRUCTURE_TOL,
            ));
        }
        Ok(out)
    }

    /// The Markov-property equalities at the working level `r = depth`:
    /// `E_{n]}∘J_q = J_n∘P^{q−n}`, `E_{[n}∘J_0 = J_n∘(P*)ⁿ`, both `J_q` code paths,
    /// covariance, and the `Pⁿ` chain formula, all over full bases.
    pub fn theorem_suite(&self) -> Result<Vec<CheckRecord>> {
        let r = self.depth();
        let p = self.bufetov()?;
        let ps = p.adjoint()?;
        let basis = Tuple::basis(self.base(), self.system.len());
        let mut out = Vec::new();
        for q in 0..=r {
            let mut worst: f64 = 0.0;
            for b in &basis {
                worst = worst.max(
                    self.embed_j(q, r, b)?
                        .relative_distance(&self.embed_j_composed(q, r, b)?),
                );
            }
            out.push(CheckRecord::new(
                "J_q direct vs composed",
                vec![q as i64, r as i64],
                worst,
                1e-12,
            ));
        }
        for n in 0..=r {
            for q in n..=r {
                let mut worst: f64 = 0.0;
                for b in &basis {
                    let lhs = self.expect_past(n, r, &self.embed_j(q, r, b)?)?;
                    let rhs = self.embed_j(n, r, &p.power(q - n, b)?)?;
                    worst = worst.max(lhs.relative_distance(&rhs));
                }
                out.push(CheckRecord::new(
                    "E_past J_q = J_n P^(q-n)",
                    vec![n as i64, q as i64, r as i64],
                    worst,
                    DILATION_TOL,
                ));
            }
        }
        for n in 0..=r {
            let mut worst: f64 = 0.0;
            for b in &basis {
                let lhs = self.expect_future(n, r, &self.embed_j(0, r, b)?)?;
                let rhs = self.embed_j(n, r, &ps.power(n, b)?)?;
                worst = worst.max(lhs.relative_distance(&rhs));
            }
            out.push(CheckRecord::new(
                "E_future J_0 = J_n (P*)^n",
                vec![n as i64, r as i64],
                worst,
                DILATION_TOL,
            ));
        }
        for n in 0..=r {
            for q in 0..=(r - n) {
                out.push(self.check_covariance(n, q, r)?);
            }
        }
        for n in 0..=r {
            out.push(CheckRecord::new(
                "P^n chain formula",
                vec![n as i64],
                self.chain_formula_residual(n)?,
                1e-10,
            ));
        }
        Ok(out)
    }

    /// Agreement of the two `E_{[n}` code paths on a full basis of `B_r`, and modular
    /// invariance of the generated past and future subalgebras.
    pub fn dual_path_suite(&self) -> Result<Vec<CheckRecord>> {
        let r = self.depth();
        let basis = Tuple::basis(self.base(), self.level_len(r));
        let mut out = Vec::new();
        // J_0, …, J_r generate both the future algebra at 0 and the past algebra at r.
        let full = self.future_subalgebra(0, r)?;
        for n in 0..=r {
            let sub = if n == 0 {
                full.clone()
            } else {
                self.future_subalgebra(n, r)?
            };
            let mut worst: f64 = 0.0;
            for c in &basis {
                let a = self.expect_future(n, r, c)?;
                let b = self.expect_future_by_projection(&sub, c)?;
                worst = worst.max(a.relative_distance(&b));
            }
            let idx = vec![n as i64, r as i64];
            out.push(CheckRecord::new(
                "E_future beta path vs projection",
                idx.clone(),
                worst,
                DILATION_TOL,
            ));
            out.push(CheckRecord::new(
                "future subalgebra modular invariance",
                idx.clone(),
                sub.modular_invariance_residual(),
                1e-10,
            ));
            let past = if n == r {
                full.clone()
            } else {
                self.past_subalgebra(n, r)?
            };
            out.push(CheckRecord::new(
                "past subalgebra modular invariance",
                idx,
                past.modular_invariance_residual(),
                1e-10,
            ));
        }
        Ok(out)
    }
}
