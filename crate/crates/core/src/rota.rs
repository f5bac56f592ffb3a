//! Identities between `P`, `P*` and the symmetry `U`, the alternating sequence
//! `Pⁿ(P*)ⁿ`, and limits of even sphere averages and Cesàro means.
//!
//! For the non-backtracking system on `F_d`, with `c₁ = (2d−2)/(2d−1)` and
//! `c₂ = 1/(2d−1)`:
//!
//! ```text
//! U P* U = P
//! P* P = c₁ U P + c₂ Id
//! (P*)ⁿ Pⁿ = c₁ U P^{2n−1} + c₂ (P*)^{n−1} P^{n−1}
//! P^{2n−1} = ((2d−1)/(2d−2)) Pⁿ (P*)ⁿ U − (1/(2d−2)) P^{n−1} (P*)^{n−1} U
//! s₁∘sₙ = ((2d−1)/(2d)) s_{n+1} + (1/(2d)) s_{n−1}
//! ```
//!
//! The third line gives `Pⁿ(P*)ⁿ x = c₁ P^{2n−1}(U x) + c₂ P^{n−1}(P*)^{n−1} x`, so the
//! whole alternating sequence costs one running power of `P`.

use crate::error::{Error, Result};
use crate::free::{sphere_average_brute, BufetovOperator, FreeAction};
use crate::maps::CpMap;
use crate::report::CheckRecord;
use crate::series::{ConvergenceSeries, SeriesPoint};
use crate::space::{Element, LpIndex, NcSpace};
use crate::subalgebra::{conditional_expectation, fixed_point_algebra};
use crate::tuple::Tuple;
use crate::IDENTITY_TOL;

/// Default stopping tolerance for limit experiments.
pub const DEFAULT_TOL_CONV: f64 = 1e-8;

/// `U(b)_i = σ_i(b_{−i})` on `B = A^{2d}`.
#[derive(Clone, Debug)]
pub struct SymmetryU {
    action: FreeAction,
}

impl SymmetryU {
    pub fn new(action: &FreeAction) -> Self {
        SymmetryU { action: action.clone() }
    }

    pub fn apply(&self, b: &Tuple) -> Result<Tuple> {
        let m = 2 * self.action.d();
        b.check(self.action.space(), m)?;
        let maps = self.action.maps();
        Ok(Tuple::new(
            (0..m)
                .map(|i| maps[i].apply_unchecked(b.get(self.action.inverse_index(i))))
                .collect(),
        ))
    }
}

fn coefficients(d: usize) -> (f64, f64) {
    let m = 2.0 * d as f64;
    ((m - 2.0) / (m - 1.0), 1.0 / (m - 1.0))
}

fn require_free(p: &BufetovOperator) -> Result<usize> {
    match p.system().free_rank() {
        Some(d) => Ok(d),
        None => Err(Error::Precondition(
            "these identities hold for the non-backtracking system only".into(),
        )),
    }
}

fn lincomb(terms: &[(f64, &Tuple)]) -> Tuple {
    let mut acc = terms[0].1.scale_re(terms[0].0);
    for (c, t) in &terms[1..] {
        acc.axpy(*c, t);
    }
    acc
}

/// Residuals of the operator identities for `n ≤ n_max` over the given samples of `B`,
/// together with `U² = id`, `φ_B∘U = φ_B` and the agreement of the closed-form `P*`
/// with the generic adjoint solver.
pub fn identity_suite(action: &FreeAction, n_max: usize, samples: &[Tuple]) -> Result<Vec<CheckRecord>> {
    let p = BufetovOperator::from_action(action)?;
    let d = require_free(&p)?;
    let ps = p.adjoint()?;
    let ps_solver = p.adjoint_by_solver()?;
    let u = SymmetryU::new(action);
    let (c1, c2) = coefficients(d);
    let k1 = (2.0 * d as f64 - 1.0) / (2.0 * d as f64 - 2.0);
    let k2 = 1.0 / (2.0 * d as f64 - 2.0);
    let di = d as i64;
    let mut out = Vec::new();

    let mut worst = [0f64; 5];
    for b in samples {
        let ub = u.apply(b)?;
        worst[0] = worst[0].max(u.apply(&ub)?.relative_distance(b));
        let phi = p.state(b)?;
        worst[1] = worst[1].max((p.state(&ub)? - phi).norm());
        let upu = u.apply(&ps.apply(&ub)?)?;
        let pb = p.apply(b)?;
        worst[2] = worst[2].max(upu.relative_distance(&pb));
        let lhs = ps.apply(&pb)?;
        let rhs = lincomb(&[(c1, &u.apply(&pb)?), (c2, b)]);
        worst[3] = worst[3].max(lhs.relative_distance(&rhs));
        worst[4] = worst[4].max(ps.apply(b)?.relative_distance(&ps_solver.apply(b)?));
    }
    out.push(CheckRecord::new("U^2 = id", vec![di], worst[0], 1e-12));
    out.push(CheckRecord::new("U preserves state", vec![di], worst[1], 1e-12));
    out.push(CheckRecord::new("U P* U = P", vec![di], worst[2], IDENTITY_TOL));
    out.push(CheckRecord::new(
        "P*P = c1 UP + c2 Id",
        vec![di],
        worst[3],
        IDENTITY_TOL,
    ));
    out.push(CheckRecord::new(
        "P* closed form vs solver",
        vec![di],
        worst[4],
        IDENTITY_TOL,
    ));

    for n in 1..=n_max {
        let (mut rec, mut odd) = (0f64, 0f64);
        for b in samples {
            // (P*)ⁿ Pⁿ b versus c₁ U P^{2n−1} b + c₂ (P*)^{n−1} P^{n−1} b.
            let pn = p.power(n, b)?;
            let lhs = ps.power(n, &pn)?;
            let prev = ps.power(n - 1, &p.power(n - 1, b)?)?;
            let rhs = lincomb(&[(c1, &u.apply(&p.power(2 * n - 1, b)?)?), (c2, &prev)]);
            rec = rec.max(lhs.relative_distance(&rhs));
            // P^{2n−1} b versus k₁ Pⁿ(P*)ⁿ U b − k₂ P^{n−1}(P*)^{n−1} U b.
            let ub = u.apply(b)?;
            let a = p.power(n, &ps.power(n, &ub)?)?;
            let c = p.power(n - 1, &ps.power(n - 1, &ub)?)?;
            let rhs = lincomb(&[(k1, &a), (-k2, &c)]);
            odd = odd.max(p.power(2 * n - 1, b)?.relative_distance(&rhs));
        }
        let idx = vec![di, n as i64];
        out.push(CheckRecord::new("(P*)^n P^n recursion", idx.clone(), rec, IDENTITY_TOL));
        out.push(CheckRecord::new("odd power formula", idx, odd, IDENTITY_TOL));
    }
    Ok(out)
}

/// Residuals of `s₁∘sₙ = a s_{n+1} + b s_{n−1}` and
/// `s₁²∘s_{2n} = a² s_{2n+2} + 2ab s_{2n} + b² s_{2n−2}` at one `n ≥ 1`, with
/// `a = (2d−1)/(2d)`, `b = 1/(2d)`, evaluated with the fast sphere averages.
pub fn spherical_recursion_check(action: &FreeAction, n: usize, x: &Element) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Precondition("the recursion needs n >= 1".into()));
    }
    let p = BufetovOperator::from_action(action)?;
    let d = require_free(&p)? as f64;
    let (a, b) = ((2.0 * d - 1.0) / (2.0 * d), 1.0 / (2.0 * d));
    let s = p.sphere_averages(2 * n + 2, x)?;
    let rel = |u: &Element, v: &Element| u.distance(v) / 1f64.max(u.frobenius_norm()).max(v.frobenius_norm());
    let lhs = p.sphere_average_fast(1, &s[n])?;
    let mut rhs = s[n + 1].scale_re(a);
    rhs.axpy((b).into(), &s[n - 1]);
    let r1 = rel(&lhs, &rhs);
    let lhs = p.sphere_average_fast(1, &p.sphere_average_fast(1, &s[2 * n])?)?;
    let mut rhs = s[2 * n + 2].scale_re(a * a);
    rhs.axpy((2.0 * a * b).into(), &s[2 * n]);
    rhs.axpy((b * b).into(), &s[2 * n - 2]);
    let r2 = rel(&lhs, &rhs);
    Ok((r1, r2))
}

/// Both sphere recursions for `1 ≤ n ≤ n_max` and the agreement of the fast and brute
/// sphere averages for `n ≤ brute_max`, over the given samples.
pub fn spherical_suite(
    action: &FreeAction,
    n_max: usize,
    brute_max: usize,
    samples: &[Element],
) -> Result<Vec<CheckRecord>> {
    let p = BufetovOperator::from_action(action)?;
    let di = action.d() as i64;
    let mut out = Vec::new();
    for n in 1..=n_max {
        let (mut r1, mut r2) = (0f64, 0f64);
        for x in samples {
            let (a, b) = spherical_recursion_check(action, n, x)?;
            r1 = r1.max(a);
            r2 = r2.max(b);
        }
        out.push(CheckRecord::new(
            "s1 s_n recursion",
            vec![di, n as i64],
            r1,
            IDENTITY_TOL,
        ));
        out.push(CheckRecord::new(
            "s1^2 s_2n recursion",
            vec![di, n as i64],
            r2,
            IDENTITY_TOL,
        ));
    }
    for n in 0..=brute_max {
        let mut worst: f64 = 0.0;
        for x in samples {
            let fast = p.sphere_average_fast(n, x)?;
            let brute = sphere_average_brute(action, n, x)?;
            worst = worst.max((&fast - &brute).op_norm());
        }
        out.push(CheckRecord::new(
            "s_n fast vs brute",
            vec![di, n as i64],
            worst,
            IDENTITY_TOL,
        ));
    }
    Ok(out)
}

/// Output of an alternating or averaging experiment.
#[derive(Clone, Debug)]
pub struct RotaRun {
    pub series: ConvergenceSeries,
    pub last: Tuple,
}

fn tuple_point(n: usize, diff: &Tuple, space: &NcSpace, weights: &[f64]) -> Result<SeriesPoint> {
    Ok(SeriesPoint {
        n,
        dist_op: diff.op_norm(),
        dist_l1: diff.lp_norm(space, weights, LpIndex::ONE)?,
        dist_l2: diff.lp_norm(space, weights, LpIndex::TWO)?,
    })
}

fn record(
    series: &mut ConvergenceSeries,
    n: usize,
    cur: &Tuple,
    prev: Option<&Tuple>,
    limit: Option<&Tuple>,
    space: &NcSpace,
    weights: &[f64],
) -> Result<()> {
    let reference = match (limit, prev) {
        (Some(l), _) => l,
        (None, Some(p)) => p,
        (None, None) => return Ok(()),
    };
    series.push(tuple_point(n, &(cur - reference), space, weights)?)
}

/// `Pⁿ(P*)ⁿ(x)` for `n = 0, …, n_max` by direct powering (`O(n²)` applications).
/// Distances are to `limit` when given, otherwise between consecutive iterates.
pub fn rota_iterate(p: &BufetovOperator, x: &Tuple, n_max: usize, limit: Option<&Tuple>) -> Result<RotaRun> {
    let ps = p.adjoint()?;
    let space = p.space();
    let weights = p.system().stationary();
    x.check(space, p.len())?;
    let mut series = ConvergenceSeries::new("rota");
    let mut down = x.clone();
    let mut prev: Option<Tuple> = None;
    let mut cur = x.clone();
    for n in 0..=n_max {
        if n > 0 {
            down = ps.apply(&down)?;
            cur = p.power(n, &down)?;
        }
        record(&mut series, n, &cur, prev.as_ref(), limit, space, weights)?;
        prev = Some(cur.clone());
    }
    Ok(RotaRun { series, last: cur })
}

/// The same sequence through `Xₙ = c₁ P^{2n−1}(U x) + c₂ X_{n−1}`: `O(n)` applications.
pub fn rota_iterate_free(action: &FreeAction, x: &Tuple, n_max: usize, limit: Option<&Tuple>) -> Result<RotaRun> {
    let p = BufetovOperator::from_action(action)?;
    let d = require_free(&p)?;
    let (c1, c2) = coefficients(d);
    let space = p.space();
    let weights = p.system().stationary();
    x.check(space, p.len())?;
    let mut power = SymmetryU::new(action).apply(x)?;
    let mut series = ConvergenceSeries::new("rota");
    let mut cur = x.clone();
    record(&mut series, 0, &cur, None, limit, space, weights)?;
    for n in 1..=n_max {
        // power holds P^{2n−3}(Ux); advance to P^{2n−1}(Ux).
        power = p.apply(&power)?;
        if n > 1 {
            power = p.apply(&power)?;
        }
        let next = lincomb(&[(c1, &power), (c2, &cur)]);
        record(&mut series, n, &next, Some(&cur), limit, space, weights)?;
        cur = next;
    }
    Ok(RotaRun { series, last: cur })
}

/// A limit experiment: the distance series, the limit candidate, and where the
/// stopping rule fired.
#[derive(Clone, Debug)]
pub struct LimitRun {
    pub series: ConvergenceSeries,
    pub limit: Element,
    pub last: Element,
    pub stopped_at: Option<usize>,
    /// The expectation onto the invariant subalgebra that produced `limit`.
    pub expectation: CpMap,
}

fn element_point(space: &NcSpace, n: usize, diff: &Element) -> Result<SeriesPoint> {
    Ok(SeriesPoint {
        n,
        dist_op: space.lp_norm(LpIndex::INFINITY, diff)?,
        dist_l1: space.lp_norm(LpIndex::ONE, diff)?,
        dist_l2: space.lp_norm(LpIndex::TWO, diff)?,
    })
}

/// The conditional expectation onto the fixed points of the even subgroup.
pub fn even_expectation(action: &FreeAction) -> Result<CpMap> {
    let sub = fixed_point_algebra(action.space(), &action.even_generators()?)?;
    conditional_expectation(action.space(), &sub)
}

/// The conditional expectation onto the `F_d`-invariant elements.
pub fn invariant_expectation(action: &FreeAction) -> Result<CpMap> {
    let sub = fixed_point_algebra(action.space(), action.maps())?;
    conditional_expectation(action.space(), &sub)
}

#[allow(clippy::too_many_arguments)]
fn run_limit(
    label: &str,
    space: &NcSpace,
    expectation: CpMap,
    x: &Element,
    n_range: std::ops::RangeInclusive<usize>,
    p: LpIndex,
    tol_conv: f64,
    mut next: impl FnMut(usize) -> Result<Element>,
) -> Result<LimitRun> {
    let limit = expectation.apply(x)?;
    let mut series = ConvergenceSeries::new(label);
    let mut stopped_at = None;
    let mut last = x.clone();
    for n in n_range {
        last = next(n)?;
        let diff = &last - &limit;
        series.push(element_point(space, n, &diff)?)?;
        if space.lp_norm(p, &diff)? < tol_conv {
            stopped_at = Some(n);
            break;
        }
    }
    Ok(LimitRun {
        series,
        limit,
        last,
        stopped_at,
        expectation,
    })
}

/// `‖s_{2n}(x) − E^{(2)}(x)‖` for `n = 0, …, n_max`, stopping once the L^p distance is
/// below `tol_conv`.
pub fn even_sphere_limit(
    action: &FreeAction,
    x: &Element,
    n_max: usize,
    p: LpIndex,
    tol_conv: f64,
) -> Result<LimitRun> {
    let op = BufetovOperator::from_action(action)?;
    let e = even_expectation(action)?;
    let mut cur = Tuple::constant(x, op.len());
    let weights = op.system().stationary().to_vec();
    run_limit("s2n", action.space(), e, x, 0..=n_max, p, tol_conv, |n| {
        if n > 0 {
            cur = op.apply_unchecked(&op.apply_unchecked(&cur));
        }
        Ok(cur.weighted_sum(&weights))
    })
}

/// `‖c_n(x) − E^{F_d}(x)‖` for `n = 1, …, n_max`, stopping as in [`even_sphere_limit`].
pub fn cesaro_limit(action: &FreeAction, x: &Element, n_max: usize, p: LpIndex, tol_conv: f64) -> Result<LimitRun> {
    let op = BufetovOperator::from_action(action)?;
    let e = invariant_expectation(action)?;
    let mut cur = Tuple::constant(x, op.len());
    let mut sum = cur.clone();
    let weights = op.system().stationary().to_vec();
    run_limit("cesaro", action.space(), e, x, 1..=n_max, p, tol_conv, |n| {
        if n > 1 {
            cur = op.apply_unchecked(&cur);
            sum.axpy(1.0, &cur);
        }
        Ok(sum.weighted_sum(&weights).scale_re(1.0 / n as f64))
    })
}
