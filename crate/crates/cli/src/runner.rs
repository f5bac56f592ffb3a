//! Experiment execution.
//!
//! Each selector draws its samples from the fixture's generator after the fixture
//! itself, in the order documented on the experiment function.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ncergo_core::dilation::DilationTower;
use ncergo_core::fixtures::{random_element, random_hermitian, random_stationary_map, transpose_map};
use ncergo_core::free::{sphere_average_brute, word_components_brute, BufetovOperator, FreeAction, DEFAULT_WORD_CAP};
use ncergo_core::maps::{state_pairing_residual, KMS_PAIRING_TOL, PAIRING_TOL};
use ncergo_core::report::all_pass;
use ncergo_core::rota::{self, DEFAULT_TOL_CONV};
use ncergo_core::{CheckRecord, ConvergenceSeries, CpMap, Element, LpIndex, Tuple, IDENTITY_TOL};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format, Selector};
use crate::emit;
use crate::error::CliError;
use crate::fixture::{self, Fixture};
use crate::oracles;

/// Library suites and operations an experiment can exercise. The harness self-test
/// checks that the selectors together reach all of them.
pub const SUITES: [&str; 20] = [
    "maps::check_stationary",
    "maps::adjoint_wrt_states",
    "maps::kms_adjoint",
    "maps::state_pairing_residual",
    "maps::is_completely_positive",
    "maps::lp_extension_norm_check",
    "free::sphere_average_brute",
    "free::sphere_average_fast",
    "free::word_components_brute",
    "dilation::structure_suite",
    "dilation::theorem_suite",
    "dilation::dual_path_suite",
    "rota::identity_suite",
    "rota::spherical_suite",
    "rota::rota_iterate",
    "rota::rota_iterate_free",
    "rota::even_sphere_limit",
    "rota::cesaro_limit",
    "subalgebra::fixed_point_algebra",
    "subalgebra::conditional_expectation",
];

/// In-memory result of one experiment.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub checks: Vec<CheckRecord>,
    pub series: Vec<SeriesOutcome>,
    pub suites: Vec<&'static str>,
}

#[derive(Clone, Debug)]
pub struct SeriesOutcome {
    pub series: ConvergenceSeries,
    pub stopped_at: Option<usize>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        all_pass(&self.checks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRef {
    pub label: String,
    /// File name inside the output directory.
    pub file: Option<String>,
    pub points: usize,
    pub stopped_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub checks: Vec<CheckRecord>,
    pub series: Vec<SeriesRef>,
    pub suites: Vec<String>,
    pub pass: bool,
    pub wall_time_s: f64,
}

pub const REPORT_FILE: &str = "report.json";

/// Walk length of the classical Rota oracle.
pub const ORACLE_STEPS: usize = 4000;

fn core<T>(r: ncergo_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::computation)
}

/// Builds the fixture and runs the selected experiment.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut fx = fixture::build(&cfg.fixture)?;
    let params = &cfg.params;
    match cfg.experiment {
        Selector::Identities => identities(&mut fx, params.n_max.unwrap_or(4), params.samples.unwrap_or(3)),
        Selector::Dilation => dilation(&fx, params.depth.unwrap_or(3)),
        Selector::Rota => rota_experiment(cfg, &mut fx),
        Selector::S2n | Selector::Cesaro => limit_experiment(cfg, &mut fx),
        Selector::BufetovVsBrute => bufetov_vs_brute(
            &mut fx,
            params.n_max.unwrap_or(5),
            params.samples.unwrap_or(20),
            params.tol.unwrap_or(IDENTITY_TOL),
        ),
        Selector::Adjoints => adjoints(&mut fx, params.maps.unwrap_or(20)),
        Selector::LpContraction => lp_contraction(cfg, &mut fx),
    }
}

/// Runs the experiment, writes the series and `report.json` into `out` (when given) and
/// returns the report.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>, format: Format) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let mut series = Vec::new();
    for s in &outcome.series {
        let file = match out {
            Some(dir) => {
                let name = emit::series_file_name(&s.series.label, format);
                emit::emit_series(&s.series, &dir.join(&name), format)?;
                Some(name)
            }
            None => None,
        };
        series.push(SeriesRef {
            label: s.series.label.clone(),
            file,
            points: s.series.len(),
            stopped_at: s.stopped_at,
        });
    }
    let report = RunReport {
        config: cfg.clone(),
        pass: outcome.pass(),
        checks: outcome.checks,
        series,
        suites: outcome.suites.iter().map(|s| s.to_string()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        emit::write_atomic(&dir.join(REPORT_FILE), emit::to_json(&report).as_bytes())?;
    }
    Ok(report)
}

pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("ncergo-out"))
}

fn random_tuple(fx: &mut Fixture, len: usize) -> Tuple {
    let s = fx.space.structure().clone();
    Tuple::new((0..len).map(|_| random_element(&s, &mut fx.rng)).collect())
}

fn rel(a: &Element, b: &Element) -> f64 {
    a.distance(b) / 1f64.max(b.op_norm())
}

fn map_rel(a: &CpMap, b: &CpMap) -> f64 {
    a.distance(b) / 1f64.max(b.matrix().norm())
}

fn stationarity_records(action: &FreeAction) -> Vec<CheckRecord> {
    action
        .maps()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let r = m.check_stationary();
            CheckRecord::new(
                "generator stationary",
                vec![i as i64],
                r.state_residual.max(r.modular_residual),
                IDENTITY_TOL,
            )
        })
        .collect()
}

/// Draws `samples` tuples of `2d` random elements, then `samples` random elements.
fn identities(fx: &mut Fixture, n_max: usize, samples: usize) -> Result<Outcome, CliError> {
    let len = 2 * fx.action.d();
    let tuples: Vec<Tuple> = (0..samples).map(|_| random_tuple(fx, len)).collect();
    let s = fx.space.structure().clone();
    let elems: Vec<Element> = (0..samples).map(|_| random_element(&s, &mut fx.rng)).collect();
    let mut checks = stationarity_records(&fx.action);
    checks.extend(core(rota::identity_suite(&fx.action, n_max, &tuples))?);
    checks.extend(core(rota::spherical_suite(&fx.action, n_max, n_max.min(6), &elems))?);
    Ok(Outcome {
        checks,
        series: vec![],
        suites: vec![
            "maps::check_stationary",
            "rota::identity_suite",
            "rota::spherical_suite",
            "free::sphere_average_brute",
            "free::sphere_average_fast",
        ],
    })
}

/// Draws nothing.
fn dilation(fx: &Fixture, depth: usize) -> Result<Outcome, CliError> {
    let tower = DilationTower::new(&fx.action, depth).map_err(CliError::computation)?;
    let mut checks = core(tower.structure_suite())?;
    checks.extend(core(tower.theorem_suite())?);
    checks.extend(core(tower.dual_path_suite())?);
    Ok(Outcome {
        checks,
        series: vec![],
        suites: vec![
            "dilation::structure_suite",
            "dilation::theorem_suite",
            "dilation::dual_path_suite",
        ],
    })
}

/// Test element on a commutative space from `params.x`, or a random Hermitian element
/// (one draw).
fn test_element(cfg: &ExperimentConfig, fx: &mut Fixture) -> Element {
    match &cfg.params.x {
        Some(x) => Element::diagonal_real(x),
        None => random_hermitian(fx.space.structure(), &mut fx.rng),
    }
}

fn diag_re(x: &Element) -> Vec<f64> {
    x.blocks().iter().map(|b| b[(0, 0)].re).collect()
}

/// Test tuple: component `i` is `params.x` rotated left by `i` places, or `2d` random
/// Hermitian draws.
fn test_tuple(cfg: &ExperimentConfig, fx: &mut Fixture) -> Tuple {
    let len = 2 * fx.action.d();
    match &cfg.params.x {
        Some(x) => Tuple::new(
            (0..len)
                .map(|i| {
                    let mut v = x.clone();
                    v.rotate_left(i % x.len());
                    Element::diagonal_real(&v)
                })
                .collect(),
        ),
        None => Tuple::new(
            (0..len)
                .map(|_| random_hermitian(fx.space.structure(), &mut fx.rng))
                .collect(),
        ),
    }
}

/// Rota iterates `Pⁿ(P*)ⁿ(b)`: the O(n) recursion against direct powers, and against the
/// classical limit for permutation fixtures.
fn rota_experiment(cfg: &ExperimentConfig, fx: &mut Fixture) -> Result<Outcome, CliError> {
    let n_max = cfg.params.n_max.unwrap_or(100);
    let tol = cfg.params.tol.unwrap_or(IDENTITY_TOL);
    let tol_conv = cfg.params.tol_conv.unwrap_or(DEFAULT_TOL_CONV);
    let b = test_tuple(cfg, fx);
    let p = core(BufetovOperator::from_action(&fx.action))?;
    let fast = core(rota::rota_iterate_free(&fx.action, &b, n_max, None))?;
    // Direct powering is quadratic in n, so the cross-check stops at 200.
    let m = n_max.min(200);
    let direct = core(rota::rota_iterate(&p, &b, m, None))?;
    let fast_m = if m == n_max {
        fast.last.clone()
    } else {
        core(rota::rota_iterate_free(&fx.action, &b, m, None))?.last
    };
    let mut checks = vec![CheckRecord::new(
        "rota recursion vs direct powers",
        vec![m as i64],
        fast_m.relative_distance(&direct.last),
        tol,
    )];
    let phi0 = core(p.state(&b))?;
    let phin = core(p.state(&fast.last))?;
    checks.push(CheckRecord::new(
        "rota preserves state",
        vec![n_max as i64],
        (phin - phi0).norm(),
        IDENTITY_TOL,
    ));
    if let Some(perms) = &fx.classical {
        let comps: Vec<Vec<f64>> = b.components().iter().map(diag_re).collect();
        let limit = oracles::rota_iterate(perms, &comps, ORACLE_STEPS);
        let limit = Tuple::new(limit.iter().map(|v| Element::diagonal_real(v)).collect());
        checks.push(CheckRecord::new(
            "rota vs classical oracle",
            vec![n_max as i64],
            fast.last.distance(&limit),
            tol_conv,
        ));
    }
    Ok(Outcome {
        checks,
        series: vec![SeriesOutcome {
            series: fast.series,
            stopped_at: None,
        }],
        suites: vec!["rota::rota_iterate", "rota::rota_iterate_free"],
    })
}

fn stopping_index(cfg: &ExperimentConfig) -> Result<LpIndex, CliError> {
    match cfg.params.p.as_ref().and_then(|v| v.first()) {
        Some(&p) => LpIndex::new(p).map_err(CliError::fixture),
        None => Ok(LpIndex::INFINITY),
    }
}

/// `s_{2n}` or Cesàro limits (one draw for the test element unless `params.x` is set).
fn limit_experiment(cfg: &ExperimentConfig, fx: &mut Fixture) -> Result<Outcome, CliError> {
    let even = cfg.experiment == Selector::S2n;
    let n_max = cfg.params.n_max.unwrap_or(if even { 200 } else { 2000 });
    let tol_conv = cfg.params.tol_conv.unwrap_or(DEFAULT_TOL_CONV);
    let tol = cfg.params.tol.unwrap_or(IDENTITY_TOL);
    let p = stopping_index(cfg)?;
    let x = test_element(cfg, fx);
    let action = &fx.action;
    let run = if even {
        core(rota::even_sphere_limit(action, &x, n_max, p, tol_conv))?
    } else {
        core(rota::cesaro_limit(action, &x, n_max, p, tol_conv))?
    };
    let name = if even { "s2n" } else { "cesaro" };
    let n_last = run.series.last().map_or(0, |pt| pt.n) as i64;
    let dist = core(fx.space.lp_norm(p, &(&run.last - &run.limit)))?;
    let mut checks = vec![CheckRecord::new(
        format!("{name} distance to limit"),
        vec![n_last],
        dist,
        tol_conv,
    )];
    let e = &run.expectation;
    checks.push(CheckRecord::new(
        "expectation idempotent",
        vec![],
        map_rel(&core(e.compose(e))?, e),
        tol,
    ));
    checks.push(CheckRecord::new(
        "expectation preserves state",
        vec![],
        e.state_residual(),
        tol,
    ));
    let invariance: Vec<CpMap> = if even {
        core(action.even_generators())?
    } else {
        action.maps().to_vec()
    };
    let worst = invariance
        .iter()
        .map(|g| g.apply(&run.limit).map(|y| rel(&y, &run.limit)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::computation)?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(CheckRecord::new("limit invariant", vec![], worst, tol));
    let op = core(BufetovOperator::from_action(action))?;
    if even {
        let s1 = core(op.sphere_average_fast(1, &run.limit))?;
        let s11 = core(op.sphere_average_fast(1, &s1))?;
        checks.push(CheckRecord::new(
            "s1^2 fixes the even limit",
            vec![],
            s11.distance(&run.limit),
            1e-11,
        ));
    } else {
        let e2 = core(rota::even_expectation(action))?;
        let r = rel(&core(e2.apply(&run.limit))?, &run.limit);
        checks.push(CheckRecord::new(
            "invariant limit lies in the even range",
            vec![],
            r,
            tol,
        ));
    }
    if let Some(perms) = &fx.classical {
        let (full, evens) = oracles::invariant_averages(perms, &diag_re(&x));
        let oracle = Element::diagonal_real(if even { &evens } else { &full });
        checks.push(CheckRecord::new(
            "limit vs orbit oracle",
            vec![],
            run.limit.distance(&oracle),
            tol,
        ));
    }
    Ok(Outcome {
        checks,
        series: vec![SeriesOutcome {
            series: run.series,
            stopped_at: run.stopped_at,
        }],
        suites: vec![
            if even {
                "rota::even_sphere_limit"
            } else {
                "rota::cesaro_limit"
            },
            "subalgebra::fixed_point_algebra",
            "subalgebra::conditional_expectation",
            "free::sphere_average_fast",
        ],
    })
}

/// Draws `samples` random elements. Sphere averages by word enumeration against the
/// Bufetov reduction, then the componentwise word formula on the first sample.
fn bufetov_vs_brute(fx: &mut Fixture, n_max: usize, samples: usize, tol: f64) -> Result<Outcome, CliError> {
    let s = fx.space.structure().clone();
    let xs: Vec<Element> = (0..samples).map(|_| random_element(&s, &mut fx.rng)).collect();
    let p = core(BufetovOperator::from_action(&fx.action))?;
    let mut checks = Vec::new();
    for n in 1..=n_max {
        let mut worst = 0.0f64;
        for x in &xs {
            let brute = core(sphere_average_brute(&fx.action, n, x))?;
            let fast = core(p.sphere_average_fast(n, x))?;
            worst = worst.max((&brute - &fast).op_norm());
        }
        checks.push(CheckRecord::new("s_n brute vs fast", vec![n as i64], worst, tol));
    }
    if let Some(x) = xs.first() {
        let system = core(fx.action.system())?;
        let xt = Tuple::constant(x, p.len());
        for n in 0..=n_max.min(4) {
            let brute = core(word_components_brute(&system, fx.action.maps(), n, x, DEFAULT_WORD_CAP))?;
            let fast = core(p.power(n, &xt))?;
            checks.push(CheckRecord::new(
                "word components vs power",
                vec![n as i64],
                (&brute - &fast).op_norm(),
                tol,
            ));
        }
    }
    Ok(Outcome {
        checks,
        series: vec![],
        suites: vec![
            "free::sphere_average_brute",
            "free::sphere_average_fast",
            "free::word_components_brute",
        ],
    })
}

/// Draws `count` random stationary maps of three automorphism terms each.
fn adjoints(fx: &mut Fixture, count: usize) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();
    for i in 0..count {
        let q = core(random_stationary_map(&fx.space, 3, &mut fx.rng))?;
        let qs = core(q.adjoint_wrt_states())?;
        let idx = vec![i as i64];
        checks.push(CheckRecord::new(
            "state pairing",
            idx.clone(),
            state_pairing_residual(&q, &qs),
            PAIRING_TOL,
        ));
        let qss = core(qs.adjoint_wrt_states())?;
        checks.push(CheckRecord::new(
            "adjoint involution",
            idx.clone(),
            map_rel(&qss, &q),
            IDENTITY_TOL,
        ));
        let kms = core(q.kms_adjoint())?;
        checks.push(CheckRecord::new(
            "kms adjoint equals state adjoint",
            idx.clone(),
            map_rel(&kms, &qs),
            KMS_PAIRING_TOL,
        ));
        let st = qs.check_stationary();
        checks.push(CheckRecord::flag("adjoint stationary", idx, st.is_stationary()));
    }
    if fx.space.structure().dims().iter().any(|&d| d > 1) {
        let w = core(transpose_map(&fx.space))?.is_completely_positive();
        checks.push(CheckRecord::flag("transpose flagged non-CP", vec![], !w.is_cp));
        checks.push(CheckRecord::new(
            "transpose Choi eigenvalue",
            vec![],
            w.min_eigenvalue,
            -0.1,
        ));
    }
    Ok(Outcome {
        checks,
        series: vec![],
        suites: vec![
            "maps::adjoint_wrt_states",
            "maps::kms_adjoint",
            "maps::state_pairing_residual",
            "maps::check_stationary",
            "maps::is_completely_positive",
        ],
    })
}

/// Draws `params.maps` (default 10) random stationary maps, then `params.samples`
/// (default 50) random Hermitian elements.
fn lp_contraction(cfg: &ExperimentConfig, fx: &mut Fixture) -> Result<Outcome, CliError> {
    let maps = (0..cfg.params.maps.unwrap_or(10))
        .map(|_| random_stationary_map(&fx.space, 3, &mut fx.rng))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::computation)?;
    let s = fx.space.structure().clone();
    let xs: Vec<Element> = (0..cfg.params.samples.unwrap_or(50))
        .map(|_| random_hermitian(&s, &mut fx.rng))
        .collect();
    let mut ps: Vec<LpIndex> = cfg
        .params
        .p
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 4.0])
        .into_iter()
        .map(LpIndex::new)
        .collect::<Result<_, _>>()
        .map_err(CliError::fixture)?;
    if cfg.params.p_inf.unwrap_or(true) {
        ps.push(LpIndex::INFINITY);
    }
    let tol = cfg.params.tol.unwrap_or(1e-10);
    let mut checks = Vec::new();
    for (i, q) in maps.iter().enumerate() {
        for &p in &ps {
            let r = core(q.lp_extension_norm_check(p, &xs))?;
            checks.push(CheckRecord::new(
                format!("lp contraction p={}", p.value()),
                vec![i as i64],
                r.max_ratio,
                1.0 + tol,
            ));
        }
    }
    Ok(Outcome {
        checks,
        series: vec![],
        suites: vec!["maps::lp_extension_norm_check"],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ActionSpec, FixtureSpec, Params};
    use ncergo_core::fixtures::StateMode;
    use ncergo_core::DILATION_TOL;
    use std::collections::BTreeSet;

    fn config(selector: Selector, params: Params) -> ExperimentConfig {
        ExperimentConfig {
            fixture: FixtureSpec {
                blocks: vec![2],
                state: StateMode::Random,
                d: 2,
                action: ActionSpec::RandomUnitary,
                seed: 5,
            },
            experiment: selector,
            params,
            output: Default::default(),
        }
    }

    fn small(selector: Selector) -> Params {
        let mut p = Params::default();
        match selector {
            Selector::Identities => p.n_max = Some(3),
            Selector::Dilation => p.depth = Some(1),
            Selector::Rota => {
                p.n_max = Some(10);
            }
            Selector::S2n | Selector::Cesaro => {
                p.n_max = Some(20);
                p.tol_conv = Some(1e30);
            }
            Selector::BufetovVsBrute => {
                p.n_max = Some(3);
                p.samples = Some(2);
            }
            Selector::Adjoints => p.maps = Some(2),
            Selector::LpContraction => {
                p.maps = Some(2);
                p.samples = Some(5);
            }
        }
        p
    }

    /// Every selector runs and passes on a small fixture, and together they reach every
    /// library suite.
    #[test]
    fn selectors_cover_all_suites() {
        let mut reached = BTreeSet::new();
        for sel in Selector::ALL {
            let out = execute(&config(sel, small(sel))).unwrap();
            assert!(!out.checks.is_empty(), "{sel}");
            assert!(
                out.pass(),
                "{sel}: {:?}",
                out.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()
            );
            reached.extend(out.suites);
        }
        let all: BTreeSet<&str> = SUITES.into_iter().collect();
        assert_eq!(reached, all);
    }

    #[test]
    fn run_is_deterministic() {
        let cfg = config(Selector::BufetovVsBrute, small(Selector::BufetovVsBrute));
        let a = run(&cfg, None, Format::Csv).unwrap();
        let b = run(&cfg, None, Format::Csv).unwrap();
        assert_eq!(a.checks, b.checks);
    }

    #[test]
    fn dilation_tolerance_is_the_library_default() {
        let out = execute(&config(Selector::Dilation, small(Selector::Dilation))).unwrap();
        assert!(out
            .checks
            .iter()
            .all(|c| c.tolerance <= DILATION_TOL || c.tolerance == 0.5));
    }
}
