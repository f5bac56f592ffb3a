//! The built-in acceptance suite run by `ncergo verify`.
//!
//! Criteria 1 to 7 run in process through the same experiment runner as `ncergo run`;
//! criterion 8 (two `verify` runs agree) needs the binary and lives in the integration
//! tests.

use std::time::Instant;

use ncergo_core::fixtures::{random_element, StateMode};
use ncergo_core::free::{sphere_average_brute, BufetovOperator};
use ncergo_core::report::all_pass;
use ncergo_core::CheckRecord;
use serde::{Deserialize, Serialize};

use crate::config::{ActionSpec, ExperimentConfig, FixtureSpec, Params, Selector};
use crate::error::CliError;
use crate::fixture;
use crate::runner::{execute, Outcome};

pub const CRITERIA: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

/// The commutative cyclic fixture: both generators shift `C^4` by one place.
pub const CYCLIC_PERM: [usize; 4] = [1, 2, 3, 0];
pub const CYCLIC_X: [f64; 4] = [1.0, -2.0, 0.5, 3.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<CheckRecord>,
    pub budget_s: f64,
    pub within_budget: bool,
    pub pass: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
    pub wall_time_s: f64,
}

pub fn base_config(
    blocks: Vec<usize>,
    state: StateMode,
    d: usize,
    seed: u64,
    experiment: Selector,
) -> ExperimentConfig {
    ExperimentConfig {
        fixture: FixtureSpec {
            blocks,
            state,
            d,
            action: ActionSpec::RandomUnitary,
            seed,
        },
        experiment,
        params: Params::default(),
        output: Default::default(),
    }
}

pub fn cyclic_config(experiment: Selector, n_max: usize, tol_conv: f64) -> ExperimentConfig {
    let mut cfg = base_config(vec![1; 4], StateMode::Tracial, 2, 0, experiment);
    cfg.fixture.action = ActionSpec::Permutation {
        perms: vec![CYCLIC_PERM.to_vec(), CYCLIC_PERM.to_vec()],
    };
    cfg.params.n_max = Some(n_max);
    cfg.params.tol_conv = Some(tol_conv);
    cfg.params.x = Some(CYCLIC_X.to_vec());
    cfg
}

/// Runs the configs and tags each record with the config's position.
fn run_all(configs: &[ExperimentConfig]) -> Result<Vec<CheckRecord>, CliError> {
    let mut out = Vec::new();
    for (k, cfg) in configs.iter().enumerate() {
        let Outcome { checks, .. } = execute(cfg)?;
        out.extend(checks.into_iter().map(|mut c| {
            c.check = format!("[{}#{k}] {}", cfg.experiment, c.check);
            c
        }));
    }
    Ok(out)
}

fn criterion_1(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let configs: Vec<_> = [StateMode::Tracial, StateMode::Random]
        .into_iter()
        .enumerate()
        .map(|(k, mode)| {
            let mut c = base_config(vec![2], mode, 2, seed + k as u64, Selector::BufetovVsBrute);
            c.params.n_max = Some(5);
            c.params.samples = Some(20);
            c
        })
        .collect();
    run_all(&configs)
}

fn criterion_2(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let configs: Vec<_> = [2usize, 3]
        .into_iter()
        .map(|d| {
            let mut c = base_config(vec![2], StateMode::Random, d, seed + d as u64, Selector::Identities);
            c.params.n_max = Some(4);
            c
        })
        .collect();
    run_all(&configs)
}

fn criterion_3(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let mut c = base_config(vec![2], StateMode::Random, 2, seed, Selector::Dilation);
    c.params.depth = Some(3);
    run_all(&[c])
}

fn criterion_4(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let configs: Vec<_> = [(vec![2, 1], 7), (vec![1, 2, 2], 7), (vec![3, 1], 6)]
        .into_iter()
        .enumerate()
        .map(|(k, (blocks, maps))| {
            let mut c = base_config(blocks, StateMode::Random, 2, seed + k as u64, Selector::Adjoints);
            c.params.maps = Some(maps);
            c
        })
        .collect();
    run_all(&configs)
}

fn criterion_5(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let mut c = base_config(vec![2, 1], StateMode::Random, 2, seed, Selector::LpContraction);
    c.params.maps = Some(10);
    c.params.samples = Some(50);
    c.params.p = Some(vec![1.0, 2.0, 4.0]);
    c.params.p_inf = Some(true);
    run_all(&[c])
}

fn criterion_6() -> Result<Vec<CheckRecord>, CliError> {
    run_all(&[
        cyclic_config(Selector::S2n, 200, 1e-8),
        cyclic_config(Selector::Cesaro, 2000, 1e-6),
        cyclic_config(Selector::Rota, 200, 1e-8),
    ])
}

/// Timings of the two sphere-average routes, with the agreement check at `n = 8`.
#[derive(Clone, Copy, Debug)]
pub struct PerfSample {
    pub fast_n12_s: f64,
    pub brute_n8_s: f64,
    pub s8_residual: f64,
}

pub fn performance_sample(seed: u64) -> Result<PerfSample, CliError> {
    let mut fx = fixture::build(&base_config(vec![2], StateMode::Random, 2, seed, Selector::BufetovVsBrute).fixture)?;
    let x = random_element(fx.space.structure(), &mut fx.rng);
    let p = BufetovOperator::from_action(&fx.action).map_err(CliError::computation)?;
    let t = Instant::now();
    let fast12 = p.sphere_average_fast(12, &x).map_err(CliError::computation)?;
    let fast_n12_s = t.elapsed().as_secs_f64();
    std::hint::black_box(&fast12);
    let t = Instant::now();
    let brute8 = sphere_average_brute(&fx.action, 8, &x).map_err(CliError::computation)?;
    let brute_n8_s = t.elapsed().as_secs_f64();
    let fast8 = p.sphere_average_fast(8, &x).map_err(CliError::computation)?;
    Ok(PerfSample {
        fast_n12_s,
        brute_n8_s,
        s8_residual: (&fast8 - &brute8).op_norm(),
    })
}

fn criterion_7(seed: u64) -> Result<Vec<CheckRecord>, CliError> {
    let s = performance_sample(seed)?;
    Ok(vec![
        CheckRecord::new("s_8 fast vs brute", vec![8], s.s8_residual, 1e-10),
        CheckRecord::flag(
            "fast n=12 faster than brute n=8",
            vec![12, 8],
            s.fast_n12_s < s.brute_n8_s,
        ),
    ])
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "sphere averages: word enumeration vs Bufetov reduction",
        2 => "Rota identity suite, d = 2 and 3",
        3 => "dilation equalities at depth 3",
        4 => "state and KMS adjoints",
        5 => "L^p contraction of stationary maps",
        6 => "convergence fixtures on the cyclic action",
        7 => "fast vs brute sphere averages: timing",
        _ => "unknown",
    }
}

pub fn budget_s(id: u32) -> f64 {
    match id {
        1 => 30.0,
        3 => 120.0,
        _ => 60.0,
    }
}

pub fn run_criterion(id: u32, seed: u64) -> Result<CriterionReport, CliError> {
    let start = Instant::now();
    let checks = match id {
        1 => criterion_1(seed)?,
        2 => criterion_2(seed)?,
        3 => criterion_3(seed)?,
        4 => criterion_4(seed)?,
        5 => criterion_5(seed)?,
        6 => criterion_6()?,
        7 => criterion_7(seed)?,
        _ => return Err(CliError::Config(format!("no acceptance criterion {id}"))),
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let budget = budget_s(id);
    let within_budget = wall_time_s < budget;
    Ok(CriterionReport {
        id,
        title: title(id).to_string(),
        pass: all_pass(&checks) && within_budget,
        checks,
        budget_s: budget,
        within_budget,
        wall_time_s,
    })
}

pub fn verify(seed: u64, mut progress: impl FnMut(&CriterionReport)) -> Result<VerifyReport, CliError> {
    let start = Instant::now();
    let mut criteria = Vec::new();
    for id in CRITERIA {
        let r = run_criterion(id, seed)?;
        progress(&r);
        criteria.push(r);
    }
    Ok(VerifyReport {
        seed,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One line per criterion, naming the worst failing check when there is one.
pub fn summary_line(r: &CriterionReport) -> String {
    let status = if r.pass { "PASS" } else { "FAIL" };
    let passed = r.checks.iter().filter(|c| c.pass).count();
    let mut line = format!(
        "criterion {} {status}: {} ({passed}/{} checks, {:.1} s of {:.0} s)",
        r.id,
        r.title,
        r.checks.len(),
        r.wall_time_s,
        r.budget_s
    );
    if let Some(c) = r.checks.iter().find(|c| !c.pass) {
        line.push_str(&format!(
            "; first failure {:?} at {:?}: residual {:.3e}, tolerance {:.1e}",
            c.check, c.indices, c.residual, c.tolerance
        ));
    }
    if !r.within_budget {
        line.push_str("; over the runtime budget");
    }
    line
}
