use nalgebra::DMatrix;
use ncergo_core::fixtures::{permutation_automorphism, random_state, random_stationary_unitary, StateMode};
use ncergo_core::free::FreeAction;
use ncergo_core::{BlockStructure, Element, NcSpace, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ActionSpec, FixtureSpec};
use crate::error::CliError;

/// A built fixture and the generator positioned after the fixture draws.
pub struct Fixture {
    pub space: NcSpace,
    pub action: FreeAction,
    pub rng: ChaCha8Rng,
    /// Generators as point permutations, when the action is a permutation action on a
    /// tracial commutative space; enables the classical oracles.
    pub classical: Option<Vec<Vec<usize>>>,
}

pub fn build(spec: &FixtureSpec) -> Result<Fixture, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let structure = BlockStructure::new(spec.blocks.clone()).map_err(CliError::fixture)?;
    let space = random_state(&structure, spec.state, &mut rng).map_err(CliError::fixture)?;
    let (action, classical) = match &spec.action {
        ActionSpec::Permutation { perms } => {
            let gens = perms
                .iter()
                .map(|p| permutation_automorphism(&space, p))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::fixture)?;
            let action = FreeAction::from_generators(&space, gens).map_err(CliError::fixture)?;
            let classical = (spec.state == StateMode::Tracial).then(|| perms.clone());
            (action, classical)
        }
        ActionSpec::RandomUnitary => {
            let us: Vec<Element> = (0..spec.d)
                .map(|_| random_stationary_unitary(&space, &mut rng))
                .collect();
            (
                FreeAction::from_unitaries(&space, &us).map_err(CliError::fixture)?,
                None,
            )
        }
        ActionSpec::Unitaries { unitaries } => {
            let us = unitaries
                .iter()
                .map(|u| parse_element(u, &structure))
                .collect::<Result<Vec<_>, _>>()?;
            (
                FreeAction::from_unitaries(&space, &us).map_err(CliError::fixture)?,
                None,
            )
        }
    };
    Ok(Fixture {
        space,
        action,
        rng,
        classical,
    })
}

fn parse_element(blocks: &[Vec<Vec<[f64; 2]>>], structure: &BlockStructure) -> Result<Element, CliError> {
    if blocks.len() != structure.num_blocks() {
        return Err(CliError::Config(format!(
            "unitary has {} blocks, the algebra has {}",
            blocks.len(),
            structure.num_blocks()
        )));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (rows, &d) in blocks.iter().zip(structure.dims()) {
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(CliError::Config(format!("unitary block is not {d}×{d}")));
        }
        out.push(DMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])));
    }
    Ok(Element::from_blocks(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(action: ActionSpec, state: StateMode, blocks: Vec<usize>) -> FixtureSpec {
        FixtureSpec {
            blocks,
            state,
            d: 2,
            action,
            seed: 3,
        }
    }

    #[test]
    fn same_seed_same_fixture() {
        let s = spec(ActionSpec::RandomUnitary, StateMode::Random, vec![2, 1]);
        let a = build(&s).unwrap();
        let b = build(&s).unwrap();
        assert_eq!(a.space.rho(), b.space.rho());
        assert_eq!(a.action.maps()[3].matrix(), b.action.maps()[3].matrix());
    }

    #[test]
    fn permutation_needs_invariant_state() {
        let perms = vec![vec![1, 2, 3, 0], vec![1, 2, 3, 0]];
        let ok = build(&spec(
            ActionSpec::Permutation { perms: perms.clone() },
            StateMode::Tracial,
            vec![1; 4],
        ))
        .unwrap();
        assert!(ok.classical.is_some());
        let err = build(&spec(ActionSpec::Permutation { perms }, StateMode::Random, vec![1; 4]))
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn explicit_unitaries() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = vec![vec![vec![[h, 0.0], [h, 0.0]], vec![[h, 0.0], [-h, 0.0]]]];
        let swap = vec![vec![vec![[0.0, 0.0], [1.0, 0.0]], vec![[1.0, 0.0], [0.0, 0.0]]]];
        let f = build(&spec(
            ActionSpec::Unitaries {
                unitaries: vec![hadamard, swap],
            },
            StateMode::Tracial,
            vec![2],
        ))
        .unwrap();
        assert_eq!(f.action.d(), 2);
        let bad = vec![vec![vec![[1.0, 0.0]]]];
        let err = build(&spec(
            ActionSpec::Unitaries {
                unitaries: vec![bad.clone(), bad],
            },
            StateMode::Tracial,
            vec![2],
        ))
        .err()
        .unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
