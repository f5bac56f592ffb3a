use std::time::Instant;

use ncergo_core::dilation::DilationTower;
use ncergo_core::fixtures::{random_state, random_stationary_unitary, StateMode};
use ncergo_core::free::FreeAction;
use ncergo_core::report::all_pass;
use ncergo_core::BlockStructure;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tower(mode: StateMode, seed: u64) -> DilationTower {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = random_state(&BlockStructure::full(2).unwrap(), mode, &mut rng).unwrap();
    let us = vec![
        random_stationary_unitary(&space, &mut rng),
        random_stationary_unitary(&space, &mut rng),
    ];
    let action = FreeAction::from_unitaries(&space, &us).unwrap();
    DilationTower::new(&action, 3).unwrap()
}

#[test]
fn depth_three_suites_pass() {
    for mode in [StateMode::Tracial, StateMode::Random] {
        let t = tower(mode, 21);
        let start = Instant::now();
        let mut recs = t.structure_suite().unwrap();
        recs.extend(t.theorem_suite().unwrap());
        recs.extend(t.dual_path_suite().unwrap());
        let failing: Vec<_> = recs.iter().filter(|r| !r.pass).collect();
        assert!(all_pass(&recs), "{failing:?}");
        eprintln!("{mode:?}: {} checks in {:?}", recs.len(), start.elapsed());
    }
}

#[test]
fn generated_subalgebra_dimensions() {
    let t = tower(StateMode::Random, 4);
    let dims: Vec<usize> = (0..=3).map(|n| t.future_subalgebra(n, 3).unwrap().dim()).collect();
    assert_eq!(dims, vec![432, 144, 48, 16]);
}
