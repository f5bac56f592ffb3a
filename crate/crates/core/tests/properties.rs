use ncergo_core::dilation::DilationTower;
use ncergo_core::fixtures::{
    random_element, random_hermitian, random_psd, random_state, random_stationary_automorphism, random_stationary_map,
    StateMode,
};
use ncergo_core::free::{word_components_brute, BufetovOperator, FreeAction, DEFAULT_WORD_CAP};
use ncergo_core::subalgebra::{conditional_expectation, fixed_point_algebra};
use ncergo_core::{BlockStructure, CpMap, Element, LpIndex, NcSpace, Subalgebra, Tuple, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STRUCTURES: [&[usize]; 4] = [&[2], &[3], &[2, 1], &[1, 2, 2]];
const MODES: [StateMode; 3] = [StateMode::Tracial, StateMode::Random, StateMode::NearDegenerate];

fn fixture(seed: u64, shape: usize, mode: usize) -> (NcSpace, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = BlockStructure::new(STRUCTURES[shape].to_vec()).unwrap();
    let space = random_state(&s, MODES[mode], &mut rng).unwrap();
    (space, rng)
}

fn map_rel(a: &CpMap, b: &CpMap) -> f64 {
    a.distance(b) / 1f64.max(a.matrix().norm())
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn state_is_modular_invariant(seed in any::<u64>(), shape in 0..4usize, mode in 0..3usize, t in -3.0..3.0f64) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let x = random_element(space.structure(), &mut rng);
        let lhs = space.state_eval(&space.modular_action(t, &x).unwrap()).unwrap();
        let rhs = space.state_eval(&x).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * 1f64.max(x.op_norm()));
    }

    #[test]
    fn gns_inner_product_is_hermitian(seed in any::<u64>(), shape in 0..4usize, mode in 0..3usize) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let x = random_element(space.structure(), &mut rng);
        let y = random_element(space.structure(), &mut rng);
        let a = space.gns_inner(&x, &y).unwrap();
        let b = space.gns_inner(&y, &x).unwrap().conj();
        prop_assert!((a - b).norm() < 1e-13 * 1f64.max(x.op_norm() * y.op_norm()));
    }

    #[test]
    fn kms_identity_at_one(seed in any::<u64>(), shape in 0..4usize, mode in 0..2usize) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let a = random_element(space.structure(), &mut rng);
        let b = random_element(space.structure(), &mut rng);
        // φ(ab) = φ(b ρ a ρ⁻¹).
        let twisted = space.modular_action_imaginary(-1.0, &a).unwrap();
        let lhs = space.state_eval(&(&a * &b)).unwrap();
        let rhs = space.state_eval(&(&b * &twisted)).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * 1f64.max(a.op_norm() * b.op_norm()) * 10.0);
    }

    #[test]
    fn unitaries_have_unit_operator_norm(seed in any::<u64>(), shape in 0..4usize) {
        let (space, mut rng) = fixture(seed, shape, 1);
        let h = random_hermitian(space.structure(), &mut rng);
        let u = Element::from_blocks(h.blocks().iter().map(|b| {
            ncergo_core::linalg::unitary_exp(b)
        }).collect());
        let n = space.lp_norm(LpIndex::INFINITY, &u).unwrap();
        prop_assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_maps_commute_with_modular_group(seed in any::<u64>(), shape in 0..4usize, mode in 0..3usize, t in -2.0..2.0f64) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let q = random_stationary_map(&space, 3, &mut rng).unwrap();
        let x = random_element(space.structure(), &mut rng);
        let lhs = q.apply(&space.modular_action(t, &x).unwrap()).unwrap();
        let rhs = space.modular_action(t, &q.apply(&x).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs) < 1e-9 * 1f64.max(x.op_norm()));
    }

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>(), shape in 0..4usize, mode in 0..2usize) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let q = random_stationary_map(&space, 3, &mut rng).unwrap();
        let qss = q.adjoint_wrt_states().unwrap().adjoint_wrt_states().unwrap();
        prop_assert!(map_rel(&qss, &q) < 1e-10);
    }

    #[test]
    fn adjoint_reverses_composition(seed in any::<u64>(), shape in 0..4usize, mode in 0..2usize) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let q1 = random_stationary_map(&space, 2, &mut rng).unwrap();
        let q2 = random_stationary_map(&space, 2, &mut rng).unwrap();
        let lhs = q1.compose(&q2).unwrap().adjoint_wrt_states().unwrap();
        let rhs = q2.adjoint_wrt_states().unwrap().compose(&q1.adjoint_wrt_states().unwrap()).unwrap();
        prop_assert!(map_rel(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn expectation_onto_fixed_points_is_self_adjoint(seed in any::<u64>(), shape in 0..4usize, mode in 0..2usize) {
        let (space, mut rng) = fixture(seed, shape, mode);
        let sigma = random_stationary_automorphism(&space, &mut rng).unwrap();
        let q = random_stationary_map(&space, 2, &mut rng).unwrap();
        let maps = [sigma, q];
        let sub = fixed_point_algebra(&space, &maps).unwrap();
        for b in sub.basis() {
            for m in &maps {
                prop_assert!(m.apply(b).unwrap().distance(b) < 1e-11 * 1f64.max(b.op_norm()));
            }
        }
        let e = conditional_expectation(&space, &sub).unwrap();
        let es = e.adjoint_wrt_states().unwrap();
        prop_assert!(map_rel(&es, &e) < 1e-10);
    }

    #[test]
    fn bufetov_preserves_the_product_state(seed in any::<u64>(), mode in 0..2usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_state(&BlockStructure::full(2).unwrap(), MODES[mode], &mut rng).unwrap();
        let gens = (0..2).map(|_| random_stationary_automorphism(&space, &mut rng).unwrap()).collect();
        let action = FreeAction::from_generators(&space, gens).unwrap();
        let p = BufetovOperator::from_action(&action).unwrap();
        let b = Tuple::new((0..4).map(|_| random_element(space.structure(), &mut rng)).collect());
        let lhs = p.state(&p.apply(&b).unwrap()).unwrap();
        let rhs = p.state(&b).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-11 * 1f64.max(b.op_norm()));
        // Averages of automorphisms are unital and positive.
        let one = space.identity();
        prop_assert!(p.sphere_average_fast(3, &one).unwrap().distance(&one) < 1e-12);
        let psd = random_psd(space.structure(), &mut rng);
        prop_assert!(p.sphere_average_fast(3, &psd).unwrap().min_eigenvalue() > -1e-12);
    }
}

#[test]
fn word_formula_holds_componentwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for mode in [StateMode::Tracial, StateMode::Random] {
        let space = random_state(&BlockStructure::full(2).unwrap(), mode, &mut rng).unwrap();
        let gens = (0..2)
            .map(|_| random_stationary_automorphism(&space, &mut rng).unwrap())
            .collect();
        let action = FreeAction::from_generators(&space, gens).unwrap();
        let p = BufetovOperator::from_action(&action).unwrap();
        let x = random_element(space.structure(), &mut rng);
        let system = action.system().unwrap();
        let xt = Tuple::constant(&x, 4);
        for n in 0..=5 {
            let fast = p.power(n, &xt).unwrap();
            let brute = word_components_brute(&system, action.maps(), n, &x, DEFAULT_WORD_CAP).unwrap();
            assert!((&fast - &brute).op_norm() < 1e-10, "n = {n}");
        }
    }
}

/// For a stationary injective homomorphism `j`, `j*∘j = id` and `j∘j*` is the
/// expectation onto the image of `j`.
#[test]
fn embeddings_are_isometric_with_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let space = random_state(&BlockStructure::full(2).unwrap(), StateMode::Random, &mut rng).unwrap();
    let gens = (0..2)
        .map(|_| random_stationary_automorphism(&space, &mut rng).unwrap())
        .collect();
    let action = FreeAction::from_generators(&space, gens).unwrap();
    let tower = DilationTower::new(&action, 1).unwrap();
    for j in [tower.alpha_map(1).unwrap(), tower.beta_map(1).unwrap()] {
        let js = j.adjoint_wrt_states().unwrap();
        let id = CpMap::identity(j.source());
        assert!(map_rel(&js.compose(&j).unwrap(), &id) < 1e-10);
        let image: Vec<Element> = j
            .source()
            .structure()
            .matrix_units()
            .into_iter()
            .map(|u| j.apply(&Element::matrix_unit(j.source().structure(), u)).unwrap())
            .collect();
        let sub = Subalgebra::from_spanning_set(j.target(), &image).unwrap();
        let e = conditional_expectation(j.target(), &sub).unwrap();
        assert!(map_rel(&j.compose(&js).unwrap(), &e) < 1e-10);
    }
}

#[test]
fn state_of_hermitian_is_real() {
    let (space, mut rng) = fixture(3, 3, 1);
    let h = random_hermitian(space.structure(), &mut rng);
    let v: C64 = space.state_eval(&h).unwrap();
    assert!(v.im.abs() < 1e-14);
}
