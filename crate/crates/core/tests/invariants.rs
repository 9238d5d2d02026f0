use dqw_core::dynamics::{evolve_final, fock_oracle_evolve};
use dqw_core::*;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = CouplingGraph> {
    (2usize..6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * (n - 1) / 2),
            )
        })
        .prop_map(|(onsite, upper)| {
            let n = onsite.len();
            let onsite: Vec<C64> = onsite.into_iter().map(|x| C64::new(x, 0.0)).collect();
            let mut edges = Vec::new();
            let mut it = upper.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let (re, im) = it.next().unwrap();
                    edges.push((i, j, C64::new(re, im)));
                }
            }
            CouplingGraph::from_edges(&onsite, &edges).unwrap()
        })
}

fn max_norm(m: impl IntoIterator<Item = C64>) -> f64 {
    m.into_iter().fold(0.0, |a, z| a.max(z.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn total_photons_agree_between_bases(g in graph_strategy(), omega in -2.0f64..2.0, mode in 0usize..2) {
        let eig = diagonalize(&g).unwrap();
        let n = g.n_modes();
        let pump = PumpConfig::squeezing_on_mode(n, mode, omega, 0.2).unwrap();
        let state = evolve_final(&g, &pump, 2.0, 2e-3, None).unwrap();
        let phys: f64 = photon_numbers(&state, Basis::Physical, None).unwrap().iter().sum();
        let eigen: f64 = photon_numbers(&state, Basis::Eigen, Some(&eig)).unwrap().iter().sum();
        prop_assert!((phys - eigen).abs() <= 1e-10 * phys.max(1.0));
    }

    #[test]
    fn squeezed_states_stay_physical(g in graph_strategy(), omega in -2.0f64..2.0) {
        let n = g.n_modes();
        let pump = PumpConfig::squeezing_on_mode(n, 0, omega, 0.3).unwrap();
        let state = evolve_final(&g, &pump, 3.0, 2e-3, None).unwrap();
        prop_assert!(state.uncertainty_min_eigenvalue() >= -1e-9);
        for nu in state.symplectic_eigenvalues() {
            prop_assert!(nu >= 0.5 - 1e-9, "symplectic eigenvalue {nu}");
        }
    }

    #[test]
    fn basis_change_round_trips(g in graph_strategy(), omega in -2.0f64..2.0) {
        let eig = diagonalize(&g).unwrap();
        let n = g.n_modes();
        let pump = PumpConfig::squeezing_on_mode(n, n - 1, omega, 0.2).unwrap();
        let state = evolve_final(&g, &pump, 1.0, 2e-3, None).unwrap();
        let back = state.to_eigenbasis(&eig).unwrap().to_physical(&eig).unwrap();
        prop_assert!(max_norm((&back.number - &state.number).iter().copied()) <= 1e-12);
        prop_assert!(max_norm((&back.anomalous - &state.anomalous).iter().copied()) <= 1e-12);
    }

    #[test]
    fn lasing_factorisation_is_exact(g in graph_strategy(), omega in -2.0f64..2.0, gamma in 0.1f64..2.0) {
        let n = g.n_modes();
        let profile = CVector::from_fn(n, |j, _| C64::new(1.0 / (j + 1) as f64, 0.3));
        let pump = PumpConfig::lasing(profile, omega, gamma).unwrap();
        let direct = evolve_final(&g, &pump, 4.0, 1e-3, None).unwrap();
        let factorised = decompose_run(&g, &pump, 4.0).unwrap();
        prop_assert!(max_norm((&direct.mean - &factorised.mean).iter().copied()) <= 1e-8);
    }
}

#[test]
fn lasing_engine_matches_fock_oracle() {
    let g = build_chain(2, 1.0, 0.5).unwrap();
    let pump = PumpConfig::lasing_on_mode(2, 0, 1.5, 0.2).unwrap();
    let oracle = fock_oracle_evolve(&g, &pump, 2.0, 1e-3, 20).unwrap();
    let engine = evolve_final(&g, &pump, 2.0, 1e-3, None).unwrap().occupations();
    for (a, b) in oracle.iter().zip(&engine) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn squeezing_on_full_graph_matches_column_chain() {
    let full = build_glued_trees(3).unwrap();
    let reduced = column_reduce_glued_trees(&full).unwrap();
    let pf = PumpConfig::squeezing_on_mode(full.n_modes(), 0, 0.4, 0.1).unwrap();
    let pr = PumpConfig::squeezing_on_mode(reduced.n_modes(), 0, 0.4, 0.1).unwrap();
    let a = evolve_final(&full, &pf, 5.0, 2e-3, None).unwrap().occupations();
    let b = evolve_final(&reduced, &pr, 5.0, 2e-3, None).unwrap().occupations();
    assert!((a[0] - b[0]).abs() < 1e-10);
    assert!((a[full.n_modes() - 1] - b[reduced.n_modes() - 1]).abs() < 1e-10);
    // total photons in a column split evenly over its vertices
    let total_full: f64 = a.iter().sum();
    let total_reduced: f64 = b.iter().sum();
    assert!((total_full - total_reduced).abs() < 1e-10 * total_full);
}

#[test]
fn coherent_input_evolves_passively_without_pump() {
    let g = build_chain(4, 0.0, 1.0).unwrap();
    let mean = CVector::from_fn(4, |j, _| C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0));
    let input = GaussianState::coherent(mean);
    let pump = PumpConfig::lasing_on_mode(4, 0, 0.0, 0.0).unwrap();
    let driven = evolve_final(&g, &pump, 1.5, 1e-3, Some(&input)).unwrap();
    let passive = evolve_passive(&g, &input, 1.5).unwrap();
    assert!(max_norm((&driven.mean - &passive.mean).iter().copied()) < 1e-10);
}
