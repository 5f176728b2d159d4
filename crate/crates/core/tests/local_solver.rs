use leocoopbf::experiment::synthetic::{random_csi, random_mask, random_state};
use leocoopbf::local_solver::oracle::{dense_ball, dense_g_solve, project_ball};
use leocoopbf::local_solver::{
    assemble_reduced, build_operators, generic_local_oracle, local_lagrangian, solve_ball_constrained, solve_local,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n_sats: usize, n_ant: usize, n_users: usize, load: usize, rho: f64) -> Inst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let csi = random_csi(n_sats, n_ant, n_users, &mut rng).unwrap();
    let mask = random_mask(n_sats, n_users, load, &mut rng).unwrap();
    let state = random_state(&csi, &mask, 0, rho, &mut rng).unwrap();
    Inst { csi, mask, state }
}

struct Inst {
    csi: leocoopbf::StatisticalCsi,
    mask: leocoopbf::SchedulingMask,
    state: leocoopbf::decentralized::ConsensusState,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elimination_matches_dense_copy_solve(seed in 0u64..10_000, n_sats in 2usize..4, n_users in 2usize..5) {
        let inst = instance(seed, n_sats, 3, n_users, 2, 1.3);
        let ops = build_operators(&inst.state, &inst.csi, &inst.mask).unwrap();
        let w = inst.state.w.clone();
        let fast = ops.apply(&inst.csi, &w);
        let dense = dense_g_solve(&inst.state, &inst.csi, &inst.mask, &w).unwrap();
        let scale = dense.as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(fast.max_abs_diff(&dense) <= 1e-9 * scale);
    }

    #[test]
    fn solve_local_never_worse_than_oracle(seed in 0u64..10_000, budget in 0.05f64..5.0) {
        let inst = instance(seed, 3, 3, 4, 2, 0.8);
        let fast = solve_local(&inst.state, &inst.csi, &inst.mask, budget).unwrap();
        let oracle = generic_local_oracle(&inst.state, &inst.csi, &inst.mask, budget, 1e-12, 2000).unwrap();
        let f = local_lagrangian(&inst.state, &inst.csi, &fast.g);
        let o = local_lagrangian(&inst.state, &inst.csi, &oracle.g);
        prop_assert!(f <= o + 1e-7 * o.abs().max(1.0), "fast {f} oracle {o}");
        let power: f64 = fast.w.iter().map(|v| v.norm_squared()).sum();
        prop_assert!(power <= budget * (1.0 + 1e-9));
        prop_assert!(fast.lambda >= 0.0);
        if fast.lambda > 1e-9 {
            prop_assert!((power - budget).abs() <= 1e-7 * budget);
        }
    }

    #[test]
    fn ball_solution_is_optimal_against_random_feasible_points(seed in 0u64..10_000, budget in 0.05f64..5.0) {
        let inst = instance(seed, 2, 4, 3, 3, 1.0);
        let ops = build_operators(&inst.state, &inst.csi, &inst.mask).unwrap();
        let quad = assemble_reduced(&ops, &inst.state, &inst.csi, &inst.mask, budget);
        let sol = solve_ball_constrained(&quad).unwrap();
        let best = quad.objective(&sol.w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..20 {
            let mut w: Vec<_> = quad
                .xi
                .iter()
                .map(|x| leocoopbf::experiment::synthetic::random_vector(x.len(), &mut rng))
                .collect();
            project_ball(&mut w, budget);
            prop_assert!(best <= quad.objective(&w) + 1e-9 * best.abs().max(1.0));
        }
    }
}

#[test]
fn single_block_matches_dense_ball() {
    let inst = instance(77, 2, 4, 3, 1, 1.0);
    let ops = build_operators(&inst.state, &inst.csi, &inst.mask).unwrap();
    for budget in [0.01, 0.5, 50.0] {
        let quad = assemble_reduced(&ops, &inst.state, &inst.csi, &inst.mask, budget);
        assert_eq!(quad.n_blocks(), 1);
        let sol = solve_ball_constrained(&quad).unwrap();
        let (w, lambda) = dense_ball(&quad.theta[0], &quad.xi[0], budget).unwrap();
        let fast = quad.objective(&sol.w);
        let dense = quad.objective(std::slice::from_ref(&w));
        assert!(fast <= dense + 1e-8 * dense.abs().max(1.0), "{fast} vs {dense}");
        assert!(
            (sol.lambda - lambda).abs() <= 1e-6 * lambda.max(1.0),
            "{} vs {lambda}",
            sol.lambda
        );
    }
}

#[test]
fn zero_penalty_is_rejected() {
    let mut inst = instance(1, 2, 2, 2, 1, 1.0);
    inst.state.rho = 0.0;
    assert!(build_operators(&inst.state, &inst.csi, &inst.mask).is_err());
}
