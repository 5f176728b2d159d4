use leocoopbf::baselines::{mrt, sss, zf};
use leocoopbf::centralized::{run_centralized, CentralizedOptions};
use leocoopbf::decentralized::{
    build_topology, overhead_formula, run_decentralized, DecentralizedOptions, IslTopology, TopologyKind,
};
use leocoopbf::experiment::synthetic::{random_csi, random_mask};
use leocoopbf::rates::{compute_beam_gains, sum_rate, sum_rate_of};
use leocoopbf::{SchedulingMask, StatisticalCsi};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64) -> (StatisticalCsi, SchedulingMask, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let csi = random_csi(3, 4, 5, &mut rng).unwrap();
    let mask = random_mask(3, 5, 3, &mut rng).unwrap();
    (csi, mask, vec![2.0, 1.0, 3.0])
}

fn tight() -> CentralizedOptions {
    CentralizedOptions {
        tol: 1e-8,
        max_iter: 500,
        ..CentralizedOptions::default()
    }
}

#[test]
fn centralized_is_monotone_feasible_and_beats_mrt() {
    for seed in 0..5 {
        let (csi, mask, budgets) = problem(seed);
        let (w, report) = run_centralized(&csi, &mask, &budgets, &tight()).unwrap();
        assert!(w.is_feasible(1e-9));
        for pair in report.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0));
        }
        let start = mrt(&csi, &mask, &budgets).unwrap();
        let r_mrt = sum_rate_of(&csi, &mask, &start).unwrap();
        let r = sum_rate_of(&csi, &mask, &w).unwrap();
        assert!(r >= r_mrt - 1e-9);
        assert!((report.sum_rate_trace.last().unwrap() - r).abs() < 1e-9 * r.max(1.0));
    }
}

#[test]
fn baselines_respect_budgets_and_masks() {
    let (csi, mask, budgets) = problem(11);
    for w in [mrt(&csi, &mask, &budgets).unwrap(), zf(&csi, &mask, &budgets).unwrap()] {
        assert!(w.is_feasible(1e-9));
        for s in 0..3 {
            for u in 0..5 {
                if !mask.delta[s][u] {
                    assert_eq!(w.w[s][u].norm(), 0.0);
                }
            }
        }
    }
    let (w, single) = sss(&csi, &mask, &budgets, &CentralizedOptions::default()).unwrap();
    assert!(w.is_feasible(1e-9));
    for u in 0..5 {
        let servers = (0..3).filter(|&s| single.delta[s][u]).count();
        assert!(servers <= 1);
    }
    assert!(sum_rate_of(&csi, &single, &w).unwrap() > 0.0);
}

#[test]
fn zf_nulls_co_scheduled_users_on_means() {
    let (csi, mask, budgets) = problem(5);
    let w = zf(&csi, &mask, &budgets).unwrap();
    for s in 0..3 {
        let served = &mask.served[s];
        if served.len() > csi.n_antennas() {
            continue;
        }
        for &u in served {
            for &l in served {
                if u != l {
                    let leak = csi.b[s][u].transpose() * &w.w[s][l];
                    assert!(leak[(0, 0)].norm() < 1e-9 * w.w[s][l].norm().max(1.0));
                }
            }
        }
    }
}

#[test]
fn decentralized_matches_centralized_on_every_topology() {
    let (csi, mask, budgets) = problem(21);
    let (wc, _) = run_centralized(&csi, &mask, &budgets, &tight()).unwrap();
    let rc = sum_rate_of(&csi, &mask, &wc).unwrap();
    let opts = DecentralizedOptions {
        tol: 1e-7,
        residual_tol: 1e-6,
        max_outer: 3000,
        ..DecentralizedOptions::default()
    };
    for kind in [TopologyKind::Ring, TopologyKind::Star, TopologyKind::Mesh] {
        let topo = build_topology(&kind, 3).unwrap();
        let (w, report, ledger) = run_decentralized(&csi, &mask, &budgets, &topo, &opts).unwrap();
        assert!(w.is_feasible(1e-9));
        let r = sum_rate(&compute_beam_gains(&csi, &mask, &w).unwrap(), &csi);
        assert!((r - rc).abs() <= 0.02 * rc, "{}: {r} vs {rc}", kind.name());
        assert_eq!(ledger.history.len(), report.sum_rate_trace.len());
        assert_eq!(ledger.per_iteration, overhead_formula(&topo, &mask));
    }
}

#[test]
fn custom_topology_must_be_connected() {
    assert!(IslTopology::from_edges(4, [(0, 1), (2, 3)]).is_err());
    assert!(IslTopology::from_edges(3, [(0, 3)]).is_err());
    let t = build_topology(
        &TopologyKind::Custom {
            edges: vec![[0, 1], [1, 2], [2, 3]],
        },
        4,
    )
    .unwrap();
    assert_eq!(t.degree(1), 2);
    let (csi, mask, budgets) = problem(2);
    let wrong = build_topology(&TopologyKind::Ring, 4).unwrap();
    assert!(run_decentralized(&csi, &mask, &budgets, &wrong, &DecentralizedOptions::default()).is_err());
}
