use conic_duality_core::config::paper_example;
use conic_duality_core::duality::{
    dual_scalarize, duality_report, primal_scalarize, weight_grid, DualStatus, PrimalStatus,
    GRID_EPS,
};
use conic_duality_core::{
    random_bidask_process, AttainableSet, MarketModel, NoArbitrageOutcome, RandomMarketSpec,
    ScenarioTree, SolverConfig, UtilitySpec,
};

#[test]
fn ternary_example_closes_the_gap() {
    let inst = paper_example().build().unwrap();
    let grid = weight_grid(2, 21, GRID_EPS).unwrap();
    let rep = duality_report(&inst.set, &inst.utility, &grid, &inst.solver).unwrap();
    assert!(rep.max_relative_gap <= 1e-6, "{}", rep.max_relative_gap);
    assert!(rep.slater && rep.no_arbitrage);
    assert!(rep.upper.sandwich_slack() >= -1e-9);
    for r in &rep.reports {
        assert_eq!(r.primal.status, PrimalStatus::Optimal);
        assert_eq!(r.dual.status, DualStatus::Optimal);
        assert!(r.gap >= -1e-9);
    }
}

fn random_set(seed: u64) -> AttainableSet {
    let tree = ScenarioTree::uniform(&[2, 2]).unwrap();
    let spec = RandomMarketSpec {
        d: 2,
        branching: vec![2, 2],
        spread_lo: 0.05,
        spread_hi: 0.3,
        seed,
    };
    let pis = random_bidask_process(&spec, &tree);
    AttainableSet::new(MarketModel::new(tree, pis).unwrap(), vec![0.5, 0.5]).unwrap()
}

#[test]
fn weak_and_strong_duality_on_random_markets() {
    let cfg = SolverConfig::default();
    let u = UtilitySpec::exponential(2);
    let grid = weight_grid(2, 5, GRID_EPS).unwrap();
    let mut checked = 0;
    for seed in 0..30 {
        let a = random_set(seed);
        let cert = match a.market.check_no_arbitrage(&cfg).unwrap() {
            NoArbitrageOutcome::NoArbitrage { certificate, .. } => certificate,
            NoArbitrageOutcome::Arbitrage { .. } => continue,
        };
        for w in &grid {
            let p = primal_scalarize(&a, &u, w, &cfg).unwrap();
            let d = dual_scalarize(&a, &u, w, Some(&cert), &cfg).unwrap();
            assert!(a.dual_feasibility(&d.y, 1e-7), "seed {seed}");
            let (p, d) = (p.value.to_f64(), d.value.to_f64());
            assert!(d <= p + 1e-8 * (1.0 + p.abs()), "seed {seed}: p={p} d={d}");
            assert!(
                (p - d).abs() <= 1e-6 * (1.0 + p.abs()),
                "seed {seed}: p={p} d={d}"
            );
        }
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} arbitrage-free markets");
}
