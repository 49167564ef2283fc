//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p conic-duality-cli --test acceptance`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use conic_duality_cli::{cmd_duality, cmd_paper_example, DualityOptions, EXIT_OK};
use conic_duality_core::cones::cone_hull_contains;
use conic_duality_core::duality::{dual_scalarize, GRID_EPS};
use conic_duality_core::solver::{LinearProgram, LpOutcome};
use conic_duality_core::{
    lagrangian_halfspace, paper_example, primal_recovery_check, primal_scalarize,
    random_bidask_process, upper_image, validate_bidask, weight_grid, AssetUtility, AttainableSet,
    BidAskMatrix, DualVariable, MarketModel, NoArbitrageOutcome, PolyCone, RandomMarketSpec,
    RecoveryOutcome, ScalarUtility, ScenarioTree, SolverConfig, TerminalPosition, TransferPlan,
    UtilitySpec, Weight,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = rd
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(String::from)
        .collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .expect("column present")
}

fn f(s: &str) -> f64 {
    s.parse().expect("numeric field")
}

// 1
fn ternary_example_duality_run() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("example.json");
    let mut json = Vec::new();
    ensure(cmd_paper_example(None, &mut json) == EXIT_OK, || {
        "emit failed".into()
    })?;
    fs::write(&cfg_path, &json).map_err(|e| e.to_string())?;
    let opts = DualityOptions {
        grid: Some(21),
        out_dir: dir.path().join("out"),
        ..DualityOptions::default()
    };
    let t = Instant::now();
    let mut log = Vec::new();
    let code = cmd_duality(&cfg_path, &opts, &mut log);
    let secs = t.elapsed().as_secs_f64();
    ensure(code == EXIT_OK, || {
        format!("exit {code}: {}", String::from_utf8_lossy(&log))
    })?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;

    let (h, rows) = read_csv(&opts.out_dir.join("scalarizations.csv"))?;
    ensure(rows.len() == 21, || format!("{} rows", rows.len()))?;
    let (ip, id) = (col(&h, "primal_value"), col(&h, "dual_value"));
    for r in &rows {
        let (p, d) = (f(&r[ip]), f(&r[id]));
        ensure(d <= p + 1e-7 * (1.0 + p.abs()), || {
            format!("weak duality fails: p = {p}, d = {d}")
        })?;
    }
    let (h, rows) = read_csv(&opts.out_dir.join("summary.csv"))?;
    let gap = f(&rows[0][col(&h, "max_relative_gap")]);
    ensure(gap <= 1e-6, || format!("max relative gap {gap:e}"))?;
    Ok(format!(
        "21 weights in {secs:.3} s, max relative gap {gap:.2e}"
    ))
}

// 2
fn one_asset_closed_form() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("one.json");
    fs::write(
        &cfg_path,
        r#"{"d": 1, "tree": {"branching": []}, "bidask": {"rule": "constant", "matrix": [[1.0]]}, "x0": [0.0]}"#,
    )
    .map_err(|e| e.to_string())?;
    let opts = DualityOptions {
        grid: Some(1),
        out_dir: dir.path().join("out"),
        ..DualityOptions::default()
    };
    let mut log = Vec::new();
    let code = cmd_duality(&cfg_path, &opts, &mut log);
    ensure(code == EXIT_OK, || {
        format!("exit {code}: {}", String::from_utf8_lossy(&log))
    })?;
    let (h, rows) = read_csv(&opts.out_dir.join("scalarizations.csv"))?;
    ensure(rows.len() == 1, || format!("{} rows", rows.len()))?;
    let p = f(&rows[0][col(&h, "primal_value")]);
    let d = f(&rows[0][col(&h, "dual_value")]);
    ensure((p - 1.0).abs() <= 1e-9 && (d - 1.0).abs() <= 1e-9, || {
        format!("p = {p}, d = {d}")
    })?;
    Ok(format!("p = {p}, d = {d}"))
}

fn static_set(rows: &[Vec<f64>], x0: Vec<f64>) -> AttainableSet {
    let pi = validate_bidask(rows).unwrap();
    let tree = ScenarioTree::uniform(&[]).unwrap();
    AttainableSet::new(MarketModel::new(tree, vec![pi]).unwrap(), x0).unwrap()
}

// 3
fn static_two_asset_brute_force() -> Check {
    let a = static_set(&[vec![1.0, 1.0], vec![8.0, 1.0]], vec![0.0, 0.0]);
    let u = UtilitySpec::exponential(2);
    let w = Weight::new(&[0.5, 0.5], 0.0).map_err(|e| e.to_string())?;
    let sol = primal_scalarize(&a, &u, &w, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let p = sol.value.to_f64();
    let x = sol.x.leaf(0).to_vec();

    // Trades: sell one unit of asset 1 for one of asset 2 at rate 1, or buy
    // one unit of asset 1 with 8 of asset 2.
    let obj = |l1: f64, l2: f64| {
        let x = [-l1 + l2, l1 - 8.0 * l2];
        0.5 * ((-x[0]).exp() + (-x[1]).exp())
    };
    let step = 1e-3;
    let (mut best, mut arg) = (f64::INFINITY, (0.0, 0.0));
    for i in 0..=2000 {
        for j in 0..=2000 {
            let (l1, l2) = (i as f64 * step, j as f64 * step);
            let v = obj(l1, l2);
            if v < best {
                best = v;
                arg = (l1, l2);
            }
        }
    }
    ensure((p - 1.0).abs() <= 1e-7, || format!("primal value {p}"))?;
    ensure(x.iter().all(|v| v.abs() <= 1e-6), || {
        format!("argmin {x:?}")
    })?;
    ensure((best - p).abs() <= 1e-7 && arg == (0.0, 0.0), || {
        format!("brute force {best} at {arg:?}, solver {p}")
    })?;
    Ok(format!(
        "p = {p}, argmin {x:?}, brute force {best} at {arg:?}"
    ))
}

fn raw_generators(pi: &BidAskMatrix) -> Vec<Vec<f64>> {
    let d = pi.dim();
    let mut gens = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        gens.push(e);
        for j in 0..d {
            if i != j {
                let mut g = vec![0.0; d];
                g[i] = pi.get(i, j);
                g[j] = -1.0;
                gens.push(g);
            }
        }
    }
    gens
}

fn random_market(seed: u64) -> MarketModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=3);
    let horizon = rng.gen_range(0..=3);
    let branching: Vec<usize> = (0..horizon).map(|_| rng.gen_range(1..=3)).collect();
    let lo = rng.gen_range(0.0..0.02);
    let spec = RandomMarketSpec {
        d,
        branching: branching.clone(),
        spread_lo: lo,
        spread_hi: lo + rng.gen_range(0.0..0.3),
        seed,
    };
    let tree = ScenarioTree::uniform(&branching).unwrap();
    let mats = random_bidask_process(&spec, &tree);
    MarketModel::new(tree, mats).unwrap()
}

// 4
fn arbitrage_dichotomy() -> Check {
    let cfg = SolverConfig::default();
    let (mut free, mut arb) = (0, 0);
    for seed in 0..100u64 {
        let m = random_market(seed);
        let d = m.dim();
        let tree = m.tree();
        match m.check_no_arbitrage(&cfg) {
            Ok(NoArbitrageOutcome::NoArbitrage {
                certificate,
                margin,
            }) => {
                free += 1;
                ensure(margin > cfg.eps_strict, || {
                    format!("seed {seed}: margin {margin}")
                })?;
                for (id, node) in tree.nodes().iter().enumerate() {
                    let z = certificate.z.node(id);
                    for g in raw_generators(m.bidask(id)) {
                        let s: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
                        ensure(s >= -1e-9, || {
                            format!("seed {seed}: Z not consistent at {id}: <{g:?}, {z:?}> = {s:e}")
                        })?;
                    }
                    if !node.children.is_empty() {
                        let mut avg = vec![0.0; d];
                        for &c in &node.children {
                            let q = tree.node(c).mass / node.mass;
                            for (a, v) in avg.iter_mut().zip(certificate.z.node(c)) {
                                *a += q * v;
                            }
                        }
                        let err = avg
                            .iter()
                            .zip(z)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        ensure(err <= 1e-9, || {
                            format!("seed {seed}: Z not a martingale at {id}")
                        })?;
                    }
                }
            }
            Ok(NoArbitrageOutcome::Arbitrage { witness, plan }) => {
                arb += 1;
                let flat = witness.as_flat();
                ensure(flat.iter().all(|&v| v >= -1e-9), || {
                    format!("seed {seed}: negative witness")
                })?;
                let total: f64 = flat.iter().sum();
                ensure((total - 1.0).abs() <= 1e-7, || {
                    format!("seed {seed}: witness total {total}")
                })?;
                // Rebuild the terminal position from the plan by hand.
                let mut x = vec![0.0; flat.len()];
                for (k, &leaf) in tree.leaves().iter().enumerate() {
                    for v in tree.path_to(leaf) {
                        for (g, &c) in m.cone(v).generators().iter().zip(&plan.coeffs[v]) {
                            ensure(c >= -1e-12, || format!("seed {seed}: negative plan"))?;
                            for i in 0..d {
                                x[k * d + i] -= c * g[i];
                            }
                        }
                    }
                }
                let err = x
                    .iter()
                    .zip(flat)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                ensure(err <= 1e-7, || {
                    format!("seed {seed}: plan gives a different position")
                })?;
                for v in 0..tree.len() {
                    let raw = raw_generators(m.bidask(v));
                    for g in m.cone(v).generators() {
                        let ok = cone_hull_contains(&raw, g, 1e-9).map_err(|e| e.to_string())?;
                        ensure(ok, || {
                            format!("seed {seed}: generator outside solvency cone")
                        })?;
                    }
                }
            }
            Err(e) => return Err(format!("seed {seed}: {e}")),
        }
    }
    Ok(format!(
        "{free} arbitrage-free, {arb} with arbitrage, 0 inconclusive"
    ))
}

// 5
fn cone_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = 1e-9;
    for trial in 0..200 {
        let d = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=5);
        let gens: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let c = PolyCone::from_generators(d, &gens).map_err(|e| e.to_string())?;
        let p = c.polar().map_err(|e| e.to_string())?;
        let pp = p.polar().map_err(|e| e.to_string())?;
        for w in p.generators() {
            for g in &gens {
                let s: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
                ensure(s >= -tol, || {
                    format!("trial {trial}: polar generator fails {s}")
                })?;
            }
        }
        for g in &gens {
            ensure(pp.contains(g, tol), || {
                format!("trial {trial}: K not in K++")
            })?;
        }
        for g in pp.generators() {
            ensure(c.contains(g, tol), || {
                format!("trial {trial}: K++ not in K")
            })?;
        }
    }
    let tree = ScenarioTree::uniform(&[2, 2]).unwrap();
    for seed in 0..40 {
        let d = 1 + (seed as usize % 3);
        let spec = RandomMarketSpec {
            d,
            branching: vec![2, 2],
            spread_lo: 0.0,
            spread_hi: 0.5,
            seed,
        };
        for pi in random_bidask_process(&spec, &tree) {
            let k = conic_duality_core::solvency_cone(&pi).map_err(|e| e.to_string())?;
            for i in 0..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                ensure(k.contains(&e, tol), || {
                    format!("seed {seed}: e{i} not solvent")
                })?;
            }
        }
    }
    for trial in 0..50 {
        let d = rng.gen_range(1..=3);
        let price: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..10.0)).collect();
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { 1.0 } else { price[j] / price[i] })
                    .collect()
            })
            .collect();
        let pi = validate_bidask(&rows).map_err(|e| e.to_string())?;
        let k = conic_duality_core::solvency_cone(&pi).map_err(|e| e.to_string())?;
        let rays = k.polar().map_err(|e| e.to_string())?.generators().to_vec();
        ensure(rays.len() == 1, || {
            format!("trial {trial}: {} polar rays", rays.len())
        })?;
        let r = &rays[0];
        let scale = r[0] / price[0];
        let err = r
            .iter()
            .zip(&price)
            .map(|(a, p)| (a - scale * p).abs())
            .fold(0.0, f64::max);
        ensure(scale > 0.0 && err <= 1e-9, || {
            format!("trial {trial}: ray {r:?} vs prices {price:?}")
        })?;
    }
    Ok("200 random cones, 40 solvency processes, 50 frictionless markets".into())
}

fn golden_section(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-11 * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    g(0.5 * (a + b))
}

// 6
fn conjugate_kernel_oracle() -> Check {
    let u = AssetUtility::Exponential(Default::default());
    let phi11 = u
        .conjugate_kernel(1.0, 1.0)
        .map_err(|e| e.to_string())?
        .to_f64();
    ensure((phi11 - 1.0).abs() <= 1e-15, || {
        format!("phi(1,1) = {phi11}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let y = 10f64.powf(rng.gen_range(-3.0..3.0));
        let z = 10f64.powf(rng.gen_range(-3.0..3.0));
        let oracle = golden_section(|x| z * -u.eval(x).unwrap() + y * x, -20.0, 20.0);
        let got = u
            .conjugate_kernel(y, z)
            .map_err(|e| e.to_string())?
            .to_f64();
        let rel = (got - oracle).abs() / oracle.abs().max(1.0);
        worst = worst.max(rel);
        ensure(rel <= 1e-8, || {
            format!("phi({y}, {z}) = {got}, oracle {oracle}")
        })?;
    }
    Ok(format!(
        "phi(1,1) = {phi11}, worst relative error {worst:.1e}"
    ))
}

fn random_plan(m: &MarketModel, rng: &mut ChaCha8Rng, scale: f64) -> TransferPlan {
    let flat: Vec<f64> = (0..m.num_plan_vars())
        .map(|_| rng.gen_range(0.0..scale))
        .collect();
    TransferPlan::from_flat(m, &flat)
}

// 7
fn lagrangian_recovery() -> Check {
    let inst = paper_example().build().map_err(|e| e.to_string())?;
    let (a, u, cfg) = (&inst.set, &inst.utility, &inst.solver);
    let leaves = a.tree().num_leaves();
    let mut samples = vec![(
        DualVariable::zeros(2, leaves),
        Weight::new(&[0.5, 0.5], 0.0).unwrap(),
    )];
    for w in weight_grid(2, 5, GRID_EPS).map_err(|e| e.to_string())? {
        let y = dual_scalarize(a, u, &w, None, cfg)
            .map_err(|e| e.to_string())?
            .y;
        samples.push((y, w));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let plan = random_plan(&a.market, &mut rng, 0.1);
        let x = a.terminal_position(&plan).map_err(|e| e.to_string())?;
        match primal_recovery_check(a, u, &x, &samples, cfg).map_err(|e| e.to_string())? {
            RecoveryOutcome::RecoveredF { point, min_slack } => {
                ensure(
                    min_slack >= -1e-9 * (1.0 + point.iter().map(|v| v.abs()).sum::<f64>()),
                    || format!("feasible {trial}: slack {min_slack}"),
                )?;
                // The zero multiplier attains the supremum.
                let h = lagrangian_halfspace(a, u, &x, &samples[0].0, &samples[0].1, cfg)
                    .map_err(|e| e.to_string())?;
                let target = 0.5 * (point[0] + point[1]);
                let s = h.support.to_f64();
                ensure((s - target).abs() <= 1e-12 * (1.0 + target.abs()), || {
                    format!("feasible {trial}: support {s} vs {target}")
                })?;
            }
            other => return Err(format!("feasible {trial}: {other:?}")),
        }
    }
    for trial in 0..20 {
        let plan = random_plan(&a.market, &mut rng, 0.1);
        let base = a.terminal_position(&plan).map_err(|e| e.to_string())?;
        let bump = rng.gen_range(0.05..1.0);
        let flat: Vec<f64> = base.as_flat().iter().map(|v| v + bump).collect();
        let x = TerminalPosition::from_flat(2, flat);
        match primal_recovery_check(a, u, &x, &samples, cfg).map_err(|e| e.to_string())? {
            RecoveryOutcome::CertifiedInfeasible { y, weight, slope } => {
                ensure(slope > 0.0, || format!("infeasible {trial}: slope {slope}"))?;
                let mut last = f64::NEG_INFINITY;
                let mut s = Vec::new();
                for t in [1.0, 10.0, 100.0] {
                    let ty = DualVariable {
                        y: TerminalPosition::from_flat(
                            2,
                            y.y.as_flat().iter().map(|v| t * v).collect(),
                        ),
                    };
                    let h = lagrangian_halfspace(a, u, &x, &ty, &weight, cfg)
                        .map_err(|e| e.to_string())?;
                    let v = h.support.to_f64();
                    ensure(v.is_finite() && v > last, || {
                        format!("infeasible {trial}: support {v} at t = {t}")
                    })?;
                    last = v;
                    s.push(v);
                }
                let growth = (s[2] - s[1]) / 90.0;
                ensure((growth - slope).abs() <= 1e-8 * (1.0 + slope), || {
                    format!("infeasible {trial}: growth {growth} vs slope {slope}")
                })?;
            }
            other => return Err(format!("infeasible {trial}: {other:?}")),
        }
    }
    Ok("20 attainable points recovered, 20 unattainable points certified".into())
}

// 8
fn upper_image_sandwich() -> Check {
    let inst = paper_example().build().map_err(|e| e.to_string())?;
    let (a, u, cfg) = (&inst.set, &inst.utility, &inst.solver);
    let mut images = Vec::new();
    for n in [11, 21, 41] {
        let grid = weight_grid(2, n, GRID_EPS).map_err(|e| e.to_string())?;
        let img = upper_image(a, u, &grid, cfg).map_err(|e| e.to_string())?;
        ensure(img.skipped.is_empty(), || {
            format!("grid {n}: skipped {:?}", img.skipped)
        })?;
        let slack = img.sandwich_slack();
        ensure(slack >= -1e-9, || {
            format!("grid {n}: sandwich slack {slack:e}")
        })?;
        images.push(img);
    }
    let fine = weight_grid(2, 41, GRID_EPS).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for w in &fine {
        let g: Vec<f64> = images
            .iter()
            .map(|img| img.gap_at(w))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for k in 1..g.len() {
            worst = worst.max(g[k] - g[k - 1]);
            ensure(g[k] <= g[k - 1] + 1e-10, || {
                format!("gap grew at {:?}: {:?}", w.as_slice(), g)
            })?;
        }
    }
    Ok(format!(
        "slack >= -1e-9 on all three grids, largest gap increase {worst:.1e}"
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

/// Minimum of `c x` over the vertices of `{x >= 0, rows}`; `None` if there
/// are none.
fn vertex_oracle(n: usize, c: &[f64], rows: &[(Vec<f64>, Sense, f64)]) -> Option<f64> {
    let mut all: Vec<(Vec<f64>, Sense, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        all.push((e, Sense::Ge, 0.0));
    }
    let eqs: Vec<usize> = (0..all.len()).filter(|&i| all[i].1 == Sense::Eq).collect();
    let rest: Vec<usize> = (0..all.len()).filter(|&i| all[i].1 != Sense::Eq).collect();
    if eqs.len() > n {
        return brute_overdetermined(n, c, &all);
    }
    let need = n - eqs.len();
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    combos(&rest, need, 0, &mut pick, &mut |sel| {
        let idx: Vec<usize> = eqs.iter().chain(sel).copied().collect();
        let a = DMatrix::from_fn(n, n, |r, k| all[idx[r]].0[k]);
        let b = DVector::from_fn(n, |r, _| all[idx[r]].2);
        let Some(x) = a.lu().solve(&b) else { return };
        if !feasible(&x, &all) {
            return;
        }
        let v: f64 = c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    });
    best
}

fn brute_overdetermined(n: usize, c: &[f64], all: &[(Vec<f64>, Sense, f64)]) -> Option<f64> {
    // Any vertex is pinned by n of the equalities plus feasibility of the rest.
    let ids: Vec<usize> = (0..all.len()).collect();
    let mut best: Option<f64> = None;
    let mut pick = Vec::new();
    combos(&ids, n, 0, &mut pick, &mut |sel| {
        let a = DMatrix::from_fn(n, n, |r, k| all[sel[r]].0[k]);
        let b = DVector::from_fn(n, |r, _| all[sel[r]].2);
        let Some(x) = a.lu().solve(&b) else { return };
        if feasible(&x, all) {
            let v: f64 = c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    });
    best
}

fn feasible(x: &DVector<f64>, all: &[(Vec<f64>, Sense, f64)]) -> bool {
    if x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    all.iter().all(|(row, s, b)| {
        let lhs: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        let tol = 1e-9 * (1.0 + b.abs());
        match s {
            Sense::Le => lhs <= b + tol,
            Sense::Ge => lhs >= b - tol,
            Sense::Eq => (lhs - b).abs() <= tol,
        }
    })
}

fn combos(
    items: &[usize],
    k: usize,
    start: usize,
    pick: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..items.len() {
        if items.len() - i < k - pick.len() {
            break;
        }
        pick.push(items[i]);
        combos(items, k, i + 1, pick, f);
        pick.pop();
    }
}

// 9
fn lp_against_vertex_enumeration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig::default();
    let (mut opt, mut inf) = (0, 0);
    for trial in 0..500 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let planted = rng.gen_bool(0.8);
        let xhat: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mut rows = Vec::new();
        for _ in 0..m {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax: f64 = a.iter().zip(&xhat).map(|(p, q)| p * q).sum();
            let sense = match rng.gen_range(0..10) {
                0 => Sense::Eq,
                1..=4 => Sense::Le,
                _ => Sense::Ge,
            };
            let b = if !planted {
                rng.gen_range(-5.0..5.0)
            } else {
                match sense {
                    Sense::Eq => ax,
                    Sense::Le => ax + rng.gen_range(0.0..1.0),
                    Sense::Ge => ax - rng.gen_range(0.0..1.0),
                }
            };
            rows.push((a, sense, b));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e, Sense::Le, 10.0));
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut lp = LinearProgram::new(n).minimize(c.clone());
        for (a, s, b) in &rows {
            match s {
                Sense::Le => lp.add_leq(a.clone(), *b),
                Sense::Ge => lp.add_geq(a.clone(), *b),
                Sense::Eq => lp.add_eq(a.clone(), *b),
            };
        }
        let got = lp.solve(&cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        match (got, vertex_oracle(n, &c, &rows)) {
            (LpOutcome::Optimal(sol), Some(v)) => {
                opt += 1;
                ensure((sol.value - v).abs() <= 1e-7 * (1.0 + v.abs()), || {
                    format!("trial {trial}: simplex {} vs oracle {v}", sol.value)
                })?;
            }
            (LpOutcome::Infeasible(_), None) => inf += 1,
            (LpOutcome::Optimal(sol), None) => {
                return Err(format!(
                    "trial {trial}: simplex {} but oracle infeasible",
                    sol.value
                ))
            }
            (LpOutcome::Infeasible(_), Some(v)) => {
                return Err(format!("trial {trial}: simplex infeasible but oracle {v}"))
            }
            (LpOutcome::Unbounded { .. }, _) => {
                return Err(format!("trial {trial}: unbounded on a box"))
            }
        }
    }
    Ok(format!("{opt} optimal, {inf} infeasible, all agree"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("ternary example duality run", ternary_example_duality_run),
        ("one-asset closed form", one_asset_closed_form),
        ("static two-asset brute force", static_two_asset_brute_force),
        ("arbitrage dichotomy on random markets", arbitrage_dichotomy),
        ("cone algebra", cone_algebra),
        ("conjugate kernel oracle", conjugate_kernel_oracle),
        ("lagrangian recovery", lagrangian_recovery),
        ("upper image sandwich and refinement", upper_image_sandwich),
        (
            "lp against vertex enumeration",
            lp_against_vertex_enumeration,
        ),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {} {name} ({secs:.2} s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.2} s): {why}", k + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
