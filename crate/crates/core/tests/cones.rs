use conic_duality_core::cones::extreme_rays;
use conic_duality_core::{polar_cone, solvency_cone, validate_bidask, PolyCone};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bid-ask matrix from log prices and proportional spreads, closed under the
/// triangle rule.
fn bidask(logp: &[f64], spread: &[f64]) -> Vec<Vec<f64>> {
    let d = logp.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                l[i][j] = logp[j] - logp[i] + spread[i * d + j].ln_1p();
            }
        }
    }
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                l[i][j] = l[i][j].min(l[i][k] + l[k][j]);
            }
        }
    }
    l.iter()
        .map(|r| r.iter().map(|v| v.exp()).collect())
        .collect()
}

fn market_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0f64..1.0, d),
            prop::collection::vec(0.0f64..0.5, d * d),
        )
            .prop_map(|(p, s)| bidask(&p, &s))
    })
}

proptest! {
    #[test]
    fn polar_pairs_nonnegatively(rows in market_matrix()) {
        let pi = validate_bidask(&rows).unwrap();
        let k = solvency_cone(&pi).unwrap();
        let kp = polar_cone(&k).unwrap();
        for g in k.generators() {
            for w in kp.generators() {
                prop_assert!(dot(g, w) >= -1e-9);
            }
        }
        // The orthant sits inside every solvency cone.
        let d = rows.len();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            prop_assert!(k.contains(&e, 1e-9));
        }
    }

    #[test]
    fn double_polar_recovers_the_cone(rows in market_matrix()) {
        let k = solvency_cone(&validate_bidask(&rows).unwrap()).unwrap();
        let kpp = k.polar().unwrap().polar().unwrap();
        for g in k.generators() {
            prop_assert!(kpp.contains(g, 1e-8));
        }
        for g in kpp.generators() {
            prop_assert!(k.contains(g, 1e-8));
        }
    }
}

#[test]
fn orthant_is_self_polar() {
    for d in 1..=5 {
        let k = PolyCone::orthant(d).unwrap();
        let p = k.polar().unwrap();
        assert_eq!(p.generators().len(), d);
        for g in p.generators() {
            assert!(g.iter().all(|&v| v >= -1e-12));
            assert_eq!(g.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        }
    }
}

#[test]
fn rays_of_a_square_cone() {
    // |x| <= z, |y| <= z in R^3 has four extreme rays.
    let normals = vec![
        vec![1.0, 0.0, 1.0],
        vec![-1.0, 0.0, 1.0],
        vec![0.0, 1.0, 1.0],
        vec![0.0, -1.0, 1.0],
    ];
    let rays = extreme_rays(3, &normals).unwrap();
    assert_eq!(rays.len(), 4);
    for r in &rays {
        assert!((r[0].abs() - r[2]).abs() < 1e-12 && (r[1].abs() - r[2]).abs() < 1e-12);
    }
}
