use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_sir::fortet::{
    dictionary_lower_bound, fortet_distance, fortet_lp, fortet_snapped, stencil_distance, Measure, SnappedMeasure,
};
use torus_sir_core::stats::median;
use torus_sir_core::{GridField, TorusPoint};

fn pt(a: f64, b: f64) -> TorusPoint {
    TorusPoint::wrap(a, b).unwrap()
}

fn node_measure(res: usize, masses: &[((usize, usize), f64)]) -> SnappedMeasure {
    let h = 1.0 / res as f64;
    let atoms: Vec<(TorusPoint, f64)> = masses.iter().map(|&((i, j), m)| (pt(i as f64 * h, j as f64 * h), m)).collect();
    SnappedMeasure::from_atoms(&atoms, res).unwrap()
}

/// Transport between the positive and negative parts of `a - b`, with a free
/// reservoir reachable from every node at cost 1, by successive shortest paths
/// over Floyd-Warshall distances of the stencil.
fn transport_oracle(a: &SnappedMeasure, b: &SnappedMeasure) -> f64 {
    let res = a.resolution();
    let n = res * res;
    let d = {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (x, row) in d.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                let (dx, dy) = ((x / res).abs_diff(y / res), (x % res).abs_diff(y % res));
                let (dx, dy) = (dx.min(res - dx), dy.min(res - dy));
                let h = 1.0 / res as f64;
                *cell = match (dx, dy) {
                    (0, 0) => 0.0,
                    (1, 0) | (0, 1) => h,
                    (1, 1) => h * std::f64::consts::SQRT_2,
                    _ => f64::INFINITY,
                };
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    };
    let mut full = vec![vec![0.0; n + 1]; n + 1];
    for u in 0..n {
        for v in 0..n {
            full[u][v] = d[u][v].min(2.0);
        }
        full[u][n] = 1.0;
        full[n][u] = 1.0;
    }
    let diff: Vec<f64> = a.masses().iter().zip(b.masses()).map(|(x, y)| x - y).collect();
    let total: f64 = diff.iter().sum();
    let mut supply: Vec<f64> = diff.clone();
    supply.push(-total);
    // Successive shortest augmenting paths in the residual bipartite graph.
    let sources: Vec<usize> = (0..=n).filter(|&u| supply[u] > 1e-15).collect();
    let sinks: Vec<usize> = (0..=n).filter(|&u| supply[u] < -1e-15).collect();
    let (ns, nt) = (sources.len(), sinks.len());
    let mut flow = vec![vec![0.0; nt]; ns];
    let mut left: Vec<f64> = sources.iter().map(|&u| supply[u]).collect();
    let mut need: Vec<f64> = sinks.iter().map(|&v| -supply[v]).collect();
    let mut cost = 0.0;
    loop {
        if left.iter().all(|&x| x <= 1e-14) {
            break;
        }
        // Bellman-Ford over nodes 0..ns (sources) and ns..ns+nt (sinks).
        let m = ns + nt;
        let mut d = vec![f64::INFINITY; m];
        let mut prev = vec![usize::MAX; m];
        for s in 0..ns {
            if left[s] > 1e-14 {
                d[s] = 0.0;
            }
        }
        for _ in 0..m {
            let mut changed = false;
            for s in 0..ns {
                for t in 0..nt {
                    let c = full[sources[s]][sinks[t]];
                    if d[s] + c < d[ns + t] - 1e-15 {
                        d[ns + t] = d[s] + c;
                        prev[ns + t] = s;
                        changed = true;
                    }
                    if flow[s][t] > 1e-15 && d[ns + t] - c < d[s] - 1e-15 {
                        d[s] = d[ns + t] - c;
                        prev[s] = ns + t;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let t_end = (0..nt).filter(|&t| need[t] > 1e-14 && d[ns + t].is_finite()).min_by(|&x, &y| d[ns + x].total_cmp(&d[ns + y]));
        let Some(t_end) = t_end else { break };
        // Bottleneck along the path.
        let mut path = vec![ns + t_end];
        while path.last().map_or(false, |&x| prev[x] != usize::MAX) {
            path.push(prev[*path.last().unwrap()]);
        }
        let start = *path.last().unwrap();
        let mut amount = left[start].min(need[t_end]);
        for w in path.windows(2) {
            if w[0] < ns {
                amount = amount.min(flow[w[0]][w[1] - ns]);
            }
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if to >= ns {
                flow[from][to - ns] += amount;
                cost += amount * full[sources[from]][sinks[to - ns]];
            } else {
                flow[to][from - ns] -= amount;
                cost -= amount * full[sources[to]][sinks[from - ns]];
            }
        }
        left[start] -= amount;
        need[t_end] -= amount;
    }
    cost
}

fn random_snapped(res: usize, atoms: usize, rng: &mut ChaCha8Rng) -> SnappedMeasure {
    let masses: Vec<((usize, usize), f64)> =
        (0..atoms).map(|_| ((rng.random_range(0..res), rng.random_range(0..res)), rng.random_range(0.0..0.5))).collect();
    node_measure(res, &masses)
}

#[test]
fn identical_measures_are_at_distance_zero() {
    let atoms = [(pt(0.1, 0.2), 0.3), (pt(0.7, 0.4), 0.2)];
    let est = fortet_distance(Measure::Atoms(&atoms), Measure::Atoms(&atoms), 16).unwrap();
    assert_eq!(est.lp, 0.0);
    assert_eq!(est.lower_bound, 0.0);
}

#[test]
fn two_atoms_match_the_stencil_path_length() {
    let res = 16;
    for (p, q) in [((0, 0), (3, 0)), ((0, 0), (2, 5)), ((1, 1), (15, 14)), ((4, 4), (12, 12))] {
        let a = node_measure(res, &[(p, 0.5)]);
        let b = node_measure(res, &[(q, 0.5)]);
        let lp = fortet_lp(&a, &b).unwrap().value;
        let expected = 0.5 * stencil_distance(res, p, q);
        assert!((lp - expected).abs() < 1e-12, "{p:?} {q:?}: {lp} vs {expected}");
    }
}

#[test]
fn far_atoms_cost_at_most_the_mass_bound() {
    // |f| <= 1 caps the distance at the total variation.
    let res = 64;
    let a = node_measure(res, &[((0, 0), 0.2)]);
    let b = node_measure(res, &[((32, 32), 0.2)]);
    let lp = fortet_lp(&a, &b).unwrap().value;
    let path = 0.2 * stencil_distance(res, (0, 0), (32, 32));
    assert!((lp - path.min(0.4)).abs() < 1e-12);
}

#[test]
fn unequal_masses_pay_for_the_excess() {
    let res = 8;
    let a = node_measure(res, &[((0, 0), 0.7)]);
    let b = node_measure(res, &[((1, 0), 0.4)]);
    let lp = fortet_lp(&a, &b).unwrap().value;
    assert!((lp - (0.4 / 8.0 + 0.3)).abs() < 1e-12, "{lp}");
}

#[test]
fn matches_transport_oracle_on_small_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..25 {
        let res = [3, 4, 5][case % 3];
        let a = random_snapped(res, 4, &mut rng);
        let b = random_snapped(res, 4, &mut rng);
        let lp = fortet_lp(&a, &b).unwrap().value;
        let oracle = transport_oracle(&a, &b);
        assert!((lp - oracle).abs() < 1e-10, "case {case}: {lp} vs {oracle}");
    }
}

#[test]
fn test_function_certifies_optimality_at_full_resolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let res = 64;
    let atoms: Vec<(TorusPoint, f64)> = (0..400).map(|_| (pt(rng.random(), rng.random()), 1.0 / 400.0)).collect();
    let density = GridField::new(128, vec![1.0; 128 * 128]).unwrap();
    let a = Measure::Atoms(&atoms).snap(res).unwrap();
    let b = Measure::Density(&density).snap(res).unwrap();
    assert!((b.total_mass() - 1.0).abs() < 1e-12);
    let sol = fortet_lp(&a, &b).unwrap();
    let f = &sol.test_function;
    let h = 1.0 / res as f64;
    for i1 in 0..res {
        for i2 in 0..res {
            let c = i1 * res + i2;
            assert!(f[c].abs() <= 1.0 + 1e-9);
            for (d1, d2, w) in [(1, 0, h), (0, 1, h), (1, 1, h * 2f64.sqrt()), (1, res - 1, h * 2f64.sqrt())] {
                let d = ((i1 + d1) % res) * res + (i2 + d2) % res;
                assert!((f[c] - f[d]).abs() <= w + 1e-9, "edge {c}-{d}");
            }
        }
    }
    let dual: f64 = a.masses().iter().zip(b.masses()).zip(f).map(|((x, y), g)| (x - y) * g).sum();
    assert!((dual - sol.value).abs() < 1e-9 * sol.value.max(1.0), "{dual} vs {}", sol.value);
}

#[test]
fn lp_sits_within_stencil_bias_of_the_torus_distance() {
    // Two atoms: d_F = m * min(|p - q|, 2) on the torus.
    let res = 32;
    let h = 1.0 / res as f64;
    for (p, q) in [((0, 0), (5, 2)), ((3, 7), (10, 9)), ((0, 0), (4, 4))] {
        let a = node_measure(res, &[(p, 1.0)]);
        let b = node_measure(res, &[(q, 1.0)]);
        let lp = fortet_lp(&a, &b).unwrap().value;
        let eu = h * (((p.0 as f64 - q.0 as f64).powi(2) + (p.1 as f64 - q.1 as f64).powi(2)).sqrt());
        assert!(lp >= eu - 1e-12 && lp <= 1.0824 * eu + 1e-12, "{lp} vs {eu}");
    }
}

#[test]
fn median_distance_to_uniform_falls_with_population() {
    let density = GridField::new(64, vec![1.0; 64 * 64]).unwrap();
    let reference = Measure::Density(&density).snap(32).unwrap();
    let mut medians = Vec::new();
    for n in [200, 800, 3200] {
        let d: Vec<f64> = (0..5)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
                let atoms: Vec<(TorusPoint, f64)> = (0..n).map(|_| (pt(rng.random(), rng.random()), 1.0 / n as f64)).collect();
                fortet_snapped(&Measure::Atoms(&atoms).snap(32).unwrap(), &reference).unwrap().lp
            })
            .collect();
        medians.push(median(&d).unwrap());
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

fn arb_measure(res: usize) -> impl Strategy<Value = SnappedMeasure> {
    prop::collection::vec(((0..res, 0..res), 0.0f64..0.5), 1..6).prop_map(move |m| node_measure(res, &m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_symmetric(a in arb_measure(6), b in arb_measure(6)) {
        let ab = fortet_lp(&a, &b).unwrap().value;
        let ba = fortet_lp(&b, &a).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn triangle_inequality_holds(a in arb_measure(6), b in arb_measure(6), c in arb_measure(6)) {
        let ac = fortet_lp(&a, &c).unwrap().value;
        let ab = fortet_lp(&a, &b).unwrap().value;
        let bc = fortet_lp(&b, &c).unwrap().value;
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    #[test]
    fn dictionary_bound_never_exceeds_lp(a in arb_measure(8), b in arb_measure(8)) {
        let lp = fortet_lp(&a, &b).unwrap().value;
        let lower = dictionary_lower_bound(&a, &b, 8).unwrap();
        prop_assert!(lower <= lp + 1e-10, "{} > {}", lower, lp);
    }
}
