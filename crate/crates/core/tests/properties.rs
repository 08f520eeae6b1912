//! Randomized invariants over generated graphs.

use bagofpaths::distance::{
    distance_via_recurrence, potential_distance, potential_to_target, surprisal_distance, Measure,
};
use bagofpaths::graph::Graph;
use bagofpaths::kernel::distance_to_kernel;
use bagofpaths::model::BopModel;
use bagofpaths::synth::{
    rand_below, rand_unit, random_connected_undirected, random_strongly_connected, rng_from_seed,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn any_graph(seed: u64, max_n: usize) -> Graph {
    let mut rng = rng_from_seed(seed);
    let n = 2 + rand_below(&mut rng, (max_n - 1) as u64) as usize;
    if rand_below(&mut rng, 2) == 0 {
        random_connected_undirected(n, 0.4, 4, &mut rng)
    } else {
        random_strongly_connected(n, 3.min(n), 3, &mut rng)
    }
}

fn any_theta(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    0.05 + 4.95 * rand_unit(&mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_rows_sum_to_one(seed in any::<u64>()) {
        let g = any_graph(seed, 20);
        let p = g.reference_transitions();
        for i in 0..g.n() {
            let sum: f64 = (0..g.n()).map(|j| p.prob(i, j)).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            for j in 0..g.n() {
                // support agreement between transitions, affinities and costs
                prop_assert_eq!(p.prob(i, j) > 0.0, g.affinity(i, j) > 0.0);
                prop_assert_eq!(g.affinity(i, j) > 0.0, g.cost(i, j).is_finite());
            }
        }
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>()) {
        let g = any_graph(seed, 12);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::load_edge_list(&buf[..]).unwrap();
        prop_assert_eq!(&g, &back);
    }

    #[test]
    fn probability_matrices_sum_to_one(seed in any::<u64>()) {
        let g = any_graph(seed, 16);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        for include in [true, false] {
            let reg = m.regular_probabilities(include).unwrap();
            prop_assert!((reg.total() - 1.0).abs() <= 1e-10);
            let hit = m.hitting_probabilities(include).unwrap();
            prop_assert!((hit.total() - 1.0).abs() <= 1e-10);
            prop_assert!(reg.matrix().iter().all(|v| *v >= 0.0));
            prop_assert!(hit.matrix().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn hitting_columns_match_rank_one_identity(seed in any::<u64>()) {
        let g = any_graph(seed, 12);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        let n = m.graph().n();
        for j in 0..n {
            let col = m.hitting_column_direct(j).unwrap();
            for i in 0..n {
                prop_assert!((col[i] - m.z_h()[(i, j)]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn backward_recurrence_of_hitting_mass(seed in any::<u64>()) {
        let g = any_graph(seed, 12);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        let n = m.graph().n();
        for k in 0..n {
            prop_assert_eq!(m.z_h()[(k, k)], 1.0);
            for i in 0..n {
                if i == k {
                    continue;
                }
                let rhs: f64 = (0..n).map(|j| m.w()[(i, j)] * m.z_h()[(j, k)]).sum();
                prop_assert!((m.z_h()[(i, k)] - rhs).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn bounded_series_climbs_to_the_partition(seed in any::<u64>()) {
        let g = any_graph(seed, 12);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        let mut prev = 0.0;
        let mut full = 0.0;
        for t in 0..12 {
            let (bounded, total) = m.bounded_partition_check(t);
            prop_assert!(bounded >= prev - 1e-12);
            prop_assert!(bounded <= total * (1.0 + 1e-12));
            prev = bounded;
            full = total;
        }
        let (far, _) = m.bounded_partition_check(400);
        prop_assert!((far - full).abs() <= 1e-6 * full.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_axioms_hold_for_both_measures(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let n = 3 + rand_below(&mut rng, 28) as usize;
        let g = if rand_below(&mut rng, 2) == 0 {
            random_connected_undirected(n, 0.3, 5, &mut rng)
        } else {
            random_strongly_connected(n, n / 2, 3, &mut rng)
        };
        let theta = 0.05 + 4.95 * rand_unit(&mut rng);
        let m = BopModel::build(g, theta).unwrap();
        for d in [surprisal_distance(&m), potential_distance(&m)] {
            for i in 0..n {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
                    if i != j {
                        prop_assert!(d.get(i, j) > 0.0);
                    }
                    for k in 0..n {
                        let (a, b, c) = (d.get(i, k), d.get(i, j), d.get(j, k));
                        if a.is_finite() && b.is_finite() && c.is_finite() {
                            prop_assert!(a <= b + c + 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn potential_is_affine_in_surprisal(seed in any::<u64>()) {
        let g = any_graph(seed, 14);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        let dh = surprisal_distance(&m);
        let dphi = potential_distance(&m);
        let log_partition = m.z_h().iter().sum::<f64>().ln();
        for i in 0..m.graph().n() {
            for j in 0..m.graph().n() {
                if i == j || !dh.get(i, j).is_finite() {
                    continue;
                }
                let expected = (dh.get(i, j) - log_partition) / m.theta();
                prop_assert!((dphi.get(i, j) - expected).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn recurrence_agrees_with_dense_potentials(seed in any::<u64>()) {
        let g = any_graph(seed, 10);
        let m = BopModel::build(g, any_theta(seed)).unwrap();
        let tolerance = 1e-12;
        let n = m.graph().n();
        for k in 0..n {
            let phi = potential_to_target(&m, k, tolerance, 200_000).unwrap();
            for i in 0..n {
                let dense = {
                    let z = m.z_h()[(i, k)];
                    if z > 0.0 { -z.ln() / m.theta() } else { f64::INFINITY }
                };
                if dense.is_finite() {
                    prop_assert!((phi[i] - dense).abs() <= 10.0 * tolerance.max(1e-10));
                } else {
                    prop_assert_eq!(phi[i], f64::INFINITY);
                }
            }
        }
    }

    #[test]
    fn kernels_stay_centered_and_symmetric(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let n = 3 + rand_below(&mut rng, 10) as usize;
        let g = random_connected_undirected(n, 0.5, 4, &mut rng);
        let theta = 0.05 + 4.95 * rand_unit(&mut rng);
        let m = BopModel::build(g, theta).unwrap();
        for (measure, clip) in [(Measure::Potential, false), (Measure::Surprisal, true)] {
            let d = match measure {
                Measure::Potential => potential_distance(&m),
                Measure::Surprisal => surprisal_distance(&m),
            };
            let k = distance_to_kernel(&d, clip).unwrap();
            let scale = k.matrix().iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for i in 0..n {
                let row: f64 = (0..n).map(|j| k.matrix()[(i, j)]).sum();
                let col: f64 = (0..n).map(|j| k.matrix()[(j, i)]).sum();
                prop_assert!(row.abs() <= 1e-8 * scale.max(1.0));
                prop_assert!(col.abs() <= 1e-8 * scale.max(1.0));
                for j in 0..n {
                    prop_assert_eq!(k.matrix()[(i, j)].to_bits(), k.matrix()[(j, i)].to_bits());
                }
            }
        }
    }

    #[test]
    fn recurrence_surprisal_matches_dense(seed in any::<u64>()) {
        let g = any_graph(seed, 8);
        let m = BopModel::build(g, 0.3 + any_theta(seed) / 5.0).unwrap();
        let dense = surprisal_distance(&m);
        let via = distance_via_recurrence(&m, Measure::Surprisal, 1e-13, 400_000).unwrap();
        for i in 0..m.graph().n() {
            for j in 0..m.graph().n() {
                if dense.get(i, j).is_finite() {
                    prop_assert!((via.get(i, j) - dense.get(i, j)).abs() <= 1e-8);
                } else {
                    prop_assert_eq!(via.get(i, j), f64::INFINITY);
                }
            }
        }
    }
}

#[test]
fn enumeration_mass_never_exceeds_fundamental_entries() {
    let mut rng = rng_from_seed(99);
    for _ in 0..6 {
        let n = 3 + rand_below(&mut rng, 3) as usize;
        let g = random_strongly_connected(n, 2, 2, &mut rng);
        let m = BopModel::build(g.clone(), 1.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let e = bagofpaths::oracle::enumerate_path_mass(&g, 1.0, i, j, 12, false).unwrap();
                assert!(e.mass <= m.z()[(i, j)] + 1e-12);
                let h = bagofpaths::oracle::enumerate_path_mass(&g, 1.0, i, j, 12, true).unwrap();
                assert!(h.mass <= m.z_h()[(i, j)] + 1e-12);
            }
        }
    }
}

#[test]
fn probability_headers_follow_the_kind() {
    let g = Graph::build(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), None).unwrap();
    let m = BopModel::build(g, 1.0).unwrap();
    for (include, hitting, tag) in [
        (true, false, "kind=regular "),
        (false, false, "kind=regular-nonzero "),
        (true, true, "kind=hitting "),
        (false, true, "kind=hitting-nonzero "),
    ] {
        let p = if hitting {
            m.hitting_probabilities(include).unwrap()
        } else {
            m.regular_probabilities(include).unwrap()
        };
        let mut buf = Vec::new();
        p.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(tag), "missing {tag} in {text}");
    }
}
