mod common;

use bppd_core::graph::decompose_to_graph;
use bppd_core::mwpm::{BeliefMatchingDecoder, MatchingDecoder};
use common::oracles::{brute_force_matching, brute_force_matching_weighted, random_matching_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matching_is_optimal_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut unique = 0;
    for trial in 0..500 {
        let (dem, s) = random_matching_instance(&mut rng, 200, 8);
        let g = decompose_to_graph(&dem).unwrap();
        let decoder = MatchingDecoder::new(&g);
        match (brute_force_matching(&g, &s), decoder.decode(&s)) {
            (None, Err(_)) => {}
            (Some((w, mask, is_unique)), Ok(c)) => {
                assert!((c.weight - w).abs() <= 1e-9 * w.max(1.0), "trial {trial}: {} vs {w}", c.weight);
                assert_eq!(dem.syndrome_of(&c.e_c), s, "trial {trial}");
                assert_eq!(dem.homology_of(&c.e_c), c.lambda_c);
                if is_unique {
                    unique += 1;
                    assert_eq!(c.lambda_c.get(0), mask & 1 == 1, "trial {trial}");
                }
            }
            (b, d) => panic!("trial {trial}: oracle {b:?} vs decoder {d:?}"),
        }
    }
    assert!(unique > 100);
}

#[test]
fn matched_paths_have_reported_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (dem, _) = random_matching_instance(&mut rng, 60, 0);
        let g = decompose_to_graph(&dem).unwrap();
        let decoder = MatchingDecoder::new(&g);
        let n = g.n_detectors() as u32;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u == v {
            continue;
        }
        let d = decoder.distance(u, v);
        let s = bppd_core::Syndrome::from_ones(g.n_detectors(), [u as usize, v as usize]);
        let Ok(c) = decoder.decode(&s) else { continue };
        let total: f64 = c.e_c.iter_ones().map(|k| {
            let e = g.edges_of_column(k)[0];
            g.edges()[e as usize].weight
        }).sum();
        assert!((total - c.weight).abs() < 1e-9);
        assert!(c.weight <= d + 1e-9);
    }
}

/// Reweighting with posteriors above one half pre-selects edges; the total
/// signed weight must equal the pre-selected weight plus the optimum of the
/// toggled problem on absolute weights.
#[test]
fn belief_reweighting_is_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for trial in 0..300 {
        let (dem, s) = random_matching_instance(&mut rng, 80, 6);
        let g = decompose_to_graph(&dem).unwrap();
        let bm = BeliefMatchingDecoder::new(&dem, &g, 10).unwrap();
        let posteriors: Vec<f64> = (0..dem.n_mechanisms())
            .map(|_| if rng.gen_bool(0.05) { rng.gen_range(0.5..0.99) } else { rng.gen_range(0.01..0.5) })
            .collect();
        let shot = bm.reweight(&s, &posteriors).unwrap();
        if shot.syndrome.weight() > 10 {
            continue;
        }
        let brute = brute_force_matching_weighted(shot.decoder.graph(), shot.decoder.weights(), &shot.syndrome);
        match (shot.decode(), brute) {
            (Ok(c), Some((w, _, _))) => {
                assert_eq!(dem.syndrome_of(&c.e_c), s, "trial {trial}");
                let want = w + shot.preselected().weight;
                assert!((c.weight - want).abs() <= 1e-9 * want.abs().max(1.0), "trial {trial}");
                checked += 1;
            }
            (Err(_), None) => {}
            (c, b) => panic!("trial {trial}: decoder {c:?} vs oracle {b:?}"),
        }
    }
    assert!(checked > 100);
}
