mod common;

use bppd_core::bp::{
    bp_decode, bp_init, check_to_error_messages, error_to_check_messages, posterior_and_decision,
    prior_odds, BpState,
};
use bppd_core::dem::DetectorErrorModel;
use bppd_core::Syndrome;
use common::oracles::{exact_marginals, random_forest_dem, relative_error};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Posteriors after `iterations` full parallel iterations, without stopping at
/// convergence.
fn posteriors_after(dem: &DetectorErrorModel, s: &Syndrome, iterations: usize) -> Vec<f64> {
    let t = bp_init(dem).unwrap();
    let odds = prior_odds(dem.priors());
    let mut st = BpState::new(&t);
    st.reset(&t, &odds, s);
    for _ in 0..iterations {
        check_to_error_messages(&t, &mut st, s);
        error_to_check_messages(&t, &mut st, &odds);
        posterior_and_decision(&t, &mut st, &odds, s);
    }
    st.chi.iter().map(|c| c / (1.0 + c)).collect()
}

#[test]
fn forest_posteriors_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let (dem, s) = random_forest_dem(&mut rng, 30);
        let iters = dem.n_mechanisms() + dem.n_detectors() + 1;
        let bp = posteriors_after(&dem, &s, iters);
        let exact = exact_marginals(&dem, &s);
        for k in 0..bp.len() {
            assert!(
                relative_error(bp[k], exact[k]) < 1e-9,
                "trial {trial} column {k}: {} vs {}",
                bp[k],
                exact[k]
            );
        }
    }
}

#[test]
fn chain_matches_enumeration() {
    let dem = DetectorErrorModel::new(
        2,
        0,
        vec![
            (vec![0], vec![], 0.05),
            (vec![0, 1], vec![], 0.05),
            (vec![1], vec![], 0.05),
        ],
    )
    .unwrap();
    for ones in [vec![0usize, 1], vec![0], vec![1]] {
        let s = Syndrome::from_ones(2, ones);
        let exact = exact_marginals(&dem, &s);
        let bp = posteriors_after(&dem, &s, 5);
        for k in 0..3 {
            assert!(relative_error(bp[k], exact[k]) < 1e-12);
        }
        let r = bp_decode(&dem, &s, 30).unwrap();
        let best: Vec<bool> = exact.iter().map(|&p| p >= 0.5).collect();
        assert_eq!(r.hard_decision.to_bools(), best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_decisions_reproduce_syndrome(seed in any::<u64>(), m_iter in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dem, s) = random_forest_dem(&mut rng, 20);
        let r = bp_decode(&dem, &s, m_iter).unwrap();
        prop_assert!(r.iterations_used <= m_iter);
        prop_assert_eq!(r.converged, dem.syndrome_of(&r.hard_decision) == s);
        for (k, &chi) in r.odds.iter().enumerate() {
            prop_assert!(chi.is_finite() && chi > 0.0);
            prop_assert_eq!(r.hard_decision.get(k), chi >= 1.0);
        }
        let again = bp_decode(&dem, &s, m_iter).unwrap();
        prop_assert_eq!(r, again);
    }
}
