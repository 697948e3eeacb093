use bppd_core::bench::{
    convergence_curve, run_experiment, weight_histograms, DecoderKind, Experiment,
    ExperimentConfig, Pipeline,
};
use bppd_core::partial::TwoStageDecoder;

fn cfg(d: usize, p: f64, decoder: DecoderKind, shots: u64) -> ExperimentConfig {
    ExperimentConfig {
        shots,
        seed: 11,
        timing_batch: 0,
        ..ExperimentConfig::new(d, p, decoder)
    }
}

#[test]
fn combined_corrections_reproduce_the_syndrome() {
    let pipeline = Pipeline::build(5, 5, 0.008).unwrap();
    let two = TwoStageDecoder::new(pipeline.dem(), pipeline.graph(), 30, 0.9).unwrap();
    let mut ws = two.workspace();
    let mut invoked = 0;
    for shot in pipeline.sampler().sample_range(3, 0, 1500) {
        let r = two.decode_with(&shot.syndrome, &mut ws).unwrap();
        let p = &r.partial;
        let dem = pipeline.dem();
        assert_eq!(p.s_p, &shot.syndrome ^ &dem.syndrome_of(&p.e_p));
        assert_eq!(p.lambda_p, dem.homology_of(&p.e_p));
        assert_eq!(p.original_weight, shot.syndrome.weight());
        assert_eq!(p.reduced_weight, p.s_p.weight());
        // Applying the update twice restores the syndrome.
        assert_eq!(&p.s_p ^ &dem.syndrome_of(&p.e_p), shot.syndrome);
        match &r.correction {
            Some(c) => {
                invoked += 1;
                let combined = &p.e_p ^ &c.e_c;
                assert_eq!(dem.syndrome_of(&combined), shot.syndrome);
                assert_eq!(r.homology, &p.lambda_p ^ &c.lambda_c);
            }
            None => {
                assert!(p.s_p.is_zero());
                assert_eq!(r.homology, p.lambda_p);
            }
        }
    }
    assert!(invoked > 100);
}

#[test]
fn unit_threshold_without_convergence_is_plain_matching() {
    let mwpm = cfg(5, 0.01, DecoderKind::Mwpm, 2000);
    let two = ExperimentConfig {
        m_iter: 1,
        t_bp: 1.0,
        decoder: DecoderKind::BpMwpm,
        ..mwpm.clone()
    };
    let pipeline = Pipeline::for_config(&mwpm).unwrap();
    let exp = Experiment::new(&pipeline, &[mwpm, two]).unwrap();
    let mut outcomes = [Vec::new(), Vec::new()];
    exp.run_observed(|_, i, o| outcomes[i].push(o.clone())).unwrap();
    let mut compared = 0;
    for (m, t) in outcomes[0].iter().zip(&outcomes[1]) {
        if t.bp_converged == Some(false) {
            compared += 1;
            assert_eq!(m.homology, t.homology);
            assert_eq!(t.reduced_weight, t.original_weight);
        }
    }
    assert!(compared > 1000);
}

#[test]
fn partial_decoding_reduces_syndromes_on_average() {
    let r = run_experiment(&cfg(5, 0.005, DecoderKind::BpMwpm, 2000)).unwrap();
    let ratio = r.syndrome_reduction_ratio.unwrap();
    assert!(ratio < 1.0, "{ratio}");
    assert!(r.mean_reduced_weight < r.mean_original_weight);
    let bits = bppd_core::bench::address_bits(r.n_detectors) as f64;
    assert!((r.bandwidth_bits - r.mean_reduced_weight * bits).abs() < 1e-9);
}

#[test]
fn convergence_approaches_one_at_low_noise() {
    let cfgs = vec![
        cfg(3, 0.0002, DecoderKind::BpMwpm, 20_000),
        cfg(3, 0.02, DecoderKind::BpMwpm, 2000),
    ];
    let curve = convergence_curve(&cfgs).unwrap();
    let low = curve[0].probability.unwrap();
    let high = curve[1].probability.unwrap();
    assert!(low.value > 0.9, "{low:?}");
    assert!(high.value < low.value);
    assert!(convergence_curve(&[cfg(3, 0.01, DecoderKind::Mwpm, 10)]).is_err());
}

#[test]
fn noiseless_histograms_sit_at_zero() {
    let (before, after) = weight_histograms(&cfg(3, 0.0, DecoderKind::BpMwpm, 300)).unwrap();
    assert_eq!(before, vec![300]);
    assert_eq!(after, vec![300]);
    assert!(weight_histograms(&cfg(3, 0.0, DecoderKind::Mwpm, 300)).is_err());
}

#[test]
fn belief_matching_with_prior_posteriors_is_plain_matching() {
    use bppd_core::mwpm::{BeliefMatchingDecoder, MatchingDecoder};
    let pipeline = Pipeline::build(5, 5, 0.01).unwrap();
    let bm = BeliefMatchingDecoder::new(pipeline.dem(), pipeline.graph(), 30).unwrap();
    let plain = MatchingDecoder::new(pipeline.graph());
    for shot in pipeline.sampler().sample_range(4, 0, 200) {
        let rw = bm.reweight(&shot.syndrome, pipeline.dem().priors()).unwrap();
        assert!(rw.preselected().e_c.is_zero());
        let a = rw.decode().unwrap();
        let b = plain.decode(&shot.syndrome).unwrap();
        assert_eq!(a.e_c, b.e_c);
        assert_eq!(a.lambda_c, b.lambda_c);
    }
}

#[test]
fn below_threshold_errors_fall_with_distance_and_decoders_order() {
    let p = 0.005;
    let mut by_decoder = vec![Vec::new(); 3];
    for d in [3, 5, 7] {
        let cfgs: Vec<_> = DecoderKind::ALL.iter().map(|&k| cfg(d, p, k, 10_000)).collect();
        let pipeline = Pipeline::for_config(&cfgs[0]).unwrap();
        let reports = Experiment::new(&pipeline, &cfgs).unwrap().run().unwrap();
        for (i, r) in reports.iter().enumerate() {
            assert_eq!(r.decode_failures, 0);
            by_decoder[i].push(r.logical_error_rate);
        }
        let (m, b, bm) = (
            reports[0].logical_error_rate,
            reports[1].logical_error_rate,
            reports[2].logical_error_rate,
        );
        // Ordered point estimates, or overlapping intervals.
        assert!(b.value <= m.value || b.overlaps(&m), "d={d}: {b:?} vs {m:?}");
        assert!(bm.value <= b.value || bm.overlaps(&b), "d={d}: {bm:?} vs {b:?}");
    }
    for rates in by_decoder {
        for w in rates.windows(2) {
            assert!(w[1].value < w[0].value, "{rates:?}");
        }
    }
}

#[test]
fn partial_decoding_shortens_matching() {
    for p in [0.001, 0.01] {
        let base = ExperimentConfig {
            timing_batch: 400,
            ..cfg(9, p, DecoderKind::Mwpm, 400)
        };
        let two = ExperimentConfig {
            decoder: DecoderKind::BpMwpm,
            ..base.clone()
        };
        let pipeline = Pipeline::for_config(&base).unwrap();
        let reports = Experiment::new(&pipeline, &[base, two]).unwrap().run().unwrap();
        let secs: Vec<f64> = reports
            .iter()
            .map(|r| r.timing.as_ref().unwrap().second_stage_seconds_per_shot)
            .collect();
        assert!(secs[1] < secs[0], "p={p}: {secs:?}");
    }
}
