use std::collections::HashMap;

use bppd_core::circuit::Instruction;
use bppd_core::dem::{extract_dem, propagate_fault};
use bppd_core::frame::{sample_dem_errors, sample_dem_shots, sample_shots, FrameSampler};
use bppd_core::pauli::{Pauli, PauliString};
use bppd_core::surface::build_memory_circuit;

/// Every single-qubit Pauli after every single-qubit noise channel, and
/// every pair after every two-qubit channel.
fn channel_faults(c: &bppd_core::circuit::Circuit) -> Vec<(usize, PauliString)> {
    let mut out = Vec::new();
    for (at, ins) in c.instructions.iter().enumerate() {
        match ins {
            Instruction::Depolarize1 { targets, .. } => {
                for &q in targets {
                    for p in Pauli::ALL {
                        out.push((at, PauliString::single(q, p)));
                    }
                }
            }
            Instruction::Depolarize2 { pairs, .. } => {
                for &(a, b) in pairs {
                    for i in 1..16 {
                        let mut f = PauliString::new();
                        if i / 4 > 0 {
                            f.multiply(a, Pauli::ALL[i / 4 - 1]);
                        }
                        if i % 4 > 0 {
                            f.multiply(b, Pauli::ALL[i % 4 - 1]);
                        }
                        out.push((at, f));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[test]
fn injected_faults_match_backward_propagation_and_the_model() {
    let c = build_memory_circuit(3, 3, 0.01).unwrap();
    let dem = extract_dem(&c).unwrap();
    let columns: HashMap<(Vec<u32>, Vec<u32>), usize> = (0..dem.n_mechanisms())
        .map(|k| ((dem.detectors_of(k).to_vec(), dem.observables_of(k).to_vec()), k))
        .collect();
    let sampler = FrameSampler::new(&c).unwrap();
    let faults = channel_faults(&c);
    assert!(faults.len() > 1000);
    let mut nontrivial = 0;
    for (at, f) in &faults {
        let shot = sampler.inject(&[(*at, f)]);
        let dets: Vec<u32> = shot.syndrome.iter_ones().map(|i| i as u32).collect();
        let obs: Vec<u32> = shot.true_homology.iter_ones().map(|i| i as u32).collect();
        assert_eq!(propagate_fault(&c, Some(*at), f).unwrap(), (dets.clone(), obs.clone()));
        if !dets.is_empty() || !obs.is_empty() {
            nontrivial += 1;
            assert!(columns.contains_key(&(dets, obs)), "fault {f:?} at {at} has no column");
        }
    }
    assert!(nontrivial > 0);
}

#[test]
fn frame_propagation_is_linear() {
    let c = build_memory_circuit(3, 3, 0.01).unwrap();
    let sampler = FrameSampler::new(&c).unwrap();
    let faults = channel_faults(&c);
    for i in (0..faults.len()).step_by(37) {
        let j = (i * 7919 + 13) % faults.len();
        let (a, fa) = (&faults[i].0, &faults[i].1);
        let (b, fb) = (&faults[j].0, &faults[j].1);
        let s1 = sampler.inject(&[(*a, fa)]);
        let s2 = sampler.inject(&[(*b, fb)]);
        let both = sampler.inject(&[(*a, fa), (*b, fb)]);
        assert_eq!(both.syndrome, &s1.syndrome ^ &s2.syndrome);
        assert_eq!(both.true_homology, &s1.true_homology ^ &s2.true_homology);
    }
}

#[test]
fn detector_rates_match_the_model() {
    let c = build_memory_circuit(3, 3, 0.01).unwrap();
    let dem = extract_dem(&c).unwrap();
    let n = 100_000u64;
    let shots = sample_shots(&c, n, 2024).unwrap();
    let mut fired = vec![0u64; dem.n_detectors()];
    for s in &shots {
        for i in s.syndrome.iter_ones() {
            fired[i] += 1;
        }
    }
    // Independent mechanisms: P(odd number fire) = (1 - prod(1 - 2 p_k)) / 2.
    let mut keep = vec![1.0f64; dem.n_detectors()];
    for k in 0..dem.n_mechanisms() {
        for &d in dem.detectors_of(k) {
            keep[d as usize] *= 1.0 - 2.0 * dem.priors()[k];
        }
    }
    for (d, &count) in fired.iter().enumerate() {
        let rate = (1.0 - keep[d]) / 2.0;
        let sigma = (n as f64 * rate * (1.0 - rate)).sqrt();
        let dev = (count as f64 - n as f64 * rate).abs();
        assert!(dev <= 5.0 * sigma, "detector {d}: {count} vs {:.1}", n as f64 * rate);
    }
}

#[test]
fn model_sampler_frequencies() {
    let dem = extract_dem(&build_memory_circuit(3, 3, 0.01).unwrap()).unwrap();
    let n = 1_000_000u64;
    let chunk = 100_000u64;
    let mut counts = vec![0u64; dem.n_mechanisms()];
    for start in (0..n).step_by(chunk as usize) {
        for e in sample_dem_errors(&dem, 8, start, chunk) {
            for k in e.iter_ones() {
                counts[k] += 1;
            }
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = dem.priors()[k];
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - n as f64 * p).abs() <= 5.0 * sigma.max(1.0), "mechanism {k}: {c} vs p={p}");
    }
    let errors = sample_dem_errors(&dem, 8, 0, 50);
    for (e, shot) in errors.iter().zip(sample_dem_shots(&dem, 50, 8)) {
        assert_eq!(shot.syndrome, dem.syndrome_of(e));
        assert_eq!(shot.true_homology, dem.homology_of(e));
    }
}

#[test]
fn shot_stream_is_independent_of_thread_count() {
    let c = build_memory_circuit(5, 5, 0.01).unwrap();
    let sampler = FrameSampler::new(&c).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sampler.sample_range(77, 0, 3000))
    };
    assert_eq!(run(1), run(4));
}
