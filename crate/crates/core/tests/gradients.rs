use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wespsq::nn::{
    build_spsq_cnn, gradient_check, gradient_check_with, Architecture, GradCheckOptions, SpsqModel,
    Tensor, TrainConfig,
};

const TOLERANCE: f64 = 1e-4;

fn tiny_arch() -> Architecture {
    Architecture {
        n_times: 12,
        n_channels: 5,
        spatial_filters: 4,
        temporal_kernel: 4,
        temporal_filters: 3,
        hidden: 6,
    }
}

/// Perturbs normalization parameters and running statistics away from identity
/// so their gradients are exercised.
fn randomize_normalization(model: &mut SpsqModel<f64>, rng: &mut ChaCha8Rng) {
    for t in [Tensor::Bn1Gamma, Tensor::Bn2Gamma] {
        for g in model.tensor_mut(t) {
            *g = rng.random_range(0.5..1.5);
        }
    }
    for t in [
        Tensor::Bn1Beta,
        Tensor::Bn2Beta,
        Tensor::Conv2dBias,
        Tensor::Conv1dBias,
    ] {
        for b in model.tensor_mut(t) {
            *b = rng.random_range(-0.2..0.2);
        }
    }
    for layer in 0..2 {
        let stats = if layer == 0 {
            model.bn1_stats_mut()
        } else {
            model.bn2_stats_mut()
        };
        for m in &mut stats.mean {
            *m = rng.random_range(-0.3..0.3);
        }
        for v in &mut stats.var {
            *v = rng.random_range(0.5..2.0);
        }
    }
}

fn random_input(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn model_for(arch: Architecture, seed: u64) -> (SpsqModel<f64>, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut model = SpsqModel::<f64>::new(arch, TrainConfig::default(), seed).unwrap();
    randomize_normalization(&mut model, &mut rng);
    (model, rng)
}

#[test]
fn every_parameter_of_a_small_network() {
    for seed in 0..10 {
        let (model, mut rng) = model_for(tiny_arch(), seed);
        let x = random_input(tiny_arch().input_len(), &mut rng);
        let err = gradient_check(&model, &x, seed % 2 == 0).unwrap();
        assert!(err < TOLERANCE, "seed {seed}: {err:e}");
    }
}

#[test]
fn small_network_with_batch_statistics() {
    for seed in 0..10 {
        let (model, mut rng) = model_for(tiny_arch(), seed);
        let x = random_input(4 * tiny_arch().input_len(), &mut rng);
        // Under batch statistics the second normalization removes any per-filter
        // offset, so the first layer's shift has an exactly zero gradient and is
        // judged on absolute error.
        let opts = GradCheckOptions {
            batch_stats: true,
            floor: 1e-6,
            ..GradCheckOptions::default()
        };
        let report = gradient_check_with(&model, &x, &[true, false, false, true], &opts).unwrap();
        assert!(report.max_rel_error < TOLERANCE, "seed {seed}: {report:#?}");
    }
}

#[test]
fn reference_network_sampled_parameters() {
    let arch = Architecture::default();
    for seed in 0..10 {
        let (mut model, mut rng) = model_for(arch, seed);
        if seed == 0 {
            // the untouched initialization must pass as well
            model = build_spsq_cnn(&TrainConfig::default(), 0);
        }
        let x = random_input(arch.input_len(), &mut rng);
        let opts = GradCheckOptions {
            per_tensor: Some(24),
            seed,
            ..GradCheckOptions::default()
        };
        let report = gradient_check_with(&model, &x, &[seed % 2 == 1], &opts).unwrap();
        assert_eq!(report.tensors.len(), 14);
        assert!(report.max_rel_error < TOLERANCE, "seed {seed}: {report:#?}");
    }
}
