//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any gated criterion fails. Pass a substring to run matching criteria only.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wespsq::dataformat::Session;
use wespsq::dsp::{design_cheby1_bandpass, extract_epochs, EpochSet};
use wespsq::ensemble::compute_weights;
use wespsq::metrics::{
    analytic_char_accuracy, d_prime, prf1, roc_auc, simulate_char_accuracy, ConfusionMatrix,
};
use wespsq::nn::{
    build_spsq_cnn, count_parameters, gradient_check_with, Architecture, GradCheckOptions, Tensor,
    TrainConfig,
};
use wespsq::pipeline::{train_ensemble, EnsembleConfig};
use wespsq::sampling::balance_subsets;
use wespsq::speller::accuracy_vs_repetitions;
use wespsq::synth::{generate_session, SynthConfig};
use wespsq::{SpsqModel64, TrainedEnsemble32};
use wespsq_verification::{
    matched_filter_scores, pairwise_auc, reference, tables, within_binomial,
};

#[derive(Default)]
struct Checks {
    items: Vec<(bool, String)>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) -> bool {
        self.items.push((ok, what.into()));
        ok
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) -> bool {
        let ok = (value - target).abs() <= tol;
        self.check(ok, format!("{name} {value:.6} vs {target} ± {tol}"))
    }

    fn runtime(&mut self, started: Instant, limit: Duration) {
        let took = started.elapsed();
        self.check(took < limit, format!("runtime {took:.2?} < {limit:?}"));
    }

    fn passed(&self) -> bool {
        self.items.iter().all(|i| i.0)
    }

    fn summary(&self) -> String {
        let failed: Vec<&str> = self
            .items
            .iter()
            .filter(|i| !i.0)
            .map(|i| i.1.as_str())
            .collect();
        if failed.is_empty() {
            self.items
                .iter()
                .map(|i| i.1.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        } else {
            format!("failed: {}", failed.join("; "))
        }
    }
}

fn architecture_fidelity() -> Checks {
    let mut c = Checks::default();
    let t = Instant::now();
    let model = build_spsq_cnn::<f32>(&TrainConfig::default(), 0);
    let counts = count_parameters(model.arch());
    let per_layer: Vec<usize> = counts.layers.iter().map(|l| l.parameters).collect();
    let expected = [256, 0, 2080, 0, 10256, 64, 0, 16512, 16512, 129];
    c.check(
        per_layer == expected,
        format!("per-layer counts {per_layer:?}"),
    );
    c.check(counts.total == 45_809, format!("total {}", counts.total));
    let stored =
        model.params().len() + 2 * (model.arch().n_channels + model.arch().temporal_filters);
    c.check(stored == 45_809, format!("stored values {stored}"));
    c.runtime(t, Duration::from_secs(1));
    c
}

fn randomized_model(arch: Architecture, seed: u64) -> (SpsqModel64, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut m = SpsqModel64::new(arch, TrainConfig::default(), seed).unwrap();
    for t in [Tensor::Bn1Gamma, Tensor::Bn2Gamma] {
        m.tensor_mut(t)
            .iter_mut()
            .for_each(|g| *g = rng.random_range(0.5..1.5));
    }
    for t in [
        Tensor::Bn1Beta,
        Tensor::Bn2Beta,
        Tensor::Conv2dBias,
        Tensor::Conv1dBias,
        Tensor::Fc1Bias,
    ] {
        m.tensor_mut(t)
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-0.2..0.2));
    }
    for layer in 0..2 {
        let s = if layer == 0 {
            m.bn1_stats_mut()
        } else {
            m.bn2_stats_mut()
        };
        s.mean
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.3..0.3));
        s.var
            .iter_mut()
            .for_each(|v| *v = rng.random_range(0.5..2.0));
    }
    (m, rng)
}

fn gradient_correctness() -> Checks {
    let mut c = Checks::default();
    let t = Instant::now();
    let tiny = Architecture {
        n_times: 12,
        n_channels: 5,
        spatial_filters: 4,
        temporal_kernel: 4,
        temporal_filters: 3,
        hidden: 6,
    };
    let mut worst = 0.0f64;
    let mut tensors = BTreeSet::new();
    for seed in 0..10u64 {
        for (arch, per_tensor) in [(Architecture::default(), Some(32)), (tiny, None)] {
            let (model, mut rng) = randomized_model(arch, seed);
            let x: Vec<f64> = (0..arch.input_len())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let opts = GradCheckOptions {
                per_tensor,
                seed,
                ..GradCheckOptions::default()
            };
            let report = gradient_check_with(&model, &x, &[seed % 2 == 0], &opts).unwrap();
            for tc in &report.tensors {
                if tc.checked > 0 {
                    tensors.insert(tc.tensor);
                }
            }
            worst = worst.max(report.max_rel_error);
        }
    }
    c.check(
        worst < 1e-4,
        format!("max relative error {worst:.2e} < 1e-4 over 10 seeds"),
    );
    c.check(
        tensors.len() == Tensor::ALL.len(),
        format!("{} of 14 tensors checked", tensors.len()),
    );
    c.runtime(t, Duration::from_secs(60));
    c
}

fn filter_conformance() -> Checks {
    let mut c = Checks::default();
    let t = Instant::now();
    let filter = design_cheby1_bandpass(4, 0.5, 0.1, 10.0, 240.0).unwrap();
    let probes = reference::magnitude();
    let worst = probes
        .iter()
        .map(|&(f, m)| (filter.magnitude(f) - m).abs() / m)
        .fold(0.0, f64::max);
    c.check(probes.len() == 64, format!("{} probes", probes.len()));
    c.check(
        worst < 1e-6,
        format!("max relative magnitude error {worst:.2e} < 1e-6"),
    );
    let max_pole = filter.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    c.check(
        max_pole < 1.0,
        format!("max pole modulus {max_pole:.6} < 1"),
    );
    c.runtime(t, Duration::from_secs(5));
    c
}

fn balancing() -> Checks {
    let mut c = Checks::default();
    // a single channel keeps the 85-character session small; only labels matter here
    let session = generate_session(&SynthConfig {
        n_characters: 85,
        n_channels: 1,
        seed: 85,
        ..SynthConfig::default()
    })
    .unwrap();
    let set = epochs_of(&session);
    c.check(set.len() == 15_300, format!("{} epochs", set.len()));
    c.check(
        set.n_targets() == 2_550,
        format!("{} targets", set.n_targets()),
    );
    let subsets = balance_subsets(&set.labels(), 5, 7, true).unwrap();
    c.check(subsets.len() == 5, format!("{} subsets", subsets.len()));
    let sizes: Vec<(usize, usize)> = subsets
        .iter()
        .map(|s| (s.p300_count(), s.non_p300_count()))
        .collect();
    c.check(
        sizes.iter().all(|&s| s == (2550, 2550)),
        format!("sizes {:?}", sizes[0]),
    );
    let mut union = BTreeSet::new();
    let mut total = 0;
    for s in &subsets {
        total += s.non_p300.len();
        union.extend(s.non_p300.iter().copied());
    }
    let pool: BTreeSet<usize> = set
        .labels()
        .iter()
        .enumerate()
        .filter(|p| !*p.1)
        .map(|p| p.0)
        .collect();
    c.check(total == union.len(), "non-P300 parts disjoint");
    c.check(union == pool, "non-P300 parts cover the pool");
    c
}

fn confusions(rows: &[(u64, u64, u64, u64)]) -> Vec<ConfusionMatrix> {
    rows.iter()
        .map(|&(tp, tn, fn_, fp)| ConfusionMatrix::new(tp, tn, fn_, fp))
        .collect()
}

fn ensemble_weights() -> Checks {
    let mut c = Checks::default();
    let w = compute_weights(&confusions(&tables::SUBJECT_A)).unwrap();
    let worst = w
        .iter()
        .zip(tables::WEIGHTS_A)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    c.check(
        worst <= 1e-4,
        format!("weights {w:.5?}, max deviation {worst:.1e} ≤ 1e-4"),
    );
    let sum: f64 = w.iter().sum();
    c.check(
        (sum - 1.0).abs() <= 1e-12,
        format!("sum - 1 = {:.1e}", sum - 1.0),
    );
    c
}

fn metrics_anchors() -> Checks {
    let mut c = Checks::default();
    let (tp, tn, fn_, fp) = tables::SUBJECT_A[0];
    let m = prf1(&ConfusionMatrix::new(tp, tn, fn_, fp));
    c.within("accuracy", m.accuracy, 0.563, 0.001);
    c.within("F1", m.f1, 0.210, 0.001);

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(2..400);
        // coarse scores force ties
        let levels = if i % 2 == 0 { 7 } else { 1_000_000 };
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let auc = roc_auc(&labels, &scores).unwrap().auc;
        worst = worst.max((auc - pairwise_auc(&labels, &scores)).abs());
    }
    c.check(
        worst <= 1e-12,
        format!("trapezoid vs rank AUC max gap {worst:.1e} ≤ 1e-12 on 100 instances"),
    );
    c
}

fn simulation_consistency() -> Checks {
    let mut c = Checks::default();
    let t = Instant::now();
    const N: usize = 100_000;
    let mut worst_z = 0.0f64;
    let mut misses = Vec::new();
    for (i, d) in [0.0, 0.5, 0.7023, 1.0, 2.0].into_iter().enumerate() {
        let sim = simulate_char_accuracy(d, 15, N, 1000 + i as u64).unwrap();
        for reps in [1usize, 5, 10, 15] {
            let p = analytic_char_accuracy(d, reps).unwrap();
            let observed = sim[reps - 1];
            let sd = (p * (1.0 - p) / N as f64).sqrt();
            if sd > 0.0 {
                worst_z = worst_z.max((observed - p).abs() / sd);
            }
            if !within_binomial(observed, p, N, 3.0) {
                misses.push(format!("d'={d} reps={reps}: {observed} vs {p:.5}"));
            }
        }
    }
    c.check(
        misses.is_empty(),
        format!("20 grid cells within 3σ (largest {worst_z:.2}σ) {misses:?}"),
    );
    let d = d_prime(0.5).unwrap();
    c.check(d == 0.0, format!("d'(0.5) = {d}"));
    let chance = analytic_char_accuracy(0.0, 1).unwrap();
    c.check(
        (chance - 1.0 / 36.0).abs() < 1e-12,
        format!("chance level {chance:.6} = 1/36"),
    );
    c.runtime(t, Duration::from_secs(300));
    c
}

fn epochs_of(session: &Session) -> EpochSet {
    let filter = design_cheby1_bandpass(4, 0.5, 0.1, 10.0, 240.0).unwrap();
    extract_epochs(session, &filter).unwrap()
}

fn synthetic_end_to_end() -> Checks {
    let mut c = Checks::default();
    let t = Instant::now();
    let synth = |n_characters, seed| SynthConfig {
        n_characters,
        amplitude_uv: 2.0,
        noise_sigma_uv: 10.0,
        seed,
        ..SynthConfig::default()
    };
    let test_cfg = synth(36, 2);
    let test_session = generate_session(&test_cfg).unwrap();
    let labels: Vec<bool> = test_session.markers.iter().map(|m| m.is_target).collect();
    let mf_auc = pairwise_auc(
        &labels,
        &matched_filter_scores(&test_session, &test_cfg.template()),
    );
    c.check(
        mf_auc >= 0.95,
        format!("matched-filter AUC {mf_auc:.4} ≥ 0.95"),
    );

    let train = epochs_of(&generate_session(&synth(20, 1)).unwrap());
    let test = epochs_of(&test_session);
    let config = EnsembleConfig {
        subset_seed: 11,
        train: TrainConfig {
            seed: 21,
            ..TrainConfig::default()
        },
        ..EnsembleConfig::default()
    };
    let run = || -> (TrainedEnsemble32, Vec<f64>) {
        let trained: TrainedEnsemble32 = train_ensemble(&train, &config, |_, _| {}).unwrap();
        let curve = accuracy_vs_repetitions(&trained.bundle, &test, 15).unwrap();
        (trained, curve.accuracy)
    };
    let (first, curve) = run();
    c.check(
        first.bundle.len() == 5,
        format!("{} members", first.bundle.len()),
    );
    c.check(
        curve[14] == 1.0,
        format!("accuracy at 15 repetitions {:.3}", curve[14]),
    );
    c.check(
        curve[4] >= 0.9,
        format!("accuracy at 5 repetitions {:.3} ≥ 0.9", curve[4]),
    );
    let (second, curve2) = run();
    let same = first.bundle.weights() == second.bundle.weights()
        && first.bundle.models() == second.bundle.models()
        && curve == curve2;
    c.check(same, "repeat run identical");
    c.runtime(t, Duration::from_secs(20 * 60));
    c
}

type Criterion = (&'static str, fn() -> Checks);

const CRITERIA: &[Criterion] = &[
    ("architecture fidelity", architecture_fidelity),
    ("gradient correctness", gradient_correctness),
    ("filter conformance", filter_conformance),
    ("balancing", balancing),
    ("ensemble weights", ensemble_weights),
    ("metrics anchors", metrics_anchors),
    ("simulation consistency", simulation_consistency),
    ("synthetic end-to-end", synthetic_end_to_end),
];

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    let mut ran = 0;
    for &(name, run) in CRITERIA {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(checks) => (checks.passed(), checks.summary()),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name} [{:.1?}]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed()
        );
    }
    if filter.is_none() {
        println!(
            "INFO competition-data comparison: not gated; needs converted competition sessions (see README)"
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
