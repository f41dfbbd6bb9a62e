mod common;

use labelforge::end_model::{loss_and_gradient, train_noise_aware, EndModelConfig, Features, Vocabulary, WeightInit};
use labelforge::label_model::{fit_generative, predict_proba, EmConfig};
use labelforge::rule::LabelMatrix;
use labelforge::sampler::{next_example, peek_next, Policy, SamplerState};
use proptest::prelude::*;
use rand::Rng;

fn fit(matrix: &LabelMatrix, k: usize) -> labelforge::label_model::GenerativeModel {
    fit_generative(matrix, k, &EmConfig::default(), None).unwrap()
}

/// Mean softmax cross-entropy of `targets`, computed directly from logits.
fn reference_loss(weights: &[f64], xs: &[Vec<f64>], targets: &[Vec<f64>], k: usize, l2: f64) -> f64 {
    let dim = xs[0].len();
    let mut total = 0.0;
    for (x, t) in xs.iter().zip(targets) {
        let logits: Vec<f64> = (0..k).map(|y| (0..dim).map(|i| weights[y * dim + i] * x[i]).sum()).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += (0..k).map(|y| t[y] * (log_z - logits[y])).sum::<f64>();
    }
    let reg: f64 = (0..k).flat_map(|y| (0..dim - 1).map(move |i| y * dim + i)).map(|j| weights[j] * weights[j]).sum();
    total / xs.len() as f64 + l2 * reg
}

fn random_problem(rng: &mut impl Rng, n: usize, dim: usize, k: usize) -> (Vec<Features>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut feats = Vec::new();
    let mut dense = Vec::new();
    for _ in 0..n {
        let mut entries = Vec::new();
        for i in 0..dim - 1 {
            if rng.random_bool(0.5) {
                entries.push((i, rng.random_range(0.5..2.0)));
            }
        }
        entries.push((dim - 1, 1.0));
        let f = Features { entries };
        dense.push(f.dense(dim));
        feats.push(f);
    }
    let targets = (0..n).map(|_| common::random_distribution(rng, k)).collect();
    (feats, dense, targets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn em_never_decreases_the_likelihood(seed in any::<u64>(), k in 2usize..4) {
        let mut rng = common::rng(seed);
        let alpha: Vec<f64> = (0..5).map(|_| rng.random_range(0.4..0.95)).collect();
        let prior = vec![1.0 / k as f64; k];
        let (matrix, _) = common::sample_matrix(&mut rng, 120, &alpha, 0.4, &prior);
        let learned = EmConfig { learn_prior: true, ..EmConfig::default() };
        for config in [EmConfig::default(), learned] {
            let model = fit_generative(&matrix, k, &config, None).unwrap();
            for w in model.loglik_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", model.loglik_trace);
            }
            for row in predict_proba(&model, &matrix).unwrap() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn column_order_does_not_change_posteriors(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let alpha = [0.9, 0.75, 0.6, 0.8];
        let (matrix, _) = common::sample_matrix(&mut rng, 80, &alpha, 0.5, &[0.5, 0.5]);
        let reversed = matrix.select_columns(&[3, 2, 1, 0]);
        let (a, b) = (fit(&matrix, 2), fit(&reversed, 2));
        let (pa, pb) = (predict_proba(&a, &matrix).unwrap(), predict_proba(&b, &reversed).unwrap());
        for (x, y) in pa.iter().zip(&pb) {
            prop_assert!((x[0] - y[0]).abs() < 1e-9);
        }
        for j in 0..4 {
            prop_assert!((a.alpha[j] - b.alpha[3 - j]).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), k in 2usize..4) {
        let mut rng = common::rng(seed);
        let dim = 5;
        let (feats, dense, targets) = random_problem(&mut rng, 6, dim, k);
        let w: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (loss, grad) = loss_and_gradient(&w, &feats, &targets, k, dim, 0.01);
        prop_assert!((loss - reference_loss(&w, &dense, &targets, k, 0.01)).abs() < 1e-12);
        let h = 1e-5;
        let fd: Vec<f64> = (0..w.len())
            .map(|j| {
                let (mut up, mut down) = (w.clone(), w.clone());
                up[j] += h;
                down[j] -= h;
                (reference_loss(&up, &dense, &targets, k, 0.01) - reference_loss(&down, &dense, &targets, k, 0.01)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        prop_assert!(diff / norm < 1e-5, "relative error {}", diff / norm);
    }

    #[test]
    fn entropy_policy_serves_a_most_uncertain_document(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(1..30);
        let k = rng.random_range(2..5);
        let uids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let post: Vec<Vec<f64>> = (0..n).map(|_| common::random_distribution(&mut rng, k)).collect();
        let mut state = SamplerState::new(Policy::Entropy, seed);
        state.shown = uids.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
        if state.shown.len() == n {
            state.shown.clear();
        }
        let served = next_example(&uids, &post, &vec![true; n], &mut state).unwrap();
        let best = (0..n).filter(|&i| !state.shown.contains(&uids[i]) || uids[i] == served)
            .map(|i| common::entropy_nats(&post[i]))
            .fold(f64::NEG_INFINITY, f64::max);
        let i = uids.iter().position(|u| *u == served).unwrap();
        prop_assert!(best - common::entropy_nats(&post[i]) <= 1e-12);
    }
}

#[test]
fn uniform_targets_keep_zero_weights_at_a_stationary_bias() {
    let mut rng = common::rng(5);
    let (feats, _, _) = random_problem(&mut rng, 8, 4, 3);
    let targets = vec![vec![1.0 / 3.0; 3]; 8];
    let (_, grad) = loss_and_gradient(&vec![0.0; 12], &feats, &targets, 3, 4, 0.1);
    assert!(grad.iter().all(|g| g.abs() < 1e-15));
}

#[test]
fn training_loss_never_increases() {
    let mut rng = common::rng(9);
    let (feats, _, targets) = random_problem(&mut rng, 40, 6, 2);
    let vocab = Vocabulary::from_terms((0..5).map(|i| format!("w{i}")).collect(), 1);
    let config = EndModelConfig { learning_rate: 5.0, epochs: 50, init: WeightInit::Gaussian, ..EndModelConfig::default() };
    let model = train_noise_aware(&feats, &targets, vocab, 2, &config).unwrap();
    for w in model.loss_trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn sampler_sequence_is_reproducible() {
    let mut rng = common::rng(3);
    let uids: Vec<String> = (0..50).map(|i| format!("u{i}")).collect();
    // coarse posteriors give many exact ties
    let post: Vec<Vec<f64>> = (0..50).map(|_| if rng.random_bool(0.5) { vec![0.5, 0.5] } else { vec![0.9, 0.1] }).collect();
    let covered: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
    for policy in [Policy::Entropy, Policy::Random, Policy::EntropyEps] {
        let run = || {
            let mut state = SamplerState::new(policy, 11);
            (0..50).map(|_| next_example(&uids, &post, &covered, &mut state).unwrap()).collect::<Vec<_>>()
        };
        let first = run();
        assert_eq!(first, run());
        let distinct: std::collections::BTreeSet<&String> = first.iter().collect();
        assert_eq!(distinct.len(), 50);
    }
    let state = SamplerState::new(Policy::Entropy, 11);
    assert_eq!(peek_next(&uids, &post, &covered, &state).unwrap(), peek_next(&uids, &post, &covered, &state).unwrap());
}
