//! Bag-of-words logistic regression trained on probabilistic labels.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::metrics::{argmax, classification_metrics, Metrics};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndModelError {
    #[error("no training documents")]
    EmptyTrainingSet,
    #[error("no test documents")]
    EmptyTestSet,
    #[error("document {0} has no gold label")]
    Unlabeled(String),
    #[error("{features} feature rows but {labels} label rows")]
    LengthMismatch { features: usize, labels: usize },
}

/// Term to column mapping. Columns follow the alphabetical order of terms
/// when built from a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    min_count: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    min_count: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_terms(r.terms, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { terms: v.terms, min_count: v.min_count }
    }
}

impl Vocabulary {
    /// Terms occurring at least `min_count` times over `docs`.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            for tok in &doc.tokens {
                *counts.entry(tok.normalized.as_str()).or_default() += 1;
            }
        }
        let terms = counts.into_iter().filter(|&(_, c)| c >= min_count).map(|(t, _)| t.to_string()).collect();
        Self::from_terms(terms, min_count)
    }

    /// Vocabulary with the given column order.
    pub fn from_terms(terms: Vec<String>, min_count: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, min_count, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Feature dimension including the bias column.
    pub fn dim(&self) -> usize {
        self.terms.len() + 1
    }
}

/// Sparse feature vector: `(column, value)` pairs sorted by column. The last
/// column of the space is the constant bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub entries: Vec<(usize, f64)>,
}

impl Features {
    pub fn dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Token counts over `vocab` plus the bias feature.
pub fn featurize(doc: &Document, vocab: &Vocabulary) -> Features {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in &doc.tokens {
        if let Some(i) = vocab.get(&tok.normalized) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    counts.insert(vocab.len(), 1.0);
    Features { entries: counts.into_iter().collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// N(0, 0.01²) under the seed.
    Gaussian,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Expected cross-entropy against the label-model posteriors.
    Probabilistic,
    /// Cross-entropy against the posterior argmax.
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndModelConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub min_count: usize,
    pub init: WeightInit,
    pub label_mode: LabelMode,
}

impl Default for EndModelConfig {
    fn default() -> Self {
        EndModelConfig {
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 100,
            seed: 42,
            min_count: 2,
            init: WeightInit::Gaussian,
            label_mode: LabelMode::Probabilistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndModel {
    pub vocabulary: Vocabulary,
    pub n_classes: usize,
    /// Row-major `n_classes × dim`; the last column of each row is the bias.
    pub weights: Vec<f64>,
    pub config: EndModelConfig,
    /// Training loss before the first epoch and after each one.
    #[serde(default, skip_serializing)]
    pub loss_trace: Vec<f64>,
}

fn softmax_scores(weights: &[f64], x: &Features, n_classes: usize, dim: usize) -> Vec<f64> {
    let logits: Vec<f64> =
        (0..n_classes).map(|y| x.entries.iter().map(|&(i, v)| weights[y * dim + i] * v).sum()).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.iter().map(|e| e / z).collect()
}

/// Mean expected cross-entropy plus `l2 · ‖W‖²` over non-bias weights, and
/// its gradient with respect to `weights`.
pub fn loss_and_gradient(
    weights: &[f64],
    features: &[Features],
    targets: &[Vec<f64>],
    n_classes: usize,
    dim: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (x, t) in features.iter().zip(targets) {
        let p = softmax_scores(weights, x, n_classes, dim);
        for y in 0..n_classes {
            if t[y] > 0.0 {
                loss -= t[y] * p[y].max(f64::MIN_POSITIVE).ln();
            }
            let residual = p[y] - t[y];
            for &(i, v) in &x.entries {
                grad[y * dim + i] += residual * v;
            }
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for y in 0..n_classes {
        for i in 0..dim - 1 {
            let w = weights[y * dim + i];
            loss += l2 * w * w;
            grad[y * dim + i] += 2.0 * l2 * w;
        }
    }
    (loss, grad)
}

fn initial_weights(config: &EndModelConfig, len: usize) -> Vec<f64> {
    match config.init {
        WeightInit::Zero => vec![0.0; len],
        WeightInit::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let normal = Normal::new(0.0, 0.01).expect("valid normal");
            (0..len).map(|_| normal.sample(&mut rng)).collect()
        }
    }
}

/// Full-batch gradient descent with step `learning_rate / √t` at epoch `t`.
///
/// A step that would increase the loss is halved until it does not, so the
/// loss trace never increases.
pub fn train_noise_aware(
    features: &[Features],
    probs: &[Vec<f64>],
    vocabulary: Vocabulary,
    n_classes: usize,
    config: &EndModelConfig,
) -> Result<EndModel, EndModelError> {
    if features.is_empty() {
        return Err(EndModelError::EmptyTrainingSet);
    }
    if features.len() != probs.len() {
        return Err(EndModelError::LengthMismatch { features: features.len(), labels: probs.len() });
    }
    let targets: Vec<Vec<f64>> = match config.label_mode {
        LabelMode::Probabilistic => probs.to_vec(),
        LabelMode::Argmax => probs
            .iter()
            .map(|p| {
                let mut one_hot = vec![0.0; n_classes];
                one_hot[argmax(p)] = 1.0;
                one_hot
            })
            .collect(),
    };
    let dim = vocabulary.dim();
    let mut weights = initial_weights(config, n_classes * dim);
    let (mut loss, mut grad) = loss_and_gradient(&weights, features, &targets, n_classes, dim, config.l2);
    let mut trace = vec![loss];
    for epoch in 1..=config.epochs {
        let mut step = config.learning_rate / (epoch as f64).sqrt();
        for _ in 0..40 {
            let trial: Vec<f64> = weights.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let (trial_loss, trial_grad) = loss_and_gradient(&trial, features, &targets, n_classes, dim, config.l2);
            if trial_loss <= loss {
                weights = trial;
                loss = trial_loss;
                grad = trial_grad;
                break;
            }
            step /= 2.0;
        }
        trace.push(loss);
    }
    Ok(EndModel { vocabulary, n_classes, weights, config: config.clone(), loss_trace: trace })
}

impl EndModel {
    pub fn predict_proba(&self, doc: &Document) -> Vec<f64> {
        softmax_scores(&self.weights, &featurize(doc, &self.vocabulary), self.n_classes, self.vocabulary.dim())
    }

    pub fn predict(&self, doc: &Document) -> usize {
        argmax(&self.predict_proba(doc))
    }
}

/// Metrics of `model` against the gold labels of `corpus`.
pub fn evaluate(model: &EndModel, corpus: &Corpus) -> Result<Metrics, EndModelError> {
    if corpus.is_empty() {
        return Err(EndModelError::EmptyTestSet);
    }
    let mut predicted = Vec::with_capacity(corpus.len());
    let mut gold = Vec::with_capacity(corpus.len());
    for doc in &corpus.documents {
        gold.push(doc.gold_label.ok_or_else(|| EndModelError::Unlabeled(doc.uid.clone()))?);
        predicted.push(model.predict(doc));
    }
    Ok(classification_metrics(&predicted, &gold, model.n_classes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndModelReport {
    pub split: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_train_covered: usize,
    pub n_test: usize,
    pub config: EndModelConfig,
    pub seed: u64,
}

/// Builds the vocabulary on `train`, fits on the rows flagged `covered` and
/// reports metrics on `test`.
pub fn train_and_evaluate(
    train: &Corpus,
    posteriors: &[Vec<f64>],
    covered: &[bool],
    test: &Corpus,
    n_classes: usize,
    config: &EndModelConfig,
) -> Result<(EndModel, EndModelReport), EndModelError> {
    let vocab = Vocabulary::build(&train.documents, config.min_count);
    let rows: Vec<usize> = (0..train.len()).filter(|&i| covered[i]).collect();
    let features: Vec<Features> = rows.iter().map(|&i| featurize(&train.documents[i], &vocab)).collect();
    let probs: Vec<Vec<f64>> = rows.iter().map(|&i| posteriors[i].clone()).collect();
    let model = train_noise_aware(&features, &probs, vocab, n_classes, config)?;
    let m = evaluate(&model, test)?;
    let report = EndModelReport {
        split: test.split.as_str().to_string(),
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        n_train_covered: rows.len(),
        n_test: test.len(),
        config: config.clone(),
        seed: config.seed,
    };
    Ok((model, report))
}
