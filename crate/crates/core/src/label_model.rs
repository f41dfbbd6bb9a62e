//! Denoising labeling-function votes into probabilistic labels.
//!
//! Functions are modelled as conditionally independent given the true class
//! `y`: function `j` abstains with probability `1 - beta_j`; when it fires it
//! votes `y` with probability `alpha_j` and each other class with probability
//! `(1 - alpha_j) / (K - 1)`. Parameters are fitted by EM.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{argmax, classification_metrics, Metrics};
use crate::rule::{LabelMatrix, RuleId, ABSTAIN};

pub const PARAM_MIN: f64 = 0.01;
pub const PARAM_MAX: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelModelError {
    #[error("label model needs at least one function")]
    NoFunctions,
    #[error("label model needs at least one document")]
    NoDocuments,
    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),
    #[error("vote {vote} outside 0..{n_classes}")]
    InvalidVote { vote: i32, n_classes: usize },
    #[error("matrix columns do not match the fitted model: {0}")]
    ColumnMismatch(String),
    #[error("prior must have {0} entries summing to 1")]
    BadPrior(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub alpha_init: f64,
    /// Re-estimate the class prior in the M-step. When off the prior stays at
    /// its initial value, which rules out the degenerate fit where every
    /// document belongs to one class and the other class's functions are
    /// "always wrong".
    pub learn_prior: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iterations: 100, tolerance: 1e-6, alpha_init: 0.7, learn_prior: false }
    }
}

/// Fitted parameters. Serialized as the model snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub n_classes: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub prior: Vec<f64>,
    /// Columns the parameters belong to, in matrix order.
    pub column_ids: Vec<RuleId>,
    /// Columns left out of the fit because they never fire.
    #[serde(default)]
    pub excluded: Vec<RuleId>,
    pub loglik: f64,
    pub iterations: usize,
    /// Log-likelihood after each M-step, starting with the initial parameters.
    #[serde(default, skip_serializing)]
    pub loglik_trace: Vec<f64>,
}

fn clamp(x: f64) -> f64 {
    x.clamp(PARAM_MIN, PARAM_MAX)
}

fn check_votes(matrix: &LabelMatrix, n_classes: usize) -> Result<(), LabelModelError> {
    for j in 0..matrix.n_cols() {
        if let Some(&vote) = matrix.column(j).iter().find(|&&v| v != ABSTAIN && (v < 0 || v as usize >= n_classes)) {
            return Err(LabelModelError::InvalidVote { vote, n_classes });
        }
    }
    Ok(())
}

/// Vote shares per document; rows without votes are uniform.
pub fn majority_probs(matrix: &LabelMatrix, n_classes: usize) -> Vec<Vec<f64>> {
    (0..matrix.n_rows())
        .map(|i| {
            let mut counts = vec![0.0; n_classes];
            for vote in matrix.row(i).into_iter().filter(|&v| v != ABSTAIN) {
                counts[vote as usize] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            if total == 0.0 {
                vec![1.0 / n_classes as f64; n_classes]
            } else {
                counts.iter().map(|c| c / total).collect()
            }
        })
        .collect()
}

/// Log of `P(row, y)` for every class `y`.
fn joint_log(row: &[i32], model_alpha: &[f64], beta: &[f64], prior: &[f64]) -> Vec<f64> {
    let k = prior.len();
    (0..k)
        .map(|y| {
            let mut lp = prior[y].ln();
            for ((&vote, &a), &b) in row.iter().zip(model_alpha).zip(beta) {
                lp += if vote == ABSTAIN {
                    (1.0 - b).ln()
                } else if vote as usize == y {
                    b.ln() + a.ln()
                } else {
                    b.ln() + ((1.0 - a) / (k - 1) as f64).ln()
                };
            }
            lp
        })
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posteriors for `rows` and the total log-likelihood.
fn e_step(rows: &[Vec<i32>], alpha: &[f64], beta: &[f64], prior: &[f64]) -> (Vec<Vec<f64>>, f64) {
    let mut loglik = 0.0;
    let posteriors = rows
        .iter()
        .map(|row| {
            let joint = joint_log(row, alpha, beta, prior);
            let z = log_sum_exp(&joint);
            loglik += z;
            joint.iter().map(|lp| (lp - z).exp()).collect()
        })
        .collect();
    (posteriors, loglik)
}

/// Fits the model by EM.
///
/// `prior_init` defaults to uniform. Columns that never fire are excluded
/// from the fit and listed in [`GenerativeModel::excluded`].
pub fn fit_generative(
    matrix: &LabelMatrix,
    n_classes: usize,
    config: &EmConfig,
    prior_init: Option<&[f64]>,
) -> Result<GenerativeModel, LabelModelError> {
    if n_classes < 2 {
        return Err(LabelModelError::TooFewClasses(n_classes));
    }
    if matrix.n_cols() == 0 {
        return Err(LabelModelError::NoFunctions);
    }
    if matrix.n_rows() == 0 {
        return Err(LabelModelError::NoDocuments);
    }
    check_votes(matrix, n_classes)?;
    let mut prior = match prior_init {
        Some(p) if p.len() == n_classes && p.iter().all(|x| *x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9 => {
            p.to_vec()
        }
        Some(_) => return Err(LabelModelError::BadPrior(n_classes)),
        None => vec![1.0 / n_classes as f64; n_classes],
    };

    let n = matrix.n_rows() as f64;
    let (kept, excluded): (Vec<usize>, Vec<usize>) =
        (0..matrix.n_cols()).partition(|&j| matrix.column(j).iter().any(|&v| v != ABSTAIN));
    let fired: Vec<f64> =
        kept.iter().map(|&j| matrix.column(j).iter().filter(|&&v| v != ABSTAIN).count() as f64).collect();
    let rows: Vec<Vec<i32>> = (0..matrix.n_rows()).map(|i| kept.iter().map(|&j| matrix.get(i, j)).collect()).collect();

    let beta: Vec<f64> = fired.iter().map(|f| clamp(f / n)).collect();
    let mut alpha = vec![clamp(config.alpha_init); kept.len()];
    let (mut posteriors, mut loglik) = e_step(&rows, &alpha, &beta, &prior);
    let mut trace = vec![loglik];
    let mut iterations = 0;
    while iterations < config.max_iterations && !kept.is_empty() {
        iterations += 1;
        for (c, a) in alpha.iter_mut().enumerate() {
            let agree: f64 = rows
                .iter()
                .zip(&posteriors)
                .filter(|(row, _)| row[c] != ABSTAIN)
                .map(|(row, q)| q[row[c] as usize])
                .sum();
            *a = clamp(agree / fired[c]);
        }
        if config.learn_prior {
            for (y, p) in prior.iter_mut().enumerate() {
                *p = posteriors.iter().map(|q| q[y]).sum::<f64>() / n;
            }
        }
        let (next, next_loglik) = e_step(&rows, &alpha, &beta, &prior);
        posteriors = next;
        let change = next_loglik - loglik;
        loglik = next_loglik;
        trace.push(loglik);
        if change.abs() < config.tolerance {
            break;
        }
    }
    Ok(GenerativeModel {
        n_classes,
        alpha,
        beta,
        prior,
        column_ids: kept.iter().map(|&j| matrix.column_ids()[j].clone()).collect(),
        excluded: excluded.iter().map(|&j| matrix.column_ids()[j].clone()).collect(),
        loglik,
        iterations,
        loglik_trace: trace,
    })
}

/// Posterior `P(y | row)` for every row of `matrix`.
///
/// Columns are matched by id. Columns the model excluded are ignored; any
/// other unknown or missing column is an error.
pub fn predict_proba(model: &GenerativeModel, matrix: &LabelMatrix) -> Result<Vec<Vec<f64>>, LabelModelError> {
    let mut index = Vec::with_capacity(model.column_ids.len());
    for id in &model.column_ids {
        let j = matrix
            .column_ids()
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| LabelModelError::ColumnMismatch(format!("missing column {id}")))?;
        index.push(j);
    }
    if let Some(extra) =
        matrix.column_ids().iter().find(|c| !model.column_ids.contains(c) && !model.excluded.contains(c))
    {
        return Err(LabelModelError::ColumnMismatch(format!("unknown column {extra}")));
    }
    check_votes(matrix, model.n_classes)?;
    let rows: Vec<Vec<i32>> =
        (0..matrix.n_rows()).map(|i| index.iter().map(|&j| matrix.get(i, j)).collect()).collect();
    Ok(e_step(&rows, &model.alpha, &model.beta, &model.prior).0)
}

/// Per-function statistics over one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfStats {
    pub rule_id: RuleId,
    pub coverage: f64,
    pub overlap: f64,
    pub conflict: f64,
    /// Accuracy on the documents the function fires on; `None` if it never does.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub incorrect: usize,
    /// Left out of the label model because it never fires on the fitting split.
    #[serde(default)]
    pub excluded: bool,
}

/// Returns `None` for an empty split: statistics are unavailable rather than zero.
pub fn compute_lf_stats(matrix: &LabelMatrix, gold: &[usize]) -> Option<Vec<LfStats>> {
    if matrix.n_rows() == 0 {
        return None;
    }
    assert_eq!(matrix.n_rows(), gold.len(), "one gold label per row");
    let n = matrix.n_rows() as f64;
    let stats = (0..matrix.n_cols())
        .map(|j| {
            let (mut fired, mut overlap, mut conflict, mut correct) = (0, 0, 0, 0);
            for (i, &g) in gold.iter().enumerate() {
                let vote = matrix.get(i, j);
                if vote == ABSTAIN {
                    continue;
                }
                fired += 1;
                let others: Vec<i32> =
                    (0..matrix.n_cols()).filter(|&o| o != j).map(|o| matrix.get(i, o)).filter(|&v| v != ABSTAIN).collect();
                overlap += usize::from(!others.is_empty());
                conflict += usize::from(others.iter().any(|&v| v != vote));
                correct += usize::from(vote as usize == g);
            }
            LfStats {
                rule_id: matrix.column_ids()[j].clone(),
                coverage: fired as f64 / n,
                overlap: overlap as f64 / n,
                conflict: conflict as f64 / n,
                accuracy: (fired > 0).then(|| correct as f64 / fired as f64),
                correct,
                incorrect: fired - correct,
                excluded: false,
            }
        })
        .collect();
    Some(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    /// Metrics over the rows at least one function fires on.
    pub metrics: Metrics,
    /// Fraction of rows with at least one vote.
    pub coverage: f64,
    /// `metrics - previous.metrics`, when there is a previous snapshot.
    pub delta: Option<Metrics>,
}

/// Label-model quality against gold labels. `None` for an empty split.
pub fn compute_model_stats(
    posteriors: &[Vec<f64>],
    matrix: &LabelMatrix,
    gold: &[usize],
    n_classes: usize,
    previous: Option<&ModelStats>,
) -> Option<ModelStats> {
    if gold.is_empty() {
        return None;
    }
    let covered: Vec<usize> = (0..matrix.n_rows()).filter(|&i| matrix.is_covered(i)).collect();
    let predicted: Vec<usize> = covered.iter().map(|&i| argmax(&posteriors[i])).collect();
    let gold_covered: Vec<usize> = covered.iter().map(|&i| gold[i]).collect();
    let metrics = classification_metrics(&predicted, &gold_covered, n_classes);
    Some(ModelStats {
        metrics,
        coverage: covered.len() as f64 / gold.len() as f64,
        delta: previous.map(|p| metrics.minus(&p.metrics)),
    })
}

/// Class frequencies of `labels`; uniform when empty.
pub fn class_frequencies(labels: &[usize], n_classes: usize) -> Vec<f64> {
    if labels.is_empty() {
        return vec![1.0 / n_classes as f64; n_classes];
    }
    let mut counts = vec![0.0; n_classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    counts.iter().map(|c| c / labels.len() as f64).collect()
}
