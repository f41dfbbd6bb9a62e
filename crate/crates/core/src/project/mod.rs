//! Project state, the commands that change it and their event log.
//!
//! Every command is recorded as a [`SessionEvent`]; replaying the log over
//! the same corpora rebuilds the project exactly.

mod events;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{append_event, parse_log, read_log, write_log, EventPayload, SessionEvent};
pub use store::{load_corpus_dir, Corpora, EVENTS_FILE, PROJECT_FILE};

use crate::corpus::{CorpusError, Document, EntitySpan};
use crate::end_model::{train_and_evaluate, EndModelConfig, EndModelError, EndModelReport};
use crate::glm::{apply_operation, concept_matches, AnnotationDraft, ConceptStore, GlmError, GlmOp, Interaction};
use crate::label_model::{
    class_frequencies, compute_lf_stats, compute_model_stats, fit_generative, predict_proba, EmConfig,
    GenerativeModel, LabelModelError, LfStats, ModelStats,
};
use crate::rule::{
    compile_interaction, evaluate_rule, fnv1a64, ColumnCache, CompileOptions, LabelingFunction, RuleError, RuleId,
};
use crate::sampler::{peek_next, Policy, SamplerError, SamplerState};
use crate::synth::{synthesize, Candidate, DEFAULT_K};

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    LabelModel(#[from] LabelModelError),
    #[error(transparent)]
    EndModel(#[from] EndModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("unknown or stale suggestion token {0}")]
    StaleToken(String),
    #[error("rule {0} is not among the suggested candidates")]
    UnknownCandidate(RuleId),
    #[error("no function with id {0}")]
    UnknownFunction(RuleId),
    #[error("{0} is not a concept edit")]
    NotConceptEdit(String),
    #[error("no label model has been fitted")]
    NoModel,
    #[error("project has no test split")]
    NoTestSet,
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("invalid project configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ProjectError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ProjectError::Corpus(_) => "corpus",
            ProjectError::Glm(_) => "invalid_annotation",
            ProjectError::Rule(RuleError::UnknownConcept(_)) => "unknown_concept",
            ProjectError::Rule(_) => "invalid_rule",
            ProjectError::LabelModel(_) => "label_model",
            ProjectError::EndModel(_) => "end_model",
            ProjectError::Sampler(SamplerError::PoolExhausted) => "pool_exhausted",
            ProjectError::Sampler(_) => "sampler",
            ProjectError::UnknownDocument(_) => "unknown_document",
            ProjectError::StaleToken(_) => "stale_token",
            ProjectError::UnknownCandidate(_) => "unknown_candidate",
            ProjectError::UnknownFunction(_) => "unknown_function",
            ProjectError::NotConceptEdit(_) => "not_concept_edit",
            ProjectError::NoModel => "no_model",
            ProjectError::NoTestSet => "no_test_set",
            ProjectError::CorruptLog(_) => "corrupt_log",
            ProjectError::Config(_) => "config",
            ProjectError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    pub class_names: Vec<String>,
    pub seed: u64,
    /// Number of suggested functions per interaction.
    pub k: usize,
    pub sampler_policy: Policy,
    pub compile: CompileOptions,
    pub em: EmConfig,
    pub end_model: EndModelConfig,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            class_names: Vec::new(),
            seed: 42,
            k: DEFAULT_K,
            sampler_policy: Policy::Entropy,
            compile: CompileOptions::default(),
            em: EmConfig::default(),
            end_model: EndModelConfig::default(),
        }
    }
}

/// A candidate as shown to the labeler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub rule_id: RuleId,
    pub rendering: String,
    pub formula: String,
    pub score: u64,
    pub coverage: f64,
    /// Behaviour on the development split; absent without one.
    pub dev_stats: Option<RuleDevStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDevStats {
    pub coverage: f64,
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_token: String,
    pub seed: String,
    pub candidates: Vec<CandidateView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredSuggestion {
    doc_uid: String,
    candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Statistics {
    pub revision: u64,
    pub n_functions: usize,
    /// Per-function statistics on the development split.
    pub lf_stats: Option<Vec<LfStats>>,
    /// Label-model quality on the development split.
    pub model_stats: Option<ModelStats>,
    /// Fraction of unlabeled documents at least one function fires on.
    pub unlabeled_coverage: f64,
    /// Concepts changed since the last fit.
    pub stale: bool,
}

/// What `replay` reports and the batch CLI writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub revision: u64,
    pub n_functions: usize,
    pub model_stats: Option<ModelStats>,
    pub end_model: Option<EndModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub uid: String,
    pub text: String,
    pub tokens: Vec<TokenView>,
    pub sentences: Vec<Range<usize>>,
    pub entities: Vec<EntitySpan>,
    pub concept_matches: BTreeMap<String, Vec<Range<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenView {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelExport {
    pub uid: String,
    pub probs: Vec<f64>,
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Suggested(Suggestion),
    Accepted { added: usize, statistics: Statistics },
    Removed(Statistics),
    ConceptEdited { inverse: GlmOp },
    Refitted(Statistics),
    Trained(EndModelReport),
    /// The command changed nothing and was not logged.
    Unchanged(Statistics),
}

/// The serializable part of a project: everything except corpora and
/// derived caches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectState {
    pub id: String,
    pub config: ProjectConfig,
    pub revision: u64,
    pub last_timestamp: u64,
    pub concepts: ConceptStore,
    pub functions: Vec<LabelingFunction>,
    pub next_sequence: u64,
    pub interactions: u64,
    pub sampler: SamplerState,
    suggestions: BTreeMap<String, StoredSuggestion>,
    pub model: Option<GenerativeModel>,
    pub statistics: Statistics,
    pub end_model: Option<EndModelReport>,
}

pub struct Project {
    state: ProjectState,
    corpora: Corpora,
    n_classes: usize,
    events: Vec<SessionEvent>,
    unlabeled_cache: ColumnCache,
    dev_cache: ColumnCache,
    posteriors: Vec<Vec<f64>>,
    covered: Vec<bool>,
}

impl Project {
    pub fn new(id: impl Into<String>, mut config: ProjectConfig, corpora: Corpora) -> Result<Project, ProjectError> {
        let max_label = corpora.labeled().flat_map(|c| c.documents.iter()).filter_map(|d| d.gold_label).max();
        if config.class_names.is_empty() {
            let n = max_label.map_or(2, |m| (m + 1).max(2));
            config.class_names = (0..n).map(|i| i.to_string()).collect();
        }
        let n_classes = config.class_names.len();
        if n_classes < 2 {
            return Err(ProjectError::Config("at least two classes are required".into()));
        }
        if let Some(m) = max_label.filter(|&m| m >= n_classes) {
            return Err(ProjectError::Config(format!("label {m} but only {n_classes} classes")));
        }
        let sampler = SamplerState::new(config.sampler_policy, config.seed);
        let n_unlabeled = corpora.unlabeled.len();
        Ok(Project {
            state: ProjectState {
                id: id.into(),
                config,
                revision: 0,
                last_timestamp: 0,
                concepts: ConceptStore::new(),
                functions: Vec::new(),
                next_sequence: 0,
                interactions: 0,
                sampler,
                suggestions: BTreeMap::new(),
                model: None,
                statistics: Statistics::default(),
                end_model: None,
            },
            corpora,
            n_classes,
            events: Vec::new(),
            unlabeled_cache: ColumnCache::new(),
            dev_cache: ColumnCache::new(),
            posteriors: vec![vec![1.0 / n_classes as f64; n_classes]; n_unlabeled],
            covered: vec![false; n_unlabeled],
        })
    }

    /// Rebuilds a project by applying `events` in order.
    ///
    /// Fails if an event's revision is not the one its application produces,
    /// if timestamps decrease, or if an event no longer applies.
    pub fn replay(
        id: impl Into<String>,
        config: ProjectConfig,
        corpora: Corpora,
        events: &[SessionEvent],
    ) -> Result<Project, ProjectError> {
        let mut project = Project::new(id, config, corpora)?;
        for (i, event) in events.iter().enumerate() {
            let expected = project.state.revision + u64::from(event.payload.is_mutation());
            if event.revision != expected {
                return Err(ProjectError::CorruptLog(format!(
                    "event {} ({}) has revision {}, expected {expected}",
                    i + 1,
                    event.payload.kind(),
                    event.revision
                )));
            }
            let before = project.events.len();
            project
                .execute(event.payload.clone(), event.timestamp)
                .map_err(|e| ProjectError::CorruptLog(format!("event {} ({}): {e}", i + 1, event.payload.kind())))?;
            if project.events.len() == before {
                return Err(ProjectError::CorruptLog(format!("event {} ({}) changes nothing", i + 1, event.payload.kind())));
            }
        }
        Ok(project)
    }

    pub fn id(&self) -> &str {
        &self.state.id
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.state.config
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn revision(&self) -> u64 {
        self.state.revision
    }

    pub fn last_timestamp(&self) -> u64 {
        self.state.last_timestamp
    }

    pub fn corpora(&self) -> &Corpora {
        &self.corpora
    }

    pub fn concepts(&self) -> &ConceptStore {
        &self.state.concepts
    }

    pub fn functions(&self) -> &[LabelingFunction] {
        &self.state.functions
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn statistics(&self) -> &Statistics {
        &self.state.statistics
    }

    pub fn model(&self) -> Option<&GenerativeModel> {
        self.state.model.as_ref()
    }

    pub fn end_model(&self) -> Option<&EndModelReport> {
        self.state.end_model.as_ref()
    }

    pub fn sampler(&self) -> &SamplerState {
        &self.state.sampler
    }

    /// Label-model posteriors over the unlabeled split.
    pub fn posteriors(&self) -> &[Vec<f64>] {
        &self.posteriors
    }

    /// Whether a refit is pending after concept edits.
    pub fn is_stale(&self) -> bool {
        self.state.statistics.stale
    }

    pub fn state(&self) -> &ProjectState {
        &self.state
    }

    /// Canonical JSON of the project state; equal states give equal bytes.
    pub fn state_json(&self) -> String {
        serde_json::to_string(&self.state).expect("project state serializes")
    }

    pub fn report(&self) -> SessionReport {
        SessionReport {
            revision: self.state.revision,
            n_functions: self.state.functions.len(),
            model_stats: self.state.statistics.model_stats.clone(),
            end_model: self.state.end_model.clone(),
        }
    }

    pub fn document(&self, uid: &str) -> Option<&Document> {
        self.corpora.find(uid)
    }

    pub fn document_view(&self, doc: &Document) -> DocumentView {
        DocumentView {
            uid: doc.uid.clone(),
            text: doc.text.clone(),
            tokens: doc
                .tokens
                .iter()
                .map(|t| TokenView { start: t.start, end: t.end, surface: t.surface.clone() })
                .collect(),
            sentences: doc.sentences.clone(),
            entities: doc.entities.clone(),
            concept_matches: self
                .state
                .concepts
                .iter()
                .map(|c| (c.name().to_string(), concept_matches(c, doc)))
                .filter(|(_, m)| !m.is_empty())
                .collect(),
        }
    }

    /// The document the sampler would serve now. Serving does not change
    /// state; a document counts as shown once an interaction on it is
    /// submitted.
    pub fn next_document(&self) -> Result<&Document, ProjectError> {
        let uids: Vec<String> = self.corpora.unlabeled.documents.iter().map(|d| d.uid.clone()).collect();
        let uid = peek_next(&uids, &self.posteriors, &self.covered, &self.state.sampler)?;
        Ok(self.corpora.unlabeled.get(&uid).expect("sampled uid exists"))
    }

    /// Posterior per unlabeled document; uniform before any fit.
    pub fn export_labels(&self) -> Vec<LabelExport> {
        self.corpora
            .unlabeled
            .documents
            .iter()
            .zip(&self.posteriors)
            .map(|(d, p)| LabelExport { uid: d.uid.clone(), probs: p.clone() })
            .collect()
    }

    pub fn submit_interaction(&mut self, ix: Interaction, timestamp: u64) -> Result<Suggestion, ProjectError> {
        match self.execute(EventPayload::Interaction(ix), timestamp)? {
            Outcome::Suggested(s) => Ok(s),
            other => unreachable!("interaction produced {other:?}"),
        }
    }

    /// Adds the chosen candidates as functions and refits. Returns the number
    /// of new functions, which is 0 when all were already accepted.
    pub fn accept_functions(
        &mut self,
        suggestion_token: &str,
        rule_ids: &[RuleId],
        timestamp: u64,
    ) -> Result<(usize, Statistics), ProjectError> {
        let payload =
            EventPayload::AcceptFunction { suggestion_token: suggestion_token.to_string(), rule_ids: rule_ids.to_vec() };
        match self.execute(payload, timestamp)? {
            Outcome::Accepted { added, statistics } => Ok((added, statistics)),
            Outcome::Unchanged(statistics) => Ok((0, statistics)),
            other => unreachable!("accept produced {other:?}"),
        }
    }

    pub fn remove_function(&mut self, rule_id: &str, timestamp: u64) -> Result<Statistics, ProjectError> {
        match self.execute(EventPayload::RemoveFunction { rule_id: rule_id.to_string() }, timestamp)? {
            Outcome::Removed(s) => Ok(s),
            other => unreachable!("remove produced {other:?}"),
        }
    }

    /// Applies a concept edit and returns its inverse. The label model is not
    /// refitted; call [`Project::refit`] once edits settle.
    pub fn edit_concepts(&mut self, op: GlmOp, timestamp: u64) -> Result<GlmOp, ProjectError> {
        match self.execute(EventPayload::ConceptEdit(op), timestamp)? {
            Outcome::ConceptEdited { inverse } => Ok(inverse),
            other => unreachable!("concept edit produced {other:?}"),
        }
    }

    pub fn refit(&mut self, timestamp: u64) -> Result<Statistics, ProjectError> {
        match self.execute(EventPayload::Refit {}, timestamp)? {
            Outcome::Refitted(s) => Ok(s),
            other => unreachable!("refit produced {other:?}"),
        }
    }

    pub fn train(&mut self, timestamp: u64) -> Result<EndModelReport, ProjectError> {
        match self.execute(EventPayload::Train {}, timestamp)? {
            Outcome::Trained(r) => Ok(r),
            other => unreachable!("train produced {other:?}"),
        }
    }

    /// Runs one command. On success the command is appended to the event log
    /// unless it changed nothing; on error the project is unchanged.
    pub fn execute(&mut self, payload: EventPayload, timestamp: u64) -> Result<Outcome, ProjectError> {
        if timestamp < self.state.last_timestamp {
            return Err(ProjectError::CorruptLog(format!(
                "timestamp {timestamp} precedes {}",
                self.state.last_timestamp
            )));
        }
        let outcome = match &payload {
            EventPayload::Interaction(ix) => Outcome::Suggested(self.do_interaction(ix)?),
            EventPayload::AcceptFunction { suggestion_token, rule_ids } => self.do_accept(suggestion_token, rule_ids)?,
            EventPayload::RemoveFunction { rule_id } => Outcome::Removed(self.do_remove(rule_id)?),
            EventPayload::ConceptEdit(op) => Outcome::ConceptEdited { inverse: self.do_concept_edit(op)? },
            EventPayload::Refit {} => {
                self.state.revision += 1;
                Outcome::Refitted(self.fit())
            }
            EventPayload::Train {} => Outcome::Trained(self.do_train()?),
        };
        if !matches!(outcome, Outcome::Unchanged(_)) {
            self.state.last_timestamp = timestamp;
            self.events.push(SessionEvent { revision: self.state.revision, timestamp, payload });
        }
        Ok(outcome)
    }

    fn do_interaction(&mut self, ix: &Interaction) -> Result<Suggestion, ProjectError> {
        let doc = self
            .corpora
            .unlabeled
            .get(&ix.doc_uid)
            .ok_or_else(|| ProjectError::UnknownDocument(ix.doc_uid.clone()))?;
        ix.validate(doc.tokens.len(), self.n_classes)?;
        let seed = compile_interaction(ix, doc, &self.state.concepts, self.state.config.compile)?;
        let set = synthesize(&seed, doc, &self.state.concepts, self.state.config.k)?;

        let ix_json = serde_json::to_string(ix).expect("interactions serialize");
        let token = format!("{:016x}", fnv1a64(format!("{}:{ix_json}", self.state.interactions).as_bytes()));
        let candidates = set.candidates.iter().map(|c| self.candidate_view(c)).collect();
        self.state.interactions += 1;
        self.state.sampler.shown.insert(ix.doc_uid.clone());
        self.state
            .suggestions
            .insert(token.clone(), StoredSuggestion { doc_uid: ix.doc_uid.clone(), candidates: set.candidates });
        Ok(Suggestion {
            suggestion_token: token,
            seed: seed.rule.render(&self.state.config.class_names),
            candidates,
        })
    }

    fn candidate_view(&self, c: &Candidate) -> CandidateView {
        let dev = &self.corpora.dev;
        let dev_stats = (!dev.is_empty()).then(|| {
            let (mut fired, mut correct) = (0, 0);
            for doc in &dev.documents {
                if let Ok(Some(label)) = evaluate_rule(&c.rule, doc, &self.state.concepts) {
                    fired += 1;
                    correct += usize::from(doc.gold_label == Some(label));
                }
            }
            RuleDevStats {
                coverage: fired as f64 / dev.len() as f64,
                accuracy: (fired > 0).then(|| correct as f64 / fired as f64),
                correct,
                incorrect: fired - correct,
            }
        });
        CandidateView {
            rule_id: c.rule.id().to_string(),
            rendering: c.rule.render(&self.state.config.class_names),
            formula: c.rule.formula(),
            score: c.score,
            coverage: c.interaction_coverage,
            dev_stats,
        }
    }

    fn do_accept(&mut self, token: &str, rule_ids: &[RuleId]) -> Result<Outcome, ProjectError> {
        let suggestion = self.state.suggestions.get(token).ok_or_else(|| ProjectError::StaleToken(token.to_string()))?;
        let mut chosen = Vec::new();
        let mut seen = BTreeSet::new();
        for id in rule_ids {
            let candidate = suggestion
                .candidates
                .iter()
                .find(|c| c.rule.id() == id)
                .ok_or_else(|| ProjectError::UnknownCandidate(id.clone()))?;
            if seen.insert(id.clone()) && self.state.functions.iter().all(|f| f.id() != id) {
                chosen.push(candidate.rule.clone());
            }
        }
        if chosen.is_empty() {
            warn!("suggestion {token}: every requested function is already accepted");
            return Ok(Outcome::Unchanged(self.state.statistics.clone()));
        }
        let added = chosen.len();
        for rule in chosen {
            self.state.functions.push(LabelingFunction { rule, accepted_at: self.state.next_sequence, enabled: true });
            self.state.next_sequence += 1;
        }
        self.state.revision += 1;
        Ok(Outcome::Accepted { added, statistics: self.fit() })
    }

    fn do_remove(&mut self, rule_id: &str) -> Result<Statistics, ProjectError> {
        let pos = self
            .state
            .functions
            .iter()
            .position(|f| f.id() == rule_id)
            .ok_or_else(|| ProjectError::UnknownFunction(rule_id.to_string()))?;
        self.state.functions.remove(pos);
        self.state.revision += 1;
        Ok(self.fit())
    }

    fn do_concept_edit(&mut self, op: &GlmOp) -> Result<GlmOp, ProjectError> {
        let touched = match op {
            GlmOp::CreateConcept { name } | GlmOp::DeleteConcept { name } => name.clone(),
            GlmOp::RestoreConcept { concept } => concept.name().to_string(),
            GlmOp::AddElement { concept, .. } | GlmOp::DeleteElement { concept, .. } => concept.clone(),
            other => return Err(ProjectError::NotConceptEdit(format!("{other:?}"))),
        };
        let mut draft = AnnotationDraft::new(&Document::new("", ""));
        let inverse = apply_operation(&mut draft, &mut self.state.concepts, op.clone())?;
        self.unlabeled_cache.invalidate_concept(&touched);
        self.dev_cache.invalidate_concept(&touched);
        // functions disabled for referencing a missing concept may work again
        for f in self.state.functions.iter_mut().filter(|f| !f.enabled) {
            f.enabled = f.rule.concepts().contains(touched.as_str());
        }
        self.state.statistics.stale = true;
        self.state.revision += 1;
        Ok(inverse)
    }

    fn do_train(&mut self) -> Result<EndModelReport, ProjectError> {
        if self.state.model.is_none() {
            return Err(ProjectError::NoModel);
        }
        if self.corpora.test.is_empty() {
            return Err(ProjectError::NoTestSet);
        }
        let (_, report) = train_and_evaluate(
            &self.corpora.unlabeled,
            &self.posteriors,
            &self.covered,
            &self.corpora.test,
            self.n_classes,
            &self.state.config.end_model,
        )?;
        self.state.end_model = Some(report.clone());
        self.state.revision += 1;
        Ok(report)
    }

    /// Re-evaluates functions, refits the label model and recomputes the
    /// statistics. Functions that fail to evaluate are disabled.
    fn fit(&mut self) -> Statistics {
        let uniform = vec![1.0 / self.n_classes as f64; self.n_classes];
        let (matrix, failures) =
            self.unlabeled_cache.matrix(&self.state.functions, &self.corpora.unlabeled, &self.state.concepts);
        for failure in failures {
            warn!("disabling function {}: {}", failure.rule_id, failure.error);
            if let Some(f) = self.state.functions.iter_mut().find(|f| f.id() == failure.rule_id) {
                f.enabled = false;
            }
        }
        let dev_gold: Vec<usize> = self.corpora.dev.documents.iter().filter_map(|d| d.gold_label).collect();
        let prior = class_frequencies(&dev_gold, self.n_classes);
        let model = if matrix.n_cols() == 0 {
            None
        } else {
            match fit_generative(&matrix, self.n_classes, &self.state.config.em, Some(&prior)) {
                Ok(m) => Some(m),
                Err(e) => {
                    warn!("label model not fitted: {e}");
                    None
                }
            }
        };

        let previous = self.state.statistics.model_stats.clone();
        let (mut lf_stats, mut model_stats) = (None, None);
        match &model {
            Some(m) => {
                self.posteriors = predict_proba(m, &matrix).expect("model fitted on this matrix");
                self.covered = (0..matrix.n_rows()).map(|i| matrix.is_covered(i)).collect();
                if !self.corpora.dev.is_empty() {
                    let (dev_matrix, _) =
                        self.dev_cache.matrix(&self.state.functions, &self.corpora.dev, &self.state.concepts);
                    lf_stats = compute_lf_stats(&dev_matrix, &dev_gold).map(|mut stats| {
                        for s in &mut stats {
                            s.excluded = m.excluded.contains(&s.rule_id);
                        }
                        stats
                    });
                    let dev_post = predict_proba(m, &dev_matrix).expect("dev matrix has the model's columns");
                    model_stats =
                        compute_model_stats(&dev_post, &dev_matrix, &dev_gold, self.n_classes, previous.as_ref());
                }
            }
            None => {
                self.posteriors = vec![uniform; self.corpora.unlabeled.len()];
                self.covered = vec![false; self.corpora.unlabeled.len()];
            }
        }
        let n = self.covered.len().max(1) as f64;
        self.state.model = model;
        self.state.statistics = Statistics {
            revision: self.state.revision,
            n_functions: self.state.functions.len(),
            lf_stats,
            model_stats,
            unlabeled_coverage: self.covered.iter().filter(|&&c| c).count() as f64 / n,
            stale: false,
        };
        self.state.statistics.clone()
    }
}
