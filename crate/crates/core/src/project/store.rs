use std::fs;
use std::path::Path;

use super::{read_log, Project, ProjectConfig, ProjectError};
use crate::corpus::{load_corpus, parse_corpus, Corpus, Document, Split};
use crate::entities::GazetteerTagger;

pub const PROJECT_FILE: &str = "project.json";
pub const EVENTS_FILE: &str = "events.jsonl";

/// The splits of one project. Missing optional splits are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpora {
    pub unlabeled: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub valid: Option<Corpus>,
}

impl Corpora {
    pub fn new(unlabeled: Corpus, dev: Corpus, test: Corpus) -> Self {
        Corpora { unlabeled, dev, test, valid: None }
    }

    /// Splits that carry gold labels.
    pub fn labeled(&self) -> impl Iterator<Item = &Corpus> {
        [&self.dev, &self.test].into_iter().chain(self.valid.as_ref())
    }

    pub fn find(&self, uid: &str) -> Option<&Document> {
        std::iter::once(&self.unlabeled).chain(self.labeled()).find_map(|c| c.get(uid))
    }

    /// Parses JSONL contents; `None` stands for an absent split.
    pub fn from_jsonl(
        unlabeled: &str,
        dev: Option<&str>,
        test: Option<&str>,
        valid: Option<&str>,
    ) -> Result<Corpora, ProjectError> {
        let tagger = GazetteerTagger::default();
        let parse = |text: &str, split| parse_corpus(text.as_bytes(), split, &tagger);
        let opt = |text: Option<&str>, split| -> Result<Corpus, ProjectError> {
            Ok(match text {
                Some(t) => parse(t, split)?,
                None => Corpus::empty(split),
            })
        };
        let corpora = Corpora {
            unlabeled: parse(unlabeled, Split::Unlabeled)?,
            dev: opt(dev, Split::Dev)?,
            test: opt(test, Split::Test)?,
            valid: valid.map(|v| parse(v, Split::Valid)).transpose()?,
        };
        corpora.check_unique()?;
        Ok(corpora)
    }

    fn check_unique(&self) -> Result<(), ProjectError> {
        let mut seen = std::collections::HashSet::new();
        for corpus in std::iter::once(&self.unlabeled).chain(self.labeled()) {
            for d in &corpus.documents {
                if !seen.insert(d.uid.as_str()) {
                    return Err(ProjectError::Config(format!("uid {} appears in more than one split", d.uid)));
                }
            }
        }
        Ok(())
    }
}

/// Loads `project.json` (optional) and the split files of a corpus
/// directory: `unlabeled.jsonl` is required; `dev.jsonl`, `test.jsonl` and
/// `valid.jsonl` are optional.
pub fn load_corpus_dir(dir: impl AsRef<Path>) -> Result<(ProjectConfig, Corpora), ProjectError> {
    let dir = dir.as_ref();
    let config = match fs::read_to_string(dir.join(PROJECT_FILE)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| ProjectError::Config(format!("{PROJECT_FILE}: {e}")))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => ProjectConfig::default(),
        Err(e) => return Err(ProjectError::Io(e.to_string())),
    };
    let load = |name: &str, split| -> Result<Option<Corpus>, ProjectError> {
        let path = dir.join(name);
        if path.exists() {
            Ok(Some(load_corpus(&path, split)?))
        } else {
            Ok(None)
        }
    };
    let unlabeled = load("unlabeled.jsonl", Split::Unlabeled)?
        .ok_or_else(|| ProjectError::Config(format!("{} has no unlabeled.jsonl", dir.display())))?;
    let corpora = Corpora {
        unlabeled,
        dev: load("dev.jsonl", Split::Dev)?.unwrap_or_else(|| Corpus::empty(Split::Dev)),
        test: load("test.jsonl", Split::Test)?.unwrap_or_else(|| Corpus::empty(Split::Test)),
        valid: load("valid.jsonl", Split::Valid)?,
    };
    corpora.check_unique()?;
    Ok((config, corpora))
}

impl Project {
    /// Opens a project directory: corpus files, `project.json` and the
    /// event log `events.jsonl`, which is replayed if present.
    pub fn open_dir(dir: impl AsRef<Path>) -> Result<Project, ProjectError> {
        let dir = dir.as_ref();
        let (config, corpora) = load_corpus_dir(dir)?;
        let id = dir.file_name().map_or_else(|| "project".to_string(), |n| n.to_string_lossy().into_owned());
        let log = dir.join(EVENTS_FILE);
        let events = if log.exists() { read_log(&log)? } else { Vec::new() };
        Project::replay(id, config, corpora, &events)
    }
}
