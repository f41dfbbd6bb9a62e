//! Batch commands: replay an event log, re-evaluate a project.

use std::path::Path;

use labelforge::project::{load_corpus_dir, read_log, Project, ProjectError, SessionReport};

fn train_if_untrained(project: &mut Project) -> Result<(), ProjectError> {
    let trained = project.events().iter().any(|e| e.payload.kind() == "train");
    if !trained && project.model().is_some() && !project.corpora().test.is_empty() {
        project.train(project.last_timestamp())?;
    }
    Ok(())
}

/// Replays `log` against the corpus in `corpus_dir`. When the log never
/// trains the end model, it is trained once at the end so the report always
/// carries end-model metrics if a test split exists.
pub fn replay(log: &Path, corpus_dir: &Path) -> Result<(Project, SessionReport), ProjectError> {
    let (config, corpora) = load_corpus_dir(corpus_dir)?;
    let events = read_log(log)?;
    let id = corpus_dir.file_name().map_or_else(|| "replay".to_string(), |n| n.to_string_lossy().into_owned());
    let mut project = Project::replay(id, config, corpora, &events)?;
    train_if_untrained(&mut project)?;
    let report = project.report();
    Ok((project, report))
}

/// Rebuilds the project in `dir` with the end model seeded by `seed` and
/// retrains it. Nothing is written back.
pub fn eval(dir: &Path, seed: Option<u64>) -> Result<SessionReport, ProjectError> {
    let (mut config, corpora) = load_corpus_dir(dir)?;
    if let Some(seed) = seed {
        config.end_model.seed = seed;
    }
    let log = dir.join(labelforge::project::EVENTS_FILE);
    let events = if log.exists() { read_log(&log)? } else { Vec::new() };
    let id = dir.file_name().map_or_else(|| "project".to_string(), |n| n.to_string_lossy().into_owned());
    let mut project = Project::replay(id, config, corpora, &events)?;
    if project.model().is_none() {
        return Err(ProjectError::NoModel);
    }
    project.train(project.last_timestamp())?;
    Ok(project.report())
}
