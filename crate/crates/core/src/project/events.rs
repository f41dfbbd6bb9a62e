use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProjectError;
use crate::glm::{GlmOp, Interaction};
use crate::rule::RuleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    Interaction(Interaction),
    AcceptFunction { suggestion_token: String, rule_ids: Vec<RuleId> },
    RemoveFunction { rule_id: RuleId },
    ConceptEdit(GlmOp),
    Refit {},
    Train {},
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::Interaction(_) => "interaction",
            EventPayload::AcceptFunction { .. } => "accept_function",
            EventPayload::RemoveFunction { .. } => "remove_function",
            EventPayload::ConceptEdit(_) => "concept_edit",
            EventPayload::Refit {} => "refit",
            EventPayload::Train {} => "train",
        }
    }

    /// Whether applying the event advances the project revision.
    pub fn is_mutation(&self) -> bool {
        !matches!(self, EventPayload::Interaction(_))
    }
}

/// One entry of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Project revision after the event.
    pub revision: u64,
    /// Milliseconds since the Unix epoch; non-decreasing along a log.
    pub timestamp: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

/// Reads a JSONL event log. Blank lines are skipped.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, ProjectError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ProjectError::Io(format!("{}: {e}", path.display())))?;
    parse_log(BufReader::new(file))
}

pub fn parse_log(reader: impl BufRead) -> Result<Vec<SessionEvent>, ProjectError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ProjectError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| ProjectError::CorruptLog(format!("line {}: {e}", i + 1)))?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_log(path: impl AsRef<Path>, events: &[SessionEvent]) -> Result<(), ProjectError> {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(event).expect("events serialize"));
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out).map_err(|e| ProjectError::Io(e.to_string()))
}

pub fn append_event(path: impl AsRef<Path>, event: &SessionEvent) -> Result<(), ProjectError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path.as_ref())
        .map_err(|e| ProjectError::Io(e.to_string()))?;
    writeln!(file, "{}", serde_json::to_string(event).expect("events serialize"))
        .map_err(|e| ProjectError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::SpanAnnotation;

    #[test]
    fn wire_format() {
        let e = SessionEvent { revision: 3, timestamp: 10, payload: EventPayload::Refit {} };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"revision":3,"timestamp":10,"kind":"refit","payload":{}}"#);
        assert_eq!(serde_json::from_str::<SessionEvent>(&json).unwrap(), e);

        let ix = Interaction {
            doc_uid: "d".into(),
            spans: vec![SpanAnnotation { id: 0, start_token: 0, end_token: 1, concept: None }],
            links: vec![],
            label: 1,
        };
        let e = SessionEvent { revision: 0, timestamp: 11, payload: EventPayload::Interaction(ix) };
        let back: SessionEvent = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
        assert!(!e.payload.is_mutation());
    }

    #[test]
    fn bad_line_is_reported() {
        let log = "{\"revision\":1,\"timestamp\":0,\"kind\":\"refit\",\"payload\":{}}\n\nnot json\n";
        match parse_log(log.as_bytes()) {
            Err(ProjectError::CorruptLog(msg)) => assert!(msg.starts_with("line 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
