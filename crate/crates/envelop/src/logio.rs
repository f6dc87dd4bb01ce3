//! JSON-lines event logs and occurrence lists.

use std::path::Path;

use envelop_core::records::{EventRecord, Occurrence, ParsingRule};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Parse {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

/// One compact JSON object per line.
pub fn to_lines<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("records serialize") + "\n")
        .collect()
}

pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    read_lines(path)
}

pub fn read_occurrences(path: &Path) -> Result<Vec<Occurrence>, CliError> {
    read_lines(path)
}

pub fn read_rule(path: &Path) -> Result<ParsingRule, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let rule: ParsingRule = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    rule.validate()?;
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use envelop_core::records::{Actor, EventKind};

    #[test]
    fn log_lines_round_trip() {
        let log = vec![
            EventRecord::new(0, 0, Actor::Alice, EventKind::Command, "1"),
            EventRecord::new(1, 3, Actor::Bob, EventKind::Detection, "01"),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, to_lines(&log)).unwrap();
        assert_eq!(read_log(&path).unwrap(), log);
    }

    #[test]
    fn bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "{\"seq\":0}\n").unwrap();
        let err = read_log(&path).unwrap_err();
        assert!(err.to_string().contains("log.jsonl:1"), "{err}");
    }
}
