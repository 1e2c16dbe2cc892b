//! Line-delimited JSON reading and writing.
//!
//! The canonical on-disk encoding for all domain types is one JSON object
//! per line with snake_case keys. Unknown keys are rejected in strict mode
//! and ignored in lenient mode.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown keys: {keys}")]
    UnknownKeys { line: usize, keys: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl JsonlError {
    pub fn line(&self) -> Option<usize> {
        match self {
            JsonlError::Parse { line, .. } | JsonlError::UnknownKeys { line, .. } => Some(*line),
            JsonlError::Io(_) => None,
        }
    }
}

/// Parse one JSON record, collecting any keys the target type ignores.
pub fn parse_record<T: DeserializeOwned>(text: &str, mode: ParseMode, line: usize) -> Result<T, JsonlError> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let mut unknown: Vec<String> = Vec::new();
    let value = serde_ignored::deserialize(&mut deserializer, |path| {
        unknown.push(path.to_string());
    })
    .map_err(|source| JsonlError::Parse { line, source })?;
    if mode == ParseMode::Strict && !unknown.is_empty() {
        return Err(JsonlError::UnknownKeys {
            line,
            keys: unknown.join(", "),
        });
    }
    Ok(value)
}

/// Read every record, failing on the first malformed line. Blank lines
/// are skipped. Line numbers are 1-based.
pub fn read_all<T: DeserializeOwned>(reader: impl BufRead, mode: ParseMode) -> Result<Vec<T>, JsonlError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, mode, idx + 1)?);
    }
    Ok(records)
}

/// Read records one line at a time, routing each line's outcome through
/// the callback so a caller can skip bad lines in lenient pipelines.
pub fn read_each<T, F>(reader: impl BufRead, mode: ParseMode, mut on_record: F) -> Result<(), JsonlError>
where
    T: DeserializeOwned,
    F: FnMut(usize, Result<T, JsonlError>) -> Result<(), JsonlError>,
{
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        on_record(idx + 1, parse_record(&line, mode, idx + 1))?;
    }
    Ok(())
}

pub fn write_all<T: Serialize>(mut writer: impl Write, records: &[T]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SynthSample;

    #[test]
    fn lenient_ignores_unknown_keys_strict_rejects() {
        let line = r#"{"sample_id":"x","task_id":"t","prompt_id":"p","text":"hi","label":"a","step_index":0,"extra_key":1}"#;
        let ok: SynthSample = parse_record(line, ParseMode::Lenient, 1).unwrap();
        assert_eq!(ok.text, "hi");
        let err = parse_record::<SynthSample>(line, ParseMode::Strict, 1).unwrap_err();
        match err {
            JsonlError::UnknownKeys { line, keys } => {
                assert_eq!(line, 1);
                assert!(keys.contains("extra_key"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn round_trip_preserves_records() {
        let samples = vec![
            SynthSample::new("t", "p", "one", "a", 0),
            SynthSample::new("t", "p", "two", "b", 1),
        ];
        let mut buf = Vec::new();
        write_all(&mut buf, &samples).unwrap();
        let back: Vec<SynthSample> = read_all(buf.as_slice(), ParseMode::Strict).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let data = "{\"sample_id\":\"x\",\"task_id\":\"t\",\"prompt_id\":\"p\",\"text\":\"hi\",\"label\":\"a\"}\nnot json\n";
        let err = read_all::<SynthSample>(data.as_bytes(), ParseMode::Lenient).unwrap_err();
        assert_eq!(err.line(), Some(2));
    }
}
