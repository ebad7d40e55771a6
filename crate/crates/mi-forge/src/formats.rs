//! On-disk artifact formats: JSONL per pipeline stage, optional JSON
//! instrument files, stop-list text, embedder overrides, human rating CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mi_core::embed::StubEmbedder;
use mi_core::profile::QuestionnaireInstrument;
use mi_core::text::StopList;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io { path: path.display().to_string(), source }
}

/// Read a whole JSONL file, reporting the 1-based line of any bad record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let data = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| FormatError::Record {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Write records as compact JSON, one per line, replacing the file.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
    }
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record).map_err(|e| FormatError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Pretty-printed single JSON document (agreement.json, correlations.json).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Instrument from a JSON file, or the built-in one.
pub fn load_instrument(path: Option<&Path>) -> Result<QuestionnaireInstrument, FormatError> {
    let instrument = match path {
        None => QuestionnaireInstrument::builtin(),
        Some(p) => {
            let data = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&data).map_err(|e| FormatError::File {
                path: p.display().to_string(),
                message: e.to_string(),
            })?
        }
    };
    instrument.validate().map_err(|e| FormatError::File {
        path: path.map(|p| p.display().to_string()).unwrap_or_else(|| "<builtin>".to_string()),
        message: e.to_string(),
    })?;
    Ok(instrument)
}

pub fn load_stop_list(path: Option<&Path>) -> Result<StopList, FormatError> {
    match path {
        None => Ok(StopList::builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Ok(StopList::from_text(&text))
        }
    }
}

/// Deterministic stub embedder, optionally with cosine overrides.
pub fn load_stub_embedder(overrides: Option<&Path>) -> Result<StubEmbedder, FormatError> {
    let mut embedder = StubEmbedder::new();
    if let Some(p) = overrides {
        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        embedder.parse_overrides(&text).map_err(|e| FormatError::File {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(embedder)
}

/// One annotator's rubric scores for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRating {
    pub session_id: String,
    pub annotator: String,
    pub coherence: u8,
    pub depth: u8,
    pub progress: u8,
    pub naturalness: u8,
    pub empathy: u8,
    pub adherence: u8,
}

impl HumanRating {
    pub fn dimension(&self, name: &str) -> Option<u8> {
        match name {
            "coherence" => Some(self.coherence),
            "depth" => Some(self.depth),
            "progress" => Some(self.progress),
            "naturalness" => Some(self.naturalness),
            "empathy" => Some(self.empathy),
            "adherence" => Some(self.adherence),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), String> {
        for name in DIMENSIONS {
            let v = self.dimension(name).unwrap();
            if !(1..=5).contains(&v) {
                return Err(format!("{name} score {v} outside 1..=5"));
            }
        }
        if self.session_id.trim().is_empty() || self.annotator.trim().is_empty() {
            return Err("empty session_id or annotator".to_string());
        }
        Ok(())
    }
}

pub const DIMENSIONS: [&str; 6] =
    ["coherence", "depth", "progress", "naturalness", "empathy", "adherence"];

/// Ratings CSV with header
/// `session_id,annotator,coherence,depth,progress,naturalness,empathy,adherence`.
pub fn read_human_ratings(path: &Path) -> Result<Vec<HumanRating>, FormatError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| FormatError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<HumanRating>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let rating = row.map_err(|e| FormatError::Record {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        rating.validate().map_err(|message| FormatError::Record {
            path: path.display().to_string(),
            line,
            message,
        })?;
        out.push(rating);
    }
    Ok(out)
}

/// Append-or-create convenience used for run logs.
pub fn append_lines(path: &Path, lines: &[String]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    for line in lines {
        writeln!(f, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: String,
        value: u32,
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![
            Row { id: "a".to_string(), value: 1 },
            Row { id: "b".to_string(), value: 2 },
        ];
        write_jsonl(&path, &rows).unwrap();
        let back: Vec<Row> = read_jsonl(&path).unwrap();
        assert_eq!(back, rows);
        // Blank lines are tolerated.
        let raw = fs::read_to_string(&path).unwrap();
        fs::write(&path, format!("{raw}\n\n")).unwrap();
        let again: Vec<Row> = read_jsonl(&path).unwrap();
        assert_eq!(again, rows);
    }

    #[test]
    fn bad_record_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"value\":1}\nnot json\n").unwrap();
        let err = read_jsonl::<Row>(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn human_ratings_csv_parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        fs::write(
            &path,
            "session_id,annotator,coherence,depth,progress,naturalness,empathy,adherence\n\
             s-1,ann-a,5,4,3,4,5,4\n\
             s-1,ann-b,4,4,3,4,5,5\n",
        )
        .unwrap();
        let ratings = read_human_ratings(&path).unwrap();
        assert_eq!(ratings.len(), 2);
        assert_eq!(ratings[0].dimension("empathy"), Some(5));

        fs::write(
            &path,
            "session_id,annotator,coherence,depth,progress,naturalness,empathy,adherence\n\
             s-1,ann-a,9,4,3,4,5,4\n",
        )
        .unwrap();
        let err = read_human_ratings(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn builtin_instrument_loads() {
        let instrument = load_instrument(None).unwrap();
        assert_eq!(instrument.items.len(), 23);
    }

    #[test]
    fn instrument_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instrument.json");
        let builtin = QuestionnaireInstrument::builtin();
        fs::write(&path, serde_json::to_string(&builtin).unwrap()).unwrap();
        let loaded = load_instrument(Some(&path)).unwrap();
        assert_eq!(loaded.items.len(), builtin.items.len());
    }
}
