use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One mined community question-answer pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    pub rating: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default)]
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizationExample {
    pub document: String,
    pub summary: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Span,
    YesNo,
    Unanswerable,
    List,
    Table,
    Paragraph,
}

impl AnswerType {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::Span => "span",
            AnswerType::YesNo => "yes_no",
            AnswerType::Unanswerable => "unanswerable",
            AnswerType::List => "list",
            AnswerType::Table => "table",
            AnswerType::Paragraph => "paragraph",
        }
    }
}

/// Answer-focused question generation record. Offsets count characters,
/// not bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QGExample {
    pub passage: String,
    pub answer_start: usize,
    pub answer_end: usize,
    pub question: String,
    pub answer_type: AnswerType,
}

impl QGExample {
    pub fn has_valid_span(&self) -> bool {
        self.answer_start < self.answer_end && self.answer_end <= self.passage.chars().count()
    }

    /// The answer text, or `None` when the offsets do not describe a span.
    pub fn answer_text(&self) -> Option<String> {
        if !self.has_valid_span() {
            return None;
        }
        Some(
            self.passage
                .chars()
                .skip(self.answer_start)
                .take(self.answer_end - self.answer_start)
                .collect(),
        )
    }
}

/// A line that could not be parsed, kept so lenient readers can count it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Malformed {
    pub line: usize,
    pub message: String,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, &line)?;
    }
    Ok(())
}

/// Reads every record or fails on the first line that does not match the
/// schema. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for_each_line(path, |line, text| {
        let rec = serde_json::from_str(text).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        out.push(rec);
        Ok(())
    })?;
    Ok(out)
}

/// Like [`read_jsonl`], but schema violations become [`Malformed`] entries.
pub fn read_jsonl_lenient<T: DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<Vec<Result<T, Malformed>>> {
    let mut out = Vec::new();
    for_each_line(path.as_ref(), |line, text| {
        out.push(serde_json::from_str(text).map_err(|e| Malformed {
            line,
            message: e.to_string(),
        }));
        Ok(())
    })?;
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
