//! Per-prompt length samples on disk.
//!
//! Two layouts are accepted: JSON lines, one
//! `{"prompt_id": "...", "lengths": [..]}` record per prompt, or a
//! long-form CSV with header `prompt_id,length`. Files ending in `.csv`
//! are read as CSV, everything else as JSON lines.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSamples {
    pub prompt_id: String,
    pub lengths: Vec<f64>,
}

pub fn load_grouped(path: &Path) -> Result<Vec<PromptSamples>, FitError> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(&text)
    } else {
        parse_jsonl(&text)
    }
}

pub fn parse_jsonl(text: &str) -> Result<Vec<PromptSamples>, FitError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PromptSamples =
            serde_json::from_str(line).map_err(|e| FitError::Parse { line: i + 1, msg: e.to_string() })?;
        check_lengths(&rec.lengths, i + 1)?;
        out.push(rec);
    }
    Ok(out)
}

/// Groups long-form rows by `prompt_id`, keeping first-appearance order.
pub fn parse_csv(text: &str) -> Result<Vec<PromptSamples>, FitError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| FitError::Parse { line: 1, msg: e.to_string() })?.clone();
    if headers.len() != 2 || &headers[0] != "prompt_id" || &headers[1] != "length" {
        return Err(FitError::Parse { line: 1, msg: "expected header `prompt_id,length`".into() });
    }
    let mut out: Vec<PromptSamples> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| FitError::Parse { line, msg: e.to_string() })?;
        let id = row[0].to_string();
        let len: f64 = row[1]
            .trim()
            .parse()
            .map_err(|_| FitError::Parse { line, msg: format!("invalid length `{}`", &row[1]) })?;
        check_lengths(&[len], line)?;
        let idx = *slot.entry(id.clone()).or_insert_with(|| {
            out.push(PromptSamples { prompt_id: id, lengths: Vec::new() });
            out.len() - 1
        });
        out[idx].lengths.push(len);
    }
    Ok(out)
}

fn check_lengths(lengths: &[f64], line: usize) -> Result<(), FitError> {
    match lengths.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(bad) => Err(FitError::Parse { line, msg: format!("lengths must be positive, got {bad}") }),
        None => Ok(()),
    }
}

pub fn save_grouped_jsonl(groups: &[PromptSamples], path: &Path) -> Result<(), FitError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for g in groups {
        serde_json::to_writer(&mut f, g).map_err(std::io::Error::from)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_records() {
        let g = parse_jsonl("{\"prompt_id\":\"a\",\"lengths\":[1,2,3]}\n\n{\"prompt_id\":\"b\",\"lengths\":[4]}\n").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].lengths, vec![1.0, 2.0, 3.0]);
        assert_eq!(g[1].prompt_id, "b");
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let err = parse_jsonl("{\"prompt_id\":\"a\",\"lengths\":[1]}\n{oops}\n").unwrap_err();
        assert!(matches!(err, FitError::Parse { line: 2, .. }));
        let err = parse_jsonl("{\"prompt_id\":\"a\",\"lengths\":[0]}\n").unwrap_err();
        assert!(matches!(err, FitError::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_groups_in_order() {
        let g = parse_csv("prompt_id,length\nx,5\ny,7\nx,6\n").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].prompt_id, "x");
        assert_eq!(g[0].lengths, vec![5.0, 6.0]);
        assert_eq!(g[1].lengths, vec![7.0]);
    }

    #[test]
    fn csv_bad_header_and_value() {
        assert!(matches!(parse_csv("id,len\nx,1\n"), Err(FitError::Parse { line: 1, .. })));
        assert!(matches!(parse_csv("prompt_id,length\nx,1\nx,abc\n"), Err(FitError::Parse { line: 3, .. })));
    }
}
