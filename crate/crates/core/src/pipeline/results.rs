//! Results files: one tab-separated line per show,
//! `show_id  system  predicted  confidence  genre=score;genre=score;…`,
//! with confidence and scores at six decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::create_parent;
use crate::error::{Error, Result};
use crate::pipeline::{ClassificationResult, System};

fn check_field(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n', '\r', ';', '=']) {
        return Err(Error::Validation(format!("{what} `{value}` cannot be written to a results file")));
    }
    Ok(())
}

pub fn format_results(results: &[ClassificationResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        check_field(&r.show_id, "show id")?;
        let mut scores = Vec::with_capacity(r.scores.len());
        for (genre, score) in &r.scores {
            check_field(genre, "genre")?;
            scores.push(format!("{genre}={score:.6}"));
        }
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{}",
            r.show_id,
            r.system,
            r.predicted,
            r.confidence,
            scores.join(";")
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<ClassificationResult>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::format(path, Some(i + 1), msg);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
        }
        let system: System = fields[1].parse().map_err(|e: Error| err(e.to_string()))?;
        let confidence: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad confidence `{}`", fields[3])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(err(format!("confidence {confidence} outside [0, 1]")));
        }
        let mut scores = BTreeMap::new();
        for item in fields[4].split(';') {
            let (genre, value) = item
                .split_once('=')
                .ok_or_else(|| err(format!("score entry `{item}` is not genre=value")))?;
            let value: f64 = value.parse().map_err(|_| err(format!("bad score `{value}`")))?;
            if !value.is_finite() || scores.insert(genre.to_string(), value).is_some() {
                return Err(err(format!("invalid or repeated score for `{genre}`")));
            }
        }
        if !scores.contains_key(fields[2]) {
            return Err(err(format!("predicted genre `{}` has no score", fields[2])));
        }
        out.push(ClassificationResult {
            show_id: fields[0].to_string(),
            system,
            scores,
            predicted: fields[2].to_string(),
            confidence,
        });
    }
    Ok(out)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ClassificationResult>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(path, &text)
}

pub fn write_results(path: impl AsRef<Path>, results: &[ClassificationResult]) -> Result<()> {
    let path = path.as_ref();
    let text = format_results(results)?;
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ClassificationResult> {
        let scores = |a: f64, b: f64| [("Children's".to_string(), a), ("News".to_string(), b)].into();
        vec![
            ClassificationResult::from_scores("show-1", System::Gmm, scores(-1234.5678911, -1300.0)).unwrap(),
            ClassificationResult::from_scores("show-2", System::Svm, scores(0.25, 0.75)).unwrap(),
        ]
    }

    #[test]
    fn six_decimal_layout() {
        let text = format_results(&sample()).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "show-1\tgmm\tChildren's\t1.000000\tChildren's=-1234.567891;News=-1300.000000");
    }

    #[test]
    fn round_trip_through_text() {
        let text = format_results(&sample()).unwrap();
        let back = parse_results(Path::new("r.tsv"), &text).unwrap();
        assert_eq!(format_results(&back).unwrap(), text);
        assert_eq!(back[1].predicted, "News");
        assert_eq!(back[1].system, System::Svm);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let bad = "a\tgmm\tNews\t0.5\tNews=1\nb\tgmm\tNews\n";
        match parse_results(Path::new("r.tsv"), bad) {
            Err(Error::Format { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(parse_results(Path::new("r.tsv"), "a\tbogus\tNews\t0.5\tNews=1\n").is_err());
        assert!(parse_results(Path::new("r.tsv"), "a\tgmm\tDrama\t0.5\tNews=1\n").is_err());
    }
}
