use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::features::create_parent;
use crate::error::{Error, Result};

/// Per-frame background indices, each in `0..num_backgrounds`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    num_backgrounds: usize,
    labels: Vec<usize>,
}

impl LabelSequence {
    pub fn new(num_backgrounds: usize, labels: Vec<usize>) -> Result<Self> {
        if num_backgrounds == 0 {
            return Err(Error::Validation("number of backgrounds must be positive".into()));
        }
        if let Some((n, &x)) = labels.iter().enumerate().find(|(_, &x)| x >= num_backgrounds) {
            return Err(Error::Validation(format!(
                "label {x} at frame {n} is outside 0..{num_backgrounds}"
            )));
        }
        Ok(Self {
            num_backgrounds,
            labels,
        })
    }

    pub fn num_backgrounds(&self) -> usize {
        self.num_backgrounds
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `LAB <T> <frames>` followed by one line of space-separated indices.
pub fn format_label_file(labels: &LabelSequence) -> String {
    let mut out = format!("LAB {} {}\n", labels.num_backgrounds, labels.len());
    for (n, x) in labels.labels.iter().enumerate() {
        if n > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out.push('\n');
    out
}

pub fn parse_label_file(path: &Path, text: &str) -> Result<LabelSequence> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, Some(1), "missing LAB header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "LAB" {
        return Err(Error::format(
            path,
            Some(1),
            format!("expected `LAB <T> <frames>`, got `{header}`"),
        ));
    }
    let t: usize = fields[1]
        .parse()
        .map_err(|_| Error::format(path, Some(1), "invalid background count"))?;
    let count: usize = fields[2]
        .parse()
        .map_err(|_| Error::format(path, Some(1), "invalid frame count"))?;

    let mut labels = Vec::with_capacity(count);
    for (idx, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let x: usize = tok
                .parse()
                .map_err(|_| Error::format(path, Some(idx + 2), format!("not a label: `{tok}`")))?;
            if x >= t {
                return Err(Error::format(
                    path,
                    Some(idx + 2),
                    format!("label {x} outside 0..{t}"),
                ));
            }
            labels.push(x);
        }
    }
    if labels.len() != count {
        return Err(Error::format(
            path,
            None,
            format!("header declares {count} labels, found {}", labels.len()),
        ));
    }
    LabelSequence::new(t, labels).map_err(|e| Error::format(path, None, e.to_string()))
}

pub fn read_label_file(path: impl AsRef<Path>) -> Result<LabelSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_file(path, &text)
}

pub fn write_label_file(path: impl AsRef<Path>, labels: &LabelSequence) -> Result<()> {
    let path = path.as_ref();
    create_parent(path)?;
    fs::write(path, format_label_file(labels)).map_err(|e| Error::io(path, e))
}
