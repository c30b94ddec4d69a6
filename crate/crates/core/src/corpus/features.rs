use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-frame feature vectors of one show, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatrix {
    dims: usize,
    frame_period_ms: f64,
    data: Vec<f64>,
}

impl FrameMatrix {
    /// Builds a matrix from a flat row-major buffer whose length must be a
    /// multiple of `dims`.
    pub fn new(dims: usize, frame_period_ms: f64, data: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        if !(frame_period_ms.is_finite() && frame_period_ms > 0.0) {
            return Err(Error::Validation(format!(
                "frame period must be positive, got {frame_period_ms}"
            )));
        }
        if !data.len().is_multiple_of(dims) {
            return Err(Error::Validation(format!(
                "buffer of {} values is not a whole number of {dims}-dim rows",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at frame {}, dim {}",
                pos / dims,
                pos % dims
            )));
        }
        Ok(Self {
            dims,
            frame_period_ms,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dims: usize, frame_period_ms: f64, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dims);
        for (n, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::Validation(format!(
                    "frame {n} has {} values, expected {dims}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dims, frame_period_ms, data)
    }

    pub fn empty(dims: usize, frame_period_ms: f64) -> Result<Self> {
        Self::new(dims, frame_period_ms, Vec::new())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frame_period_ms(&self) -> f64 {
        self.frame_period_ms
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.dims..(n + 1) * self.dims]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stacks several matrices of equal dimension; the period of the first is kept.
    pub fn concat<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FrameMatrix>,
    {
        let mut iter = parts.into_iter();
        let first = iter.next().ok_or(Error::EmptyInput("no matrices to concatenate"))?;
        let mut data = first.data.clone();
        for part in iter {
            crate::error::check_dims(first.dims, part.dims)?;
            data.extend_from_slice(&part.data);
        }
        Ok(Self {
            dims: first.dims,
            frame_period_ms: first.frame_period_ms,
            data,
        })
    }

    /// Keeps the first `dims` columns of every frame.
    pub fn leading_columns(&self, dims: usize) -> Result<Self> {
        if dims == 0 || dims > self.dims {
            return Err(Error::OutOfRange(format!(
                "cannot keep {dims} of {} columns",
                self.dims
            )));
        }
        let data = self.rows().flat_map(|r| r[..dims].iter().copied()).collect();
        Self::new(dims, self.frame_period_ms, data)
    }
}

/// Renders the feature-file text:
/// `FEAT <dims> <frames> <frame_period_ms>` then one row per frame.
pub fn format_feature_file(frames: &FrameMatrix) -> String {
    let mut out = String::with_capacity(frames.data.len() * 20 + 32);
    let _ = writeln!(
        out,
        "FEAT {} {} {}",
        frames.dims,
        frames.len(),
        frames.frame_period_ms
    );
    for row in frames.rows() {
        for (d, v) in row.iter().enumerate() {
            if d > 0 {
                out.push(' ');
            }
            // `{}` on f64 prints the shortest string that parses back exactly.
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_feature_file(path: &Path, text: &str) -> Result<FrameMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, Some(1), "missing FEAT header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "FEAT" {
        return Err(Error::format(
            path,
            Some(1),
            format!("expected `FEAT <dims> <frames> <frame_period_ms>`, got `{header}`"),
        ));
    }
    let bad_header = |what: &str| Error::format(path, Some(1), format!("invalid {what} in header"));
    let dims: usize = fields[1].parse().map_err(|_| bad_header("dims"))?;
    let count: usize = fields[2].parse().map_err(|_| bad_header("frame count"))?;
    let period: f64 = fields[3].parse().map_err(|_| bad_header("frame period"))?;
    if dims == 0 {
        return Err(bad_header("dims"));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(bad_header("frame period"));
    }

    let mut data = Vec::with_capacity(dims * count);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows == count {
            return Err(Error::format(
                path,
                Some(lineno),
                format!("more rows than the {count} declared"),
            ));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::format(path, Some(lineno), format!("not a number: `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::format(path, Some(lineno), format!("non-finite value `{tok}`")));
            }
            data.push(v);
        }
        let width = data.len() - before;
        if width != dims {
            return Err(Error::format(
                path,
                Some(lineno),
                format!("row has {width} values, expected {dims}"),
            ));
        }
        rows += 1;
    }
    if rows != count {
        return Err(Error::format(
            path,
            None,
            format!("header declares {count} frames, found {rows}"),
        ));
    }
    FrameMatrix::new(dims, period, data)
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FrameMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_file(path, &text)
}

pub fn write_feature_file(path: impl AsRef<Path>, frames: &FrameMatrix) -> Result<()> {
    let path = path.as_ref();
    create_parent(path)?;
    fs::write(path, format_feature_file(frames)).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("mem.feat")
    }

    #[test]
    fn zero_frame_file() {
        let m = parse_feature_file(&p(), "FEAT 7 0 1000\n").unwrap();
        assert_eq!(m.dims(), 7);
        assert_eq!(m.len(), 0);
        assert_eq!(m.frame_period_ms(), 1000.0);
    }

    #[test]
    fn single_constant_frame_round_trips() {
        let m = FrameMatrix::new(7, 10.0, vec![0.5; 7]).unwrap();
        let back = parse_feature_file(&p(), &format_feature_file(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn row_length_mismatch_reports_line() {
        let err = parse_feature_file(&p(), "FEAT 2 2 10\n1 2\n3\n").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(parse_feature_file(&p(), "FEAT 2 1 10\n1 NaN\n").is_err());
        assert!(parse_feature_file(&p(), "FEAT 1 1 10\ninf\n").is_err());
    }

    #[test]
    fn frame_count_mismatch_rejected() {
        assert!(parse_feature_file(&p(), "FEAT 1 3 10\n1\n2\n").is_err());
        assert!(parse_feature_file(&p(), "FEAT 1 1 10\n1\n2\n").is_err());
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_feature_file(&p(), "LAB 1 1\n0\n").is_err());
        assert!(parse_feature_file(&p(), "FEAT 0 0 10\n").is_err());
        assert!(parse_feature_file(&p(), "").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            dims in 1usize..6,
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 6), 0..40),
        ) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r[..dims].to_vec()).collect();
            let m = FrameMatrix::from_rows(dims, 10.0, &rows).unwrap();
            let back = parse_feature_file(&p(), &format_feature_file(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
