use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::corpus::{CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::pipeline::ClassificationResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenreMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Accuracy, per-genre precision/recall/F and the confusion matrix, whose
/// rows are reference genres and columns predicted genres, both in
/// `genres` order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub genres: Vec<String>,
    pub accuracy: f64,
    pub per_genre: BTreeMap<String, GenreMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.genres.len()).map(|i| self.confusion[i][i]).sum()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// Scores `(reference, predicted)` pairs over a fixed genre list.
pub fn evaluate_pairs(genres: &[String], pairs: &[(String, String)]) -> Result<EvalReport> {
    let index: BTreeMap<&str, usize> = genres.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    if index.len() != genres.len() {
        return Err(Error::Validation("genre list contains duplicates".into()));
    }
    let lookup = |g: &str| {
        index
            .get(g)
            .copied()
            .ok_or_else(|| Error::Validation(format!("genre `{g}` is not in the evaluation list")))
    };
    let g = genres.len();
    let mut confusion = vec![vec![0usize; g]; g];
    for (reference, predicted) in pairs {
        confusion[lookup(reference)?][lookup(predicted)?] += 1;
    }
    let total = pairs.len();
    let trace: usize = (0..g).map(|i| confusion[i][i]).sum();
    let per_genre = genres
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let tp = confusion[i][i];
            let predicted: usize = (0..g).map(|r| confusion[r][i]).sum();
            let actual: usize = confusion[i].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            // Harmonic mean of precision and recall, written over counts so
            // that it is a single rounded division.
            let f_measure = ratio(2 * tp, predicted + actual);
            (name.clone(), GenreMetrics { precision, recall, f_measure })
        })
        .collect();
    Ok(EvalReport {
        genres: genres.to_vec(),
        accuracy: ratio(trace, total),
        per_genre,
        confusion,
    })
}

/// Evaluates results against the test split of `manifest`, which must
/// have exactly one result per test show and nothing else.
pub fn evaluate(results: &[ClassificationResult], manifest: &CorpusManifest) -> Result<EvalReport> {
    let mut by_id: BTreeMap<&str, &ClassificationResult> = BTreeMap::new();
    for r in results {
        if by_id.insert(r.show_id.as_str(), r).is_some() {
            return Err(Error::Validation(format!("duplicate result for show `{}`", r.show_id)));
        }
    }
    let tests: Vec<_> = manifest.split(Split::Test).collect();
    let test_ids: BTreeSet<&str> = tests.iter().map(|s| s.id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|id| !test_ids.contains(*id)) {
        return Err(Error::Validation(format!("result for `{extra}` has no test show in the manifest")));
    }
    let pairs = tests
        .iter()
        .map(|show| {
            let r = by_id
                .get(show.id.as_str())
                .ok_or_else(|| Error::Validation(format!("no result for test show `{}`", show.id)))?;
            Ok((show.genre.clone(), r.predicted.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_pairs(manifest.genres(), &pairs)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy {:.3} ({}/{})", self.accuracy, self.correct(), self.total())?;
        writeln!(f, "{:<16} {:>9} {:>9} {:>9}", "genre", "precision", "recall", "f")?;
        for g in &self.genres {
            let m = &self.per_genre[g];
            writeln!(f, "{:<16} {:>9.3} {:>9.3} {:>9.3}", g, m.precision, m.recall, m.f_measure)?;
        }
        writeln!(f, "confusion (rows reference, columns predicted)")?;
        for (g, row) in self.genres.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
            writeln!(f, "{:<16}{}", g, cells.join(""))?;
        }
        Ok(())
    }
}
