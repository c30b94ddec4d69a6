//! Show classification, confidence, system combination, evaluation and the CLI.
//!
//! Every classifier produces a score per genre; the prediction is the best
//! score (ties go to the lexicographically smallest genre) and the
//! confidence is the normalised margin `(s₁ − s₂) / (s₁ − s_G)` over the
//! sorted scores.

mod cli;
mod eval;
mod models;
mod results;
mod workflow;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use cli::run_cli;
pub use eval::{evaluate, evaluate_pairs, EvalReport, GenreMetrics};
pub use models::{
    load_scorer, GenreScorer, GmmModelSet, HmmModelSet, ModelSet, NamedModel, SvmSystem, GMM_FILE, HMM_FILE,
    SVM_FILE, UBM_FILE,
};
pub use results::{format_results, parse_results, read_results, write_results};
pub use workflow::{
    align_corpus, classify_corpus, extract_corpus, load_split, train_gmm_set, train_hmm_set, train_svm_system,
    LabelledShow, SvmSystemOptions,
};

use crate::corpus::FrameMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    Gmm,
    Hmm,
    Svm,
    Combined,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Gmm => "gmm",
            System::Hmm => "hmm",
            System::Svm => "svm",
            System::Combined => "combined",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(System::Gmm),
            "hmm" => Ok(System::Hmm),
            "svm" => Ok(System::Svm),
            "combined" => Ok(System::Combined),
            other => Err(Error::Parameter(format!("unknown system `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub show_id: String,
    pub system: System,
    pub scores: BTreeMap<String, f64>,
    pub predicted: String,
    pub confidence: f64,
}

impl ClassificationResult {
    /// Picks the best-scoring genre and attaches its normalised confidence.
    pub fn from_scores(show_id: impl Into<String>, system: System, scores: BTreeMap<String, f64>) -> Result<Self> {
        let predicted = best_genre(&scores)?;
        let confidence = normalize_confidence(&scores)?;
        Ok(Self {
            show_id: show_id.into(),
            system,
            scores,
            predicted,
            confidence,
        })
    }
}

/// Highest score; equal scores resolve to the smallest genre name.
pub fn best_genre(scores: &BTreeMap<String, f64>) -> Result<String> {
    let mut best: Option<(&String, f64)> = None;
    for (genre, &s) in scores {
        if !s.is_finite() {
            return Err(Error::Validation(format!("score for `{genre}` is not finite")));
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((genre, s));
        }
    }
    best.map(|(g, _)| g.clone()).ok_or(Error::EmptyInput("no genre scores"))
}

/// `(s₁ − s₂) / (s₁ − s_G)` for scores sorted best first; 0 when all are equal.
pub fn normalize_confidence(scores: &BTreeMap<String, f64>) -> Result<f64> {
    let mut values: Vec<f64> = scores.values().copied().collect();
    if values.is_empty() {
        return Err(Error::EmptyInput("no genre scores"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("confidence needs finite scores".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let (s1, sg) = (values[0], values[values.len() - 1]);
    if s1 == sg {
        return Ok(0.0);
    }
    let s2 = values[1];
    Ok(((s1 - s2) / (s1 - sg)).clamp(0.0, 1.0))
}

/// Scores a show with every genre model and checks that `required` genres
/// are all covered.
pub fn classify_show(
    scorer: &dyn GenreScorer,
    show_id: &str,
    frames: &FrameMatrix,
    required: &[String],
) -> Result<ClassificationResult> {
    let genres = scorer.genres();
    if let Some(missing) = required.iter().find(|g| !genres.contains(g)) {
        return Err(Error::Config(format!("no {} model for genre `{missing}`", scorer.system())));
    }
    let scores = scorer.score(frames)?;
    ClassificationResult::from_scores(show_id, scorer.system(), scores)
}

/// Agreement keeps the shared genre at the larger confidence; disagreement
/// takes the more confident input, with `a` winning exact ties. The output
/// carries the scores of the input it was taken from.
pub fn combine(a: &ClassificationResult, b: &ClassificationResult) -> Result<ClassificationResult> {
    if a.show_id != b.show_id {
        return Err(Error::Validation(format!(
            "cannot combine results for `{}` and `{}`",
            a.show_id, b.show_id
        )));
    }
    let chosen = if b.confidence > a.confidence { b } else { a };
    let confidence = if a.predicted == b.predicted {
        a.confidence.max(b.confidence)
    } else {
        chosen.confidence
    };
    Ok(ClassificationResult {
        show_id: a.show_id.clone(),
        system: System::Combined,
        scores: chosen.scores.clone(),
        predicted: chosen.predicted.clone(),
        confidence,
    })
}

/// Combines two result lists show by show; both must cover the same shows.
pub fn combine_all(a: &[ClassificationResult], b: &[ClassificationResult]) -> Result<Vec<ClassificationResult>> {
    let by_id: BTreeMap<&str, &ClassificationResult> = b.iter().map(|r| (r.show_id.as_str(), r)).collect();
    if by_id.len() != b.len() || a.len() != b.len() {
        return Err(Error::Validation("result sets must cover the same shows once each".into()));
    }
    a.iter()
        .map(|ra| {
            let rb = by_id
                .get(ra.show_id.as_str())
                .ok_or_else(|| Error::Validation(format!("show `{}` missing from second result set", ra.show_id)))?;
            combine(ra, rb)
        })
        .collect()
}
