//! Confidence normalisation, HMM + SVM combination, evaluation and the
//! results-file format.
//!
//! ```bash
//! cargo run -p genreid --example combine_and_eval
//! ```

use std::collections::BTreeMap;

use genreid::pipeline::{
    combine_all, evaluate_pairs, format_results, normalize_confidence, ClassificationResult, System,
};

fn result(id: &str, system: System, scores: &[(&str, f64)]) -> genreid::Result<ClassificationResult> {
    let scores: BTreeMap<String, f64> = scores.iter().map(|(g, s)| (g.to_string(), *s)).collect();
    ClassificationResult::from_scores(id, system, scores)
}

fn main() -> genreid::Result<()> {
    let scores: BTreeMap<String, f64> = [("Drama", -10.0), ("News", -20.0), ("Comedy", -30.0)]
        .iter()
        .map(|(g, s)| (g.to_string(), *s))
        .collect();
    println!("confidence of {scores:?} = {}", normalize_confidence(&scores)?);

    let hmm = vec![
        result("show-1", System::Hmm, &[("Comedy", -1200.0), ("Drama", -1210.0), ("News", -1300.0)])?,
        result("show-2", System::Hmm, &[("Comedy", -900.0), ("Drama", -905.0), ("News", -910.0)])?,
    ];
    let svm = vec![
        result("show-1", System::Svm, &[("Comedy", 0.4), ("Drama", -0.2), ("News", -0.9)])?,
        result("show-2", System::Svm, &[("Comedy", -0.8), ("Drama", -0.7), ("News", 0.6)])?,
    ];
    let combined = combine_all(&hmm, &svm)?;
    print!("{}", format_results(&combined)?);

    let genres: Vec<String> = ["Comedy", "Drama", "News"].iter().map(|s| s.to_string()).collect();
    let references = ["Comedy", "News"];
    let pairs: Vec<(String, String)> = references
        .iter()
        .zip(&combined)
        .map(|(r, c)| (r.to_string(), c.predicted.clone()))
        .collect();
    print!("{}", evaluate_pairs(&genres, &pairs)?);
    Ok(())
}
