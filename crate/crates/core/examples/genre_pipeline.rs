//! End to end on a synthetic corpus whose genres differ only in how they
//! move between acoustic backgrounds.
//!
//! Frames are decoded into background labels with a transform bank, the
//! labels are summarised into one track vector per second, and genre GMMs
//! trained on those tracks are compared with genre GMMs trained directly on
//! the frames. HMM and SVM back ends and their combination follow.
//!
//! ```bash
//! cargo run --release -p genreid --example genre_pipeline -- [seed]
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use genreid::bgtrack::{extract_track, track_to_features, DEFAULT_WINDOW};
use genreid::corpus::synth::plan_shows;
use genreid::corpus::{dynamics_only_config, synthesize_show, ShowRecord, Split};
use genreid::gmm::GmmTrainOptions;
use genreid::hmm::HmmTrainOptions;
use genreid::pipeline::{
    classify_corpus, combine_all, evaluate_pairs, train_gmm_set, train_hmm_set, train_svm_system,
    ClassificationResult, LabelledShow, SvmSystemOptions,
};
use genreid::transforms::{decode_backgrounds, BackgroundBank, DEFAULT_STAY_PROB};

fn report(name: &str, genres: &[String], shows: &[LabelledShow], results: &[ClassificationResult]) {
    let pairs: Vec<(String, String)> = shows
        .iter()
        .zip(results)
        .map(|(s, r)| (s.record.genre.clone(), r.predicted.clone()))
        .collect();
    let eval = evaluate_pairs(genres, &pairs).expect("results cover known genres");
    println!("{name:<24} accuracy {:.3}", eval.accuracy);
}

fn main() -> genreid::Result<()> {
    let started = Instant::now();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let config = dynamics_only_config(20, 5, 6000, seed);
    let genres: Vec<String> = config.genres.iter().map(|g| g.name.clone()).collect();
    let means: Vec<Vec<f64>> = config.backgrounds.iter().map(|b| b.mean.clone()).collect();
    let vars: Vec<Vec<f64>> = config.backgrounds.iter().map(|b| b.var.clone()).collect();
    let bank = BackgroundBank::from_gaussians(&means, &vars, DEFAULT_STAY_PROB)?;

    let shows: Vec<(LabelledShow, LabelledShow, f64)> = plan_shows(&config)
        .par_iter()
        .map(|plan| {
            let (frames, truth) = synthesize_show(&config, plan.genre_index, plan.stream)?;
            let decoded = decode_backgrounds(&bank, &frames)?;
            let agree = decoded.labels().iter().zip(truth.labels()).filter(|(a, b)| a == b).count();
            let track = extract_track(&decoded, DEFAULT_WINDOW)?;
            let feats = track_to_features(&track, frames.frame_period_ms(), true)?;
            let record = ShowRecord {
                id: plan.id.clone(),
                genre: genres[plan.genre_index].clone(),
                split: plan.split,
                feat_path: Default::default(),
                lab_path: None,
            };
            Ok((
                LabelledShow { record: record.clone(), frames: feats },
                LabelledShow { record, frames },
                agree as f64 / truth.len() as f64,
            ))
        })
        .collect::<genreid::Result<_>>()?;
    let alignment = shows.iter().map(|s| s.2).sum::<f64>() / shows.len() as f64;
    println!("{} shows, alignment agreement {:.4}", shows.len(), alignment);

    let split = |split: Split, pick: fn(&(LabelledShow, LabelledShow, f64)) -> &LabelledShow| -> Vec<LabelledShow> {
        shows.iter().filter(|s| s.0.record.split == split).map(|s| pick(s).clone()).collect()
    };
    let (track_train, track_test) = (split(Split::Train, |s| &s.0), split(Split::Test, |s| &s.0));
    let (frame_train, frame_test) = (split(Split::Train, |s| &s.1), split(Split::Test, |s| &s.1));

    let track_gmms = train_gmm_set(&genres, &track_train, &GmmTrainOptions::with_components(8))?;
    let track_results = classify_corpus(&track_gmms, &track_test, &genres)?;
    report("track GMM", &genres, &track_test, &track_results);

    let frame_gmms = train_gmm_set(&genres, &frame_train, &GmmTrainOptions::with_components(8))?;
    let frame_results = classify_corpus(&frame_gmms, &frame_test, &genres)?;
    report("frame GMM", &genres, &frame_test, &frame_results);

    let hmm_options = HmmTrainOptions { states: 4, components: 4, iters: 5, ..Default::default() };
    let hmms = train_hmm_set(&genres, &track_train, &hmm_options)?;
    let hmm_results = classify_corpus(&hmms, &track_test, &genres)?;
    report("track HMM", &genres, &track_test, &hmm_results);

    let svm = train_svm_system(&genres, &track_train, &SvmSystemOptions::default())?;
    let svm_results = classify_corpus(&svm, &track_test, &genres)?;
    report("track SVM", &genres, &track_test, &svm_results);

    let combined = combine_all(&hmm_results, &svm_results)?;
    report("HMM + SVM", &genres, &track_test, &combined);

    let mut by_genre: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &combined {
        *by_genre.entry(r.predicted.as_str()).or_default() += 1;
    }
    println!("combined predictions per genre: {by_genre:?}");
    println!("finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
