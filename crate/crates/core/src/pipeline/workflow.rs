//! Corpus-level steps: load a split, train a model set per genre, classify,
//! and rewrite a corpus through the aligner or the track extractor.

use std::path::Path;

use rayon::prelude::*;

use crate::bgtrack::{extract_track, track_to_features};
use crate::corpus::{
    read_feature_file, read_label_file, write_feature_file, write_label_file, CorpusManifest, FrameMatrix,
    ShowRecord, Split,
};
use crate::error::{Error, Result};
use crate::gmm::{train_gmm_em, GmmTrainOptions};
use crate::hmm::{train_hmm_baum_welch, HmmTrainOptions};
use crate::pipeline::models::{GenreScorer, GmmModelSet, HmmModelSet, ModelSet, NamedModel, SvmSystem, UBM_FILE};
use crate::pipeline::{classify_show, ClassificationResult};
use crate::svm::{build_supervector, SvmModelSet, SvmTrainOptions};
use crate::transforms::{decode_backgrounds, BackgroundBank};

/// A show's manifest record with its features loaded.
#[derive(Debug, Clone)]
pub struct LabelledShow {
    pub record: ShowRecord,
    pub frames: FrameMatrix,
}

/// Reads the features of every show in `split`, or of all shows, in manifest order.
pub fn load_split(manifest: &CorpusManifest, split: Option<Split>) -> Result<Vec<LabelledShow>> {
    let records: Vec<&ShowRecord> = manifest
        .shows()
        .iter()
        .filter(|s| split.is_none_or(|sp| s.split == sp))
        .collect();
    records
        .par_iter()
        .map(|r| {
            Ok(LabelledShow {
                record: (*r).clone(),
                frames: read_feature_file(&r.feat_path)?,
            })
        })
        .collect()
}

fn shows_of<'a>(genre: &str, shows: &'a [LabelledShow]) -> Result<Vec<&'a LabelledShow>> {
    let own: Vec<&LabelledShow> = shows.iter().filter(|s| s.record.genre == genre).collect();
    if own.is_empty() {
        return Err(Error::InsufficientData(format!("no training shows for genre `{genre}`")));
    }
    Ok(own)
}

/// One GMM per genre on the pooled frames of that genre's shows.
pub fn train_gmm_set(genres: &[String], shows: &[LabelledShow], options: &GmmTrainOptions) -> Result<GmmModelSet> {
    let models = genres
        .par_iter()
        .map(|genre| {
            let pooled = FrameMatrix::concat(shows_of(genre, shows)?.into_iter().map(|s| &s.frames))?;
            let fit = train_gmm_em(&pooled, options).map_err(|e| in_genre(genre, e))?;
            Ok(NamedModel { name: genre.clone(), model: fit.model })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelSet::new(models)
}

/// One ergodic HMM per genre, each show an observation sequence.
pub fn train_hmm_set(genres: &[String], shows: &[LabelledShow], options: &HmmTrainOptions) -> Result<HmmModelSet> {
    let models = genres
        .par_iter()
        .map(|genre| {
            let seqs: Vec<FrameMatrix> = shows_of(genre, shows)?.into_iter().map(|s| s.frames.clone()).collect();
            let fit = train_hmm_baum_welch(&seqs, options).map_err(|e| in_genre(genre, e))?;
            Ok(NamedModel { name: genre.clone(), model: fit.model })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelSet::new(models)
}

fn in_genre(genre: &str, e: Error) -> Error {
    match e {
        Error::InsufficientData(msg) => Error::InsufficientData(format!("genre `{genre}`: {msg}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSystemOptions {
    /// Training settings of the UBM shared by every supervector.
    pub ubm: GmmTrainOptions,
    pub svm: SvmTrainOptions,
}

impl Default for SvmSystemOptions {
    fn default() -> Self {
        Self {
            ubm: GmmTrainOptions::with_components(16),
            svm: SvmTrainOptions::default(),
        }
    }
}

/// Trains a UBM on all training frames, maps every show to a supervector and
/// trains one-vs-rest machines over them.
pub fn train_svm_system(genres: &[String], shows: &[LabelledShow], options: &SvmSystemOptions) -> Result<SvmSystem> {
    for genre in genres {
        shows_of(genre, shows)?;
    }
    let used: Vec<&LabelledShow> = shows.iter().filter(|s| genres.contains(&s.record.genre)).collect();
    let pooled = FrameMatrix::concat(used.iter().map(|s| &s.frames))?;
    let ubm = train_gmm_em(&pooled, &options.ubm)?.model;
    let train = used
        .par_iter()
        .map(|s| {
            let sv = build_supervector(&ubm, &s.frames, options.svm.tau, &s.record.id)?;
            Ok((s.record.genre.clone(), sv))
        })
        .collect::<Result<Vec<_>>>()?;
    let machines = SvmModelSet::train(genres, &train, UBM_FILE, &options.svm)?;
    Ok(SvmSystem { machines, ubm })
}

/// Classifies shows in parallel; results keep the input order.
pub fn classify_corpus(
    scorer: &dyn GenreScorer,
    shows: &[LabelledShow],
    required: &[String],
) -> Result<Vec<ClassificationResult>> {
    shows
        .par_iter()
        .map(|s| classify_show(scorer, &s.record.id, &s.frames, required))
        .collect()
}

/// Decodes every show against `bank`, writing `labs/<id>.lab` and a
/// `manifest.json` pointing at them under `out_dir`.
pub fn align_corpus(bank: &BackgroundBank, manifest: &CorpusManifest, out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    let records = manifest
        .shows()
        .par_iter()
        .map(|s| {
            let frames = read_feature_file(&s.feat_path)?;
            let labels = decode_backgrounds(bank, &frames)?;
            let lab_path = out_dir.join("labs").join(format!("{}.lab", s.id));
            write_label_file(&lab_path, &labels)?;
            Ok(ShowRecord { lab_path: Some(lab_path), ..s.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let aligned = CorpusManifest::new(manifest.genres().to_vec(), records)?;
    aligned.save(out_dir.join("manifest.json"))?;
    Ok(aligned)
}

/// Turns every show's label file into track features, writing
/// `feats/<id>.feat` and a `manifest.json` pointing at them under `out_dir`.
pub fn extract_corpus(
    manifest: &CorpusManifest,
    window: usize,
    with_deltas: bool,
    input_period_ms: f64,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    let records = manifest
        .shows()
        .par_iter()
        .map(|s| {
            let lab = s
                .lab_path
                .as_ref()
                .ok_or_else(|| Error::Validation(format!("show `{}` has no label file", s.id)))?;
            let track = extract_track(&read_label_file(lab)?, window)?;
            let feats = track_to_features(&track, input_period_ms, with_deltas)?;
            let feat_path = out_dir.join("feats").join(format!("{}.feat", s.id));
            write_feature_file(&feat_path, &feats)?;
            Ok(ShowRecord { feat_path, ..s.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let extracted = CorpusManifest::new(manifest.genres().to_vec(), records)?;
    extracted.save(out_dir.join("manifest.json"))?;
    Ok(extracted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{BackgroundSpec, GenreSpec};
    use crate::corpus::{synthesize_corpus, SynthConfig};

    fn config() -> SynthConfig {
        let genre = |name: &str, stay: f64| GenreSpec {
            name: name.into(),
            background_transition_matrix: vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
            background_initial: vec![0.5, 0.5],
            shows_train: 3,
            shows_test: 2,
            frames_per_show: 400,
        };
        SynthConfig {
            genres: vec![genre("Drama", 0.99), genre("News", 0.5)],
            backgrounds: vec![
                BackgroundSpec { mean: vec![-3.0], var: vec![1.0] },
                BackgroundSpec { mean: vec![3.0], var: vec![1.0] },
            ],
            dims: 1,
            seed: 11,
            frame_period_ms: 10.0,
        }
    }

    #[test]
    fn align_extract_train_classify() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config();
        let corpus = synthesize_corpus(&cfg, dir.path().join("corpus")).unwrap();
        let bank = BackgroundBank::from_gaussians(
            &[vec![-3.0], vec![3.0]],
            &[vec![1.0], vec![1.0]],
            0.98,
        )
        .unwrap();
        let aligned = align_corpus(&bank, &corpus, dir.path().join("aligned")).unwrap();
        assert_eq!(aligned.shows().len(), 10);
        let tracks = extract_corpus(&aligned, 20, true, 10.0, dir.path().join("tracks")).unwrap();
        let reloaded = CorpusManifest::load_with_genres(dir.path().join("tracks/manifest.json"), corpus.genres().to_vec()).unwrap();
        assert_eq!(reloaded, tracks);

        let train = load_split(&tracks, Some(Split::Train)).unwrap();
        let test = load_split(&tracks, Some(Split::Test)).unwrap();
        assert_eq!((train.len(), test.len()), (6, 4));
        assert_eq!(train[0].frames.dims(), 6);
        assert_eq!(train[0].frames.frame_period_ms(), 200.0);

        let genres = tracks.genres().to_vec();
        let gmms = train_gmm_set(&genres, &train, &GmmTrainOptions::with_components(2)).unwrap();
        let results = classify_corpus(&gmms, &test, &genres).unwrap();
        let ids: Vec<&str> = results.iter().map(|r| r.show_id.as_str()).collect();
        let expected: Vec<&str> = test.iter().map(|s| s.record.id.as_str()).collect();
        assert_eq!(ids, expected);

        let hmm_options = HmmTrainOptions { states: 2, components: 1, iters: 3, ..Default::default() };
        assert_eq!(train_hmm_set(&genres, &train, &hmm_options).unwrap().len(), 2);

        let svm_options = SvmSystemOptions { ubm: GmmTrainOptions::with_components(2), ..Default::default() };
        let svm = train_svm_system(&genres, &train, &svm_options).unwrap();
        assert_eq!(classify_corpus(&svm, &test, &genres).unwrap().len(), 4);

        let missing = vec!["Drama".to_string(), "Comedy".to_string()];
        assert!(matches!(train_gmm_set(&missing, &train, &GmmTrainOptions::default()), Err(Error::InsufficientData(_))));
    }
}
