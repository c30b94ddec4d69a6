//! Synthetic corpora with known background alignments.
//!
//! Every show is drawn from its genre's first-order Markov chain over
//! backgrounds; each frame is then sampled from the active background's
//! diagonal Gaussian. Randomness comes from ChaCha20 (`rand_chacha`): the
//! generator is seeded with `seed` via `seed_from_u64`, and show `i` (counted
//! over genres in config order, train shows before test shows) uses stream
//! `i`. Shows are therefore independent and can be produced in any order.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_feature_file, DEFAULT_GENRES, write_label_file, CorpusManifest, FrameMatrix, LabelSequence, ShowRecord,
    Split,
};
use crate::error::{Error, Result};
use crate::jsonio;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreSpec {
    pub name: String,
    pub background_transition_matrix: Vec<Vec<f64>>,
    pub background_initial: Vec<f64>,
    pub shows_train: usize,
    pub shows_test: usize,
    pub frames_per_show: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub genres: Vec<GenreSpec>,
    pub backgrounds: Vec<BackgroundSpec>,
    pub dims: usize,
    pub seed: u64,
    #[serde(default = "default_frame_period")]
    pub frame_period_ms: f64,
}

fn default_frame_period() -> f64 {
    10.0
}

impl SynthConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: Self = jsonio::read_json(path.as_ref())?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }

    pub fn num_backgrounds(&self) -> usize {
        self.backgrounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.backgrounds.len();
        if self.dims == 0 {
            return Err(Error::Validation("dims must be positive".into()));
        }
        if t == 0 {
            return Err(Error::Validation("at least one background is required".into()));
        }
        if self.genres.is_empty() {
            return Err(Error::Validation("at least one genre is required".into()));
        }
        if !(self.frame_period_ms.is_finite() && self.frame_period_ms > 0.0) {
            return Err(Error::Validation("frame period must be positive".into()));
        }
        for (i, bg) in self.backgrounds.iter().enumerate() {
            if bg.mean.len() != self.dims || bg.var.len() != self.dims {
                return Err(Error::Validation(format!(
                    "background {i} must have {}-dim mean and var",
                    self.dims
                )));
            }
            if bg.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::Validation(format!("background {i} mean is not finite")));
            }
            if bg.var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Validation(format!(
                    "background {i} variances must be strictly positive"
                )));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for g in &self.genres {
            if g.name.is_empty() || g.name.contains(['\t', '\n', ';', '=']) {
                return Err(Error::Validation(format!("invalid genre name `{}`", g.name)));
            }
            if !names.insert(g.name.as_str()) {
                return Err(Error::Validation(format!("duplicate genre `{}`", g.name)));
            }
            check_stochastic(&g.background_initial, t)
                .map_err(|m| Error::Validation(format!("genre `{}` initial: {m}", g.name)))?;
            if g.background_transition_matrix.len() != t {
                return Err(Error::Validation(format!(
                    "genre `{}` transition matrix must have {t} rows",
                    g.name
                )));
            }
            for (r, row) in g.background_transition_matrix.iter().enumerate() {
                check_stochastic(row, t).map_err(|m| {
                    Error::Validation(format!("genre `{}` transition row {r}: {m}", g.name))
                })?;
            }
        }
        Ok(())
    }
}

fn check_stochastic(p: &[f64], len: usize) -> std::result::Result<(), String> {
    if p.len() != len {
        return Err(format!("expected {len} entries, found {}", p.len()));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err("entries must be finite and non-negative".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("entries sum to {sum}, not 1"));
    }
    Ok(())
}

/// Lowercase ASCII alphanumerics of a genre name, used in show ids.
pub fn genre_slug(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// One show to be generated: its position in the corpus fixes its RNG stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShowPlan {
    pub id: String,
    pub genre_index: usize,
    pub split: Split,
    pub stream: u64,
}

pub fn plan_shows(config: &SynthConfig) -> Vec<ShowPlan> {
    let mut plans = Vec::new();
    let mut stream = 0u64;
    for (gi, g) in config.genres.iter().enumerate() {
        let slug = genre_slug(&g.name);
        let slug = if slug.is_empty() { format!("genre{gi}") } else { slug };
        for (split, count) in [(Split::Train, g.shows_train), (Split::Test, g.shows_test)] {
            let tag = match split {
                Split::Train => "train",
                Split::Test => "test",
            };
            for i in 0..count {
                plans.push(ShowPlan {
                    id: format!("{slug}-{tag}-{i:03}"),
                    genre_index: gi,
                    split,
                    stream,
                });
                stream += 1;
            }
        }
    }
    plans
}

/// Samples a label path of length `n` from a Markov chain.
pub fn sample_markov_labels<R: rand::Rng>(
    rng: &mut R,
    initial: &[f64],
    transitions: &[Vec<f64>],
    n: usize,
) -> Result<Vec<usize>> {
    let bad = |e: rand::distr::weighted::Error| Error::Validation(format!("bad distribution: {e}"));
    let start = WeightedIndex::new(initial).map_err(bad)?;
    let rows = transitions
        .iter()
        .map(|r| WeightedIndex::new(r).map_err(bad))
        .collect::<Result<Vec<_>>>()?;
    let mut labels = Vec::with_capacity(n);
    if n == 0 {
        return Ok(labels);
    }
    let mut x = start.sample(rng);
    labels.push(x);
    for _ in 1..n {
        x = rows[x].sample(rng);
        labels.push(x);
    }
    Ok(labels)
}

/// Generates one show's frames and ground-truth labels in memory.
pub fn synthesize_show(
    config: &SynthConfig,
    genre_index: usize,
    stream: u64,
) -> Result<(FrameMatrix, LabelSequence)> {
    let genre = config
        .genres
        .get(genre_index)
        .ok_or_else(|| Error::OutOfRange(format!("genre index {genre_index}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let labels = sample_markov_labels(
        &mut rng,
        &genre.background_initial,
        &genre.background_transition_matrix,
        genre.frames_per_show,
    )?;
    let stds: Vec<Vec<f64>> = config
        .backgrounds
        .iter()
        .map(|b| b.var.iter().map(|v| v.sqrt()).collect())
        .collect();
    let mut data = Vec::with_capacity(labels.len() * config.dims);
    for &x in &labels {
        let bg = &config.backgrounds[x];
        for (mean, std) in bg.mean.iter().zip(&stds[x]) {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mean + std * z);
        }
    }
    let frames = FrameMatrix::new(config.dims, config.frame_period_ms, data)?;
    let labels = LabelSequence::new(config.num_backgrounds(), labels)?;
    Ok((frames, labels))
}

/// Writes `feats/<id>.feat`, `labs/<id>.lab` and `manifest.json` under `out_dir`.
pub fn synthesize_corpus(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["feats", "labs"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let plans = plan_shows(config);
    let records = plans
        .par_iter()
        .map(|plan| {
            let (frames, labels) = synthesize_show(config, plan.genre_index, plan.stream)?;
            let feat_path: PathBuf = out_dir.join("feats").join(format!("{}.feat", plan.id));
            let lab_path: PathBuf = out_dir.join("labs").join(format!("{}.lab", plan.id));
            write_feature_file(&feat_path, &frames)?;
            write_label_file(&lab_path, &labels)?;
            Ok(ShowRecord {
                id: plan.id.clone(),
                genre: config.genres[plan.genre_index].name.clone(),
                split: plan.split,
                feat_path,
                lab_path: Some(lab_path),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let genres = config.genres.iter().map(|g| g.name.clone()).collect();
    let manifest = CorpusManifest::new(genres, records)?;
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// A corpus whose genres share every emission and the uniform stationary
/// distribution over seven backgrounds, and differ only in how they move
/// between backgrounds.
///
/// Each genre's chain is circulant: it stays with probability `stay` and
/// otherwise jumps by one of its offsets, chosen uniformly. Four offset
/// sets ({+1}, {+2}, {+3}, any) crossed with two stay probabilities
/// (0.95, 0.995) give the eight default genres.
pub fn dynamics_only_config(shows_train: usize, shows_test: usize, frames_per_show: usize, seed: u64) -> SynthConfig {
    const T: usize = 7;
    let offsets: [&[usize]; 4] = [&[1], &[2], &[3], &[1, 2, 3, 4, 5, 6]];
    let stays = [0.95, 0.995];
    let genres = DEFAULT_GENRES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let jumps = offsets[i % 4];
            let stay = stays[i / 4];
            let move_p = (1.0 - stay) / jumps.len() as f64;
            let matrix = (0..T)
                .map(|from| {
                    let mut row = vec![0.0; T];
                    row[from] = stay;
                    for &j in jumps {
                        row[(from + j) % T] += move_p;
                    }
                    row
                })
                .collect();
            GenreSpec {
                name: name.to_string(),
                background_transition_matrix: matrix,
                background_initial: vec![1.0 / T as f64; T],
                shows_train,
                shows_test,
                frames_per_show,
            }
        })
        .collect();
    // Corners of a cube with side 4, skipping the origin's antipode.
    let backgrounds = (0..T)
        .map(|t| BackgroundSpec {
            mean: vec![
                4.0 * (t & 1) as f64,
                4.0 * ((t >> 1) & 1) as f64,
                4.0 * ((t >> 2) & 1) as f64,
                0.0,
            ],
            var: vec![1.0; 4],
        })
        .collect();
    SynthConfig {
        genres,
        backgrounds,
        dims: 4,
        seed,
        frame_period_ms: 10.0,
    }
}
