//! Per-genre model sets as they live in a models directory:
//! `gmm.json`, `hmm.json`, and `svm.json` next to the `ubm.json` it names.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::FrameMatrix;
use crate::error::{Error, Result};
use crate::gmm::DiagonalGmm;
use crate::hmm::ErgodicHmm;
use crate::jsonio;
use crate::pipeline::System;
use crate::svm::{build_supervector, SvmModelSet};

pub const GMM_FILE: &str = "gmm.json";
pub const HMM_FILE: &str = "hmm.json";
pub const SVM_FILE: &str = "svm.json";
pub const UBM_FILE: &str = "ubm.json";

/// Something that scores a show against every genre it knows.
pub trait GenreScorer: Sync {
    fn system(&self) -> System;

    /// Genre names in ascending order.
    fn genres(&self) -> Vec<String>;

    fn score(&self, frames: &FrameMatrix) -> Result<BTreeMap<String, f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel<M> {
    pub name: String,
    pub model: M,
}

/// Models keyed by genre; stored as a name-sorted list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "M: Serialize + Clone", deserialize = "M: DeserializeOwned"))]
#[serde(try_from = "ModelSetFile<M>", into = "ModelSetFile<M>")]
pub struct ModelSet<M> {
    genres: BTreeMap<String, M>,
}

#[derive(Serialize, Deserialize)]
struct ModelSetFile<M> {
    genres: Vec<NamedModel<M>>,
}

impl<M> TryFrom<ModelSetFile<M>> for ModelSet<M> {
    type Error = Error;

    fn try_from(file: ModelSetFile<M>) -> Result<Self> {
        ModelSet::new(file.genres)
    }
}

impl<M: Clone> From<ModelSet<M>> for ModelSetFile<M> {
    fn from(set: ModelSet<M>) -> Self {
        ModelSetFile {
            genres: set
                .genres
                .into_iter()
                .map(|(name, model)| NamedModel { name, model })
                .collect(),
        }
    }
}

impl<M> ModelSet<M> {
    pub fn new(models: Vec<NamedModel<M>>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyInput("a model set needs at least one genre"));
        }
        let mut genres = BTreeMap::new();
        for m in models {
            if genres.contains_key(&m.name) {
                return Err(Error::Validation(format!("genre `{}` appears twice in the model set", m.name)));
            }
            genres.insert(m.name, m.model);
        }
        Ok(Self { genres })
    }

    pub fn get(&self, genre: &str) -> Option<&M> {
        self.genres.get(genre)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &M)> {
        self.genres.iter()
    }

    pub fn len(&self) -> usize {
        self.genres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genres.is_empty()
    }
}

impl<M: Serialize + DeserializeOwned + Clone> ModelSet<M> {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonio::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }
}

pub type GmmModelSet = ModelSet<DiagonalGmm>;
pub type HmmModelSet = ModelSet<ErgodicHmm>;

impl GenreScorer for GmmModelSet {
    fn system(&self) -> System {
        System::Gmm
    }

    fn genres(&self) -> Vec<String> {
        self.genres.keys().cloned().collect()
    }

    fn score(&self, frames: &FrameMatrix) -> Result<BTreeMap<String, f64>> {
        self.iter().map(|(g, m)| Ok((g.clone(), m.score_show(frames)?))).collect()
    }
}

impl GenreScorer for HmmModelSet {
    fn system(&self) -> System {
        System::Hmm
    }

    fn genres(&self) -> Vec<String> {
        self.genres.keys().cloned().collect()
    }

    fn score(&self, frames: &FrameMatrix) -> Result<BTreeMap<String, f64>> {
        self.iter()
            .map(|(g, m)| Ok((g.clone(), m.forward_log_likelihood(frames)?)))
            .collect()
    }
}

/// One-vs-rest machines together with the UBM their supervectors come from.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSystem {
    pub machines: SvmModelSet,
    pub ubm: DiagonalGmm,
}

impl SvmSystem {
    /// Reads `svm.json` and the UBM it references from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let machines = SvmModelSet::load(dir.join(SVM_FILE))?;
        let ubm = DiagonalGmm::load(dir.join(&machines.ubm_ref))?;
        Ok(Self { machines, ubm })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.ubm.save(dir.join(&self.machines.ubm_ref))?;
        self.machines.save(dir.join(SVM_FILE))
    }
}

impl GenreScorer for SvmSystem {
    fn system(&self) -> System {
        System::Svm
    }

    fn genres(&self) -> Vec<String> {
        let mut names: Vec<String> = self.machines.genres.iter().map(|g| g.name.clone()).collect();
        names.sort();
        names
    }

    fn score(&self, frames: &FrameMatrix) -> Result<BTreeMap<String, f64>> {
        let sv = build_supervector(&self.ubm, frames, self.machines.tau, "")?;
        self.machines.scores(&sv.values)
    }
}

/// Loads the model set for `system` from a models directory.
pub fn load_scorer(system: System, dir: impl AsRef<Path>) -> Result<Box<dyn GenreScorer>> {
    let dir = dir.as_ref();
    Ok(match system {
        System::Gmm => Box::new(GmmModelSet::load(dir.join(GMM_FILE))?),
        System::Hmm => Box::new(HmmModelSet::load(dir.join(HMM_FILE))?),
        System::Svm => Box::new(SvmSystem::load(dir)?),
        System::Combined => {
            return Err(Error::Parameter("combined results come from `combine`, not from a model set".into()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::classify_show;

    fn unit_gmm(mean: f64) -> DiagonalGmm {
        DiagonalGmm::new(vec![1.0], vec![vec![mean]], vec![vec![1.0]]).unwrap()
    }

    fn two_genres() -> GmmModelSet {
        ModelSet::new(vec![
            NamedModel { name: "News".into(), model: unit_gmm(10.0) },
            NamedModel { name: "Drama".into(), model: unit_gmm(-10.0) },
        ])
        .unwrap()
    }

    #[test]
    fn disjoint_gmms_classify_their_own_data() {
        let set = two_genres();
        let genres = set.genres();
        let near = |m: f64| FrameMatrix::new(1, 10.0, vec![m - 0.5, m, m + 0.7]).unwrap();
        assert_eq!(classify_show(&set, "a", &near(10.0), &genres).unwrap().predicted, "News");
        assert_eq!(classify_show(&set, "b", &near(-10.0), &genres).unwrap().predicted, "Drama");
    }

    #[test]
    fn single_genre_has_zero_confidence_and_missing_genre_is_config_error() {
        let set = ModelSet::new(vec![NamedModel { name: "News".into(), model: unit_gmm(0.0) }]).unwrap();
        let frames = FrameMatrix::new(1, 10.0, vec![3.0]).unwrap();
        let r = classify_show(&set, "a", &frames, &["News".to_string()]).unwrap();
        assert_eq!((r.predicted.as_str(), r.confidence), ("News", 0.0));
        assert!(matches!(
            classify_show(&set, "a", &frames, &["Drama".to_string()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn model_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = two_genres();
        set.save(dir.path().join(GMM_FILE)).unwrap();
        let text = std::fs::read_to_string(dir.path().join(GMM_FILE)).unwrap();
        assert!(text.find("Drama").unwrap() < text.find("News").unwrap());
        let back = load_scorer(System::Gmm, dir.path()).unwrap();
        assert_eq!(back.genres(), vec!["Drama".to_string(), "News".to_string()]);
        assert_eq!(GmmModelSet::load(dir.path().join(GMM_FILE)).unwrap(), set);
        assert!(ModelSet::new(vec![
            NamedModel { name: "A".into(), model: unit_gmm(0.0) },
            NamedModel { name: "A".into(), model: unit_gmm(1.0) },
        ])
        .is_err());
    }
}
