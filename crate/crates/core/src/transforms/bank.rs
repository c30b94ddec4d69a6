use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrameMatrix, LabelSequence};
use crate::error::{check_dims, Error, Result};
use crate::gmm::DiagonalGmm;
use crate::jsonio;
use crate::lattice;
use crate::transforms::cmllr::{estimate_cmllr, CmllrTransform};

/// Default probability of staying in the current background between frames.
pub const DEFAULT_STAY_PROB: f64 = 0.98;

const PROB_TOL: f64 = 1e-9;

/// Shared canonical GMM, one CMLLR transform per background, and a
/// stay/switch Markov model over backgrounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankFile", into = "BankFile")]
pub struct BackgroundBank {
    canonical_gmm: DiagonalGmm,
    transforms: Vec<CmllrTransform>,
    stay_log_prob: f64,
    switch_log_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    canonical_gmm: DiagonalGmm,
    transforms: Vec<CmllrTransform>,
    stay_log_prob: f64,
    switch_log_prob: f64,
}

impl TryFrom<BankFile> for BackgroundBank {
    type Error = Error;

    fn try_from(f: BankFile) -> Result<Self> {
        BackgroundBank::with_log_probs(f.canonical_gmm, f.transforms, f.stay_log_prob, f.switch_log_prob)
    }
}

impl From<BackgroundBank> for BankFile {
    fn from(b: BackgroundBank) -> Self {
        BankFile {
            canonical_gmm: b.canonical_gmm,
            transforms: b.transforms,
            stay_log_prob: b.stay_log_prob,
            switch_log_prob: b.switch_log_prob,
        }
    }
}

impl BackgroundBank {
    /// Switch mass `1 − stay_prob` is split evenly over the other backgrounds.
    /// With a single background `stay_prob` must be 1.
    pub fn new(canonical_gmm: DiagonalGmm, transforms: Vec<CmllrTransform>, stay_prob: f64) -> Result<Self> {
        let t = transforms.len();
        if !(0.0..=1.0).contains(&stay_prob) {
            return Err(Error::Parameter(format!("stay probability {stay_prob} outside [0, 1]")));
        }
        let (stay, switch) = if t <= 1 {
            // The switch probability is never used; f64::MIN keeps the file finite.
            (0.0, f64::MIN)
        } else {
            (stay_prob.ln(), ((1.0 - stay_prob) / (t - 1) as f64).ln().max(f64::MIN))
        };
        Self::with_log_probs(canonical_gmm, transforms, stay.max(f64::MIN), switch)
    }

    pub fn with_log_probs(
        canonical_gmm: DiagonalGmm,
        transforms: Vec<CmllrTransform>,
        stay_log_prob: f64,
        switch_log_prob: f64,
    ) -> Result<Self> {
        let t = transforms.len();
        if t == 0 {
            return Err(Error::Validation("a bank needs at least one transform".into()));
        }
        for tr in &transforms {
            check_dims(canonical_gmm.dims(), tr.dims())?;
        }
        if !(stay_log_prob <= 0.0 && switch_log_prob <= 0.0) || stay_log_prob.is_nan() || switch_log_prob.is_nan() {
            return Err(Error::Validation("log transition probabilities must be ≤ 0".into()));
        }
        let mass = stay_log_prob.exp() + (t - 1) as f64 * switch_log_prob.exp();
        if (mass - 1.0).abs() > PROB_TOL {
            return Err(Error::Validation(format!(
                "stay and switch probabilities sum to {mass}, not 1"
            )));
        }
        Ok(Self {
            canonical_gmm,
            transforms,
            stay_log_prob,
            switch_log_prob,
        })
    }

    /// Exact bank for diagonal-Gaussian backgrounds: the canonical model is a
    /// standard normal and background `t` maps `N(μ_t, σ²_t)` onto it with
    /// `A = diag(1/σ_t)`, `b = −μ_t/σ_t`.
    pub fn from_gaussians(means: &[Vec<f64>], vars: &[Vec<f64>], stay_prob: f64) -> Result<Self> {
        let first = means.first().ok_or(Error::EmptyInput("no backgrounds"))?;
        let d = first.len();
        check_dims(means.len(), vars.len())?;
        let transforms = means
            .iter()
            .zip(vars)
            .map(|(mu, var)| {
                check_dims(d, mu.len())?;
                check_dims(d, var.len())?;
                let a = (0..d)
                    .map(|i| (0..d).map(|j| if i == j { 1.0 / var[i].sqrt() } else { 0.0 }).collect())
                    .collect();
                let b = mu.iter().zip(var).map(|(m, v)| -m / v.sqrt()).collect();
                CmllrTransform::new(a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(DiagonalGmm::standard_normal(d)?, transforms, stay_prob)
    }

    /// Estimates one transform per background from frames known to belong to it.
    pub fn estimate(
        canonical_gmm: DiagonalGmm,
        per_background: &[FrameMatrix],
        iters: usize,
        stay_prob: f64,
    ) -> Result<Self> {
        let transforms = per_background
            .par_iter()
            .map(|frames| estimate_cmllr(&canonical_gmm, frames, iters).map(|fit| fit.transform))
            .collect::<Result<Vec<_>>>()?;
        Self::new(canonical_gmm, transforms, stay_prob)
    }

    pub fn num_backgrounds(&self) -> usize {
        self.transforms.len()
    }

    pub fn dims(&self) -> usize {
        self.canonical_gmm.dims()
    }

    pub fn canonical_gmm(&self) -> &DiagonalGmm {
        &self.canonical_gmm
    }

    pub fn transforms(&self) -> &[CmllrTransform] {
        &self.transforms
    }

    pub fn stay_log_prob(&self) -> f64 {
        self.stay_log_prob
    }

    pub fn switch_log_prob(&self) -> f64 {
        self.switch_log_prob
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonio::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }

    /// Per-frame, per-background transformed log-likelihoods (`frames × T`).
    pub fn emission_scores(&self, frames: &FrameMatrix) -> Result<Vec<f64>> {
        check_dims(self.dims(), frames.dims())?;
        let t = self.num_backgrounds();
        let mut out = Vec::with_capacity(frames.len() * t);
        let mut buf = vec![0.0; self.dims()];
        let mut scratch = Vec::new();
        for y in frames.rows() {
            for tr in &self.transforms {
                out.push(tr.log_likelihood_unchecked(&self.canonical_gmm, y, &mut buf, &mut scratch));
            }
        }
        Ok(out)
    }

    fn log_transitions(&self) -> Vec<f64> {
        let t = self.num_backgrounds();
        (0..t * t)
            .map(|idx| if idx / t == idx % t { self.stay_log_prob } else { self.switch_log_prob })
            .collect()
    }

    /// Viterbi path over precomputed emission scores; uniform initial
    /// distribution, ties to the lower background index.
    pub fn decode_scores(&self, emissions: &[f64]) -> Result<(Vec<usize>, f64)> {
        let t = self.num_backgrounds();
        if emissions.is_empty() {
            return Err(Error::EmptyInput("cannot decode zero frames"));
        }
        if !emissions.len().is_multiple_of(t) {
            return Err(Error::DimensionMismatch { expected: t, found: emissions.len() % t });
        }
        let init = vec![-(t as f64).ln(); t];
        Ok(lattice::viterbi(&init, &self.log_transitions(), emissions))
    }
}

/// Labels every frame with the background whose transform lies on the best
/// path through the stay/switch model.
pub fn decode_backgrounds(bank: &BackgroundBank, frames: &FrameMatrix) -> Result<LabelSequence> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("cannot decode zero frames"));
    }
    let emissions = bank.emission_scores(frames)?;
    let (path, _) = bank.decode_scores(&emissions)?;
    LabelSequence::new(bank.num_backgrounds(), path)
}
