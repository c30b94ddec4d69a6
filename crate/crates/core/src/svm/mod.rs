//! GMM supervectors and Gaussian-kernel support vector machines.
//!
//! A show is represented by the means of a GMM MAP-adapted from a universal
//! background model, concatenated in component order. Supervectors are
//! z-normalised per dimension with training-set statistics before they
//! reach the per-genre one-vs-rest machines.

mod smo;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use smo::{kkt_max_violation, solve as solve_smo, train_svm_smo, SmoParams, SmoSolution};

use crate::corpus::FrameMatrix;
use crate::error::{check_dims, Error, Result};
use crate::gmm::{map_adapt_means, DiagonalGmm};
use crate::jsonio;

/// Default MAP relevance factor.
pub const DEFAULT_TAU: f64 = 10.0;
/// Default box constraint.
pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Supervector {
    pub values: Vec<f64>,
    pub source_show: String,
}

/// MAP-adapts the UBM means to a show and concatenates them.
pub fn build_supervector(ubm: &DiagonalGmm, frames: &FrameMatrix, tau: f64, show_id: &str) -> Result<Supervector> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("cannot build a supervector from zero frames"));
    }
    let adapted = map_adapt_means(ubm, frames, tau)?;
    Ok(Supervector {
        values: adapted.means_flat().to_vec(),
        source_show: show_id.to_string(),
    })
}

pub(crate) fn gaussian_kernel_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * dist).exp()
}

/// `exp(−γ ‖x − y‖²)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(gaussian_kernel_unchecked(x, y, gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SvmFile", into = "SvmFile")]
pub struct SvmModel {
    support_vectors: Vec<Vec<f64>>,
    alphas_signed: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct SvmFile {
    support_vectors: Vec<Vec<f64>>,
    alphas_signed: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
}

impl TryFrom<SvmFile> for SvmModel {
    type Error = Error;

    fn try_from(f: SvmFile) -> Result<Self> {
        SvmModel::new(f.support_vectors, f.alphas_signed, f.bias, f.gamma, f.c)
    }
}

impl From<SvmModel> for SvmFile {
    fn from(m: SvmModel) -> Self {
        SvmFile {
            support_vectors: m.support_vectors,
            alphas_signed: m.alphas_signed,
            bias: m.bias,
            gamma: m.gamma,
            c: m.c,
        }
    }
}

impl SvmModel {
    pub fn new(support_vectors: Vec<Vec<f64>>, alphas_signed: Vec<f64>, bias: f64, gamma: f64, c: f64) -> Result<Self> {
        check_dims(support_vectors.len(), alphas_signed.len())?;
        if !(gamma > 0.0 && gamma.is_finite() && c > 0.0 && c.is_finite() && bias.is_finite()) {
            return Err(Error::Validation("SVM needs finite bias and positive gamma and C".into()));
        }
        if let Some(first) = support_vectors.first() {
            if let Some(bad) = support_vectors.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), found: bad.len() });
            }
        }
        let slack = 1e-9 * c.max(1.0);
        if alphas_signed.iter().any(|a| !(a.abs() <= c + slack)) {
            return Err(Error::Validation("signed alphas must lie within [-C, C]".into()));
        }
        let sum: f64 = alphas_signed.iter().sum();
        if sum.abs() > 1e-6 {
            return Err(Error::Validation(format!("signed alphas sum to {sum}, not 0")));
        }
        Ok(Self {
            support_vectors,
            alphas_signed,
            bias,
            gamma,
            c,
        })
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn alphas_signed(&self) -> &[f64] {
        &self.alphas_signed
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `Σ_i α_i y_i k(sv_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if let Some(sv) = self.support_vectors.first() {
            check_dims(sv.len(), x.len())?;
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.alphas_signed)
            .map(|(sv, a)| a * gaussian_kernel_unchecked(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias)
    }
}

pub fn svm_decision(m: &SvmModel, x: &[f64]) -> Result<f64> {
    m.decision(x)
}

/// Genre with the largest decision value; ties go to the smallest name.
pub fn classify_one_vs_rest(models: &BTreeMap<String, SvmModel>, x: &[f64]) -> Result<(String, f64)> {
    let mut best: Option<(&String, f64)> = None;
    for (name, model) in models {
        let score = model.decision(x)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((name, score));
        }
    }
    best.map(|(n, s)| (n.clone(), s))
        .ok_or(Error::Config("no genre models".into()))
}

/// Per-dimension standardisation fitted on training supervectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZNorm {
    /// Dimensions with zero spread get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("no supervectors to normalise"))?;
        let f = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; f];
        for r in rows {
            check_dims(f, r.len())?;
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for r in rows {
            for i in 0..f {
                var[i] += (r[i] - mean[i]).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.mean.len(), x.len())?;
        Ok(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreSvm {
    pub name: String,
    pub model: SvmModel,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
}

/// One-vs-rest machines for every genre plus the supervector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModelSet {
    pub genres: Vec<GenreSvm>,
    /// File name of the UBM, relative to the model set's directory.
    pub ubm_ref: String,
    pub tau: f64,
    pub gamma: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrainOptions {
    pub tau: f64,
    pub c: f64,
    /// `None` selects `1 / F` for supervector length `F`.
    pub gamma: Option<f64>,
    pub tol: f64,
}

impl Default for SvmTrainOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            c: DEFAULT_C,
            gamma: None,
            tol: 1e-3,
        }
    }
}

impl SvmModelSet {
    /// Trains one machine per genre in `genres` from labelled supervectors.
    pub fn train(
        genres: &[String],
        train: &[(String, Supervector)],
        ubm_ref: &str,
        options: &SvmTrainOptions,
    ) -> Result<Self> {
        let raw: Vec<Vec<f64>> = train.iter().map(|(_, sv)| sv.values.clone()).collect();
        let norm = ZNorm::fit(&raw)?;
        let xs = raw.iter().map(|r| norm.apply(r)).collect::<Result<Vec<_>>>()?;
        let f = xs[0].len();
        let gamma = options.gamma.unwrap_or(1.0 / f as f64);
        let params = SmoParams {
            tol: options.tol,
            ..SmoParams::new(options.c, gamma)
        };
        let models = genres
            .par_iter()
            .map(|genre| {
                let ys: Vec<f64> = train.iter().map(|(g, _)| if g == genre { 1.0 } else { -1.0 }).collect();
                let model = train_svm_smo(&xs, &ys, &params)
                    .map_err(|e| Error::InsufficientData(format!("genre `{genre}`: {e}")))?;
                Ok(GenreSvm {
                    name: genre.clone(),
                    model,
                    norm_mean: norm.mean.clone(),
                    norm_std: norm.std.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            genres: models,
            ubm_ref: ubm_ref.to_string(),
            tau: options.tau,
            gamma,
            c: options.c,
        })
    }

    /// Decision value of every genre's machine for a raw supervector.
    pub fn scores(&self, supervector: &[f64]) -> Result<BTreeMap<String, f64>> {
        self.genres
            .iter()
            .map(|g| {
                let norm = ZNorm { mean: g.norm_mean.clone(), std: g.norm_std.clone() };
                let x = norm.apply(supervector)?;
                Ok((g.name.clone(), g.model.decision(&x)?))
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonio::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }
}
