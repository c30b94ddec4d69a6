//! Diagonal-covariance Gaussian mixture models.
//!
//! Training grows the mixture by binary splitting: starting from the global
//! Gaussian, the heaviest components are split along `μ ± 0.2σ` and EM is
//! run after every split until the requested size is reached. Variances
//! are floored at a fraction of the global per-dimension variance.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::FrameMatrix;
use crate::error::{check_dims, Error, Result};
use crate::jsonio;
use crate::lattice::{ln_or_neg_inf, log_sum_exp};

const WEIGHT_TOL: f64 = 1e-9;
/// Lower bound on any floored variance, for dimensions that are constant in
/// the training data.
pub const MIN_VARIANCE: f64 = 1e-10;
/// Components whose occupancy falls below this keep their previous mean and variance.
const MIN_OCCUPANCY: f64 = 1e-10;
const SHARD_FRAMES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmFile", into = "GmmFile")]
pub struct DiagonalGmm {
    dims: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
    // ln w_k − ½ Σ_d ln(2π σ²_kd)
    log_consts: Vec<f64>,
    inv_vars: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GmmFile {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    dims: usize,
    #[serde(rename = "K")]
    k: usize,
}

impl TryFrom<GmmFile> for DiagonalGmm {
    type Error = Error;

    fn try_from(f: GmmFile) -> Result<Self> {
        if f.weights.len() != f.k {
            return Err(Error::Validation(format!(
                "K = {} but {} weights given",
                f.k,
                f.weights.len()
            )));
        }
        let g = DiagonalGmm::new(f.weights, f.means, f.vars)?;
        check_dims(f.dims, g.dims)?;
        Ok(g)
    }
}

impl From<DiagonalGmm> for GmmFile {
    fn from(g: DiagonalGmm) -> Self {
        let k = g.num_components();
        GmmFile {
            means: g.means.chunks(g.dims).map(<[f64]>::to_vec).collect(),
            vars: g.vars.chunks(g.dims).map(<[f64]>::to_vec).collect(),
            weights: g.weights,
            dims: g.dims,
            k,
        }
    }
}

impl DiagonalGmm {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Validation("a mixture needs at least one component".into()));
        }
        if means.len() != k || vars.len() != k {
            return Err(Error::Validation(format!(
                "{k} weights but {} means and {} variance vectors",
                means.len(),
                vars.len()
            )));
        }
        let dims = means[0].len();
        if dims == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        for (m, v) in means.iter().zip(&vars) {
            check_dims(dims, m.len())?;
            check_dims(dims, v.len())?;
        }
        Self::from_flat(dims, weights, means.concat(), vars.concat())
    }

    fn from_flat(dims: usize, weights: Vec<f64>, means: Vec<f64>, vars: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Validation("means must be finite".into()));
        }
        if vars.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("variances must be finite and positive".into()));
        }
        let log_consts = weights
            .iter()
            .zip(vars.chunks(dims))
            .map(|(w, v)| ln_or_neg_inf(*w) - 0.5 * v.iter().map(|s| (2.0 * PI * s).ln()).sum::<f64>())
            .collect();
        let inv_vars = vars.iter().map(|v| 1.0 / v).collect();
        Ok(Self {
            dims,
            weights,
            means,
            vars,
            log_consts,
            inv_vars,
        })
    }

    /// Single standard-normal component in `dims` dimensions.
    pub fn standard_normal(dims: usize) -> Result<Self> {
        Self::from_flat(dims, vec![1.0], vec![0.0; dims], vec![1.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dims..(k + 1) * self.dims]
    }

    pub fn var(&self, k: usize) -> &[f64] {
        &self.vars[k * self.dims..(k + 1) * self.dims]
    }

    /// All component means concatenated in component order.
    pub fn means_flat(&self) -> &[f64] {
        &self.means
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonio::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }

    /// Writes `ln w_k + ln N(y; μ_k, σ²_k)` for each component into `out` and
    /// returns their log-sum-exp. `y` must have length `dims`.
    pub(crate) fn joint_log_terms(&self, y: &[f64], out: &mut [f64]) -> f64 {
        let d = self.dims;
        for (k, slot) in out.iter_mut().enumerate() {
            let mu = &self.means[k * d..(k + 1) * d];
            let iv = &self.inv_vars[k * d..(k + 1) * d];
            let mut quad = 0.0;
            for i in 0..d {
                let diff = y[i] - mu[i];
                quad += diff * diff * iv[i];
            }
            *slot = self.log_consts[k] - 0.5 * quad;
        }
        log_sum_exp(out)
    }

    pub(crate) fn log_likelihood_unchecked(&self, y: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.num_components(), 0.0);
        self.joint_log_terms(y, scratch)
    }

    /// `log Σ_k w_k N(y; μ_k, diag σ²_k)`.
    pub fn log_likelihood(&self, y: &[f64]) -> Result<f64> {
        check_dims(self.dims, y.len())?;
        Ok(self.log_likelihood_unchecked(y, &mut Vec::new()))
    }

    /// Component posteriors of `y`, written into `out`; returns the log-likelihood.
    pub fn posteriors(&self, y: &[f64], out: &mut [f64]) -> Result<f64> {
        check_dims(self.dims, y.len())?;
        check_dims(self.num_components(), out.len())?;
        let total = self.joint_log_terms(y, out);
        for v in out.iter_mut() {
            *v = (*v - total).exp();
        }
        Ok(total)
    }

    /// Sum of per-frame log-likelihoods.
    pub fn score_show(&self, frames: &FrameMatrix) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("cannot score a show with no frames"));
        }
        check_dims(self.dims, frames.dims())?;
        let mut scratch = Vec::new();
        Ok(frames
            .rows()
            .map(|y| self.log_likelihood_unchecked(y, &mut scratch))
            .sum())
    }
}

pub fn gmm_log_likelihood(g: &DiagonalGmm, y: &[f64]) -> Result<f64> {
    g.log_likelihood(y)
}

pub fn score_show(g: &DiagonalGmm, frames: &FrameMatrix) -> Result<f64> {
    g.score_show(frames)
}

/// Zeroth, first and centred second-order statistics for one mixture.
///
/// Second-order sums are taken around the model means at accumulation time,
/// which keeps the variance update numerically well behaved.
#[derive(Debug, Clone)]
pub(crate) struct MixtureStats {
    pub occ: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub log_likelihood: f64,
}

impl MixtureStats {
    pub fn zeros(k: usize, dims: usize) -> Self {
        Self {
            occ: vec![0.0; k],
            first: vec![0.0; k * dims],
            second: vec![0.0; k * dims],
            log_likelihood: 0.0,
        }
    }

    pub fn add(&mut self, other: &MixtureStats) {
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            *a += b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
    }

    /// Accumulates one frame with posterior mass `weight` spread over components.
    pub fn add_frame(&mut self, g: &DiagonalGmm, y: &[f64], weight: f64, post: &mut [f64]) -> f64 {
        let ll = g.joint_log_terms(y, post);
        let d = g.dims;
        for k in 0..post.len() {
            let gamma = weight * (post[k] - ll).exp();
            if gamma == 0.0 {
                continue;
            }
            self.occ[k] += gamma;
            let mu = &g.means[k * d..(k + 1) * d];
            for i in 0..d {
                let diff = y[i] - mu[i];
                self.first[k * d + i] += gamma * y[i];
                self.second[k * d + i] += gamma * diff * diff;
            }
        }
        ll
    }

    /// Unweighted statistics over all frames, computed in fixed-size shards
    /// and summed in shard order so results do not depend on thread count.
    pub fn collect(g: &DiagonalGmm, frames: &FrameMatrix) -> Self {
        let k = g.num_components();
        let d = g.dims;
        let shards: Vec<MixtureStats> = frames
            .as_slice()
            .par_chunks(SHARD_FRAMES * d)
            .map(|chunk| {
                let mut stats = MixtureStats::zeros(k, d);
                let mut post = vec![0.0; k];
                for y in chunk.chunks_exact(d) {
                    stats.log_likelihood += stats.add_frame(g, y, 1.0, &mut post);
                }
                stats
            })
            .collect();
        let mut total = MixtureStats::zeros(k, d);
        for s in &shards {
            total.add(s);
        }
        total
    }

    /// Maximum-likelihood re-estimate with variances floored at `floor`.
    pub fn maximize(&self, prior: &DiagonalGmm, floor: &[f64]) -> Result<DiagonalGmm> {
        let d = prior.dims;
        let total: f64 = self.occ.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InsufficientData("no occupancy to re-estimate from".into()));
        }
        let mut weights = Vec::with_capacity(self.occ.len());
        let mut means = prior.means.clone();
        let mut vars = prior.vars.clone();
        for (k, &occ) in self.occ.iter().enumerate() {
            weights.push(occ / total);
            if occ < MIN_OCCUPANCY {
                continue;
            }
            for i in 0..d {
                let idx = k * d + i;
                let mean = self.first[idx] / occ;
                let shift = mean - prior.means[idx];
                let var = self.second[idx] / occ - shift * shift;
                means[idx] = mean;
                vars[idx] = var.max(floor[i]);
            }
        }
        // Renormalise away rounding so the weight invariant holds exactly enough.
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        DiagonalGmm::from_flat(d, weights, means, vars)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmTrainOptions {
    /// Final number of components.
    pub components: usize,
    /// EM sweeps for the final mixture size.
    pub iters: usize,
    /// EM sweeps after each intermediate split.
    pub sweeps_per_split: usize,
    /// Split offset in standard deviations.
    pub split_perturbation: f64,
    /// Stop the final stage once the relative log-likelihood gain drops below this.
    pub rel_tol: f64,
    /// Floor as a fraction of the global per-dimension variance.
    pub var_floor_ratio: f64,
    /// Explicit per-dimension floor; overrides `var_floor_ratio` when set.
    pub var_floor: Option<Vec<f64>>,
}

impl Default for GmmTrainOptions {
    fn default() -> Self {
        Self {
            components: 1,
            iters: 20,
            sweeps_per_split: 5,
            split_perturbation: 0.2,
            rel_tol: 1e-6,
            var_floor_ratio: 1e-4,
            var_floor: None,
        }
    }
}

impl GmmTrainOptions {
    pub fn with_components(components: usize) -> Self {
        Self {
            components,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: DiagonalGmm,
    /// Training log-likelihood per stage: one value per E-step plus the
    /// value of the model the stage ends with.
    pub stages: Vec<Vec<f64>>,
}

/// Per-dimension sample mean and biased variance.
pub fn global_moments(frames: &FrameMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames"));
    }
    let d = frames.dims();
    let n = frames.len() as f64;
    let mut mean = vec![0.0; d];
    for y in frames.rows() {
        for i in 0..d {
            mean[i] += y[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for y in frames.rows() {
        for i in 0..d {
            let diff = y[i] - mean[i];
            var[i] += diff * diff;
        }
    }
    for v in &mut var {
        *v /= n;
    }
    Ok((mean, var))
}

/// `ratio × global variance`, never below [`MIN_VARIANCE`].
pub fn variance_floor(frames: &FrameMatrix, ratio: f64) -> Result<Vec<f64>> {
    let (_, var) = global_moments(frames)?;
    Ok(var.into_iter().map(|v| (v * ratio).max(MIN_VARIANCE)).collect())
}

/// Trains a diagonal GMM on pooled frames by binary splitting and EM.
pub fn train_gmm_em(frames: &FrameMatrix, options: &GmmTrainOptions) -> Result<GmmFit> {
    let k_target = options.components;
    if k_target == 0 {
        return Err(Error::Parameter("number of components must be positive".into()));
    }
    if frames.len() < k_target {
        return Err(Error::InsufficientData(format!(
            "{} frames cannot support {k_target} components",
            frames.len()
        )));
    }
    let floor = match &options.var_floor {
        Some(f) => {
            check_dims(frames.dims(), f.len())?;
            f.clone()
        }
        None => variance_floor(frames, options.var_floor_ratio)?,
    };
    let (mean, var) = global_moments(frames)?;
    let var: Vec<f64> = var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let mut model = DiagonalGmm::from_flat(frames.dims(), vec![1.0], mean, var)?;

    let mut stages = Vec::new();
    loop {
        let last = model.num_components() == k_target;
        let (sweeps, tol) = if last {
            (options.iters, Some(options.rel_tol))
        } else {
            (options.sweeps_per_split, None)
        };
        let (next, trace) = run_em(model, frames, sweeps, tol, &floor)?;
        model = next;
        stages.push(trace);
        if last {
            break;
        }
        model = split_components(&model, k_target, options.split_perturbation)?;
    }
    Ok(GmmFit { model, stages })
}

/// Runs up to `sweeps` EM iterations. The returned trace holds the
/// log-likelihood seen at every E-step followed by that of the final model.
pub(crate) fn run_em(
    mut model: DiagonalGmm,
    frames: &FrameMatrix,
    sweeps: usize,
    rel_tol: Option<f64>,
    floor: &[f64],
) -> Result<(DiagonalGmm, Vec<f64>)> {
    let mut trace = Vec::with_capacity(sweeps + 1);
    let mut stats = MixtureStats::collect(&model, frames);
    trace.push(stats.log_likelihood);
    for _ in 0..sweeps {
        model = stats.maximize(&model, floor)?;
        let prev = stats.log_likelihood;
        stats = MixtureStats::collect(&model, frames);
        trace.push(stats.log_likelihood);
        if let Some(tol) = rel_tol {
            if (stats.log_likelihood - prev) / prev.abs().max(f64::MIN_POSITIVE) < tol {
                break;
            }
        }
    }
    Ok((model, trace))
}

/// Splits the heaviest components (ties to the lower index) so the mixture
/// grows towards `target`, at most doubling.
pub(crate) fn split_components(model: &DiagonalGmm, target: usize, perturbation: f64) -> Result<DiagonalGmm> {
    let k = model.num_components();
    let n_split = (target - k).min(k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| model.weights[b].total_cmp(&model.weights[a]).then(a.cmp(&b)));
    let mut chosen = vec![false; k];
    for &c in &order[..n_split] {
        chosen[c] = true;
    }
    let d = model.dims;
    let mut weights = Vec::with_capacity(k + n_split);
    let mut means = Vec::with_capacity((k + n_split) * d);
    let mut vars = Vec::with_capacity((k + n_split) * d);
    for c in 0..k {
        let mu = model.mean(c);
        let var = model.var(c);
        if chosen[c] {
            for sign in [-1.0, 1.0] {
                weights.push(model.weights[c] / 2.0);
                means.extend(mu.iter().zip(var).map(|(m, v)| m + sign * perturbation * v.sqrt()));
                vars.extend_from_slice(var);
            }
        } else {
            weights.push(model.weights[c]);
            means.extend_from_slice(mu);
            vars.extend_from_slice(var);
        }
    }
    DiagonalGmm::from_flat(d, weights, means, vars)
}

/// MAP re-estimate of the means with relevance factor `tau`:
/// `μ'_k = (τ μ_k + Σ_n γ_k(n) y_n) / (τ + Σ_n γ_k(n))`, posteriors taken
/// under the prior. Weights and variances are copied unchanged.
pub fn map_adapt_means(prior: &DiagonalGmm, frames: &FrameMatrix, tau: f64) -> Result<DiagonalGmm> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Parameter(format!("relevance factor must be ≥ 0, got {tau}")));
    }
    check_dims(prior.dims, frames.dims())?;
    let stats = MixtureStats::collect(prior, frames);
    let d = prior.dims;
    let mut means = prior.means.clone();
    for (k, &occ) in stats.occ.iter().enumerate() {
        let denom = tau + occ;
        if !(denom > 0.0) {
            continue;
        }
        for i in 0..d {
            let idx = k * d + i;
            means[idx] = (tau * prior.means[idx] + stats.first[idx]) / denom;
        }
    }
    DiagonalGmm::from_flat(d, prior.weights.clone(), means, prior.vars.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Direct density sum without log-sum-exp.
    fn naive_log_likelihood(g: &DiagonalGmm, y: &[f64]) -> f64 {
        let mut total = 0.0;
        for k in 0..g.num_components() {
            let mut density = g.weights()[k];
            for (i, &yi) in y.iter().enumerate() {
                let (m, v) = (g.mean(k)[i], g.var(k)[i]);
                density *= (-(yi - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
            }
            total += density;
        }
        total.ln()
    }

    fn random_gmm(rng: &mut ChaCha8Rng, k: usize, d: usize) -> DiagonalGmm {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        DiagonalGmm::new(
            raw.iter().map(|w| w / s).collect(),
            (0..k).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
            (0..k).map(|_| (0..d).map(|_| rng.random_range(0.3..2.0)).collect()).collect(),
        )
        .unwrap()
    }

    fn gaussian_frames(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> FrameMatrix {
        let data = (0..n * d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        FrameMatrix::new(d, 10.0, data).unwrap()
    }

    #[test]
    fn standard_normal_at_mode() {
        let g = DiagonalGmm::standard_normal(1).unwrap();
        let ll = g.log_likelihood(&[0.0]).unwrap();
        assert_abs_diff_eq!(ll, -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(ll, -0.91894, epsilon = 1e-5);
    }

    #[test]
    fn duplicated_component_equals_single() {
        let one = DiagonalGmm::new(vec![1.0], vec![vec![0.3, -1.0]], vec![vec![2.0, 0.5]]).unwrap();
        let two = DiagonalGmm::new(
            vec![0.5, 0.5],
            vec![vec![0.3, -1.0], vec![0.3, -1.0]],
            vec![vec![2.0, 0.5], vec![2.0, 0.5]],
        )
        .unwrap();
        for y in [[0.0, 0.0], [1.0, -2.0], [5.0, 3.0]] {
            assert_abs_diff_eq!(one.log_likelihood(&y).unwrap(), two.log_likelihood(&y).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn log_likelihood_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_gmm(&mut rng, 5, 3);
        for _ in 0..100 {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_abs_diff_eq!(g.log_likelihood(&y).unwrap(), naive_log_likelihood(&g, &y), epsilon = 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let g = DiagonalGmm::standard_normal(2).unwrap();
        assert!(matches!(g.log_likelihood(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_component_is_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames = gaussian_frames(&mut rng, 1000, 2, 3.0);
        let fit = train_gmm_em(&frames, &GmmTrainOptions::with_components(1)).unwrap();
        let n = frames.len() as f64;
        for i in 0..2 {
            let mean: f64 = frames.rows().map(|r| r[i]).sum::<f64>() / n;
            let var: f64 = frames.rows().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / n;
            assert_abs_diff_eq!(fit.model.mean(0)[i], mean, epsilon = 1e-10);
            assert_abs_diff_eq!(fit.model.var(0)[i], var, epsilon = 1e-10);
        }
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<f64> = (0..4000)
            .map(|i| {
                let c = if i % 2 == 0 { -10.0 } else { 10.0 };
                c + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let frames = FrameMatrix::new(1, 10.0, data).unwrap();
        // Symmetric data leaves the split symmetric for a while; allow EM to run on.
        let options = GmmTrainOptions { iters: 200, ..GmmTrainOptions::with_components(2) };
        let g = train_gmm_em(&frames, &options).unwrap().model;
        let mut comps: Vec<(f64, f64)> = (0..2).map(|k| (g.mean(k)[0], g.weights()[k])).collect();
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((comps[0].0 + 10.0).abs() < 0.1 && (comps[1].0 - 10.0).abs() < 0.1);
        assert!((comps[0].1 - 0.5).abs() < 0.05 && (comps[1].1 - 0.5).abs() < 0.05);
    }

    #[test]
    fn em_is_monotone_within_every_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let truth = random_gmm(&mut rng, 4, 7);
        let frames = gaussian_frames(&mut rng, 5000, 7, 1.0);
        let mixed: Vec<f64> = frames
            .rows()
            .enumerate()
            .flat_map(|(n, r)| {
                let k = n % 4;
                r.iter().enumerate().map(|(i, z)| truth.mean(k)[i] + truth.var(k)[i].sqrt() * z).collect::<Vec<_>>()
            })
            .collect();
        let frames = FrameMatrix::new(7, 10.0, mixed).unwrap();
        let fit = train_gmm_em(&frames, &GmmTrainOptions::with_components(4)).unwrap();
        assert_eq!(fit.model.num_components(), 4);
        for stage in &fit.stages {
            for w in stage.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "{} < {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn non_power_of_two_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames = gaussian_frames(&mut rng, 600, 2, 1.0);
        for k in [3, 5, 6] {
            let g = train_gmm_em(&frames, &GmmTrainOptions::with_components(k)).unwrap().model;
            assert_eq!(g.num_components(), k);
        }
    }

    #[test]
    fn too_few_frames_is_error() {
        let frames = FrameMatrix::new(1, 10.0, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            train_gmm_em(&frames, &GmmTrainOptions::with_components(3)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_dimension_is_floored() {
        let data: Vec<f64> = (0..200).flat_map(|i| [f64::from(i % 7), 0.0]).collect();
        let frames = FrameMatrix::new(2, 10.0, data).unwrap();
        let g = train_gmm_em(&frames, &GmmTrainOptions::with_components(2)).unwrap().model;
        assert!(g.var(0)[1] >= MIN_VARIANCE && g.var(1)[1] >= MIN_VARIANCE);
    }

    #[test]
    fn map_zero_tau_single_component_is_sample_mean() {
        let prior = DiagonalGmm::new(vec![1.0], vec![vec![100.0, -3.0]], vec![vec![1.0, 4.0]]).unwrap();
        let frames = FrameMatrix::from_rows(2, 10.0, &[[1.0, 2.0], [3.0, 5.0], [8.0, -1.0]]).unwrap();
        let g = map_adapt_means(&prior, &frames, 0.0).unwrap();
        assert_abs_diff_eq!(g.mean(0)[0], 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.mean(0)[1], 2.0, epsilon = 1e-10);
        assert_eq!(g.var(0), prior.var(0));
        assert_eq!(g.weights(), prior.weights());
    }

    #[test]
    fn map_huge_tau_keeps_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prior = random_gmm(&mut rng, 3, 2);
        let frames = gaussian_frames(&mut rng, 300, 2, 5.0);
        let g = map_adapt_means(&prior, &frames, 1e9).unwrap();
        for (a, b) in g.means_flat().iter().zip(prior.means_flat()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn map_matches_formula_with_precomputed_posteriors() {
        let prior = DiagonalGmm::new(vec![0.3, 0.7], vec![vec![-1.0], vec![2.0]], vec![vec![0.5], vec![1.5]]).unwrap();
        let ys = [-1.2, 0.4, 2.5, 3.1, -0.3];
        let frames = FrameMatrix::new(1, 10.0, ys.to_vec()).unwrap();
        let tau = 2.5;
        // Posteriors by direct density ratio.
        let dens = |k: usize, y: f64| {
            let (w, m, v) = (prior.weights()[k], prior.mean(k)[0], prior.var(k)[0]);
            w * (-(y - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
        };
        let adapted = map_adapt_means(&prior, &frames, tau).unwrap();
        for k in 0..2 {
            let (mut occ, mut sum) = (0.0, 0.0);
            for &y in &ys {
                let gamma = dens(k, y) / (dens(0, y) + dens(1, y));
                occ += gamma;
                sum += gamma * y;
            }
            let expect = (tau * prior.mean(k)[0] + sum) / (tau + occ);
            assert_abs_diff_eq!(adapted.mean(k)[0], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn map_rejects_negative_tau() {
        let prior = DiagonalGmm::standard_normal(1).unwrap();
        let frames = FrameMatrix::new(1, 10.0, vec![0.0]).unwrap();
        assert!(matches!(map_adapt_means(&prior, &frames, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn score_show_sums_and_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = random_gmm(&mut rng, 3, 2);
        let frames = gaussian_frames(&mut rng, 50, 2, 1.0);
        let oracle: f64 = frames.rows().map(|y| naive_log_likelihood(&g, y)).sum();
        let score = g.score_show(&frames).unwrap();
        assert_abs_diff_eq!(score, oracle, epsilon = 1e-9);

        let twice = FrameMatrix::concat([&frames, &frames]).unwrap();
        assert_abs_diff_eq!(g.score_show(&twice).unwrap(), 2.0 * score, epsilon = 1e-9);

        let one = FrameMatrix::new(2, 10.0, frames.row(0).to_vec()).unwrap();
        assert_eq!(g.score_show(&one).unwrap(), g.log_likelihood(frames.row(0)).unwrap());
        assert!(matches!(g.score_show(&FrameMatrix::empty(2, 10.0).unwrap()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gmm(&mut rng, 2, 3);
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"K\":2"));
        let back: DiagonalGmm = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let bad = text.replace("\"dims\":3", "\"dims\":4");
        assert!(serde_json::from_str::<DiagonalGmm>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn permuting_components_preserves_likelihood(seed in 0u64..500, y in proptest::collection::vec(-4.0f64..4.0, 2)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_gmm(&mut rng, 4, 2);
            let perm = [2usize, 0, 3, 1];
            let p = DiagonalGmm::new(
                perm.iter().map(|&k| g.weights()[k]).collect(),
                perm.iter().map(|&k| g.mean(k).to_vec()).collect(),
                perm.iter().map(|&k| g.var(k).to_vec()).collect(),
            ).unwrap();
            prop_assert!((g.log_likelihood(&y).unwrap() - p.log_likelihood(&y).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn map_means_lie_between_prior_and_ml(tau in 0.0f64..50.0, seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prior = DiagonalGmm::new(vec![1.0], vec![vec![rng.random_range(-5.0..5.0)]], vec![vec![1.0]]).unwrap();
            let frames = gaussian_frames(&mut rng, 20, 1, 2.0);
            let ml = frames.as_slice().iter().sum::<f64>() / 20.0;
            let m = map_adapt_means(&prior, &frames, tau).unwrap().mean(0)[0];
            let (lo, hi) = if ml < prior.mean(0)[0] { (ml, prior.mean(0)[0]) } else { (prior.mean(0)[0], ml) };
            prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
        }
    }
}
