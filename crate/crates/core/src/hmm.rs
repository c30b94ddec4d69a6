//! Ergodic hidden Markov models with diagonal-GMM state emissions.
//!
//! Training seeds the states from one pooled GMM with `S·K` components,
//! dealt round-robin to the states (component `j` goes to state `j mod S`),
//! starts from uniform initial and transition probabilities, and then runs
//! Baum-Welch with every show as a separate observation sequence.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::FrameMatrix;
use crate::error::{check_dims, Error, Result};
use crate::gmm::{train_gmm_em, variance_floor, DiagonalGmm, GmmTrainOptions, MixtureStats};
use crate::jsonio;
use crate::lattice::{self, ln_or_neg_inf};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmFile", into = "HmmFile")]
pub struct ErgodicHmm {
    initial: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emissions: Vec<DiagonalGmm>,
}

#[derive(Serialize, Deserialize)]
struct HmmFile {
    initial: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emissions: Vec<DiagonalGmm>,
}

impl TryFrom<HmmFile> for ErgodicHmm {
    type Error = Error;

    fn try_from(f: HmmFile) -> Result<Self> {
        ErgodicHmm::new(f.initial, f.trans, f.emissions)
    }
}

impl From<ErgodicHmm> for HmmFile {
    fn from(h: ErgodicHmm) -> Self {
        HmmFile {
            initial: h.initial,
            trans: h.trans,
            emissions: h.emissions,
        }
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Validation(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl ErgodicHmm {
    pub fn new(initial: Vec<f64>, trans: Vec<Vec<f64>>, emissions: Vec<DiagonalGmm>) -> Result<Self> {
        let s = initial.len();
        if s == 0 {
            return Err(Error::Validation("an HMM needs at least one state".into()));
        }
        check_dims(s, trans.len())?;
        check_dims(s, emissions.len())?;
        check_distribution(&initial, "initial distribution")?;
        for (i, row) in trans.iter().enumerate() {
            check_dims(s, row.len())?;
            check_distribution(row, &format!("transition row {i}"))?;
        }
        let d = emissions[0].dims();
        for e in &emissions {
            check_dims(d, e.dims())?;
        }
        Ok(Self {
            initial,
            trans,
            emissions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dims(&self) -> usize {
        self.emissions[0].dims()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn trans(&self) -> &[Vec<f64>] {
        &self.trans
    }

    pub fn emissions(&self) -> &[DiagonalGmm] {
        &self.emissions
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonio::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonio::write_json(path.as_ref(), self)
    }

    fn log_initial(&self) -> Vec<f64> {
        self.initial.iter().map(|&p| ln_or_neg_inf(p)).collect()
    }

    fn log_trans(&self) -> Vec<f64> {
        self.trans.iter().flatten().map(|&p| ln_or_neg_inf(p)).collect()
    }

    fn emission_scores(&self, frames: &FrameMatrix) -> Result<Vec<f64>> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("no frames"));
        }
        check_dims(self.dims(), frames.dims())?;
        let mut scratch = Vec::new();
        let mut out = Vec::with_capacity(frames.len() * self.num_states());
        for y in frames.rows() {
            for g in &self.emissions {
                out.push(g.log_likelihood_unchecked(y, &mut scratch));
            }
        }
        Ok(out)
    }

    /// `log p(frames | model)` by the log-space forward recursion.
    pub fn forward_log_likelihood(&self, frames: &FrameMatrix) -> Result<f64> {
        let emissions = self.emission_scores(frames)?;
        Ok(lattice::forward(&self.log_initial(), &self.log_trans(), &emissions).1)
    }

    /// Most likely state sequence and its log score; ties go to the lower state.
    pub fn viterbi_path(&self, frames: &FrameMatrix) -> Result<(Vec<usize>, f64)> {
        let emissions = self.emission_scores(frames)?;
        Ok(lattice::viterbi(&self.log_initial(), &self.log_trans(), &emissions))
    }
}

pub fn forward_log_likelihood(h: &ErgodicHmm, frames: &FrameMatrix) -> Result<f64> {
    h.forward_log_likelihood(frames)
}

pub fn viterbi_path(h: &ErgodicHmm, frames: &FrameMatrix) -> Result<Vec<usize>> {
    h.viterbi_path(frames).map(|(path, _)| path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmTrainOptions {
    pub states: usize,
    /// Gaussians per state.
    pub components: usize,
    /// Baum-Welch sweeps.
    pub iters: usize,
    /// Settings for the pooled GMM that seeds the states; its component
    /// count is overridden with `states × components`.
    pub init: GmmTrainOptions,
}

impl Default for HmmTrainOptions {
    fn default() -> Self {
        Self {
            states: 8,
            components: 32,
            iters: 10,
            init: GmmTrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HmmFit {
    pub model: ErgodicHmm,
    /// Total log-likelihood over all shows before every sweep, then of the
    /// returned model.
    pub log_likelihoods: Vec<f64>,
}

struct SweepStats {
    initial: Vec<f64>,
    trans: Vec<f64>,
    states: Vec<MixtureStats>,
    log_likelihood: f64,
}

impl SweepStats {
    fn zeros(h: &ErgodicHmm) -> Self {
        let s = h.num_states();
        Self {
            initial: vec![0.0; s],
            trans: vec![0.0; s * s],
            states: h
                .emissions
                .iter()
                .map(|g| MixtureStats::zeros(g.num_components(), g.dims()))
                .collect(),
            log_likelihood: 0.0,
        }
    }

    fn add(&mut self, other: &SweepStats) {
        for (a, b) in self.initial.iter_mut().zip(&other.initial) {
            *a += b;
        }
        for (a, b) in self.trans.iter_mut().zip(&other.trans) {
            *a += b;
        }
        for (a, b) in self.states.iter_mut().zip(&other.states) {
            a.add(b);
        }
        self.log_likelihood += other.log_likelihood;
    }
}

fn show_stats(h: &ErgodicHmm, frames: &FrameMatrix, log_init: &[f64], log_trans: &[f64]) -> Result<SweepStats> {
    let s = h.num_states();
    let emissions = h.emission_scores(frames)?;
    let (alpha, total) = lattice::forward(log_init, log_trans, &emissions);
    let beta = lattice::backward(log_trans, &emissions, s);
    let n = frames.len();
    let mut stats = SweepStats::zeros(h);
    stats.log_likelihood = total;
    if !total.is_finite() {
        return Err(Error::InsufficientData("a training show has zero likelihood under the model".into()));
    }
    let mut post = Vec::new();
    for t in 0..n {
        let y = frames.row(t);
        for j in 0..s {
            let gamma = (alpha[t * s + j] + beta[t * s + j] - total).exp();
            if t == 0 {
                stats.initial[j] += gamma;
            }
            if gamma > 0.0 {
                let g = &h.emissions[j];
                post.resize(g.num_components(), 0.0);
                stats.states[j].add_frame(g, y, gamma, &mut post);
            }
        }
        if t + 1 < n {
            for i in 0..s {
                let a = alpha[t * s + i];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..s {
                    let v = a + log_trans[i * s + j] + emissions[(t + 1) * s + j] + beta[(t + 1) * s + j] - total;
                    stats.trans[i * s + j] += v.exp();
                }
            }
        }
    }
    Ok(stats)
}

fn normalized(row: &[f64]) -> Option<Vec<f64>> {
    let sum: f64 = row.iter().sum();
    (sum > 0.0).then(|| row.iter().map(|v| v / sum).collect())
}

fn sweep(h: &ErgodicHmm, shows: &[FrameMatrix]) -> Result<SweepStats> {
    let log_init = h.log_initial();
    let log_trans = h.log_trans();
    let per_show = shows
        .par_iter()
        .map(|f| show_stats(h, f, &log_init, &log_trans))
        .collect::<Result<Vec<_>>>()?;
    let mut total = SweepStats::zeros(h);
    for s in &per_show {
        total.add(s);
    }
    Ok(total)
}

fn maximize(h: &ErgodicHmm, stats: &SweepStats, floor: &[f64]) -> Result<ErgodicHmm> {
    let s = h.num_states();
    let initial = normalized(&stats.initial).unwrap_or_else(|| h.initial.clone());
    let trans = (0..s)
        .map(|i| normalized(&stats.trans[i * s..(i + 1) * s]).unwrap_or_else(|| h.trans[i].clone()))
        .collect();
    let emissions = h
        .emissions
        .iter()
        .zip(&stats.states)
        .map(|(g, st)| {
            if st.occ.iter().sum::<f64>() > 0.0 {
                st.maximize(g, floor)
            } else {
                Ok(g.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ErgodicHmm::new(initial, trans, emissions)
}

/// Seeds an ergodic HMM from pooled data and refines it with Baum-Welch.
pub fn train_hmm_baum_welch(shows: &[FrameMatrix], options: &HmmTrainOptions) -> Result<HmmFit> {
    let s = options.states;
    let k = options.components;
    if s == 0 || k == 0 {
        return Err(Error::Parameter("states and components must be positive".into()));
    }
    let shows: Vec<FrameMatrix> = shows.iter().filter(|f| !f.is_empty()).cloned().collect();
    if shows.is_empty() {
        return Err(Error::InsufficientData("no training frames".into()));
    }
    let pooled = FrameMatrix::concat(&shows)?;
    if pooled.len() < s * k {
        return Err(Error::InsufficientData(format!(
            "{} frames cannot seed {s} states × {k} components",
            pooled.len()
        )));
    }
    let floor = match &options.init.var_floor {
        Some(f) => f.clone(),
        None => variance_floor(&pooled, options.init.var_floor_ratio)?,
    };
    let init_options = GmmTrainOptions {
        components: s * k,
        var_floor: Some(floor.clone()),
        ..options.init.clone()
    };
    let global = train_gmm_em(&pooled, &init_options)?.model;

    let emissions = (0..s)
        .map(|state| {
            let members: Vec<usize> = (state..s * k).step_by(s).collect();
            let mass: f64 = members.iter().map(|&c| global.weights()[c]).sum();
            let weights = if mass > 0.0 {
                members.iter().map(|&c| global.weights()[c] / mass).collect()
            } else {
                vec![1.0 / k as f64; k]
            };
            DiagonalGmm::new(
                weights,
                members.iter().map(|&c| global.mean(c).to_vec()).collect(),
                members.iter().map(|&c| global.var(c).to_vec()).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let uniform = vec![1.0 / s as f64; s];
    let mut model = ErgodicHmm::new(uniform.clone(), vec![uniform; s], emissions)?;

    let mut log_likelihoods = Vec::with_capacity(options.iters + 1);
    for _ in 0..options.iters {
        let stats = sweep(&model, &shows)?;
        log_likelihoods.push(stats.log_likelihood);
        model = maximize(&model, &stats, &floor)?;
    }
    log_likelihoods.push(sweep(&model, &shows)?.log_likelihood);
    Ok(HmmFit {
        model,
        log_likelihoods,
    })
}
