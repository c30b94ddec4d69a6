//! Two-variable SMO for the soft-margin dual
//! `max Σα − ½ ΣΣ α_i α_j y_i y_j k(x_i, x_j)`, `0 ≤ α ≤ C`, `Σ α y = 0`.
//!
//! Working pairs are chosen by maximal violation: with gradient `G = Qα − 1`,
//! `i` maximises `−y_t G_t` over the indices that may still move up and `j`
//! minimises it over those that may move down, which pairs the worst
//! violator with the largest `|E_i − E_j|`. Scans run in index order and
//! ties keep the lower index.

use crate::error::{Error, Result};
use crate::svm::{gaussian_kernel_unchecked, SvmModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    /// Stop when the largest KKT violation gap drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl SmoParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub model: SvmModel,
    /// Dual variable of every training point, in input order.
    pub alphas: Vec<f64>,
    pub iterations: usize,
}

pub fn train_svm_smo(xs: &[Vec<f64>], ys: &[f64], params: &SmoParams) -> Result<SvmModel> {
    solve(xs, ys, params).map(|s| s.model)
}

pub fn solve(xs: &[Vec<f64>], ys: &[f64], params: &SmoParams) -> Result<SmoSolution> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DimensionMismatch { expected: n, found: ys.len() });
    }
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Validation("labels must be +1 or -1".into()));
    }
    if !ys.contains(&1.0) || !ys.contains(&-1.0) {
        return Err(Error::InsufficientData("SVM training needs both positive and negative examples".into()));
    }
    if !(params.c > 0.0 && params.gamma > 0.0 && params.tol > 0.0) {
        return Err(Error::Parameter("C, gamma and tol must be positive".into()));
    }
    let f = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != f) {
        return Err(Error::DimensionMismatch { expected: f, found: bad.len() });
    }

    let c = params.c;
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = gaussian_kernel_unchecked(&xs[i], &xs[j], params.gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let snap_eps = 1e-12 * c;
    let mut iterations = 0;
    let (mut m_up, mut m_low);
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        m_up = f64::NEG_INFINITY;
        m_low = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if up(alpha[t], ys[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if low(alpha[t], ys[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m_up - m_low < params.tol || iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        let (yi, yj) = (ys[i], ys[j]);
        let (ai, aj) = (alpha[i], alpha[j]);
        let eta = (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
        // E_i − E_j, the bias cancels.
        let diff = yi * grad[i] - yj * grad[j];
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        let new_aj = (aj + yj * diff / eta).clamp(lo, hi);
        let new_ai = ai + yi * yj * (aj - new_aj);
        // Rounding can leave a variable a hair off its bound, where it would
        // stay eligible for selection without being able to move.
        let snap = |a: f64| if a < snap_eps { 0.0 } else if a > c - snap_eps { c } else { a };
        let (new_ai, new_aj) = (snap(new_ai), snap(new_aj));
        let (di, dj) = (new_ai - ai, new_aj - aj);
        if di == 0.0 && dj == 0.0 {
            break;
        }
        alpha[i] = new_ai;
        alpha[j] = new_aj;
        for t in 0..n {
            grad[t] += ys[t] * (yi * kernel[t * n + i] * di + yj * kernel[t * n + j] * dj);
        }
    }

    let bias = match (m_up.is_finite(), m_low.is_finite()) {
        (true, true) => 0.5 * (m_up + m_low),
        (true, false) => m_up,
        (false, true) => m_low,
        (false, false) => 0.0,
    };
    let mut support_vectors = Vec::new();
    let mut alphas_signed = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(xs[t].clone());
            alphas_signed.push(alpha[t] * ys[t]);
        }
    }
    let model = SvmModel::new(support_vectors, alphas_signed, bias, params.gamma, c)?;
    Ok(SmoSolution {
        model,
        alphas: alpha,
        iterations,
    })
}

/// Largest KKT violation over the training set, in margin units:
/// `y f(x) ≥ 1` at `α = 0`, `y f(x) = 1` for free vectors, `y f(x) ≤ 1` at `α = C`.
pub fn kkt_max_violation(model: &SvmModel, xs: &[Vec<f64>], ys: &[f64], alphas: &[f64]) -> Result<f64> {
    let c = model.c();
    let bound_eps = 1e-12 * c.max(1.0);
    let mut worst: f64 = 0.0;
    for ((x, &y), &a) in xs.iter().zip(ys).zip(alphas) {
        let margin = y * model.decision(x)?;
        let v = if a <= bound_eps {
            (1.0 - margin).max(0.0)
        } else if a >= c - bound_eps {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.0], vec![2.0, 1.0]],
            vec![-1.0, -1.0, 1.0, 1.0],
        )
    }

    #[test]
    fn separable_four_points() {
        let (xs, ys) = square();
        let params = SmoParams::new(100.0, 0.5);
        let sol = solve(&xs, &ys, &params).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let f = sol.model.decision(x).unwrap();
            assert_eq!(f.signum(), *y);
            assert!(y * f >= 1.0 - params.tol);
        }
        assert!(kkt_max_violation(&sol.model, &xs, &ys, &sol.alphas).unwrap() <= params.tol);
    }

    #[test]
    fn duplicating_points_keeps_decision_function() {
        let (xs, ys) = square();
        let params = SmoParams { tol: 1e-10, ..SmoParams::new(100.0, 0.5) };
        let once = train_svm_smo(&xs, &ys, &params).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<f64> = ys.iter().chain(&ys).copied().collect();
        let twice = train_svm_smo(&xs2, &ys2, &params).unwrap();
        for gx in 0..=8 {
            for gy in 0..=8 {
                let p = [f64::from(gx) * 0.5 - 1.0, f64::from(gy) * 0.5 - 1.0];
                let (a, b) = (once.decision(&p).unwrap(), twice.decision(&p).unwrap());
                assert!((a - b).abs() < 1e-6, "{a} vs {b} at {p:?}");
            }
        }
    }

    #[test]
    fn tiny_c_collapses_to_bias() {
        let (xs, ys) = square();
        let model = train_svm_smo(&xs, &ys, &SmoParams::new(1e-9, 0.5)).unwrap();
        for p in [[0.0, 0.0], [1.0, 0.5], [5.0, -3.0]] {
            assert!((model.decision(&p).unwrap() - model.bias()).abs() <= 1e-6);
        }
    }

    #[test]
    fn kkt_holds_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            let n = 40;
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<f64> = xs.iter().map(|x| if x[0] + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 }).collect();
            let params = SmoParams::new(0.5 + trial as f64, 1.0);
            let sol = solve(&xs, &ys, &params).unwrap();
            assert!(kkt_max_violation(&sol.model, &xs, &ys, &sol.alphas).unwrap() <= params.tol);
            let sum: f64 = sol.model.alphas_signed().iter().sum();
            assert!(sum.abs() < 1e-6);
            assert!(sol.model.alphas_signed().iter().all(|a| a.abs() <= params.c));
        }
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_svm_smo(&xs, &[1.0, 1.0], &SmoParams::new(1.0, 1.0)),
            Err(Error::InsufficientData(_))
        ));
    }
}
