//! Log-space trellis recursions shared by the background decoder and the HMM.
//!
//! Emission scores are a flat `frames × states` buffer; transitions a flat
//! `states × states` buffer indexed `[from * states + to]`.

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Best state path and its score. Ties go to the lower state index, both for
/// the final state and for every back-pointer.
pub(crate) fn viterbi(log_initial: &[f64], log_trans: &[f64], emissions: &[f64]) -> (Vec<usize>, f64) {
    let s = log_initial.len();
    let n = emissions.len() / s;
    debug_assert!(n > 0 && log_trans.len() == s * s);

    let mut delta: Vec<f64> = (0..s).map(|j| log_initial[j] + emissions[j]).collect();
    let mut next = vec![0.0; s];
    let mut back = vec![0usize; n * s];
    for t in 1..n {
        let emit = &emissions[t * s..(t + 1) * s];
        for j in 0..s {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..s {
                let v = delta[i] + log_trans[i * s + j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            back[t * s + j] = arg;
            next[j] = best + emit[j];
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut last = 0;
    for j in 1..s {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let score = delta[last];
    let mut path = vec![0usize; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * s + path[t]];
    }
    (path, score)
}

/// Forward variables `log α_t(j)` and the total log-likelihood.
pub(crate) fn forward(log_initial: &[f64], log_trans: &[f64], emissions: &[f64]) -> (Vec<f64>, f64) {
    let s = log_initial.len();
    let n = emissions.len() / s;
    let mut alpha = vec![0.0; n * s];
    for j in 0..s {
        alpha[j] = log_initial[j] + emissions[j];
    }
    let mut terms = vec![0.0; s];
    for t in 1..n {
        for j in 0..s {
            for i in 0..s {
                terms[i] = alpha[(t - 1) * s + i] + log_trans[i * s + j];
            }
            alpha[t * s + j] = log_sum_exp(&terms) + emissions[t * s + j];
        }
    }
    let total = log_sum_exp(&alpha[(n - 1) * s..]);
    (alpha, total)
}

/// Backward variables `log β_t(i)`.
pub(crate) fn backward(log_trans: &[f64], emissions: &[f64], states: usize) -> Vec<f64> {
    let s = states;
    let n = emissions.len() / s;
    let mut beta = vec![0.0; n * s];
    let mut terms = vec![0.0; s];
    for t in (0..n.saturating_sub(1)).rev() {
        for i in 0..s {
            for j in 0..s {
                terms[j] = log_trans[i * s + j] + emissions[(t + 1) * s + j] + beta[(t + 1) * s + j];
            }
            beta[t * s + i] = log_sum_exp(&terms);
        }
    }
    beta
}
