use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::FrameMatrix;
use crate::error::{check_dims, Error, Result};
use crate::gmm::DiagonalGmm;

/// `|det A|` below this is treated as singular.
pub const MIN_ABS_DET: f64 = 1e-12;
/// Smallest accepted eigenvalue ratio of the per-row statistics.
const MIN_RCOND: f64 = 1e-12;

/// Affine feature-space transform `ŷ = A y + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformFile", into = "TransformFile")]
pub struct CmllrTransform {
    a: DMatrix<f64>,
    b: DVector<f64>,
    log_abs_det: f64,
}

#[derive(Serialize, Deserialize)]
struct TransformFile {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<TransformFile> for CmllrTransform {
    type Error = Error;

    fn try_from(f: TransformFile) -> Result<Self> {
        CmllrTransform::new(f.a, f.b)
    }
}

impl From<CmllrTransform> for TransformFile {
    fn from(t: CmllrTransform) -> Self {
        TransformFile {
            a: t.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: t.b.iter().copied().collect(),
        }
    }
}

impl CmllrTransform {
    /// `a` is given row by row.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if d == 0 {
            return Err(Error::Validation("transform dimension must be positive".into()));
        }
        check_dims(d, a.len())?;
        for row in &a {
            check_dims(d, row.len())?;
        }
        Self::from_parts(DMatrix::from_row_iterator(d, d, a.into_iter().flatten()), DVector::from_vec(b))
    }

    pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::Validation(format!(
                "transform needs a square matrix matching the bias length, got {}×{} and {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("transform entries must be finite".into()));
        }
        let det = a.determinant();
        if !(det.abs() > MIN_ABS_DET) {
            return Err(Error::Validation(format!("transform matrix is singular (det = {det:e})")));
        }
        Ok(Self {
            a,
            b,
            log_abs_det: det.abs().ln(),
        })
    }

    pub fn identity(dims: usize) -> Self {
        Self {
            a: DMatrix::identity(dims, dims),
            b: DVector::zeros(dims),
            log_abs_det: 0.0,
        }
    }

    pub fn dims(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// `A y + b`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dims(), y.len())?;
        let mut out = vec![0.0; y.len()];
        self.apply_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dims();
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = self.b[i];
            for j in 0..d {
                acc += self.a[(i, j)] * y[j];
            }
            *slot = acc;
        }
    }

    /// The transform undoing this one: `(A⁻¹, −A⁻¹ b)`.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Validation("transform matrix is not invertible".into()))?;
        let b = -(&inv * &self.b);
        Self::from_parts(inv, b)
    }

    /// `log p_GMM(A y + b) + log|det A|`.
    pub fn log_likelihood(&self, gmm: &DiagonalGmm, y: &[f64]) -> Result<f64> {
        check_dims(self.dims(), y.len())?;
        check_dims(gmm.dims(), y.len())?;
        let mut buf = vec![0.0; y.len()];
        Ok(self.log_likelihood_unchecked(gmm, y, &mut buf, &mut Vec::new()))
    }

    pub(crate) fn log_likelihood_unchecked(
        &self,
        gmm: &DiagonalGmm,
        y: &[f64],
        buf: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> f64 {
        self.apply_into(y, buf);
        gmm.log_likelihood_unchecked(buf, scratch) + self.log_abs_det
    }
}

pub fn apply_transform(t: &CmllrTransform, y: &[f64]) -> Result<Vec<f64>> {
    t.apply(y)
}

pub fn transformed_log_likelihood(t: &CmllrTransform, gmm: &DiagonalGmm, y: &[f64]) -> Result<f64> {
    t.log_likelihood(gmm, y)
}

#[derive(Debug, Clone)]
pub struct CmllrFit {
    pub transform: CmllrTransform,
    /// Total transformed log-likelihood of the frames before each
    /// iteration, followed by that of the returned transform.
    pub log_likelihoods: Vec<f64>,
    /// Auxiliary objective after every row update, per iteration (the
    /// first entry of each list is the value before any row was touched).
    pub auxiliary: Vec<Vec<f64>>,
}

/// Per-row sufficient statistics in the extended space `ζ = [1, y]`.
struct RowStats {
    /// Total occupancy β.
    beta: f64,
    /// `G_i`, one (D+1)×(D+1) matrix per row.
    g: Vec<DMatrix<f64>>,
    /// `k_i`, one length-(D+1) vector per row.
    k: Vec<DVector<f64>>,
    log_likelihood: f64,
}

fn accumulate(gmm: &DiagonalGmm, t: &CmllrTransform, frames: &FrameMatrix) -> RowStats {
    let d = frames.dims();
    let e = d + 1;
    let m = gmm.num_components();
    // Per-component occupancy-weighted outer products of ζ.
    let mut outer = vec![DMatrix::<f64>::zeros(e, e); m];
    let mut occ = vec![0.0; m];
    let mut zeta = DVector::<f64>::zeros(e);
    let mut transformed = vec![0.0; d];
    let mut post = vec![0.0; m];
    let mut ll = 0.0;
    for y in frames.rows() {
        t.apply_into(y, &mut transformed);
        let frame_ll = gmm.joint_log_terms(&transformed, &mut post);
        ll += frame_ll + t.log_abs_det;
        zeta[0] = 1.0;
        for j in 0..d {
            zeta[j + 1] = y[j];
        }
        for c in 0..m {
            let gamma = (post[c] - frame_ll).exp();
            if gamma == 0.0 {
                continue;
            }
            occ[c] += gamma;
            outer[c].ger(gamma, &zeta, &zeta, 1.0);
        }
    }
    let mut g = vec![DMatrix::<f64>::zeros(e, e); d];
    let mut k = vec![DVector::<f64>::zeros(e); d];
    for c in 0..m {
        if occ[c] == 0.0 {
            continue;
        }
        let mean = gmm.mean(c);
        let var = gmm.var(c);
        // First-order statistics are the first column of the outer products.
        let first = outer[c].column(0).into_owned();
        for i in 0..d {
            g[i] += &outer[c] / var[i];
            k[i] += &first * (mean[i] / var[i]);
        }
    }
    RowStats {
        beta: occ.iter().sum(),
        g,
        k,
        log_likelihood: ll,
    }
}

/// Extended transform rows `w_i = [b_i, a_i1 … a_iD]`.
fn extended_rows(t: &CmllrTransform) -> Vec<DVector<f64>> {
    let d = t.dims();
    (0..d)
        .map(|i| DVector::from_iterator(d + 1, std::iter::once(t.b[i]).chain((0..d).map(|j| t.a[(i, j)]))))
        .collect()
}

fn from_extended(rows: &[DVector<f64>]) -> (DMatrix<f64>, DVector<f64>) {
    let d = rows.len();
    let a = DMatrix::from_fn(d, d, |i, j| rows[i][j + 1]);
    let b = DVector::from_fn(d, |i, _| rows[i][0]);
    (a, b)
}

fn auxiliary(stats: &RowStats, rows: &[DVector<f64>]) -> f64 {
    let (a, _) = from_extended(rows);
    let mut q = stats.beta * a.determinant().abs().ln();
    for (i, w) in rows.iter().enumerate() {
        q -= 0.5 * (w.dot(&(&stats.g[i] * w)) - 2.0 * w.dot(&stats.k[i]));
    }
    q
}

/// Maximum-likelihood CMLLR transform mapping `frames` towards `gmm`.
///
/// Each iteration recomputes component posteriors under the current
/// transform and then updates every row in turn: with `p_i` the extended
/// cofactor row of `A`, the new row is `(α p_i + k_i) G_i⁻¹` where `α`
/// solves `α² p G⁻¹ pᵀ + α p G⁻¹ kᵀ − β = 0`; of the two roots the one with
/// the larger auxiliary value is kept.
pub fn estimate_cmllr(gmm: &DiagonalGmm, frames: &FrameMatrix, iters: usize) -> Result<CmllrFit> {
    estimate_cmllr_from(gmm, frames, iters, CmllrTransform::identity(frames.dims()))
}

/// As [`estimate_cmllr`], starting from `init` instead of the identity.
pub fn estimate_cmllr_from(
    gmm: &DiagonalGmm,
    frames: &FrameMatrix,
    iters: usize,
    init: CmllrTransform,
) -> Result<CmllrFit> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("cannot estimate a transform from zero frames"));
    }
    check_dims(gmm.dims(), frames.dims())?;
    check_dims(init.dims(), frames.dims())?;
    let d = frames.dims();

    let mut transform = init;
    let mut log_likelihoods = Vec::with_capacity(iters + 1);
    let mut aux_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let stats = accumulate(gmm, &transform, frames);
        log_likelihoods.push(stats.log_likelihood);

        let mut rows = extended_rows(&transform);
        let mut aux = vec![auxiliary(&stats, &rows)];
        let mut g_inv = Vec::with_capacity(d);
        for (i, g) in stats.g.iter().enumerate() {
            g_inv.push(invert_row_stats(g, i)?);
        }
        for i in 0..d {
            let (a, _) = from_extended(&rows);
            let cof = cofactor_row(&a, i)?;
            let p = DVector::from_iterator(d + 1, std::iter::once(0.0).chain(cof.iter().copied()));
            let gp = &g_inv[i] * &p;
            let quad = p.dot(&gp);
            let lin = gp.dot(&stats.k[i]);
            if !(quad > 0.0) {
                return Err(Error::Conditioning {
                    row: i,
                    message: "cofactor quadratic form is not positive".into(),
                });
            }
            let disc = (lin * lin + 4.0 * quad * stats.beta).sqrt();
            let score = |alpha: f64| stats.beta * (alpha * quad + lin).abs().ln() - 0.5 * alpha * alpha * quad;
            let r1 = (-lin + disc) / (2.0 * quad);
            let r2 = (-lin - disc) / (2.0 * quad);
            // Reflections can score identically; keep the sign of det A then.
            let (s1, s2) = (score(r1), score(r2));
            let alpha = if s2 - s1 > 1e-12 * s1.abs().max(1.0) { r2 } else { r1 };
            rows[i] = &g_inv[i] * (&p * alpha + &stats.k[i]);
            aux.push(auxiliary(&stats, &rows));
        }
        aux_trace.push(aux);
        let (a, b) = from_extended(&rows);
        transform = CmllrTransform::from_parts(a, b)?;
    }
    log_likelihoods.push(accumulate(gmm, &transform, frames).log_likelihood);
    Ok(CmllrFit {
        transform,
        log_likelihoods,
        auxiliary: aux_trace,
    })
}

/// Inverse of a symmetric row-statistics matrix, refusing near-singular ones.
fn invert_row_stats(g: &DMatrix<f64>, row: usize) -> Result<DMatrix<f64>> {
    let eig = g.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0 && min > MIN_RCOND * max) {
        return Err(Error::Conditioning {
            row,
            message: format!("eigenvalues span [{min:e}, {max:e}]"),
        });
    }
    g.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Conditioning {
        row,
        message: "row statistics are not positive definite".into(),
    })
}

/// Row `i` of the cofactor matrix, `det(A) · (A⁻¹)ᵀ`.
fn cofactor_row(a: &DMatrix<f64>, i: usize) -> Result<DVector<f64>> {
    let det = a.determinant();
    let inv = a
        .clone()
        .try_inverse()
        .ok_or(Error::Conditioning { row: i, message: "transform became singular".into() })?;
    Ok(inv.column(i).into_owned() * det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_transform(rng: &mut ChaCha8Rng, d: usize) -> CmllrTransform {
        loop {
            let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Ok(t) = CmllrTransform::new(a, b) {
                if t.log_abs_det() > -3.0 {
                    return t;
                }
            }
        }
    }

    #[test]
    fn identity_leaves_input_alone() {
        let t = CmllrTransform::identity(3);
        assert_eq!(t.apply(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn scalar_arithmetic() {
        let t = CmllrTransform::new(vec![vec![2.0]], vec![3.0]).unwrap();
        assert_eq!(t.apply(&[1.0]).unwrap(), vec![5.0]);
        assert!(matches!(t.apply(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_transform(&mut rng, 4);
        let inv = t.inverse().unwrap();
        for _ in 0..20 {
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let back = inv.apply(&t.apply(&y).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(CmllrTransform::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn identity_likelihood_is_plain_gmm() {
        let g = DiagonalGmm::new(vec![0.4, 0.6], vec![vec![0.0, 1.0], vec![2.0, -1.0]], vec![vec![1.0, 0.5], vec![2.0, 1.0]]).unwrap();
        let t = CmllrTransform::identity(2);
        for y in [[0.3, 0.1], [4.0, -2.0]] {
            assert_abs_diff_eq!(t.log_likelihood(&g, &y).unwrap(), g.log_likelihood(&y).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_jacobian_term() {
        let g = DiagonalGmm::standard_normal(1).unwrap();
        let t = CmllrTransform::new(vec![vec![2.0]], vec![0.5]).unwrap();
        let y = 0.7;
        let expect = g.log_likelihood(&[2.0 * y + 0.5]).unwrap() + 2f64.ln();
        assert_abs_diff_eq!(t.log_likelihood(&g, &[y]).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn change_of_variables_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = DiagonalGmm::new(vec![0.5, 0.5], vec![vec![0.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]], vec![vec![1.0; 3], vec![0.5; 3]]).unwrap();
        for _ in 0..20 {
            let t = random_transform(&mut rng, 3);
            let inv = t.inverse().unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z = inv.apply(&x).unwrap();
            let lhs = t.log_likelihood(&g, &z).unwrap();
            let rhs = g.log_likelihood(&x).unwrap() + t.log_abs_det();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<f64> = (0..100_000).map(|_| 4.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let n = data.len() as f64;
        let mu_d = data.iter().sum::<f64>() / n;
        let sd_d = (data.iter().map(|y| (y - mu_d).powi(2)).sum::<f64>() / n).sqrt();
        let (mu_m, sd_m) = (-1.0, 2.0);
        let g = DiagonalGmm::new(vec![1.0], vec![vec![mu_m]], vec![vec![sd_m * sd_m]]).unwrap();
        let frames = FrameMatrix::new(1, 10.0, data).unwrap();
        let t = estimate_cmllr(&g, &frames, 3).unwrap().transform;
        let a = sd_m / sd_d;
        assert_abs_diff_eq!(t.matrix()[(0, 0)], a, epsilon = 1e-6);
        assert_abs_diff_eq!(t.bias()[0], mu_m - a * mu_d, epsilon = 1e-6);
    }

    #[test]
    fn data_from_model_gives_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = DiagonalGmm::new(
            vec![0.3, 0.5, 0.2],
            vec![vec![-2.0, 1.0], vec![1.5, -0.5], vec![3.0, 3.0]],
            vec![vec![0.5, 1.0], vec![1.0, 0.3], vec![0.8, 0.8]],
        )
        .unwrap();
        let frames = sample_gmm(&mut rng, &g, 5000);
        let fit = estimate_cmllr(&g, &frames, 20).unwrap();
        let a = fit.transform.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a[(i, j)] - expect).abs() < 0.05, "A = {a}");
            }
            assert!(fit.transform.bias()[i].abs() < 0.05);
        }
        check_monotone(&fit);
    }

    #[test]
    fn never_worse_than_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = DiagonalGmm::new(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![3.0, 1.0]], vec![vec![1.0, 1.0], vec![0.5, 2.0]]).unwrap();
        let target = random_transform(&mut rng, 2);
        let frames = sample_gmm(&mut rng, &g, 2000);
        let shifted: Vec<f64> = frames.rows().flat_map(|y| target.apply(y).unwrap()).collect();
        let frames = FrameMatrix::new(2, 10.0, shifted).unwrap();
        let fit = estimate_cmllr(&g, &frames, 10).unwrap();
        let identity_ll: f64 = frames.rows().map(|y| g.log_likelihood(y).unwrap()).sum();
        assert!(*fit.log_likelihoods.last().unwrap() >= identity_ll);
        check_monotone(&fit);
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        let g = DiagonalGmm::standard_normal(2).unwrap();
        let empty = FrameMatrix::empty(2, 10.0).unwrap();
        assert!(matches!(estimate_cmllr(&g, &empty, 5), Err(Error::EmptyInput(_))));
        // Every frame identical: the row statistics have rank one.
        let flat = FrameMatrix::new(2, 10.0, [1.0, 2.0].repeat(50)).unwrap();
        assert!(matches!(estimate_cmllr(&g, &flat, 5), Err(Error::Conditioning { row: 0, .. })));
    }

    fn sample_gmm(rng: &mut ChaCha8Rng, g: &DiagonalGmm, n: usize) -> FrameMatrix {
        let d = g.dims();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = g.num_components() - 1;
            for (c, w) in g.weights().iter().enumerate() {
                acc += w;
                if u < acc {
                    k = c;
                    break;
                }
            }
            for i in 0..d {
                data.push(g.mean(k)[i] + g.var(k)[i].sqrt() * rng.sample::<f64, _>(StandardNormal));
            }
        }
        FrameMatrix::new(d, 10.0, data).unwrap()
    }

    fn check_monotone(fit: &CmllrFit) {
        for w in fit.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "likelihood fell: {w:?}");
        }
        for pass in &fit.auxiliary {
            for w in pass.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "auxiliary fell: {w:?}");
            }
        }
    }
}
