//! Dense symmetric linear algebra on top of `faer`.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::rmt::SpikedModel;

/// Tolerance for "symmetric" inputs, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Tolerance on `max |V^T V - I|` for eigenvector matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Tolerance on `max |U^T U - I|` for spike directions.
pub const BASIS_TOL: f64 = 1e-10;

/// `n` observations in dimension `p` together with the known population mean.
#[derive(Debug, Clone)]
pub struct SampleSet {
    data: Mat<f64>,
    mean: Vec<f64>,
}

impl SampleSet {
    /// Rows of `data` are observations.
    pub fn new(data: Mat<f64>, mean: Vec<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptySample);
        }
        if mean.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                what: "mean length vs data columns",
                left: mean.len(),
                right: data.ncols(),
            });
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                if !data[(i, j)].is_finite() {
                    return Err(Error::domain("data entry", data[(i, j)], "finite"));
                }
            }
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mean must be finite".into()));
        }
        Ok(SampleSet { data, mean })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// `(1/n) sum_i (y_i - mu)(y_i - mu)^T` with the known mean.
pub fn sample_covariance(s: &SampleSet) -> Mat<f64> {
    let (n, p) = (s.n(), s.p());
    let centered = Mat::from_fn(n, p, |i, j| s.data[(i, j)] - s.mean[j]);
    let mut cov = centered.transpose() * &centered;
    let scale = 1.0 / n as f64;
    for j in 0..p {
        for i in j..p {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]) * scale;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut out = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

fn check_square(m: MatRef<'_, f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "matrix rows vs columns",
            left: m.nrows(),
            right: m.ncols(),
        });
    }
    Ok(())
}

fn check_symmetric(m: MatRef<'_, f64>) -> Result<()> {
    check_square(m)?;
    let scale = max_abs(m).max(1.0);
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d.is_nan() {
                return Err(Error::NotSymmetric(f64::NAN));
            }
            worst = worst.max(d);
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// `max |Q^T Q - I|` over all entries.
pub fn orthonormality_residual(q: MatRef<'_, f64>) -> f64 {
    let gram = q.transpose() * q;
    let mut worst = 0.0_f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

impl EigenSystem {
    /// Validates ordering and orthonormality.
    pub fn new(values: Vec<f64>, vectors: Mat<f64>) -> Result<Self> {
        check_square(vectors.as_ref())?;
        if values.len() != vectors.ncols() {
            return Err(Error::DimensionMismatch {
                what: "eigenvalue count vs eigenvector columns",
                left: values.len(),
                right: vectors.ncols(),
            });
        }
        if values.windows(2).any(|w| !(w[0] >= w[1])) {
            return Err(Error::Config(
                "eigenvalues must be sorted descending".into(),
            ));
        }
        let resid = orthonormality_residual(vectors.as_ref());
        if !(resid <= ORTHONORMAL_TOL) {
            return Err(Error::NotOrthonormal(resid));
        }
        Ok(EigenSystem { values, vectors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Sets negative eigenvalues to zero. Covariance matrices are PSD, so
    /// anything below zero is round-off.
    pub fn clamp_nonnegative(mut self) -> Self {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self
    }

    /// `V diag(weights) V^T`, symmetrized.
    pub fn reconstruct_with(&self, weights: &[f64]) -> Result<Mat<f64>> {
        if weights.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "weights vs eigenpairs",
                left: weights.len(),
                right: self.dim(),
            });
        }
        let p = self.dim();
        let active: Vec<usize> = (0..p).filter(|&k| weights[k] != 0.0).collect();
        if active.is_empty() {
            return Ok(Mat::zeros(p, p));
        }
        let k = active.len();
        let basis = Mat::from_fn(p, k, |i, c| self.vectors[(i, active[c])]);
        let scaled = Mat::from_fn(p, k, |i, c| basis[(i, c)] * weights[active[c]]);
        let mut out = &scaled * basis.transpose();
        symmetrize(&mut out);
        Ok(out)
    }
}

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut Mat<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Flip each column so its largest-magnitude entry is positive (first index on ties).
fn canonicalize_signs(v: &mut Mat<f64>) {
    for j in 0..v.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..v.nrows() {
            let a = v[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if v[(best, j)] < 0.0 {
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eig(m: MatRef<'_, f64>) -> Result<EigenSystem> {
    check_symmetric(m)?;
    let p = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order.
    let values: Vec<f64> = (0..p).rev().map(|k| s[k]).collect();
    let mut vectors = Mat::from_fn(p, p, |i, c| u[(i, p - 1 - c)]);
    canonicalize_signs(&mut vectors);
    Ok(EigenSystem { values, vectors })
}

/// Eigenvalues only, descending.
pub fn sym_eigvals(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    vals.reverse();
    Ok(vals)
}

/// Eigendecomposition of a sample covariance with negative round-off clamped.
pub fn covariance_eigen(s: &SampleSet) -> Result<EigenSystem> {
    Ok(sym_eig(sample_covariance(s).as_ref())?.clamp_nonnegative())
}

/// Spectral norm of `a - b` for symmetric `a`, `b`.
pub fn op_norm_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            what: "operand shapes",
            left: a.nrows() * a.ncols(),
            right: b.nrows() * b.ncols(),
        });
    }
    check_symmetric(a)?;
    check_symmetric(b)?;
    let mut diff = a - b;
    symmetrize(&mut diff);
    spectral_radius(diff.as_ref())
}

fn spectral_radius(m: MatRef<'_, f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let vals = sym_eigvals(m)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// `(z - mu)^T m (z - mu)`.
pub fn mahalanobis_sq(z: &[f64], mu: &[f64], m: MatRef<'_, f64>) -> Result<f64> {
    if z.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            what: "point vs mean",
            left: z.len(),
            right: mu.len(),
        });
    }
    if m.nrows() != z.len() || m.ncols() != z.len() {
        return Err(Error::DimensionMismatch {
            what: "point vs matrix",
            left: z.len(),
            right: m.nrows(),
        });
    }
    let d: Vec<f64> = z.iter().zip(mu).map(|(a, b)| a - b).collect();
    let mut acc = 0.0;
    for j in 0..d.len() {
        if d[j] == 0.0 {
            continue;
        }
        let mut col = 0.0;
        for i in 0..d.len() {
            col += m[(i, j)] * d[i];
        }
        acc += d[j] * col;
    }
    Ok(acc)
}

/// Low-rank population covariance of the clean signal and its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    sigma_x: Mat<f64>,
    pseudo_inverse: Mat<f64>,
    basis: Mat<f64>,
    spikes: Vec<f64>,
}

impl GroundTruth {
    pub fn sigma_x(&self) -> MatRef<'_, f64> {
        self.sigma_x.as_ref()
    }

    pub fn pseudo_inverse(&self) -> MatRef<'_, f64> {
        self.pseudo_inverse.as_ref()
    }

    /// Orthonormal `p x d` basis of the signal subspace.
    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    pub fn spikes(&self) -> &[f64] {
        &self.spikes
    }

    pub fn rank(&self) -> usize {
        self.spikes.len()
    }

    pub fn dim(&self) -> usize {
        self.sigma_x.nrows()
    }

    fn assemble(basis: Mat<f64>, spikes: Vec<f64>) -> Self {
        let p = basis.nrows();
        let d = spikes.len();
        let (sigma_x, pseudo_inverse) = if d == 0 {
            (Mat::zeros(p, p), Mat::zeros(p, p))
        } else {
            let fwd = Mat::from_fn(p, d, |i, k| basis[(i, k)] * spikes[k]);
            let inv = Mat::from_fn(p, d, |i, k| basis[(i, k)] / spikes[k]);
            let mut sx = &fwd * basis.transpose();
            let mut si = &inv * basis.transpose();
            symmetrize(&mut sx);
            symmetrize(&mut si);
            (sx, si)
        };
        GroundTruth {
            sigma_x,
            pseudo_inverse,
            basis,
            spikes,
        }
    }

    /// Ground truth from an explicit PSD covariance; eigenvalues at or below
    /// `rel_tol * lambda_max` are treated as zero.
    pub fn from_covariance(sigma_x: MatRef<'_, f64>, rel_tol: f64) -> Result<Self> {
        let eig = sym_eig(sigma_x)?;
        let p = eig.dim();
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let cutoff = rel_tol * top;
        let d = eig
            .values
            .iter()
            .take_while(|&&v| v > cutoff && v > 0.0)
            .count();
        let basis = Mat::from_fn(p, d, |i, k| eig.vectors[(i, k)]);
        let spikes = eig.values[..d].to_vec();
        let mut out = Self::assemble(basis, spikes);
        // Keep the caller's matrix rather than the rank-truncated reconstruction.
        out.sigma_x = sigma_x.to_owned();
        symmetrize(&mut out.sigma_x);
        Ok(out)
    }
}

/// `Sigma_X = U diag(l) U^T` and `Sigma_X^+ = U diag(1/l) U^T`.
pub fn truth_from_spikes(model: &SpikedModel, u: MatRef<'_, f64>) -> Result<GroundTruth> {
    if u.ncols() != model.rank() {
        return Err(Error::DimensionMismatch {
            what: "spike directions vs spike count",
            left: u.ncols(),
            right: model.rank(),
        });
    }
    if u.ncols() > 0 {
        let resid = orthonormality_residual(u);
        if !(resid <= BASIS_TOL) {
            return Err(Error::NotOrthonormal(resid));
        }
    }
    Ok(GroundTruth::assemble(u.to_owned(), model.spikes().to_vec()))
}

/// `|| Sigma_X^+ - V diag(weights) V^T ||_op` computed in the sample
/// eigenbasis, where the estimator is diagonal.
///
/// Equal to `op_norm_diff(truth.pseudo_inverse(), eig.reconstruct_with(weights))`
/// by orthogonal invariance, without forming either `p x p` matrix in the
/// standard basis.
pub fn shrinkage_loss(truth: &GroundTruth, eig: &EigenSystem, weights: &[f64]) -> Result<f64> {
    let p = eig.dim();
    if truth.dim() != p {
        return Err(Error::DimensionMismatch {
            what: "truth vs eigensystem dimension",
            left: truth.dim(),
            right: p,
        });
    }
    if weights.len() != p {
        return Err(Error::DimensionMismatch {
            what: "weights vs eigenpairs",
            left: weights.len(),
            right: p,
        });
    }
    let d = truth.rank();
    let mut c = if d == 0 {
        Mat::zeros(p, p)
    } else {
        let g = eig.vectors.transpose() * &truth.basis;
        let scaled = Mat::from_fn(p, d, |i, k| g[(i, k)] / truth.spikes[k]);
        &scaled * g.transpose()
    };
    for k in 0..p {
        c[(k, k)] -= weights[k];
    }
    symmetrize(&mut c);
    spectral_radius(c.as_ref())
}
