use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{truth_from_spikes, GroundTruth, SampleSet};
use crate::rmt::SpikedModel;

/// How the noise level enters the observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScaling {
    /// `y = x + sigma * xi`.
    #[default]
    Sigma,
    /// `y = x + sigma^2 * xi`.
    SigmaSquared,
}

impl NoiseScaling {
    pub fn amplitude(self, sigma: f64) -> f64 {
        match self {
            NoiseScaling::Sigma => sigma,
            NoiseScaling::SigmaSquared => sigma * sigma,
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` folded into the columns of `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Mat<f64> {
    let mut g = Mat::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            g[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Draws `n` observations `y_i = A x_i + noise` with `x_i` supported on the
/// first `d` coordinates with variances `l_1, ..., l_d`.
///
/// Only the first `d` columns of `rotation` enter the model; they become the
/// population spike directions.
pub fn gen_spiked_sample<R: Rng + ?Sized>(
    model: &SpikedModel,
    n: usize,
    rotation: MatRef<'_, f64>,
    noise: NoiseScaling,
    rng: &mut R,
) -> Result<(SampleSet, GroundTruth)> {
    let p = rotation.nrows();
    if rotation.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "rotation rows vs columns",
            left: p,
            right: rotation.ncols(),
        });
    }
    let d = model.rank();
    if d > p {
        return Err(Error::Config(format!(
            "{d} spikes do not fit in dimension {p}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let basis = rotation.subcols(0, d);
    let truth = truth_from_spikes(model, basis)?;

    let amp = noise.amplitude(model.sigma());
    let sd: Vec<f64> = model.spikes().iter().map(|l| l.sqrt()).collect();
    let mut latent = Mat::<f64>::zeros(n, d);
    let mut data = Mat::<f64>::zeros(n, p);
    for i in 0..n {
        for k in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            latent[(i, k)] = sd[k] * z;
        }
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            data[(i, j)] = amp * e;
        }
    }
    if d > 0 {
        data += &latent * basis.transpose();
    }
    Ok((SampleSet::new(data, vec![0.0; p])?, truth))
}

/// Coefficients of the paraboloid `x_3 = a s^2 + b t^2`.
pub const PARABOLOID_COEFFS: (f64, f64) = (4.0 / 9.0, 5.0 / 9.0);

/// Two-dimensional paraboloid chart `(s, t) -> [s, t, 4(s/3)^2 + 5(t/3)^2, 0, ...]`
/// in `R^p`, sampled with `s, t` uniform on `range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Paraboloid {
    pub p: usize,
    pub range: (f64, f64),
}

impl Paraboloid {
    pub fn new(p: usize, range: (f64, f64)) -> Result<Self> {
        if p < 3 {
            return Err(Error::Config(format!("paraboloid needs p >= 3, got {p}")));
        }
        if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
            return Err(Error::Config(format!("invalid parameter range {range:?}")));
        }
        Ok(Paraboloid { p, range })
    }

    pub fn point(&self, s: f64, t: f64) -> Vec<f64> {
        let (a, b) = PARABOLOID_COEFFS;
        let mut x = vec![0.0; self.p];
        x[0] = s;
        x[1] = t;
        x[2] = a * s * s + b * t * t;
        x
    }

    /// `E[u^k]` for `u` uniform on the parameter range.
    fn moment(&self, k: i32) -> f64 {
        let (lo, hi) = self.range;
        (hi.powi(k + 1) - lo.powi(k + 1)) / ((k + 1) as f64 * (hi - lo))
    }

    /// Population mean of the clean points.
    pub fn mean(&self) -> Vec<f64> {
        let (a, b) = PARABOLOID_COEFFS;
        let (m1, m2) = (self.moment(1), self.moment(2));
        let mut mu = vec![0.0; self.p];
        mu[0] = m1;
        mu[1] = m1;
        mu[2] = (a + b) * m2;
        mu
    }

    /// Population covariance of the clean points, from the uniform moments.
    pub fn covariance(&self) -> Mat<f64> {
        let (a, b) = PARABOLOID_COEFFS;
        let (m1, m2, m3, m4) = (
            self.moment(1),
            self.moment(2),
            self.moment(3),
            self.moment(4),
        );
        let var_u = m2 - m1 * m1;
        let cov_u_u2 = m3 - m1 * m2;
        let var_u2 = m4 - m2 * m2;
        let mut c = Mat::<f64>::zeros(self.p, self.p);
        c[(0, 0)] = var_u;
        c[(1, 1)] = var_u;
        c[(0, 2)] = a * cov_u_u2;
        c[(2, 0)] = a * cov_u_u2;
        c[(1, 2)] = b * cov_u_u2;
        c[(2, 1)] = b * cov_u_u2;
        c[(2, 2)] = (a * a + b * b) * var_u2;
        c
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        GroundTruth::from_covariance(self.covariance().as_ref(), 1e-12)
    }
}

/// Draws `n` noisy points from the paraboloid. The returned sample carries
/// the population mean of the clean points.
pub fn gen_manifold_sample<R: Rng + ?Sized>(
    chart: &Paraboloid,
    n: usize,
    sigma: f64,
    noise: NoiseScaling,
    rng: &mut R,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(sigma >= 0.0) {
        return Err(Error::domain("sigma", sigma, "sigma >= 0"));
    }
    let p = chart.p;
    let amp = noise.amplitude(sigma);
    let (lo, hi) = chart.range;
    let uniform = Uniform::new(lo, hi).map_err(|e| Error::Config(e.to_string()))?;
    let (a, b) = PARABOLOID_COEFFS;
    let mut data = Mat::<f64>::zeros(n, p);
    for i in 0..n {
        let s = uniform.sample(rng);
        let t = uniform.sample(rng);
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            data[(i, j)] = amp * e;
        }
        data[(i, 0)] += s;
        data[(i, 1)] += t;
        data[(i, 2)] += a * s * s + b * t * t;
    }
    SampleSet::new(data, chart.mean())
}
