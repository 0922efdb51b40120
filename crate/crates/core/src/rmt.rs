//! Closed-form asymptotics of the spiked covariance model.
//!
//! All functions here work at unit noise level. Sample eigenvalues of a
//! spike `alpha` converge to [`lambda_fwd`], the population spike is recovered
//! from a sample eigenvalue by [`ell_inv`], and [`delta_loss`] gives the
//! limiting operator-norm loss contributed by one spike when its sample
//! eigenvalue is mapped to `zeta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::shrinkers::ShrinkageRule;

/// Limiting dimension-to-sample ratio `p / n`, restricted to `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 && beta <= 1.0 {
            Ok(AspectRatio(beta))
        } else {
            Err(Error::domain("beta", beta, "0 < beta <= 1"))
        }
    }

    /// Ratio `p / n` for concrete dimensions.
    pub fn from_dims(p: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        Self::new(p as f64 / n as f64)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Detectability threshold `sqrt(beta)`.
    #[inline]
    pub fn ell_plus(self) -> f64 {
        self.0.sqrt()
    }

    /// Upper bulk edge `(1 + sqrt(beta))^2`.
    #[inline]
    pub fn lambda_plus(self) -> f64 {
        let r = 1.0 + self.0.sqrt();
        r * r
    }

    /// Lower bulk edge `(1 - sqrt(beta))^2`.
    #[inline]
    pub fn lambda_minus(self) -> f64 {
        let r = 1.0 - self.0.sqrt();
        r * r
    }
}

impl TryFrom<f64> for AspectRatio {
    type Error = Error;

    fn try_from(beta: f64) -> Result<Self> {
        AspectRatio::new(beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BulkEdges {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub ell_plus: f64,
}

pub fn bulk_edges(beta: AspectRatio) -> BulkEdges {
    BulkEdges {
        lambda_minus: beta.lambda_minus(),
        lambda_plus: beta.lambda_plus(),
        ell_plus: beta.ell_plus(),
    }
}

/// Marchenko-Pastur density of the null-case sample spectrum.
///
/// Zero off the support and at both edges.
pub fn mp_density(x: f64, beta: AspectRatio) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("x", x, "x >= 0"));
    }
    let (lo, hi) = (beta.lambda_minus(), beta.lambda_plus());
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    let b = beta.value();
    Ok(((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * b * x))
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite and >= 0"))
    }
}

/// Almost-sure limit of the sample eigenvalue belonging to population spike `alpha`.
pub fn lambda_fwd(alpha: f64, beta: AspectRatio) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    if alpha > beta.ell_plus() {
        let b = beta.value();
        Ok(1.0 + alpha + b + b / alpha)
    } else {
        Ok(beta.lambda_plus())
    }
}

/// Inverse of [`lambda_fwd`] on its supercritical branch.
///
/// Only defined strictly above the bulk edge; callers that want zero inside
/// the bulk should go through a shrinker.
pub fn ell_inv(lam: f64, beta: AspectRatio) -> Result<f64> {
    if !(lam > beta.lambda_plus()) || !lam.is_finite() {
        return Err(Error::domain("lambda", lam, "lambda > (1 + sqrt(beta))^2"));
    }
    Ok(ell_inv_unchecked(lam, beta.value()))
}

/// Discriminant is analytically nonnegative above the edge; clamp round-off.
#[inline]
pub(crate) fn ell_inv_unchecked(lam: f64, beta: f64) -> f64 {
    let b = lam + 1.0 - beta;
    let disc = (b * b - 4.0 * lam).max(0.0);
    (b + disc.sqrt()) / 2.0 - 1.0
}

/// Squared cosine between the top sample and population eigenvectors.
fn cosine_sq(alpha: f64, beta: f64) -> f64 {
    (alpha * alpha - beta) / (alpha * alpha + beta * alpha)
}

/// Squared sine, written as `beta (1 + alpha) / (alpha (alpha + beta))` to avoid
/// cancellation in `1 - c^2` for strong spikes.
fn sine_sq(alpha: f64, beta: f64) -> f64 {
    beta * (1.0 + alpha) / (alpha * (alpha + beta))
}

/// Limiting cosine of the angle between sample and population eigenvectors.
pub fn cosine(alpha: f64, beta: AspectRatio) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    if alpha > beta.ell_plus() {
        Ok(cosine_sq(alpha, beta.value()).clamp(0.0, 1.0).sqrt())
    } else {
        Ok(0.0)
    }
}

/// Limiting sine, `sqrt(1 - cosine^2)`.
pub fn sine(alpha: f64, beta: AspectRatio) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    if alpha > beta.ell_plus() {
        Ok(sine_sq(alpha, beta.value()).clamp(0.0, 1.0).sqrt())
    } else {
        Ok(1.0)
    }
}

/// The two eigenvalues `(u_plus, u_minus)` of the 2x2 block difference for a
/// supercritical spike `alpha` whose sample eigenvalue is shrunk to `zeta`.
pub fn loss_branches(alpha: f64, zeta: f64, beta: AspectRatio) -> Result<(f64, f64)> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("zeta", zeta)?;
    if !(alpha > beta.ell_plus()) {
        return Err(Error::domain("alpha", alpha, "alpha > sqrt(beta)"));
    }
    Ok(branches(alpha, zeta, beta.value()))
}

fn branches(alpha: f64, zeta: f64, beta: f64) -> (f64, f64) {
    let a = 1.0 / alpha - zeta;
    let root = (a * a + 4.0 * zeta * sine_sq(alpha, beta) / alpha).sqrt();
    (0.5 * (a + root), 0.5 * (a - root))
}

/// Asymptotic loss of a single spike `alpha` whose sample eigenvalue is mapped to `zeta`.
pub fn delta_loss(alpha: f64, zeta: f64, beta: AspectRatio) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("zeta", zeta)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha <= beta.ell_plus() {
        return Ok(1.0 / alpha);
    }
    let (u_plus, u_minus) = branches(alpha, zeta, beta.value());
    if zeta <= 1.0 / alpha {
        Ok(u_plus)
    } else {
        Ok(-u_minus)
    }
}

/// Loss of the optimal shrinker for a single spike: `s(alpha) / alpha` above
/// the detection threshold, `1 / alpha` below it.
pub fn optimal_delta(alpha: f64, beta: AspectRatio) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    if alpha == 0.0 {
        Ok(0.0)
    } else if alpha <= beta.ell_plus() {
        Ok(1.0 / alpha)
    } else {
        Ok(sine_sq(alpha, beta.value()).sqrt() / alpha)
    }
}

/// Population description of the spiked model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikedModel {
    spikes: Vec<f64>,
    sigma: f64,
    beta: AspectRatio,
}

impl SpikedModel {
    /// Spikes must be strictly positive and strictly decreasing.
    pub fn new(spikes: Vec<f64>, sigma: f64, beta: AspectRatio) -> Result<Self> {
        Self::validate_spikes(&spikes, true)?;
        check_nonneg("sigma", sigma)?;
        Ok(SpikedModel {
            spikes,
            sigma,
            beta,
        })
    }

    /// Like [`SpikedModel::new`] but only requires the spikes to be
    /// nonincreasing, so repeated spikes are allowed.
    pub fn with_ties(spikes: Vec<f64>, sigma: f64, beta: AspectRatio) -> Result<Self> {
        Self::validate_spikes(&spikes, false)?;
        check_nonneg("sigma", sigma)?;
        Ok(SpikedModel {
            spikes,
            sigma,
            beta,
        })
    }

    fn validate_spikes(spikes: &[f64], strict: bool) -> Result<()> {
        for &s in spikes {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::domain("spike", s, "finite and > 0"));
            }
        }
        for w in spikes.windows(2) {
            let ok = if strict { w[0] > w[1] } else { w[0] >= w[1] };
            if !ok {
                return Err(Error::Config(format!(
                    "spikes must be decreasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Spikes `d, d-1, ..., 1`.
    pub fn integer_spikes(d: usize, sigma: f64, beta: AspectRatio) -> Result<Self> {
        Self::new((1..=d).rev().map(|i| i as f64).collect(), sigma, beta)
    }

    pub fn spikes(&self) -> &[f64] {
        &self.spikes
    }

    pub fn rank(&self) -> usize {
        self.spikes.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> AspectRatio {
        self.beta
    }

    /// Noise level at which spike `ell` sinks to the detection threshold:
    /// `ell / sigma^2 = sqrt(beta)`.
    pub fn critical_sigma(&self, ell: f64) -> f64 {
        (ell / self.beta.ell_plus()).sqrt()
    }
}

/// One evaluation of the asymptotic loss surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossSurfacePoint {
    pub alpha: f64,
    pub zeta: f64,
    pub value: f64,
}

impl LossSurfacePoint {
    pub fn evaluate(alpha: f64, zeta: f64, beta: AspectRatio) -> Result<Self> {
        Ok(LossSurfacePoint {
            alpha,
            zeta,
            value: delta_loss(alpha, zeta, beta)?,
        })
    }
}

/// Asymptotic operator-norm loss of `rule` under `model`.
///
/// Spikes are rescaled to unit noise, each contributes
/// `delta_loss(l', sigma^2 * rule(sigma^2 * lambda_fwd(l'))) / sigma^2`,
/// and the loss is the largest contribution (zero for the null model).
pub fn asymptotic_loss(rule: &ShrinkageRule, model: &SpikedModel) -> Result<f64> {
    let sigma2 = model.sigma * model.sigma;
    if model.spikes.is_empty() {
        return Ok(0.0);
    }
    if !(sigma2 > 0.0) {
        return Err(Error::domain("sigma", model.sigma, "sigma > 0"));
    }
    let beta = model.beta;
    let mut worst = 0.0_f64;
    for &ell in &model.spikes {
        let scaled = ell / sigma2;
        let lam = lambda_fwd(scaled, beta)?;
        let zeta = sigma2 * rule.eval(sigma2 * lam)?;
        worst = worst.max(delta_loss(scaled, zeta, beta)? / sigma2);
    }
    Ok(worst)
}
