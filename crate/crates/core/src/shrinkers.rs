//! Eigenvalue shrinkers and the precision-matrix estimators they induce.
//!
//! A shrinker maps each sample-covariance eigenvalue to an eigenvalue of the
//! precision estimate. It must vanish on the noise bulk `[0, sigma^2 lambda_+]`
//! and be continuous above it.

use std::fmt;
use std::sync::Arc;

use faer::{Mat, MatRef};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::EigenSystem;
use crate::rmt::{ell_inv_unchecked, AspectRatio};

/// Grid size used to validate custom shrinkers.
pub const CUSTOM_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Classical,
    Optimal,
    Custom,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Classical => "classical",
            RuleKind::Optimal => "optimal",
            RuleKind::Custom => "custom",
        }
    }
}

/// Where the optimal shrinker starts to be nonzero.
///
/// `BulkEdge` thresholds at `sigma^2 (1 + sqrt(beta))^2`, the only choice that
/// makes it a shrinker. `EllPlus` thresholds at `sigma^2 sqrt(beta)` and, for
/// rescaled eigenvalues between `sqrt(beta)` and the bulk edge, uses the edge
/// value `sqrt(beta)` of the spike inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdVariant {
    #[default]
    BulkEdge,
    EllPlus,
}

type CustomFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ShrinkageRule {
    kind: RuleKind,
    sigma: f64,
    beta: Option<AspectRatio>,
    threshold: ThresholdVariant,
    custom: Option<CustomFn>,
}

impl fmt::Debug for ShrinkageRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShrinkageRule")
            .field("kind", &self.kind)
            .field("sigma", &self.sigma)
            .field("beta", &self.beta)
            .field("threshold", &self.threshold)
            .finish()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("sigma", sigma, "finite and > 0"))
    }
}

impl ShrinkageRule {
    /// `1 / (lambda - sigma^2)` above `sigma^2`: the pseudo-inverse of `S - sigma^2 I`.
    pub fn classical(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(ShrinkageRule {
            kind: RuleKind::Classical,
            sigma,
            beta: None,
            threshold: ThresholdVariant::BulkEdge,
            custom: None,
        })
    }

    pub fn optimal(sigma: f64, beta: AspectRatio) -> Result<Self> {
        Self::optimal_with_threshold(sigma, beta, ThresholdVariant::BulkEdge)
    }

    pub fn optimal_with_threshold(
        sigma: f64,
        beta: AspectRatio,
        threshold: ThresholdVariant,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(ShrinkageRule {
            kind: RuleKind::Optimal,
            sigma,
            beta: Some(beta),
            threshold,
            custom: None,
        })
    }

    /// A user-supplied shrinker, checked on a grid over `[0, 10 sigma^2 lambda_+]`:
    /// it must be zero on the bulk, finite and nonnegative above it, and free of
    /// jumps that persist under bisection.
    pub fn custom<F>(sigma: f64, beta: AspectRatio, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_sigma(sigma)?;
        validate_custom(&f, sigma * sigma * beta.lambda_plus())?;
        Ok(ShrinkageRule {
            kind: RuleKind::Custom,
            sigma,
            beta: Some(beta),
            threshold: ThresholdVariant::BulkEdge,
            custom: Some(Arc::new(f)),
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> Option<AspectRatio> {
        self.beta
    }

    pub fn threshold(&self) -> ThresholdVariant {
        self.threshold
    }

    /// Largest eigenvalue that is mapped to zero.
    pub fn zero_region_end(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        match (self.kind, self.beta) {
            (RuleKind::Classical, _) => s2,
            (_, Some(b)) => match self.threshold {
                ThresholdVariant::BulkEdge => s2 * b.lambda_plus(),
                ThresholdVariant::EllPlus => s2 * b.ell_plus(),
            },
            (_, None) => s2,
        }
    }

    pub fn eval(&self, lam: f64) -> Result<f64> {
        match self.kind {
            RuleKind::Classical => eta_classical(lam, self.sigma),
            RuleKind::Optimal => {
                let beta = self.beta.expect("optimal rule carries beta");
                match self.threshold {
                    ThresholdVariant::BulkEdge => eta_optimal(lam, self.sigma, beta),
                    ThresholdVariant::EllPlus => eta_optimal_ell_plus(lam, self.sigma, beta),
                }
            }
            RuleKind::Custom => {
                if !(lam >= 0.0) {
                    return Err(Error::domain("lambda", lam, "lambda >= 0"));
                }
                Ok((self.custom.as_ref().expect("custom rule carries fn"))(lam))
            }
        }
    }

    /// Applies the rule to every eigenvalue.
    pub fn eval_all(&self, values: &[f64]) -> Result<Vec<f64>> {
        values.iter().map(|&v| self.eval(v)).collect()
    }
}

fn validate_custom(f: &dyn Fn(f64) -> f64, edge: f64) -> Result<()> {
    let hi = 10.0 * edge;
    let step = hi / (CUSTOM_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..CUSTOM_GRID_POINTS).map(|k| k as f64 * step).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    for (&x, &v) in grid.iter().zip(&vals) {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidShrinker(format!(
                "value {v} at lambda = {x} is not finite and nonnegative"
            )));
        }
        if x <= edge && v != 0.0 {
            return Err(Error::InvalidShrinker(format!(
                "nonzero value {v} at lambda = {x} inside the bulk [0, {edge}]"
            )));
        }
    }
    for k in 0..grid.len() - 1 {
        let (a, b) = (grid[k], grid[k + 1]);
        if a <= edge {
            continue;
        }
        if let Some(x) = persistent_jump(f, a, vals[k], b, vals[k + 1]) {
            return Err(Error::InvalidShrinker(format!(
                "discontinuity near lambda = {x}"
            )));
        }
    }
    Ok(())
}

/// Bisects towards the larger half-jump; a continuous function's jump shrinks
/// with the interval, a discontinuity does not.
fn persistent_jump(
    f: &dyn Fn(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
) -> Option<f64> {
    let scale = 1.0 + fa.abs().max(fb.abs());
    if (fb - fa).abs() <= 1e-9 * scale {
        return None;
    }
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    if (fb - fa).abs() > 1e-6 * scale {
        Some(0.5 * (a + b))
    } else {
        None
    }
}

fn check_lambda(lam: f64) -> Result<()> {
    if lam >= 0.0 && lam.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("lambda", lam, "finite and >= 0"))
    }
}

pub fn eta_classical(lam: f64, sigma: f64) -> Result<f64> {
    check_lambda(lam)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    Ok(if lam > s2 { 1.0 / (lam - s2) } else { 0.0 })
}

/// Optimal shrinker at noise level `sigma`: invert the spike bias on the
/// rescaled eigenvalue and return the reciprocal spike, zero inside the bulk.
pub fn eta_optimal(lam: f64, sigma: f64, beta: AspectRatio) -> Result<f64> {
    check_lambda(lam)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    let x = lam / s2;
    Ok(if x > beta.lambda_plus() {
        1.0 / (s2 * ell_inv_unchecked(x, beta.value()))
    } else {
        0.0
    })
}

/// Variant of [`eta_optimal`] that switches on at `sigma^2 sqrt(beta)`.
pub fn eta_optimal_ell_plus(lam: f64, sigma: f64, beta: AspectRatio) -> Result<f64> {
    check_lambda(lam)?;
    check_sigma(sigma)?;
    let s2 = sigma * sigma;
    let x = lam / s2;
    Ok(if x > beta.ell_plus() {
        let x = x.max(beta.lambda_plus());
        1.0 / (s2 * ell_inv_unchecked(x, beta.value()))
    } else {
        0.0
    })
}

/// Precision-matrix estimate `V diag(eta(lambda_i)) V^T`.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    matrix: Mat<f64>,
}

impl PrecisionEstimate {
    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }
}

pub fn apply_rule(eig: &EigenSystem, rule: &ShrinkageRule) -> Result<PrecisionEstimate> {
    let weights = rule.eval_all(eig.values())?;
    Ok(PrecisionEstimate {
        matrix: eig.reconstruct_with(&weights)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{op_norm_diff, sym_eig, sym_eigvals};
    use approx::assert_abs_diff_eq;

    fn b(x: f64) -> AspectRatio {
        AspectRatio::new(x).unwrap()
    }

    fn diag(values: &[f64]) -> Mat<f64> {
        let p = values.len();
        Mat::from_fn(p, p, |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[test]
    fn classical_examples() {
        assert_eq!(eta_classical(3.0, 1.0).unwrap(), 0.5);
        assert_eq!(eta_classical(0.5, 1.0).unwrap(), 0.0);
        assert_eq!(eta_classical(4.0, 2.0).unwrap(), 0.0);
        assert!(eta_classical(-1.0, 1.0).is_err());
        assert!(eta_classical(1.0, 0.0).is_err());
    }

    #[test]
    fn optimal_examples() {
        assert_abs_diff_eq!(eta_optimal(4.5, 1.0, b(1.0)).unwrap(), 0.5, epsilon = 1e-14);
        assert_eq!(eta_optimal(3.9, 1.0, b(1.0)).unwrap(), 0.0);
        assert_eq!(eta_optimal(4.0, 1.0, b(1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            eta_optimal(18.0, 2.0, b(1.0)).unwrap(),
            0.125,
            epsilon = 1e-14
        );
        assert!(eta_optimal(-0.1, 1.0, b(1.0)).is_err());
    }

    #[test]
    fn ell_plus_variant() {
        let beta = b(1.0);
        assert_eq!(eta_optimal_ell_plus(0.9, 1.0, beta).unwrap(), 0.0);
        // Between sqrt(beta) and the bulk edge the edge value 1/sqrt(beta) is used.
        assert_abs_diff_eq!(
            eta_optimal_ell_plus(2.0, 1.0, beta).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            eta_optimal_ell_plus(4.5, 1.0, beta).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        let r =
            ShrinkageRule::optimal_with_threshold(1.0, beta, ThresholdVariant::EllPlus).unwrap();
        assert_eq!(r.zero_region_end(), 1.0);
    }

    #[test]
    fn aggressiveness_ordering() {
        // The optimal rule truncates more: its zero region strictly contains the
        // classical one. Above the edge it is larger than the classical rule,
        // since the recovered spike l(lambda) is below lambda - sigma^2.
        for &x in &[0.1, 0.5, 1.0] {
            let beta = b(x);
            for sigma in [0.5, 1.0, 2.0] {
                let opt = ShrinkageRule::optimal(sigma, beta).unwrap();
                let cls = ShrinkageRule::classical(sigma).unwrap();
                assert!(opt.zero_region_end() > cls.zero_region_end());
                let s2 = sigma * sigma;
                for k in 1..400 {
                    let lam = 0.01 * k as f64 * s2 * beta.lambda_plus();
                    let (o, c) = (opt.eval(lam).unwrap(), cls.eval(lam).unwrap());
                    if lam <= s2 * beta.lambda_plus() {
                        assert_eq!(o, 0.0);
                        if lam > s2 {
                            assert!(c > 0.0);
                        }
                    } else {
                        assert!(o > c, "beta={x} sigma={sigma} lam={lam}: {o} !> {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn optimal_exceeds_classical_near_the_edge() {
        let (o, c) = (
            eta_optimal(4.5, 1.0, b(1.0)).unwrap(),
            eta_classical(4.5, 1.0).unwrap(),
        );
        assert_abs_diff_eq!(c, 1.0 / 3.5, epsilon = 1e-15);
        assert!(o > c);
    }

    #[test]
    fn custom_validation() {
        let beta = b(1.0);
        let edge = beta.lambda_plus();
        let ok = ShrinkageRule::custom(1.0, beta, move |x| if x > edge { 1.0 / x } else { 0.0 });
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().eval(2.0).unwrap(), 0.0);
        let in_bulk = ShrinkageRule::custom(1.0, beta, |x| 1.0 / (1.0 + x));
        assert!(matches!(in_bulk, Err(Error::InvalidShrinker(_))));
        let negative = ShrinkageRule::custom(1.0, beta, move |x| if x > edge { -1.0 } else { 0.0 });
        assert!(negative.is_err());
        let jump = ShrinkageRule::custom(1.0, beta, move |x| {
            if x > 17.3 {
                0.1
            } else if x > edge {
                0.2
            } else {
                0.0
            }
        });
        assert!(matches!(jump, Err(Error::InvalidShrinker(_))));
        let steep = ShrinkageRule::custom(1.0, beta, move |x| {
            if x > edge {
                (x - edge).min(1.0) * 50.0
            } else {
                0.0
            }
        });
        assert!(steep.is_ok());
    }

    #[test]
    fn zero_rule_gives_zero_matrix() {
        let eig = sym_eig(diag(&[3.0, 2.0, 0.5]).as_ref()).unwrap();
        let rule = ShrinkageRule::optimal(1.0, b(1.0)).unwrap();
        let m = apply_rule(&eig, &rule).unwrap();
        assert!(m.matrix().col_iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn optimal_on_diagonal_spectrum() {
        let mut vals = vec![0.1; 5];
        vals[0] = 4.5;
        let eig = sym_eig(diag(&vals).as_ref()).unwrap();
        let rule = ShrinkageRule::optimal(1.0, b(1.0)).unwrap();
        let m = apply_rule(&eig, &rule).unwrap();
        let mut expect = vec![0.0; 5];
        expect[0] = 0.5;
        let d = op_norm_diff(m.matrix(), diag(&expect).as_ref()).unwrap();
        assert!(d < 1e-14);
    }

    #[test]
    fn classical_on_repeated_eigenvalue() {
        let eig = sym_eig(diag(&[3.0, 3.0]).as_ref()).unwrap();
        let m = apply_rule(&eig, &ShrinkageRule::classical(1.0).unwrap()).unwrap();
        assert!(op_norm_diff(m.matrix(), diag(&[0.5, 0.5]).as_ref()).unwrap() < 1e-14);
    }

    #[test]
    fn spectral_mapping() {
        let eig = sym_eig(diag(&[9.0, 6.0, 5.0, 1.0]).as_ref()).unwrap();
        let rule = ShrinkageRule::optimal(1.0, b(0.5)).unwrap();
        let m = apply_rule(&eig, &rule).unwrap();
        let got = sym_eigvals(m.matrix()).unwrap();
        let mut want = rule.eval_all(eig.values()).unwrap();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-10);
        }
    }
}
