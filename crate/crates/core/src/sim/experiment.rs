use faer::Mat;
use serde::Serialize;

use super::generate::{
    gen_manifold_sample, gen_spiked_sample, haar_orthogonal, NoiseScaling, Paraboloid,
};
use super::rng::{rep_rng, stream_rng};
use super::stats::{summarize, Summary};
use crate::error::{Error, Result};
use crate::linalg::{
    covariance_eigen, mahalanobis_sq, sample_covariance, shrinkage_loss, sym_eigvals,
};
use crate::par::{map_indexed, Execution};
use crate::rmt::{asymptotic_loss, AspectRatio, SpikedModel};
use crate::shrinkers::{apply_rule, RuleKind, ShrinkageRule, ThresholdVariant};

/// Excess losses at or below this are clamped before taking `log10`.
pub const LOG_EXCESS_FLOOR: f64 = 1e-12;

/// Rules compared in both experiments, in output order.
pub const COMPARED_RULES: [RuleKind; 2] = [RuleKind::Classical, RuleKind::Optimal];

fn build_rule(
    kind: RuleKind,
    sigma: f64,
    beta: AspectRatio,
    threshold: ThresholdVariant,
) -> Result<ShrinkageRule> {
    match kind {
        RuleKind::Classical => ShrinkageRule::classical(sigma),
        RuleKind::Optimal => ShrinkageRule::optimal_with_threshold(sigma, beta, threshold),
        RuleKind::Custom => Err(Error::Config(
            "custom rules are not part of the experiments".into(),
        )),
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if grid.len() >= 1 << 16 {
        return Err(Error::Config(format!("{name} grid is too long")));
    }
    Ok(())
}

fn check_sigmas(grid: &[f64]) -> Result<()> {
    check_grid("sigma", grid)?;
    if let Some(&bad) = grid.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::domain("sigma", bad, "sigma > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikedExperimentConfig {
    pub n: usize,
    pub beta_grid: Vec<f64>,
    /// Population spikes, descending.
    pub spikes: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    pub noise_scaling: NoiseScaling,
    pub threshold: ThresholdVariant,
}

impl Default for SpikedExperimentConfig {
    fn default() -> Self {
        SpikedExperimentConfig {
            n: 300,
            beta_grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            spikes: vec![1.0],
            sigma_grid: (1..=8).map(|k| 0.225 * k as f64).collect(),
            reps: 200,
            master_seed: 0,
            noise_scaling: NoiseScaling::Sigma,
            threshold: ThresholdVariant::BulkEdge,
        }
    }
}

impl SpikedExperimentConfig {
    /// Default configuration with spikes `d, d-1, ..., 1`.
    pub fn with_rank(d: usize) -> Self {
        SpikedExperimentConfig {
            spikes: (1..=d).rev().map(|i| i as f64).collect(),
            ..Default::default()
        }
    }

    /// Dimension used for aspect ratio `beta`: `round(beta * n)`.
    pub fn dim_for(&self, beta: f64) -> usize {
        (beta * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        check_grid("beta", &self.beta_grid)?;
        check_sigmas(&self.sigma_grid)?;
        for &b in &self.beta_grid {
            AspectRatio::new(b)?;
            let p = self.dim_for(b);
            if p == 0 || p < self.spikes.len() {
                return Err(Error::Config(format!(
                    "beta = {b} with n = {} gives p = {p}, too small for {} spikes",
                    self.n,
                    self.spikes.len()
                )));
            }
        }
        SpikedModel::new(self.spikes.clone(), 1.0, AspectRatio::new(1.0)?)?;
        Ok(())
    }
}

/// Per-rule losses in one `(beta, sigma)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleLosses {
    pub rule: RuleKind,
    pub losses: Vec<f64>,
    pub summary: Summary,
    /// `log10(max(L_n - L_opt, floor))` per repetition.
    pub log_excess: Vec<f64>,
    pub log_excess_summary: Summary,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikedCell {
    pub beta: f64,
    pub sigma: f64,
    pub n: usize,
    pub p: usize,
    /// Asymptotic loss of the optimal shrinker for this cell.
    pub theoretical_optimal_loss: f64,
    /// Noise level at which each spike reaches the detection threshold.
    pub critical_sigma: Vec<f64>,
    pub rules: Vec<RuleLosses>,
}

impl SpikedCell {
    pub fn rule(&self, kind: RuleKind) -> Option<&RuleLosses> {
        self.rules.iter().find(|r| r.rule == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub config: SpikedExperimentConfig,
    pub cells: Vec<SpikedCell>,
}

impl LossReport {
    pub fn cell(&self, beta: f64, sigma: f64) -> Option<&SpikedCell> {
        self.cells
            .iter()
            .find(|c| (c.beta - beta).abs() < 1e-12 && (c.sigma - sigma).abs() < 1e-12)
    }
}

fn log_excess(losses: &[f64], reference: f64) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let logs = losses
        .iter()
        .map(|&l| {
            let diff = l - reference;
            if diff < LOG_EXCESS_FLOOR {
                clamped += 1;
                LOG_EXCESS_FLOOR.log10()
            } else {
                diff.log10()
            }
        })
        .collect();
    (logs, clamped)
}

/// One repetition of the spiked experiment: Haar rotation, data, sample
/// covariance, then the operator-norm loss of each compared rule.
fn spiked_rep(
    cfg: &SpikedExperimentConfig,
    model: &SpikedModel,
    rules: &[ShrinkageRule],
    p: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<f64>> {
    let rotation = haar_orthogonal(p, rng);
    let (sample, truth) =
        gen_spiked_sample(model, cfg.n, rotation.as_ref(), cfg.noise_scaling, rng)?;
    let eig = covariance_eigen(&sample)?;
    rules
        .iter()
        .map(|rule| shrinkage_loss(&truth, &eig, &rule.eval_all(eig.values())?))
        .collect()
}

pub fn run_spiked_experiment(cfg: &SpikedExperimentConfig) -> Result<LossReport> {
    run_spiked_experiment_with(cfg, Execution::default())
}

pub fn run_spiked_experiment_with(
    cfg: &SpikedExperimentConfig,
    exec: Execution,
) -> Result<LossReport> {
    cfg.validate()?;
    let (nb, ns, reps) = (cfg.beta_grid.len(), cfg.sigma_grid.len(), cfg.reps);

    struct CellSetup {
        model: SpikedModel,
        rules: Vec<ShrinkageRule>,
        p: usize,
    }
    let setups: Vec<CellSetup> = (0..nb * ns)
        .map(|c| {
            let (bi, si) = (c / ns, c % ns);
            let p = cfg.dim_for(cfg.beta_grid[bi]);
            let beta = AspectRatio::new(cfg.beta_grid[bi])?;
            let sigma = cfg.sigma_grid[si];
            let model = SpikedModel::new(cfg.spikes.clone(), sigma, beta)?;
            let rules = COMPARED_RULES
                .iter()
                .map(|&k| build_rule(k, sigma, beta, cfg.threshold))
                .collect::<Result<Vec<_>>>()?;
            Ok(CellSetup { model, rules, p })
        })
        .collect::<Result<_>>()?;

    let results = map_indexed(nb * ns * reps, exec, |idx| {
        let (cell, rep) = (idx / reps, idx % reps);
        let (bi, si) = (cell / ns, cell % ns);
        let setup = &setups[cell];
        let mut rng = rep_rng(cfg.master_seed, bi, si, rep);
        spiked_rep(cfg, &setup.model, &setup.rules, setup.p, &mut rng).map_err(|e| {
            e.context(format!(
                "beta = {}, sigma = {}, rep = {rep}",
                cfg.beta_grid[bi], cfg.sigma_grid[si]
            ))
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(nb * ns);
    for (c, setup) in setups.iter().enumerate() {
        let rows = &results[c * reps..(c + 1) * reps];
        let optimal = ShrinkageRule::optimal(setup.model.sigma(), setup.model.beta())?;
        let reference = asymptotic_loss(&optimal, &setup.model)?;
        let rules = COMPARED_RULES
            .iter()
            .enumerate()
            .map(|(r, &kind)| {
                let losses: Vec<f64> = rows.iter().map(|row| row[r]).collect();
                let (logs, clamp_count) = log_excess(&losses, reference);
                Ok(RuleLosses {
                    rule: kind,
                    summary: summarize(&losses)?,
                    log_excess_summary: summarize(&logs)?,
                    losses,
                    log_excess: logs,
                    clamp_count,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(SpikedCell {
            beta: setup.model.beta().value(),
            sigma: setup.model.sigma(),
            n: cfg.n,
            p: setup.p,
            theoretical_optimal_loss: reference,
            critical_sigma: setup
                .model
                .spikes()
                .iter()
                .map(|&l| setup.model.critical_sigma(l))
                .collect(),
            rules,
        });
    }
    Ok(LossReport {
        config: cfg.clone(),
        cells,
    })
}

/// Finite-`n` observables of a single spiked sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpikeProbe {
    pub top_eigenvalue: f64,
    /// Squared overlap between the top sample eigenvector and the first spike direction.
    pub top_cosine_sq: f64,
    pub loss_classical: f64,
    pub loss_optimal: f64,
}

/// Repeats one spiked sample `reps` times with the spike directions on the
/// coordinate axes (the law of every observable here is rotation invariant).
///
/// Repetition `k` uses stream `k` of `master_seed`.
pub fn probe_spiked_model(
    model: &SpikedModel,
    n: usize,
    p: usize,
    reps: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<SpikeProbe>> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let sigma = model.sigma();
    let classical = ShrinkageRule::classical(sigma)?;
    let optimal = ShrinkageRule::optimal(sigma, model.beta())?;
    let identity = Mat::<f64>::identity(p, p);
    map_indexed(reps, exec, |rep| {
        let mut rng = stream_rng(master_seed, rep as u64);
        let (sample, truth) =
            gen_spiked_sample(model, n, identity.as_ref(), NoiseScaling::Sigma, &mut rng)?;
        let eig = covariance_eigen(&sample)?;
        let v = eig.vectors();
        let top_cosine_sq = if truth.rank() > 0 {
            let u = truth.basis();
            let dot: f64 = (0..p).map(|i| v[(i, 0)] * u[(i, 0)]).sum();
            dot * dot
        } else {
            0.0
        };
        Ok(SpikeProbe {
            top_eigenvalue: eig.values()[0],
            top_cosine_sq,
            loss_classical: shrinkage_loss(&truth, &eig, &classical.eval_all(eig.values())?)?,
            loss_optimal: shrinkage_loss(&truth, &eig, &optimal.eval_all(eig.values())?)?,
        })
    })
    .into_iter()
    .collect()
}

/// Sample-covariance spectra of pure noise (`sigma = 1`, known zero mean).
pub fn null_spectra(
    n: usize,
    p: usize,
    reps: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let model = SpikedModel::new(vec![], 1.0, AspectRatio::from_dims(p.min(n), n)?)?;
    let identity = Mat::<f64>::identity(p, p);
    map_indexed(reps, exec, |rep| {
        let mut rng = stream_rng(master_seed, rep as u64);
        let (sample, _) =
            gen_spiked_sample(&model, n, identity.as_ref(), NoiseScaling::Sigma, &mut rng)?;
        sym_eigvals(sample_covariance(&sample).as_ref())
    })
    .into_iter()
    .collect()
}

/// Which distance the normalized manifold error compares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// `|d^2_M - d^2_true| / d^2_true`.
    #[default]
    Squared,
    /// `|d_M - d_true| / d_true`.
    Unsquared,
}

/// Normalized Mahalanobis-distance error of estimate `m` at point `z`.
pub fn normalized_error(
    z: &[f64],
    mu: &[f64],
    m: faer::MatRef<'_, f64>,
    true_pinv: faer::MatRef<'_, f64>,
    metric: ErrorMetric,
) -> Result<f64> {
    let truth = mahalanobis_sq(z, mu, true_pinv)?;
    if !(truth > 0.0) {
        return Err(Error::Config(
            "true distance is zero at the test point; cannot normalize".into(),
        ));
    }
    let est = mahalanobis_sq(z, mu, m)?.max(0.0);
    Ok(match metric {
        ErrorMetric::Squared => (est - truth).abs() / truth,
        ErrorMetric::Unsquared => (est.sqrt() - truth.sqrt()).abs() / truth.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldExperimentConfig {
    pub p: usize,
    pub beta_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub reps: usize,
    pub param_range: (f64, f64),
    /// Chart parameters `(s, t)` of the test points.
    pub test_points: Vec<(f64, f64)>,
    pub master_seed: u64,
    pub noise_scaling: NoiseScaling,
    pub threshold: ThresholdVariant,
}

impl Default for ManifoldExperimentConfig {
    fn default() -> Self {
        ManifoldExperimentConfig {
            p: 100,
            beta_grid: vec![0.1, 0.5, 1.0],
            sigma_grid: vec![1.0, 1.5, 2.0],
            reps: 500,
            param_range: (-5.0, 5.0),
            test_points: vec![(0.0, 0.0), (2.0, 2.0)],
            master_seed: 0,
            noise_scaling: NoiseScaling::Sigma,
            threshold: ThresholdVariant::BulkEdge,
        }
    }
}

impl ManifoldExperimentConfig {
    /// Sample size `round(p / beta)`.
    pub fn n_for(&self, beta: f64) -> usize {
        (self.p as f64 / beta).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        Paraboloid::new(self.p, self.param_range)?;
        check_grid("beta", &self.beta_grid)?;
        check_sigmas(&self.sigma_grid)?;
        for &b in &self.beta_grid {
            AspectRatio::new(b)?;
        }
        if self.test_points.is_empty() {
            return Err(Error::Config("no test points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldEntry {
    pub test_point: usize,
    pub params: (f64, f64),
    pub rule: RuleKind,
    pub squared: Vec<f64>,
    pub unsquared: Vec<f64>,
    pub squared_summary: Summary,
    pub unsquared_summary: Summary,
}

impl ManifoldEntry {
    pub fn summary(&self, metric: ErrorMetric) -> &Summary {
        match metric {
            ErrorMetric::Squared => &self.squared_summary,
            ErrorMetric::Unsquared => &self.unsquared_summary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldCell {
    pub beta: f64,
    pub sigma: f64,
    pub n: usize,
    pub entries: Vec<ManifoldEntry>,
}

impl ManifoldCell {
    pub fn entry(&self, test_point: usize, rule: RuleKind) -> Option<&ManifoldEntry> {
        self.entries
            .iter()
            .find(|e| e.test_point == test_point && e.rule == rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub config: ManifoldExperimentConfig,
    pub cells: Vec<ManifoldCell>,
}

impl ErrorReport {
    pub fn cell(&self, beta: f64, sigma: f64) -> Option<&ManifoldCell> {
        self.cells
            .iter()
            .find(|c| (c.beta - beta).abs() < 1e-12 && (c.sigma - sigma).abs() < 1e-12)
    }
}

pub fn run_manifold_experiment(cfg: &ManifoldExperimentConfig) -> Result<ErrorReport> {
    run_manifold_experiment_with(cfg, Execution::default())
}

pub fn run_manifold_experiment_with(
    cfg: &ManifoldExperimentConfig,
    exec: Execution,
) -> Result<ErrorReport> {
    cfg.validate()?;
    let chart = Paraboloid::new(cfg.p, cfg.param_range)?;
    let truth = chart.truth()?;
    let mu = chart.mean();
    let points: Vec<Vec<f64>> = cfg
        .test_points
        .iter()
        .map(|&(s, t)| chart.point(s, t))
        .collect();
    for (k, z) in points.iter().enumerate() {
        if !(mahalanobis_sq(z, &mu, truth.pseudo_inverse())? > 0.0) {
            return Err(Error::Config(format!(
                "test point {k} {:?} has zero true distance",
                cfg.test_points[k]
            )));
        }
    }

    let (nb, ns, reps) = (cfg.beta_grid.len(), cfg.sigma_grid.len(), cfg.reps);
    let nt = points.len();
    let nr = COMPARED_RULES.len();
    // Per rep: [rule][point][metric] flattened.
    let results = map_indexed(nb * ns * reps, exec, |idx| -> Result<Vec<f64>> {
        let (cell, rep) = (idx / reps, idx % reps);
        let (bi, si) = (cell / ns, cell % ns);
        let (beta_v, sigma) = (cfg.beta_grid[bi], cfg.sigma_grid[si]);
        let ctx = |e: Error| e.context(format!("beta = {beta_v}, sigma = {sigma}, rep = {rep}"));
        let beta = AspectRatio::new(beta_v)?;
        let mut rng = rep_rng(cfg.master_seed, bi, si, rep);
        let sample = gen_manifold_sample(
            &chart,
            cfg.n_for(beta_v),
            sigma,
            cfg.noise_scaling,
            &mut rng,
        )
        .map_err(ctx)?;
        let eig = covariance_eigen(&sample).map_err(ctx)?;
        let mut out = Vec::with_capacity(nr * nt * 2);
        for &kind in &COMPARED_RULES {
            let rule = build_rule(kind, sigma, beta, cfg.threshold)?;
            let est = apply_rule(&eig, &rule).map_err(ctx)?;
            for z in &points {
                for metric in [ErrorMetric::Squared, ErrorMetric::Unsquared] {
                    out.push(normalized_error(
                        z,
                        &mu,
                        est.matrix(),
                        truth.pseudo_inverse(),
                        metric,
                    )?);
                }
            }
        }
        Ok(out)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(nb * ns);
    for c in 0..nb * ns {
        let (bi, si) = (c / ns, c % ns);
        let rows = &results[c * reps..(c + 1) * reps];
        let mut entries = Vec::with_capacity(nr * nt);
        for (r, &kind) in COMPARED_RULES.iter().enumerate() {
            for (t, &params) in cfg.test_points.iter().enumerate() {
                let base = (r * nt + t) * 2;
                let squared: Vec<f64> = rows.iter().map(|row| row[base]).collect();
                let unsquared: Vec<f64> = rows.iter().map(|row| row[base + 1]).collect();
                entries.push(ManifoldEntry {
                    test_point: t,
                    params,
                    rule: kind,
                    squared_summary: summarize(&squared)?,
                    unsquared_summary: summarize(&unsquared)?,
                    squared,
                    unsquared,
                });
            }
        }
        cells.push(ManifoldCell {
            beta: cfg.beta_grid[bi],
            sigma: cfg.sigma_grid[si],
            n: cfg.n_for(cfg.beta_grid[bi]),
            entries,
        });
    }
    Ok(ErrorReport {
        config: cfg.clone(),
        cells,
    })
}
