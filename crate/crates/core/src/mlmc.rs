//! Single- and multilevel Monte Carlo estimation of `E Ψ(u)`.
//!
//! Samples are addressed by [`StreamKey`]s `(replicate, level, index,
//! attempt)`, computed in parallel and reduced in index order, so results
//! do not depend on the number of worker threads.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{qoi_gradient_norm, solve_poisson, MeshLevel};
use crate::prior::{cascade_depth, coefficient_on_midpoints, sample_field, FieldRealization, PriorParams};
use crate::rng::StreamKey;
use crate::wavelet::{cascade, WaveletFamily, WaveletTable};

/// Exponent `ι` in the weights `w_ℓ = ℓ^{1+ι}`.
pub const IOTA: f64 = 0.1;
/// Largest tolerated fraction of resampled (degenerate) draws.
pub const MAX_REJECTION_FRACTION: f64 = 1e-4;
/// Tolerance absorbing round-off in `⌈·⌉` of quantities that are integers
/// in exact arithmetic.
const CEIL_SLACK: f64 = 1e-9;

fn ceil_tol(x: f64) -> f64 {
    (x - CEIL_SLACK).ceil()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
}

impl RateParams {
    pub fn new(t: f64, r: f64, theta: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(invalid(format!("truncation rate t = {t} must be positive")));
        }
        if !(r > 0.0 && r <= 1.0) {
            return Err(invalid(format!("FEM rate r = {r} must lie in (0, 1]")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("theta = {theta} must lie in [0, 1]")));
        }
        Ok(RateParams { t, r, theta })
    }

    /// `(2 - θ) r`, the convergence rate of the QoI in `h`.
    pub fn qoi_rate(&self) -> f64 {
        (2.0 - self.theta) * self.r
    }
}

/// Position of `2(2-θ)r` relative to `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Above,
    Critical,
    Below,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Above => "above",
            Regime::Critical => "critical",
            Regime::Below => "below",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanLevel {
    pub level: u32,
    pub truncation: u32,
    pub h: f64,
    pub samples: u64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcPlan {
    pub eps: f64,
    pub rates: RateParams,
    pub h0: f64,
    pub c: f64,
    pub dim: usize,
    pub regime: Regime,
    pub levels: Vec<PlanLevel>,
}

/// The level, truncation and sample schedule for accuracy `eps`.
pub fn make_plan(eps: f64, rates: RateParams, h0: f64, c: f64, dim: usize) -> Result<MlmcPlan> {
    if !(h0 > 0.0 && h0 < 1.0) {
        return Err(invalid(format!("h0 = {h0} must lie in (0, 1)")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("refinement factor {c} must lie in (0, 1)")));
    }
    let rate = rates.qoi_rate();
    let top = h0.powf(rate);
    if !(eps > 0.0 && eps < top) {
        return Err(invalid(format!("eps = {eps} must lie in (0, {top})")));
    }
    let big_l = ceil_tol(eps.ln() / (rate * c.ln()) - h0.ln() / c.ln()).max(1.0) as u32;
    let exponent = 2.0 * rate;
    let d = dim as f64;
    let regime = if (exponent - d).abs() < 1e-12 {
        Regime::Critical
    } else if exponent > d {
        Regime::Above
    } else {
        Regime::Below
    };
    let h_last = c.powi(big_l as i32) * h0;
    let levels = (1..=big_l)
        .map(|l| {
            let h = c.powi(l as i32) * h0;
            let truncation = truncation_for(h, &rates);
            let weight = match regime {
                Regime::Above => (l as f64).powf(1.0 + IOTA),
                Regime::Critical => big_l as f64,
                Regime::Below => c.powf((exponent - d) * (big_l - l) as f64 / 2.0),
            };
            let samples = ceil_tol((h / h_last).powf(exponent) * weight).max(1.0) as u64;
            PlanLevel {
                level: l,
                truncation,
                h,
                samples,
                weight,
            }
        })
        .collect();
    Ok(MlmcPlan {
        eps,
        rates,
        h0,
        c,
        dim,
        regime,
        levels,
    })
}

/// `N = ⌈-log(h) (2-θ) r / (log(2) t)⌉`, balancing truncation against
/// discretization error.
pub fn truncation_for(h: f64, rates: &RateParams) -> u32 {
    ceil_tol(-h.ln() * rates.qoi_rate() / (2f64.ln() * rates.t)).max(0.0) as u32
}

impl MlmcPlan {
    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn finest(&self) -> &PlanLevel {
        self.levels.last().expect("plans have at least one level")
    }

    /// The same plan with every `M_ℓ` multiplied by `factor`.
    pub fn with_samples_scaled(&self, factor: u64) -> MlmcPlan {
        let mut out = self.clone();
        for lvl in &mut out.levels {
            lvl.samples *= factor;
        }
        out
    }

    /// Checks that level `ℓ` has mesh width `2^{-(ℓ+1)}`, the meshes the
    /// FEM module provides.
    pub fn check_dyadic_meshes(&self) -> Result<()> {
        for lvl in &self.levels {
            if lvl.h != MeshLevel::new(lvl.level).h() {
                return Err(invalid(format!(
                    "level {} has h = {} but the FEM meshes need h0 = 1/2 and c = 1/2",
                    lvl.level, lvl.h
                )));
            }
        }
        Ok(())
    }
}

/// Number of FEM unknowns at plan level `ℓ`; level 0 stands for `Ψ_0 = 0`
/// and costs nothing.
pub fn dofs_at(level: u32) -> u64 {
    if level == 0 {
        0
    } else {
        MeshLevel::new(level).dofs() as u64
    }
}

/// One draw and the number of degenerate draws discarded before it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub rejected: u32,
}

/// Source of Monte Carlo samples. `difference` returns `Y_ℓ = Ψ_ℓ - Ψ_{ℓ-1}`
/// from one shared random input, `qoi` returns `Ψ_ℓ` alone.
pub trait LevelSampler: Sync {
    fn difference(&self, level: u32, key: StreamKey) -> Result<Draw>;
    fn qoi(&self, level: u32, key: StreamKey) -> Result<Draw>;
}

/// The prior–PDE payload: a truncated random tree field, midpoint
/// quadrature and the gradient-norm QoI.
#[derive(Clone, Debug)]
pub struct PdeSampler {
    prior: PriorParams,
    rates: RateParams,
    table: Arc<WaveletTable>,
}

impl PdeSampler {
    /// Sampler for `plan`; one cascade table serves all levels.
    pub fn new(prior: PriorParams, plan: &MlmcPlan, family: &WaveletFamily) -> Result<Self> {
        plan.check_dyadic_meshes()?;
        if prior.dim() != 2 {
            return Err(invalid("the FEM payload is two-dimensional"));
        }
        if !prior.within_family_smoothness(family) {
            log::warn!(
                "prior smoothness s = {} exceeds the wavelet regularity {}",
                prior.s,
                family.hoelder_alpha()
            );
        }
        let finest = plan.finest();
        let depth = cascade_depth(
            finest.truncation,
            plan.rates.t,
            family.hoelder_alpha(),
            MeshLevel::new(finest.level).midpoint_resolution(),
        );
        let table = Arc::new(cascade(family, depth)?);
        Ok(PdeSampler {
            prior,
            rates: plan.rates,
            table,
        })
    }

    pub fn table(&self) -> &WaveletTable {
        &self.table
    }

    /// `N_ℓ` of mesh level `ℓ ≥ 1`.
    pub fn truncation(&self, level: u32) -> Result<u32> {
        if level == 0 {
            return Err(invalid("levels start at 1"));
        }
        Ok(truncation_for(MeshLevel::new(level).h(), &self.rates))
    }

    /// `Ψ` of the solution on mesh `level` with the field cut at scale `n`.
    pub fn psi(&self, field: &FieldRealization, level: u32, n: u32) -> Result<f64> {
        let mesh = MeshLevel::new(level);
        let a = coefficient_on_midpoints(&field.truncated(n), mesh.midpoint_resolution(), &self.table)?;
        Ok(qoi_gradient_norm(&solve_poisson(&mesh, &a)?))
    }

    /// Runs `f` on fresh realizations (truncated at `n`) until it succeeds
    /// without a degenerate coefficient.
    pub fn with_realization(
        &self,
        n: u32,
        key: StreamKey,
        mut f: impl FnMut(&FieldRealization) -> Result<f64>,
    ) -> Result<Draw> {
        let params = self.prior.with_truncation(n);
        let mut rejected = 0u32;
        loop {
            let field = sample_field(&params, &key.with_attempt(rejected))?;
            match f(&field) {
                Ok(value) => return Ok(Draw { value, rejected }),
                Err(Error::DegenerateSample { magnitude }) => {
                    log::debug!("degenerate sample |b| = {magnitude:e}, resampling");
                    rejected += 1;
                    if rejected > 1000 {
                        return Err(Error::DegenerateSample { magnitude });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl LevelSampler for PdeSampler {
    fn difference(&self, level: u32, key: StreamKey) -> Result<Draw> {
        let n = self.truncation(level)?;
        let coarse = level.checked_sub(1).filter(|&l| l > 0);
        let coarse_n = match coarse {
            Some(l) => Some(self.truncation(l)?),
            None => None,
        };
        self.with_realization(n, key, |field| {
            let fine = self.psi(field, level, n)?;
            match (coarse, coarse_n) {
                (Some(l), Some(cn)) => Ok(fine - self.psi(field, l, cn)?),
                _ => Ok(fine),
            }
        })
    }

    fn qoi(&self, level: u32, key: StreamKey) -> Result<Draw> {
        let n = self.truncation(level)?;
        self.with_realization(n, key, |field| self.psi(field, level, n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelStats {
    pub level: u32,
    pub truncation: u32,
    pub h: f64,
    pub samples: u64,
    pub mean: f64,
    pub variance: f64,
    pub work_units: u64,
    pub rejected: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcResult {
    pub estimate: f64,
    pub levels: Vec<LevelStats>,
}

impl MlmcResult {
    pub fn work_units(&self) -> u64 {
        self.levels.iter().map(|l| l.work_units).sum()
    }

    pub fn rejected(&self) -> u64 {
        self.levels.iter().map(|l| l.rejected).sum()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.levels.iter().map(|l| l.wall_seconds).sum()
    }

    /// Estimated variance of the estimator, `Σ Var(Y_ℓ) / M_ℓ`.
    pub fn estimator_variance(&self) -> f64 {
        self.levels.iter().map(|l| l.variance / l.samples as f64).sum()
    }
}

/// Mean and unbiased sample variance, summed in order.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Draws `count` samples of `f` in parallel, returned in index order.
fn draw_all(count: u64, f: impl Fn(u64) -> Result<Draw> + Sync + Send) -> Result<(Vec<f64>, u64)> {
    let draws: Vec<Draw> = (0..count).into_par_iter().map(f).collect::<Result<_>>()?;
    let rejected = draws.iter().map(|d| u64::from(d.rejected)).sum();
    Ok((draws.into_iter().map(|d| d.value).collect(), rejected))
}

fn check_rejections(rejected: u64, total: u64) -> Result<()> {
    if rejected as f64 > MAX_REJECTION_FRACTION * total as f64 {
        return Err(Error::TooManyRejections { rejected, total });
    }
    Ok(())
}

/// The multilevel estimator `Σ_ℓ E_{M_ℓ}(Ψ_ℓ - Ψ_{ℓ-1})` for one replicate.
pub fn mlmc_estimate(plan: &MlmcPlan, sampler: &impl LevelSampler, key: StreamKey) -> Result<MlmcResult> {
    let mut levels = Vec::with_capacity(plan.levels.len());
    for lvl in &plan.levels {
        let start = Instant::now();
        let base = key.with_level(lvl.level);
        let (values, rejected) =
            draw_all(lvl.samples, |i| sampler.difference(lvl.level, base.with_sample(i)))?;
        let (mean, variance) = mean_and_variance(&values);
        levels.push(LevelStats {
            level: lvl.level,
            truncation: lvl.truncation,
            h: lvl.h,
            samples: lvl.samples,
            mean,
            variance,
            work_units: lvl.samples * (dofs_at(lvl.level) + dofs_at(lvl.level - 1)),
            rejected,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let total: u64 = levels.iter().map(|l| l.samples).sum();
    check_rejections(levels.iter().map(|l| l.rejected).sum(), total)?;
    let estimate = levels.iter().map(|l| l.mean).sum();
    Ok(MlmcResult { estimate, levels })
}

/// Single-level schedule: the finest level of the multilevel plan for
/// `eps` with `M = ⌈ε^{-2}⌉` samples.
pub fn slmc_plan(eps: f64, rates: RateParams, h0: f64, c: f64, dim: usize) -> Result<MlmcPlan> {
    let mut plan = make_plan(eps, rates, h0, c, dim)?;
    let mut finest = *plan.finest();
    finest.samples = ceil_tol(eps.powi(-2)) as u64;
    finest.weight = 1.0;
    plan.levels = vec![finest];
    Ok(plan)
}

/// The single-level estimator `E_M(Ψ_ℓ)` at the finest level of `plan`.
pub fn slmc_estimate(plan: &MlmcPlan, sampler: &impl LevelSampler, key: StreamKey) -> Result<MlmcResult> {
    let lvl = *plan.finest();
    let start = Instant::now();
    let base = key.with_level(lvl.level);
    let (values, rejected) = draw_all(lvl.samples, |i| sampler.qoi(lvl.level, base.with_sample(i)))?;
    check_rejections(rejected, lvl.samples)?;
    let (mean, variance) = mean_and_variance(&values);
    Ok(MlmcResult {
        estimate: mean,
        levels: vec![LevelStats {
            level: lvl.level,
            truncation: lvl.truncation,
            h: lvl.h,
            samples: lvl.samples,
            mean,
            variance,
            work_units: lvl.samples * dofs_at(lvl.level),
            rejected,
            wall_seconds: start.elapsed().as_secs_f64(),
        }],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceRow {
    pub level: u32,
    pub h: f64,
    pub samples: u64,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the sample variance.
    pub variance_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub rows: Vec<VarianceRow>,
    /// Least-squares slope of `log2 Var(Y_ℓ)` against `log2 h_ℓ`, over the
    /// rows with positive variance; `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

/// Sample variances of `Y_ℓ` for the listed levels of `plan`.
pub fn variance_decay_report(
    plan: &MlmcPlan,
    sampler: &impl LevelSampler,
    levels: &[u32],
    samples: u64,
    key: StreamKey,
) -> Result<VarianceReport> {
    if samples < 2 {
        return Err(invalid("need at least two samples per level"));
    }
    let mut rows = Vec::new();
    for &l in levels {
        let lvl = plan
            .levels
            .iter()
            .find(|p| p.level == l)
            .ok_or_else(|| invalid(format!("level {l} not in the plan")))?;
        let base = key.with_level(l);
        let (values, _) = draw_all(samples, |i| sampler.difference(l, base.with_sample(i)))?;
        let (mean, variance) = mean_and_variance(&values);
        let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / samples as f64;
        let variance_se = ((m4 - variance * variance).max(0.0) / samples as f64).sqrt();
        rows.push(VarianceRow {
            level: l,
            h: lvl.h,
            samples,
            mean,
            variance,
            variance_se,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.variance > 0.0)
        .map(|r| (r.h.log2(), r.variance.log2()))
        .collect();
    Ok(VarianceReport {
        slope: fit_slope(&pts),
        rows,
    })
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
