//! Prior components: model size, predictor inclusion, basis sizes and
//! Dirichlet coefficients.
//!
//! Each component exposes a log-pmf and a sampler drawing from exactly that
//! pmf. Defaults follow the histogram simulation setup: order-1 splines, a
//! uniform size prior on `2..=7`, correlation-weighted inclusion, basis sizes
//! `⌊K^{1/(r+1)}⌋` for `K` zero-truncated Poisson(100) restricted to `[4, 8]`,
//! and uniform Dirichlet weights.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{arg, Error, Result};
use crate::model::{BasisAllocation, CoefficientBlock, ModelIndex};
use crate::numeric::{ln_choose, log_sum_exp, ExactSum, LogSumExp};
use crate::posterior::Dataset;

/// Largest model size for which subset probabilities are computed exactly.
pub const MAX_EXACT_SUBSET_SIZE: usize = 24;
/// Largest grid that the joint basis-size prior will normalize exhaustively.
pub const MAX_JOINT_GRID: usize = 10_000_000;

/// Prior on the model size `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizePrior {
    /// Uniform on `r_min..=min(r_max, p)`.
    Uniform { r_min: usize, r_max: usize },
    /// `Π(r) ∝ exp(−exp(c0 r^t0))` on `1..=p`.
    DoubleExponential { c0: f64, t0: f64 },
}

/// Prior on which predictors enter a model of a given size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InclusionPrior {
    /// Every subset of size `r` is equally likely.
    UniformSubsets,
    /// Weighted sampling without replacement with weights
    /// `w_k ∝ |corr(X_k, Y)| + epsilon_floor`.
    CorrelationWeighted { epsilon_floor: f64 },
}

/// Prior on the basis sizes `(J_0, J_m1, …, J_mr)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisPrior {
    /// Independent `J = ⌊K^{1/(r+1)}⌋` with `K` zero-truncated Poisson(lambda),
    /// conditioned on `J ∈ [j_min, j_max]`.
    ZtpoissonTransform {
        lambda: f64,
        j_min: usize,
        j_max: usize,
    },
    /// Joint pmf `∝ exp{−c2 J_0 ∏J_mk (log J_0 + Σ log J_mk)^kappa}` on
    /// `[j_min, j_max]^{r+1}`.
    AnisotropicJoint {
        c2: f64,
        kappa: f64,
        j_min: usize,
        j_max: usize,
    },
}

impl BasisPrior {
    pub fn range(&self) -> (usize, usize) {
        match *self {
            BasisPrior::ZtpoissonTransform { j_min, j_max, .. }
            | BasisPrior::AnisotropicJoint { j_min, j_max, .. } => (j_min, j_max),
        }
    }
}

/// Full prior configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub size_prior: SizePrior,
    pub inclusion: InclusionPrior,
    pub basis_prior: BasisPrior,
    pub dirichlet_a: f64,
    pub spline_order: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            size_prior: SizePrior::Uniform { r_min: 2, r_max: 7 },
            inclusion: InclusionPrior::CorrelationWeighted {
                epsilon_floor: 0.01,
            },
            basis_prior: BasisPrior::ZtpoissonTransform {
                lambda: 100.0,
                j_min: 4,
                j_max: 8,
            },
            dirichlet_a: 1.0,
            spline_order: 1,
        }
    }
}

impl PriorConfig {
    /// Checks constants and, when `p` is known, that some model size is feasible.
    pub fn validate(&self, p: Option<usize>) -> Result<()> {
        match self.size_prior {
            SizePrior::Uniform { r_min, r_max } => {
                if r_min > r_max {
                    return arg(format!("r_min = {r_min} exceeds r_max = {r_max}"));
                }
                if let Some(p) = p {
                    if r_min > p {
                        return arg(format!("r_min = {r_min} exceeds the number of predictors {p}"));
                    }
                }
            }
            SizePrior::DoubleExponential { c0, t0 } => {
                if !(c0 > 0.0 && t0 > 0.0 && c0.is_finite() && t0.is_finite()) {
                    return arg("double-exponential size prior needs c0 > 0 and t0 > 0");
                }
                if p == Some(0) {
                    return arg("double-exponential size prior needs p >= 1");
                }
            }
        }
        if let InclusionPrior::CorrelationWeighted { epsilon_floor } = self.inclusion {
            if !(epsilon_floor > 0.0 && epsilon_floor.is_finite()) {
                return arg("epsilon_floor must be positive");
            }
        }
        let (j_min, j_max) = self.basis_prior.range();
        if j_min == 0 || j_min > j_max {
            return arg(format!("invalid basis size range [{j_min}, {j_max}]"));
        }
        if j_min < self.spline_order {
            return arg(format!(
                "j_min = {j_min} is below the spline order {}",
                self.spline_order
            ));
        }
        match self.basis_prior {
            BasisPrior::ZtpoissonTransform { lambda, .. } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return arg("lambda must be positive");
                }
            }
            BasisPrior::AnisotropicJoint { c2, kappa, .. } => {
                if !(c2 > 0.0 && c2.is_finite()) || !(kappa >= 1.0 && kappa.is_finite()) {
                    return arg("anisotropic basis prior needs c2 > 0 and kappa >= 1");
                }
            }
        }
        if !(self.dirichlet_a > 0.0 && self.dirichlet_a.is_finite()) {
            return arg("dirichlet_a must be positive");
        }
        if self.spline_order == 0 {
            return arg("spline order must be at least 1");
        }
        Ok(())
    }

    /// `log Π₁(r)` for `p` predictors; `-inf` outside the support.
    pub fn log_pmf_model_size(&self, r: usize, p: usize) -> f64 {
        SizeDistribution::new(&self.size_prior, p).log_pmf(r)
    }

    /// One draw of the model size.
    pub fn sample_model_size<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<usize> {
        SizeDistribution::new(&self.size_prior, p).sample(rng)
    }

    /// `log Π₂(model | r)`. The weighted kind needs the inclusion weights.
    pub fn log_pmf_subset(
        &self,
        model: &ModelIndex,
        p: usize,
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        if model.predictors().last().is_some_and(|&m| m > p) {
            return arg(format!("model {:?} is not valid for p = {p}", model.predictors()));
        }
        match self.inclusion {
            InclusionPrior::UniformSubsets => Ok(-ln_choose(p, model.size())),
            InclusionPrior::CorrelationWeighted { .. } => {
                let w = weights.ok_or_else(|| {
                    Error::Argument("weighted inclusion prior needs weights".into())
                })?;
                check_weights(w, p)?;
                weighted_subset_log_prob(model.predictors(), w)
            }
        }
    }

    /// One draw of a subset of size `r` from `1..=p`.
    pub fn sample_subset<R: Rng + ?Sized>(
        &self,
        r: usize,
        p: usize,
        weights: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<ModelIndex> {
        if r > p {
            return arg(format!("cannot select {r} predictors out of {p}"));
        }
        let mut chosen = match self.inclusion {
            InclusionPrior::UniformSubsets => rand::seq::index::sample(rng, p, r)
                .into_iter()
                .map(|i| i + 1)
                .collect::<Vec<_>>(),
            InclusionPrior::CorrelationWeighted { .. } => {
                let w = weights.ok_or_else(|| {
                    Error::Argument("weighted inclusion prior needs weights".into())
                })?;
                check_weights(w, p)?;
                weighted_draw_without_replacement(w, r, rng)
            }
        };
        chosen.sort_unstable();
        ModelIndex::new(chosen, Some(p))
    }

    /// The basis-size law for models of size `r`.
    pub fn basis_sizes(&self, r: usize) -> Result<BasisSizeDistribution> {
        BasisSizeDistribution::new(&self.basis_prior, r)
    }

    /// One draw of `(J_0, J_m1, …, J_mr)`.
    pub fn sample_basis_sizes<R: Rng + ?Sized>(
        &self,
        r: usize,
        rng: &mut R,
    ) -> Result<BasisAllocation> {
        Ok(self.basis_sizes(r)?.sample(rng))
    }

    /// `log Π₃(alloc)` under the anisotropic joint prior (normalized over the
    /// truncated grid); `-inf` for entries outside `[j_min, j_max]`.
    pub fn log_pmf_basis_sizes_aniso(&self, alloc: &BasisAllocation) -> Result<f64> {
        match self.basis_prior {
            BasisPrior::AnisotropicJoint { .. } => {
                Ok(self.basis_sizes(alloc.x_dims.len())?.log_pmf(alloc))
            }
            _ => arg("basis prior is not the anisotropic joint kind"),
        }
    }

    /// Independent `Dir(a, …, a)` vectors, one per covariate cell tuple.
    pub fn sample_coefficients<R: Rng + ?Sized>(
        &self,
        alloc: &BasisAllocation,
        rng: &mut R,
    ) -> Result<CoefficientBlock> {
        let gamma = Gamma::new(self.dirichlet_a, 1.0)
            .map_err(|e| Error::Argument(format!("invalid Dirichlet parameter: {e}")))?;
        let groups = (0..alloc.group_count())
            .map(|_| sample_dirichlet(&gamma, alloc.y_dim, rng))
            .collect();
        CoefficientBlock::new(alloc, groups)
    }
}

fn sample_dirichlet<R: Rng + ?Sized>(gamma: &Gamma<f64>, dim: usize, rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|v| *v /= total);
        // Land exactly on the simplex up to rounding of the last entry.
        let head: f64 = draws[..dim - 1].iter().sum();
        draws[dim - 1] = (1.0 - head).max(0.0);
    } else {
        // Every gamma draw underflowed (tiny `a`): the limit law puts all mass
        // on one coordinate.
        let k = rng.random_range(0..dim);
        draws = vec![0.0; dim];
        draws[k] = 1.0;
    }
    draws
}

fn check_weights(w: &[f64], p: usize) -> Result<()> {
    if w.len() != p {
        return arg(format!("expected {p} inclusion weights, got {}", w.len()));
    }
    if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return arg("inclusion weights must be positive and finite");
    }
    Ok(())
}

/// Probability that `r` successive weighted draws without replacement produce
/// exactly `set` (1-based indices), summed over all insertion orders by a
/// dynamic program over the subsets of `set`.
fn weighted_subset_log_prob(set: &[usize], w: &[f64]) -> Result<f64> {
    let r = set.len();
    if r > MAX_EXACT_SUBSET_SIZE {
        return arg(format!(
            "exact weighted subset probabilities are limited to r <= {MAX_EXACT_SUBSET_SIZE}"
        ));
    }
    let total: f64 = w.iter().sum();
    let ws: Vec<f64> = set.iter().map(|&m| w[m - 1] / total).collect();
    let states = 1usize << r;
    let mut prob = vec![0.0f64; states];
    let mut used = vec![0.0f64; states];
    prob[0] = 1.0;
    for s in 1..states {
        let low = s.trailing_zeros() as usize;
        used[s] = used[s & (s - 1)] + ws[low];
        let mut acc = 0.0;
        for (i, &wi) in ws.iter().enumerate() {
            if s & (1 << i) != 0 {
                let prev = s ^ (1 << i);
                let remaining = 1.0 - used[prev];
                if remaining > 0.0 {
                    acc += prob[prev] * wi / remaining;
                }
            }
        }
        prob[s] = acc;
    }
    Ok(prob[states - 1].ln())
}

fn weighted_draw_without_replacement<R: Rng + ?Sized>(
    w: &[f64],
    r: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut remaining: Vec<f64> = w.to_vec();
    let mut out = Vec::with_capacity(r);
    for _ in 0..r {
        let total: f64 = remaining.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &v) in remaining.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            pick = Some(i);
            if u < v {
                break;
            }
            u -= v;
        }
        let i = pick.expect("at least one predictor remains");
        remaining[i] = 0.0;
        out.push(i + 1);
    }
    out
}

/// `w_k = (|corr(X_k, Y)| + floor) / Σ_l (|corr(X_l, Y)| + floor)`.
///
/// Constant columns (or a constant response) get correlation zero, hence the
/// floor weight.
pub fn marginal_correlation_weights(data: &Dataset, epsilon_floor: f64) -> Result<Vec<f64>> {
    let n = data.n();
    if n < 3 {
        return Err(Error::Contract(format!(
            "correlation weights need at least 3 observations, got {n}"
        )));
    }
    if !(epsilon_floor > 0.0) {
        return arg("epsilon_floor must be positive");
    }
    let y = data.y();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_ss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let raw: Vec<f64> = (0..data.p())
        .map(|k| {
            let col: Vec<f64> = (0..n).map(|i| data.x(i)[k]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let cross: f64 = col
                .iter()
                .zip(y)
                .map(|(a, b)| (a - mean) * (b - y_mean))
                .sum();
            let denom = (ss * y_ss).sqrt();
            let corr = if denom > 0.0 { (cross / denom).abs().min(1.0) } else { 0.0 };
            corr + epsilon_floor
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Tabulated model-size law for a fixed `p`.
#[derive(Debug, Clone)]
pub struct SizeDistribution {
    /// `log_pmf[r]` for `r = 0..=r_hi`.
    log_pmf: Vec<f64>,
}

impl SizeDistribution {
    pub fn new(prior: &SizePrior, p: usize) -> Self {
        let log_pmf = match *prior {
            SizePrior::Uniform { r_min, r_max } => {
                let hi = r_max.min(p);
                if r_min > hi {
                    vec![f64::NEG_INFINITY]
                } else {
                    let lp = -((hi - r_min + 1) as f64).ln();
                    (0..=hi)
                        .map(|r| if r >= r_min { lp } else { f64::NEG_INFINITY })
                        .collect()
                }
            }
            SizePrior::DoubleExponential { c0, t0 } => {
                let unnorm: Vec<f64> = (0..=p)
                    .map(|r| {
                        if r == 0 {
                            f64::NEG_INFINITY
                        } else {
                            -(c0 * (r as f64).powf(t0)).exp()
                        }
                    })
                    .collect();
                let z = log_sum_exp(&unnorm);
                unnorm.into_iter().map(|v| v - z).collect()
            }
        };
        Self { log_pmf }
    }

    pub fn log_pmf(&self, r: usize) -> f64 {
        self.log_pmf.get(r).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Sizes with positive mass, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.log_pmf.len())
            .filter(|&r| self.log_pmf[r] > f64::NEG_INFINITY)
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        sample_log_table(&self.log_pmf, rng)
            .ok_or_else(|| Error::Runtime("model-size prior has no mass".into()))
    }
}

/// Inverse-CDF draw from an (unnormalized) log-probability table.
fn sample_log_table<R: Rng + ?Sized>(log_p: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let weights: Vec<f64> = log_p.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = Some(i);
        if u < w {
            return Some(i);
        }
        u -= w;
    }
    last
}

/// `log P(lo ≤ N ≤ hi)` for `N ~ Poisson(lambda)`, summed outward from the
/// point of the range closest to the mode until terms are negligible.
fn log_poisson_range(lambda: f64, lo: f64, hi: f64) -> f64 {
    if !lo.is_finite() || lo > hi {
        return f64::NEG_INFINITY;
    }
    let ln_lambda = lambda.ln();
    let lpmf = |k: f64| k * ln_lambda - lambda - ln_gamma(k + 1.0);
    let start = lambda.floor().clamp(lo, hi);
    let peak = lpmf(start);
    let mut acc = LogSumExp::new();
    acc.push(peak);
    const NEGLIGIBLE: f64 = 40.0;
    const MAX_STEPS: usize = 10_000_000;
    for dir in [1.0f64, -1.0] {
        let mut k = start;
        for _ in 0..MAX_STEPS {
            let next = k + dir;
            if next == k || next < lo || next > hi {
                break;
            }
            k = next;
            let v = lpmf(k);
            acc.push(v);
            if v < peak - NEGLIGIBLE {
                break;
            }
        }
    }
    acc.value()
}

/// Normalized `log P(J = j)` for `j ∈ [j_min, j_max]` when `J = ⌊K^{1/(r+1)}⌋`
/// and `K` is zero-truncated Poisson(lambda).
pub fn ztpoisson_transform_log_pmf(lambda: f64, r: usize, j_min: usize, j_max: usize) -> Vec<f64> {
    let e = (r + 1) as i32;
    let masses: Vec<f64> = (j_min..=j_max)
        .map(|j| {
            // K ≥ 1 always, so the zero truncation only rescales.
            let lo = (j as f64).powi(e).max(1.0);
            let hi = ((j + 1) as f64).powi(e) - 1.0;
            log_poisson_range(lambda, lo, hi)
        })
        .collect();
    let z = log_sum_exp(&masses);
    masses.into_iter().map(|m| m - z).collect()
}

/// Basis-size law for a fixed model size `r`.
#[derive(Debug, Clone)]
pub struct BasisSizeDistribution {
    r: usize,
    j_min: usize,
    j_max: usize,
    kind: BasisKind,
}

#[derive(Debug, Clone)]
enum BasisKind {
    /// Per-coordinate log pmf over `j_min..=j_max`.
    Independent { log_pmf: Vec<f64> },
    /// Joint log pmf over the grid, `J_0` slowest.
    Joint { log_pmf: Vec<f64>, c2: f64, kappa: f64, log_z: f64 },
}

impl BasisSizeDistribution {
    pub fn new(prior: &BasisPrior, r: usize) -> Result<Self> {
        let (j_min, j_max) = prior.range();
        if j_min == 0 || j_min > j_max {
            return arg(format!("invalid basis size range [{j_min}, {j_max}]"));
        }
        let kind = match *prior {
            BasisPrior::ZtpoissonTransform { lambda, .. } => {
                let log_pmf = ztpoisson_transform_log_pmf(lambda, r, j_min, j_max);
                if log_pmf.iter().all(|v| !v.is_finite()) {
                    return Err(Error::Runtime(format!(
                        "basis-size prior is degenerate for r = {r}: no mass on [{j_min}, {j_max}]"
                    )));
                }
                BasisKind::Independent { log_pmf }
            }
            BasisPrior::AnisotropicJoint { c2, kappa, .. } => {
                let width = j_max - j_min + 1;
                let cells = width
                    .checked_pow((r + 1) as u32)
                    .filter(|&c| c <= MAX_JOINT_GRID)
                    .ok_or_else(|| {
                        Error::Argument(format!(
                            "joint basis-size grid [{j_min},{j_max}]^{} is too large",
                            r + 1
                        ))
                    })?;
                let unnorm: Vec<f64> = (0..cells)
                    .map(|c| {
                        let dims = decode_grid(c, r + 1, j_min, width);
                        joint_unnormalized(c2, kappa, &dims)
                    })
                    .collect();
                let log_z = log_sum_exp(&unnorm);
                if !log_z.is_finite() {
                    return Err(Error::Runtime(format!(
                        "anisotropic basis-size prior underflows for r = {r}"
                    )));
                }
                let log_pmf = unnorm.into_iter().map(|v| v - log_z).collect();
                BasisKind::Joint {
                    log_pmf,
                    c2,
                    kappa,
                    log_z,
                }
            }
        };
        Ok(Self {
            r,
            j_min,
            j_max,
            kind,
        })
    }

    pub fn model_size(&self) -> usize {
        self.r
    }

    pub fn range(&self) -> (usize, usize) {
        (self.j_min, self.j_max)
    }

    /// Number of allocations in the truncated grid.
    pub fn grid_size(&self) -> usize {
        (self.j_max - self.j_min + 1)
            .checked_pow((self.r + 1) as u32)
            .unwrap_or(usize::MAX)
    }

    /// Per-coordinate log pmf for the independent kind.
    pub fn marginal_log_pmf(&self, j: usize) -> Option<f64> {
        match &self.kind {
            BasisKind::Independent { log_pmf } if (self.j_min..=self.j_max).contains(&j) => {
                Some(log_pmf[j - self.j_min])
            }
            BasisKind::Independent { .. } => Some(f64::NEG_INFINITY),
            BasisKind::Joint { .. } => None,
        }
    }

    /// `log Π₃(alloc)`; `-inf` outside the grid.
    ///
    /// Sums run over sorted basis sizes so that the value does not depend on
    /// the order of the predictors.
    pub fn log_pmf(&self, alloc: &BasisAllocation) -> f64 {
        if alloc.x_dims.len() != self.r {
            return f64::NEG_INFINITY;
        }
        let in_range = |j: usize| (self.j_min..=self.j_max).contains(&j);
        if !in_range(alloc.y_dim) || !alloc.x_dims.iter().all(|&j| in_range(j)) {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            BasisKind::Independent { log_pmf } => {
                let mut xs = alloc.x_dims.clone();
                xs.sort_unstable();
                let tail: f64 = xs.iter().map(|&j| log_pmf[j - self.j_min]).sum();
                log_pmf[alloc.y_dim - self.j_min] + tail
            }
            BasisKind::Joint { c2, kappa, log_z, .. } => {
                let mut dims = Vec::with_capacity(self.r + 1);
                dims.push(alloc.y_dim);
                dims.extend_from_slice(&alloc.x_dims);
                joint_unnormalized(*c2, *kappa, &dims) - log_z
            }
        }
    }

    /// Every allocation of the truncated grid, `J_0` slowest.
    pub fn allocations(&self) -> impl Iterator<Item = BasisAllocation> + '_ {
        let width = self.j_max - self.j_min + 1;
        (0..self.grid_size()).map(move |c| {
            let dims = decode_grid(c, self.r + 1, self.j_min, width);
            BasisAllocation {
                y_dim: dims[0],
                x_dims: dims[1..].to_vec(),
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BasisAllocation {
        match &self.kind {
            BasisKind::Independent { log_pmf } => {
                let mut draw = || {
                    self.j_min + sample_log_table(log_pmf, rng).expect("validated non-degenerate")
                };
                let y_dim = draw();
                let x_dims = (0..self.r).map(|_| draw()).collect();
                BasisAllocation { y_dim, x_dims }
            }
            BasisKind::Joint { log_pmf, .. } => {
                let c = sample_log_table(log_pmf, rng).expect("validated non-degenerate");
                let dims = decode_grid(c, self.r + 1, self.j_min, self.j_max - self.j_min + 1);
                BasisAllocation {
                    y_dim: dims[0],
                    x_dims: dims[1..].to_vec(),
                }
            }
        }
    }
}

fn decode_grid(mut c: usize, len: usize, j_min: usize, width: usize) -> Vec<usize> {
    let mut dims = vec![0; len];
    for slot in dims.iter_mut().rev() {
        *slot = j_min + c % width;
        c /= width;
    }
    dims
}

fn joint_unnormalized(c2: f64, kappa: f64, dims: &[usize]) -> f64 {
    let product: f64 = dims.iter().map(|&j| j as f64).product();
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    let mut log_sum = ExactSum::new();
    sorted.iter().for_each(|&j| log_sum.add((j as f64).ln()));
    -c2 * product * log_sum.value().powf(kappa)
}
