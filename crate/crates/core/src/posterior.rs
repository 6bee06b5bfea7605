//! Posterior moments of `f(y | x)` without MCMC.
//!
//! With histogram bases (order 1) every observation activates exactly one
//! coefficient, so the likelihood integrated against the Dirichlet prior has a
//! closed form. The posterior mean at `(x, y)` is a ratio of two weighted sums
//! over models and basis allocations: `W⁰` with the query adjoined as an extra
//! observation and `W¹` without it. Numerator and denominator share every
//! sampled model and allocation, so each term contributes
//! `W¹_t · J₀(a + n_{g,j}) / (J₀a + n_g)` to the numerator, where `(g, j)` is
//! the query's cell.
//!
//! Terms are evaluated in two passes (log weights, then scaled accumulation)
//! and reduced with exactly rounded sums, so results do not depend on thread
//! count or on the order in which predictors appear.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::basis::{check_open_unit, haar_cell};
use crate::error::{arg, contract, Error, Result};
use crate::model::{BasisAllocation, ModelIndex};
use crate::numeric::{derive_seed, ln_choose, ExactSum, LogRising, LogSumExp, LOG_UNDERFLOW_FLOOR};
use crate::prior::{
    marginal_correlation_weights, BasisSizeDistribution, InclusionPrior, PriorConfig,
    SizeDistribution,
};

/// Draws or grid cells handled by one unit of parallel work.
const CHUNK: usize = 256;

/// Observations `(Y_i, X_i)` with every coordinate in `(0, 1)`.
///
/// `x` is stored row-major, `n × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return arg("a dataset needs at least one predictor");
        }
        if x.len() != y.len() * p {
            return arg(format!(
                "covariate matrix has {} entries, expected {} x {p}",
                x.len(),
                y.len()
            ));
        }
        for (i, &v) in y.iter().enumerate() {
            check_open_unit(v, &format!("y[{}]", i + 1))?;
        }
        for (idx, &v) in x.iter().enumerate() {
            check_open_unit(v, &format!("x[{}][{}]", idx / p + 1, idx % p + 1))?;
        }
        Ok(Self { x, y, p })
    }

    /// A dataset without observations (prior predictive computations).
    pub fn empty(p: usize) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), p)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Covariates of observation `i` (0-based).
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// The same observations with the columns reordered: new column `k` is old
    /// column `perm[k]` (0-based).
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.p];
        if perm.len() != self.p || perm.iter().any(|&k| k >= self.p || std::mem::replace(&mut seen[k], true)) {
            return arg("not a permutation of the predictor columns");
        }
        let x = (0..self.n())
            .flat_map(|i| perm.iter().map(move |&k| self.x(i)[k]))
            .collect();
        Ok(Self {
            x,
            y: self.y.clone(),
            p: self.p,
        })
    }

    fn with_observation(&self, x: &[f64], y: f64) -> Result<Self> {
        self.check_query(x, y)?;
        let mut out = self.clone();
        out.x.extend_from_slice(x);
        out.y.push(y);
        Ok(out)
    }

    fn check_query_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return arg(format!(
                "query has {} covariates but the data have {}",
                x.len(),
                self.p
            ));
        }
        for (k, &v) in x.iter().enumerate() {
            check_open_unit(v, &format!("query x{}", k + 1))?;
        }
        Ok(())
    }

    fn check_query(&self, x: &[f64], y: f64) -> Result<()> {
        self.check_query_x(x)?;
        check_open_unit(y, "query y")
    }
}

/// Observation counts per covariate cell tuple and response bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTensor {
    pub y_dim: usize,
    /// Nonempty groups only; cell tuples are 1-based.
    pub cells: BTreeMap<Vec<usize>, Vec<u64>>,
    pub total: u64,
}

impl CountTensor {
    pub fn new(y_dim: usize) -> Self {
        Self {
            y_dim,
            cells: BTreeMap::new(),
            total: 0,
        }
    }

    /// Adds one observation in group `cells`, bin `bin` (1-based).
    pub fn add(&mut self, cells: Vec<usize>, bin: usize) {
        let y_dim = self.y_dim;
        self.cells.entry(cells).or_insert_with(|| vec![0; y_dim])[bin - 1] += 1;
        self.total += 1;
    }
}

/// Bins each observation into its covariate cell tuple and response bin.
pub fn count_cells(
    data: &Dataset,
    model: &ModelIndex,
    alloc: &BasisAllocation,
    order: usize,
) -> Result<CountTensor> {
    if order != 1 {
        return contract(format!(
            "posterior counts require histogram bases (order 1), got order {order}"
        ));
    }
    check_model(model, alloc, data.p())?;
    let mut counts = CountTensor::new(alloc.y_dim);
    for i in 0..data.n() {
        let x = data.x(i);
        let cells = model
            .predictors()
            .iter()
            .zip(&alloc.x_dims)
            .map(|(&m, &j)| haar_cell(x[m - 1], j))
            .collect();
        counts.add(cells, haar_cell(data.y()[i], alloc.y_dim));
    }
    Ok(counts)
}

fn check_model(model: &ModelIndex, alloc: &BasisAllocation, p: usize) -> Result<()> {
    if model.size() != alloc.x_dims.len() {
        return arg(format!(
            "model has {} predictors but the allocation has {} covariate sizes",
            model.size(),
            alloc.x_dims.len()
        ));
    }
    if model.predictors().last().is_some_and(|&m| m > p) {
        return arg(format!(
            "model {:?} refers to predictors beyond p = {p}",
            model.predictors()
        ));
    }
    Ok(())
}

/// `log ∫ ∏_g ∏_j η_{g,j}^{n_{g,j}} dDir(a)`, group by group.
pub fn log_dirichlet_integral(counts: &CountTensor, a: f64) -> f64 {
    let j0a = counts.y_dim as f64 * a;
    let lg_a = ln_gamma(a);
    let lg_j0a = ln_gamma(j0a);
    counts
        .cells
        .values()
        .filter(|bins| bins.iter().any(|&c| c > 0))
        .map(|bins| {
            let ng: u64 = bins.iter().sum();
            let inner: f64 = bins
                .iter()
                .map(|&c| ln_gamma(a + c as f64) - lg_a)
                .sum();
            lg_j0a - ln_gamma(j0a + ng as f64) + inner
        })
        .sum()
}

/// `log` of one summand without the basis-size prior:
/// `(#obs)·log J₀ + log I(counts)`, with the query adjoined when given.
pub fn log_term(
    model: &ModelIndex,
    alloc: &BasisAllocation,
    data: &Dataset,
    query: Option<(&[f64], f64)>,
    a: f64,
) -> Result<f64> {
    let extended;
    let data = match query {
        Some((x, y)) => {
            extended = data.with_observation(x, y)?;
            &extended
        }
        None => data,
    };
    let counts = count_cells(data, model, alloc, 1)?;
    Ok(data.n() as f64 * (alloc.y_dim as f64).ln() + log_dirichlet_integral(&counts, a))
}

/// `log Π₃(alloc) + log_term(…)`: one summand of `W¹` (or `W⁰` with a query).
pub fn term_value(
    model: &ModelIndex,
    alloc: &BasisAllocation,
    data: &Dataset,
    query: Option<(&[f64], f64)>,
    prior: &PriorConfig,
) -> Result<f64> {
    if prior.spline_order != 1 {
        return contract("the posterior engine supports spline order 1 only");
    }
    let log_pi3 = prior.basis_sizes(model.size())?.log_pmf(alloc);
    Ok(log_pi3 + log_term(model, alloc, data, query, prior.dirichlet_a)?)
}

/// How the sums over models and basis sizes are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    MonteCarlo,
    Enumerate,
}

/// Sampling sizes and seed for the posterior engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSettings {
    /// Basis-size draws per model.
    pub n_star: usize,
    /// Model draws when the model space is larger than this; otherwise every
    /// model is summed exactly with its prior weight.
    pub n_models: usize,
    pub mode: EstimatorMode,
    pub seed: u64,
    /// Largest number of terms enumerate mode may visit.
    pub enumerate_budget: u64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            n_star: 100,
            n_models: 2000,
            mode: EstimatorMode::MonteCarlo,
            seed: 0,
            enumerate_budget: 1_000_000,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_star == 0 || self.n_models == 0 {
            return arg("n_star and n_models must be at least 1");
        }
        Ok(())
    }
}

/// Posterior mean (and optionally second moment) at one `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub mean: f64,
    pub second_moment: Option<f64>,
    pub variance: Option<f64>,
    /// `log Σ W⁰` over the evaluated terms.
    pub log_numerator: f64,
    /// `log Σ W¹` over the evaluated terms.
    pub log_denominator: f64,
    pub terms_used: u64,
}

/// Posterior mean of `f(· | x)` on a grid of responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub y_grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_denominator: f64,
    pub terms_used: u64,
}

/// `log W` for one model: the `Π₃`-weighted sum of [`log_term`] over basis
/// sizes, exactly (enumerate) or as an average over `N*` prior draws.
pub fn estimate_w(
    model: &ModelIndex,
    data: &Dataset,
    query: Option<(&[f64], f64)>,
    settings: &EstimatorSettings,
    prior: &PriorConfig,
) -> Result<f64> {
    settings.validate()?;
    prior.validate(None)?;
    if prior.spline_order != 1 {
        return contract("the posterior engine supports spline order 1 only");
    }
    let dist = prior.basis_sizes(model.size())?;
    let mut acc = LogSumExp::new();
    match settings.mode {
        EstimatorMode::Enumerate => {
            let cells = dist.grid_size() as u64;
            if cells > settings.enumerate_budget {
                return contract(format!(
                    "enumeration needs {cells} terms, budget is {}",
                    settings.enumerate_budget
                ));
            }
            for alloc in dist.allocations() {
                acc.push(dist.log_pmf(&alloc) + log_term(model, &alloc, data, query, prior.dirichlet_a)?);
            }
            Ok(acc.value())
        }
        EstimatorMode::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, &[3]));
            for _ in 0..settings.n_star {
                let alloc = dist.sample(&mut rng);
                acc.push(log_term(model, &alloc, data, query, prior.dirichlet_a)?);
            }
            Ok(acc.value() - (settings.n_star as f64).ln())
        }
    }
}

/// Posterior mean of `f(y | x)`.
pub fn posterior_mean(
    x: &[f64],
    y: f64,
    data: &Dataset,
    prior: &PriorConfig,
    settings: &EstimatorSettings,
) -> Result<PosteriorEstimate> {
    data.check_query(x, y)?;
    let engine = PosteriorEngine::new(data, prior, settings)?;
    let fit = engine.evaluate(&[x.to_vec()], false)?;
    Ok(fit.estimate(0, y))
}

/// Posterior second moment and variance of `f(y | x)`.
pub fn posterior_second_moment(
    x: &[f64],
    y: f64,
    data: &Dataset,
    prior: &PriorConfig,
    settings: &EstimatorSettings,
) -> Result<PosteriorEstimate> {
    data.check_query(x, y)?;
    let engine = PosteriorEngine::new(data, prior, settings)?;
    let fit = engine.evaluate(&[x.to_vec()], true)?;
    Ok(fit.estimate(0, y))
}

/// Posterior mean of `f(y | x)` at every `y` of a sorted grid, from one shared
/// set of draws.
pub fn posterior_density_grid(
    x: &[f64],
    y_grid: &[f64],
    data: &Dataset,
    prior: &PriorConfig,
    settings: &EstimatorSettings,
) -> Result<GridEstimate> {
    data.check_query_x(x)?;
    check_grid(y_grid)?;
    let engine = PosteriorEngine::new(data, prior, settings)?;
    let fit = engine.evaluate(&[x.to_vec()], false)?;
    Ok(fit.grid(0, y_grid))
}

pub(crate) fn check_grid(y_grid: &[f64]) -> Result<()> {
    for (i, &y) in y_grid.iter().enumerate() {
        check_open_unit(y, &format!("y_grid[{i}]"))?;
    }
    if y_grid.windows(2).any(|w| w[1] < w[0]) {
        return arg("y grid must be sorted in increasing order");
    }
    Ok(())
}

/// How the outer sum over models is handled.
#[derive(Debug, Clone)]
enum Outer {
    /// Every model in the support with `log Π₁(r) + log Π₂(model)`.
    Exact(Vec<(ModelIndex, f64)>),
    /// `M` i.i.d. draws from `Π₁ × Π₂`, equally weighted.
    Sampled(usize),
}

#[derive(Debug, Clone, Copy)]
enum Inner {
    /// Every allocation in the truncated grid, weighted by `Π₃`.
    Enumerate,
    /// `N*` i.i.d. draws from `Π₃`, equally weighted.
    Sampled(usize),
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    outer: usize,
    chunk: usize,
}

/// Prepared state for evaluating posterior moments at many queries from one
/// shared set of terms.
pub struct PosteriorEngine<'a> {
    data: &'a Dataset,
    prior: &'a PriorConfig,
    settings: &'a EstimatorSettings,
    weights: Option<Vec<f64>>,
    size: SizeDistribution,
    basis: BTreeMap<usize, BasisSizeDistribution>,
    outer: Outer,
    inner: Inner,
    units: Vec<Unit>,
    j_min: usize,
    j_max: usize,
    rising_a: LogRising,
    /// `log Γ(J₀a + m) − log Γ(J₀a)` tables, indexed by `J₀ − j_min`.
    rising_j0a: Vec<LogRising>,
}

/// Accumulated posterior sums for a batch of queries.
#[derive(Debug, Clone)]
pub struct PredictiveFit {
    j_min: usize,
    j_max: usize,
    /// `log` of the common scale applied to every term.
    log_scale: f64,
    terms: u64,
    denominator: ExactSum,
    first: Vec<Vec<ExactSum>>,
    second: Option<Vec<Vec<ExactSum>>>,
}

impl<'a> PosteriorEngine<'a> {
    pub fn new(
        data: &'a Dataset,
        prior: &'a PriorConfig,
        settings: &'a EstimatorSettings,
    ) -> Result<Self> {
        settings.validate()?;
        prior.validate(Some(data.p()))?;
        if prior.spline_order != 1 {
            return contract(format!(
                "the posterior engine supports spline order 1 only, got {}",
                prior.spline_order
            ));
        }
        let p = data.p();
        let weights = match prior.inclusion {
            InclusionPrior::UniformSubsets => None,
            InclusionPrior::CorrelationWeighted { epsilon_floor } => Some(if data.n() >= 3 {
                marginal_correlation_weights(data, epsilon_floor)?
            } else {
                vec![1.0 / p as f64; p]
            }),
        };
        let size = SizeDistribution::new(&prior.size_prior, p);
        let support = size.support();
        if support.is_empty() {
            return arg(format!("the model-size prior has no mass for p = {p}"));
        }
        let mut basis = BTreeMap::new();
        for &r in &support {
            basis.insert(r, prior.basis_sizes(r)?);
        }
        let model_count: f64 = support.iter().map(|&r| ln_choose(p, r).exp()).sum();

        let (outer, inner) = match settings.mode {
            EstimatorMode::Enumerate => {
                let terms: f64 = support
                    .iter()
                    .map(|&r| ln_choose(p, r).exp() * basis[&r].grid_size() as f64)
                    .sum();
                if terms > settings.enumerate_budget as f64 {
                    return contract(format!(
                        "enumeration needs about {terms:.3e} terms, budget is {}",
                        settings.enumerate_budget
                    ));
                }
                let models = all_models(prior, &size, &support, p, weights.as_deref())?;
                (Outer::Exact(models), Inner::Enumerate)
            }
            EstimatorMode::MonteCarlo => {
                let outer = if model_count <= settings.n_models as f64 {
                    Outer::Exact(all_models(prior, &size, &support, p, weights.as_deref())?)
                } else {
                    Outer::Sampled(settings.n_models)
                };
                (outer, Inner::Sampled(settings.n_star))
            }
        };

        let outer_len = match &outer {
            Outer::Exact(models) => models.len(),
            Outer::Sampled(m) => *m,
        };
        let mut units = Vec::new();
        for o in 0..outer_len {
            let inner_len = match inner {
                Inner::Sampled(k) => k,
                Inner::Enumerate => match &outer {
                    Outer::Exact(models) => basis[&models[o].0.size()].grid_size(),
                    Outer::Sampled(_) => unreachable!("enumeration always sums models exactly"),
                },
            };
            for chunk in 0..inner_len.div_ceil(CHUNK) {
                units.push(Unit { outer: o, chunk });
            }
        }

        let (j_min, j_max) = prior.basis_prior.range();
        let max_m = data.n() + 2;
        let a = prior.dirichlet_a;
        Ok(Self {
            data,
            prior,
            settings,
            weights,
            size,
            basis,
            outer,
            inner,
            units,
            j_min,
            j_max,
            rising_a: LogRising::new(a, max_m),
            rising_j0a: (j_min..=j_max)
                .map(|j| LogRising::new(j as f64 * a, max_m))
                .collect(),
        })
    }

    /// Total number of terms the engine evaluates per query batch.
    pub fn term_count(&self) -> u64 {
        self.units.iter().map(|u| self.unit_len(u) as u64).sum()
    }

    fn inner_len(&self, outer: usize) -> usize {
        match (self.inner, &self.outer) {
            (Inner::Sampled(k), _) => k,
            (Inner::Enumerate, Outer::Exact(models)) => self.basis[&models[outer].0.size()].grid_size(),
            (Inner::Enumerate, Outer::Sampled(_)) => 0,
        }
    }

    fn unit_len(&self, unit: &Unit) -> usize {
        let len = self.inner_len(unit.outer);
        (len - unit.chunk * CHUNK).min(CHUNK)
    }

    fn unit_model(&self, outer: usize) -> Result<(ModelIndex, f64)> {
        match &self.outer {
            Outer::Exact(models) => Ok(models[outer].clone()),
            Outer::Sampled(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.settings.seed, &[0, outer as u64]));
                let r = self.size.sample(&mut rng)?;
                let model = self.prior.sample_subset(r, self.data.p(), self.weights.as_deref(), &mut rng)?;
                Ok((model, 0.0))
            }
        }
    }

    /// The unit's model and its terms as `(allocation, prior log weight)`.
    fn unit_terms(&self, unit: &Unit) -> Result<(ModelIndex, Vec<(BasisAllocation, f64)>)> {
        let (model, model_lw) = self.unit_model(unit.outer)?;
        let dist = &self.basis[&model.size()];
        let start = unit.chunk * CHUNK;
        let len = self.unit_len(unit);
        let terms = match self.inner {
            Inner::Enumerate => dist
                .allocations()
                .skip(start)
                .take(len)
                .map(|alloc| {
                    let lw = model_lw + dist.log_pmf(&alloc);
                    (alloc, lw)
                })
                .collect(),
            Inner::Sampled(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    self.settings.seed,
                    &[1, unit.outer as u64, unit.chunk as u64],
                ));
                (0..len).map(|_| (dist.sample(&mut rng), model_lw)).collect()
            }
        };
        Ok((model, terms))
    }

    fn log_weight(&self, counts: &GroupedCounts, prior_lw: f64) -> f64 {
        if prior_lw == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let j0 = counts.y_dim;
        let rising_j0a = &self.rising_j0a[j0 - self.j_min];
        let mut bins: Vec<u32> = counts.bins.iter().copied().filter(|&c| c > 0).collect();
        bins.sort_unstable();
        let mut totals = counts.totals.clone();
        totals.sort_unstable();
        let mut log_i = 0.0;
        for &m in &bins {
            log_i += self.rising_a.get(m as usize);
        }
        for &m in &totals {
            log_i -= rising_j0a.get(m as usize);
        }
        prior_lw + self.data.n() as f64 * (j0 as f64).ln() + log_i
    }

    /// Accumulates the posterior sums for each query covariate vector.
    ///
    /// With `second_moment`, the sums needed for `E[f(y|x)²]` are kept too.
    pub fn evaluate(&self, queries: &[Vec<f64>], second_moment: bool) -> Result<PredictiveFit> {
        for x in queries {
            self.data.check_query_x(x)?;
        }
        let log_weights: Vec<Vec<f64>> = self
            .units
            .par_iter()
            .map(|unit| {
                let (model, terms) = self.unit_terms(unit)?;
                Ok(terms
                    .iter()
                    .map(|(alloc, lw)| {
                        let counts = GroupedCounts::build(self.data, &model, alloc);
                        self.log_weight(&counts, *lw)
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let max = log_weights
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Runtime(format!(
                "every posterior term underflowed (n = {}, p = {}, mode = {:?}, prior = {:?})",
                self.data.n(),
                self.data.p(),
                self.settings.mode,
                self.prior
            )));
        }

        let slots: usize = (self.j_min..=self.j_max).sum();
        let empty = || PredictiveFit {
            j_min: self.j_min,
            j_max: self.j_max,
            log_scale: max,
            terms: 0,
            denominator: ExactSum::new(),
            first: vec![vec![ExactSum::new(); slots]; queries.len()],
            second: second_moment.then(|| vec![vec![ExactSum::new(); slots]; queries.len()]),
        };
        let a = self.prior.dirichlet_a;
        let fit = self
            .units
            .par_iter()
            .zip(log_weights.par_iter())
            .try_fold(empty, |mut acc, (unit, lws)| -> Result<PredictiveFit> {
                let (model, terms) = self.unit_terms(unit)?;
                acc.terms += terms.len() as u64;
                let mut query_cells = vec![0u32; model.size()];
                for ((alloc, _), &lw) in terms.iter().zip(lws) {
                    let shift = lw - max;
                    if !(shift >= LOG_UNDERFLOW_FLOOR) {
                        continue;
                    }
                    let w = shift.exp();
                    acc.denominator.add(w);
                    let counts = GroupedCounts::build(self.data, &model, alloc);
                    let j0 = alloc.y_dim;
                    let j0f = j0 as f64;
                    let offset = slot_offset(self.j_min, j0);
                    for (q, x) in queries.iter().enumerate() {
                        for (slot, (&m, &jk)) in query_cells.iter_mut().zip(model.predictors().iter().zip(&alloc.x_dims)) {
                            *slot = haar_cell(x[m - 1], jk) as u32;
                        }
                        let (bins, total) = counts.lookup(&query_cells);
                        let denom = j0f * a + total as f64;
                        for j in 0..j0 {
                            let nj = bins.map_or(0.0, |b| b[j] as f64);
                            let ratio = j0f * (a + nj) / denom;
                            acc.first[q][offset + j].add(w * ratio);
                            if let Some(second) = acc.second.as_mut() {
                                let sm = j0f * j0f * (a + nj) * (a + nj + 1.0) / (denom * (denom + 1.0));
                                second[q][offset + j].add(w * sm);
                            }
                        }
                    }
                }
                Ok(acc)
            })
            .try_reduce(empty, |mut left, right| {
                left.merge(&right);
                Ok(left)
            })?;
        if fit.denominator.value() <= 0.0 {
            return Err(Error::Runtime("posterior denominator underflowed".into()));
        }
        Ok(fit)
    }
}

fn slot_offset(j_min: usize, j0: usize) -> usize {
    (j_min..j0).sum()
}

/// Every model in the support with `log Π₁(r) + log Π₂(model)`.
fn all_models(
    prior: &PriorConfig,
    size: &SizeDistribution,
    support: &[usize],
    p: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<(ModelIndex, f64)>> {
    let mut out = Vec::new();
    for &r in support {
        let log_r = size.log_pmf(r);
        let mut combo: Vec<usize> = (1..=r).collect();
        loop {
            let model = ModelIndex::new(combo.clone(), Some(p))?;
            let lw = log_r + prior.log_pmf_subset(&model, p, weights)?;
            if lw > f64::NEG_INFINITY {
                out.push((model, lw));
            }
            // Next r-combination of 1..=p in lexicographic order.
            let Some(i) = (0..r).rev().find(|&i| combo[i] < p - (r - 1 - i)) else {
                break;
            };
            combo[i] += 1;
            for k in i + 1..r {
                combo[k] = combo[k - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Sparse counts for one `(model, allocation)`: groups sorted by cell tuple.
struct GroupedCounts {
    r: usize,
    y_dim: usize,
    keys: Vec<u32>,
    bins: Vec<u32>,
    totals: Vec<u32>,
}

impl GroupedCounts {
    fn build(data: &Dataset, model: &ModelIndex, alloc: &BasisAllocation) -> Self {
        let n = data.n();
        let r = model.size();
        let width = r + 1;
        let mut cells = vec![0u32; n * width];
        for i in 0..n {
            let x = data.x(i);
            let row = &mut cells[i * width..(i + 1) * width];
            for (slot, (&m, &jk)) in row.iter_mut().zip(model.predictors().iter().zip(&alloc.x_dims)) {
                *slot = haar_cell(x[m - 1], jk) as u32;
            }
            row[r] = haar_cell(data.y()[i], alloc.y_dim) as u32;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| cells[a * width..a * width + r].cmp(&cells[b * width..b * width + r]));

        let mut out = Self {
            r,
            y_dim: alloc.y_dim,
            keys: Vec::new(),
            bins: Vec::new(),
            totals: Vec::new(),
        };
        let mut prev: Option<&[u32]> = None;
        for &i in &order {
            let key = &cells[i * width..i * width + r];
            if prev != Some(key) {
                out.keys.extend_from_slice(key);
                out.bins.extend(std::iter::repeat_n(0, alloc.y_dim));
                out.totals.push(0);
                prev = Some(key);
            }
            let g = out.totals.len() - 1;
            out.bins[g * alloc.y_dim + cells[i * width + r] as usize - 1] += 1;
            out.totals[g] += 1;
        }
        out
    }

    fn lookup(&self, key: &[u32]) -> (Option<&[u32]>, u32) {
        let groups = self.totals.len();
        let (mut lo, mut hi) = (0, groups);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.keys[mid * self.r..(mid + 1) * self.r].cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => {
                    return (
                        Some(&self.bins[mid * self.y_dim..(mid + 1) * self.y_dim]),
                        self.totals[mid],
                    )
                }
            }
        }
        (None, 0)
    }
}

impl PredictiveFit {
    fn merge(&mut self, other: &PredictiveFit) {
        self.terms += other.terms;
        self.denominator.merge(&other.denominator);
        for (mine, theirs) in self.first.iter_mut().zip(&other.first) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                m.merge(t);
            }
        }
        if let (Some(mine), Some(theirs)) = (self.second.as_mut(), other.second.as_ref()) {
            for (mq, tq) in mine.iter_mut().zip(theirs) {
                for (m, t) in mq.iter_mut().zip(tq) {
                    m.merge(t);
                }
            }
        }
    }

    pub fn query_count(&self) -> usize {
        self.first.len()
    }

    pub fn terms_used(&self) -> u64 {
        self.terms
    }

    pub fn log_denominator(&self) -> f64 {
        self.denominator.value().ln() + self.log_scale
    }

    /// Exact sum over allocations of the slot holding `y`.
    fn numerator(&self, sums: &[ExactSum], y: f64) -> f64 {
        let mut total = ExactSum::new();
        for j0 in self.j_min..=self.j_max {
            total.merge(&sums[slot_offset(self.j_min, j0) + haar_cell(y, j0) - 1]);
        }
        total.value()
    }

    /// Posterior mean of `f(y | x_q)`.
    pub fn mean(&self, q: usize, y: f64) -> f64 {
        self.numerator(&self.first[q], y) / self.denominator.value()
    }

    /// Posterior second moment of `f(y | x_q)`, when it was accumulated.
    pub fn second_moment(&self, q: usize, y: f64) -> Option<f64> {
        self.second
            .as_ref()
            .map(|s| self.numerator(&s[q], y) / self.denominator.value())
    }

    pub fn estimate(&self, q: usize, y: f64) -> PosteriorEstimate {
        let num = self.numerator(&self.first[q], y);
        let mean = num / self.denominator.value();
        let second_moment = self.second_moment(q, y);
        PosteriorEstimate {
            mean,
            second_moment,
            variance: second_moment.map(|s| (s - mean * mean).max(0.0)),
            log_numerator: num.ln() + self.log_scale,
            log_denominator: self.log_denominator(),
            terms_used: self.terms,
        }
    }

    pub fn grid(&self, q: usize, y_grid: &[f64]) -> GridEstimate {
        GridEstimate {
            y_grid: y_grid.to_vec(),
            mean: y_grid.iter().map(|&y| self.mean(q, y)).collect(),
            log_denominator: self.log_denominator(),
            terms_used: self.terms,
        }
    }
}
