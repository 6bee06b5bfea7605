//! Simulation examples with Beta conditional densities, prediction-error
//! metrics and the replicated benchmark loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaSampler, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous};

use crate::error::{arg, contract, Error, Result};
use crate::numeric::derive_seed;
use crate::posterior::{check_grid, Dataset, EstimatorSettings, PosteriorEngine};
use crate::prior::PriorConfig;

/// Covariates are drawn uniformly from this interval.
pub const X_LOW: f64 = 0.05;
pub const X_HIGH: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    /// `Y | X ~ Beta(4X₁ + 3X₂², 10X₂)`.
    Example1,
    /// `Y | X ~ Beta(5X₂ exp(2X₁), 5X₃² + 3X₄)`.
    Example2,
}

impl ExampleId {
    pub fn name(self) -> &'static str {
        match self {
            ExampleId::Example1 => "example1",
            ExampleId::Example2 => "example2",
        }
    }

    /// Smallest number of predictors the example needs.
    pub fn min_p(self) -> usize {
        match self {
            ExampleId::Example1 => 2,
            ExampleId::Example2 => 4,
        }
    }

    pub fn check_p(self, p: usize) -> Result<()> {
        if p < self.min_p() {
            return arg(format!("{} requires p >= {}", self.name(), self.min_p()));
        }
        Ok(())
    }
}

impl std::str::FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ExampleId::Example1),
            "example2" => Ok(ExampleId::Example2),
            other => arg(format!("unknown example {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationExample {
    pub id: ExampleId,
    pub n: usize,
    pub p: usize,
}

impl SimulationExample {
    pub fn new(id: ExampleId, n: usize, p: usize) -> Result<Self> {
        id.check_p(p)?;
        Ok(Self { id, n, p })
    }
}

/// Beta shape parameters of `Y | X = x`.
pub fn beta_shapes(id: ExampleId, x: &[f64]) -> Result<(f64, f64)> {
    id.check_p(x.len())?;
    let shapes = match id {
        ExampleId::Example1 => (4.0 * x[0] + 3.0 * x[1] * x[1], 10.0 * x[1]),
        ExampleId::Example2 => (
            5.0 * x[1] * (2.0 * x[0]).exp(),
            5.0 * x[2] * x[2] + 3.0 * x[3],
        ),
    };
    if !(shapes.0 > 0.0 && shapes.1 > 0.0) {
        return contract(format!(
            "nonpositive Beta shapes {shapes:?} for {} at x = {x:?}",
            id.name()
        ));
    }
    Ok(shapes)
}

/// The true conditional density `f₀(y | x)`.
pub fn true_density(id: ExampleId, x: &[f64], y: f64) -> Result<f64> {
    let (a, b) = beta_shapes(id, x)?;
    let beta = Beta::new(a, b).map_err(|e| Error::Contract(e.to_string()))?;
    Ok(beta.pdf(y))
}

/// `n` observations with covariates uniform on `[0.05, 0.95]^p`.
pub fn simulate_dataset<R: Rng + ?Sized>(example: &SimulationExample, rng: &mut R) -> Result<Dataset> {
    example.id.check_p(example.p)?;
    let p = example.p;
    let mut x = Vec::with_capacity(example.n * p);
    let mut y = Vec::with_capacity(example.n);
    for _ in 0..example.n {
        let row: Vec<f64> = (0..p).map(|_| rng.random_range(X_LOW..=X_HIGH)).collect();
        let (a, b) = beta_shapes(example.id, &row)?;
        let sampler = BetaSampler::new(a, b).map_err(|e| Error::Contract(e.to_string()))?;
        // Extreme shapes can round a draw onto the boundary.
        let v = loop {
            let v = sampler.sample(rng);
            if v > 0.0 && v < 1.0 {
                break v;
            }
        };
        x.extend_from_slice(&row);
        y.push(v);
    }
    Dataset::new(x, y, p)
}

/// Composite trapezoid rule of samples `f` over `grid`.
fn trapezoid(grid: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    grid.windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1)))
        .sum()
}

fn check_shapes(a: &[Vec<f64>], b: &[Vec<f64>], y_grid: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return arg(format!("{} estimate rows vs {} truth rows", a.len(), b.len()));
    }
    if let Some(row) = a.iter().chain(b).find(|row| row.len() != y_grid.len()) {
        return arg(format!(
            "density row has {} values for a grid of {}",
            row.len(),
            y_grid.len()
        ));
    }
    if a.is_empty() {
        return arg("at least one test point is required");
    }
    Ok(())
}

/// `sqrt(mean_x ∫ (f̂(y|x) − f₀(y|x))² dy)`, trapezoid rule in `y`.
///
/// Rows are test points, columns follow `y_grid`.
pub fn l2_prediction_error(estimate: &[Vec<f64>], truth: &[Vec<f64>], y_grid: &[f64]) -> Result<f64> {
    check_shapes(estimate, truth, y_grid)?;
    let total: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| trapezoid(y_grid, |i| (e[i] - t[i]).powi(2)))
        .sum();
    Ok((total / estimate.len() as f64).sqrt())
}

/// Root average squared Hellinger distance from density values on a grid.
pub fn hellinger_from_grids(f1: &[Vec<f64>], f2: &[Vec<f64>], y_grid: &[f64]) -> Result<f64> {
    check_shapes(f1, f2, y_grid)?;
    if let Some(v) = f1.iter().chain(f2).flatten().find(|&&v| !(v >= 0.0)) {
        return contract(format!("negative or undefined density value {v}"));
    }
    let total: f64 = f1
        .iter()
        .zip(f2)
        .map(|(a, b)| trapezoid(y_grid, |i| (a[i].sqrt() - b[i].sqrt()).powi(2)))
        .sum();
    Ok((total / f1.len() as f64).sqrt())
}

/// `ρ = sqrt(mean_x ∫ (√f₁(y|x) − √f₂(y|x))² dy)` over the covariate sample.
pub fn hellinger_rho<F1, F2>(f1: F1, f2: F2, x_sample: &[Vec<f64>], y_grid: &[f64]) -> Result<f64>
where
    F1: Fn(&[f64], f64) -> Result<f64>,
    F2: Fn(&[f64], f64) -> Result<f64>,
{
    let tabulate = |f: &F1| -> Result<Vec<Vec<f64>>> {
        x_sample
            .iter()
            .map(|x| y_grid.iter().map(|&y| f(x, y)).collect())
            .collect()
    };
    let a = tabulate(&f1)?;
    let b = x_sample
        .iter()
        .map(|x| y_grid.iter().map(|&y| f2(x, y)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    hellinger_from_grids(&a, &b, y_grid)
}

/// `steps` midpoints `(k + 1/2)/steps` of a regular partition of `(0, 1)`.
pub fn midpoint_grid(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| (k as f64 + 0.5) / steps as f64).collect()
}

/// How fitted densities are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub n_test_points: usize,
    /// Number of midpoints of the response grid.
    pub y_grid_points: usize,
    pub hellinger: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_test_points: 50,
            y_grid_points: 101,
            hellinger: true,
        }
    }
}

/// Scores of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub l2_error: f64,
    pub hellinger: Option<f64>,
    /// Error of the constant estimate `f̂ ≡ 1` on the same test points.
    pub baseline_l2_error: f64,
    pub n_test: usize,
    pub y_grid_size: usize,
    pub runtime_seconds: f64,
}

/// Summary over replications for one `(n, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub example: ExampleId,
    pub n: usize,
    pub p: usize,
    pub n_star: usize,
    pub mean_error: f64,
    /// Absent with a single replication.
    pub std_error: Option<f64>,
    pub mean_baseline_error: f64,
    pub mean_hellinger: Option<f64>,
    pub runtime_seconds: f64,
    pub replications: Vec<EvalReport>,
}

/// Fits one simulated dataset and scores it on fresh test covariates.
pub fn evaluate_replication(
    example: &SimulationExample,
    prior: &PriorConfig,
    settings: &EstimatorSettings,
    options: &EvalOptions,
    seed: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    if options.n_test_points == 0 || options.y_grid_points < 2 {
        return arg("need at least one test point and two grid points");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let data = simulate_dataset(example, &mut rng)?;
    let test_x: Vec<Vec<f64>> = (0..options.n_test_points)
        .map(|_| (0..example.p).map(|_| rng.random_range(X_LOW..=X_HIGH)).collect())
        .collect();
    let y_grid = midpoint_grid(options.y_grid_points);
    check_grid(&y_grid)?;

    let fit_settings = EstimatorSettings {
        seed: derive_seed(seed, &[1]),
        ..settings.clone()
    };
    let engine = PosteriorEngine::new(&data, prior, &fit_settings)?;
    let fit = engine.evaluate(&test_x, false)?;
    let estimate: Vec<Vec<f64>> = (0..test_x.len())
        .map(|q| y_grid.iter().map(|&y| fit.mean(q, y)).collect())
        .collect();
    let truth = test_x
        .iter()
        .map(|x| y_grid.iter().map(|&y| true_density(example.id, x, y)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let ones = vec![vec![1.0; y_grid.len()]; test_x.len()];
    Ok(EvalReport {
        l2_error: l2_prediction_error(&estimate, &truth, &y_grid)?,
        hellinger: if options.hellinger {
            Some(hellinger_from_grids(&estimate, &truth, &y_grid)?)
        } else {
            None
        },
        baseline_l2_error: l2_prediction_error(&ones, &truth, &y_grid)?,
        n_test: test_x.len(),
        y_grid_size: y_grid.len(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Replicated fits over a grid of `(n, p)`.
///
/// Replication `k` of cell `(n, p)` uses a seed derived from
/// `(seed, n, p, k)`, so rows do not depend on the grid's other entries.
pub fn run_benchmark(
    example: ExampleId,
    grid: &[(usize, usize)],
    prior: &PriorConfig,
    settings: &EstimatorSettings,
    options: &EvalOptions,
    replications: usize,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    if replications == 0 {
        return arg("replications must be at least 1");
    }
    for &(_, p) in grid {
        example.check_p(p)?;
    }
    grid.iter()
        .map(|&(n, p)| {
            let start = Instant::now();
            let sim = SimulationExample::new(example, n, p)?;
            let reports = (0..replications)
                .into_par_iter()
                .map(|k| {
                    let rep_seed = derive_seed(seed, &[n as u64, p as u64, k as u64]);
                    evaluate_replication(&sim, prior, settings, options, rep_seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let errors: Vec<f64> = reports.iter().map(|r| r.l2_error).collect();
            let mean_error = mean(&errors);
            let std_error = (replications > 1).then(|| {
                let var = errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>()
                    / (replications - 1) as f64;
                (var / replications as f64).sqrt()
            });
            let baselines: Vec<f64> = reports.iter().map(|r| r.baseline_l2_error).collect();
            let hellinger: Option<Vec<f64>> = reports.iter().map(|r| r.hellinger).collect();
            Ok(BenchmarkRow {
                example,
                n,
                p,
                n_star: settings.n_star,
                mean_error,
                std_error,
                mean_baseline_error: mean(&baselines),
                mean_hellinger: hellinger.map(|h| mean(&h)),
                runtime_seconds: start.elapsed().as_secs_f64(),
                replications: reports,
            })
        })
        .collect()
}
