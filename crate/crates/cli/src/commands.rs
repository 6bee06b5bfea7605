use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tensordens::basis::{project, SplineSpec, TensorSpec};
use tensordens::evaluate::{run_benchmark, simulate_dataset, BenchmarkRow, ExampleId, SimulationExample};
use tensordens::posterior::{EstimatorMode, EstimatorSettings, PosteriorEngine};
use tensordens::prior::PriorConfig;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{fmt_f64, read_dataset, read_queries, to_json, write_dataset, write_file};

pub fn simulate(example: ExampleId, n: usize, p: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let sim = SimulationExample::new(example, n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = simulate_dataset(&sim, &mut rng)?;
    write_dataset(out, &data)?;
    println!("wrote {} observations of {} (p = {p}) to {}", n, example.name(), out.display());
    Ok(())
}

/// Parses `ymin:ymax:steps` into `steps` equally spaced responses.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("invalid --grid {text:?}: expected ymin:ymax:steps"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !(lo > 0.0 && hi < 1.0 && lo <= hi) || (steps == 1 && lo != hi) {
        return Err(CliError::Input(format!(
            "invalid --grid {text:?}: need 0 < ymin <= ymax < 1 and steps >= 1"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect())
}

pub struct FitArgs {
    pub data: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub variance: bool,
    pub record_timing: bool,
}

#[derive(Serialize)]
struct PointResult {
    x: Vec<f64>,
    y: f64,
    mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    second_moment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
}

#[derive(Serialize)]
struct GridResult {
    x: Vec<f64>,
    y_grid: Vec<f64>,
    mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    seed: u64,
    settings: &'a EstimatorSettings,
    prior: &'a PriorConfig,
    n: usize,
    p: usize,
    terms_used: u64,
    log_denominator: f64,
    queries: Vec<PointResult>,
    grids: Vec<GridResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

pub fn fit_predict(cfg: &RunConfig, args: FitArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let need = |flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str| {
        flag.or_else(|| fallback.clone())
            .ok_or_else(|| CliError::Input(format!("missing --{name} (or io.{name} in the config)")))
    };
    let data_path = need(args.data, &cfg.io.data, "data")?;
    let query_path = need(args.queries, &cfg.io.queries, "queries")?;
    let out_path = need(args.out, &cfg.io.out, "out")?;
    let data = read_dataset(&data_path)?;
    let queries = read_queries(&query_path)?;
    if let Some(x) = queries.x.first() {
        if x.len() != data.p() {
            return Err(CliError::Input(format!(
                "queries have {} covariates but the data have p = {}",
                x.len(),
                data.p()
            )));
        }
    }
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;
    if grid.is_none() && queries.y.is_none() {
        return Err(CliError::Input(
            "queries need a y column unless --grid is given".into(),
        ));
    }

    let engine = PosteriorEngine::new(&data, &cfg.prior, &cfg.estimator)?;
    let fit = engine.evaluate(&queries.x, args.variance)?;

    let points = match &queries.y {
        Some(ys) => queries
            .x
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(q, (x, &y))| {
                let est = fit.estimate(q, y);
                PointResult {
                    x: x.clone(),
                    y,
                    mean: est.mean,
                    second_moment: est.second_moment,
                    variance: est.variance,
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let grids: Vec<GridResult> = match &grid {
        Some(ys) => queries
            .x
            .iter()
            .enumerate()
            .map(|(q, x)| GridResult {
                x: x.clone(),
                y_grid: ys.clone(),
                mean: fit.grid(q, ys).mean,
                variance: args
                    .variance
                    .then(|| ys.iter().map(|&y| fit.estimate(q, y).variance.unwrap_or(0.0)).collect()),
            })
            .collect(),
        None => Vec::new(),
    };

    let output = FitOutput {
        seed: cfg.estimator.seed,
        settings: &cfg.estimator,
        prior: &cfg.prior,
        n: data.n(),
        p: data.p(),
        terms_used: fit.terms_used(),
        log_denominator: fit.log_denominator(),
        queries: points,
        grids,
        wall_time_seconds: args.record_timing.then(|| start.elapsed().as_secs_f64()),
    };
    write_file(&out_path, &to_json(&output)?)?;

    println!("{:>4}  {:>24}  {:>24}", "#", "y", "posterior mean");
    for (q, r) in output.queries.iter().enumerate() {
        println!("{:>4}  {:>24}  {:>24}", q + 1, fmt_f64(r.y), fmt_f64(r.mean));
    }
    for (q, g) in output.grids.iter().enumerate() {
        let integral: f64 = g
            .y_grid
            .windows(2)
            .zip(g.mean.windows(2))
            .map(|(y, m)| 0.5 * (y[1] - y[0]) * (m[0] + m[1]))
            .sum();
        println!("grid {:>3}: {} points, trapezoid mass {:.6}", q + 1, g.y_grid.len(), integral);
    }
    println!(
        "{} terms, mode {:?}, {:.2}s; results in {}",
        output.terms_used,
        cfg.estimator.mode,
        start.elapsed().as_secs_f64(),
        out_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ReplicationOut {
    l2_error: f64,
    hellinger: Option<f64>,
    baseline_l2_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<f64>,
}

#[derive(Serialize)]
struct RowOut {
    example: ExampleId,
    n: usize,
    p: usize,
    n_star: usize,
    mean_error: f64,
    std_error: Option<f64>,
    mean_baseline_error: f64,
    mean_hellinger: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<f64>,
    replications: Vec<ReplicationOut>,
}

#[derive(Serialize)]
struct BenchmarkOut<'a> {
    seed: u64,
    config: &'a RunConfig,
    rows: Vec<RowOut>,
}

fn row_out(row: &BenchmarkRow, timing: bool) -> RowOut {
    RowOut {
        example: row.example,
        n: row.n,
        p: row.p,
        n_star: row.n_star,
        mean_error: row.mean_error,
        std_error: row.std_error,
        mean_baseline_error: row.mean_baseline_error,
        mean_hellinger: row.mean_hellinger,
        runtime_seconds: timing.then_some(row.runtime_seconds),
        replications: row
            .replications
            .iter()
            .map(|r| ReplicationOut {
                l2_error: r.l2_error,
                hellinger: r.hellinger,
                baseline_l2_error: r.baseline_l2_error,
                runtime_seconds: timing.then_some(r.runtime_seconds),
            })
            .collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), fmt_f64)
}

pub fn benchmark(cfg: &RunConfig, out: Option<PathBuf>, dry_run: bool, record_timing: bool) -> Result<(), CliError> {
    let plan = &cfg.benchmark;
    if plan.grid.is_empty() || plan.replications == 0 {
        return Err(CliError::Input("benchmark grid is empty or replications is 0".into()));
    }
    for cell in &plan.grid {
        plan.example.check_p(cell.p)?;
    }
    println!(
        "{} with N* = {}, M = {}, mode {:?}, {} replications, seed {}",
        plan.example.name(),
        cfg.estimator.n_star,
        cfg.estimator.n_models,
        cfg.estimator.mode,
        plan.replications,
        cfg.estimator.seed
    );
    if dry_run {
        println!("{:>8}  {:>8}", "n", "p");
        for cell in &plan.grid {
            println!("{:>8}  {:>8}", cell.n, cell.p);
        }
        println!("dry run: nothing computed");
        return Ok(());
    }
    let out = out
        .or_else(|| cfg.io.out.clone())
        .ok_or_else(|| CliError::Input("missing --out (or io.out in the config)".into()))?;
    let grid: Vec<(usize, usize)> = plan.grid.iter().map(|c| (c.n, c.p)).collect();
    let rows = run_benchmark(
        plan.example,
        &grid,
        &cfg.prior,
        &cfg.estimator,
        &cfg.eval,
        plan.replications,
        cfg.estimator.seed,
    )?;

    let mut csv = String::from(
        "example,n,p,n_star,mean_error,std_error,runtime,mean_baseline_error,mean_hellinger\n",
    );
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.example.name(),
            row.n,
            row.p,
            row.n_star,
            fmt_f64(row.mean_error),
            opt(row.std_error),
            opt(record_timing.then_some(row.runtime_seconds)),
            fmt_f64(row.mean_baseline_error),
            opt(row.mean_hellinger),
        ));
    }
    write_file(&out, csv.as_bytes())?;
    let json_path = out.with_extension("json");
    let doc = BenchmarkOut {
        seed: cfg.estimator.seed,
        config: cfg,
        rows: rows.iter().map(|r| row_out(r, record_timing)).collect(),
    };
    write_file(&json_path, &to_json(&doc)?)?;

    println!(
        "{:>8} {:>6} {:>6} {:>12} {:>10} {:>12} {:>10} {:>9}",
        "example", "n", "p", "mean_error", "std_error", "uniform", "hellinger", "seconds"
    );
    for row in &rows {
        println!(
            "{:>8} {:>6} {:>6} {:>12.4} {:>10} {:>12.4} {:>10} {:>9.1}",
            row.example.name(),
            row.n,
            row.p,
            row.mean_error,
            row.std_error.map_or("NA".into(), |s| format!("{s:.4}")),
            row.mean_baseline_error,
            row.mean_hellinger.map_or("NA".into(), |h| format!("{h:.4}")),
            row.runtime_seconds
        );
    }
    println!("tables written to {} and {}", out.display(), json_path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ApproxTest {
    /// f(x) = 1.
    Constant,
    /// f(x) = sin(πx).
    Sin,
    /// f(x₁, x₂) = sin(πx₁)·x₂ with equal and unequal allocations.
    Aniso,
}

pub fn parse_j_list(text: &str) -> Result<Vec<usize>, CliError> {
    let list = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Input(format!("invalid J list {text:?}")))?;
    if list.is_empty() || list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Input("J list must be nonempty and strictly increasing".into()));
    }
    Ok(list)
}

fn sup_residual(f: impl Fn(&[f64]) -> f64, q: usize, dims: &[usize]) -> Result<f64, CliError> {
    let axes = dims
        .iter()
        .map(|&j| SplineSpec::with_dimension(q, j))
        .collect::<Result<Vec<_>, _>>()?;
    let tspec = TensorSpec::new(axes)?;
    let grid = 4 * dims.iter().copied().max().unwrap_or(1);
    Ok(project(f, &tspec, grid)?.sup_residual)
}

pub fn approx_report(q: usize, test: ApproxTest, j_list: &[usize], out: &Path) -> Result<(), CliError> {
    use std::f64::consts::PI;
    let mut rows: Vec<(String, String, f64, Option<f64>)> = Vec::new();
    match test {
        ApproxTest::Constant | ApproxTest::Sin => {
            let f = move |x: &[f64]| match test {
                ApproxTest::Constant => 1.0,
                _ => (PI * x[0]).sin(),
            };
            let mut prev = None;
            for &j in j_list {
                let r = sup_residual(f, q, &[j])?;
                rows.push(("equal".into(), j.to_string(), r, prev.map(|p: f64| p / r)));
                prev = Some(r);
            }
        }
        ApproxTest::Aniso => {
            let f = |x: &[f64]| (PI * x[0]).sin() * x[1];
            let mut prev_eq = None;
            let mut prev_un = None;
            for &j in j_list {
                if j % 2 != 0 || j / 2 < q {
                    return Err(CliError::Input(format!(
                        "anisotropic report needs even J with J/2 >= q, got {j}"
                    )));
                }
                let eq = sup_residual(f, q, &[j, j])?;
                rows.push(("equal".into(), format!("{j}x{j}"), eq, prev_eq.map(|p: f64| p / eq)));
                prev_eq = Some(eq);
                let un = sup_residual(f, q, &[2 * j, j / 2])?;
                rows.push(("unequal".into(), format!("{}x{}", 2 * j, j / 2), un, prev_un.map(|p: f64| p / un)));
                prev_un = Some(un);
            }
        }
    }
    let name = match test {
        ApproxTest::Constant => "constant",
        ApproxTest::Sin => "sin",
        ApproxTest::Aniso => "aniso",
    };
    let mut csv = String::from("test,q,allocation,J,sup_residual,ratio_to_previous\n");
    println!("{:>9} {:>9} {:>14} {:>10}", "allocation", "J", "sup_residual", "ratio");
    for (kind, dims, r, ratio) in &rows {
        csv.push_str(&format!("{name},{q},{kind},{dims},{},{}\n", fmt_f64(*r), opt(*ratio)));
        println!(
            "{:>9} {:>9} {:>14.4e} {:>10}",
            kind,
            dims,
            r,
            ratio.map_or("NA".into(), |v| format!("{v:.3}"))
        );
    }
    write_file(out, csv.as_bytes())
}

/// Applies command-line overrides to the estimator settings.
pub fn apply_estimator_flags(
    settings: &mut EstimatorSettings,
    seed: u64,
    enumerate: bool,
    monte_carlo: bool,
    n_star: Option<usize>,
    models: Option<usize>,
) {
    settings.seed = seed;
    if enumerate {
        settings.mode = EstimatorMode::Enumerate;
    }
    if monte_carlo {
        settings.mode = EstimatorMode::MonteCarlo;
    }
    if let Some(k) = n_star {
        settings.n_star = k;
    }
    if let Some(m) = models {
        settings.n_models = m;
    }
}
