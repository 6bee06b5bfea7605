//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};
use tensordens::basis::{bspline_integral, eval_all, eval_bspline, eval_normalized, project, SplineSpec, TensorSpec};
use tensordens::evaluate::{run_benchmark, EvalOptions, ExampleId};
use tensordens::model::{BasisAllocation, ModelIndex};
use tensordens::posterior::{
    log_dirichlet_integral, posterior_density_grid, posterior_mean, CountTensor, Dataset, EstimatorMode,
    EstimatorSettings, PosteriorEngine,
};
use tensordens::prior::{BasisPrior, InclusionPrior, PriorConfig, SizePrior};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn enumerate() -> EstimatorSettings {
    EstimatorSettings {
        mode: EstimatorMode::Enumerate,
        ..EstimatorSettings::default()
    }
}

fn random_prior(rng: &mut ChaCha8Rng, p: usize) -> PriorConfig {
    loop {
        let size_prior = if rng.random_bool(0.5) {
            let r_min = rng.random_range(0..=2);
            SizePrior::Uniform {
                r_min,
                r_max: r_min + rng.random_range(0..=3),
            }
        } else {
            SizePrior::DoubleExponential {
                c0: rng.random_range(0.1..1.0),
                t0: rng.random_range(0.5..2.0),
            }
        };
        let inclusion = if rng.random_bool(0.5) {
            InclusionPrior::UniformSubsets
        } else {
            InclusionPrior::CorrelationWeighted { epsilon_floor: 0.01 }
        };
        let j_min = rng.random_range(1..=4);
        let j_max = j_min + rng.random_range(0..=3);
        let basis_prior = if rng.random_bool(0.5) {
            BasisPrior::ZtpoissonTransform {
                lambda: rng.random_range(5.0..200.0),
                j_min,
                j_max,
            }
        } else {
            BasisPrior::AnisotropicJoint {
                c2: rng.random_range(0.01..0.5),
                kappa: rng.random_range(1.0..2.0),
                j_min,
                j_max,
            }
        };
        let cfg = PriorConfig {
            size_prior,
            inclusion,
            basis_prior,
            dirichlet_a: 1.0,
            spline_order: 1,
        };
        if cfg.validate(Some(p)).is_ok() {
            return cfg;
        }
    }
}

/// Zero observations: the posterior mean is the prior predictive, exactly 1.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut exact = 0;
    let mut total = 0;
    for c in 0..10 {
        let p = rng.random_range(1..=5);
        let prior = random_prior(&mut rng, p);
        let settings = if c % 2 == 0 {
            enumerate()
        } else {
            EstimatorSettings {
                n_star: 50,
                n_models: 20,
                seed: c as u64,
                ..EstimatorSettings::default()
            }
        };
        let data = Dataset::empty(p).unwrap();
        let engine = match PosteriorEngine::new(&data, &prior, &settings) {
            Ok(e) => e,
            Err(e) => return outcome(false, format!("config {c}: {e}")),
        };
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..p).map(|_| rng.random_range(0.001..0.999)).collect())
            .collect();
        let fit = engine.evaluate(&xs, false).unwrap();
        for q in 0..xs.len() {
            let m = fit.mean(q, rng.random_range(0.001..0.999));
            worst = worst.max((m - 1.0).abs());
            exact += usize::from(m == 1.0);
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && total == 100 && within(elapsed, 1.0),
        format!(
            "max |mean - 1| = {worst:.1e} over {total} queries ({exact} exactly 1.0), {:.3}s (limit 1s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Monte Carlo mean and standard error of `∏ η^n` under independent
/// `Dir(a, …, a)` groups, drawn by normalizing gamma variates.
fn mc_dirichlet(counts: &CountTensor, a: f64, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let gamma = Gamma::new(a, 1.0).unwrap();
    let (mut s, mut s2) = (0.0, 0.0);
    let mut g = vec![0.0; counts.y_dim];
    for _ in 0..draws {
        let mut v = 1.0;
        for bins in counts.cells.values() {
            g.iter_mut().for_each(|x| *x = gamma.sample(rng));
            let t: f64 = g.iter().sum();
            for (gi, &c) in g.iter().zip(bins) {
                v *= (gi / t).powi(c as i32);
            }
        }
        s += v;
        s2 += v * v;
    }
    let m = s / draws as f64;
    (m, ((s2 / draws as f64 - m * m) / draws as f64).sqrt())
}

fn bins(j0: usize, b: &[u64]) -> CountTensor {
    let mut c = CountTensor::new(j0);
    for (j, &k) in b.iter().enumerate() {
        for _ in 0..k {
            c.add(vec![1], j + 1);
        }
    }
    c
}

/// Single- and two-observation micro-cases.
fn criterion_2() -> Outcome {
    let prior = PriorConfig {
        size_prior: SizePrior::Uniform { r_min: 1, r_max: 1 },
        inclusion: InclusionPrior::UniformSubsets,
        basis_prior: BasisPrior::ZtpoissonTransform {
            lambda: 100.0,
            j_min: 2,
            j_max: 2,
        },
        dirichlet_a: 1.0,
        spline_order: 1,
    };
    let one = Dataset::new(vec![0.3], vec![0.7], 1).unwrap();
    let two = Dataset::new(vec![0.3, 0.35], vec![0.7, 0.6], 1).unwrap();
    let m1 = posterior_mean(&[0.3], 0.7, &one, &prior, &enumerate()).unwrap().mean;
    let m2 = posterior_mean(&[0.3], 0.7, &two, &prior, &enumerate()).unwrap().mean;
    let cases_ok = (m1 - 4.0 / 3.0).abs() <= 1e-9 && (m2 - 1.5).abs() <= 1e-9;

    // The Dirichlet forms behind both ratios: bins (0,1), (0,2), (0,3).
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mc_ok = true;
    let mut worst_z: f64 = 0.0;
    for k in 1..=3u64 {
        let counts = bins(2, &[0, k]);
        let exact = log_dirichlet_integral(&counts, 1.0).exp();
        let (m, se) = mc_dirichlet(&counts, 1.0, 2_000_000, &mut rng);
        let z = (m - exact).abs() / se;
        worst_z = worst_z.max(z);
        mc_ok &= z <= 3.0;
    }
    outcome(
        cases_ok && mc_ok,
        format!(
            "4/3 case {m1:.15}, 3/2 case {m2:.15} (tol 1e-9); MC oracle max |z| = {worst_z:.2} (limit 3)"
        ),
    )
}

/// Dirichlet integral vs Monte Carlo, and the add-one recurrence.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let j0 = rng.random_range(1..=3);
        let a = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let mut c = CountTensor::new(j0);
        for _ in 0..rng.random_range(0..=5) {
            c.add(vec![rng.random_range(1..=3)], rng.random_range(1..=j0));
        }
        let exact = log_dirichlet_integral(&c, a).exp();
        let (m, se) = mc_dirichlet(&c, a, 200_000, &mut rng);
        let z = if se > 0.0 {
            (m - exact).abs() / se
        } else if (m - exact).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
        failures += usize::from(z > 3.0);
    }
    let mut worst_rec: f64 = 0.0;
    for _ in 0..1000 {
        let j0 = rng.random_range(1..=4);
        let a = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let mut c = CountTensor::new(j0);
        for _ in 0..rng.random_range(0..=20) {
            c.add(vec![rng.random_range(1..=4)], rng.random_range(1..=j0));
        }
        let g = vec![rng.random_range(1..=4)];
        let j = rng.random_range(1..=j0);
        let ng: u64 = c.cells.get(&g).map_or(0, |b| b.iter().sum());
        let ngj = c.cells.get(&g).map_or(0, |b| b[j - 1]);
        let before = log_dirichlet_integral(&c, a);
        c.add(g, j);
        let after = log_dirichlet_integral(&c, a);
        let factor = ((a + ngj as f64) / (j0 as f64 * a + ng as f64)).ln();
        worst_rec = worst_rec.max((after - before - factor).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst_rec <= 1e-12 && within(elapsed, 120.0),
        format!(
            "50 tensors: max |z| = {worst_z:.2} ({failures} beyond 3 s.e.); recurrence max log error {worst_rec:.1e} on 1000 tensors; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn small_prior() -> PriorConfig {
    PriorConfig {
        size_prior: SizePrior::Uniform { r_min: 1, r_max: 2 },
        basis_prior: BasisPrior::ZtpoissonTransform {
            lambda: 100.0,
            j_min: 4,
            j_max: 5,
        },
        ..PriorConfig::default()
    }
}

fn seeded_data(n: usize, p: usize, seed: u64) -> Dataset {
    use tensordens::evaluate::{simulate_dataset, SimulationExample};
    let sim = SimulationExample::new(ExampleId::Example1, n, p).unwrap();
    simulate_dataset(&sim, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Monte Carlo vs enumeration on a small problem.
fn criterion_4() -> Outcome {
    let start = Instant::now();
    let prior = small_prior();
    let data = seeded_data(20, 3, 404);
    let mc = EstimatorSettings {
        n_star: 100_000,
        n_models: 10_000,
        seed: 4,
        ..EstimatorSettings::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let xs: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..3).map(|_| rng.random_range(0.05..0.95)).collect())
        .collect();
    let ys: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..0.95)).collect();
    let exact = PosteriorEngine::new(&data, &prior, &enumerate()).unwrap().evaluate(&xs, false).unwrap();
    let approx = PosteriorEngine::new(&data, &prior, &mc).unwrap().evaluate(&xs, false).unwrap();
    let worst = (0..5)
        .map(|q| (approx.mean(q, ys[q]) / exact.mean(q, ys[q]) - 1.0).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        worst < 0.05 && within(elapsed, 120.0),
        format!(
            "max relative error {:.3}% at 5 queries (limit 5%), {} MC terms, {:.1}s",
            worst * 100.0,
            approx.terms_used(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Enumerate-mode grids integrate to one.
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let prior = small_prior();
    // 200 midpoints: every bin edge of J = 4 and J = 5 falls between nodes.
    let m = 200;
    let grid: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
    let mut worst: f64 = 0.0;
    let mut nonneg = true;
    for s in 0..5 {
        let data = seeded_data(20 + 10 * s, 3, 500 + s as u64);
        let g = posterior_density_grid(&[0.3, 0.6, 0.8], &grid, &data, &prior, &enumerate()).unwrap();
        let integral: f64 = g.mean.iter().sum::<f64>() / m as f64;
        worst = worst.max((integral - 1.0).abs());
        nonneg &= g.mean.iter().all(|&v| v >= 0.0);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && nonneg && within(elapsed, 60.0),
        format!("max |integral - 1| = {worst:.1e} over 5 datasets (tol 1e-6), {:.2}s", elapsed.as_secs_f64()),
    )
}

/// Three-point Gauss–Legendre per knot interval: exact for the pieces.
fn knot_gauss(f: impl Fn(f64) -> f64, k: usize) -> f64 {
    let r = 0.6f64.sqrt();
    let h = 1.0 / k as f64;
    (0..k)
        .map(|i| {
            let c = (i as f64 + 0.5) * h;
            let g = |t: f64| f(c + 0.5 * h * t);
            0.5 * h * (5.0 * g(-r) + 8.0 * g(0.0) + 5.0 * g(r)) / 9.0
        })
        .sum()
}

/// Partition of unity, range, support and normalized integrals.
fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut violations = Vec::new();
    let mut worst_pu: f64 = 0.0;
    for _ in 0..10_000 {
        let q = rng.random_range(1..=4);
        let k = rng.random_range(1..=16);
        let spec = SplineSpec::new(q, k).unwrap();
        let x = rng.random_range(1e-9..1.0 - 1e-9);
        let knots = spec.knots();
        let active = eval_all(&spec, x).unwrap();
        let sum: f64 = active.iter().map(|&(_, v)| v).sum();
        worst_pu = worst_pu.max((sum - 1.0).abs());
        if active.len() > q {
            violations.push(format!("q={q} K={k} x={x}: {} active", active.len()));
        }
        for j in 1..=spec.dimension() {
            let v = eval_bspline(&spec, j, x).unwrap();
            if !(0.0..=1.0 + 1e-12).contains(&v) {
                violations.push(format!("q={q} K={k} j={j}: value {v}"));
            }
            let (lo, hi) = (knots[j - 1], knots[j + q - 1]);
            if v > 0.0 && !(x >= lo && x <= hi) {
                violations.push(format!("q={q} K={k} j={j}: positive outside [{lo}, {hi}]"));
            }
        }
    }
    let mut worst_int: f64 = 0.0;
    for q in 1..=4 {
        for k in 1..=16 {
            let spec = SplineSpec::new(q, k).unwrap();
            for j in 1..=spec.dimension() {
                let exact = bspline_integral(&spec, j).unwrap();
                let quad = knot_gauss(|x| eval_bspline(&spec, j, x).unwrap(), k);
                let norm = knot_gauss(|y| eval_normalized(&spec, j, y).unwrap(), k);
                worst_int = worst_int.max((exact - quad).abs()).max((norm - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations.is_empty() && worst_pu <= 1e-12 && worst_int <= 1e-12 && within(elapsed, 30.0),
        format!(
            "10^4 points: partition-of-unity error {worst_pu:.1e}, {} range/support violations; integral error {worst_int:.1e}; {:.2}s",
            violations.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Sup-residual decay of the projection of sin(πx) with q = 3.
fn criterion_7() -> Outcome {
    let start = Instant::now();
    let f = |x: &[f64]| (std::f64::consts::PI * x[0]).sin();
    let residuals: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&j| {
            let t = TensorSpec::new(vec![SplineSpec::with_dimension(3, j).unwrap()]).unwrap();
            project(f, &t, 4 * j).unwrap().sup_residual
        })
        .collect();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let elapsed = start.elapsed();
    outcome(
        ratios.iter().all(|r| (3.0..=5.5).contains(r)) && within(elapsed, 30.0),
        format!(
            "residuals {:.3e}, {:.3e}, {:.3e}; ratios {:.2}, {:.2} (band [3.0, 5.5])",
            residuals[0], residuals[1], residuals[2], ratios[0], ratios[1]
        ),
    )
}

fn benchmark_case(
    example: ExampleId,
    n: usize,
    p: usize,
    n_models: usize,
    replications: usize,
    seed: u64,
) -> (f64, f64, Duration) {
    let start = Instant::now();
    let settings = EstimatorSettings {
        n_star: 100,
        n_models,
        ..EstimatorSettings::default()
    };
    let rows = run_benchmark(
        example,
        &[(n, p)],
        &PriorConfig::default(),
        &settings,
        &EvalOptions::default(),
        replications,
        seed,
    )
    .unwrap();
    (rows[0].mean_error, rows[0].mean_baseline_error, start.elapsed())
}

fn criterion_8() -> Outcome {
    let (err, base, t) = benchmark_case(ExampleId::Example2, 100, 10, 2000, 10, 808);
    outcome(
        (0.45..=0.95).contains(&err) && err < base && within(t, 600.0),
        format!(
            "mean L2 error {err:.4} (band [0.45, 0.95]), uniform baseline {base:.4}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let (err, base, t) = benchmark_case(ExampleId::Example1, 100, 5, 2000, 10, 909);
    outcome(
        (0.5..=1.1).contains(&err) && within(t, 600.0),
        format!(
            "mean L2 error {err:.4} (band [0.5, 1.1]), uniform baseline {base:.4}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Outcome {
    let (err, base, t) = benchmark_case(ExampleId::Example2, 100, 500, 2000, 2, 1010);
    outcome(
        err.is_finite() && err < base && within(t, 1200.0),
        format!(
            "mean L2 error {err:.4}, uniform baseline {base:.4}, {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path, threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tensordens"))
        .args(args)
        .current_dir(dir)
        .env("TENSORDENS_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Byte-identical fit and benchmark outputs across runs and thread counts.
fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bench_config.json"),
        r#"{"estimator": {"n_star": 30}, "eval": {"n_test_points": 10},
            "benchmark": {"example": "example2", "grid": [{"n": 60, "p": 5}, {"n": 60, "p": 8}], "replications": 3}}"#,
    )
    .unwrap();
    std::fs::write(d.join("queries.csv"), "x1,x2,x3,x4,y\n0.2,0.4,0.6,0.8,0.3\n0.7,0.1,0.5,0.5,0.9\n").unwrap();
    let steps: Vec<(Vec<&str>, &str)> = vec![
        (vec!["simulate", "--example", "example2", "--n", "80", "--p", "4", "--seed", "5", "--out", "data.csv"], "1"),
        (vec!["fit-predict", "--data", "data.csv", "--queries", "queries.csv", "--grid", "0.05:0.95:19", "--variance", "--seed", "9", "--out", "fit_a.json"], "1"),
        (vec!["fit-predict", "--data", "data.csv", "--queries", "queries.csv", "--grid", "0.05:0.95:19", "--variance", "--seed", "9", "--out", "fit_b.json"], "4"),
        (vec!["benchmark", "--config", "bench_config.json", "--seed", "11", "--out", "bench_a.csv"], "1"),
        (vec!["benchmark", "--config", "bench_config.json", "--seed", "11", "--out", "bench_b.csv"], "4"),
    ];
    for (args, threads) in &steps {
        if let Err(e) = run_cli(args, d, threads) {
            return outcome(false, e);
        }
    }
    let same = |a: &str, b: &str| std::fs::read(d.join(a)).unwrap() == std::fs::read(d.join(b)).unwrap();
    let fit = same("fit_a.json", "fit_b.json");
    let csv = same("bench_a.csv", "bench_b.csv");
    let json = same("bench_a.json", "bench_b.json");
    outcome(
        fit && csv && json,
        format!("fit-predict identical: {fit}; benchmark CSV identical: {csv}; JSON identical: {json} (1 vs 4 threads)"),
    )
}

fn chi2_ok(observed: &[usize], probs: &[f64]) -> (bool, f64) {
    let n: usize = observed.iter().sum();
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return (false, f64::INFINITY);
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        dof += 1;
    }
    if dof < 2 {
        return (true, 1.0);
    }
    let pval = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat);
    (pval >= 0.01, pval)
}

fn ks_ok(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> (bool, f64) {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let d = sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic 1% critical value.
    (d * n.sqrt() <= 1.6276, d * n.sqrt())
}

/// Sampler-vs-pmf frequency tests at the 1% level.
fn criterion_12() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let draws = 100_000;
    let mut results: Vec<(String, bool, f64)> = Vec::new();

    // Model size, uniform and double-exponential.
    for (name, size_prior) in [
        ("size uniform 2..7", SizePrior::Uniform { r_min: 2, r_max: 7 }),
        ("size double-exponential", SizePrior::DoubleExponential { c0: 0.4, t0: 1.0 }),
    ] {
        let cfg = PriorConfig {
            size_prior,
            ..PriorConfig::default()
        };
        let p = 10;
        let mut counts = vec![0usize; p + 1];
        for _ in 0..draws {
            counts[cfg.sample_model_size(p, &mut rng).unwrap()] += 1;
        }
        let probs: Vec<f64> = (0..=p).map(|r| cfg.log_pmf_model_size(r, p).exp()).collect();
        let (ok, pv) = chi2_ok(&counts, &probs);
        results.push((name.into(), ok, pv));
    }

    // Subsets: uniform and correlation-weighted.
    let w = [0.05, 0.4, 0.15, 0.1, 0.3];
    for (name, inclusion) in [
        ("subsets uniform", InclusionPrior::UniformSubsets),
        ("subsets weighted", InclusionPrior::CorrelationWeighted { epsilon_floor: 0.01 }),
    ] {
        let cfg = PriorConfig {
            inclusion,
            ..PriorConfig::default()
        };
        let mut counts = vec![0usize; 32];
        for _ in 0..draws {
            let m = cfg.sample_subset(3, 5, Some(&w), &mut rng).unwrap();
            counts[m.predictors().iter().map(|&i| 1usize << (i - 1)).sum::<usize>()] += 1;
        }
        let probs: Vec<f64> = (0..32usize)
            .map(|mask| {
                if mask.count_ones() != 3 {
                    return 0.0;
                }
                let set = (0..5).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
                let m = ModelIndex::new(set, Some(5)).unwrap();
                cfg.log_pmf_subset(&m, 5, Some(&w)).unwrap().exp()
            })
            .collect();
        let (ok, pv) = chi2_ok(&counts, &probs);
        results.push((name.into(), ok, pv));
    }

    // Basis sizes: transformed Poisson (r = 1, mixing over [4, 8]) and the
    // anisotropic joint law.
    for (name, basis_prior, r) in [
        (
            "basis sizes transformed Poisson",
            BasisPrior::ZtpoissonTransform {
                lambda: 30.0,
                j_min: 4,
                j_max: 8,
            },
            1,
        ),
        (
            "basis sizes transformed Poisson (defaults, r = 2)",
            BasisPrior::ZtpoissonTransform {
                lambda: 100.0,
                j_min: 4,
                j_max: 8,
            },
            2,
        ),
        (
            "basis sizes anisotropic",
            BasisPrior::AnisotropicJoint {
                c2: 0.02,
                kappa: 1.0,
                j_min: 2,
                j_max: 4,
            },
            1,
        ),
    ] {
        let cfg = PriorConfig {
            basis_prior,
            ..PriorConfig::default()
        };
        let dist = cfg.basis_sizes(r).unwrap();
        let allocs: Vec<BasisAllocation> = dist.allocations().collect();
        let probs: Vec<f64> = allocs.iter().map(|a| dist.log_pmf(a).exp()).collect();
        let mut counts = vec![0usize; allocs.len()];
        for _ in 0..draws {
            let a = cfg.sample_basis_sizes(r, &mut rng).unwrap();
            counts[allocs.iter().position(|b| *b == a).unwrap()] += 1;
        }
        let (ok, pv) = chi2_ok(&counts, &probs);
        results.push((name.into(), ok, pv));
    }

    // Dirichlet marginals: first coordinate of Dir(a, …, a) in dimension J is
    // Beta(a, (J − 1)a).
    for (a, j) in [(1.0, 2), (0.5, 4), (2.0, 5)] {
        let cfg = PriorConfig {
            dirichlet_a: a,
            ..PriorConfig::default()
        };
        let alloc = BasisAllocation::new(j, vec![]).unwrap();
        let sample: Vec<f64> = (0..20_000)
            .map(|_| cfg.sample_coefficients(&alloc, &mut rng).unwrap().groups()[0][0])
            .collect();
        let beta = Beta::new(a, (j as f64 - 1.0) * a).unwrap();
        let (ok, d) = ks_ok(sample, |v| beta.cdf(v));
        results.push((format!("Dirichlet({a}) marginal, J = {j}"), ok, d));
    }
    let elapsed = start.elapsed();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.1)
        .map(|r| format!("{} (statistic {:.4})", r.0, r.2))
        .collect();
    let min_p = results
        .iter()
        .filter(|r| !r.0.starts_with("Dirichlet"))
        .map(|r| r.2)
        .fold(1.0, f64::min);
    outcome(
        failed.is_empty() && within(elapsed, 120.0),
        format!(
            "{} frequency tests, failed: {:?}; smallest chi-square p-value {min_p:.3}; {:.1}s",
            results.len(),
            failed,
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters: this target is a single suite.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("prior-predictive identity", criterion_1),
        ("worked micro-cases", criterion_2),
        ("Dirichlet-integral oracle", criterion_3),
        ("sampling vs enumeration", criterion_4),
        ("grid normalization", criterion_5),
        ("basis properties", criterion_6),
        ("projection decay", criterion_7),
        ("example 2 desk-scale band", criterion_8),
        ("example 1 desk-scale band", criterion_9),
        ("high-dimensional smoke", criterion_10),
        ("determinism", criterion_11),
        ("prior law checks", criterion_12),
    ];
    // ACCEPTANCE_ONLY="7,8" runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: no failing criteria");
    } else {
        println!("acceptance: {} of 12 criteria fail: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
