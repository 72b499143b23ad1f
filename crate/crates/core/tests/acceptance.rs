//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p oiscore --test acceptance -- --nocapture` to see
//! the report. Every tolerance is fixed in this file.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use oiscore::accuracy::{sigma_grid, sigma_sweep, BoundConfig, LabeledSet};
use oiscore::bench::{self, BenchConfig};
use oiscore::estimator::{
    cohen_d_oi, cohen_oi_from_stats, estimate_oi, oi_oracle_grid_1d, oi_oracle_mc_synth,
    DEFAULT_GRID_POINTS,
};
use oiscore::io::read_matrix;
use oiscore::io::MatrixFormat;
use oiscore::metrics::{auroc, auroc_pairwise, auroc_sorted, tpr95};
use oiscore::synth::{Distribution, Synthetic};
use oiscore::{compute_bound, fit, score, score_batch, FeatureMatrix, FeatureVector, NormKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const K: usize = 100;
const LARGE: usize = 10_000;

fn draw(d: &Distribution, n: usize, seed: u64) -> FeatureMatrix {
    Synthetic::from_dist(d, seed).unwrap().sample(n).unwrap()
}

fn bound(plus: &Distribution, fitted: &Distribution, n: usize, seed: u64) -> f64 {
    let id = draw(fitted, n, seed);
    let s = fit(&id, K, NormKind::L2, None).unwrap();
    compute_bound(&draw(plus, n, seed.wrapping_add(1_000_003)), &s)
        .unwrap()
        .score
}

fn grid_oi(p: &Distribution, q: &Distribution, lo: f64, hi: f64) -> f64 {
    let p = Synthetic::from_dist(p, 0).unwrap();
    let q = Synthetic::from_dist(q, 0).unwrap();
    oi_oracle_grid_1d(
        |x| p.density_unchecked(&[x]),
        |x| q.density_unchecked(&[x]),
        lo,
        hi,
        DEFAULT_GRID_POINTS,
    )
    .unwrap()
}

fn mc_oi(p: &Distribution, q: &Distribution, draws: usize) -> f64 {
    let p = Synthetic::from_dist(p, 0).unwrap();
    let q = Synthetic::from_dist(q, 0).unwrap();
    oi_oracle_mc_synth(&p, &q, draws, 77).unwrap().value
}

fn unit_box(dim: usize, shift: f64) -> Distribution {
    let mut lo = vec![0.0; dim];
    let mut hi = vec![1.0; dim];
    lo[0] += shift;
    hi[0] += shift;
    Distribution::uniform_box(lo, hi)
}

fn tg4(shift: f64) -> Distribution {
    let mut mean = vec![0.0; 4];
    mean[0] = shift;
    Distribution::trunc_gauss_ball(mean, vec![1.0; 4], 3.0)
}

fn hand_traces() -> Outcome {
    let m = |rows: &[&[f64]]| FeatureMatrix::from_rows(rows).unwrap();
    let set = m(&[&[0.5, -1.0], &[2.0, 0.25], &[-0.75, 1.5]]);
    let self_score = compute_bound(&set, &fit(&set, 7, NormKind::L2, None).unwrap())
        .unwrap()
        .score;
    let s1 = fit(&m(&[&[2.0]]), 1, NormKind::L2, None).unwrap();
    let s2 = fit(&m(&[&[2.0]]), 2, NormKind::L2, None).unwrap();
    let half = compute_bound(&m(&[&[0.0]]), &s1).unwrap().score;
    let zero = compute_bound(&m(&[&[0.0]]), &s2).unwrap().score;
    let got = [self_score, half, zero];
    let want = [1.0, 0.5, 0.0];
    let detail = format!("scores {got:?}, expected {want:?}");
    if got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-12) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn soundness() -> Outcome {
    let unit = Distribution::unit_interval();
    let mut cases: Vec<(String, Distribution, Distribution, f64)> = Vec::new();
    for overlap in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let other = Distribution::uniform_box(vec![1.0 - overlap], vec![2.0 - overlap]);
        let truth = grid_oi(&unit, &other, -0.5, 2.5);
        cases.push((format!("uniform overlap {overlap}"), unit.clone(), other, truth));
    }
    for omega in [1, 2, 5] {
        let sine = Distribution::sine(omega);
        let truth = grid_oi(&unit, &sine, 0.0, 1.0);
        cases.push((format!("uniform/sine ω={omega}"), unit.clone(), sine, truth));
    }
    for gap in [1.0, 2.0, 4.0] {
        let a = Distribution::gauss(0.0, 1.0);
        let b = Distribution::gauss(gap, 1.0);
        let truth = grid_oi(&a, &b, -12.0, 16.0);
        cases.push((format!("gauss gap {gap}σ"), a, b, truth));
    }
    let (a, b) = (tg4(0.0), tg4(1.5));
    let truth = mc_oi(&a, &b, 1_000_000);
    cases.push(("trunc-gauss ℝ⁴ shift 1.5".into(), a, b, truth));

    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (i, (name, plus, fitted, truth)) in cases.iter().enumerate() {
        let s = bound(plus, fitted, LARGE, 100 + i as u64);
        worst = worst.min(s - truth);
        if s < truth - 0.05 {
            failures.push(format!("{name}: score {s:.4} < OI {truth:.4} − 0.05"));
        }
    }
    let detail = format!("{} pairs, min(score − OI) = {worst:.4}", cases.len());
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn sine_insensitivity() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for omega in [1u32, 2, 5, 10] {
        let floor = 1.0 - 1.0 / omega as f64;
        for seed in 0..10 {
            let s = bound(&Distribution::unit_interval(), &Distribution::sine(omega), LARGE, seed);
            worst = worst.min(s - floor);
            if s < floor - 0.03 {
                failures.push(format!("ω={omega} seed {seed}: {s:.4}"));
            }
        }
    }
    let detail = format!("40 runs, min(score − (1 − 1/ω)) = {worst:.4}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn huber_robustness() -> Outcome {
    let pairs = [
        ("uniform/far uniform", Distribution::unit_interval(), Distribution::uniform_box(vec![2.0], vec![3.0])),
        ("gauss/gauss gap 3σ", Distribution::gauss(0.0, 1.0), Distribution::gauss(3.0, 1.0)),
        ("trunc-gauss ℝ⁴ shift 2", tg4(0.0), tg4(2.0)),
    ];
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (name, plus, other) in &pairs {
        for eps in [0.1, 0.2, 0.5] {
            let mix = Distribution::huber(plus.clone(), other.clone(), eps);
            for seed in 0..10 {
                let s = bound(plus, &mix, LARGE, 1000 + seed);
                worst = worst.min(s - (1.0 - eps));
                if s < 1.0 - eps - 0.03 {
                    failures.push(format!("{name} ε={eps} seed {seed}: {s:.4}"));
                }
            }
        }
    }
    let detail = format!("90 runs, min(score − (1 − ε)) = {worst:.4}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

const DIM: usize = 10;
const TRIGGER: usize = DIM - 1;

fn two_class(rng: &mut ChaCha8Rng, n: usize, poison: bool) -> LabeledSet {
    let mut data = Vec::with_capacity(n * DIM);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if poison { 1 } else { i % 2 };
        for j in 0..DIM {
            let z: f64 = rng.sample(StandardNormal);
            let shift = match j {
                0 => 4.0 * label as f64 - 2.0,
                TRIGGER if poison => 10.0,
                _ => 0.0,
            };
            data.push(z + shift);
        }
        labels.push(label);
    }
    LabeledSet::new(FeatureMatrix::from_flat(DIM, data).unwrap(), labels).unwrap()
}

fn backdoored(x: &[f64]) -> usize {
    if x[TRIGGER] > 5.0 {
        0
    } else {
        (x[0] > 0.0) as usize
    }
}

fn accuracy_sweep() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let train = two_class(&mut rng, 5000, false);
    let test = two_class(&mut rng, 5000, false);
    let poisoned = two_class(&mut rng, 5000, true);
    let sigmas = sigma_grid(11);
    let mut failures = Vec::new();
    let mut min_gap = f64::INFINITY;
    for kind in NormKind::ALL {
        let config = BoundConfig {
            k: K,
            norm_kind: kind,
            center: None,
        };
        let points = sigma_sweep(&backdoored, &train, &test, &poisoned, &sigmas, &config).unwrap();
        for p in points {
            min_gap = min_gap.min(p.mixture_bound.min(p.backdoor_bound) - p.acc);
            if !p.holds {
                failures.push(format!(
                    "{kind} σ={:.1}: acc {:.4} vs bounds {:.4}/{:.4}",
                    p.sigma, p.acc, p.mixture_bound, p.backdoor_bound
                ));
            }
        }
    }
    let detail = format!("33 (σ, norm) cells, min(bound − acc) = {min_gap:.4}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn oi_estimation() -> Outcome {
    const M: usize = 50;
    const TRIALS: u64 = 20;
    let mut report = Vec::new();
    let mut failures = Vec::new();
    let families: [(&str, Vec<(Distribution, Distribution)>); 2] = [
        (
            "trunc-gauss",
            [0.0, 0.5, 1.0, 2.0, 3.0].iter().map(|&d| (tg4(0.0), tg4(d))).collect(),
        ),
        (
            "uniform",
            [0.0, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&s| (unit_box(4, 0.0), unit_box(4, s)))
                .collect(),
        ),
    ];
    for (name, pairs) in &families {
        let (mut err, mut cohen_err, mut n) = (0.0, 0.0, 0.0);
        for (i, (a, b)) in pairs.iter().enumerate() {
            let truth = mc_oi(a, b, 1_000_000);
            for t in 0..TRIALS {
                let seed = 10_000 * i as u64 + t;
                let xa = draw(a, M, seed);
                let xb = draw(b, M, seed + 5_000);
                let e = estimate_oi(&xa, &xb, K, NormKind::L2, true).unwrap().value;
                let c = cohen_d_oi(&xa, &xb).unwrap().value;
                err += (e - truth).abs();
                cohen_err += (c - truth).abs();
                n += 1.0;
            }
        }
        let (err, cohen_err) = (err / n, cohen_err / n);
        report.push(format!("{name}: η̄′ err {err:.4}, Cohen err {cohen_err:.4}"));
        if err > 0.15 {
            failures.push(format!("{name} mean error {err:.4} > 0.15"));
        }
        if *name == "uniform" && err > cohen_err + 0.05 {
            failures.push(format!("uniform: η̄′ error {err:.4} > Cohen {cohen_err:.4} + 0.05"));
        }
    }
    let detail = report.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn cohen_values() -> Outcome {
    let got = [
        cohen_oi_from_stats(0.0, 0.0, 1.0).unwrap(),
        cohen_oi_from_stats(0.0, 2.0, 1.0).unwrap(),
        cohen_oi_from_stats(0.0, 4.0, 1.0).unwrap(),
    ];
    let want = [1.0, 0.31731, 0.04550];
    let detail = format!("{got:?}");
    if got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-5) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn metrics_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for instance in 0..1000 {
        let n = rng.random_range(1..=50);
        let m = rng.random_range(1..=50);
        let mut gen = |len| -> Vec<f64> { (0..len).map(|_| rng.random_range(0..40) as f64 / 8.0).collect() };
        let (id, ood) = (gen(n), gen(m));
        let a = auroc_pairwise(&id, &ood).unwrap();
        let b = auroc_sorted(&id, &ood).unwrap();
        if a.to_bits() != b.to_bits() {
            return Err(format!("instance {instance}: pairwise {a} vs sorted {b}"));
        }
    }
    let (tpr, t) = tpr95(&[0.2, 0.4, 0.6, 0.8, 1.0], &[0.1, 0.3]).unwrap();
    let detail = format!("1000 instances bit-identical; TPR95 fixture T={t}, tpr95={tpr}");
    if t == 0.2 && tpr == 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn performance_shape() -> Outcome {
    let r = bench::run(&BenchConfig::default()).unwrap();
    let bytes = bench::summary_bytes(2000, 100, 2000, 1).unwrap();
    let medians: Vec<String> = r
        .dim_sweep
        .iter()
        .map(|c| format!("n={}:{:.2}µs", c.dim, c.median_ms * 1e3))
        .collect();
    let detail = format!(
        "dim ratio {:.2} [{}], k-fit R² {:.4}, summary {} bytes",
        r.dim_ratio,
        medians.join(" "),
        r.k_fit.r_squared,
        bytes
    );
    if r.dim_ratio <= 2.0 && r.k_fit.r_squared >= 0.9 && bytes < 100 * 1024 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn separated_clusters() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |rows: usize, shift: f64| {
            let data = (0..rows * DIM)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    if i % DIM == 0 {
                        z + shift
                    } else {
                        z
                    }
                })
                .collect();
            FeatureMatrix::from_flat(DIM, data).unwrap()
        };
        let id_fit = gauss(1000, 0.0);
        let id_test = gauss(1000, 0.0);
        let ood = gauss(1000, 10.0);
        let s = fit(&id_fit, K, NormKind::L2, None).unwrap();
        let scores = |m: &FeatureMatrix| -> Vec<f64> {
            score_batch(m, &s).unwrap().iter().map(|r| r.score).collect()
        };
        worst = worst.min(auroc(&scores(&id_test), &scores(&ood)).unwrap());
    }
    let detail = format!("min AUROC over 10 seeds {worst:.4}");
    if worst >= 0.99 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uci_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/uci")
        .join(format!("{name}.csv"))
}

fn uci_auroc(id_name: &str, ood_names: &[&str]) -> f64 {
    let load = |n: &str| read_matrix(&uci_path(n), MatrixFormat::Csv, false).unwrap();
    let id = load(id_name);
    let mut ood = load(ood_names[0]);
    for n in &ood_names[1..] {
        ood = ood.concat(&load(n)).unwrap();
    }
    let s = fit(&id, K, NormKind::L2, None).unwrap();
    let scores = |m: &FeatureMatrix| -> Vec<f64> {
        score_batch(m, &s).unwrap().iter().map(|r| r.score).collect()
    };
    auroc(&scores(&id), &scores(&ood)).unwrap()
}

fn uci() -> Outcome {
    let configs: [(&str, &[&str]); 6] = [
        ("iris_setosa", &["iris_versicolor", "iris_virginica"]),
        ("iris_versicolor", &["iris_setosa", "iris_virginica"]),
        ("iris_virginica", &["iris_setosa", "iris_versicolor"]),
        ("breast_malignant", &["breast_benign"]),
        ("breast_benign", &["breast_malignant"]),
        ("ecoli_periplasm", &["ecoli_other"]),
    ];
    let values: Vec<f64> = configs.iter().map(|(id, ood)| uci_auroc(id, ood)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let setosa = values[0];
    let detail = format!(
        "setosa {setosa:.4}, mean {mean:.4} over [{}]",
        values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
    );
    if setosa >= 0.95 && mean >= 0.90 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..10_000 {
        let dim = rng.random_range(1..=8);
        let rows = rng.random_range(1..=40);
        let k = rng.random_range(1..=200);
        let kind = NormKind::ALL[rng.random_range(0..3)];
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let data: Vec<f64> = (0..dim * rows)
            .map(|_| scale * rng.random_range(-1.0..1.0))
            .collect();
        let id = FeatureMatrix::from_flat(dim, data).unwrap();
        let Ok(s) = fit(&id, k, kind, None) else { continue };
        let spread = rng.random_range(0.0..3.0) * scale;
        let x: Vec<f64> = (0..dim).map(|_| spread * rng.random_range(-1.0..1.0)).collect();
        let r = score(&FeatureVector::new(x).unwrap(), &s).unwrap();
        let (eta1, eta2) = (r.eta1(), r.eta2());
        if r.score != eta1 + eta2 - 1.0 || r.score != 1.0 - r.delta_mu_term - r.shell_term {
            return Err(format!("case {case}: score {} vs η₁ + η₂ − 1 = {}", r.score, eta1 + eta2 - 1.0));
        }
    }
    Ok("10000 random cases, exact".into())
}

#[test]
fn acceptance_suite() {
    let criteria: [Criterion; 12] = [
        ("hand-traced bound values", hand_traces),
        ("bound soundness against oracle overlap", soundness),
        ("sine insensitivity", sine_insensitivity),
        ("Huber contamination robustness", huber_robustness),
        ("accuracy bound sweep over clean ratio", accuracy_sweep),
        ("overlap estimation accuracy", oi_estimation),
        ("Cohen's d reference values", cohen_values),
        ("metric implementations", metrics_agreement),
        ("scoring cost shape", performance_shape),
        ("separated clusters", separated_clusters),
        ("UCI tables", uci),
        ("score decomposition identity", decomposition),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                println!("FAIL {name} ({secs:.1}s): {d}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn sine_oracle_matches_closed_form() {
    // guards the oracle used above
    let v = grid_oi(&Distribution::unit_interval(), &Distribution::sine(2), 0.0, 1.0);
    assert!((v - (1.0 - 1.0 / PI)).abs() <= 1e-4);
}
