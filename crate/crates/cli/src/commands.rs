use std::path::{Path, PathBuf};

use oiscore::accuracy::{accuracy_upper_bound, backdoor_mixture_bound};
use oiscore::bench::{self, BenchConfig};
use oiscore::detector::{k_in_recommended_range, label_for, RECOMMENDED_K};
use oiscore::estimator::{cohen_d_oi, estimate_oi_with, OiEstimate};
use oiscore::io::{
    load_summary, read_matrix, read_score_values, save_score_rows, save_summary, write_matrix,
    ScoreRow,
};
use oiscore::metrics::{evaluate, histogram, Histogram};
use oiscore::synth::{Synthetic, SyntheticSpec};
use oiscore::{compute_bound, contaminated_center, fit, score_batch, Error, FeatureMatrix};
use serde::Serialize;

use crate::args::*;
use crate::failure::{Failure, Outcome};
use crate::manifest::{to_json, write_text, RunManifest};

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::EstimateOi(a) => cmd_estimate_oi(&a),
        Command::AccuracyBound(a) => cmd_accuracy_bound(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn load(path: &Path, m: &MatrixArgs, manifest: &mut RunManifest) -> Outcome<FeatureMatrix> {
    let matrix = read_matrix(path, m.format, m.header)?;
    manifest.input(path)?;
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CenterSpec {
    None,
    File(PathBuf),
    Contaminated { pool: PathBuf, count: usize, seed: u64 },
}

pub fn parse_center(s: &str) -> Outcome<CenterSpec> {
    let bad = || Failure::Usage(format!(
        "bad --center `{s}` (expected none, file:<path> or contaminated:<pool>,<count>,<seed>)"
    ));
    if s == "none" {
        return Ok(CenterSpec::None);
    }
    if let Some(path) = s.strip_prefix("file:") {
        return if path.is_empty() { Err(bad()) } else { Ok(CenterSpec::File(path.into())) };
    }
    let rest = s.strip_prefix("contaminated:").ok_or_else(bad)?;
    let mut parts = rest.rsplitn(3, ',');
    let seed = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
    let count = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
    let pool = parts.next().filter(|p| !p.is_empty()).ok_or_else(bad)?;
    Ok(CenterSpec::Contaminated {
        pool: pool.into(),
        count,
        seed,
    })
}

fn cmd_fit(a: &FitArgs) -> Outcome {
    let center_spec = parse_center(&a.center)?;
    if !k_in_recommended_range(a.k) {
        eprintln!(
            "warning: k outside recommended [{},{}] (k = {})",
            RECOMMENDED_K.start(),
            RECOMMENDED_K.end(),
            a.k
        );
    }
    let seed = match center_spec {
        CenterSpec::Contaminated { seed, .. } => Some(seed),
        _ => None,
    };
    let mut manifest = RunManifest::new("fit", a, seed)?;
    let id = load(&a.input, &a.matrix, &mut manifest)?;
    let center = match &center_spec {
        CenterSpec::None => None,
        CenterSpec::File(path) => {
            let m = load(path, &a.matrix, &mut manifest)?;
            if m.rows() != 1 {
                return Err(Error::Range {
                    name: "center file rows",
                    value: m.rows() as f64,
                    range: "exactly 1",
                }
                .into());
            }
            Some(m.row_vector(0))
        }
        CenterSpec::Contaminated { pool, count, seed } => {
            let pool = load(pool, &a.matrix, &mut manifest)?;
            Some(contaminated_center(&pool, *count, *seed)?)
        }
    };
    let summary = fit(&id, a.k, a.norm, center.as_ref())?;
    save_summary(&a.out, &summary)?;
    manifest.output(&a.out);
    manifest.write()
}

fn cmd_score(a: &ScoreArgs) -> Outcome {
    let mut manifest = RunManifest::new("score", a, None)?;
    let summary = load_summary(&a.summary)?;
    manifest.input(&a.summary)?;
    let xs = load(&a.input, &a.matrix, &mut manifest)?;
    let rows: Vec<ScoreRow> = score_batch(&xs, &summary)?
        .iter()
        .map(|r| ScoreRow {
            label: a.threshold.map(|t| label_for(r.score, t)),
            ..ScoreRow::from(r)
        })
        .collect();
    save_score_rows(&a.out, &rows)?;
    manifest.output(&a.out);
    manifest.write()
}

#[derive(Serialize)]
struct Histograms {
    id: Histogram,
    ood: Histogram,
}

fn cmd_eval(a: &EvalArgs) -> Outcome {
    let mut manifest = RunManifest::new("eval", a, None)?;
    let id = read_score_values(&a.id_scores)?;
    manifest.input(&a.id_scores)?;
    let ood = read_score_values(&a.ood_scores)?;
    manifest.input(&a.ood_scores)?;
    let report = evaluate(&id, &ood, a.aupr_positive)?;
    let hists = match &a.emit_histograms {
        Some(_) => Some(Histograms {
            id: histogram(&id, a.bins, a.hist_lo, a.hist_hi)?,
            ood: histogram(&ood, a.bins, a.hist_lo, a.hist_hi)?,
        }),
        None => None,
    };
    write_text(&a.out, &to_json(&report)?)?;
    manifest.output(&a.out);
    if let (Some(path), Some(h)) = (&a.emit_histograms, hists) {
        write_text(path, &to_json(&h)?)?;
        manifest.output(path);
    }
    manifest.write()
}

#[derive(Serialize)]
struct OiReport {
    estimate: OiEstimate,
    cohen: Option<OiEstimate>,
}

fn cmd_estimate_oi(a: &EstimateOiArgs) -> Outcome {
    let mut manifest = RunManifest::new("estimate-oi", a, None)?;
    let xa = load(&a.a, &a.matrix, &mut manifest)?;
    let xb = load(&a.b, &a.matrix, &mut manifest)?;
    let estimate = estimate_oi_with(&xa, &xb, a.k, a.norm, a.center_merged_mean, a.family)?;
    let report = OiReport {
        estimate,
        cohen: cohen_d_oi(&xa, &xb).ok(),
    };
    write_text(&a.out, &to_json(&report)?)?;
    manifest.output(&a.out);
    manifest.write()
}

#[derive(Serialize)]
struct BoundReport {
    p: f64,
    q: f64,
    overlap_bound: f64,
    bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_mu_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shell_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backdoor_bound: Option<f64>,
}

fn cmd_accuracy_bound(a: &AccuracyBoundArgs) -> Outcome {
    let mut manifest = RunManifest::new("accuracy-bound", a, None)?;
    let report = match (a.overlap, &a.clean, &a.shifted) {
        (Some(overlap), _, _) => BoundReport {
            p: a.p,
            q: a.q,
            overlap_bound: overlap,
            bound: accuracy_upper_bound(a.p, a.q, overlap)?,
            delta_mu_term: None,
            shell_term: None,
            sigma: None,
            backdoor_bound: None,
        },
        (None, Some(clean), Some(shifted)) => {
            let clean = load(clean, &a.matrix, &mut manifest)?;
            let shifted = load(shifted, &a.matrix, &mut manifest)?;
            let r = compute_bound(&shifted, &fit(&clean, a.k, a.norm, None)?)?;
            let backdoor_bound = a
                .sigma
                .map(|s| backdoor_mixture_bound(a.p, s, r.delta_mu_term, r.shell_term))
                .transpose()?;
            BoundReport {
                p: a.p,
                q: a.q,
                overlap_bound: r.score,
                bound: accuracy_upper_bound(a.p, a.q, r.score)?,
                delta_mu_term: Some(r.delta_mu_term),
                shell_term: Some(r.shell_term),
                sigma: a.sigma,
                backdoor_bound,
            }
        }
        _ => return Err(Failure::Usage("give --overlap or both --clean and --shifted".into())),
    };
    write_text(&a.out, &to_json(&report)?)?;
    manifest.output(&a.out);
    manifest.write()
}

#[derive(Serialize)]
struct SynthParams<'a> {
    #[serde(flatten)]
    args: &'a SynthArgs,
    resolved_spec: &'a SyntheticSpec,
}

fn cmd_synth(a: &SynthArgs) -> Outcome {
    let inline = a.spec.trim_start().starts_with('{');
    let text = if inline {
        a.spec.clone()
    } else {
        std::fs::read_to_string(&a.spec).map_err(|e| Failure::Io(a.spec.clone().into(), e))?
    };
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Json("synthetic spec".into(), e))?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let params = SynthParams {
        args: a,
        resolved_spec: &spec,
    };
    let mut manifest = RunManifest::new("synth", &params, Some(spec.seed))?;
    if !inline {
        manifest.input(Path::new(&a.spec))?;
    }
    let samples = Synthetic::new(&spec)?.sample(a.count)?;
    write_matrix(&a.out, &samples, a.format)?;
    manifest.output(&a.out);
    manifest.write()
}

fn cmd_bench(a: &BenchArgs) -> Outcome {
    let config = BenchConfig {
        dims: a.dims.clone(),
        ks: a.k_sweep.clone(),
        dim_sweep_k: a.dim_sweep_k,
        k_sweep_dim: a.k_sweep_dim,
        samples: a.samples,
        warmup: a.warmup,
        fit_rows: a.fit_rows,
        probes: a.probes,
        norm_kind: a.norm,
        seed: a.seed,
    };
    let mut manifest = RunManifest::new("bench", a, Some(a.seed))?;
    let report = bench::run(&config)?;
    write_text(&a.out, &to_json(&report)?)?;
    manifest.output(&a.out);
    manifest.write()
}
