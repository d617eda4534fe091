//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits with
//! status 1 if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use busemann_core::data_io::{split, synthetic_blobs, BlobsSpec, Checkpoint, Dataset, SplitSpec};
use busemann_core::model::{evaluate, train, Model, TrainConfig};
use busemann_core::prototypes::{
    separation_metrics, separation_prototypes, DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR,
};
use busemann_core::verify::{self, DensityCase};
use busemann_core::PrototypeSet;

/// max_cosine of separation prototypes for C=100, d=50, seed 0, recorded on
/// the first release.
const SEPARATION_BASELINE_C100_D50: f64 = 0.052_732_939_241_950_65;
const SEPARATION_REGRESSION_MARGIN: f64 = 0.02;

struct Outcome {
    passed: bool,
    summary: String,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self { passed, summary: summary.into() }
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn suite_outcome(report: &verify::SuiteReport, limit_secs: f64, what: &str) -> Outcome {
    let fast = report.elapsed_seconds < limit_secs;
    let mut summary = format!(
        "{what}: {} cases, max deviation {:.3e}, {:.3}s (limit {limit_secs}s)",
        report.cases, report.max_deviation, report.elapsed_seconds
    );
    if let Some(first) = report.failures.first() {
        summary.push_str(&format!("; {} failing, first: {}", report.failures.len(), first.inputs));
    }
    Outcome::new(report.passed && fast, summary)
}

fn logreg() -> Outcome {
    let r = verify::logreg_suite(0).expect("logreg suite");
    suite_outcome(&r, 1.0, "one-dimensional loss vs logistic cross-entropy (tol 1e-10)")
}

fn busemann_limit() -> Outcome {
    let r = verify::busemann_limit_suite(0).expect("busemann-limit suite");
    suite_outcome(&r, 1.0, "ray limit vs closed form at t=20 (tol 1e-6, shrinking from t=10)")
}

fn gradients() -> Outcome {
    let r = verify::gradient_suite(0, busemann_core::loss::loss_gradient).expect("gradient suite");
    let mlp = r.details.iter().find(|d| d.starts_with("mlp")).cloned().unwrap_or_default();
    let mut o = suite_outcome(&r, 10.0, "analytic vs central differences (loss 1e-6, mlp 1e-5)");
    o.summary.push_str(&format!("; {mlp}"));
    o
}

fn density_threshold() -> Outcome {
    let started = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for d in [4usize, 5, 6] {
        let base = d as f64 - 2.0;
        let convergent = DensityCase::compute(d, base + 0.5).expect("convergent case");
        let boundary = DensityCase::compute(d, base).expect("boundary case");
        let divergent = DensityCase::compute(d, base - 0.5).expect("divergent case");

        let c_ok = convergent.cauchy() < 1e-3;
        let b_ok = boundary.growth() > 1.5 && boundary.growth() < 3.0;
        let v_ok = divergent.growth() > 10.0;
        passed &= c_ok && b_ok && v_ok;
        parts.push(format!(
            "d={d}: cauchy {:.3e}{} log-ratio {:.3}{} div-ratio {:.1}{}",
            convergent.cauchy(),
            if c_ok { "" } else { " (>= 1e-3)" },
            boundary.growth(),
            if b_ok { "" } else { " (outside (1.5,3))" },
            divergent.growth(),
            if v_ok { "" } else { " (<= 10)" },
        ));
    }
    let elapsed = started.elapsed();
    passed &= within(elapsed, 10.0);
    Outcome::new(passed, format!("radial integral pattern; {}; {:.2}s", parts.join("; "), elapsed.as_secs_f64()))
}

fn inference_rules() -> Outcome {
    let r = verify::inference_equivalence_suite(0).expect("inference suite");
    let mismatches = r.failures.len();
    Outcome::new(
        r.passed,
        format!(
            "cosine argmax vs loss argmin: {mismatches} mismatches in {} embeddings ({})",
            r.cases,
            r.details.join(", ")
        ),
    )
}

fn prototype_quality() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for c in [2usize, 3, 4] {
        for d in [(c - 1).max(3), c + 3] {
            let set = separation_prototypes(c, d, DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR, 0).unwrap();
            let got = separation_metrics(&set).max_cosine;
            let target = -1.0 / (c as f64 - 1.0);
            let ok = (got - target).abs() < 1e-2;
            passed &= ok;
            parts.push(format!("C={c} d={d} {got:.4}{}", if ok { "" } else { " (off target)" }));
        }
    }
    let big = separation_prototypes(100, 50, DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR, 0).unwrap();
    let got = separation_metrics(&big).max_cosine;
    let ok = got <= SEPARATION_BASELINE_C100_D50 + SEPARATION_REGRESSION_MARGIN;
    passed &= ok;
    parts.push(format!("C=100 d=50 {got:.4} (baseline {SEPARATION_BASELINE_C100_D50:.4})"));
    Outcome::new(passed, format!("separation max cosine vs simplex: {}", parts.join(", ")))
}

fn blobs(sigma: f64) -> (Dataset, Dataset) {
    let spec = BlobsSpec { classes: 10, input_dim: 20, per_class: 500, center_scale: 5.0, noise_sigma: sigma, seed: 0 };
    let (data, _) = synthetic_blobs(&spec).unwrap();
    split(&data, &SplitSpec::default()).unwrap()
}

fn blob_protos() -> PrototypeSet {
    separation_prototypes(10, 5, DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR, 0).unwrap()
}

fn train_linear(train_set: &Dataset, val: &Dataset, protos: &PrototypeSet, slope: f64) -> Model {
    let cfg = TrainConfig { penalty_slope: slope, epochs: 100, ..TrainConfig::default() };
    let init = Model::linear(train_set.input_dim(), protos.dimension(), 0).unwrap();
    train(&init, train_set, Some(val), protos, &cfg).unwrap().0
}

fn desk_scale_learning() -> Outcome {
    let started = Instant::now();
    let (tr, va) = blobs(1.0);
    let protos = blob_protos();
    let model = train_linear(&tr, &va, &protos, 0.1);
    let report = evaluate(&model, &va, &protos).unwrap();
    let elapsed = started.elapsed();
    let gap = report.distance_gap;
    let rho = report.spearman;
    let passed = report.accuracy >= 0.95
        && gap.is_some_and(|g| g >= 0.0)
        && rho.is_some_and(|r| r > 0.0)
        && within(elapsed, 120.0);
    Outcome::new(
        passed,
        format!(
            "blobs sigma=1, linear, d=5, slope 0.1: val accuracy {:.4} (need >= 0.95), distance gap {:?}, spearman {:?}, {:.1}s",
            report.accuracy,
            gap,
            rho,
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let spec = BlobsSpec { classes: 4, input_dim: 6, per_class: 60, center_scale: 3.0, noise_sigma: 1.0, seed: 5 };
    let (data, _) = synthetic_blobs(&spec).unwrap();
    let (tr, va) = split(&data, &SplitSpec::default()).unwrap();
    let protos = separation_prototypes(4, 3, 200, 0.1, 1).unwrap();
    let cfg = TrainConfig { learning_rate: 1e-2, epochs: 15, batch_size: 16, ..TrainConfig::default() };
    let run = || {
        let init = Model::mlp(6, &[8], 3, 9).unwrap();
        let (m, _) = train(&init, &tr, Some(&va), &protos, &cfg).unwrap();
        Checkpoint::from_model(&m, &cfg, None).to_json().unwrap()
    };
    let (a, b) = (run(), run());
    Outcome::new(
        a == b,
        format!(
            "two seeded runs give {} checkpoints ({} bytes)",
            if a == b { "identical" } else { "different" },
            a.len()
        ),
    )
}

fn slope_ablation() -> Outcome {
    let (tr, va) = blobs(2.0);
    let protos = blob_protos();
    let acc = |slope| evaluate(&train_linear(&tr, &va, &protos, slope), &va, &protos).unwrap().accuracy;
    let (a0, a5) = (acc(0.0), acc(0.5));
    Outcome::new(a5 >= a0, format!("blobs sigma=2: accuracy slope 0.5 = {a5:.4}, slope 0 = {a0:.4}"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1", logreg),
        ("2", busemann_limit),
        ("3", gradients),
        ("4", density_threshold),
        ("5", inference_rules),
        ("6", prototype_quality),
        ("7", desk_scale_learning),
        ("8", determinism),
        ("ablation", slope_ablation),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("[{}] criterion {id}: {}", if o.passed { "PASS" } else { "FAIL" }, o.summary);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
