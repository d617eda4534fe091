//! Numerical verification suites.
//!
//! Each suite draws seeded random cases, compares an implementation against
//! an independent reference and returns a [`SuiteReport`]. The CLI `check`
//! command and the acceptance tests both run these.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{busemann, busemann_limit, exp0, EuclideanVector, IdealPoint, PoincarePoint};
use crate::loss::{density_radial_integral, loss_gradient, penalized_busemann_loss, LossGradient};
use crate::model::{argmax_cosine_class, argmin_loss_class, logreg_equivalence_check, Model};
use crate::prototypes::{separation_prototypes, uniform_circle_prototypes, PrototypeSet};
use crate::prototypes::{DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR};

pub const LOSS_GRADIENT_TOL: f64 = 1e-6;
pub const MLP_GRADIENT_TOL: f64 = 1e-5;
pub const BUSEMANN_LIMIT_TOL: f64 = 1e-6;
pub const LOGREG_TOL: f64 = 1e-10;

/// Signature of a loss gradient; swapped out to exercise the negative control.
pub type GradientFn = fn(&EuclideanVector, &IdealPoint, f64) -> Result<LossGradient>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gradient,
    BusemannLimit,
    Logreg,
    Density,
    InferenceEquiv,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Gradient, Suite::BusemannLimit, Suite::Logreg, Suite::Density, Suite::InferenceEquiv];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradient => "gradient",
            Suite::BusemannLimit => "busemann-limit",
            Suite::Logreg => "logreg",
            Suite::Density => "density",
            Suite::InferenceEquiv => "inference-equiv",
        }
    }

    pub fn run(self, seed: u64) -> Result<SuiteReport> {
        match self {
            Suite::Gradient => gradient_suite(seed, loss_gradient),
            Suite::BusemannLimit => busemann_limit_suite(seed),
            Suite::Logreg => logreg_suite(seed),
            Suite::Density => density_suite(),
            Suite::InferenceEquiv => inference_equivalence_suite(seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite {s:?}")))
    }
}

/// A case that violated its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailingCase {
    pub inputs: String,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub failures: Vec<FailingCase>,
    pub details: Vec<String>,
    pub elapsed_seconds: f64,
}

impl SuiteReport {
    fn new(suite: Suite, tolerance: f64) -> Self {
        Self {
            suite,
            passed: true,
            cases: 0,
            max_deviation: 0.0,
            tolerance,
            failures: Vec::new(),
            details: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    /// Records one case; it fails when `ok` is false.
    fn record(&mut self, deviation: f64, ok: bool, inputs: impl FnOnce() -> String) {
        self.cases += 1;
        if deviation > self.max_deviation || deviation.is_nan() {
            self.max_deviation = deviation;
        }
        if !ok {
            self.passed = false;
            self.failures.push(FailingCase { inputs: inputs(), deviation });
        }
    }

    fn finish(mut self, started: Instant) -> Self {
        self.elapsed_seconds = started.elapsed().as_secs_f64();
        self
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_ideal(rng: &mut ChaCha8Rng, d: usize) -> Result<IdealPoint> {
    IdealPoint::new(gaussian(rng, d))
}

/// Uniform direction, radius uniform in `[0, max_radius]`.
fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, max_radius: f64) -> Vec<f64> {
    let dir = gaussian(rng, d);
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = rng.random_range(0.0..=max_radius);
    dir.into_iter().map(|v| v * radius / n).collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{c:e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn loss_at(x: &[f64], p: &IdealPoint, phi: f64) -> Result<f64> {
    penalized_busemann_loss(&exp0(&EuclideanVector::new(x.to_vec())?), p, phi)
}

fn loss_side_fd(x: &[f64], p: &IdealPoint, phi: f64) -> Result<Vec<f64>> {
    let h = 1e-6;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = loss_at(&probe, p, phi)?;
        probe[k] = x[k] - h;
        let down = loss_at(&probe, p, phi)?;
        probe[k] = x[k];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn model_loss(model: &Model, x: &[f64], p: &IdealPoint, phi: f64) -> Result<f64> {
    penalized_busemann_loss(&exp0(&model.forward(x)?), p, phi)
}

/// Central differences for every parameter of `model`, in
/// `parameter_blocks_mut` order.
fn model_fd(model: &Model, x: &[f64], p: &IdealPoint, phi: f64) -> Result<Vec<f64>> {
    let h = 1e-6;
    let mut probe = model.clone();
    let sizes: Vec<usize> = probe.parameter_blocks_mut().iter().map(|b| b.len()).collect();
    let mut out = Vec::with_capacity(model.parameter_count());
    for (block, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let original = probe.parameter_blocks_mut()[block][k];
            probe.parameter_blocks_mut()[block][k] = original + h;
            let up = model_loss(&probe, x, p, phi)?;
            probe.parameter_blocks_mut()[block][k] = original - h;
            let down = model_loss(&probe, x, p, phi)?;
            probe.parameter_blocks_mut()[block][k] = original;
            out.push((up - down) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Analytic gradients against central finite differences: 100 loss-side
/// trials with `d ∈ 1..=10`, `‖exp0(x)‖ ≤ 0.95`, then 20 trials over all
/// parameters of an 8→16→4 MLP.
pub fn gradient_suite(seed: u64, gradient: GradientFn) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Gradient, LOSS_GRADIENT_TOL);
    let max_x = 2.0 * 0.95f64.atanh();

    for trial in 0..100 {
        let d = 1 + trial % 10;
        let p = random_ideal(&mut rng, d)?;
        let x = random_in_ball(&mut rng, d, max_x);
        let phi = rng.random_range(0.0..=2.0) * d as f64;
        let analytic = gradient(&EuclideanVector::new(x.clone())?, &p, phi)?.grad;
        let numeric = loss_side_fd(&x, &p, phi)?;
        let err = relative_error(&analytic, &numeric);
        report.record(err, err < LOSS_GRADIENT_TOL, || {
            format!("loss-side d={d} phi={phi} x={} p={}", fmt_vec(&x), fmt_vec(p.coords()))
        });
    }

    let mut mlp_max = 0.0f64;
    for trial in 0..20u64 {
        let model = Model::mlp(8, &[16], 4, seed.wrapping_add(trial))?;
        let x = gaussian(&mut rng, 8);
        let p = random_ideal(&mut rng, 4)?;
        let phi = rng.random_range(0.0..=2.0) * 4.0;
        let out = model.forward(&x)?;
        let upstream = gradient(&out, &p, phi)?.grad;
        let analytic = model.backward(&x, &upstream)?.flatten();
        let numeric = model_fd(&model, &x, &p, phi)?;
        let err = relative_error(&analytic, &numeric);
        mlp_max = mlp_max.max(err);
        report.record(err, err < MLP_GRADIENT_TOL, || {
            format!("mlp trial={trial} phi={phi} x={} p={}", fmt_vec(&x), fmt_vec(p.coords()))
        });
    }
    report.details.push(format!("loss-side tolerance {LOSS_GRADIENT_TOL:e}, mlp tolerance {MLP_GRADIENT_TOL:e}"));
    report.details.push(format!("mlp max relative error {mlp_max:e}"));
    Ok(report.finish(started))
}

/// Finite-`t` Busemann values against the closed form on 100 cases with
/// `‖z‖ ≤ 0.9`; the error must be below tolerance at `t = 20` and shrink
/// from `t = 10` to `t = 20`.
pub fn busemann_limit_suite(seed: u64) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::BusemannLimit, BUSEMANN_LIMIT_TOL);
    for case in 0..100 {
        let d = 2 + case % 9;
        let p = random_ideal(&mut rng, d)?;
        let z = PoincarePoint::new(random_in_ball(&mut rng, d, 0.9))?;
        let exact = busemann(&p, &z)?;
        let err10 = (busemann_limit(&p, &z, 10.0)? - exact).abs();
        let err20 = (busemann_limit(&p, &z, 20.0)? - exact).abs();
        report.record(err20, err20 < BUSEMANN_LIMIT_TOL && err20 < err10, || {
            format!("p={} z={} err(t=10)={err10:e} err(t=20)={err20:e}", fmt_vec(p.coords()), fmt_vec(z.coords()))
        });
    }
    Ok(report.finish(started))
}

/// One-dimensional identity with logistic regression on 1000 samples.
pub fn logreg_suite(seed: u64) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new(Suite::Logreg, LOGREG_TOL);
    let check = logreg_equivalence_check(1000, seed)?;
    report.cases = check.samples;
    report.max_deviation = check.max_abs_deviation;
    if let Some((y, label)) = check.worst_case {
        report.details.push(format!("largest deviation at y={y}, label={label}"));
        if check.max_abs_deviation.is_nan() || check.max_abs_deviation >= LOGREG_TOL {
            report.passed = false;
            report
                .failures
                .push(FailingCase { inputs: format!("y={y} label={label}"), deviation: check.max_abs_deviation });
        }
    }
    Ok(report.finish(started))
}

/// Growth class of the truncated radial integral as the cutoff approaches
/// the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Convergent,
    Logarithmic,
    Divergent,
    Unclassified,
}

/// Truncated radial integrals at the three cutoffs for one `(d, φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityCase {
    pub d: usize,
    pub phi: f64,
    pub i_1e4: f64,
    pub i_1e6: f64,
    pub i_1e8: f64,
}

/// Relative change below which the integral counts as settled.
pub const CONVERGENT_CAUCHY_TOL: f64 = 1e-3;
pub const CONVERGENT_GROWTH_MAX: f64 = 1.05;
pub const LOG_GROWTH_RANGE: (f64, f64) = (1.5, 3.0);
pub const DIVERGENT_GROWTH_MIN: f64 = 10.0;

impl DensityCase {
    pub fn compute(d: usize, phi: f64) -> Result<Self> {
        Ok(Self {
            d,
            phi,
            i_1e4: density_radial_integral(d, phi, 1e-4)?,
            i_1e6: density_radial_integral(d, phi, 1e-6)?,
            i_1e8: density_radial_integral(d, phi, 1e-8)?,
        })
    }

    /// `I(1e-8) / I(1e-4)`.
    pub fn growth(&self) -> f64 {
        self.i_1e8 / self.i_1e4
    }

    /// `|I(1e-6) − I(1e-8)| / I(1e-8)`.
    pub fn cauchy(&self) -> f64 {
        (self.i_1e6 - self.i_1e8).abs() / self.i_1e8
    }

    pub fn classify(&self) -> Growth {
        let g = self.growth();
        if g < CONVERGENT_GROWTH_MAX {
            Growth::Convergent
        } else if g > LOG_GROWTH_RANGE.0 && g < LOG_GROWTH_RANGE.1 {
            Growth::Logarithmic
        } else if g > DIVERGENT_GROWTH_MIN {
            Growth::Divergent
        } else {
            Growth::Unclassified
        }
    }
}

/// Expected growth class for `φ − (d − 2)`.
pub fn expected_growth(d: usize, phi: f64) -> Growth {
    let margin = phi - (d as f64 - 2.0);
    if margin > 0.0 {
        Growth::Convergent
    } else if margin == 0.0 {
        Growth::Logarithmic
    } else {
        Growth::Divergent
    }
}

/// The density-normalizability pattern for `d ∈ {4, 5, 6}` and
/// `φ ∈ {d − 2.5, d − 2, d − 1.5}`, classified by growth ratio.
pub fn density_suite() -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new(Suite::Density, 0.0);
    for d in [4usize, 5, 6] {
        for offset in [-0.5, 0.0, 0.5] {
            let phi = d as f64 - 2.0 + offset;
            let case = DensityCase::compute(d, phi)?;
            let (got, want) = (case.classify(), expected_growth(d, phi));
            report.record(0.0, got == want, || format!("d={d} phi={phi}: expected {want:?}, got {got:?} ({case:?})"));
            report.details.push(format!(
                "d={d} phi={phi}: I(1e-4)={:.6e} I(1e-6)={:.6e} I(1e-8)={:.6e} growth={:.4} cauchy={:.3e} -> {got:?}",
                case.i_1e4,
                case.i_1e6,
                case.i_1e8,
                case.growth(),
                case.cauchy()
            ));
        }
    }
    Ok(report.finish(started))
}

/// Cosine-argmax and loss-argmin predictions on 1000 random embeddings for
/// each `(d, C) ∈ {(2, 10), (5, 10), (10, 100)}`.
pub fn inference_equivalence_suite(seed: u64) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::InferenceEquiv, 0.0);
    for (d, classes) in [(2usize, 10usize), (5, 10), (10, 100)] {
        let protos: PrototypeSet = if d == 2 {
            uniform_circle_prototypes(classes)?
        } else {
            separation_prototypes(classes, d, DEFAULT_SEPARATION_ITERS, DEFAULT_SEPARATION_LR, seed)?
        };
        let phi = d as f64;
        let mut mismatches = 0usize;
        for _ in 0..1000 {
            let x = EuclideanVector::new(gaussian(&mut rng, d).into_iter().map(|v| 2.0 * v).collect())?;
            let z = exp0(&x);
            let by_cosine = argmax_cosine_class(&z, &protos)?;
            let by_loss = argmin_loss_class(&z, &protos, phi)?;
            let ok = by_cosine == Some(by_loss);
            if !ok {
                mismatches += 1;
            }
            report.record(f64::from(u8::from(!ok)), ok, || {
                format!("d={d} C={classes} z={}: cosine {by_cosine:?}, loss {by_loss}", fmt_vec(z.coords()))
            });
        }
        report.details.push(format!("d={d} C={classes}: {mismatches} mismatches in 1000"));
    }
    Ok(report.finish(started))
}

/// Runs `suites` in order.
pub fn run_suites(suites: &[Suite], seed: u64) -> Result<Vec<SuiteReport>> {
    suites.iter().map(|s| s.run(seed)).collect()
}
