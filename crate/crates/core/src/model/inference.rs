use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::Model;
use crate::data_io::Dataset;
use crate::error::{check_dims, Error, Result};
use crate::geometry::{self, exp0, geodesic_distance, EuclideanVector, IdealPoint, PoincarePoint};
use crate::loss::penalized_busemann_loss;
use crate::prototypes::PrototypeSet;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: usize,
    /// Hyperbolic distance of the embedding from the origin.
    pub confidence: f64,
    /// Set when the embedding is exactly the origin, where no direction (and
    /// hence no cosine) exists; the class is then label 0.
    pub degenerate: bool,
}

/// Class with the largest cosine similarity to `z`; ties go to the lowest
/// label. `None` when `z` is the origin.
pub fn argmax_cosine_class(z: &PoincarePoint, protos: &PrototypeSet) -> Result<Option<usize>> {
    check_dims(protos.dimension(), z.dim())?;
    if z.coords().iter().all(|&c| c == 0.0) {
        return Ok(None);
    }
    // z/‖z‖ only rescales every score by the same positive factor
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, proto) in protos.iter().enumerate() {
        let s = geometry::dot(z.coords(), proto.point.coords());
        if s > best_score {
            best_score = s;
            best = k;
        }
    }
    Ok(Some(best))
}

/// Class minimizing the penalized Busemann loss; ties go to the lowest label.
pub fn argmin_loss_class(z: &PoincarePoint, protos: &PrototypeSet, phi: f64) -> Result<usize> {
    let mut best = 0;
    let mut best_loss = f64::INFINITY;
    for (k, proto) in protos.iter().enumerate() {
        let l = penalized_busemann_loss(z, &proto.point, phi)?;
        if l < best_loss {
            best_loss = l;
            best = k;
        }
    }
    Ok(best)
}

pub(crate) fn predict_embedding(z: &PoincarePoint, protos: &PrototypeSet) -> Result<Prediction> {
    let confidence = geodesic_distance(&PoincarePoint::origin(z.dim()), z)?;
    Ok(match argmax_cosine_class(z, protos)? {
        Some(class) => Prediction { class, confidence, degenerate: false },
        None => Prediction { class: 0, confidence: 0.0, degenerate: true },
    })
}

/// Classifies `x` by the cosine rule on `z = exp0(F(x))`.
///
/// In debug builds the answer is cross-checked against the argmin of the
/// penalized loss; the two may only disagree on numerical near-ties.
pub fn predict(model: &Model, x: &[f64], protos: &PrototypeSet, phi: f64) -> Result<Prediction> {
    let z = exp0(&model.forward(x)?);
    let prediction = predict_embedding(&z, protos)?;
    if cfg!(debug_assertions) && !prediction.degenerate {
        let by_loss = argmin_loss_class(&z, protos, phi)?;
        if by_loss != prediction.class {
            let gap = geometry::dot(z.coords(), protos.point(prediction.class).coords())
                - geometry::dot(z.coords(), protos.point(by_loss).coords());
            debug_assert!(gap.abs() <= 1e-12 * z.norm(), "decision rules disagree beyond a near-tie");
        }
    }
    Ok(prediction)
}

/// One dataset row pushed through the model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedExample {
    pub embedding: PoincarePoint,
    pub label: usize,
    pub prediction: Prediction,
}

pub fn embed_dataset(model: &Model, data: &Dataset, protos: &PrototypeSet) -> Result<Vec<EmbeddedExample>> {
    super::train::check_compatible(model, data, protos)?;
    data.features()
        .iter()
        .zip(data.labels())
        .map(|(x, &label)| {
            let embedding = exp0(&model.forward(x)?);
            let prediction = predict_embedding(&embedding, protos)?;
            Ok(EmbeddedExample { embedding, label, prediction })
        })
        .collect()
}

/// Accuracy plus the origin-distance confidence analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub examples: usize,
    pub accuracy: f64,
    /// `None` for classes without examples.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub mean_distance_correct: Option<f64>,
    pub mean_distance_incorrect: Option<f64>,
    /// `mean_distance_correct − mean_distance_incorrect` when both exist.
    pub distance_gap: Option<f64>,
    /// Spearman correlation between origin distance and correctness; `None`
    /// when either variable is constant.
    pub spearman: Option<f64>,
    pub degenerate: usize,
}

impl EvalReport {
    pub fn from_examples(examples: &[EmbeddedExample], class_count: usize) -> Self {
        let mut hits = vec![0usize; class_count];
        let mut totals = vec![0usize; class_count];
        let mut correct_d = Vec::new();
        let mut wrong_d = Vec::new();
        let mut distances = Vec::with_capacity(examples.len());
        let mut correctness = Vec::with_capacity(examples.len());
        for e in examples {
            let ok = e.prediction.class == e.label;
            if e.label < class_count {
                totals[e.label] += 1;
                hits[e.label] += usize::from(ok);
            }
            let d = e.prediction.confidence;
            if ok {
                correct_d.push(d);
            } else {
                wrong_d.push(d);
            }
            distances.push(d);
            correctness.push(if ok { 1.0 } else { 0.0 });
        }
        let mean_distance_correct = stats::mean(&correct_d);
        let mean_distance_incorrect = stats::mean(&wrong_d);
        EvalReport {
            examples: examples.len(),
            accuracy: correct_d.len() as f64 / examples.len().max(1) as f64,
            per_class_accuracy: hits.iter().zip(&totals).map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64)).collect(),
            mean_distance_correct,
            mean_distance_incorrect,
            distance_gap: mean_distance_correct.zip(mean_distance_incorrect).map(|(a, b)| a - b),
            spearman: stats::spearman(&distances, &correctness),
            degenerate: examples.iter().filter(|e| e.prediction.degenerate).count(),
        }
    }
}

pub fn evaluate(model: &Model, data: &Dataset, protos: &PrototypeSet) -> Result<EvalReport> {
    let examples = embed_dataset(model, data, protos)?;
    Ok(EvalReport::from_examples(&examples, data.class_count().max(protos.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogregReport {
    pub samples: usize,
    pub max_abs_deviation: f64,
    /// Pre-activation and label where the deviation peaked.
    pub worst_case: Option<(f64, u8)>,
}

/// Range of pre-activations sampled by [`logreg_equivalence_check`].
pub const LOGREG_PREACTIVATION_RANGE: f64 = 10.0;

/// Loss of a one-dimensional pre-activation `y` against the 0/1 label `p01`,
/// with `φ = 1` and ideal points `−1 ↔ 0`, `+1 ↔ 1`.
pub fn one_dim_loss(y: f64, p01: u8) -> Result<f64> {
    let z = exp0(&EuclideanVector::new(vec![y])?);
    let p = IdealPoint::new(vec![if p01 == 1 { 1.0 } else { -1.0 }])?;
    penalized_busemann_loss(&z, &p, 1.0)
}

/// Binary cross-entropy of `z' = 1/(1 + e^{−y})` against `p01`.
pub fn logistic_cross_entropy(y: f64, p01: u8) -> f64 {
    let z = 1.0 / (1.0 + (-y).exp());
    let one_minus_z = 1.0 / (1.0 + y.exp());
    let p = f64::from(p01);
    -p * z.ln() - (1.0 - p) * one_minus_z.ln()
}

/// Samples `(y, p′)` and measures `|ℓ/2 + ln 2 − CE|` in dimension one.
pub fn logreg_equivalence_check(samples: usize, seed: u64) -> Result<LogregReport> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LogregReport { samples, max_abs_deviation: 0.0, worst_case: None };
    for _ in 0..samples {
        let y = rng.random_range(-LOGREG_PREACTIVATION_RANGE..=LOGREG_PREACTIVATION_RANGE);
        let label: u8 = rng.random_range(0..=1);
        let lhs = one_dim_loss(y, label)? / 2.0 + std::f64::consts::LN_2;
        let dev = (lhs - logistic_cross_entropy(y, label)).abs();
        if report.worst_case.is_none() || dev > report.max_abs_deviation {
            report.max_abs_deviation = dev;
            report.worst_case = Some((y, label));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::network::{Activation, Layer};
    use crate::prototypes::{project_to_boundary, uniform_circle_prototypes};
    use approx::assert_abs_diff_eq;
    use rand_distr::StandardNormal;

    fn identity_model(n: usize) -> Model {
        let rows = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Model::new(vec![Layer::new(rows, vec![0.0; n], Activation::Identity).unwrap()]).unwrap()
    }

    #[test]
    fn embedding_on_a_prototype_ray_gets_that_class() {
        let protos = uniform_circle_prototypes(6).unwrap();
        let m = identity_model(2);
        for k in 0..6 {
            let x: Vec<f64> = protos.point(k).coords().iter().map(|c| 1.7 * c).collect();
            let pred = predict(&m, &x, &protos, 0.2).unwrap();
            assert_eq!(pred.class, k);
            assert!(!pred.degenerate);
            assert_abs_diff_eq!(pred.confidence, 1.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn origin_is_degenerate() {
        let protos = uniform_circle_prototypes(3).unwrap();
        let pred = predict(&identity_model(2), &[0.0, 0.0], &protos, 0.2).unwrap();
        assert_eq!(pred, Prediction { class: 0, confidence: 0.0, degenerate: true });
    }

    #[test]
    fn ties_break_to_lowest_label() {
        let protos = project_to_boundary(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]], &[0, 1, 2]).unwrap();
        let z = PoincarePoint::new(vec![0.3, 0.3]).unwrap();
        assert_eq!(argmax_cosine_class(&z, &protos).unwrap(), Some(0));
        assert_eq!(argmin_loss_class(&z, &protos, 0.0).unwrap(), 0);
    }

    #[test]
    fn decision_rules_agree_on_random_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (d, c) = (5, 10);
        let mut mismatches = 0;
        for _ in 0..1000 {
            let rows: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let protos = project_to_boundary(&rows, &(0..c).collect::<Vec<_>>()).unwrap();
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let r: f64 = rng.random_range(0.01..0.99);
            let n = geometry::norm(&dir);
            let z = PoincarePoint::new(dir.iter().map(|v| v * r / n).collect()).unwrap();
            let phi = rng.random_range(0.0..3.0);
            if argmax_cosine_class(&z, &protos).unwrap() != Some(argmin_loss_class(&z, &protos, phi).unwrap()) {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn logreg_identity_examples() {
        for label in [0, 1] {
            let lhs = one_dim_loss(0.0, label).unwrap() / 2.0 + std::f64::consts::LN_2;
            assert_abs_diff_eq!(lhs, std::f64::consts::LN_2, epsilon = 1e-15);
            assert_abs_diff_eq!(logistic_cross_entropy(0.0, label), std::f64::consts::LN_2, epsilon = 1e-15);
        }
        let expected = (1.0 + (-4.0f64).exp()).ln();
        assert_abs_diff_eq!(expected, 0.01815, epsilon = 1e-5);
        let lhs = one_dim_loss(4.0, 1).unwrap() / 2.0 + std::f64::consts::LN_2;
        assert_abs_diff_eq!(lhs, expected, epsilon = 1e-13);
        assert_abs_diff_eq!(logistic_cross_entropy(4.0, 1), expected, epsilon = 1e-15);
    }

    #[test]
    fn logreg_report() {
        let r = logreg_equivalence_check(1000, 0).unwrap();
        assert_eq!(r.samples, 1000);
        assert!(r.max_abs_deviation < 1e-10, "{}", r.max_abs_deviation);
        assert!(logreg_equivalence_check(0, 0).is_err());
    }

    #[test]
    fn eval_report_statistics() {
        let protos = uniform_circle_prototypes(2).unwrap();
        let m = identity_model(2);
        let data = Dataset::new(
            vec![vec![3.0, 0.0], vec![2.0, 0.1], vec![-0.2, 0.0], vec![-4.0, 0.0]],
            vec![0, 0, 0, 1],
            2,
            "toy",
        )
        .unwrap();
        let report = evaluate(&m, &data, &protos).unwrap();
        assert_eq!(report.examples, 4);
        assert_abs_diff_eq!(report.accuracy, 0.75);
        assert_eq!(report.per_class_accuracy, vec![Some(2.0 / 3.0), Some(1.0)]);
        assert!(report.distance_gap.unwrap() > 0.0);
        assert!(report.spearman.unwrap() > 0.0);
        assert_abs_diff_eq!(report.mean_distance_incorrect.unwrap(), 0.2, epsilon = 1e-12);
    }
}
