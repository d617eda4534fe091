use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::inference::predict_embedding;
use super::network::{Gradients, Model};
use crate::data_io::Dataset;
use crate::error::{Error, Result};
use crate::geometry::exp0;
use crate::loss::{loss_gradient, phi_linear};
use crate::prototypes::PrototypeSet;

/// Optimizer and schedule settings.
///
/// The learning rate is divided by `lr_decay_factor` once for every entry of
/// `lr_decay_epochs` that is `<=` the current (zero-based) epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub penalty_slope: f64,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            weight_decay: 5e-5,
            batch_size: 128,
            epochs: 100,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 10.0,
            penalty_slope: 0.1,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("lr_decay_factor", self.lr_decay_factor)?;
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        phi_linear(1, self.penalty_slope)?;
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&m| epoch >= m).count();
        self.learning_rate / self.lr_decay_factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss of each epoch, averaged over its mini-batches
    /// (weighted by batch size) as the parameters evolved.
    pub epoch_loss: Vec<f64>,
    /// Accuracy after each epoch on the validation split, or on the training
    /// data when no validation split was given.
    pub val_accuracy: Vec<f64>,
    pub learning_rate: Vec<f64>,
}

pub(crate) fn check_compatible(model: &Model, data: &Dataset, protos: &PrototypeSet) -> Result<()> {
    if data.input_dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "dataset has {} features but the model expects {}",
            data.input_dim(),
            model.input_dim()
        )));
    }
    if protos.dimension() != model.output_dim() {
        return Err(Error::invalid(format!(
            "prototypes have dimension {} but the model outputs dimension {}",
            protos.dimension(),
            model.output_dim()
        )));
    }
    if data.class_count() > protos.len() {
        return Err(Error::invalid(format!(
            "dataset has {} classes but only {} prototypes are available",
            data.class_count(),
            protos.len()
        )));
    }
    Ok(())
}

/// Accuracy of the cosine decision rule over a dataset.
pub fn accuracy(model: &Model, data: &Dataset, protos: &PrototypeSet) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &label) in data.features().iter().zip(data.labels()) {
        let z = exp0(&model.forward(x)?);
        if predict_embedding(&z, protos)?.class == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

struct BatchResult {
    loss_sum: f64,
    grads: Gradients,
}

fn example_terms(
    model: &Model,
    x: &[f64],
    proto: &crate::geometry::IdealPoint,
    phi: f64,
    scale: f64,
) -> Result<(f64, Gradients)> {
    let trace = model.trace(x)?;
    let out = crate::geometry::EuclideanVector::new(trace.output().to_vec())
        .map_err(|_| Error::Numeric("network produced a non-finite output".into()))?;
    let lg = loss_gradient(&out, proto, phi)?;
    let upstream: Vec<f64> = lg.grad.iter().map(|g| g * scale).collect();
    Ok((lg.value, model.backward_from_trace(&trace, &upstream)?))
}

fn batch_terms(
    model: &Model,
    data: &Dataset,
    batch: &[usize],
    protos: &PrototypeSet,
    phi: f64,
    deterministic: bool,
) -> Result<BatchResult> {
    let scale = 1.0 / batch.len() as f64;
    let term = |&i: &usize| example_terms(model, &data.features()[i], protos.point(data.labels()[i]), phi, scale);
    if deterministic {
        let mut grads = Gradients::zeros_like(model);
        let mut loss_sum = 0.0;
        for i in batch {
            let (value, g) = term(i)?;
            loss_sum += value;
            grads.add_assign(&g);
        }
        Ok(BatchResult { loss_sum, grads })
    } else {
        let (loss_sum, grads) = batch.par_iter().map(term).try_reduce(
            || (0.0, Gradients::zeros_like(model)),
            |(la, mut ga), (lb, gb)| {
                ga.add_assign(&gb);
                Ok((la + lb, ga))
            },
        )?;
        Ok(BatchResult { loss_sum, grads })
    }
}

/// Mini-batch Adam on the mean penalized Busemann loss with
/// `φ = penalty_slope · output_dim`.
///
/// Examples are reshuffled every epoch from a generator seeded with
/// `cfg.seed`. With `cfg.deterministic` set, per-example terms are summed in
/// batch order, so identical inputs give bitwise-identical parameters.
pub fn train(
    model: &Model,
    train_data: &Dataset,
    validation: Option<&Dataset>,
    protos: &PrototypeSet,
    cfg: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if train_data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    check_compatible(model, train_data, protos)?;
    if let Some(val) = validation {
        check_compatible(model, val, protos)?;
    }
    let phi = phi_linear(model.output_dim(), cfg.penalty_slope)?;

    let mut model = model.clone();
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 {
        return Ok((model, history));
    }

    let block_sizes: Vec<usize> = model.parameter_blocks_mut().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(&block_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let result = batch_terms(&model, train_data, batch, protos, phi, cfg.deterministic)?;
            loss_sum += result.loss_sum;
            let grads = result.grads.blocks();
            adam.step(&mut model.parameter_blocks_mut(), &grads, lr, cfg.weight_decay)?;
        }
        let mean_loss = loss_sum / train_data.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became non-finite in epoch {epoch}")));
        }
        history.epoch_loss.push(mean_loss);
        history.learning_rate.push(lr);
        history.val_accuracy.push(accuracy(&model, validation.unwrap_or(train_data), protos)?);
        log::debug!(
            "epoch {epoch}: loss {mean_loss:.6} acc {:.4} lr {lr}",
            history.val_accuracy.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::{project_to_boundary, separation_prototypes};

    fn one_dim_separable() -> (Dataset, PrototypeSet) {
        // class 1 for x > 0; prototypes −1 (label 0) and +1 (label 1)
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / 40.0).collect();
        let features: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let labels: Vec<usize> = xs.iter().map(|&x| usize::from(x > 0.0)).collect();
        let data = Dataset::new(features, labels, 2, "separable-1d").unwrap();
        let protos = project_to_boundary(&[vec![-1.0], vec![1.0]], &[0, 1]).unwrap();
        (data, protos)
    }

    #[test]
    fn schedule_divides_at_milestones() {
        let cfg = TrainConfig {
            learning_rate: 1.0,
            lr_decay_epochs: vec![3, 5],
            lr_decay_factor: 10.0,
            ..TrainConfig::default()
        };
        let lrs: Vec<f64> = (0..7).map(|e| cfg.learning_rate_at(e)).collect();
        assert_eq!(lrs, vec![1.0, 1.0, 1.0, 0.1, 0.1, 0.01, 0.01]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { penalty_slope: -0.1, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn logistic_regime_learns_separable_line() {
        let (data, protos) = one_dim_separable();
        let model = Model::linear(1, 1, 0).unwrap();
        // phi(1) = slope * 1 = 1
        let cfg = TrainConfig {
            learning_rate: 0.05,
            weight_decay: 0.0,
            batch_size: 64,
            epochs: 60,
            penalty_slope: 1.0,
            ..TrainConfig::default()
        };
        let (trained, history) = train(&model, &data, None, &protos, &cfg).unwrap();
        assert_eq!(history.epoch_loss.len(), 60);
        for w in history.epoch_loss[..10].windows(2) {
            assert!(w[1] < w[0], "{:?}", &history.epoch_loss[..10]);
        }
        assert_eq!(accuracy(&trained, &data, &protos).unwrap(), 1.0);
        assert_eq!(*history.val_accuracy.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let (data, protos) = one_dim_separable();
        let model = Model::linear(1, 1, 3).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (same, history) = train(&model, &data, None, &protos, &cfg).unwrap();
        assert_eq!(same, model);
        assert!(history.epoch_loss.is_empty());
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let (data, protos) = one_dim_separable();
        let wide = Model::linear(2, 1, 0).unwrap();
        assert!(train(&wide, &data, None, &protos, &TrainConfig::default()).is_err());
        let three = separation_prototypes(3, 3, 10, 0.1, 0).unwrap();
        let model = Model::linear(1, 1, 0).unwrap();
        assert!(train(&model, &data, None, &three, &TrainConfig::default()).is_err());
    }

    #[test]
    fn deterministic_runs_are_bitwise_identical() {
        let (data, protos) = one_dim_separable();
        let model = Model::mlp(1, &[4], 1, 2).unwrap();
        let cfg = TrainConfig { learning_rate: 0.01, batch_size: 7, epochs: 5, ..TrainConfig::default() };
        let (a, ha) = train(&model, &data, None, &protos, &cfg).unwrap();
        let (b, hb) = train(&model, &data, None, &protos, &cfg).unwrap();
        let bits = |m: &Model| m.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(ha, hb);

        let parallel = TrainConfig { deterministic: false, ..cfg };
        let (c, _) = train(&model, &data, None, &protos, &parallel).unwrap();
        for (x, y) in a.parameters().iter().zip(c.parameters()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
