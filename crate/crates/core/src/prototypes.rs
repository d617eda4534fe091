//! Placement of class prototypes on the ideal boundary.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, IdealPoint};

/// How a prototype set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    UniformCircle,
    Separation,
    ExternalProjected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealPrototype {
    pub point: IdealPoint,
    pub label: usize,
}

/// `C ≥ 2` ideal prototypes with labels exactly `0..C`, stored in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: Vec<IdealPrototype>,
    dimension: usize,
    provenance: Provenance,
}

impl PrototypeSet {
    pub fn new(mut prototypes: Vec<IdealPrototype>, provenance: Provenance) -> Result<Self> {
        if prototypes.len() < 2 {
            return Err(Error::invalid(format!("a prototype set needs at least 2 classes, got {}", prototypes.len())));
        }
        let dimension = prototypes[0].point.dim();
        if let Some(bad) = prototypes.iter().find(|p| p.point.dim() != dimension) {
            return Err(Error::invalid(format!(
                "prototype for label {} has dimension {}, expected {dimension}",
                bad.label,
                bad.point.dim()
            )));
        }
        prototypes.sort_by_key(|p| p.label);
        for (expected, p) in prototypes.iter().enumerate() {
            if p.label != expected {
                return Err(Error::invalid(format!(
                    "prototype labels must be exactly 0..{} without duplicates (found {} at position {expected})",
                    prototypes.len(),
                    p.label
                )));
            }
        }
        Ok(Self { prototypes, dimension, provenance })
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn prototypes(&self) -> &[IdealPrototype] {
        &self.prototypes
    }

    /// Prototype point of class `label`. Panics if the label is out of range.
    pub fn point(&self, label: usize) -> &IdealPoint {
        &self.prototypes[label].point
    }

    pub fn iter(&self) -> impl Iterator<Item = &IdealPrototype> {
        self.prototypes.iter()
    }
}

fn from_rows(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<PrototypeSet> {
    let prototypes = rows
        .into_iter()
        .enumerate()
        .map(|(label, row)| Ok(IdealPrototype { point: IdealPoint::new(row)?, label }))
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(prototypes, provenance)
}

/// `C` equally spaced points `(cos 2πk/C, sin 2πk/C)` on the unit circle.
pub fn uniform_circle_prototypes(classes: usize) -> Result<PrototypeSet> {
    if classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
    }
    let rows = (0..classes)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / classes as f64;
            vec![angle.cos(), angle.sin()]
        })
        .collect();
    from_rows(rows, Provenance::UniformCircle)
}

pub const DEFAULT_SEPARATION_ITERS: usize = 1000;
const SEPARATION_MOMENTUM: f64 = 0.9;
pub const DEFAULT_SEPARATION_LR: f64 = 0.1;

fn max_cosine_of(rows: &[Vec<f64>]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            best = best.max(dot(&rows[i], &rows[j]));
        }
    }
    best
}

fn normalize(row: &mut [f64]) {
    let n = dot(row, row).sqrt();
    for c in row.iter_mut() {
        *c /= n;
    }
}

/// Spreads `C` points over the sphere `S^{d−1}` by minimizing
/// `(1/C) Σ_i max_{j≠i} p_i·p_j` with projected (sub)gradient descent.
///
/// Rows start as normalized Gaussian draws. After every step the rows are
/// renormalized, and the iterate with the smallest maximum pairwise cosine
/// (the initialization included) is returned.
pub fn separation_prototypes(classes: usize, dims: usize, iters: usize, lr: f64, seed: u64) -> Result<PrototypeSet> {
    if classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
    }
    if dims < 3 {
        return Err(Error::invalid(format!(
            "separation placement needs d >= 3, got {dims}; use the uniform circle for d = 2"
        )));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::invalid(format!("learning rate must be finite and > 0, got {lr}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let mut row: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
            normalize(&mut row);
            row
        })
        .collect();

    let mut best_rows = rows.clone();
    let mut best_max = max_cosine_of(&rows);
    let scale = 1.0 / classes as f64;
    let mut nearest = vec![0usize; classes];
    let mut grads = vec![vec![0.0; dims]; classes];
    let mut velocity = vec![vec![0.0; dims]; classes];

    for step in 0..iters {
        let step_lr = lr * (1.0 - step as f64 / iters as f64);
        for (i, slot) in nearest.iter_mut().enumerate() {
            let mut arg = usize::MAX;
            let mut val = f64::NEG_INFINITY;
            for (j, other) in rows.iter().enumerate() {
                if j == i {
                    continue;
                }
                let s = dot(&rows[i], other);
                // strict comparison: the first index wins ties
                if s > val {
                    val = s;
                    arg = j;
                }
            }
            *slot = arg;
        }
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|c| *c = 0.0);
        }
        for (i, &j) in nearest.iter().enumerate() {
            for k in 0..dims {
                grads[i][k] += scale * rows[j][k];
                grads[j][k] += scale * rows[i][k];
            }
        }
        for ((row, g), v) in rows.iter_mut().zip(&grads).zip(velocity.iter_mut()) {
            for ((c, gc), vc) in row.iter_mut().zip(g).zip(v.iter_mut()) {
                *vc = SEPARATION_MOMENTUM * *vc + gc;
                *c -= step_lr * *vc;
            }
            normalize(row);
        }
        let current = max_cosine_of(&rows);
        if current < best_max {
            best_max = current;
            best_rows.clone_from(&rows);
        }
    }
    from_rows(best_rows, Provenance::Separation)
}

/// ℓ2-normalizes externally supplied rows onto the ideal boundary.
pub fn project_to_boundary(points: &[Vec<f64>], labels: &[usize]) -> Result<PrototypeSet> {
    if points.len() != labels.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", points.len(), labels.len())));
    }
    let prototypes = points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(row, (coords, &label))| {
            if coords.iter().all(|&c| c == 0.0) {
                return Err(Error::invalid(format!("row {row} (label {label}) has zero norm and no direction")));
            }
            let point = IdealPoint::new(coords.clone())
                .map_err(|e| Error::invalid(format!("row {row} (label {label}): {e}")))?;
            Ok(IdealPrototype { point, label })
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(prototypes, Provenance::ExternalProjected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationMetrics {
    /// Smallest pairwise angle, in radians.
    pub min_angle: f64,
    pub max_cosine: f64,
}

pub fn separation_metrics(protos: &PrototypeSet) -> SeparationMetrics {
    let rows: Vec<Vec<f64>> = protos.iter().map(|p| p.point.coords().to_vec()).collect();
    let max_cosine = max_cosine_of(&rows);
    SeparationMetrics { min_angle: max_cosine.clamp(-1.0, 1.0).acos(), max_cosine }
}
