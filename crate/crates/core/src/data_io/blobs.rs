use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Gaussian blobs around class centers placed on a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobsSpec {
    pub classes: usize,
    pub input_dim: usize,
    pub per_class: usize,
    pub center_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Geometry of the generated centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlobsReport {
    pub min_center_distance: f64,
    pub mean_center_distance: f64,
}

/// Centers are drawn once, uniformly on the sphere of radius
/// `center_scale`; each point is its center plus `N(0, noise_sigma²)` noise
/// per coordinate. Rows are grouped by class.
pub fn synthetic_blobs(spec: &BlobsSpec) -> Result<(Dataset, BlobsReport)> {
    if spec.classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {}", spec.classes)));
    }
    if spec.per_class == 0 || spec.input_dim == 0 {
        return Err(Error::invalid("per_class and input_dim must be >= 1"));
    }
    if !(spec.center_scale.is_finite() && spec.center_scale >= 0.0) {
        return Err(Error::invalid(format!("center_scale must be >= 0, got {}", spec.center_scale)));
    }
    if spec.noise_sigma.is_nan() || spec.noise_sigma < 0.0 {
        return Err(Error::invalid(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|_| Error::invalid(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let dir: Vec<f64> = (0..spec.input_dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.into_iter().map(|v| v * spec.center_scale / n).collect()
        })
        .collect();

    let mut features = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            features.push(center.iter().map(|c| c + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }

    let mut distances = Vec::new();
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = centers[i].iter().zip(&centers[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            distances.push(d);
        }
    }
    let report = BlobsReport {
        min_center_distance: distances.iter().copied().fold(f64::INFINITY, f64::min),
        mean_center_distance: distances.iter().sum::<f64>() / distances.len() as f64,
    };
    let name = format!(
        "blobs:{},{},{},{},{},{}",
        spec.classes, spec.input_dim, spec.per_class, spec.center_scale, spec.noise_sigma, spec.seed
    );
    Ok((Dataset::new(features, labels, spec.classes, name)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sigma: f64, seed: u64) -> BlobsSpec {
        BlobsSpec { classes: 10, input_dim: 20, per_class: 500, center_scale: 5.0, noise_sigma: sigma, seed }
    }

    #[test]
    fn zero_noise_collapses_to_centers() {
        let small = BlobsSpec { per_class: 4, ..spec(0.0, 1) };
        let (d, _) = synthetic_blobs(&small).unwrap();
        for class in d.features().chunks(4) {
            assert!(class.iter().all(|r| r == &class[0]));
            let n = class[0].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = synthetic_blobs(&spec(1.0, 7)).unwrap();
        let b = synthetic_blobs(&spec(1.0, 7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, synthetic_blobs(&spec(1.0, 8)).unwrap().0);
    }

    #[test]
    fn reference_configuration() {
        let (d, report) = synthetic_blobs(&spec(1.0, 0)).unwrap();
        assert_eq!((d.len(), d.input_dim(), d.class_count()), (5000, 20, 10));
        // independent directions in R^20 are nearly orthogonal: 5·√2 ≈ 7.07
        assert!(report.mean_center_distance > 5.0, "{report:?}");
        assert!(report.min_center_distance > 3.5, "{report:?}");
    }

    #[test]
    fn invalid_specs() {
        assert!(synthetic_blobs(&BlobsSpec { classes: 1, ..spec(1.0, 0) }).is_err());
        assert!(synthetic_blobs(&BlobsSpec { per_class: 0, ..spec(1.0, 0) }).is_err());
        assert!(synthetic_blobs(&spec(-1.0, 0)).is_err());
    }
}
