//! Penalized Busemann loss and its gradient through the exponential map.

use rayon::prelude::*;

use crate::error::{check_dims, Error, Result};
use crate::geometry::{self, busemann, exp0, EuclideanVector, IdealPoint, PoincarePoint};
use crate::prototypes::PrototypeSet;
use crate::quadrature;

/// Penalty weight `φ = slope · dimension`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub slope: f64,
    pub dimension: usize,
}

impl PenaltyConfig {
    pub fn new(slope: f64, dimension: usize) -> Result<Self> {
        phi_linear(dimension, slope)?;
        Ok(Self { slope, dimension })
    }

    pub fn phi(&self) -> f64 {
        self.slope * self.dimension as f64
    }
}

/// Linear penalty schedule `φ(d; s) = s · d`.
pub fn phi_linear(d: usize, s: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::invalid(format!("penalty slope must be finite and >= 0, got {s}")));
    }
    Ok(s * d as f64)
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi.is_finite() && phi >= 0.0) {
        return Err(Error::invalid(format!("penalty weight must be finite and >= 0, got {phi}")));
    }
    Ok(())
}

/// `b_p(z) − φ · log(1 − ‖z‖²)`.
pub fn penalized_busemann_loss(z: &PoincarePoint, p: &IdealPoint, phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(busemann(p, z)? - phi * z.conformal_gap().ln())
}

/// Loss value and its gradient with respect to the pre-`exp0` output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Gradient of `x ↦ ℓ(exp0(x), p)` by the chain rule.
///
/// With `r = ‖x‖`, `u = x/r`, `c = p·u`, `ρ = tanh(r/2)` and
/// `D = ‖p − exp0(x)‖²` the loss is
/// `log D − (1 + φ) log(1 − ρ²)`, so
///
/// ```text
/// ∂ℓ/∂r = (ρ − c)(1 − ρ²)/D + (1 + φ) ρ
/// ∂ℓ/∂c = −2ρ/D,     ∇c = (p − c u)/r
/// ∇ℓ    = ∂ℓ/∂r · u + ∂ℓ/∂c · ∇c
/// ```
///
/// At `x = 0` the limit is `−p`. Once `exp0` clamps the radius, the radial
/// factor is evaluated at the clamped radius instead of being zeroed, so the
/// penalty still pulls saturated outputs back toward the origin.
pub fn loss_gradient(x: &EuclideanVector, p: &IdealPoint, phi: f64) -> Result<LossGradient> {
    check_phi(phi)?;
    check_dims(p.dim(), x.dim())?;
    let z = exp0(x);
    let value = penalized_busemann_loss(&z, p, phi)?;

    let r = x.norm();
    if r == 0.0 {
        return Ok(LossGradient { value, grad: p.coords().iter().map(|c| -c).collect() });
    }

    let rho = z.norm();
    let gap = z.conformal_gap();
    let dist_sq: f64 = p.coords().iter().zip(z.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
    let cos = geometry::dot(p.coords(), x.coords()) / r;

    let d_radius = (rho - cos) * gap / dist_sq + (1.0 + phi) * rho;
    let d_angle = -2.0 * (rho / r) / dist_sq;

    let grad = x
        .coords()
        .iter()
        .zip(p.coords())
        .map(|(xi, pi)| {
            let ui = xi / r;
            d_radius * ui + d_angle * (pi - cos * ui)
        })
        .collect();
    Ok(LossGradient { value, grad })
}

/// Mean loss over a batch together with `∂(mean)/∂x_i` for every example.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mean: f64,
    pub grads: Vec<Vec<f64>>,
}

pub fn batch_loss(xs: &[EuclideanVector], labels: &[usize], protos: &PrototypeSet, phi: f64) -> Result<BatchLoss> {
    batch_loss_with(xs, labels, protos, phi, true)
}

/// [`batch_loss`] with per-example terms evaluated on the rayon pool when
/// `deterministic` is false. The deterministic path sums left to right.
pub fn batch_loss_with(
    xs: &[EuclideanVector],
    labels: &[usize],
    protos: &PrototypeSet,
    phi: f64,
    deterministic: bool,
) -> Result<BatchLoss> {
    if xs.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    check_dims(xs.len(), labels.len())?;
    for &label in labels {
        if label >= protos.len() {
            return Err(Error::invalid(format!("label {label} out of range for {} prototypes", protos.len())));
        }
    }
    let per_example = |(x, &label): (&EuclideanVector, &usize)| loss_gradient(x, protos.point(label), phi);
    let terms: Vec<LossGradient> = if deterministic {
        xs.iter().zip(labels).map(per_example).collect::<Result<_>>()?
    } else {
        xs.par_iter().zip(labels.par_iter()).map(per_example).collect::<Result<_>>()?
    };

    let n = xs.len() as f64;
    let mean = if deterministic {
        terms.iter().map(|t| t.value).sum::<f64>() / n
    } else {
        terms.par_iter().map(|t| t.value).sum::<f64>() / n
    };
    let grads = terms.into_iter().map(|t| t.grad.into_iter().map(|g| g / n).collect()).collect();
    Ok(BatchLoss { mean, grads })
}

/// Relative tolerance used for [`density_radial_integral`].
pub const RADIAL_REL_TOL: f64 = 1e-9;

/// Truncated radial factor of the normalization constant of
/// `exp(−ℓ(z, p))` under the hyperbolic volume element:
///
/// ```text
/// I(δ) = ∫₀^{1−δ} (1 − r²)^{φ+1−d} r^{d−1} dr
/// ```
///
/// It stays bounded as `δ → 0` exactly when `φ > d − 2`.
pub fn density_radial_integral(d: usize, phi: f64, delta: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {d}")));
    }
    check_phi(phi)?;
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::invalid(format!("delta must lie in (0, 0.1), got {delta}")));
    }
    let exponent = phi + 1.0 - d as f64;
    let power = (d - 1) as i32;
    let integrand = move |r: f64| ((1.0 - r) * (1.0 + r)).powf(exponent) * r.powi(power);

    // The boundary layer near r = 1 gets its own interval.
    let split = 1.0 - 10.0 * delta;
    let upper = 1.0 - delta;
    let bulk = quadrature::integrate(integrand, 0.0, split, RADIAL_REL_TOL, 4000)?;
    let layer = quadrature::integrate(integrand, split, upper, RADIAL_REL_TOL, 4000)?;
    let total = bulk.value + layer.value;
    log::trace!("radial integral d={d} phi={phi} delta={delta}: {} + {} segments", bulk.segments, layer.segments);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numeric(format!(
            "radial integral for d={d}, phi={phi}, delta={delta} is not a finite positive \
             number: bulk {} (err {}), layer {} (err {})",
            bulk.value, bulk.error, layer.value, layer.error
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::{uniform_circle_prototypes, PrototypeSet, Provenance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn pt(v: &[f64]) -> PoincarePoint {
        PoincarePoint::new(v.to_vec()).unwrap()
    }

    fn ideal(v: &[f64]) -> IdealPoint {
        IdealPoint::new(v.to_vec()).unwrap()
    }

    fn ev(v: &[f64]) -> EuclideanVector {
        EuclideanVector::new(v.to_vec()).unwrap()
    }

    /// Central differences of the composed loss; independent of the
    /// analytic chain rule above.
    fn fd_gradient(x: &[f64], p: &IdealPoint, phi: f64, h: f64) -> Vec<f64> {
        let f = |v: &[f64]| penalized_busemann_loss(&exp0(&ev(v)), p, phi).unwrap();
        (0..x.len())
            .map(|i| {
                let mut plus = x.to_vec();
                let mut minus = x.to_vec();
                plus[i] += h;
                minus[i] -= h;
                (f(&plus) - f(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = geometry::norm(a).max(geometry::norm(b)).max(1e-12);
        diff / scale
    }

    #[test]
    fn phi_linear_examples() {
        assert_eq!(phi_linear(50, 0.1).unwrap(), 5.0);
        assert_eq!(phi_linear(1, 1.0).unwrap(), 1.0);
        assert_eq!(phi_linear(5, 0.0).unwrap(), 0.0);
        assert!(phi_linear(0, 1.0).is_err());
        assert!(phi_linear(3, -0.1).is_err());
        assert_eq!(PenaltyConfig::new(0.1, 50).unwrap().phi(), 5.0);
    }

    #[test]
    fn loss_examples() {
        let p = ideal(&[1.0, 0.0]);
        for phi in [0.0, 1.0, 7.5] {
            assert_eq!(penalized_busemann_loss(&PoincarePoint::origin(2), &p, phi).unwrap(), 0.0);
        }
        let v = penalized_busemann_loss(&pt(&[0.5, 0.0]), &p, 1.0).unwrap();
        assert_abs_diff_eq!(v, -(3f64.ln()) - 0.75f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(v, -0.81093, epsilon = 1e-5);

        let z = pt(&[0.9, 0.0]);
        let diff = penalized_busemann_loss(&z, &p, 2.0).unwrap() - penalized_busemann_loss(&z, &p, 0.0).unwrap();
        assert_abs_diff_eq!(diff, -2.0 * 0.19f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(diff, 3.3215, epsilon = 1e-4);

        assert!(penalized_busemann_loss(&z, &p, -1.0).is_err());
    }

    #[test]
    fn penalty_blows_up_near_boundary() {
        let p = ideal(&[0.0, 1.0]);
        let mut last = f64::NEG_INFINITY;
        for r in [0.9, 0.99, 0.999, 0.9999] {
            let v = penalized_busemann_loss(&pt(&[r, 0.0]), &p, 1.5).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn gradient_at_origin_is_odd_in_prototype() {
        let x = ev(&[0.0, 0.0, 0.0]);
        let p = ideal(&[0.2, -0.4, 0.9]);
        let q = ideal(&[-0.2, 0.4, -0.9]);
        let gp = loss_gradient(&x, &p, 0.7).unwrap();
        let gq = loss_gradient(&x, &q, 0.7).unwrap();
        let along_p = |g: &[f64]| geometry::dot(g, p.coords());
        assert_abs_diff_eq!(along_p(&gp.grad), -along_p(&gq.grad), epsilon = 1e-15);
        assert_abs_diff_eq!(along_p(&gp.grad), -1.0, epsilon = 1e-15);

        // the origin is the continuous limit of nearby points
        let near = ev(&[1e-7, -2e-7, 1e-7]);
        let g_near = loss_gradient(&near, &p, 0.7).unwrap();
        assert!(rel_err(&g_near.grad, &gp.grad) < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let max_radius = 2.0 * 0.95f64.atanh();
        for trial in 0..100 {
            let d = rng.random_range(1..=10);
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let radius = rng.random_range(0.05..max_radius);
            let n = geometry::norm(&dir);
            let x: Vec<f64> = dir.iter().map(|c| c * radius / n).collect();
            let p = ideal(&(0..d).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>());
            let phi = rng.random_range(0.0..5.0);

            let analytic = loss_gradient(&ev(&x), &p, phi).unwrap();
            let numeric = fd_gradient(&x, &p, phi, 1e-6);
            let err = rel_err(&analytic.grad, &numeric);
            assert!(err < 1e-6, "trial {trial}: d={d} phi={phi} err={err}");
        }
    }

    #[test]
    fn one_dimensional_gradient_is_logistic_residual() {
        let plus = ideal(&[1.0]);
        let minus = ideal(&[-1.0]);
        for y in [-6.0, -2.5, -0.3, 0.0, 0.8, 3.0, 7.0] {
            let sigma = 1.0 / (1.0 + f64::exp(-y));
            let g1 = loss_gradient(&ev(&[y]), &plus, 1.0).unwrap().grad[0] / 2.0;
            let g0 = loss_gradient(&ev(&[y]), &minus, 1.0).unwrap().grad[0] / 2.0;
            assert_abs_diff_eq!(g1, sigma - 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g0, sigma, epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_loss_examples() {
        let protos = uniform_circle_prototypes(4).unwrap();
        let x = ev(&[1.2, -0.4]);
        let single = batch_loss(std::slice::from_ref(&x), &[1], &protos, 0.5).unwrap();
        let direct = penalized_busemann_loss(&exp0(&x), protos.point(1), 0.5).unwrap();
        assert_eq!(single.mean, direct);
        let full = loss_gradient(&x, protos.point(1), 0.5).unwrap();
        assert_eq!(single.grads[0], full.grad);

        let twice = batch_loss(&[x.clone(), x.clone()], &[1, 1], &protos, 0.5).unwrap();
        assert_abs_diff_eq!(twice.mean, single.mean, epsilon = 1e-15);

        // p = (1,0): z = (0.5,0) and z = (-0.5,0) with phi = 1
        let protos2 = uniform_circle_prototypes(2).unwrap();
        let r = 2.0 * 0.5f64.atanh();
        let pair = batch_loss(&[ev(&[r, 0.0]), ev(&[-r, 0.0])], &[0, 0], &protos2, 1.0).unwrap();
        let first = -(3f64.ln()) - 0.75f64.ln();
        let second = 3f64.ln() - 0.75f64.ln();
        assert_abs_diff_eq!(pair.mean, 0.5 * (first + second), epsilon = 1e-12);

        assert!(matches!(batch_loss(std::slice::from_ref(&x), &[4], &protos, 0.5), Err(Error::InvalidInput(_))));
        assert!(batch_loss(&[], &[], &protos, 0.5).is_err());
    }

    #[test]
    fn parallel_batch_matches_sequential() {
        let protos = uniform_circle_prototypes(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<EuclideanVector> =
            (0..257).map(|_| ev(&[rng.sample(StandardNormal), rng.sample(StandardNormal)])).collect();
        let labels: Vec<usize> = (0..257).map(|i| i % 3).collect();
        let seq = batch_loss_with(&xs, &labels, &protos, 0.3, true).unwrap();
        let par = batch_loss_with(&xs, &labels, &protos, 0.3, false).unwrap();
        assert_abs_diff_eq!(seq.mean, par.mean, epsilon = 1e-12);
        assert_eq!(seq.grads, par.grads);
    }

    /// `½[−U − ln(1 − U)]` with `U = (1 − δ)²`: the d = 4, φ = 2 case.
    fn radial_log_case(delta: f64) -> f64 {
        let u = (1.0 - delta) * (1.0 - delta);
        0.5 * (-u - (delta * (2.0 - delta)).ln())
    }

    /// `½[4/3 − 2√W + (2/3)W^{3/2}]` with `W = 1 − (1 − δ)²`: d = 4, φ = 2.5.
    fn radial_sqrt_case(delta: f64) -> f64 {
        let w = delta * (2.0 - delta);
        0.5 * (4.0 / 3.0 - 2.0 * w.sqrt() + 2.0 / 3.0 * w.powf(1.5))
    }

    /// `W^{-1/2} + W^{1/2} − 2`: d = 4, φ = 1.5.
    fn radial_divergent_case(delta: f64) -> f64 {
        let w = delta * (2.0 - delta);
        w.powf(-0.5) + w.sqrt() - 2.0
    }

    #[test]
    fn radial_integral_matches_closed_forms() {
        for delta in [1e-2, 1e-4, 1e-6, 1e-8] {
            let cases =
                [(2.0, radial_log_case(delta)), (2.5, radial_sqrt_case(delta)), (1.5, radial_divergent_case(delta))];
            for (phi, expected) in cases {
                let got = density_radial_integral(4, phi, delta).unwrap();
                assert!(((got - expected) / expected).abs() < 1e-8, "phi={phi} delta={delta}: {got} vs {expected}");
            }
        }
        // φ = d − 1 gives ∫ r^{d−1} dr
        let got = density_radial_integral(3, 2.0, 1e-3).unwrap();
        assert_abs_diff_eq!(got, (1.0f64 - 1e-3).powi(3) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_integral_growth_examples() {
        // integrable exponent −1/2: the truncated integral barely moves
        let i4 = density_radial_integral(4, 2.5, 1e-4).unwrap();
        let i8 = density_radial_integral(4, 2.5, 1e-8).unwrap();
        assert!(i8 / i4 < 1.05);
        // the tail from 1e-8 to 1e-6 is ≈ √2·(1e-3 − 1e-4) in absolute terms
        let i6 = density_radial_integral(4, 2.5, 1e-6).unwrap();
        assert_abs_diff_eq!(i8 - i6, 2f64.sqrt() * 9e-4, epsilon = 2e-6);

        let ratio =
            |phi: f64| density_radial_integral(4, phi, 1e-8).unwrap() / density_radial_integral(4, phi, 1e-4).unwrap();
        assert!(ratio(1.5) > 10.0);
        let boundary = ratio(2.0);
        assert!(boundary > 1.5 && boundary < 3.0, "{boundary}");
    }

    #[test]
    fn radial_integral_rejects_bad_arguments() {
        assert!(density_radial_integral(1, 1.0, 1e-3).is_err());
        assert!(density_radial_integral(4, 1.0, 0.0).is_err());
        assert!(density_radial_integral(4, 1.0, 0.5).is_err());
        assert!(density_radial_integral(4, f64::NAN, 1e-3).is_err());
    }

    fn random_set(rng: &mut ChaCha8Rng, c: usize, d: usize) -> PrototypeSet {
        let rows: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let labels: Vec<usize> = (0..c).collect();
        let set = crate::prototypes::project_to_boundary(&rows, &labels).unwrap();
        assert_eq!(set.provenance(), Provenance::ExternalProjected);
        set
    }

    proptest! {
        #[test]
        fn penalty_decomposes(z in proptest::collection::vec(-0.57f64..0.57, 3), phi in 0.0f64..20.0) {
            let z = pt(&z);
            let p = ideal(&[0.3, 0.3, -0.9]);
            let diff = penalized_busemann_loss(&z, &p, phi).unwrap() - penalized_busemann_loss(&z, &p, 0.0).unwrap();
            prop_assert!((diff + phi * z.conformal_gap().ln()).abs() < 1e-12);
        }

        #[test]
        fn penalty_is_monotone(z in proptest::collection::vec(-0.57f64..0.57, 3), a in 0.0f64..10.0, b in 0.0f64..10.0) {
            prop_assume!(a < b);
            let z = pt(&z);
            prop_assume!(z.norm() > 1e-6);
            let p = ideal(&[1.0, 0.0, 0.0]);
            prop_assert!(penalized_busemann_loss(&z, &p, a).unwrap() < penalized_busemann_loss(&z, &p, b).unwrap());
        }

        #[test]
        fn argmin_loss_is_argmax_cosine(seed in 0u64..10_000, radius in 0.01f64..0.99, phi in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = random_set(&mut rng, 7, 4);
            let dir: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let n = geometry::norm(&dir);
            let z = pt(&dir.iter().map(|c| c * radius / n).collect::<Vec<_>>());
            let by_loss = (0..7)
                .map(|k| (k, penalized_busemann_loss(&z, set.point(k), phi).unwrap()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            let by_cos = (0..7)
                .map(|k| (k, geometry::dot(&dir, set.point(k).coords())))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            prop_assert_eq!(by_loss, by_cos);
        }
    }
}
