use crate::error::{check_dims, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for a list of parameter blocks.
///
/// Weight decay is the classic L2 form: `weight_decay · θ` is added to the
/// gradient before the moment updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(block_sizes: &[usize]) -> Self {
        Self {
            step: 0,
            first: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64, weight_decay: f64) -> Result<()> {
        check_dims(self.first.len(), params.len())?;
        check_dims(self.first.len(), grads.len())?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            check_dims(m.len(), p.len())?;
            check_dims(m.len(), g.len())?;
        }
        self.step += 1;
        let correction1 = 1.0 - BETA1.powi(self.step as i32);
        let correction2 = 1.0 - BETA2.powi(self.step as i32);
        for (((block, grad), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..block.len() {
                let g = grad[i] + weight_decay * block[i];
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                block[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(&[3]);
        let mut p = vec![1.0, -2.0, 3.0];
        for _ in 0..5 {
            adam.step(&mut [p.as_mut_slice()], &[&[0.0, 0.0, 0.0]], 1e-3, 0.0).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_is_normalized_gradient() {
        let mut adam = Adam::new(&[3]);
        let g = [0.5, -3.0, 1e-3];
        let mut p = vec![0.0; 3];
        let lr = 0.01;
        adam.step(&mut [p.as_mut_slice()], &[&g], lr, 0.0).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            assert_relative_eq!(*pi, -lr * gi / (gi.abs() + EPSILON), max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_gradient_keeps_descending() {
        let mut adam = Adam::new(&[1]);
        let mut p = vec![0.0];
        adam.step(&mut [p.as_mut_slice()], &[&[2.0]], 0.1, 0.0).unwrap();
        let after_one = p[0];
        adam.step(&mut [p.as_mut_slice()], &[&[2.0]], 0.1, 0.0).unwrap();
        assert!(p[0] < after_one && after_one < 0.0);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        let mut adam = Adam::new(&[1]);
        let mut p = vec![4.0];
        adam.step(&mut [p.as_mut_slice()], &[&[0.0]], 0.1, 0.5).unwrap();
        assert_relative_eq!(p[0], 4.0 - 0.1 * 2.0 / (2.0 + EPSILON), max_relative = 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = Adam::new(&[2]);
        let mut p = vec![0.0; 3];
        assert!(adam.step(&mut [p.as_mut_slice()], &[&[0.0, 0.0, 0.0]], 0.1, 0.0).is_err());
        assert_eq!(adam.steps_taken(), 0);
    }
}
