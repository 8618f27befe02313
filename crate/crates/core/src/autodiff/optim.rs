use crate::autodiff::params::ParamSet;
use crate::autodiff::tensor::Tensor;
use crate::autodiff::AutodiffError;
use crate::scalar::Scalar;

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
///
/// Returns the norm before clipping. An infinite `max_norm` disables clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let norm = grads.iter().map(Tensor::sum_sq).sum::<T>().sqrt();
    if max_norm.is_finite() && norm > max_norm && norm > T::zero() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale_in_place(s));
    }
    norm
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, learning_rate: T) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect::<Vec<_>>()
        };
        Self {
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(
        &mut self,
        params: &mut ParamSet<T>,
        grads: &[Tensor<T>],
    ) -> Result<(), AutodiffError> {
        check_layout(params, grads)?;
        if self.first.len() != grads.len() {
            return Err(AutodiffError::shape(
                "adam_step",
                "optimizer state built for other parameters".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = self.beta1 * *mv + (T::one() - self.beta1) * gv;
                *vv = self.beta2 * *vv + (T::one() - self.beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Plain gradient descent, kept for ablations.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub learning_rate: T,
}

impl<T: Scalar> Sgd<T> {
    pub fn step(&self, params: &mut ParamSet<T>, grads: &[Tensor<T>]) -> Result<(), AutodiffError> {
        check_layout(params, grads)?;
        for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
            for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= self.learning_rate * gv;
            }
        }
        Ok(())
    }
}

fn check_layout<T: Scalar>(params: &ParamSet<T>, grads: &[Tensor<T>]) -> Result<(), AutodiffError> {
    if params.len() != grads.len()
        || params
            .tensors()
            .iter()
            .zip(grads)
            .any(|(p, g)| p.shape() != g.shape())
    {
        return Err(AutodiffError::shape(
            "optimizer",
            "gradients do not match parameters".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads(v: &[f64]) -> Vec<Tensor<f64>> {
        vec![Tensor::from_f64(vec![v.len()], v).unwrap()]
    }

    #[test]
    fn clipping_below_threshold_is_noop() {
        let mut g = grads(&[3.0, 4.0]);
        assert_eq!(clip_gradients(&mut g, 10.0), 5.0);
        assert_eq!(g[0].data(), &[3.0, 4.0]);
    }

    #[test]
    fn clipping_rescales_to_max_norm() {
        let mut g = grads(&[3.0, 4.0]);
        clip_gradients(&mut g, 1.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
        assert!((g[0].data()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_untouched() {
        let mut g = grads(&[0.0, 0.0]);
        clip_gradients(&mut g, 1.0);
        assert_eq!(g[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn infinite_threshold_disables_clipping() {
        let mut g = grads(&[3e9, 4e9]);
        clip_gradients(&mut g, f64::INFINITY);
        assert_eq!(g[0].data(), &[3e9, 4e9]);
    }

    fn one_param(v: &[f64]) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::from_f64(vec![v.len()], v).unwrap());
        p
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = one_param(&[1.0, -2.0]);
        let mut adam = AdamState::new(&p, 0.001);
        adam.step(&mut p, &grads(&[0.0, 0.0])).unwrap();
        assert_eq!(p.tensors()[0].data(), &[1.0, -2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_against_gradient_sign_by_lr() {
        for (b1, b2) in [(0.9, 0.999), (0.5, 0.9), (0.0, 0.0)] {
            let mut p = one_param(&[0.0, 0.0, 0.0]);
            let mut adam = AdamState::new(&p, 0.001);
            adam.beta1 = b1;
            adam.beta2 = b2;
            adam.step(&mut p, &grads(&[2.5, -0.01, 300.0])).unwrap();
            for (&x, s) in p.tensors()[0].data().iter().zip([-1.0, 1.0, -1.0]) {
                assert_eq!(x.signum(), s);
                assert!((x.abs() - 0.001).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut p = one_param(&[0.3, 0.7]);
            let mut adam = AdamState::new(&p, 0.01);
            for i in 0..50 {
                let g = grads(&[(i as f64).sin(), (i as f64 * 0.3).cos()]);
                adam.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        for (x, y) in a.tensors()[0].data().iter().zip(b.tensors()[0].data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = one_param(&[0.0, 0.0]);
        let mut adam = AdamState::new(&p, 0.001);
        assert!(adam.step(&mut p, &grads(&[1.0])).is_err());
    }
}
