use super::network::Weights;
use super::TrainConfig;

/// Adam variant using the infinity norm for the second moment:
///
/// ```text
/// m = b1 m + (1 - b1) g
/// u = max(b2 u, |g|)
/// w -= lr / (1 - b1^t) * m / (u + eps)
/// ```
#[derive(Clone, Debug)]
pub struct Adamax {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Weights,
    u: Weights,
    t: u64,
}

impl Adamax {
    pub fn new(cfg: &TrainConfig, like: &Weights) -> Self {
        let mut m = like.clone();
        m.fill(0.0);
        Adamax {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            u: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&Weights, &Weights) {
        (&self.m, &self.u)
    }

    pub fn step(&mut self, weights: &mut Weights, grads: &Weights) {
        self.t += 1;
        let lr_t = self.learning_rate / (1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32));
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let slots = weights.slices_mut().into_iter().zip(grads.slices()).zip(self.m.slices_mut()).zip(self.u.slices_mut());
        for (((w, g), m), u) in slots {
            for k in 0..w.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                u[k] = (b2 * u[k]).max(g[k].abs());
                w[k] -= lr_t * m[k] / (u[k] + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellKind, ModelConfig};
    use proptest::prelude::*;

    fn tiny() -> ModelConfig {
        ModelConfig { cell: CellKind::Idnn, input_dim: 1, hidden: 1, ..ModelConfig::default() }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = tiny();
        let mut w = Weights::zeros(&cfg);
        let mut g = Weights::zeros(&cfg);
        g.fill(1.0);
        let mut opt = Adamax::new(&TrainConfig::default(), &w);
        opt.step(&mut w, &g);
        // Hand-expanded first update: m = 0.1, u = 1, lr_t = lr / 0.1.
        let expected = -0.0007 / 0.1 * 0.1 / (1.0 + 1e-8);
        for s in w.slices() {
            for v in s {
                assert!((v - expected).abs() < 1e-15, "{v}");
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let cfg = tiny();
        let mut w = Weights::zeros(&cfg);
        w.fill(0.5);
        let g = Weights::zeros(&cfg);
        let mut opt = Adamax::new(&TrainConfig::default(), &w);
        opt.step(&mut w, &g);
        assert!(w.slices().iter().all(|s| s.iter().all(|&v| v == 0.5)));
    }

    proptest! {
        #[test]
        fn second_moment_dominates_recent_gradients(gs in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let cfg = tiny();
            let mut w = Weights::zeros(&cfg);
            let mut opt = Adamax::new(&TrainConfig::default(), &w);
            let mut prev_u = 0.0f64;
            for &gv in &gs {
                let mut g = Weights::zeros(&cfg);
                g.fill(gv);
                opt.step(&mut w, &g);
                let u = opt.moments().1.output_bias;
                prop_assert!(u >= gv.abs());
                prop_assert!(u >= 0.999 * prev_u - 1e-15);
                prev_u = u;
            }
            // A single update never exceeds lr / (1 - b1^t) in magnitude.
            prop_assert!(w.output_bias.abs() <= 0.0007 * gs.len() as f64 / 0.1 + 1e-12);
        }
    }
}
