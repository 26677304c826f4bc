/// RMSProp with a per-parameter running mean of squared gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    pub v: Vec<f64>,
    pub alpha: f64,
    pub lr: f64,
    pub eps: f64,
}

impl RmsProp {
    pub const DEFAULT_ALPHA: f64 = 0.9;
    pub const DEFAULT_LR: f64 = 1e-3;
    pub const DEFAULT_EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            v: vec![0.0; n],
            alpha: Self::DEFAULT_ALPHA,
            lr,
            eps: Self::DEFAULT_EPS,
        }
    }

    /// `v <- alpha v + (1 - alpha) g^2; theta <- theta - lr g / (sqrt(v) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.v.len());
        assert_eq!(grads.len(), self.v.len());
        for ((p, v), g) in params.iter_mut().zip(self.v.iter_mut()).zip(grads) {
            *v = self.alpha * *v + (1.0 - self.alpha) * g * g;
            *p -= self.lr * g / (v.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let mut o = RmsProp::new(1, 1e-3);
        let mut p = [0.0];
        o.step(&mut p, &[1.0]);
        assert!((o.v[0] - 0.1).abs() < 1e-15);
        assert!((p[0] + 1e-3 / (0.1f64.sqrt() + 1e-8)).abs() < 1e-15);
        assert!((p[0] + 3.1623e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_decays_accumulator() {
        let mut o = RmsProp::new(1, 1e-3);
        o.v[0] = 0.5;
        let mut p = [2.0];
        o.step(&mut p, &[0.0]);
        assert_eq!(p[0], 2.0);
        assert!((o.v[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn two_steps_by_hand() {
        // v1 = 0.1 * 4 = 0.4, p1 = 1 - 1e-3 * 2 / sqrt(0.4)
        // v2 = 0.36 + 0.4 = 0.76, p2 = p1 - 1e-3 * 2 / sqrt(0.76)
        let mut o = RmsProp::new(1, 1e-3);
        o.eps = 0.0;
        let mut p = [1.0];
        o.step(&mut p, &[2.0]);
        o.step(&mut p, &[2.0]);
        let want = 1.0 - 2e-3 / 0.4f64.sqrt() - 2e-3 / 0.76f64.sqrt();
        assert!((p[0] - want).abs() < 1e-15);
        assert!((o.v[0] - 0.76).abs() < 1e-15);
    }
}
