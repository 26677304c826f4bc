//! Log-transformed L1 loss on cosine-weighted reflectance.

use crate::brdf::Rgb;

const LOG_FLOOR: f64 = 1e-12;

#[inline]
fn log1p_weighted(v: f64, cos_i: f64) -> f64 {
    (1.0 + v * cos_i).max(LOG_FLOOR).ln()
}

/// `sum_c |log(1 + truth_c cos_i) - log(1 + pred_c cos_i)|`.
pub fn loss_log_l1(pred: &Rgb, truth: &Rgb, cos_i: f64) -> f64 {
    let cos_i = cos_i.max(0.0);
    (0..3)
        .map(|c| (log1p_weighted(truth[c], cos_i) - log1p_weighted(pred[c], cos_i)).abs())
        .sum()
}

/// Loss and its gradient with respect to `pred`.
pub fn loss_log_l1_grad(pred: &Rgb, truth: &Rgb, cos_i: f64) -> (f64, Rgb) {
    let cos_i = cos_i.max(0.0);
    let mut loss = 0.0;
    let mut g = [0.0; 3];
    for c in 0..3 {
        let arg = 1.0 + pred[c] * cos_i;
        let d = log1p_weighted(truth[c], cos_i) - arg.max(LOG_FLOOR).ln();
        loss += d.abs();
        if arg > LOG_FLOOR && d != 0.0 {
            g[c] = -d.signum() * cos_i / arg;
        }
    }
    (loss, g)
}
