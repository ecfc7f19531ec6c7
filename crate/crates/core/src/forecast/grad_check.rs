use super::model::ForecastModel;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Analytic gradient of the MSE loss for one (window, target) pair.
pub fn analytic_gradient(model: &ForecastModel, window: &[f64], target: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; model.n_params()];
    model.loss_and_grad(window, target, 0.0, None, &mut grad);
    grad
}

/// Largest relative disagreement between backpropagated and finite-difference
/// gradients. Near-zero pairs are compared against a small absolute floor.
pub fn grad_check(model: &ForecastModel, window: &[f64], target: &[f64]) -> f64 {
    let analytic = analytic_gradient(model, window, target);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + FD_STEP;
        let up = probe.loss(window, target);
        probe.params_mut()[k] = orig - FD_STEP;
        let down = probe.loss(window, target);
        probe.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
