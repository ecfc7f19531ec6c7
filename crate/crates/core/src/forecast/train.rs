use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::model::{ForecastModel, ModelShape, Normalizer};
use super::{INPUT_LEN, OUTPUT_LEN};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub dropout: f64,
    /// L2 norm bound applied to each sample's gradient before averaging.
    pub grad_clip: f64,
    pub train_fraction: f64,
    pub shape: ModelShape,
}

impl TrainConfig {
    pub fn full() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 200,
            ..Self::desk()
        }
    }

    pub fn desk() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            dropout: 0.2,
            grad_clip: 1.0,
            train_fraction: 0.8,
            shape: ModelShape::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.eps, self.grad_clip];
        if self.epochs == 0 || self.batch_size == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("epochs, batch size, learning rate, eps and clip must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("moment decays must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train fraction must lie in (0, 1)"));
        }
        self.shape.validate()
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ForecastModel,
    pub rmse_train: f64,
    pub rmse_valid: f64,
    /// Validation RMSE of the initialized, untrained network.
    pub rmse_valid_initial: f64,
}

/// Sliding (12 -> 7) windows over a series, stride 1.
pub fn windows(series: &[f64]) -> Vec<(&[f64], &[f64])> {
    let span = INPUT_LEN + OUTPUT_LEN;
    if series.len() < span {
        return Vec::new();
    }
    (0..=series.len() - span)
        .map(|i| (&series[i..i + INPUT_LEN], &series[i + INPUT_LEN..i + span]))
        .collect()
}

/// RMSE in physical units over every output of every window.
pub fn rmse(model: &ForecastModel, series: &[f64]) -> Result<f64> {
    let ws = windows(series);
    if ws.is_empty() {
        return Err(Error::config("series too short for a single window"));
    }
    let mut sse = 0.0;
    for (x, y) in &ws {
        let pred = model.predict(x)?;
        sse += pred.iter().zip(y.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok((sse / (ws.len() * OUTPUT_LEN) as f64).sqrt())
}

fn split(series: &[f64], cfg: &TrainConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let cut = (series.len() as f64 * cfg.train_fraction).round() as usize;
    let (train, valid) = series.split_at(cut.min(series.len()));
    let n_train = windows(train).len();
    if n_train < cfg.batch_size || windows(valid).is_empty() {
        return Err(Error::config(format!(
            "series of {} samples is too short: need {} training windows and 1 validation window",
            series.len(),
            cfg.batch_size
        )));
    }
    Ok((train.to_vec(), valid.to_vec()))
}

/// Trains a fresh network on a chronological train/validation split.
pub fn train(series: &[f64], cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("training series contains non-finite values"));
    }
    let (train_raw, valid_raw) = split(series, cfg)?;
    let mut model = ForecastModel::init(cfg.shape.clone(), seed)?;
    model.norm = Normalizer::fit(&train_raw);
    let rmse_valid_initial = rmse(&model, &valid_raw)?;

    let norm = model.norm;
    let train_n: Vec<f64> = train_raw.iter().map(|v| norm.normalize(*v)).collect();
    let samples = windows(&train_n);
    let n = model.n_params();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut batch_grad = vec![0.0; n];
    let mut sample_grad = vec![0.0; n];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f0ca);
    let mut step = 0i32;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                sample_grad.iter_mut().for_each(|g| *g = 0.0);
                let (x, y) = samples[i];
                epoch_loss += model.loss_and_grad(x, y, cfg.dropout, Some(&mut rng), &mut sample_grad);
                let norm2 = sample_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                let scale = if norm2 > cfg.grad_clip { cfg.grad_clip / norm2 } else { 1.0 };
                batch_grad.iter_mut().zip(&sample_grad).for_each(|(b, s)| *b += scale * s);
            }
            let inv = 1.0 / batch.len() as f64;
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            let params = model.params_mut();
            for k in 0..n {
                let g = batch_grad[k] * inv;
                m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * g;
                m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * g * g;
                params[k] -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + cfg.eps);
            }
        }
        log::debug!("epoch {epoch}: mean train loss {:.6}", epoch_loss / samples.len() as f64);
    }

    Ok(TrainOutcome {
        rmse_train: rmse(&model, &train_raw)?,
        rmse_valid: rmse(&model, &valid_raw)?,
        rmse_valid_initial,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch_size: 8,
            shape: ModelShape {
                gru_layers: 1,
                hidden: 4,
                fc_widths: vec![4, 4],
                ..ModelShape::default()
            },
            ..TrainConfig::desk()
        }
    }

    #[test]
    fn window_count() {
        let s: Vec<f64> = (0..30).map(f64::from).collect();
        let w = windows(&s);
        assert_eq!(w.len(), 12);
        assert_eq!(w[0].0[11], 11.0);
        assert_eq!(w[0].1[0], 12.0);
        assert!(windows(&s[..18]).is_empty());
    }

    #[test]
    fn short_series_is_config_error() {
        let s = vec![1.0; 40];
        assert!(matches!(train(&s, &small(), 0), Err(Error::Config(_))));
    }

    #[test]
    fn constant_series_is_learned_exactly() {
        let s = vec![42.0; 200];
        let out = train(&s, &small(), 1).unwrap();
        assert!(out.rmse_train.abs() < 1e-12);
        assert!(out.rmse_valid.abs() < 1e-12);
        for v in out.model.predict(&[42.0; 12]).unwrap() {
            assert!((v - 42.0).abs() <= 0.01 * 42.0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let s: Vec<f64> = (0..120).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect();
        let a = train(&s, &small(), 9).unwrap();
        let b = train(&s, &small(), 9).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.rmse_valid, b.rmse_valid);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = small();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.train_fraction = 1.0;
        assert!(c.validate().is_err());
        assert!(TrainConfig::full().validate().is_ok());
    }
}
