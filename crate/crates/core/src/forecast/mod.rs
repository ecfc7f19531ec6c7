//! Recurrent load/PV forecaster trained from scratch.

mod checkpoint;
mod grad_check;
mod model;
mod train;

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub use checkpoint::{from_str as checkpoint_from_str, load as load_checkpoint, save as save_checkpoint, to_string as checkpoint_to_string};
pub use grad_check::{analytic_gradient, grad_check, FD_STEP};
pub use model::{Activation, ForecastModel, ModelShape, Normalizer, Tensor};
pub use train::{rmse, train, windows, TrainConfig, TrainOutcome};

/// Past samples fed to the network.
pub const INPUT_LEN: usize = 12;
/// Future samples produced per forward pass.
pub const OUTPUT_LEN: usize = 7;

#[derive(Debug, Deserialize)]
struct SeriesRow {
    slot: usize,
    value_kw: f64,
}

/// Reads a `slot,value_kw` series. Slots must be consecutive from 0.
pub fn load_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.slot != i {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: format!("expected slot {i}, got {}", row.slot),
            });
        }
        if !row.value_kw.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: "non-finite value".into(),
            });
        }
        out.push(row.value_kw);
    }
    Ok(out)
}

/// Trains the load and PV forecasters on separate threads.
pub fn train_pair(load: &[f64], pv: &[f64], cfg: &TrainConfig, seed: u64) -> Result<(TrainOutcome, TrainOutcome)> {
    std::thread::scope(|s| {
        let l = s.spawn(|| train(load, cfg, seed));
        let p = s.spawn(|| train(pv, cfg, seed.wrapping_add(1)));
        let l = l.join().expect("load training thread panicked");
        let p = p.join().expect("pv training thread panicked");
        Ok((l?, p?))
    })
}
