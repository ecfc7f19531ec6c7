//! End-to-end day simulation, data ingestion and report files.

mod profiles;
mod report;
mod sim;

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::forecast::{self, ForecastModel, TrainConfig};
use crate::{SLOTS_PER_DAY, SLOT_HOURS};

pub use profiles::{
    base_load_kw, base_pv_kw, load_weather_csv, pv_from_weather, synth_day, synth_history, synth_profiles,
    PV_WINDOW_HOURS, SYNTH_PV_CAPACITY_KW,
};
pub use report::{emit_reports, read_dispatch_csv, read_summary_csv, report, DispatchRow, SummaryRow};
pub use sim::{run_day, run_day_with, DayInputs, DayResult, EvSlotRecord, SlotRecord, Violation};

#[derive(Debug, Clone, PartialEq)]
pub enum LoadSource {
    Synthetic,
    /// `slot,value_kw`.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PvSource {
    Synthetic,
    /// `slot,value_kw`.
    Csv(PathBuf),
    /// `slot,irradiance_wm2,temp_c`.
    Weather(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub slots_per_day: usize,
    pub dt_hours: f64,
    pub pv_capacity_kw: f64,
    /// Fractional PV derate per degree C above 25 C, weather mode only.
    pub temp_coeff: f64,
    pub load: LoadSource,
    pub pv: PvSource,
    /// Fixed fleet (`id,arrival_slot,departure_slot,init_soc`) instead of sampling.
    pub fleet_csv: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            slots_per_day: SLOTS_PER_DAY,
            dt_hours: SLOT_HOURS,
            pv_capacity_kw: SYNTH_PV_CAPACITY_KW,
            temp_coeff: 0.004,
            load: LoadSource::Synthetic,
            pv: PvSource::Synthetic,
            fleet_csv: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots_per_day != SLOTS_PER_DAY || (self.slots_per_day as f64 * self.dt_hours - 24.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "the day must be {SLOTS_PER_DAY} slots of {SLOT_HOURS} h"
            )));
        }
        if !(self.pv_capacity_kw >= 0.0) || !self.temp_coeff.is_finite() {
            return Err(Error::config("scenario.pv_capacity_kw must be >= 0"));
        }
        Ok(())
    }

    /// The day's load and PV series in kW.
    pub fn profiles(&self, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (synth_load, synth_pv) = synth_day(seed, self.pv_capacity_kw);
        let load = match &self.load {
            LoadSource::Synthetic => synth_load,
            LoadSource::Csv(p) => forecast::load_series_csv(p)?,
        };
        let pv = match &self.pv {
            PvSource::Synthetic => synth_pv,
            PvSource::Csv(p) => forecast::load_series_csv(p)?,
            PvSource::Weather(p) => load_weather_csv(p, self.pv_capacity_kw, self.temp_coeff)?,
        };
        for (name, s) in [("load", &load), ("pv", &pv)] {
            if s.len() != SLOTS_PER_DAY {
                return Err(Error::config(format!("{name} series has {} slots, expected {SLOTS_PER_DAY}", s.len())));
            }
            if s.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::config(format!("{name} series must be non-negative")));
            }
        }
        if pv.iter().any(|v| *v > self.pv_capacity_kw + 1e-9) {
            return Err(Error::config("pv series exceeds scenario.pv_capacity_kw"));
        }
        Ok((load, pv))
    }
}

/// Where the proposed scheme's forecasters come from.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSettings {
    pub train: TrainConfig,
    pub load_checkpoint: Option<PathBuf>,
    pub pv_checkpoint: Option<PathBuf>,
    /// Training history when no checkpoint is given: `slot,value_kw` files,
    /// or synthetic days otherwise.
    pub load_history: Option<PathBuf>,
    pub pv_history: Option<PathBuf>,
    pub history_days: usize,
    pub train_seed: u64,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        ForecastSettings {
            train: TrainConfig::desk(),
            load_checkpoint: None,
            pv_checkpoint: None,
            load_history: None,
            pv_history: None,
            history_days: 14,
            train_seed: 2024,
        }
    }
}

/// Trained load and PV forecasters.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecasters {
    pub load: ForecastModel,
    pub pv: ForecastModel,
}

/// Loads both checkpoints when configured, otherwise trains both models
/// (concurrently) on the configured or synthetic history.
pub fn prepare_forecasters(settings: &ForecastSettings, scenario: &ScenarioConfig) -> Result<Forecasters> {
    if let (Some(l), Some(p)) = (&settings.load_checkpoint, &settings.pv_checkpoint) {
        return Ok(Forecasters {
            load: forecast::load_checkpoint(l)?,
            pv: forecast::load_checkpoint(p)?,
        });
    }
    let (synth_load, synth_pv) = synth_history(settings.train_seed, settings.history_days, scenario.pv_capacity_kw);
    let load = match &settings.load_history {
        Some(p) => forecast::load_series_csv(p)?,
        None => synth_load,
    };
    let pv = match &settings.pv_history {
        Some(p) => forecast::load_series_csv(p)?,
        None => synth_pv,
    };
    let (l, p) = forecast::train_pair(&load, &pv, &settings.train, settings.train_seed)?;
    log::info!(
        "forecasters trained: load rmse {:.3}/{:.3} kW, pv rmse {:.3}/{:.3} kW (train/valid)",
        l.rmse_train,
        l.rmse_valid,
        p.rmse_train,
        p.rmse_valid
    );
    Ok(Forecasters { load: l.model, pv: p.model })
}
