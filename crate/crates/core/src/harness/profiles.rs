use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::{SLOTS_PER_DAY, SLOT_HOURS};

/// Nameplate PV capacity of the synthetic station, kW.
pub const SYNTH_PV_CAPACITY_KW: f64 = 90.0;

/// PV is produced only inside this window, in hours.
pub const PV_WINDOW_HOURS: (f64, f64) = (6.0, 20.0);

fn hour_of(t: usize) -> f64 {
    (t as f64 + 0.5) * SLOT_HOURS
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((h - center) / width).powi(2)).exp()
}

/// Noise-free load shape: a night base, an early morning peak, a low midday
/// plateau and a larger late-evening peak.
pub fn base_load_kw(h: f64) -> f64 {
    let night = 40.0;
    let morning = 60.0 * bump(h, 6.5, 1.0);
    let evening = 70.0 * bump(h, 21.5, 1.0);
    let midday_dip = 30.0 * bump(h, 13.0, 2.6);
    (night + morning + evening - midday_dip).max(5.0)
}

/// Noise-free PV bell curve centred on 13:00, zero outside the production window.
pub fn base_pv_kw(h: f64, capacity_kw: f64) -> f64 {
    if h < PV_WINDOW_HOURS.0 || h > PV_WINDOW_HOURS.1 {
        return 0.0;
    }
    capacity_kw * 0.98 * bump(h, 13.0, 2.4)
}

/// Smooth multiplicative noise: AR(1) around 1.
fn ar_noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64, rho: f64) -> Vec<f64> {
    let innov = Normal::new(0.0, sigma * (1.0 - rho * rho).sqrt()).expect("sigma >= 0");
    let mut x = Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng);
    (0..n)
        .map(|_| {
            x = rho * x + innov.sample(rng);
            (1.0 + x).max(0.0)
        })
        .collect()
}

/// One synthetic day of (load, PV) in kW, 96 slots each, with seeded
/// day-to-day variation in level and small slot-level noise.
pub fn synth_day(seed: u64, pv_capacity_kw: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10ad_5eed);
    let level = Normal::new(1.0f64, 0.03).unwrap().sample(&mut rng).clamp(0.9, 1.1);
    let clear = Normal::new(0.97f64, 0.03).unwrap().sample(&mut rng).clamp(0.85, 1.0);
    let load_noise = ar_noise(&mut rng, SLOTS_PER_DAY, 0.03, 0.8);
    let pv_noise = ar_noise(&mut rng, SLOTS_PER_DAY, 0.04, 0.85);
    let load = (0..SLOTS_PER_DAY)
        .map(|t| base_load_kw(hour_of(t)) * level * load_noise[t])
        .collect();
    let pv = (0..SLOTS_PER_DAY)
        .map(|t| (base_pv_kw(hour_of(t), pv_capacity_kw) * clear * pv_noise[t]).clamp(0.0, pv_capacity_kw))
        .collect();
    (load, pv)
}

/// Synthetic (load, PV) day at the default 90 kW PV capacity.
pub fn synth_profiles(seed: u64) -> (Vec<f64>, Vec<f64>) {
    synth_day(seed, SYNTH_PV_CAPACITY_KW)
}

/// Consecutive synthetic days, concatenated, for forecaster training.
pub fn synth_history(seed: u64, days: usize, pv_capacity_kw: f64) -> (Vec<f64>, Vec<f64>) {
    let mut load = Vec::with_capacity(days * SLOTS_PER_DAY);
    let mut pv = Vec::with_capacity(days * SLOTS_PER_DAY);
    for d in 0..days as u64 {
        let (l, p) = synth_day(seed.wrapping_mul(1_000_003).wrapping_add(d), pv_capacity_kw);
        load.extend(l);
        pv.extend(p);
    }
    (load, pv)
}

/// Linear temperature-derated PV from plane irradiance, clipped to capacity.
pub fn pv_from_weather(irradiance_wm2: f64, temp_c: f64, capacity_kw: f64, temp_coeff: f64) -> f64 {
    (capacity_kw * irradiance_wm2 / 1000.0 * (1.0 - temp_coeff * (temp_c - 25.0))).clamp(0.0, capacity_kw)
}

/// Reads a `slot,irradiance_wm2,temp_c` day and maps it to PV power.
pub fn load_weather_csv(path: &Path, capacity_kw: f64, temp_coeff: f64) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        slot: usize,
        irradiance_wm2: f64,
        temp_c: f64,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row.map_err(|e| Error::csv(path, e))?;
        if r.slot != i || !r.irradiance_wm2.is_finite() || !r.temp_c.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: format!("expected finite values for slot {i}"),
            });
        }
        out.push(pv_from_weather(r.irradiance_wm2, r.temp_c, capacity_kw, temp_coeff));
    }
    Ok(out)
}
