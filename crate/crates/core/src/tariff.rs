//! Purchase and selling prices per 15-minute slot.
//!
//! Purchase prices come from time-of-use bands; the selling price for PV and
//! EV-discharge energy is the system marginal price plus a weighted renewable
//! certificate price.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::{parse_hhmm, SLOTS_PER_DAY};

/// Default REC weight for a sub-100 kW PV plant on a general site.
pub const DEFAULT_REC_WEIGHT: f64 = 1.2;
pub const DEFAULT_REC_PRICE: f64 = 0.05;
pub const DEFAULT_SMP: f64 = 0.10;

/// A half-open `[start, end)` slot range with one price. `end <= start` wraps midnight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouBand {
    pub start: usize,
    pub end: usize,
    pub price: f64,
}

impl TouBand {
    pub fn new(start: usize, end: usize, price: f64) -> Self {
        TouBand { start, end, price }
    }

    /// Parses `HH:MM-HH:MM=price`.
    pub fn parse(s: &str) -> Result<Self> {
        let (range, price) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("band `{s}`: expected HH:MM-HH:MM=price")))?;
        let (a, b) = range
            .split_once('-')
            .ok_or_else(|| Error::config(format!("band `{s}`: expected HH:MM-HH:MM")))?;
        let price: f64 = price
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("band `{s}`: bad price")))?;
        Ok(TouBand {
            start: parse_hhmm(a.trim())? % SLOTS_PER_DAY,
            end: parse_hhmm(b.trim())? % SLOTS_PER_DAY,
            price,
        })
    }

    /// Number of slots covered.
    pub fn slots(&self) -> usize {
        if self.end > self.start {
            self.end - self.start
        } else {
            SLOTS_PER_DAY - self.start + self.end
        }
    }

    pub fn contains(&self, slot: usize) -> bool {
        let slot = slot % SLOTS_PER_DAY;
        if self.end > self.start {
            (self.start..self.end).contains(&slot)
        } else {
            slot >= self.start || slot < self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Smp {
    Const(f64),
    /// One sample per slot; queried modulo its length.
    PerSlot(Vec<f64>),
}

impl Smp {
    pub fn at(&self, slot: usize) -> f64 {
        match self {
            Smp::Const(v) => *v,
            Smp::PerSlot(v) => v[slot % v.len()],
        }
    }

    /// Reads a `slot,smp_usd_per_kwh` CSV. Slots must be `0..n` with no gaps.
    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            slot: usize,
            smp_usd_per_kwh: f64,
        }
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut values: Vec<Option<f64>> = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row.map_err(|e| Error::csv(path, e))?;
            if row.slot >= values.len() {
                values.resize(row.slot + 1, None);
            }
            values[row.slot] = Some(row.smp_usd_per_kwh);
        }
        if values.len() < SLOTS_PER_DAY {
            return Err(Error::config(format!(
                "{}: SMP series covers {} slots, need at least {SLOTS_PER_DAY}",
                path.display(),
                values.len()
            )));
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::config(format!("{}: missing SMP for slot {i}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Smp::PerSlot(values))
    }
}

/// Validated price schedule. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    bands: Vec<TouBand>,
    slot_price: Vec<f64>,
    smp: Smp,
    rec_price: f64,
    rec_weight: f64,
}

impl TariffSchedule {
    pub fn new(bands: Vec<TouBand>, smp: Smp, rec_price: f64, rec_weight: f64) -> Result<Self> {
        let mut owner: Vec<Option<usize>> = vec![None; SLOTS_PER_DAY];
        for (i, band) in bands.iter().enumerate() {
            if band.start >= SLOTS_PER_DAY || band.end >= SLOTS_PER_DAY {
                return Err(Error::config(format!("band {i} out of range: {band:?}")));
            }
            if !(band.price >= 0.0) {
                return Err(Error::config(format!("band {i} has negative price")));
            }
            for slot in (0..SLOTS_PER_DAY).filter(|&s| band.contains(s)) {
                if let Some(j) = owner[slot] {
                    return Err(Error::config(format!(
                        "TOU bands {j} and {i} overlap at slot {slot}"
                    )));
                }
                owner[slot] = Some(i);
            }
        }
        if let Some(gap) = owner.iter().position(Option::is_none) {
            return Err(Error::config(format!("TOU bands leave slot {gap} uncovered")));
        }
        match &smp {
            Smp::Const(v) if !(*v >= 0.0) => return Err(Error::config("SMP must be >= 0")),
            Smp::PerSlot(v) if v.is_empty() => return Err(Error::config("empty SMP series")),
            Smp::PerSlot(v) if v.iter().any(|x| !(*x >= 0.0)) => {
                return Err(Error::config("SMP samples must be >= 0"))
            }
            _ => {}
        }
        if !(rec_price >= 0.0) {
            return Err(Error::config("rec_price must be >= 0"));
        }
        if !(rec_weight > 0.0) {
            return Err(Error::config("rec_weight must be > 0"));
        }
        let slot_price = owner.iter().map(|o| bands[o.unwrap()].price).collect();
        Ok(TariffSchedule {
            bands,
            slot_price,
            smp,
            rec_price,
            rec_weight,
        })
    }

    /// The three-level demand-response tariff: 0.055 off-peak (23:00-09:00),
    /// 0.108 mid-peak (09-10, 12-13, 17-23) and 0.179 on-peak (10-12, 13-17).
    pub fn default_bands() -> Vec<TouBand> {
        const OFF: f64 = 0.055;
        const MID: f64 = 0.108;
        const ON: f64 = 0.179;
        let h = |hour: usize| hour * 4;
        vec![
            TouBand::new(h(23), h(9), OFF),
            TouBand::new(h(9), h(10), MID),
            TouBand::new(h(10), h(12), ON),
            TouBand::new(h(12), h(13), MID),
            TouBand::new(h(13), h(17), ON),
            TouBand::new(h(17), h(23), MID),
        ]
    }

    pub fn bands(&self) -> &[TouBand] {
        &self.bands
    }

    pub fn smp(&self) -> &Smp {
        &self.smp
    }

    pub fn rec_price(&self) -> f64 {
        self.rec_price
    }

    pub fn rec_weight(&self) -> f64 {
        self.rec_weight
    }

    /// TOU purchase price in USD/kWh. Slots past one day wrap.
    pub fn purchase_price(&self, slot: usize) -> f64 {
        self.slot_price[slot % SLOTS_PER_DAY]
    }

    /// SMP(t) + w * REC in USD/kWh.
    pub fn selling_price(&self, slot: usize) -> f64 {
        self.smp.at(slot) + self.rec_weight * self.rec_price
    }

    pub fn max_purchase_price(&self) -> f64 {
        self.slot_price.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_selling_price(&self) -> f64 {
        let smp_max = match &self.smp {
            Smp::Const(v) => *v,
            Smp::PerSlot(v) => v.iter().copied().fold(0.0, f64::max),
        };
        smp_max + self.rec_weight * self.rec_price
    }
}

impl Default for TariffSchedule {
    fn default() -> Self {
        TariffSchedule::new(
            Self::default_bands(),
            Smp::Const(DEFAULT_SMP),
            DEFAULT_REC_PRICE,
            DEFAULT_REC_WEIGHT,
        )
        .expect("default tariff is valid")
    }
}
