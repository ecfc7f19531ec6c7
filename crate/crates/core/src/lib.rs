//! Simulation and scheduling engine for a PV-equipped multi-EV charging
//! station inside a grid-connected microgrid.
//!
//! The day is split into 96 slots of 15 minutes. Each slot the scheduler
//! caps fleet discharge power from the load-minus-PV condition (optionally
//! looking ahead with GRU forecasts), classifies parked EVs into charge and
//! discharge candidates, and runs a genetic algorithm over per-EV
//! charge/discharge/idle assignments. [`harness::run_day`] wires it together.

pub mod config;
pub mod error;
pub mod fleet;
pub mod forecast;
pub mod harness;
pub mod powerflow;
pub mod scheduler;
pub mod tariff;

pub use error::{Error, Result};

pub const SLOTS_PER_DAY: usize = 96;
pub const SLOT_HOURS: f64 = 0.25;

/// Slot index of a wall-clock time. Minutes must be a multiple of 15.
pub const fn slot_of(hour: usize, minute: usize) -> usize {
    hour * 4 + minute / 15
}

/// Parses `HH:MM` into a slot index; `24:00` maps to 96.
pub fn parse_hhmm(s: &str) -> Result<usize> {
    let bad = || Error::Config(format!("bad time `{s}`, expected HH:MM on a 15-minute boundary"));
    let (h, m) = s.split_once(':').ok_or_else(bad)?;
    let h: usize = h.parse().map_err(|_| bad())?;
    let m: usize = m.parse().map_err(|_| bad())?;
    if h > 24 || m >= 60 || m % 15 != 0 || (h == 24 && m != 0) {
        return Err(bad());
    }
    Ok(slot_of(h, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_parsing() {
        assert_eq!(parse_hhmm("00:00").unwrap(), 0);
        assert_eq!(parse_hhmm("09:00").unwrap(), 36);
        assert_eq!(parse_hhmm("23:45").unwrap(), 95);
        assert_eq!(parse_hhmm("24:00").unwrap(), 96);
        assert!(parse_hhmm("24:15").is_err());
        assert!(parse_hhmm("9").is_err());
        assert!(parse_hhmm("10:10").is_err());
    }
}
