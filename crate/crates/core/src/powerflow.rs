//! Per-slot power balance and operating-cost terms.
//!
//! Merit order: EV discharge feeds other EVs first, then the local load;
//! PV feeds the remaining EV charging demand, then the load; the grid covers
//! whatever is left. PV beyond load plus charging demand is curtailed.

use serde::{Deserialize, Serialize};

use crate::tariff::TariffSchedule;

pub const BALANCE_TOL_KW: f64 = 1e-9;

/// The six flows of one slot, all in kW.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotDispatch {
    pub pw_grid_load: f64,
    pub pw_grid_ev: f64,
    pub pw_pv_load: f64,
    pub pw_pv_ev: f64,
    pub pw_ev_load: f64,
    pub pw_ev_ev: f64,
    pub pw_load: f64,
    pub pw_pv_avail: f64,
    pub ev_charge_total: f64,
    pub ev_discharge_total: f64,
}

impl SlotDispatch {
    pub fn pv_used(&self) -> f64 {
        self.pw_pv_load + self.pw_pv_ev
    }

    pub fn pv_curtailed(&self) -> f64 {
        (self.pw_pv_avail - self.pv_used()).max(0.0)
    }

    /// Invariant violations of this dispatch, empty when consistent.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let flows = [
            ("grid_load", self.pw_grid_load),
            ("grid_ev", self.pw_grid_ev),
            ("pv_load", self.pw_pv_load),
            ("pv_ev", self.pw_pv_ev),
            ("ev_load", self.pw_ev_load),
            ("ev_ev", self.pw_ev_ev),
        ];
        for (name, x) in flows {
            if !(x >= -BALANCE_TOL_KW) {
                v.push(format!("negative flow {name} = {x}"));
            }
        }
        let load = self.pw_grid_load + self.pw_pv_load + self.pw_ev_load;
        if (load - self.pw_load).abs() > BALANCE_TOL_KW {
            v.push(format!("load balance: {load} != {}", self.pw_load));
        }
        let ch = self.pw_grid_ev + self.pw_pv_ev + self.pw_ev_ev;
        if (ch - self.ev_charge_total).abs() > BALANCE_TOL_KW {
            v.push(format!("charging balance: {ch} != {}", self.ev_charge_total));
        }
        let dch = self.pw_ev_load + self.pw_ev_ev;
        if (dch - self.ev_discharge_total).abs() > BALANCE_TOL_KW {
            v.push(format!("discharge balance: {dch} != {}", self.ev_discharge_total));
        }
        if self.pv_used() > self.pw_pv_avail + BALANCE_TOL_KW {
            v.push(format!("PV overuse: {} > {}", self.pv_used(), self.pw_pv_avail));
        }
        v
    }
}

/// Allocates sources to the local load and EV charging demand.
///
/// Discharge beyond `load + ev_charge_total` has no consumer; callers keep
/// discharge within that bound (the scheduler treats it as infeasible).
pub fn dispatch(load: f64, pv_avail: f64, ev_charge_total: f64, ev_discharge_total: f64) -> SlotDispatch {
    debug_assert!(load >= 0.0 && pv_avail >= 0.0 && ev_charge_total >= 0.0 && ev_discharge_total >= 0.0);
    let ev_ev = ev_discharge_total.min(ev_charge_total);
    let ev_load = (ev_discharge_total - ev_ev).min(load);
    let pv_ev = pv_avail.min(ev_charge_total - ev_ev);
    let pv_load = (pv_avail - pv_ev).min(load - ev_load);
    SlotDispatch {
        pw_grid_load: load - ev_load - pv_load,
        pw_grid_ev: ev_charge_total - ev_ev - pv_ev,
        pw_pv_load: pv_load,
        pw_pv_ev: pv_ev,
        pw_ev_load: ev_load,
        pw_ev_ev: ev_ev,
        pw_load: load,
        pw_pv_avail: pv_avail,
        ev_charge_total,
        ev_discharge_total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPower {
    pub purchased: f64,
    pub sold: f64,
    pub net: f64,
}

/// Purchased (grid to load and EVs), sold (PV and EV power serving the
/// load) and net grid power.
pub fn grid_power(d: &SlotDispatch) -> GridPower {
    let purchased = d.pw_grid_load + d.pw_grid_ev;
    let sold = d.pw_pv_load + d.pw_ev_load;
    GridPower {
        purchased,
        sold,
        net: purchased - sold,
    }
}

/// Left-hand side of the grid consumption cap: total demand net of PV used
/// and EV discharge.
pub fn grid_draw(d: &SlotDispatch) -> f64 {
    d.pw_load + d.ev_charge_total - (d.pv_used() + d.ev_discharge_total)
}

pub fn check_grid_cap(d: &SlotDispatch, pw_max: f64) -> bool {
    grid_draw(d) <= pw_max + BALANCE_TOL_KW
}

/// Operating cost of one slot in USD: grid-sourced EV charging at the TOU
/// price minus PV and EV-discharge power sold through the local load.
pub fn slot_cost(d: &SlotDispatch, tariff: &TariffSchedule, t: usize, dt_hours: f64) -> f64 {
    let bought = d.ev_charge_total - d.pw_pv_ev - d.pw_ev_ev;
    let sold = d.pw_pv_load + d.pw_ev_load;
    tariff.purchase_price(t) * bought * dt_hours - tariff.selling_price(t) * sold * dt_hours
}

/// Cost of grid power serving the local load. Not part of the operating cost.
pub fn local_load_cost(d: &SlotDispatch, tariff: &TariffSchedule, t: usize, dt_hours: f64) -> f64 {
    tariff.purchase_price(t) * d.pw_grid_load * dt_hours
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariff::Smp;
    use proptest::prelude::*;

    #[test]
    fn discharge_serves_load_when_nothing_charges() {
        let d = dispatch(100.0, 30.0, 0.0, 10.0);
        assert_eq!((d.pw_ev_load, d.pw_pv_load, d.pw_grid_load), (10.0, 30.0, 60.0));
        assert!(d.violations().is_empty());
        let g = grid_power(&d);
        assert_eq!((g.purchased, g.sold, g.net), (60.0, 40.0, 20.0));
    }

    #[test]
    fn pv_surplus_is_curtailed() {
        let d = dispatch(50.0, 80.0, 20.0, 0.0);
        assert_eq!(d.pw_pv_ev, 20.0);
        assert_eq!(d.pw_pv_load, 50.0);
        assert_eq!(d.pw_grid_load + d.pw_grid_ev, 0.0);
        assert_eq!(d.pv_curtailed(), 10.0);
    }

    #[test]
    fn null_dispatch() {
        let d = dispatch(0.0, 0.0, 0.0, 0.0);
        assert_eq!(d, SlotDispatch::default());
        let g = grid_power(&d);
        assert_eq!((g.purchased, g.sold, g.net), (0.0, 0.0, 0.0));
    }

    #[test]
    fn net_exporter() {
        let d = SlotDispatch {
            pw_pv_load: 30.0,
            pw_ev_load: 10.0,
            ..SlotDispatch::default()
        };
        assert_eq!(grid_power(&d).net, -40.0);
    }

    #[test]
    fn grid_cap() {
        let d = SlotDispatch {
            pw_load: 150.0,
            ev_charge_total: 20.0,
            pw_pv_load: 10.0,
            ev_discharge_total: 5.0,
            ..SlotDispatch::default()
        };
        assert_eq!(grid_draw(&d), 155.0);
        assert!(check_grid_cap(&d, 157.0));
        assert!(check_grid_cap(&SlotDispatch::default(), 0.0));
        assert!(!check_grid_cap(&dispatch(200.0, 0.0, 0.0, 0.0), 157.0));
    }

    #[test]
    fn slot_cost_hand_example() {
        let tariff = TariffSchedule::new(TariffSchedule::default_bands(), Smp::Const(0.10), 0.05, 1.2).unwrap();
        let t = crate::slot_of(10, 30);
        assert_eq!(tariff.purchase_price(t), 0.179);
        let d = SlotDispatch {
            ev_charge_total: 19.2,
            pw_pv_ev: 0.0,
            pw_ev_ev: 7.0,
            pw_pv_load: 30.0,
            pw_ev_load: 0.0,
            ..SlotDispatch::default()
        };
        let expected = 0.179 * 12.2 * 0.25 - 0.16 * 30.0 * 0.25;
        assert!((slot_cost(&d, &tariff, t, 0.25) - expected).abs() < 1e-12);
        assert!((expected - -0.654).abs() < 1e-3);
    }

    #[test]
    fn pure_load_has_no_operating_cost() {
        let tariff = TariffSchedule::default();
        let d = dispatch(120.0, 0.0, 0.0, 0.0);
        assert_eq!(slot_cost(&d, &tariff, 50, 0.25), 0.0);
        assert!(local_load_cost(&d, &tariff, 50, 0.25) > 0.0);
    }

    proptest! {
        #[test]
        fn balances_hold(load in 0.0f64..300.0, pv in 0.0f64..120.0, ch in 0.0f64..400.0, dch_frac in 0.0f64..1.0) {
            let dch = dch_frac * (load + ch);
            let d = dispatch(load, pv, ch, dch);
            prop_assert!(d.violations().is_empty(), "{:?}", d.violations());
            prop_assert_eq!(d, dispatch(load, pv, ch, dch));
            // Net grid exchange equals purchased grid power under this merit order.
            prop_assert!((grid_draw(&d) - grid_power(&d).purchased).abs() < 1e-9);
        }

        #[test]
        fn cost_monotone(pv_load in 0.0f64..100.0, ev_load in 0.0f64..20.0, grid_ev in 0.0f64..100.0, extra in 0.0f64..10.0) {
            let tariff = TariffSchedule::default();
            let d = SlotDispatch { pw_pv_load: pv_load, pw_ev_load: ev_load, pw_grid_ev: grid_ev, ev_charge_total: grid_ev, ..SlotDispatch::default() };
            let base = slot_cost(&d, &tariff, 44, 0.25);
            let more_pv = SlotDispatch { pw_pv_load: pv_load + extra, ..d };
            let more_ev = SlotDispatch { pw_ev_load: ev_load + extra, ..d };
            let more_grid = SlotDispatch { pw_grid_ev: grid_ev + extra, ev_charge_total: grid_ev + extra, ..d };
            prop_assert!(slot_cost(&more_pv, &tariff, 44, 0.25) <= base);
            prop_assert!(slot_cost(&more_ev, &tariff, 44, 0.25) <= base);
            prop_assert!(slot_cost(&more_grid, &tariff, 44, 0.25) >= base);
        }
    }
}
