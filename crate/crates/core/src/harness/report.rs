use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::Scheme;

use super::DayResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRow {
    pub seed: u64,
    pub slot: usize,
    pub load_kw: f64,
    pub pv_kw: f64,
    pub grid_load_kw: f64,
    pub grid_ev_kw: f64,
    pub pv_load_kw: f64,
    pub pv_ev_kw: f64,
    pub ev_load_kw: f64,
    pub ev_ev_kw: f64,
    pub ev_charge_kw: f64,
    pub ev_discharge_kw: f64,
    pub cap_kw: f64,
    pub cost_usd: f64,
    pub local_load_cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FleetRow {
    seed: u64,
    slot: usize,
    ev_id: usize,
    soc_before: f64,
    soc_after: f64,
    op: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub seed: u64,
    pub total_cost_usd: f64,
    pub grid_kwh: f64,
    pub pv_kwh: f64,
    pub ev_charge_kwh: f64,
    pub ev_discharge_kwh: f64,
    pub pct_evs_at_target: f64,
    /// Grid purchases for the local load; reported, never added to the cost.
    pub local_load_cost_usd: f64,
    pub violations: usize,
}

impl SummaryRow {
    pub fn from_result(r: &DayResult) -> Self {
        SummaryRow {
            scheme: r.scheme.to_string(),
            seed: r.seed,
            total_cost_usd: r.total_cost(),
            grid_kwh: r.grid_kwh(),
            pv_kwh: r.pv_kwh(),
            ev_charge_kwh: r.ev_charge_kwh(),
            ev_discharge_kwh: r.ev_discharge_kwh(),
            pct_evs_at_target: r.pct_at_target(),
            local_load_cost_usd: r.local_load_cost(),
            violations: r.violations.len(),
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `dispatch_<scheme>.csv`, `fleet_<scheme>.csv` and `summary.csv`.
/// Several days of one scheme share a file, keyed by the seed column.
pub fn emit_reports(results: &[DayResult], dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Usage("no results to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_scheme: BTreeMap<&str, Vec<&DayResult>> = BTreeMap::new();
    for r in results {
        by_scheme.entry(r.scheme.as_str()).or_default().push(r);
    }
    for (scheme, days) in &by_scheme {
        let dispatch = days.iter().flat_map(|r| {
            r.slots.iter().map(move |s| {
                let d = &s.dispatch;
                DispatchRow {
                    seed: r.seed,
                    slot: s.t,
                    load_kw: d.pw_load,
                    pv_kw: d.pw_pv_avail,
                    grid_load_kw: d.pw_grid_load,
                    grid_ev_kw: d.pw_grid_ev,
                    pv_load_kw: d.pw_pv_load,
                    pv_ev_kw: d.pw_pv_ev,
                    ev_load_kw: d.pw_ev_load,
                    ev_ev_kw: d.pw_ev_ev,
                    ev_charge_kw: d.ev_charge_total,
                    ev_discharge_kw: d.ev_discharge_total,
                    cap_kw: s.cap_kw,
                    cost_usd: s.cost,
                    local_load_cost_usd: s.local_load_cost,
                }
            })
        });
        write_rows(&dir.join(format!("dispatch_{scheme}.csv")), dispatch)?;
        let fleet = days.iter().flat_map(|r| {
            r.ev_log.iter().map(move |e| FleetRow {
                seed: r.seed,
                slot: e.t,
                ev_id: e.id,
                soc_before: e.soc_before,
                soc_after: e.soc_after,
                op: e.op.as_str().to_string(),
            })
        });
        write_rows(&dir.join(format!("fleet_{scheme}.csv")), fleet)?;
    }
    write_rows(&dir.join("summary.csv"), results.iter().map(SummaryRow::from_result))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| Error::csv(path, e))).collect()
}

pub fn read_dispatch_csv(path: &Path) -> Result<Vec<DispatchRow>> {
    read_rows(path)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path)
}

/// Reads a report directory and re-sums every day's cost from its dispatch
/// file, failing if it disagrees with the summary by more than 1e-6 USD.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let summary = read_summary_csv(&dir.join("summary.csv"))?;
    let mut cache: BTreeMap<String, Vec<DispatchRow>> = BTreeMap::new();
    for row in &summary {
        let scheme: Scheme = row.scheme.parse()?;
        if !cache.contains_key(scheme.as_str()) {
            let rows = read_dispatch_csv(&dir.join(format!("dispatch_{scheme}.csv")))?;
            cache.insert(scheme.as_str().to_string(), rows);
        }
        let rows: Vec<&DispatchRow> = cache[scheme.as_str()].iter().filter(|r| r.seed == row.seed).collect();
        let resum: f64 = rows.iter().map(|r| r.cost_usd).sum();
        if (resum - row.total_cost_usd).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "{scheme} seed {}: dispatch costs sum to {resum}, summary says {}",
                row.seed, row.total_cost_usd
            )));
        }
    }
    Ok(summary)
}
