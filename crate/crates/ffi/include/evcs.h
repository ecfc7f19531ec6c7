#ifndef EVCS_H
#define EVCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EvcsScheme {
  EVCS_SCHEME_CHARGE_ONLY = 0,
  EVCS_SCHEME_CONVENTIONAL = 1,
  EVCS_SCHEME_PROPOSED = 2,
} EvcsScheme;

// Result of every fallible call.
typedef enum EvcsStatus {
  EVCS_STATUS_OK = 0,
  EVCS_STATUS_NULL_POINTER = 1,
  EVCS_STATUS_INVALID_ARGUMENT = 2,
  EVCS_STATUS_CONFIG = 3,
  EVCS_STATUS_IO = 4,
  EVCS_STATUS_CONTRACT = 5,
  EVCS_STATUS_PANIC = 6,
} EvcsStatus;

// Opaque simulation configuration.
typedef struct EvcsConfig EvcsConfig;

// Opaque result of one simulated day.
typedef struct EvcsDayResult EvcsDayResult;

// Opaque pair of trained load and PV forecasters.
typedef struct EvcsForecasters EvcsForecasters;

// The six power flows of one slot plus its totals, all in kW.
typedef struct EvcsDispatch {
  double grid_load;
  double grid_ev;
  double pv_load;
  double pv_ev;
  double ev_load;
  double ev_ev;
  double load;
  double pv_available;
  double ev_charge_total;
  double ev_discharge_total;
} EvcsDispatch;

// Day-level figures of a simulated day.
typedef struct EvcsDaySummary {
  double total_cost_usd;
  double local_load_cost_usd;
  double grid_kwh;
  double pv_kwh;
  double ev_charge_kwh;
  double ev_discharge_kwh;
  size_t evs_at_target;
  size_t evs_admitted;
  size_t violations;
} EvcsDaySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next `evcs_*` call on the thread.
const char *evcs_last_error_message(void);

// Default configuration (50 EVs, desk GA and forecaster profiles).
//
// # Safety
// `out_cfg` must be a valid pointer to writable storage for a handle.
enum EvcsStatus evcs_config_default(struct EvcsConfig **out_cfg);

// Reads a `section.key = value` configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_cfg` must be writable.
enum EvcsStatus evcs_config_load(const char *path, struct EvcsConfig **out_cfg);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must come from a config constructor and not be used afterwards.
void evcs_config_free(struct EvcsConfig *cfg);

// Time-of-use purchase price at `slot`, USD/kWh.
//
// # Safety
// `cfg` must be a live handle and `out_price` writable.
enum EvcsStatus evcs_tariff_purchase_price(const struct EvcsConfig *cfg,
                                           size_t slot,
                                           double *out_price);

// Selling price (SMP plus weighted REC) at `slot`, USD/kWh.
//
// # Safety
// `cfg` must be a live handle and `out_price` writable.
enum EvcsStatus evcs_tariff_selling_price(const struct EvcsConfig *cfg,
                                          size_t slot,
                                          double *out_price);

// Discharge cap from the current load and PV, kW.
//
// # Safety
// `cfg` must be a live handle and `out_cap` writable.
enum EvcsStatus evcs_cap_conventional(const struct EvcsConfig *cfg,
                                      double load_kw,
                                      double pv_kw,
                                      double *out_cap);

// Discharge cap from the current slot plus `n` forecast slots given as
// parallel `load_kw` and `pv_kw` arrays, kW. `n` must equal the configured
// lookahead; the arrays may be null when it is zero.
//
// # Safety
// `cfg` must be a live handle, the arrays must hold `n` values and
// `out_cap` must be writable.
enum EvcsStatus evcs_cap_proposed(const struct EvcsConfig *cfg,
                                  double load_kw,
                                  double pv_kw,
                                  const double *forecast_load_kw,
                                  const double *forecast_pv_kw,
                                  size_t n,
                                  double *out_cap);

// Allocates one slot's power flows in merit order. All inputs in kW and
// non-negative.
//
// # Safety
// `out_dispatch` must be writable.
enum EvcsStatus evcs_dispatch(double load_kw,
                              double pv_kw,
                              double ev_charge_kw,
                              double ev_discharge_kw,
                              struct EvcsDispatch *out_dispatch);

// Operating cost of one slot's flows at `slot`'s prices, USD.
//
// # Safety
// `cfg` and `dispatch` must be valid; `out_cost` writable.
enum EvcsStatus evcs_slot_cost(const struct EvcsConfig *cfg,
                               const struct EvcsDispatch *dispatch,
                               size_t slot,
                               double *out_cost);

// Trains (or loads, when checkpoints are configured) the forecasters the
// proposed scheme needs. Training may take a minute at the desk profile.
//
// # Safety
// `cfg` must be a live handle; `out_forecasters` writable.
enum EvcsStatus evcs_forecasters_prepare(const struct EvcsConfig *cfg,
                                         struct EvcsForecasters **out_forecasters);

// Loads forecasters from two checkpoint files.
//
// # Safety
// Both paths must be NUL-terminated strings; `out_forecasters` writable.
enum EvcsStatus evcs_forecasters_load(const char *load_checkpoint,
                                      const char *pv_checkpoint,
                                      struct EvcsForecasters **out_forecasters);

// Releases forecasters. Null is ignored.
//
// # Safety
// `f` must come from a forecaster constructor and not be used afterwards.
void evcs_forecasters_free(struct EvcsForecasters *f);

// Simulates one day. `forecasters` may be null except for the proposed scheme.
//
// # Safety
// `cfg` must be a live handle, `forecasters` null or live, and
// `out_result` writable.
enum EvcsStatus evcs_run_day(const struct EvcsConfig *cfg,
                             enum EvcsScheme scheme,
                             uint64_t seed,
                             const struct EvcsForecasters *forecasters,
                             struct EvcsDayResult **out_result);

// Releases a day result. Null is ignored.
//
// # Safety
// `r` must come from `evcs_run_day` and not be used afterwards.
void evcs_day_result_free(struct EvcsDayResult *r);

// Day totals.
//
// # Safety
// `r` must be a live handle and `out_summary` writable.
enum EvcsStatus evcs_day_result_summary(const struct EvcsDayResult *r,
                                        struct EvcsDaySummary *out_summary);

// Flows, discharge cap (kW) and cost (USD) of one slot.
//
// # Safety
// `r` must be a live handle; each out pointer may be null to skip it.
enum EvcsStatus evcs_day_result_slot(const struct EvcsDayResult *r,
                                     size_t slot,
                                     struct EvcsDispatch *out_dispatch,
                                     double *out_cap_kw,
                                     double *out_cost_usd);

// Writes the per-slot, per-EV and summary CSV reports into `dir`.
//
// # Safety
// `r` must be a live handle and `dir` a NUL-terminated string.
enum EvcsStatus evcs_day_result_write_reports(const struct EvcsDayResult *r, const char *dir);

// Library version as a static NUL-terminated string.
const char *evcs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVCS_H */
