use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evcs::config::SimConfig;
use evcs::forecast::{self, TrainConfig};
use evcs::harness::{self, emit_reports, prepare_forecasters, run_day, DayResult};
use evcs::scheduler::Scheme;

#[derive(Parser)]
#[command(name = "evcs", version, about = "EV charging station scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one day and write dispatch, fleet and summary CSVs.
    Simulate {
        /// Flat key = value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// charge_only, conventional, proposed or all.
        #[arg(long, default_value = "all")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a forecaster on a `slot,value_kw` series and save a checkpoint.
    TrainForecast {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reads `forecast.*` keys from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-check and print the summary of a simulate output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> evcs::Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn simulate(config: &Option<PathBuf>, scheme: &str, seed: u64, out: &PathBuf) -> evcs::Result<bool> {
    let cfg = load_config(config)?;
    let schemes: Vec<Scheme> = if scheme == "all" {
        Scheme::ALL.to_vec()
    } else {
        vec![scheme.parse()?]
    };
    let forecasters = if schemes.contains(&Scheme::Proposed) {
        Some(prepare_forecasters(&cfg.forecast, &cfg.scenario)?)
    } else {
        None
    };
    let mut results: Vec<DayResult> = Vec::new();
    for s in schemes {
        let r = run_day(&cfg, s, seed, forecasters.as_ref())?;
        for v in &r.violations {
            log::error!("{s} slot {}: {}{}", v.t, v.ev.map(|i| format!("EV {i}: ")).unwrap_or_default(), v.what);
        }
        println!(
            "{:<13} cost {:>9.3} USD  grid {:>8.1} kWh  pv {:>7.1} kWh  ch {:>7.1} kWh  dch {:>6.1} kWh  target {:>5.1}%  violations {}",
            s.as_str(),
            r.total_cost(),
            r.grid_kwh(),
            r.pv_kwh(),
            r.ev_charge_kwh(),
            r.ev_discharge_kwh(),
            r.pct_at_target(),
            r.violations.len()
        );
        results.push(r);
    }
    emit_reports(&results, out)?;
    Ok(results.iter().all(|r| r.violations.is_empty()))
}

fn train_forecast(series: &PathBuf, out: &PathBuf, config: &Option<PathBuf>, seed: u64) -> evcs::Result<()> {
    let train_cfg: TrainConfig = load_config(config)?.forecast.train;
    let data = forecast::load_series_csv(series)?;
    let outcome = forecast::train(&data, &train_cfg, seed)?;
    forecast::save_checkpoint(&outcome.model, out)?;
    println!(
        "rmse train {:.4} kW, valid {:.4} kW (untrained valid {:.4} kW)",
        outcome.rmse_train, outcome.rmse_valid, outcome.rmse_valid_initial
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, scheme, seed, out } => simulate(config, scheme, *seed, out),
        Command::TrainForecast { series, out, config, seed } => train_forecast(series, out, config, *seed).map(|_| true),
        Command::Report { input } => harness::report(input).map(|rows| {
            println!("scheme,seed,total_cost_usd,grid_kwh,pv_kwh,ev_charge_kwh,ev_discharge_kwh,pct_evs_at_target,violations");
            for r in &rows {
                println!(
                    "{},{},{:.6},{:.3},{:.3},{:.3},{:.3},{:.2},{}",
                    r.scheme, r.seed, r.total_cost_usd, r.grid_kwh, r.pv_kwh, r.ev_charge_kwh, r.ev_discharge_kwh,
                    r.pct_evs_at_target, r.violations
                );
            }
            rows.iter().all(|r| r.violations == 0)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
