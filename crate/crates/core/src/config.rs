//! Flat `section.key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors. Relative paths resolve against the config file's directory.
//! Profile keys (`forecast.profile`, `scheduler.ga_profile`) are applied
//! before individual overrides regardless of their position in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fleet::FleetConfig;
use crate::forecast::{Activation, TrainConfig};
use crate::harness::{ForecastSettings, LoadSource, PvSource, ScenarioConfig};
use crate::scheduler::{GaConfig, SchedulerConfig};
use crate::tariff::{Smp, TariffSchedule, TouBand, DEFAULT_REC_PRICE, DEFAULT_REC_WEIGHT, DEFAULT_SMP};

/// Everything a simulation run needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub tariff: TariffSchedule,
    pub fleet: FleetConfig,
    pub forecast: ForecastSettings,
    pub scheduler: SchedulerConfig,
    pub scenario: ScenarioConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        self.scheduler.validate()?;
        self.forecast.train.validate()?;
        self.scenario.validate()?;
        if (self.fleet.dt_hours - self.scenario.dt_hours).abs() > 1e-12 {
            return Err(Error::config("fleet and scenario slot lengths differ"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let mut p = Parser { kv, base: base_dir };
        let cfg = p.build()?;
        if let Some((key, (line, _))) = p.kv.iter().next() {
            return Err(Error::config(format!("line {line}: unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Parser<'a> {
    kv: BTreeMap<String, (usize, String)>,
    base: &'a Path,
}

impl Parser<'_> {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.kv.remove(key)
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some((line, v)) = self.take(key) {
            *slot = v
                .parse()
                .map_err(|_| Error::config(format!("line {line}: bad value `{v}` for `{key}`")))?;
        }
        Ok(())
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(|(_, v)| self.base.join(v))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::config(format!("line {line}: bad list item `{s}` in `{key}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn build(&mut self) -> Result<SimConfig> {
        Ok(SimConfig {
            tariff: self.tariff()?,
            fleet: self.fleet()?,
            forecast: self.forecast()?,
            scheduler: self.scheduler()?,
            scenario: self.scenario()?,
        })
    }

    fn tariff(&mut self) -> Result<TariffSchedule> {
        let bands = match self.take("tariff.bands") {
            Some((_, v)) => v.split(',').map(|b| TouBand::parse(b.trim())).collect::<Result<Vec<_>>>()?,
            None => TariffSchedule::default_bands(),
        };
        let mut smp = DEFAULT_SMP;
        self.set("tariff.smp", &mut smp)?;
        let smp = match self.path("tariff.smp_csv") {
            Some(p) => Smp::from_csv(&p)?,
            None => Smp::Const(smp),
        };
        let mut rec_price = DEFAULT_REC_PRICE;
        let mut rec_weight = DEFAULT_REC_WEIGHT;
        self.set("tariff.rec_price", &mut rec_price)?;
        self.set("tariff.rec_weight", &mut rec_weight)?;
        TariffSchedule::new(bands, smp, rec_price, rec_weight)
    }

    fn fleet(&mut self) -> Result<FleetConfig> {
        let mut f = FleetConfig::default();
        self.set("fleet.n_evs", &mut f.n_evs)?;
        self.set("fleet.capacity_kwh", &mut f.capacity_kwh)?;
        self.set("fleet.init_soc_mean", &mut f.init_soc_mean)?;
        self.set("fleet.init_soc_std", &mut f.init_soc_std)?;
        self.set("fleet.target_soc", &mut f.target_soc)?;
        self.set("fleet.soc_min", &mut f.soc_min)?;
        self.set("fleet.eta_ch", &mut f.eta_ch)?;
        self.set("fleet.eta_dch", &mut f.eta_dch)?;
        self.set("fleet.margin_slots", &mut f.margin_slots)?;
        self.set("fleet.n_max_switches", &mut f.n_max_switches)?;
        self.set("fleet.v2g_min_park_slots", &mut f.v2g_min_park_slots)?;
        self.set("fleet.urgency_slack_slots", &mut f.urgency_slack_slots)?;
        self.set("fleet.charge_hysteresis_slots", &mut f.charge_hysteresis_slots)?;
        self.set("fleet.final_start_lead_slots", &mut f.final_start_lead_slots)?;
        self.set("fleet.arrival_mean_slot", &mut f.arrival_mean_slot)?;
        self.set("fleet.arrival_std_slots", &mut f.arrival_std_slots)?;
        self.set("fleet.departure_mean_slot", &mut f.departure_mean_slot)?;
        self.set("fleet.departure_std_slots", &mut f.departure_std_slots)?;
        Ok(f)
    }

    fn forecast(&mut self) -> Result<ForecastSettings> {
        let mut s = ForecastSettings::default();
        if let Some((line, v)) = self.take("forecast.profile") {
            s.train = match v.as_str() {
                "desk" => TrainConfig::desk(),
                "full" => TrainConfig::full(),
                _ => return Err(Error::config(format!("line {line}: forecast.profile must be desk or full"))),
            };
        }
        let t = &mut s.train;
        self.set("forecast.epochs", &mut t.epochs)?;
        self.set("forecast.batch_size", &mut t.batch_size)?;
        self.set("forecast.learning_rate", &mut t.learning_rate)?;
        self.set("forecast.beta1", &mut t.beta1)?;
        self.set("forecast.beta2", &mut t.beta2)?;
        self.set("forecast.eps", &mut t.eps)?;
        self.set("forecast.dropout", &mut t.dropout)?;
        self.set("forecast.grad_clip", &mut t.grad_clip)?;
        self.set("forecast.train_fraction", &mut t.train_fraction)?;
        self.set("forecast.gru_layers", &mut t.shape.gru_layers)?;
        self.set("forecast.hidden", &mut t.shape.hidden)?;
        if let Some(w) = self.list("forecast.fc_widths")? {
            t.shape.fc_widths = w;
        }
        if let Some((_, v)) = self.take("forecast.activation") {
            t.shape.activation = Activation::parse(&v)?;
        }
        s.load_checkpoint = self.path("forecast.load_checkpoint");
        s.pv_checkpoint = self.path("forecast.pv_checkpoint");
        s.load_history = self.path("forecast.load_history");
        s.pv_history = self.path("forecast.pv_history");
        self.set("forecast.history_days", &mut s.history_days)?;
        self.set("forecast.train_seed", &mut s.train_seed)?;
        if s.load_checkpoint.is_some() != s.pv_checkpoint.is_some() {
            return Err(Error::config("set both forecast.load_checkpoint and forecast.pv_checkpoint, or neither"));
        }
        Ok(s)
    }

    fn scheduler(&mut self) -> Result<SchedulerConfig> {
        let mut s = SchedulerConfig::default();
        if let Some((line, v)) = self.take("scheduler.ga_profile") {
            s.ga = match v.as_str() {
                "desk" => GaConfig::desk(),
                "full" => GaConfig::full(),
                _ => return Err(Error::config(format!("line {line}: scheduler.ga_profile must be desk or full"))),
            };
        }
        self.set("scheduler.pw_flag", &mut s.pw_flag)?;
        self.set("scheduler.dch_max_hi", &mut s.dch_max_hi)?;
        self.set("scheduler.dch_max_lo", &mut s.dch_max_lo)?;
        self.set("scheduler.pw_max", &mut s.pw_max)?;
        self.set("scheduler.lookahead_k", &mut s.lookahead_k)?;
        self.set("scheduler.scheme", &mut s.scheme)?;
        self.set("scheduler.ga_population", &mut s.ga.population)?;
        self.set("scheduler.ga_generations", &mut s.ga.generations)?;
        self.set("scheduler.ga_crossover", &mut s.ga.crossover_prob)?;
        self.set("scheduler.ga_mutation", &mut s.ga.mutation_prob)?;
        self.set("scheduler.ga_tournament", &mut s.ga.tournament_size)?;
        self.set("scheduler.ga_elitism", &mut s.ga.elitism)?;
        if let Some(w) = self.list::<f64>("scheduler.weights")? {
            s.weights = w
                .try_into()
                .map_err(|_| Error::config("scheduler.weights needs exactly 5 values"))?;
        }
        Ok(s)
    }

    fn scenario(&mut self) -> Result<ScenarioConfig> {
        let mut s = ScenarioConfig::default();
        self.set("scenario.slots_per_day", &mut s.slots_per_day)?;
        self.set("scenario.dt_hours", &mut s.dt_hours)?;
        self.set("scenario.pv_capacity_kw", &mut s.pv_capacity_kw)?;
        self.set("scenario.temp_coeff", &mut s.temp_coeff)?;
        if let Some(p) = self.path("scenario.load_csv") {
            s.load = LoadSource::Csv(p);
        }
        let pv_csv = self.path("scenario.pv_csv");
        let weather = self.path("scenario.weather_csv");
        s.pv = match (pv_csv, weather) {
            (Some(_), Some(_)) => {
                return Err(Error::config("scenario.pv_csv and scenario.weather_csv are mutually exclusive"))
            }
            (Some(p), None) => PvSource::Csv(p),
            (None, Some(p)) => PvSource::Weather(p),
            (None, None) => PvSource::Synthetic,
        };
        s.fleet_csv = self.path("scenario.fleet_csv");
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::Scheme;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = SimConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(cfg, SimConfig::default());
    }

    #[test]
    fn overrides_and_profiles() {
        let text = "
            scheduler.ga_population = 60   # after the profile regardless of order
            scheduler.ga_profile = full
            scheduler.scheme = conventional
            scheduler.weights = 1, 0, 0, 0, 0
            fleet.n_evs = 10
            forecast.profile = full
            forecast.epochs = 3
            forecast.fc_widths = 8,4
            tariff.bands = 00:00-12:00=0.1, 12:00-24:00=0.2
            scenario.load_csv = data/load.csv
        ";
        let cfg = SimConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.scheduler.ga.population, 60);
        assert_eq!(cfg.scheduler.ga.generations, 100);
        assert_eq!(cfg.scheduler.scheme, Scheme::Conventional);
        assert_eq!(cfg.scheduler.weights, [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(cfg.fleet.n_evs, 10);
        assert_eq!(cfg.forecast.train.epochs, 3);
        assert_eq!(cfg.forecast.train.batch_size, 200);
        assert_eq!(cfg.forecast.train.shape.fc_widths, vec![8, 4]);
        assert_eq!(cfg.tariff.purchase_price(50), 0.2);
        assert_eq!(cfg.scenario.load, LoadSource::Csv(PathBuf::from("/cfg/data/load.csv")));
    }

    #[test]
    fn errors() {
        let bad = [
            "fleet.n_ev = 3",
            "fleet.n_evs = three",
            "fleet.n_evs = 3\nfleet.n_evs = 4",
            "no equals sign",
            "scheduler.weights = 1,2",
            "scheduler.scheme = greedy",
            "tariff.bands = 00:00-12:00=0.1",
            "scenario.slots_per_day = 48",
            "forecast.load_checkpoint = a.ckpt",
            "scheduler.dch_max_hi = 1\nscheduler.dch_max_lo = 2",
        ];
        for text in bad {
            assert!(
                matches!(SimConfig::parse(text, Path::new(".")), Err(Error::Config(_) | Error::Usage(_))),
                "{text}"
            );
        }
    }
}
