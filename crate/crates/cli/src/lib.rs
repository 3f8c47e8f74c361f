//! Batch front end: scenario files, overrides and subcommand dispatch.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use thiserror::Error;

use qsat_core::environment::{load_weather, save_weather, synth_weather, EnvironmentError};
use qsat_core::orbital::{propagate, GroundStation};
use qsat_core::scheduler::{link_budgets, BuildContext};
use qsat_core::simharness::{case_study, run_with, write_case_study_csv, CaseStudyParams, ScenarioConfig, SimError, WeatherSource};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: field `{field}`: {message}")]
    Schema { path: PathBuf, field: String, message: String },
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("argument: {0}")]
    Argument(String),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("environment: {0}")]
    Environment(#[from] EnvironmentError),
    #[error("output: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Short names accepted by `--set` in place of full dotted paths.
const ALIASES: [(&str, &str); 8] = [
    ("F_th", "physics.fidelity_threshold"),
    ("theta_e", "physics.min_elevation"),
    ("N_s", "physics.source.mean_photon_number"),
    ("delta", "slot_duration"),
    ("kappa", "horizon"),
    ("altitude", "constellation.altitude"),
    ("rings", "constellation.rings"),
    ("sats_per_ring", "constellation.sats_per_ring"),
];

fn from_value<T: serde::de::DeserializeOwned>(value: Value, path: &Path) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        field: ".".into(),
        message: e.to_string(),
    })
}

/// Read and validate a scenario; absent fields take their defaults.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let config: ScenarioConfig = from_value(read_json(path)?, path)?;
    config.validate()?;
    Ok(config)
}

pub fn save_scenario(config: &ScenarioConfig, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(config)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Apply `key=value` overrides. Keys are dotted paths into the scenario
/// (or an alias); values parse as JSON, falling back to a plain string.
pub fn apply_overrides(config: &ScenarioConfig, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut root = serde_json::to_value(config)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Override(item.clone(), "expected key=value".into()))?;
        let key = key.trim();
        let full = ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, p)| p);
        let raw = raw.trim();
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut root;
        let parts: Vec<&str> = full.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| CliError::Override(item.clone(), format!("`{}` is not an object", parts[..depth].join("."))))?;
            if depth + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
    }
    let updated: ScenarioConfig = serde_path_to_error::deserialize(root)
        .map_err(|e| CliError::Override(overrides.join(" "), format!("field `{}`: {}", e.path(), e.inner())))?;
    updated
        .validate()
        .map_err(|e| CliError::Override(overrides.join(" "), e.to_string()))?;
    Ok(updated)
}

#[derive(Debug, Parser)]
#[command(name = "qsat", version, about = "Quantum satellite network scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write per-slot metrics and daily totals.
    Simulate(SimulateArgs),
    /// Two satellites on one overhead orbit: direct versus reflected EDR per pass.
    Casestudy(CaseStudyArgs),
    /// Per-link budgets for one slot.
    Linkbudget(LinkBudgetArgs),
    /// Generate a synthetic weather table.
    WeatherSynth(WeatherArgs),
    /// Check a scenario and its weather table without running.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON; omitted means the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a scenario field, e.g. `--set F_th=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, Option<PathBuf>), CliError> {
        let (base, dir) = match &self.config {
            Some(p) => (load_scenario(p)?, p.parent().map(Path::to_path_buf)),
            None => (ScenarioConfig::default(), None),
        };
        Ok((apply_overrides(&base, &self.overrides)?, dir))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write every slot's allocation to allocations.json.
    #[arg(long)]
    allocations: bool,
}

#[derive(Debug, Args)]
struct CaseStudyArgs {
    /// Baseline grid in km as start:end:step.
    #[arg(long, default_value = "0:3000:250")]
    baselines: String,
    /// Orbit altitude in km.
    #[arg(long, default_value_t = 1000.0)]
    altitude: f64,
    /// Minimum elevation in degrees.
    #[arg(long, default_value_t = 20.0)]
    min_elevation: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LinkBudgetArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Slot index.
    #[arg(long, default_value_t = 0)]
    slot: usize,
    /// Also list links below the horizon.
    #[arg(long)]
    all: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WeatherArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON list of stations, or a scenario whose stations are used.
    #[arg(long)]
    stations: Option<PathBuf>,
    /// Comma-separated months; all twelve when omitted.
    #[arg(long, value_delimiter = ',')]
    months: Vec<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Weather CSV to check in place of the scenario's weather source.
    #[arg(long)]
    weather: Option<PathBuf>,
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Argument(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Casestudy(a) => casestudy(a),
        Command::Linkbudget(a) => linkbudget(a),
        Command::WeatherSynth(a) => weather_synth(a),
        Command::Validate(a) => validate(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let (config, base_dir) = a.scenario.load()?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let (report, allocations) = run_with(&config, base_dir.as_deref(), a.allocations)?;

    let path = a.out.join("metrics.csv");
    let mut w = create(&path)?;
    report.write_metrics_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    let path = a.out.join("per_pair.csv");
    let mut w = create(&path)?;
    report.write_per_pair_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    write_json(
        &a.out.join("report.json"),
        &json!({
            "config": config,
            "overrides": a.scenario.overrides,
            "report": report,
        }),
    )?;
    if a.allocations {
        write_json(&a.out.join("allocations.json"), &Value::Array(allocations))?;
    }
    println!(
        "{} slots, served pairs {}, mean aggregate EDR {:.6e} ebits/s, handovers {}",
        report.series.len(),
        report.served_pair_count,
        report.mean_aggregate_edr(),
        report.total_handovers
    );
    Ok(())
}

/// `start:end:step` in km, inclusive of `end` when the grid lands on it.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Argument(format!("baselines must be start:end:step with step > 0, got `{text}`"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start >= 0.0 && end >= start && start.is_finite() && end.is_finite()) {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

fn casestudy(a: CaseStudyArgs) -> Result<(), CliError> {
    let grid = parse_grid(&a.baselines)?;
    if !(a.altitude > 0.0 && a.altitude.is_finite()) {
        return Err(CliError::Argument(format!("altitude must be positive, got {}", a.altitude)));
    }
    let mut params = CaseStudyParams {
        altitude: a.altitude * 1e3,
        ..Default::default()
    };
    params.physics.min_elevation = a.min_elevation;
    params
        .physics
        .validate()
        .map_err(|e| CliError::Argument(e.to_string()))?;
    let rows: Vec<_> = grid.iter().map(|&b| case_study(b * 1e3, &params)).collect();
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let path = a.out.join("case_study.csv");
    let mut w = create(&path)?;
    write_case_study_csv(&rows, &mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    Ok(())
}

fn linkbudget(a: LinkBudgetArgs) -> Result<(), CliError> {
    let (config, base_dir) = a.scenario.load()?;
    let weather = config.weather_table(base_dir.as_deref())?;
    let pairs = config.pair_list();
    let snapshot = propagate(&config.constellation, &config.stations, a.slot, config.slot_duration)
        .map_err(SimError::from)?;
    let ctx = BuildContext {
        stations: &config.stations,
        pairs: &pairs,
        physics: &config.physics,
        weather: &weather,
        caps: &config.caps,
        month: config.month,
        hour_utc: config.hour_utc(a.slot),
    };
    let budgets = link_budgets(&snapshot, &ctx).map_err(|source| SimError::Slot { t: a.slot, source })?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let target = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut emit = || -> std::io::Result<()> {
        writeln!(out, "satellite,station,elevation_deg,slant_range_m,atmospheric_path_m,transmissivity,dark_click_prob")?;
        for (i, row) in budgets.iter().enumerate() {
            for (g, b) in row.iter().enumerate() {
                if a.all || b.elevation > 0.0 {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        snapshot.sat_ids[i],
                        config.stations[g].id,
                        b.elevation,
                        b.slant_range,
                        b.atmospheric_path,
                        b.transmissivity,
                        b.dark_click_prob
                    )?;
                }
            }
        }
        out.flush()
    };
    match emit() {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(io_err(&target)),
    }
}

fn read_stations(path: &Path) -> Result<Vec<GroundStation>, CliError> {
    let value = read_json(path)?;
    let stations: Vec<GroundStation> = if value.is_array() {
        from_value(value, path)?
    } else {
        from_value::<ScenarioConfig>(value, path)?.stations
    };
    for g in &stations {
        g.validate().map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            field: g.id.clone(),
            message: e.to_string(),
        })?;
    }
    Ok(stations)
}

fn weather_synth(a: WeatherArgs) -> Result<(), CliError> {
    let stations = match &a.stations {
        Some(p) => read_stations(p)?,
        None => ScenarioConfig::default().stations,
    };
    let months: Vec<u8> = if a.months.is_empty() { (1..=12).collect() } else { a.months.clone() };
    if let Some(m) = months.iter().find(|m| !(1..=12).contains(*m)) {
        return Err(CliError::Argument(format!("month {m} is outside 1..=12")));
    }
    let table = synth_weather(a.seed, &stations, &months);
    save_weather(&table, &a.out)?;
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let (mut config, base_dir) = a.scenario.load()?;
    if let Some(w) = &a.weather {
        // fail on a malformed file even if it happens to cover the stations
        load_weather(w)?;
        config.weather = WeatherSource::File(w.clone());
    }
    let table = config.weather_table(if a.weather.is_some() { None } else { base_dir.as_deref() })?;
    println!(
        "ok: {} stations, {} pairs, {} weather records",
        config.stations.len(),
        config.pair_list().len(),
        table.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_end() {
        let g = parse_grid("0:3000:250").unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g[12], 3000.0);
        assert_eq!(parse_grid("5:5:1").unwrap(), vec![5.0]);
        assert!(parse_grid("0:10:0").is_err());
        assert!(parse_grid("0:10").is_err());
    }

    #[test]
    fn aliases_and_paths() {
        let base = ScenarioConfig::default();
        let c = apply_overrides(&base, &["F_th=0.9".into(), "constellation.rings=3".into(), "policy=primary_ratefair".into()])
            .unwrap();
        assert_eq!(c.physics.fidelity_threshold, 0.9);
        assert_eq!(c.constellation.rings, 3);
        assert_eq!(c.policy, qsat_core::scheduler::Policy::PrimaryRatefair);
    }

    #[test]
    fn bad_overrides_rejected() {
        let base = ScenarioConfig::default();
        for o in ["F_th=1.1", "horizon=0", "physics.nope=1", "no_equals", "policy=greedy"] {
            assert!(apply_overrides(&base, &[o.to_string()]).is_err(), "{o}");
        }
    }

    #[test]
    fn empty_config_is_default() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        fs::write(&p, "{}").unwrap();
        assert_eq!(load_scenario(&p).unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn scenario_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let mut c = qsat_core::simharness::reduced_scenario();
        c.physics.source.mean_photon_number = 0.0123456789;
        c.mirror_efficiency = 0.1 + 0.2;
        save_scenario(&c, &p).unwrap();
        assert_eq!(load_scenario(&p).unwrap(), c);
    }
}
