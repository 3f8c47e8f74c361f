//! Weather tables and atmospheric attenuation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::GroundStation;

pub const WEATHER_HEADER: [&str; 6] = [
    "station_id",
    "month",
    "hour_utc",
    "zenith_transmissivity",
    "cloud_cover",
    "solar_irradiance_uW_cm2_sr_nm",
];

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("weather file: {0}")]
    Io(#[from] std::io::Error),
    #[error("weather row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("weather header must be `{}`", WEATHER_HEADER.join(","))]
    Header,
    #[error("no weather record for station `{station}` in month {month}")]
    Missing { station: String, month: u8 },
}

fn row_err(row: usize, message: impl Into<String>) -> EnvironmentError {
    EnvironmentError::Row {
        row,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub station_id: String,
    pub month: u8,
    pub hour_utc: u8,
    pub zenith_transmissivity: f64,
    pub cloud_cover: f64,
    #[serde(rename = "solar_irradiance_uW_cm2_sr_nm")]
    pub solar_irradiance: f64,
}

impl WeatherRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.station_id.is_empty() {
            return Err("empty station_id".into());
        }
        if !(1..=12).contains(&self.month) {
            return Err(format!("month {} outside 1..=12", self.month));
        }
        if self.hour_utc > 23 {
            return Err(format!("hour_utc {} outside 0..=23", self.hour_utc));
        }
        if !(0.0..=1.0).contains(&self.zenith_transmissivity) {
            return Err(format!("zenith_transmissivity {} outside [0, 1]", self.zenith_transmissivity));
        }
        if !(0.0..=1.0).contains(&self.cloud_cover) {
            return Err(format!("cloud_cover {} outside [0, 1]", self.cloud_cover));
        }
        if !(self.solar_irradiance >= 0.0 && self.solar_irradiance.is_finite()) {
            return Err(format!("solar irradiance {} must be non-negative", self.solar_irradiance));
        }
        Ok(())
    }
}

/// Transmissivity through the atmosphere at `elevation` degrees given the
/// zenith value: `zenith ^ sec(90° - elevation)`.
pub fn atmospheric_transmissivity(zenith_transmissivity: f64, elevation: f64) -> f64 {
    if elevation <= 0.0 {
        return 0.0;
    }
    if elevation >= 90.0 {
        return zenith_transmissivity;
    }
    zenith_transmissivity.powf(1.0 / elevation.to_radians().sin())
}

/// Clear-sky transmissivity scaled by the expected unobstructed fraction.
pub fn effective_transmissivity(record: &WeatherRecord, elevation: f64) -> f64 {
    atmospheric_transmissivity(record.zenith_transmissivity, elevation) * (1.0 - record.cloud_cover)
}

/// Lookup policy. Only nearest-hour is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    NearestHour,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvironmentTable {
    records: BTreeMap<(String, u8, u8), WeatherRecord>,
    pub interpolation: Interpolation,
}

impl EnvironmentTable {
    pub fn from_records(records: impl IntoIterator<Item = WeatherRecord>) -> Result<Self, EnvironmentError> {
        let mut table = Self::default();
        for (i, r) in records.into_iter().enumerate() {
            table.insert(i + 1, r)?;
        }
        Ok(table)
    }

    fn insert(&mut self, row: usize, r: WeatherRecord) -> Result<(), EnvironmentError> {
        r.check().map_err(|m| row_err(row, m))?;
        let key = (r.station_id.clone(), r.month, r.hour_utc);
        if self.records.contains_key(&key) {
            return Err(row_err(
                row,
                format!("duplicate record for ({}, {}, {})", key.0, key.1, key.2),
            ));
        }
        self.records.insert(key, r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &WeatherRecord> {
        self.records.values()
    }

    /// Record for the nearest available hour (circular distance, ties to the
    /// earlier hour).
    pub fn lookup(&self, station: &str, month: u8, hour_utc: f64) -> Result<&WeatherRecord, EnvironmentError> {
        let lo = (station.to_string(), month, 0u8);
        let hi = (station.to_string(), month, 23u8);
        let hour = hour_utc.rem_euclid(24.0);
        self.records
            .range(lo..=hi)
            .map(|(_, r)| {
                let d = (r.hour_utc as f64 - hour).abs();
                (d.min(24.0 - d), r)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| r)
            .ok_or_else(|| EnvironmentError::Missing {
                station: station.to_string(),
                month,
            })
    }

    pub fn covers(&self, station: &str, month: u8) -> bool {
        self.lookup(station, month, 0.0).is_ok()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, EnvironmentError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| row_err(1, e.to_string()))?;
        if header.iter().ne(WEATHER_HEADER.iter().copied()) {
            return Err(EnvironmentError::Header);
        }
        let mut table = Self::default();
        for (i, rec) in rdr.deserialize::<WeatherRecord>().enumerate() {
            // data rows are numbered from 2; the header is row 1
            let row = i + 2;
            let rec = rec.map_err(|e| row_err(row, e.to_string()))?;
            table.insert(row, rec)?;
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EnvironmentError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in self.records.values() {
            w.serialize(r).map_err(|e| EnvironmentError::Io(e.into()))?;
        }
        if self.records.is_empty() {
            w.write_record(WEATHER_HEADER).map_err(|e| EnvironmentError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_weather(path: &Path) -> Result<EnvironmentTable, EnvironmentError> {
    EnvironmentTable::read_csv(std::fs::File::open(path)?)
}

pub fn save_weather(table: &EnvironmentTable, path: &Path) -> Result<(), EnvironmentError> {
    table.write_csv(std::fs::File::create(path)?)
}

/// Local solar hour from UTC and longitude, in [0, 24).
pub fn local_hour(hour_utc: f64, longitude: f64) -> f64 {
    (hour_utc + longitude / 15.0).rem_euclid(24.0)
}

/// Daylight irradiance profile: zero outside 06:00-18:00 local, a half sine
/// peaking at `peak` at noon.
fn daylight_profile(local: f64, peak: f64) -> f64 {
    if (6.0..18.0).contains(&local) {
        peak * (PI * (local - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Deterministic synthetic weather with hemisphere-aware seasons.
///
/// Local summer (June in the north, December in the south) brings hazier
/// air and brighter skies. Records are drawn in station, month, hour order.
pub fn synth_weather(seed: u64, stations: &[GroundStation], months: &[u8]) -> EnvironmentTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for gs in stations {
        let base_cloud: f64 = rng.gen_range(0.05..0.35);
        let hemisphere = if gs.latitude >= 0.0 { 1.0 } else { -1.0 };
        for &month in months {
            let summer = hemisphere * (TAU * (month as f64 - 6.0) / 12.0).cos();
            for hour in 0..24u8 {
                let zenith = (0.80 - 0.08 * summer + rng.gen_range(-0.02..0.02)).clamp(0.5, 0.95);
                let cloud = (base_cloud + rng.gen_range(-0.05..0.05)).clamp(0.0, 0.9);
                let peak = 3.0 * (1.0 + 0.3 * summer) * rng.gen_range(0.9..1.1);
                let irradiance = daylight_profile(local_hour(hour as f64, gs.longitude), peak);
                records.push(WeatherRecord {
                    station_id: gs.id.clone(),
                    month,
                    hour_utc: hour,
                    zenith_transmissivity: zenith,
                    cloud_cover: cloud,
                    solar_irradiance: irradiance,
                });
            }
        }
    }
    EnvironmentTable::from_records(records).expect("generator emits valid unique records")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(zenith: f64, cloud: f64) -> WeatherRecord {
        WeatherRecord {
            station_id: "A".into(),
            month: 6,
            hour_utc: 0,
            zenith_transmissivity: zenith,
            cloud_cover: cloud,
            solar_irradiance: 0.0,
        }
    }

    #[test]
    fn secant_law_values() {
        assert_eq!(atmospheric_transmissivity(0.8, 90.0), 0.8);
        assert!((atmospheric_transmissivity(0.8, 30.0) - 0.64).abs() < 1e-12);
        assert_eq!(atmospheric_transmissivity(1.0, 12.0), 1.0);
        assert_eq!(atmospheric_transmissivity(0.8, 0.0), 0.0);
        assert_eq!(atmospheric_transmissivity(0.8, -5.0), 0.0);
    }

    #[test]
    fn cloud_scaling() {
        assert_eq!(effective_transmissivity(&rec(0.8, 1.0), 60.0), 0.0);
        assert_eq!(effective_transmissivity(&rec(0.8, 0.0), 60.0), atmospheric_transmissivity(0.8, 60.0));
        assert!((effective_transmissivity(&rec(0.8, 0.5), 30.0) - 0.32).abs() < 1e-12);
    }

    #[test]
    fn nearest_hour_lookup() {
        let mut a = rec(0.8, 0.1);
        a.hour_utc = 3;
        let mut b = rec(0.7, 0.1);
        b.hour_utc = 9;
        let t = EnvironmentTable::from_records([a, b]).unwrap();
        assert_eq!(t.lookup("A", 6, 5.0).unwrap().hour_utc, 3);
        assert_eq!(t.lookup("A", 6, 6.0).unwrap().hour_utc, 3);
        assert_eq!(t.lookup("A", 6, 7.0).unwrap().hour_utc, 9);
        assert_eq!(t.lookup("A", 6, 23.0).unwrap().hour_utc, 3);
        assert!(matches!(t.lookup("A", 7, 0.0), Err(EnvironmentError::Missing { .. })));
        assert!(matches!(t.lookup("B", 6, 0.0), Err(EnvironmentError::Missing { .. })));
    }

    #[test]
    fn rejects_bad_rows() {
        let dup = EnvironmentTable::from_records([rec(0.8, 0.1), rec(0.8, 0.1)]);
        assert!(matches!(dup, Err(EnvironmentError::Row { row: 2, .. })));
        let head = "station_id,month,hour_utc,zenith_transmissivity,cloud_cover,solar_irradiance_uW_cm2_sr_nm\n";
        let bad = format!("{head}A,6,0,1.2,0.1,0\n");
        assert!(matches!(
            EnvironmentTable::read_csv(bad.as_bytes()),
            Err(EnvironmentError::Row { row: 2, .. })
        ));
        let garbled = format!("{head}A,6,0,0.8,0.1,0\nA,x,0,0.8,0.1,0\n");
        assert!(matches!(
            EnvironmentTable::read_csv(garbled.as_bytes()),
            Err(EnvironmentError::Row { row: 3, .. })
        ));
        assert!(matches!(
            EnvironmentTable::read_csv("a,b\n".as_bytes()),
            Err(EnvironmentError::Header)
        ));
    }

    #[test]
    fn synth_is_seeded() {
        let gs = [GroundStation::new("N", 40.0, -74.0), GroundStation::new("S", -33.9, 151.2)];
        let a = synth_weather(7, &gs, &[1, 6]);
        assert_eq!(a, synth_weather(7, &gs, &[1, 6]));
        assert_ne!(a, synth_weather(8, &gs, &[1, 6]));
        assert_eq!(a.len(), 2 * 2 * 24);
    }
}
