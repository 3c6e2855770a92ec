//! Flight records, their on-disk formats (JSON-lines flights, CSV lookup
//! tables) and the seeded train/validation split.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Trajectory;

/// One flown flight between the origin/destination pair under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flight_id: String,
    pub airline: String,
    pub mtow_tonnes: f64,
    pub origin: String,
    pub destination: String,
    /// Departure date (decides the cycle the flight belongs to).
    pub date: NaiveDate,
    /// Local arrival time as fractional hours in [0, 24).
    pub arrival_hour: f64,
    /// Whether the flight was affected by a traffic regulation.
    pub regulated: bool,
    pub trajectory: Trajectory,
}

impl FlightRecord {
    /// Structural validation applied on load.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.flight_id.is_empty() {
            return Err("empty flight_id".to_string());
        }
        if self.airline.is_empty() {
            return Err("empty airline".to_string());
        }
        if !self.mtow_tonnes.is_finite() || self.mtow_tonnes <= 0.0 {
            return Err(format!("invalid mtow_tonnes {}", self.mtow_tonnes));
        }
        if !(0.0..24.0).contains(&self.arrival_hour) {
            return Err(format!("arrival_hour {} outside [0, 24)", self.arrival_hour));
        }
        self.trajectory.check()
    }
}

/// Load a `.jsonl` flights file (one JSON flight per line, blank lines
/// ignored), validating every record.
pub fn load_flights(path: &Path) -> Result<Vec<FlightRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut flights = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FlightRecord =
            serde_json::from_str(&line).map_err(|e| Error::FileFormat {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        record.check().map_err(|message| Error::FileFormat {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("flight {}: {message}", record.flight_id),
        })?;
        flights.push(record);
    }
    Ok(flights)
}

pub fn save_flights(path: &Path, flights: &[FlightRecord]) -> Result<()> {
    let mut out = String::new();
    for flight in flights {
        out.push_str(&serde_json::to_string(flight).map_err(|e| Error::json(path, e))?);
        out.push('\n');
    }
    crate::util::atomic_write(path, out.as_bytes())
}

/// Load `airline,cask_eur` rows. CASK is the unit operating cost used to
/// group airlines; airlines absent from the table fall back to a default.
pub fn load_cask(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut table = BTreeMap::new();
    for (i, row) in reader.deserialize::<CaskRow>().enumerate() {
        let row = row.map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if !row.cask_eur.is_finite() || row.cask_eur <= 0.0 {
            return Err(Error::FileFormat {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("invalid cask_eur {} for {}", row.cask_eur, row.airline),
            });
        }
        table.insert(row.airline, row.cask_eur);
    }
    Ok(table)
}

pub fn save_cask(path: &Path, table: &BTreeMap<String, f64>) -> Result<()> {
    let mut out = String::from("airline,cask_eur\n");
    for (airline, cask) in table {
        out.push_str(&format!("{airline},{cask}\n"));
    }
    crate::util::atomic_write(path, out.as_bytes())
}

#[derive(Deserialize)]
struct CaskRow {
    airline: String,
    cask_eur: f64,
}

/// Load `flight_id,corridor` ground-truth labels (-1 marks noise flights).
pub fn load_labels(path: &Path) -> Result<Vec<(String, i64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut labels = Vec::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        labels.push((row.flight_id, row.corridor));
    }
    Ok(labels)
}

pub fn save_labels(path: &Path, labels: &[(String, i64)]) -> Result<()> {
    let mut out = String::from("flight_id,corridor\n");
    for (id, corridor) in labels {
        out.push_str(&format!("{id},{corridor}\n"));
    }
    crate::util::atomic_write(path, out.as_bytes())
}

#[derive(Deserialize)]
struct LabelRow {
    flight_id: String,
    corridor: i64,
}

/// Index partition produced by [`split_train_validation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded random partition of `0..n` into train/validation index sets.
///
/// The train share is `round(ratio * n)` (half rounds up); both sides come
/// back sorted. The same `(n, ratio, seed)` always yields the same split.
pub fn split_train_validation(n: usize, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidSplitRatio(ratio));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates, written out so the byte-level stream is pinned by this
    // crate rather than by the rand crate's shuffle internals.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let k = (ratio * n as f64 + 0.5).floor() as usize;
    let k = k.min(n);
    let mut train: Vec<usize> = order[..k].to_vec();
    let mut validation: Vec<usize> = order[k..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    Ok(DatasetSplit { train, validation })
}
