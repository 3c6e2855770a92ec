//! 28-day publication-cycle arithmetic from a configurable epoch.
//!
//! Cycle identifiers follow the usual `YYCC` convention: two-digit year plus
//! the ordinal of the cycle among those starting in that calendar year.

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CYCLE_DAYS: i64 = 28;

/// Anchor for the cycle grid: `start` must be the first day of cycle `id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AiracEpoch {
    pub id: String,
    pub start: NaiveDate,
}

impl Default for AiracEpoch {
    fn default() -> Self {
        Self {
            id: "1501".to_string(),
            start: NaiveDate::from_ymd_opt(2015, 1, 8).unwrap(),
        }
    }
}

/// Cycle calendar derived from an epoch; all lookups are O(1) arithmetic.
#[derive(Debug, Clone)]
pub struct AiracTable {
    epoch_start: NaiveDate,
}

impl Default for AiracTable {
    fn default() -> Self {
        Self::new(&AiracEpoch::default()).expect("the built-in epoch is self-consistent")
    }
}

impl AiracTable {
    pub fn new(epoch: &AiracEpoch) -> Result<Self> {
        parse_id(&epoch.id)?;
        let table = Self {
            epoch_start: epoch.start,
        };
        // The epoch must be self-consistent: its start date must map back to
        // its own identifier.
        if table.id_of_date(epoch.start) != epoch.id {
            return Err(Error::InvalidConfig(format!(
                "epoch start {} does not begin cycle {}",
                epoch.start, epoch.id
            )));
        }
        Ok(table)
    }

    fn cycle_start(&self, n: i64) -> NaiveDate {
        self.epoch_start + Duration::days(n * CYCLE_DAYS)
    }

    /// Index (cycles since epoch) of the first cycle starting in `year`.
    fn first_cycle_of_year(&self, year: i32) -> i64 {
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid January 1st");
        let days = (jan1 - self.epoch_start).num_days();
        days.div_euclid(CYCLE_DAYS) + if days.rem_euclid(CYCLE_DAYS) == 0 { 0 } else { 1 }
    }

    /// Identifier of the cycle containing `date`.
    pub fn id_of_date(&self, date: NaiveDate) -> String {
        let days = (date - self.epoch_start).num_days();
        let n = days.div_euclid(CYCLE_DAYS);
        let start = self.cycle_start(n);
        let ordinal = n - self.first_cycle_of_year(start.year()) + 1;
        format!("{:02}{:02}", start.year().rem_euclid(100), ordinal)
    }

    /// Half-open date interval `[start, end)` covered by a cycle id.
    ///
    /// Two-digit years are interpreted in the 2000s.
    pub fn cycle_bounds(&self, id: &str) -> Result<(NaiveDate, NaiveDate)> {
        let (yy, cc) = parse_id(id)?;
        let year = 2000 + yy as i32;
        let n = self.first_cycle_of_year(year) + cc as i64 - 1;
        let start = self.cycle_start(n);
        if start.year() != year {
            // Asking for e.g. cycle 14 of a 13-cycle year.
            return Err(Error::InvalidAirac(id.to_string()));
        }
        Ok((start, start + Duration::days(CYCLE_DAYS)))
    }
}

fn parse_id(id: &str) -> Result<(u32, u32)> {
    if id.len() != 4 || !id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::InvalidAirac(id.to_string()));
    }
    let yy: u32 = id[..2].parse().unwrap();
    let cc: u32 = id[2..].parse().unwrap();
    if cc == 0 || cc > 14 {
        return Err(Error::InvalidAirac(id.to_string()));
    }
    Ok((yy, cc))
}
