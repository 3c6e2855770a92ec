//! Demand segmentation: flights are binned by airline cost profile and by
//! arrival time of day.
//!
//! Time classes come from a one-dimensional k-means (k = 4) over arrival
//! hours. Hours are first shifted onto a [4, 28) axis anchored at 04:00 so
//! that the night traffic around midnight stays contiguous instead of being
//! split across the day boundary. Class boundaries are the midpoints between
//! consecutive sorted centroids.
//!
//! Airline classes map each airline with a known cost per available seat
//! kilometre to its own class (alphabetical order); airlines without a cost
//! figure share one trailing class at a default cost. Airlines never seen in
//! training are routed to the class with the nearest cost.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of time-of-day classes.
pub const TIME_CLASSES: usize = 4;

/// Start of the wrapped time axis. Hours before this are pushed into the
/// following calendar day, so 01:18 becomes 25.3.
pub const DAY_ANCHOR_HOUR: f64 = 4.0;

/// Cost per available seat kilometre assumed for airlines without data.
pub const DEFAULT_CASK_EUR: f64 = 0.07;

/// Map an arrival hour in [0, 24) onto the wrapped [4, 28) axis.
pub fn wrap_hour(hour: f64) -> f64 {
    if hour < DAY_ANCHOR_HOUR {
        hour + 24.0
    } else {
        hour
    }
}

/// Seeded k-means++ initialization followed by Lloyd iterations, on scalars.
/// Empty clusters are reseeded to the point farthest from its centroid.
/// Returns sorted centroids.
fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids = Vec::with_capacity(k);
    centroids.push(values[rng.gen_range(0..n)]);
    while centroids.len() < k {
        let d2: Vec<f64> = values
            .iter()
            .map(|v| {
                centroids
                    .iter()
                    .map(|c| (v - c) * (v - c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // all remaining mass sits on existing centroids
            centroids.push(values[rng.gen_range(0..n)]);
            continue;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = n - 1;
        for (i, w) in d2.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(values[chosen]);
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..200 {
        let mut changed = false;
        for (i, v) in values.iter().enumerate() {
            let nearest = centroids
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (v - a.1).abs();
                    let db = (v - b.1).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(c, _)| c)
                .unwrap();
            if assignment[i] != nearest {
                assignment[i] = nearest;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (i, v) in values.iter().enumerate() {
            sums[assignment[i]] += v;
            counts[assignment[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            } else {
                // reseed to the point worst served by its current centroid
                let far = values
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        let da = (a.1 - centroids[assignment[a.0]]).abs();
                        let db = (b.1 - centroids[assignment[b.0]]).abs();
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = values[far];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    centroids
}

/// Fitted time-of-day classes on the wrapped hour axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeClasses {
    /// Sorted centroids on the wrapped [4, 28) axis.
    pub centroids: Vec<f64>,
    /// Midpoints between consecutive centroids; length `TIME_CLASSES - 1`.
    pub boundaries: Vec<f64>,
    /// True when there were too few distinct hours for k-means and the
    /// classes fell back to quantile cuts.
    pub degenerate: bool,
}

impl TimeClasses {
    /// Fit from arrival hours in [0, 24).
    pub fn fit(hours: &[f64], seed: u64) -> Result<Self> {
        if hours.is_empty() {
            return Err(Error::InsufficientData(
                "no arrival hours to segment".to_string(),
            ));
        }
        let wrapped: Vec<f64> = hours.iter().map(|&h| wrap_hour(h)).collect();
        let mut distinct = wrapped.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

        let (centroids, degenerate) = if distinct.len() < TIME_CLASSES {
            // quantile fallback: spread whatever values exist across classes
            let q = |p: f64| -> f64 {
                let idx = (p * (distinct.len() - 1) as f64).round() as usize;
                distinct[idx]
            };
            (
                (0..TIME_CLASSES)
                    .map(|c| q(c as f64 / (TIME_CLASSES - 1) as f64))
                    .collect(),
                true,
            )
        } else {
            (kmeans_1d(&wrapped, TIME_CLASSES, seed), false)
        };

        let boundaries = centroids
            .windows(2)
            .map(|w| (w[0] + w[1]) / 2.0)
            .collect();
        Ok(Self {
            centroids,
            boundaries,
            degenerate,
        })
    }

    /// Class index for an arrival hour in [0, 24).
    pub fn classify(&self, hour: f64) -> usize {
        let w = wrap_hour(hour);
        self.boundaries.iter().filter(|&&b| w >= b).count()
    }
}

/// Fitted airline classes keyed by cost per available seat kilometre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirlineClasses {
    /// Airlines with known costs, alphabetical; parallel to `casks`.
    pub airlines: Vec<String>,
    /// Cost of each named class, then the shared unknown-cost class last.
    pub casks: Vec<f64>,
    /// Airlines that appeared in training without a cost figure.
    pub unknown_airlines: Vec<String>,
}

impl AirlineClasses {
    /// One class per airline with a known cost (alphabetical), plus one
    /// trailing class for airlines without one.
    pub fn fit(airlines_seen: &[String], cask: &BTreeMap<String, f64>) -> Self {
        let mut known: Vec<String> = Vec::new();
        let mut unknown: Vec<String> = Vec::new();
        let mut seen: Vec<String> = airlines_seen.to_vec();
        seen.sort();
        seen.dedup();
        for airline in seen {
            if cask.contains_key(&airline) {
                known.push(airline);
            } else {
                unknown.push(airline);
            }
        }
        let mut casks: Vec<f64> = known.iter().map(|a| cask[a]).collect();
        casks.push(DEFAULT_CASK_EUR);
        Self {
            airlines: known,
            casks,
            unknown_airlines: unknown,
        }
    }

    pub fn class_count(&self) -> usize {
        self.airlines.len() + 1
    }

    fn unknown_class(&self) -> usize {
        self.airlines.len()
    }

    /// Class for an airline seen in training.
    pub fn classify(&self, airline: &str) -> usize {
        match self.airlines.binary_search_by(|a| a.as_str().cmp(airline)) {
            Ok(i) => i,
            Err(_) => self.unknown_class(),
        }
    }

    /// Class for an airline by cost alone: nearest class cost wins, ties go
    /// to the lower class index. Used when new data brings airlines the
    /// training set never saw.
    pub fn classify_by_cask(&self, cask_eur: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &c) in self.casks.iter().enumerate() {
            let d = (c - cask_eur).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Class for any airline: by name when known, else by its cost figure if
    /// one exists, else the unknown-cost class.
    pub fn classify_with_cask(&self, airline: &str, cask: &BTreeMap<String, f64>) -> usize {
        if let Ok(i) = self.airlines.binary_search_by(|a| a.as_str().cmp(airline)) {
            return i;
        }
        if self.unknown_airlines.iter().any(|a| a == airline) {
            return self.unknown_class();
        }
        match cask.get(airline) {
            Some(&c) => self.classify_by_cask(c),
            None => self.unknown_class(),
        }
    }
}

/// The fitted segmentation: airline classes crossed with time classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub airline_classes: AirlineClasses,
    pub time_classes: TimeClasses,
}

/// Coarse rollup of the four time classes used in summary reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeGroup {
    Early,
    Midday,
    Late,
}

impl Segmentation {
    pub fn fit(
        airlines_seen: &[String],
        hours: &[f64],
        cask: &BTreeMap<String, f64>,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            airline_classes: AirlineClasses::fit(airlines_seen, cask),
            time_classes: TimeClasses::fit(hours, seed)?,
        })
    }

    pub fn segment_count(&self) -> usize {
        self.airline_classes.class_count() * TIME_CLASSES
    }

    /// Flat segment id from the (airline class, time class) pair.
    pub fn segment_id(&self, airline_class: usize, time_class: usize) -> usize {
        airline_class * TIME_CLASSES + time_class
    }

    pub fn segment_of(&self, airline: &str, hour: f64) -> usize {
        self.segment_id(
            self.airline_classes.classify(airline),
            self.time_classes.classify(hour),
        )
    }

    pub fn airline_class_of(&self, segment: usize) -> usize {
        segment / TIME_CLASSES
    }

    pub fn time_class_of(&self, segment: usize) -> usize {
        segment % TIME_CLASSES
    }

    /// Human-readable segment label, for reports.
    pub fn segment_label(&self, segment: usize) -> String {
        let a = self.airline_class_of(segment);
        let t = self.time_class_of(segment);
        let airline = if a < self.airline_classes.airlines.len() {
            self.airline_classes.airlines[a].clone()
        } else {
            "other-airlines".to_string()
        };
        format!("{airline}/t{t}")
    }

    pub fn time_group(time_class: usize) -> TimeGroup {
        match time_class {
            0 => TimeGroup::Early,
            1 | 2 => TimeGroup::Midday,
            _ => TimeGroup::Late,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hours_around(centers: &[(f64, usize)]) -> Vec<f64> {
        // deterministic comb of offsets around each centre
        let offsets = [-0.4, -0.2, 0.0, 0.2, 0.4];
        let mut hours = Vec::new();
        for &(c, n) in centers {
            for i in 0..n {
                let h = c + offsets[i % offsets.len()];
                hours.push(if h >= 24.0 { h - 24.0 } else { h });
            }
        }
        hours
    }

    #[test]
    fn wrapping_moves_small_hours_past_midnight() {
        assert_abs_diff_eq!(wrap_hour(1.3), 25.3, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_hour(3.999), 27.999, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_hour(4.0), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_hour(23.5), 23.5, epsilon = 1e-12);
    }

    #[test]
    fn time_classes_land_on_blob_midpoints() {
        let hours = hours_around(&[(16.0, 25), (18.0, 25), (20.0, 25), (24.0, 25)]);
        let classes = TimeClasses::fit(&hours, 42).unwrap();
        assert!(!classes.degenerate);
        let expected_centroids = [16.0, 18.0, 20.0, 24.0];
        for (c, e) in classes.centroids.iter().zip(expected_centroids) {
            assert_abs_diff_eq!(*c, e, epsilon = 0.05);
        }
        let expected_boundaries = [17.0, 19.0, 22.0];
        for (b, e) in classes.boundaries.iter().zip(expected_boundaries) {
            assert_abs_diff_eq!(*b, e, epsilon = 0.05);
        }
        assert_eq!(classes.classify(16.5), 0);
        assert_eq!(classes.classify(17.5), 1);
        assert_eq!(classes.classify(21.0), 2);
        assert_eq!(classes.classify(23.0), 3);
        // after-midnight arrival wraps to 25.5 and stays in the last class
        assert_eq!(classes.classify(1.5), 3);
    }

    #[test]
    fn time_class_fit_is_seed_stable_and_wrap_aware() {
        let hours = hours_around(&[(9.0, 30), (13.0, 30), (19.0, 30), (23.8, 30)]);
        let a = TimeClasses::fit(&hours, 7).unwrap();
        let b = TimeClasses::fit(&hours, 7).unwrap();
        assert_eq!(a, b);
        // the 23.8 blob straddles midnight (offsets reach 24.2 -> 0.2);
        // wrapping must keep it one cluster near 23.8 on the long axis
        assert!(a.centroids[3] > 23.0 && a.centroids[3] < 24.5);
    }

    #[test]
    fn too_few_distinct_hours_falls_back_to_quantiles() {
        let hours = vec![8.0, 8.0, 15.0, 15.0, 15.0];
        let classes = TimeClasses::fit(&hours, 1).unwrap();
        assert!(classes.degenerate);
        assert_eq!(classes.centroids.len(), TIME_CLASSES);
        // duplicated centroids collapse a boundary onto the value itself, so
        // 8.0 sits at the top of its duplicate pair; ordering still holds
        assert_eq!(classes.classify(8.0), 1);
        assert_eq!(classes.classify(15.0), TIME_CLASSES - 1);
        assert!(classes.classify(8.0) < classes.classify(15.0));
        assert!(TimeClasses::fit(&[], 1).is_err());
    }

    #[test]
    fn airline_classes_split_known_and_unknown_costs() {
        let mut cask = BTreeMap::new();
        cask.insert("IBE".to_string(), 0.080);
        cask.insert("RYR".to_string(), 0.036);
        cask.insert("EZY".to_string(), 0.052);
        let seen = vec![
            "RYR".to_string(),
            "IBE".to_string(),
            "XXX".to_string(),
            "RYR".to_string(),
            "YYY".to_string(),
        ];
        let classes = AirlineClasses::fit(&seen, &cask);
        // EZY has a cost but never flew, so it gets no class
        assert_eq!(classes.airlines, vec!["IBE", "RYR"]);
        assert_eq!(classes.unknown_airlines, vec!["XXX", "YYY"]);
        assert_eq!(classes.class_count(), 3);
        assert_abs_diff_eq!(classes.casks[0], 0.080);
        assert_abs_diff_eq!(classes.casks[1], 0.036);
        assert_abs_diff_eq!(classes.casks[2], DEFAULT_CASK_EUR);

        assert_eq!(classes.classify("IBE"), 0);
        assert_eq!(classes.classify("RYR"), 1);
        assert_eq!(classes.classify("XXX"), 2);
        assert_eq!(classes.classify("ZZZ"), 2); // never seen, no cost

        // unseen airline with a cost figure joins the class whose cost is
        // nearest: 0.052 is 0.016 from RYR, 0.028 from IBE, 0.018 from the
        // unknown-cost class
        assert_eq!(classes.classify_with_cask("EZY", &cask), 1);
        // 0.078 is nearest to IBE (0.080)
        let mut cask2 = cask.clone();
        cask2.insert("NEW".to_string(), 0.078);
        assert_eq!(classes.classify_with_cask("NEW", &cask2), 0);
    }

    #[test]
    fn cask_ties_resolve_to_the_lower_class_index() {
        // powers of two make the tie exact in floating point
        let classes = AirlineClasses {
            airlines: vec!["AAA".to_string(), "BBB".to_string()],
            casks: vec![0.25, 0.75, 1.5],
            unknown_airlines: vec![],
        };
        assert_eq!(classes.classify_by_cask(0.5), 0);
        assert_eq!(classes.classify_by_cask(1.5), 2);
    }

    #[test]
    fn segment_ids_are_a_flat_grid() {
        let mut cask = BTreeMap::new();
        cask.insert("ABC".to_string(), 0.05);
        let airlines = vec!["ABC".to_string(), "UNK".to_string()];
        let hours = hours_around(&[(8.0, 10), (12.0, 10), (17.0, 10), (22.0, 10)]);
        let seg = Segmentation::fit(&airlines, &hours, &cask, 3).unwrap();
        assert_eq!(seg.segment_count(), 8);
        let s = seg.segment_of("UNK", 12.0);
        assert_eq!(seg.airline_class_of(s), 1);
        assert_eq!(seg.time_class_of(s), seg.time_classes.classify(12.0));
        assert_eq!(seg.segment_id(1, 2), 6);
        assert_eq!(seg.segment_label(6), "other-airlines/t2");
        assert_eq!(seg.segment_label(2), "ABC/t2");
    }

    #[test]
    fn time_groups_roll_up_three_ways() {
        assert_eq!(Segmentation::time_group(0), TimeGroup::Early);
        assert_eq!(Segmentation::time_group(1), TimeGroup::Midday);
        assert_eq!(Segmentation::time_group(2), TimeGroup::Midday);
        assert_eq!(Segmentation::time_group(3), TimeGroup::Late);
    }
}
