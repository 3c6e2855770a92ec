//! Synthetic traffic generator for end-to-end exercises and benchmarks.
//!
//! A scenario file pins one origin/destination pair, a charging-zone map,
//! a handful of corridors (each a distinct waypoint path), an airline mix
//! and per-period flight counts. Flights are dealt onto corridors either by
//! fixed shares or by a ground-truth logit over the corridors' own length,
//! charge and congestion figures; the remainder flies deliberately odd
//! zigzag paths that no corridor-shaped model should claim.
//!
//! Everything is quota-based (largest remainder) rather than sampled, so
//! realized shares track the requested ones to within one flight, and the
//! whole dataset is a pure function of (scenario, seed).

use std::collections::BTreeMap;

use chrono::Duration;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airac::AiracTable;
use crate::charges::{route_charges, zone_distance_profile, ChargingZone, ZoneSet};
use crate::dataset::FlightRecord;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Trajectory, TrajectoryPoint, KM_PER_NM};
use crate::util::sub_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthAirport {
    pub code: String,
    pub lat: f64,
    pub lon: f64,
}

/// One named route shape: a fixed waypoint chain between the airports plus
/// the probability that a flight on it gets regulated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corridor {
    pub name: String,
    pub waypoints: Vec<GeoPoint>,
    pub congestion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthAirline {
    pub code: String,
    pub mtow_tonnes: f64,
    /// Cost per available seat km; airlines without one end up in the
    /// shared class downstream.
    pub cask_eur: Option<f64>,
    /// Relative share of the traffic.
    pub weight: f64,
}

/// One component of the arrival-hour mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalBump {
    pub hour: f64,
    pub sd: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Fraction of flights sent off-corridor (fixed-shares mode only; the
    /// logit mode derives it from the model's own other-probability).
    pub rate: f64,
    /// Largest zigzag amplitude in degrees of latitude.
    pub lat_spread_deg: f64,
    /// Regulation probability for off-corridor flights.
    #[serde(default = "default_noise_congestion")]
    pub congestion: f64,
}

fn default_noise_congestion() -> f64 {
    0.2
}

/// How flights pick corridors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ChoiceSpec {
    /// Fixed corridor shares (normalized among corridors after the noise
    /// quota is taken off the top).
    FixedShares { shares: Vec<f64> },
    /// Ground-truth logit over scaled corridor features, with an implicit
    /// off-corridor alternative at exponent zero.
    Logit { beta: [f64; 3] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthPeriod {
    pub airac: String,
    pub flights: usize,
    /// Overrides the scenario-wide choice rule for this period.
    #[serde(default)]
    pub choice: Option<ChoiceSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub origin: SynthAirport,
    pub destination: SynthAirport,
    pub zones: Vec<ChargingZone>,
    pub corridors: Vec<Corridor>,
    pub airlines: Vec<SynthAirline>,
    pub arrivals: Vec<ArrivalBump>,
    pub noise: NoiseSpec,
    pub choice: ChoiceSpec,
    pub periods: Vec<SynthPeriod>,
    #[serde(default = "default_cruise_alt")]
    pub cruise_altitude_ft: f64,
    #[serde(default = "default_cruise_speed")]
    pub cruise_speed_kts: f64,
    /// Per-waypoint positional jitter, degrees.
    #[serde(default = "default_jitter")]
    pub waypoint_jitter_deg: f64,
}

fn default_cruise_alt() -> f64 {
    36000.0
}
fn default_cruise_speed() -> f64 {
    450.0
}
fn default_jitter() -> f64 {
    0.05
}

impl SynthSpec {
    pub fn validate(&self, airac: &AiracTable) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSynthSpec(m));
        if self.corridors.is_empty() {
            return fail("at least one corridor is required".to_string());
        }
        if self.airlines.is_empty() || self.airlines.iter().any(|a| a.weight <= 0.0) {
            return fail("airlines must be non-empty with positive weights".to_string());
        }
        if self.airlines.iter().any(|a| a.mtow_tonnes <= 0.0) {
            return fail("airline mtow must be positive".to_string());
        }
        if self.arrivals.is_empty()
            || self.arrivals.iter().any(|b| b.sd <= 0.0 || b.weight <= 0.0)
        {
            return fail("arrival bumps must be non-empty with positive sd and weight".to_string());
        }
        if !(0.0..1.0).contains(&self.noise.rate) {
            return fail(format!("noise rate {} outside [0, 1)", self.noise.rate));
        }
        if self.periods.is_empty() || self.periods.iter().any(|p| p.flights == 0) {
            return fail("periods must be non-empty with positive flight counts".to_string());
        }
        for period in &self.periods {
            airac.cycle_bounds(&period.airac)?;
            self.check_choice(period.choice.as_ref().unwrap_or(&self.choice))?;
        }
        self.check_choice(&self.choice)?;
        for corridor in &self.corridors {
            if corridor.waypoints.is_empty() {
                return fail(format!("corridor {} has no waypoints", corridor.name));
            }
            if !(0.0..=1.0).contains(&corridor.congestion) {
                return fail(format!("corridor {} congestion outside [0, 1]", corridor.name));
            }
        }
        Ok(())
    }

    fn check_choice(&self, choice: &ChoiceSpec) -> Result<()> {
        if let ChoiceSpec::FixedShares { shares } = choice {
            if shares.len() != self.corridors.len() {
                return Err(Error::InvalidSynthSpec(format!(
                    "{} shares for {} corridors",
                    shares.len(),
                    self.corridors.len()
                )));
            }
            let sum: f64 = shares.iter().sum();
            if shares.iter().any(|s| *s < 0.0) || sum <= 0.0 {
                return Err(Error::InvalidSynthSpec(
                    "corridor shares must be non-negative with positive sum".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Apportion `total` into integer quotas proportional to `weights` using
/// the largest-remainder rule; remainder ties go to the lower index.
pub fn largest_remainder_quotas(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total.saturating_sub(assigned) {
        quotas[order[i % order.len()]] += 1;
    }
    quotas
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The corridor centreline as a trajectory (no jitter), used both for the
/// ground-truth logit features and as the shape all members jitter around.
fn corridor_centerline(spec: &SynthSpec, corridor: &Corridor) -> Vec<GeoPoint> {
    let mut points = Vec::with_capacity(corridor.waypoints.len() + 2);
    points.push(GeoPoint::new(spec.origin.lat, spec.origin.lon));
    points.extend(corridor.waypoints.iter().copied());
    points.push(GeoPoint::new(spec.destination.lat, spec.destination.lon));
    points
}

/// Altitude/time profile over a position chain: climb over the first 15% of
/// the distance, descend over the last 15%, cruise in between; time from
/// constant ground speed.
fn build_trajectory(spec: &SynthSpec, positions: &[GeoPoint]) -> Trajectory {
    let mut cum_km = vec![0.0];
    for w in positions.windows(2) {
        let leg = crate::geo::great_circle_km(w[0], w[1]);
        cum_km.push(cum_km.last().unwrap() + leg);
    }
    let total = *cum_km.last().unwrap();
    let speed_km_s = spec.cruise_speed_kts * KM_PER_NM / 3600.0;
    let ramp = 0.15 * total;
    let points = positions
        .iter()
        .zip(&cum_km)
        .map(|(p, &d)| {
            let alt = if d < ramp {
                spec.cruise_altitude_ft * d / ramp
            } else if d > total - ramp {
                spec.cruise_altitude_ft * (total - d) / ramp
            } else {
                spec.cruise_altitude_ft
            };
            TrajectoryPoint::new(p.lat, p.lon, alt, d / speed_km_s)
        })
        .collect();
    Trajectory::new(points)
}

fn jittered_corridor(
    spec: &SynthSpec,
    corridor: &Corridor,
    rng: &mut ChaCha8Rng,
) -> Vec<GeoPoint> {
    corridor_centerline(spec, corridor)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            // endpoints stay put: every flight leaves and lands at the field
            if i == 0 || i == corridor.waypoints.len() + 1 {
                p
            } else {
                let j = spec.waypoint_jitter_deg;
                GeoPoint::new(
                    p.lat + rng.gen_range(-j..j),
                    p.lon + rng.gen_range(-j..j),
                )
            }
        })
        .collect()
}

/// An off-corridor path: a few intermediate points thrown off the direct
/// line. Turn count, side pattern and per-turn amplitude all vary so these
/// paths scatter in feature space instead of piling into a dense group of
/// their own.
fn noise_path(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<GeoPoint> {
    let o = GeoPoint::new(spec.origin.lat, spec.origin.lon);
    let d = GeoPoint::new(spec.destination.lat, spec.destination.lon);
    let amplitude = spec.noise.lat_spread_deg * (0.5 + 0.5 * rng.gen::<f64>());
    let first_sign: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    // half the paths zigzag across the line, half arc out on one side; the
    // swing only ever widens beyond the base amplitude so no noise path
    // sneaks into the corridor band
    let alternate = rng.gen_bool(0.5);
    let turns = rng.gen_range(2..=4usize);
    let mut points = vec![o];
    for step in 0..turns {
        let t = (step + 1) as f64 / (turns + 1) as f64;
        let sign = first_sign * if alternate && step % 2 == 1 { -1.0 } else { 1.0 };
        let swing = amplitude * (1.0 + 0.4 * rng.gen::<f64>());
        let base_lat = o.lat + (d.lat - o.lat) * t;
        let base_lon = o.lon + (d.lon - o.lon) * t;
        points.push(GeoPoint::new(
            base_lat + sign * swing + rng.gen_range(-0.3..0.3),
            base_lon + rng.gen_range(-1.2..1.2),
        ));
    }
    points.push(d);
    points
}

/// Scaled ground-truth features for every corridor at one period: length
/// and charges min-max scaled to [-1, 1] across corridors, congestion raw.
fn corridor_features(
    spec: &SynthSpec,
    zones: &ZoneSet,
    period: &str,
) -> Result<Vec<[f64; 3]>> {
    let mut lengths = Vec::with_capacity(spec.corridors.len());
    let mut charges = Vec::with_capacity(spec.corridors.len());
    for corridor in &spec.corridors {
        let centerline = build_trajectory(spec, &corridor_centerline(spec, corridor));
        let profile = zone_distance_profile(&centerline, zones);
        lengths.push(profile.total_km / KM_PER_NM);
        charges.push(route_charges(&profile, zones, period, 1.0)?.total_eur);
    }
    let scale = |v: &[f64]| -> Vec<f64> {
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter()
            .map(|x| {
                if max > min {
                    2.0 * (x - min) / (max - min) - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let x_len = scale(&lengths);
    let x_chg = scale(&charges);
    Ok(spec
        .corridors
        .iter()
        .enumerate()
        .map(|(i, c)| [x_len[i], x_chg[i], c.congestion])
        .collect())
}

/// Per-period corridor/off-corridor counts, in corridor order with the
/// off-corridor count last.
fn period_counts(
    spec: &SynthSpec,
    zones: &ZoneSet,
    period: &SynthPeriod,
) -> Result<Vec<usize>> {
    let choice = period.choice.as_ref().unwrap_or(&spec.choice);
    match choice {
        ChoiceSpec::FixedShares { shares } => {
            let noise = (spec.noise.rate * period.flights as f64).round() as usize;
            let mut counts = largest_remainder_quotas(shares, period.flights - noise);
            counts.push(noise);
            Ok(counts)
        }
        ChoiceSpec::Logit { beta } => {
            let features = corridor_features(spec, zones, &period.airac)?;
            let mut weights: Vec<f64> = features
                .iter()
                .map(|x| beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>().exp())
                .collect();
            weights.push(1.0); // the off-corridor alternative
            Ok(largest_remainder_quotas(&weights, period.flights))
        }
    }
}

/// Generated dataset: flight records plus the corridor each flight was
/// dealt to (-1 for off-corridor).
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub flights: Vec<FlightRecord>,
    pub labels: Vec<(String, i64)>,
}

pub fn generate(spec: &SynthSpec, airac: &AiracTable, seed: u64) -> Result<SynthOutput> {
    spec.validate(airac)?;
    let zones = ZoneSet::new(spec.zones.clone());
    let airline_weights: Vec<f64> = spec.airlines.iter().map(|a| a.weight).collect();
    let bump_weights: Vec<f64> = spec.arrivals.iter().map(|b| b.weight).collect();
    let bump_total: f64 = bump_weights.iter().sum();

    let mut flights = Vec::new();
    let mut labels = Vec::new();
    let mut airline_seq: BTreeMap<String, usize> = BTreeMap::new();

    for period in &spec.periods {
        let (start, _) = airac.cycle_bounds(&period.airac)?;
        let counts = period_counts(spec, &zones, period)?;
        let n = period.flights;

        // corridor assignment vector, shuffled so corridors and airlines mix
        let mut assignment: Vec<i64> = Vec::with_capacity(n);
        for (c, &count) in counts.iter().enumerate() {
            let label = if c == spec.corridors.len() { -1 } else { c as i64 };
            assignment.extend(std::iter::repeat(label).take(count));
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("assign-{}", period.airac)));
        for i in (1..assignment.len()).rev() {
            let j = rng.gen_range(0..=i);
            assignment.swap(i, j);
        }

        let airline_quotas = largest_remainder_quotas(&airline_weights, n);
        let mut airline_of: Vec<usize> = Vec::with_capacity(n);
        for (a, &count) in airline_quotas.iter().enumerate() {
            airline_of.extend(std::iter::repeat(a).take(count));
        }
        let mut rng_a =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("airline-{}", period.airac)));
        for i in (1..airline_of.len()).rev() {
            let j = rng_a.gen_range(0..=i);
            airline_of.swap(i, j);
        }

        let mut rng_f =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("flights-{}", period.airac)));
        for i in 0..n {
            let airline = &spec.airlines[airline_of[i]];
            let seq = airline_seq.entry(airline.code.clone()).or_insert(0);
            *seq += 1;
            let flight_id = format!("{}{:05}", airline.code, seq);

            let date = start + Duration::days(rng_f.gen_range(0..crate::airac::CYCLE_DAYS));

            // arrival hour from the mixture, wrapped onto [0, 24)
            let mut pick = rng_f.gen::<f64>() * bump_total;
            let mut bump = &spec.arrivals[spec.arrivals.len() - 1];
            for b in &spec.arrivals {
                pick -= b.weight;
                if pick <= 0.0 {
                    bump = b;
                    break;
                }
            }
            let mut hour = bump.hour + bump.sd * box_muller(&mut rng_f);
            hour = hour.rem_euclid(24.0);

            let label = assignment[i];
            let (positions, congestion) = if label >= 0 {
                let corridor = &spec.corridors[label as usize];
                (jittered_corridor(spec, corridor, &mut rng_f), corridor.congestion)
            } else {
                (noise_path(spec, &mut rng_f), spec.noise.congestion)
            };
            let regulated = rng_f.gen::<f64>() < congestion;

            let record = FlightRecord {
                flight_id: flight_id.clone(),
                airline: airline.code.clone(),
                mtow_tonnes: airline.mtow_tonnes,
                origin: spec.origin.code.clone(),
                destination: spec.destination.code.clone(),
                date,
                arrival_hour: hour,
                regulated,
                trajectory: build_trajectory(spec, &positions),
            };
            record.check().map_err(|message| Error::InvalidFlight {
                flight_id: flight_id.clone(),
                message,
            })?;
            flights.push(record);
            labels.push((flight_id, label));
        }
    }
    Ok(SynthOutput { flights, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Minimal two-corridor scenario over a 2x2 zone grid.
    pub(crate) fn tiny_spec() -> SynthSpec {
        let ring = |lat0: f64, lat1: f64, lon0: f64, lon1: f64| {
            vec![vec![
                GeoPoint::new(lat0, lon0),
                GeoPoint::new(lat0, lon1),
                GeoPoint::new(lat1, lon1),
                GeoPoint::new(lat1, lon0),
            ]]
        };
        let mut rates = BTreeMap::new();
        rates.insert("1601".to_string(), 60.0);
        rates.insert("1602".to_string(), 60.0);
        let zone = |id: &str, lat0, lat1, lon0, lon1| ChargingZone {
            id: id.to_string(),
            rings: ring(lat0, lat1, lon0, lon1),
            unit_rates: rates.clone(),
        };
        SynthSpec {
            origin: SynthAirport {
                code: "AAAA".to_string(),
                lat: 40.0,
                lon: 0.0,
            },
            destination: SynthAirport {
                code: "BBBB".to_string(),
                lat: 40.0,
                lon: 12.0,
            },
            zones: vec![
                zone("ZN", 40.5, 45.0, -1.0, 13.0),
                zone("ZS", 35.0, 40.5, -1.0, 13.0),
            ],
            corridors: vec![
                Corridor {
                    name: "north".to_string(),
                    waypoints: vec![GeoPoint::new(42.5, 4.0), GeoPoint::new(42.5, 8.0)],
                    congestion: 0.3,
                },
                Corridor {
                    name: "south".to_string(),
                    waypoints: vec![GeoPoint::new(37.5, 4.0), GeoPoint::new(37.5, 8.0)],
                    congestion: 0.1,
                },
            ],
            airlines: vec![
                SynthAirline {
                    code: "AAA".to_string(),
                    mtow_tonnes: 70.0,
                    cask_eur: Some(0.05),
                    weight: 2.0,
                },
                SynthAirline {
                    code: "BBB".to_string(),
                    mtow_tonnes: 120.0,
                    cask_eur: None,
                    weight: 1.0,
                },
            ],
            arrivals: vec![
                ArrivalBump {
                    hour: 9.0,
                    sd: 0.5,
                    weight: 1.0,
                },
                ArrivalBump {
                    hour: 21.0,
                    sd: 0.5,
                    weight: 1.0,
                },
            ],
            noise: NoiseSpec {
                rate: 0.1,
                lat_spread_deg: 6.0,
                congestion: 0.2,
            },
            choice: ChoiceSpec::FixedShares {
                shares: vec![0.6, 0.4],
            },
            periods: vec![SynthPeriod {
                airac: "1601".to_string(),
                flights: 100,
                choice: None,
            }],
            cruise_altitude_ft: default_cruise_alt(),
            cruise_speed_kts: default_cruise_speed(),
            waypoint_jitter_deg: default_jitter(),
        }
    }

    #[test]
    fn quotas_follow_largest_remainders() {
        // 950 flights over (0.38, 0.27, 0.20, 0.15): exact quotas are
        // 361, 256.5, 190, 142.5; the tie between the two .5 remainders
        // goes to the lower index
        let q = largest_remainder_quotas(&[0.38, 0.27, 0.20, 0.15], 950);
        assert_eq!(q, vec![361, 257, 190, 142]);
        assert_eq!(q.iter().sum::<usize>(), 950);

        assert_eq!(largest_remainder_quotas(&[1.0, 1.0, 1.0], 7), vec![3, 2, 2]);
        assert_eq!(largest_remainder_quotas(&[5.0], 9), vec![9]);
        assert_eq!(largest_remainder_quotas(&[], 9), Vec::<usize>::new());
        assert_eq!(largest_remainder_quotas(&[0.0, 0.0], 4), vec![0, 0]);
    }

    #[test]
    fn quota_sums_are_exact_for_many_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let k = rng.gen_range(1..8);
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..5.0)).collect();
            let total = rng.gen_range(0..500);
            let q = largest_remainder_quotas(&weights, total);
            assert_eq!(q.iter().sum::<usize>(), total);
        }
    }

    #[test]
    fn fixed_share_counts_and_labels_line_up() {
        let spec = tiny_spec();
        let airac = AiracTable::default();
        let out = generate(&spec, &airac, 1234).unwrap();
        assert_eq!(out.flights.len(), 100);
        assert_eq!(out.labels.len(), 100);

        let mut by_label: BTreeMap<i64, usize> = BTreeMap::new();
        for (_, label) in &out.labels {
            *by_label.entry(*label).or_insert(0) += 1;
        }
        // 10 off-corridor, then 90 split 0.6/0.4
        assert_eq!(by_label[&-1], 10);
        assert_eq!(by_label[&0], 54);
        assert_eq!(by_label[&1], 36);

        // ids unique, records valid, dates inside the cycle
        let mut ids: Vec<&String> = out.flights.iter().map(|f| &f.flight_id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
        let (start, end) = airac.cycle_bounds("1601").unwrap();
        for f in &out.flights {
            f.check().unwrap();
            assert!(f.date >= start && f.date < end);
            assert!((0.0..24.0).contains(&f.arrival_hour));
        }

        // airline mix follows the 2:1 weights
        let aaa = out.flights.iter().filter(|f| f.airline == "AAA").count();
        assert_eq!(aaa, 67);
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let spec = tiny_spec();
        let airac = AiracTable::default();
        let a = generate(&spec, &airac, 42).unwrap();
        let b = generate(&spec, &airac, 42).unwrap();
        let c = generate(&spec, &airac, 43).unwrap();
        let json = |o: &SynthOutput| serde_json::to_string(&o.flights).unwrap();
        assert_eq!(json(&a), json(&b));
        assert_ne!(json(&a), json(&c));
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn corridor_members_share_zones_noise_does_not() {
        let spec = tiny_spec();
        let airac = AiracTable::default();
        let out = generate(&spec, &airac, 7).unwrap();
        let zones = ZoneSet::new(spec.zones.clone());
        for (flight, (_, label)) in out.flights.iter().zip(&out.labels) {
            let profile = zone_distance_profile(&flight.trajectory, &zones);
            let north = profile.km_by_zone.get("ZN").copied().unwrap_or(0.0);
            let south = profile.km_by_zone.get("ZS").copied().unwrap_or(0.0);
            match label {
                0 => assert!(north > south, "north corridor flies the north zone"),
                1 => assert!(south > north, "south corridor flies the south zone"),
                _ => {
                    // off-corridor paths swing wider than either corridor
                    // offset (2.5 deg here), whether they arc out on one
                    // side or zigzag across both
                    let max_off = flight
                        .trajectory
                        .points
                        .iter()
                        .map(|p| (p.lat - 40.0).abs())
                        .fold(0.0, f64::max);
                    assert!(max_off > 2.5, "noise paths swing wide of the line");
                    assert!(north + south > 0.0, "noise paths are charged somewhere");
                }
            }
        }
    }

    #[test]
    fn logit_mode_realizes_softmax_quotas() {
        let mut spec = tiny_spec();
        // equal-utility corridors: beta 0 makes all exponents 1, so the
        // 100 flights split 34/33/33 with other taking the first tie win
        spec.choice = ChoiceSpec::Logit { beta: [0.0; 3] };
        let airac = AiracTable::default();
        let out = generate(&spec, &airac, 9).unwrap();
        let mut by_label: BTreeMap<i64, usize> = BTreeMap::new();
        for (_, label) in &out.labels {
            *by_label.entry(*label).or_insert(0) += 1;
        }
        assert_eq!(by_label[&0], 34);
        assert_eq!(by_label[&1], 33);
        assert_eq!(by_label[&-1], 33);

        // a strongly negative charge coefficient favours the cheaper
        // corridor; zone rates are equal so charges follow length, and the
        // two corridors differ little, so just check the ordering flips
        // when beta punishes length hard
        spec.choice = ChoiceSpec::Logit {
            beta: [-8.0, 0.0, 0.0],
        };
        let out = generate(&spec, &airac, 9).unwrap();
        let mut counts = BTreeMap::new();
        for (_, label) in &out.labels {
            *counts.entry(*label).or_insert(0usize) += 1;
        }
        let shorter: i64 = if corridor_len(&spec, 0) < corridor_len(&spec, 1) { 0 } else { 1 };
        let of = |l: i64| counts.get(&l).copied().unwrap_or(0);
        assert!(of(shorter) > of(1 - shorter));
    }

    fn corridor_len(spec: &SynthSpec, idx: usize) -> f64 {
        let t = build_trajectory(spec, &corridor_centerline(spec, &spec.corridors[idx]));
        t.path_km()
    }

    #[test]
    fn trajectories_climb_cruise_and_descend() {
        let spec = tiny_spec();
        let airac = AiracTable::default();
        let out = generate(&spec, &airac, 11).unwrap();
        let f = &out.flights[0];
        let pts = &f.trajectory.points;
        assert_abs_diff_eq!(pts[0].alt_ft, 0.0);
        assert_abs_diff_eq!(pts[pts.len() - 1].alt_ft, 0.0);
        let peak = pts.iter().map(|p| p.alt_ft).fold(0.0, f64::max);
        assert_abs_diff_eq!(peak, spec.cruise_altitude_ft);
        assert!(pts.windows(2).all(|w| w[1].time_s > w[0].time_s));
    }

    #[test]
    fn validation_rejects_broken_scenarios() {
        let airac = AiracTable::default();
        let mut spec = tiny_spec();
        spec.corridors.clear();
        assert!(generate(&spec, &airac, 1).is_err());

        let mut spec = tiny_spec();
        spec.choice = ChoiceSpec::FixedShares {
            shares: vec![0.5],
        };
        assert!(generate(&spec, &airac, 1).is_err());

        let mut spec = tiny_spec();
        spec.periods[0].airac = "1614".to_string(); // 2016 has 13 cycles
        assert!(generate(&spec, &airac, 1).is_err());

        let mut spec = tiny_spec();
        spec.noise.rate = 1.0;
        assert!(generate(&spec, &airac, 1).is_err());

        let mut spec = tiny_spec();
        spec.airlines[0].weight = 0.0;
        assert!(generate(&spec, &airac, 1).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = tiny_spec();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: SynthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(
            serde_json::to_string(&back).unwrap(),
            serde_json::to_string(&spec).unwrap()
        );
        // defaults fill in when fields are omitted
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v.as_object_mut().unwrap().remove("cruise_altitude_ft");
        let back: SynthSpec = serde_json::from_value(v).unwrap();
        assert_abs_diff_eq!(back.cruise_altitude_ft, 36000.0);
    }
}
