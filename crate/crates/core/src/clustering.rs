//! Route discovery: density-based clustering of flown trajectories in a
//! per-zone distance + charges feature space.
//!
//! The fit is iterative: DBSCAN runs with a fixed radius and an initial
//! density threshold of a tenth of the sample, and the result is accepted
//! only when the mean silhouette clears a floor, at least `min_clusters`
//! clusters emerge and no cluster holds more than half the flights. Each
//! rejection halves the silhouette floor and lowers the density threshold by
//! one before retrying, up to `max_iterations`; if nothing is ever accepted
//! the best-scoring attempt is returned with a warning flag.
//!
//! After acceptance, clusters holding less than `noise_share` of the flights
//! are folded into the noise bucket ("other") and survivors are re-indexed
//! densest first.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::airac::AiracTable;
use crate::charges::{route_charges, zone_distance_profile, ZoneDistanceProfile, ZoneSet};
use crate::dataset::FlightRecord;
use crate::error::{Error, Result};
use crate::geo::KM_PER_NM;

/// Tuning knobs for the iterative clustering fit. The defaults implement the
/// standard recipe; JSON configs may override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    /// DBSCAN radius in normalized feature space. Fixed across iterations.
    pub eps: f64,
    /// Initial density threshold is `ceil(n / min_samples_divisor)`.
    pub min_samples_divisor: f64,
    /// Base silhouette floor before the sample-size allowance.
    pub silhouette_base: f64,
    /// Floor allowance `delta = min(1, silhouette_delta_scale / n)`.
    pub silhouette_delta_scale: f64,
    pub min_clusters: usize,
    /// Largest admissible cluster share of the total sample.
    pub max_dominance: f64,
    /// Clusters below this share are folded into the noise bucket.
    pub noise_share: f64,
    pub max_iterations: u32,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            eps: 0.3,
            min_samples_divisor: 10.0,
            silhouette_base: 0.75,
            silhouette_delta_scale: 100.0,
            min_clusters: 4,
            max_dominance: 0.5,
            noise_share: 0.05,
            max_iterations: 50,
        }
    }
}

/// Per-component min/max of the fitting set; maps raw features onto [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureBounds {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            for (k, v) in row.iter().enumerate() {
                min[k] = min[k].min(*v);
                max[k] = max[k].max(*v);
            }
        }
        Self { min, max }
    }

    /// Zero-range components map to 0 so constant features carry no weight.
    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, v)| {
                let range = self.max[k] - self.min[k];
                if range > 0.0 {
                    (v - self.min[k]) / range
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, v)| self.min[k] + v * (self.max[k] - self.min[k]))
            .collect()
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean DBSCAN. Labels are `-1` for noise and `0..` for clusters in
/// first-core scan order; a point counts itself among its neighbours. The
/// returned partition is deterministic given the input order, and border
/// points attach to the first cluster whose expansion reaches them.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<i32> {
    const UNVISITED: i32 = -2;
    let n = points.len();
    let eps_sq = eps * eps;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i..n {
            if dist_sq(&points[i], &points[j]) <= eps_sq {
                neighbors[i].push(j);
                if j != i {
                    neighbors[j].push(i);
                }
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut labels = vec![UNVISITED; n];
    let mut cluster: i32 = 0;
    for start in 0..n {
        if !core[start] || labels[start] != UNVISITED {
            continue;
        }
        labels[start] = cluster;
        let mut queue: VecDeque<usize> = neighbors[start].iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            if labels[p] != UNVISITED {
                continue;
            }
            labels[p] = cluster;
            if core[p] {
                queue.extend(neighbors[p].iter().copied());
            }
        }
        cluster += 1;
    }
    for label in &mut labels {
        if *label == UNVISITED {
            *label = -1;
        }
    }
    labels
}

/// Mean silhouette over non-noise points.
///
/// `s(i) = (b - a) / max(a, b)` with `a` the mean distance to the point's own
/// cluster (excluding itself) and `b` the smallest mean distance to another
/// cluster. Singleton clusters contribute 0. Fails with fewer than two
/// clusters.
pub fn silhouette_mean(points: &[Vec<f64>], labels: &[i32]) -> Result<f64> {
    let k = labels.iter().copied().max().unwrap_or(-1) + 1;
    if k < 2 {
        return Err(Error::SilhouetteUndefined);
    }
    let k = k as usize;
    let mut sizes = vec![0usize; k];
    for &label in labels {
        if label >= 0 {
            sizes[label as usize] += 1;
        }
    }

    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..points.len() {
        let own = labels[i];
        if own < 0 {
            continue;
        }
        counted += 1;
        if sizes[own as usize] == 1 {
            continue; // singleton: s = 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..points.len() {
            if labels[j] < 0 || j == i {
                continue;
            }
            sums[labels[j] as usize] += dist_sq(&points[i], &points[j]).sqrt();
        }
        let a = sums[own as usize] / (sizes[own as usize] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c == own as usize || sizes[c] == 0 {
                continue;
            }
            b = b.min(sums[c] / sizes[c] as f64);
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    if counted == 0 {
        return Err(Error::SilhouetteUndefined);
    }
    Ok(total / counted as f64)
}

/// How one DBSCAN attempt scored against the three acceptance criteria.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterAttempt {
    pub iteration: u32,
    pub min_samples: usize,
    pub silhouette_floor: f64,
    pub silhouette: Option<f64>,
    pub clusters: usize,
    pub dominance: f64,
    pub accepted: bool,
}

impl ClusterAttempt {
    fn criteria_met(&self, cfg: &ClusteringConfig) -> u32 {
        let mut met = 0;
        if self.silhouette.map_or(false, |s| s >= self.silhouette_floor) {
            met += 1;
        }
        if self.clusters >= cfg.min_clusters {
            met += 1;
        }
        if self.dominance <= cfg.max_dominance {
            met += 1;
        }
        met
    }
}

/// Outcome of the iterative DBSCAN loop, before the small-cluster merge.
#[derive(Debug, Clone)]
pub struct IterativeFit {
    pub labels: Vec<i32>,
    pub attempt: ClusterAttempt,
}

/// Run the relaxation loop on normalized features.
pub fn iterative_cluster(points: &[Vec<f64>], cfg: &ClusteringConfig) -> Result<IterativeFit> {
    let n = points.len();
    if n < 2 * cfg.min_clusters {
        return Err(Error::InsufficientData(format!(
            "{n} flights cannot support {} clusters",
            cfg.min_clusters
        )));
    }
    let mut min_samples = ((n as f64 / cfg.min_samples_divisor).ceil() as usize).max(2);
    let delta = (cfg.silhouette_delta_scale / n as f64).min(1.0);
    let mut floor = cfg.silhouette_base - delta;

    let mut best: Option<(u32, f64, IterativeFit)> = None;
    for iteration in 1..=cfg.max_iterations {
        let labels = dbscan(points, cfg.eps, min_samples);
        let clusters = (labels.iter().copied().max().unwrap_or(-1) + 1) as usize;
        let dominance = if clusters == 0 {
            0.0
        } else {
            let mut sizes = vec![0usize; clusters];
            for &l in &labels {
                if l >= 0 {
                    sizes[l as usize] += 1;
                }
            }
            *sizes.iter().max().unwrap() as f64 / n as f64
        };
        let silhouette = silhouette_mean(points, &labels).ok();
        let mut attempt = ClusterAttempt {
            iteration,
            min_samples,
            silhouette_floor: floor,
            silhouette,
            clusters,
            dominance,
            accepted: false,
        };
        let met = attempt.criteria_met(cfg);
        if met == 3 {
            attempt.accepted = true;
            return Ok(IterativeFit { labels, attempt });
        }

        let score = silhouette.unwrap_or(-1.0);
        let better = match &best {
            None => true,
            Some((best_met, best_score, _)) => {
                met > *best_met || (met == *best_met && score > *best_score)
            }
        };
        if better {
            best = Some((met, score, IterativeFit { labels, attempt }));
        }

        floor /= 2.0;
        min_samples = min_samples.saturating_sub(1).max(2);
    }
    // Nothing met all three criteria: hand back the best attempt, flagged.
    let (_, _, fit) = best.expect("at least one attempt recorded");
    Ok(fit)
}

/// Fold clusters below `noise_share` of the sample into noise and re-index
/// the survivors densest first (ties keep the lower original id first).
/// Returns the surviving cluster count.
pub fn apply_noise_rule(labels: &mut [i32], noise_share: f64) -> usize {
    let n = labels.len();
    let k = (labels.iter().copied().max().unwrap_or(-1) + 1) as usize;
    if k == 0 || n == 0 {
        return 0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        if l >= 0 {
            sizes[l as usize] += 1;
        }
    }
    let mut survivors: Vec<usize> = (0..k)
        .filter(|&c| sizes[c] as f64 / n as f64 >= noise_share)
        .collect();
    survivors.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), c));
    let mut remap = vec![-1i32; k];
    for (new_id, &old_id) in survivors.iter().enumerate() {
        remap[old_id] = new_id as i32;
    }
    for label in labels.iter_mut() {
        if *label >= 0 {
            *label = remap[*label as usize];
        }
    }
    survivors.len()
}

/// Published per-route aggregates (also computed for the "other" bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteProperties {
    pub flights: usize,
    pub share: f64,
    /// Mean flown length in nautical miles.
    pub avg_length_nm: f64,
    /// Mean flown length relative to the mean orthodromic distance.
    pub avg_length_ratio: f64,
    /// Mean charge at unit weight factor, EUR.
    pub avg_charges_eur: f64,
    /// Fraction of member flights affected by a regulation.
    pub regulated_rate: f64,
}

impl RouteProperties {
    fn empty() -> Self {
        Self {
            flights: 0,
            share: 0.0,
            avg_length_nm: 0.0,
            avg_length_ratio: 0.0,
            avg_charges_eur: 0.0,
            regulated_rate: 0.0,
        }
    }
}

/// Pre-computed geometry/pricing for one flight, reused across the pipeline.
#[derive(Debug, Clone)]
pub struct FlightDerived {
    pub profile: ZoneDistanceProfile,
    pub length_km: f64,
    pub orthodrome_km: f64,
    /// Total charge at unit weight factor for the flight's own period.
    pub charges_eur: f64,
    /// Charging period (cycle id) the flight flew in.
    pub period: String,
    /// Raw clustering feature: km per zone (fixed zone order) + charges.
    pub feature: Vec<f64>,
}

/// Compute distance profiles, unit-weight charges and raw cluster features
/// for a set of flights. Charges use each flight's own charging period.
pub fn derive_flights(
    flights: &[&FlightRecord],
    zones: &ZoneSet,
    airac: &AiracTable,
) -> Result<Vec<FlightDerived>> {
    let zone_order = zones.zone_ids();
    let mut out = Vec::with_capacity(flights.len());
    for flight in flights {
        let profile = zone_distance_profile(&flight.trajectory, zones);
        let period = airac.id_of_date(flight.date);
        let charges = route_charges(&profile, zones, &period, 1.0)?;
        let mut feature = Vec::with_capacity(zone_order.len() + 1);
        for zone_id in &zone_order {
            feature.push(profile.km_by_zone.get(zone_id).copied().unwrap_or(0.0));
        }
        feature.push(charges.total_eur);
        out.push(FlightDerived {
            length_km: profile.total_km,
            orthodrome_km: profile.orthodrome_km,
            charges_eur: charges.total_eur,
            period,
            feature,
            profile,
        });
    }
    Ok(out)
}

/// Aggregate route properties per cluster label (0..k, plus the noise/other
/// bucket). Fails if a supposed cluster has no members.
pub fn route_properties(
    derived: &[FlightDerived],
    regulated: &[bool],
    labels: &[i32],
    k: usize,
) -> Result<(Vec<RouteProperties>, RouteProperties)> {
    let n = labels.len();
    let mut acc: Vec<(usize, f64, f64, f64, usize)> = vec![(0, 0.0, 0.0, 0.0, 0); k + 1];
    for i in 0..n {
        let slot = if labels[i] >= 0 { labels[i] as usize } else { k };
        let a = &mut acc[slot];
        a.0 += 1;
        a.1 += derived[i].length_km;
        a.2 += derived[i].orthodrome_km;
        a.3 += derived[i].charges_eur;
        if regulated[i] {
            a.4 += 1;
        }
    }
    let finish = |a: &(usize, f64, f64, f64, usize)| -> RouteProperties {
        if a.0 == 0 {
            return RouteProperties::empty();
        }
        let count = a.0 as f64;
        let avg_length_km = a.1 / count;
        let avg_ortho_km = a.2 / count;
        RouteProperties {
            flights: a.0,
            share: count / n as f64,
            avg_length_nm: avg_length_km / KM_PER_NM,
            avg_length_ratio: if avg_ortho_km > 0.0 {
                avg_length_km / avg_ortho_km
            } else {
                0.0
            },
            avg_charges_eur: a.3 / count,
            regulated_rate: a.4 as f64 / count,
        }
    };
    let mut clusters = Vec::with_capacity(k);
    for (c, a) in acc[..k].iter().enumerate() {
        if a.0 == 0 {
            return Err(Error::EmptyCluster(c));
        }
        clusters.push(finish(a));
    }
    Ok((clusters, finish(&acc[k])))
}

/// Fitted route model: normalization, the accepted DBSCAN geometry and the
/// per-route aggregates, everything needed to label new flights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteClusterModel {
    /// Zone ids in feature order (charges is the final component).
    pub zone_order: Vec<String>,
    pub bounds: FeatureBounds,
    pub eps: f64,
    pub min_samples: usize,
    /// Normalized features of the fitting set.
    pub features: Vec<Vec<f64>>,
    /// Post-merge labels of the fitting set (-1 = other).
    pub labels: Vec<i32>,
    pub cluster_count: usize,
    pub silhouette: Option<f64>,
    pub silhouette_floor: f64,
    pub iterations: u32,
    /// Set when no iteration satisfied all three acceptance criteria.
    pub warning: bool,
    pub properties: Vec<RouteProperties>,
    pub other_properties: RouteProperties,
}

impl RouteClusterModel {
    /// Index of the "other" bucket on the route axis.
    pub fn other_index(&self) -> usize {
        self.cluster_count
    }

    /// Route index (cluster id, or the other bucket) for a flight.
    pub fn route_index(&self, label: i32) -> usize {
        if label >= 0 {
            label as usize
        } else {
            self.cluster_count
        }
    }

    /// Label a new flight: nearest fitted non-noise sample within `eps`
    /// claims it, anything farther is "other". Ties keep the first (lowest
    /// index) fitted sample.
    pub fn classify(&self, raw_feature: &[f64]) -> usize {
        let feature = self.bounds.normalize(raw_feature);
        let mut best: Option<(f64, i32)> = None;
        for (i, fitted) in self.features.iter().enumerate() {
            if self.labels[i] < 0 {
                continue;
            }
            let d = dist_sq(&feature, fitted);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, self.labels[i]));
            }
        }
        match best {
            Some((d, label)) if d.sqrt() <= self.eps => label as usize,
            _ => self.cluster_count,
        }
    }

    /// Mean raw feature per cluster, for centroid-based correspondence.
    pub fn raw_centroids(&self) -> Vec<Vec<f64>> {
        let dim = self.bounds.min.len();
        let mut sums = vec![vec![0.0; dim]; self.cluster_count];
        let mut counts = vec![0usize; self.cluster_count];
        for (feature, &label) in self.features.iter().zip(&self.labels) {
            if label < 0 {
                continue;
            }
            let raw = self.bounds.denormalize(feature);
            for (k, v) in raw.iter().enumerate() {
                sums[label as usize][k] += v;
            }
            counts[label as usize] += 1;
        }
        sums.iter_mut()
            .zip(&counts)
            .for_each(|(row, &c)| row.iter_mut().for_each(|v| *v /= c.max(1) as f64));
        sums
    }
}

/// Full clustering fit: normalize, run the iterative loop, fold small
/// clusters into noise and aggregate route properties.
pub fn fit_route_clusters(
    derived: &[FlightDerived],
    regulated: &[bool],
    zone_order: Vec<String>,
    cfg: &ClusteringConfig,
) -> Result<RouteClusterModel> {
    let raw: Vec<&Vec<f64>> = derived.iter().map(|d| &d.feature).collect();
    let raw_owned: Vec<Vec<f64>> = raw.iter().map(|r| (*r).clone()).collect();
    let bounds = FeatureBounds::fit(&raw_owned);
    let features: Vec<Vec<f64>> = raw_owned.iter().map(|r| bounds.normalize(r)).collect();

    let fit = iterative_cluster(&features, cfg)?;
    let mut labels = fit.labels;
    let cluster_count = apply_noise_rule(&mut labels, cfg.noise_share);
    let (properties, other_properties) =
        route_properties(derived, regulated, &labels, cluster_count)?;

    Ok(RouteClusterModel {
        zone_order,
        bounds,
        eps: cfg.eps,
        min_samples: fit.attempt.min_samples,
        features,
        labels,
        cluster_count,
        silhouette: fit.attempt.silhouette,
        silhouette_floor: fit.attempt.silhouette_floor,
        iterations: fit.attempt.iteration,
        warning: !fit.attempt.accepted,
        properties,
        other_properties,
    })
}
