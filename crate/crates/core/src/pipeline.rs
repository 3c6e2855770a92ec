//! End-to-end orchestration: fit a route-choice forecasting bundle on
//! historical cycles, check it on a held-out share of the same cycles, and
//! replay it on later cycles with refreshed route geometry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::airac::{AiracEpoch, AiracTable};
use crate::charges::{ChargingZone, ZoneSet};
use crate::choice::{
    considered_routes, empirical_shares, fit_multinomial, fit_segment_trees, segment_targets,
    OptionBounds, RouteOption, SegmentChoiceModel,
};
use crate::clustering::{
    derive_flights, fit_route_clusters, ClusteringConfig, RouteClusterModel,
};
use crate::dataset::{split_train_validation, FlightRecord};
use crate::error::{Error, Result};
use crate::metrics::{euclidean, pearson};
use crate::segmentation::{Segmentation, TimeGroup, TIME_CLASSES};
use crate::util::{atomic_write_json, indexed_map, read_json, sub_seed};

/// Which predictor family the per-segment fits use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Bounded least-squares logit over length, charges and congestion.
    Multinomial,
    /// One regression tree per considered route, renormalized.
    Tree,
    /// Frequency baseline: each segment predicts its empirical shares.
    Null,
}

fn default_split_ratio() -> f64 {
    0.75
}

fn default_family() -> ModelFamily {
    ModelFamily::Multinomial
}

/// Everything a run needs besides the data files themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub origin: String,
    pub destination: String,
    /// Cycles used for fitting (and, via the split, for validation).
    pub training_airacs: Vec<String>,
    /// Cycles held out entirely. The first one refreshes the route
    /// geometry, the rest are forecast and scored.
    #[serde(default)]
    pub testing_airacs: Vec<String>,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    pub seed: u64,
    #[serde(default = "default_family")]
    pub model_family: ModelFamily,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub epoch: AiracEpoch,
    /// When set, trained and refreshed routes correspond by nearest raw
    /// centroid instead of by index.
    #[serde(default)]
    pub centroid_matching: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: Self = read_json(path)?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.origin.is_empty() || self.destination.is_empty() {
            return Err(Error::InvalidConfig(
                "origin and destination must be set".to_string(),
            ));
        }
        if self.training_airacs.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one training cycle is required".to_string(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in self.training_airacs.iter().chain(&self.testing_airacs) {
            if !seen.insert(id) {
                return Err(Error::InvalidConfig(format!("cycle {id} listed twice")));
            }
        }
        Ok(())
    }

    fn airac_table(&self) -> Result<AiracTable> {
        AiracTable::new(&self.epoch)
    }
}

/// One fitted market segment (airline class x time class).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub segment: usize,
    pub airline_class: usize,
    pub time_class: usize,
    pub label: String,
    /// Training flights that landed in this segment.
    pub flights: usize,
    /// Named routes above the consideration threshold, ascending.
    pub considered: Vec<usize>,
    /// Option features frozen at training time, aligned with `considered`.
    pub options: Vec<RouteOption>,
    pub model: SegmentChoiceModel,
    /// Empirical training distribution over the padded route axis
    /// (all-zero for empty segments).
    pub observed_shares: Vec<f64>,
    /// In-sample distance between the model's and the observed shares,
    /// for the families that actually fit something.
    pub score: Option<f64>,
}

/// Serialized output of [`train`]: the complete state needed to validate,
/// forecast and audit a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedBundle {
    pub config: PipelineConfig,
    pub zones: Vec<ChargingZone>,
    pub cask: BTreeMap<String, f64>,
    pub clusters: RouteClusterModel,
    pub segmentation: Segmentation,
    pub option_bounds: OptionBounds,
    pub segments: Vec<SegmentEntry>,
    /// Training choice counts per time class over the padded route axis;
    /// the frequency baseline reuses these at evaluation time.
    pub null_counts: Vec<Vec<usize>>,
    pub training_flights: usize,
    pub validation_flights: usize,
}

impl TrainedBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Named route count (the padded axis adds one more slot).
    pub fn route_count(&self) -> usize {
        self.clusters.cluster_count
    }
}

/// Keep the flights of one market and one cycle set, in file order.
fn filter_flights<'a>(
    flights: &'a [FlightRecord],
    origin: &str,
    destination: &str,
    table: &AiracTable,
    airacs: &[String],
) -> Vec<&'a FlightRecord> {
    flights
        .iter()
        .filter(|f| {
            f.origin == origin
                && f.destination == destination
                && airacs.contains(&table.id_of_date(f.date))
        })
        .collect()
}

fn fit_segment(
    segment: usize,
    members: &[usize],
    route_of: &[usize],
    route_count: usize,
    clusters: &RouteClusterModel,
    option_bounds: &OptionBounds,
    segmentation: &Segmentation,
    config: &PipelineConfig,
) -> Result<SegmentEntry> {
    let mut counts = vec![0usize; route_count + 1];
    for &i in members {
        counts[route_of[i]] += 1;
    }
    let observed_shares = if members.is_empty() {
        vec![0.0; route_count + 1]
    } else {
        empirical_shares(&counts)
    };
    let considered = considered_routes(&counts);
    let options: Vec<RouteOption> = considered
        .iter()
        .map(|&r| RouteOption {
            route: r,
            features: option_bounds.features(&clusters.properties[r]),
        })
        .collect();

    let seed = sub_seed(config.seed, &format!("fit-segment-{segment}"));
    let model = if members.is_empty() {
        SegmentChoiceModel::Uniform
    } else if config.model_family == ModelFamily::Null {
        SegmentChoiceModel::Null {
            shares: observed_shares.clone(),
        }
    } else if considered.len() < 2 {
        SegmentChoiceModel::Constant {
            route: considered.first().copied().unwrap_or(route_count),
        }
    } else {
        match config.model_family {
            ModelFamily::Multinomial => {
                let targets = segment_targets(&counts, &considered);
                let fit = fit_multinomial(&options, &targets, seed)?;
                SegmentChoiceModel::Multinomial {
                    beta: fit.beta,
                    residual: fit.residual,
                    converged: fit.converged,
                }
            }
            ModelFamily::Tree => {
                let choices: Vec<usize> = members.iter().map(|&i| route_of[i]).collect();
                SegmentChoiceModel::Tree {
                    trees: fit_segment_trees(&options, &choices, seed)?,
                }
            }
            ModelFamily::Null => unreachable!("handled above"),
        }
    };

    let score = match &model {
        SegmentChoiceModel::Multinomial { .. } | SegmentChoiceModel::Tree { .. } => Some(
            euclidean(&model.predict(&options, route_count)?, &observed_shares)?,
        ),
        _ => None,
    };

    Ok(SegmentEntry {
        segment,
        airline_class: segmentation.airline_class_of(segment),
        time_class: segmentation.time_class_of(segment),
        label: segmentation.segment_label(segment),
        flights: members.len(),
        considered,
        options,
        model,
        observed_shares,
        score,
    })
}

/// Fit the whole stack on the training cycles: cluster the train half of
/// the flights into routes, segment the demand, and fit one choice model
/// per segment. `threads` caps the worker count for the per-segment fits.
pub fn train(
    config: &PipelineConfig,
    flights: &[FlightRecord],
    cask: &BTreeMap<String, f64>,
    zones: Vec<ChargingZone>,
    threads: usize,
) -> Result<TrainedBundle> {
    config.check()?;
    let table = config.airac_table()?;
    let zone_set = ZoneSet::new(zones.clone());

    let filtered = filter_flights(
        flights,
        &config.origin,
        &config.destination,
        &table,
        &config.training_airacs,
    );
    if filtered.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no {}-{} flights in the training cycles",
            config.origin, config.destination
        )));
    }
    let split = split_train_validation(
        filtered.len(),
        config.split_ratio,
        sub_seed(config.seed, "split"),
    )?;
    let train_set: Vec<&FlightRecord> = split.train.iter().map(|&i| filtered[i]).collect();

    let derived = derive_flights(&train_set, &zone_set, &table)?;
    let regulated: Vec<bool> = train_set.iter().map(|f| f.regulated).collect();
    let clusters = fit_route_clusters(&derived, &regulated, zone_set.zone_ids(), &config.clustering)?;
    let route_count = clusters.cluster_count;

    let airlines: Vec<String> = train_set.iter().map(|f| f.airline.clone()).collect();
    let hours: Vec<f64> = train_set.iter().map(|f| f.arrival_hour).collect();
    let segmentation = Segmentation::fit(
        &airlines,
        &hours,
        cask,
        sub_seed(config.seed, "time-classes"),
    )?;
    let option_bounds = OptionBounds::fit(&clusters.properties);

    let route_of: Vec<usize> = clusters.labels.iter().map(|&l| clusters.route_index(l)).collect();
    let seg_of: Vec<usize> = train_set
        .iter()
        .map(|f| segmentation.segment_of(&f.airline, f.arrival_hour))
        .collect();

    let segment_count = segmentation.segment_count();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); segment_count];
    for (i, &s) in seg_of.iter().enumerate() {
        members[s].push(i);
    }

    let fitted = indexed_map(segment_count, threads, |s| {
        fit_segment(
            s,
            &members[s],
            &route_of,
            route_count,
            &clusters,
            &option_bounds,
            &segmentation,
            config,
        )
    });
    let mut segments = Vec::with_capacity(segment_count);
    for entry in fitted {
        segments.push(entry?);
    }

    let mut null_counts = vec![vec![0usize; route_count + 1]; TIME_CLASSES];
    for (i, &s) in seg_of.iter().enumerate() {
        null_counts[segmentation.time_class_of(s)][route_of[i]] += 1;
    }

    Ok(TrainedBundle {
        config: config.clone(),
        zones,
        cask: cask.clone(),
        clusters,
        segmentation,
        option_bounds,
        segments,
        null_counts,
        training_flights: split.train.len(),
        validation_flights: split.validation.len(),
    })
}

/// Forecast accuracy over one cohort of flights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// "validation" or the evaluated cycle id.
    pub scope: String,
    pub flights: usize,
    /// Observed flight counts over the padded route axis.
    pub observed: Vec<f64>,
    /// Model forecast, same axis, same total mass.
    pub predicted: Vec<f64>,
    /// Frequency-baseline forecast from the training time-class counts.
    pub null_predicted: Vec<f64>,
    /// Correlation between observed and predicted counts, when defined.
    pub pearson: Option<f64>,
    pub null_pearson: Option<f64>,
    pub groups: Vec<GroupEval>,
}

/// The same comparison restricted to a coarse time-of-day group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupEval {
    pub group: TimeGroup,
    pub flights: usize,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub pearson: Option<f64>,
}

fn pearson_or_none(observed: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
    match pearson(observed, predicted) {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Score a cohort: aggregate the per-segment model forecasts and the
/// frequency baseline against what the cohort actually flew.
fn evaluate_cohort(
    scope: &str,
    seg_of: &[usize],
    route_of: &[usize],
    route_count: usize,
    options: &[Vec<RouteOption>],
    models: &[SegmentChoiceModel],
    null_counts: &[Vec<usize>],
    segmentation: &Segmentation,
) -> Result<EvalReport> {
    let axis = route_count + 1;
    let segment_count = models.len();

    let mut seg_sizes = vec![0usize; segment_count];
    for &s in seg_of {
        seg_sizes[s] += 1;
    }

    let mut observed = vec![0.0; axis];
    for &r in route_of {
        observed[r] += 1.0;
    }

    // One predict call per populated segment; groups reuse the result.
    let mut seg_probs: Vec<Option<Vec<f64>>> = vec![None; segment_count];
    let mut predicted = vec![0.0; axis];
    for s in 0..segment_count {
        if seg_sizes[s] == 0 {
            continue;
        }
        let probs = models[s].predict(&options[s], route_count)?;
        for (slot, p) in predicted.iter_mut().zip(&probs) {
            *slot += seg_sizes[s] as f64 * p;
        }
        seg_probs[s] = Some(probs);
    }

    let mut tc_sizes = vec![0usize; TIME_CLASSES];
    for &s in seg_of {
        tc_sizes[segmentation.time_class_of(s)] += 1;
    }
    let mut null_predicted = vec![0.0; axis];
    for (tc, &n) in tc_sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let total: usize = null_counts[tc].iter().sum();
        // a time class never seen in training forecasts a flat spread
        let shares = if total == 0 {
            vec![1.0 / axis as f64; axis]
        } else {
            empirical_shares(&null_counts[tc])
        };
        for (slot, share) in null_predicted.iter_mut().zip(&shares) {
            *slot += n as f64 * share;
        }
    }

    let mut groups = Vec::with_capacity(3);
    for group in [TimeGroup::Early, TimeGroup::Midday, TimeGroup::Late] {
        let mut g_observed = vec![0.0; axis];
        let mut g_flights = 0usize;
        for (&s, &r) in seg_of.iter().zip(route_of) {
            if Segmentation::time_group(segmentation.time_class_of(s)) == group {
                g_observed[r] += 1.0;
                g_flights += 1;
            }
        }
        let mut g_predicted = vec![0.0; axis];
        for s in 0..segment_count {
            if Segmentation::time_group(segmentation.time_class_of(s)) != group {
                continue;
            }
            if let Some(probs) = &seg_probs[s] {
                for (slot, p) in g_predicted.iter_mut().zip(probs) {
                    *slot += seg_sizes[s] as f64 * p;
                }
            }
        }
        let g_pearson = pearson_or_none(&g_observed, &g_predicted)?;
        groups.push(GroupEval {
            group,
            flights: g_flights,
            observed: g_observed,
            predicted: g_predicted,
            pearson: g_pearson,
        });
    }

    Ok(EvalReport {
        scope: scope.to_string(),
        flights: seg_of.len(),
        pearson: pearson_or_none(&observed, &predicted)?,
        null_pearson: pearson_or_none(&observed, &null_predicted)?,
        observed,
        predicted,
        null_predicted,
        groups,
    })
}

/// Merge the bundled unit-cost table with per-run extras (extras win).
fn merged_cask(
    bundle: &TrainedBundle,
    extra: Option<&BTreeMap<String, f64>>,
) -> BTreeMap<String, f64> {
    let mut cask = bundle.cask.clone();
    if let Some(extra) = extra {
        for (k, v) in extra {
            cask.insert(k.clone(), *v);
        }
    }
    cask
}

/// Classify a cohort of flights with the trained bundle's route and
/// segment definitions, returning (segment, padded route) per flight.
fn classify_cohort(
    bundle: &TrainedBundle,
    clusters: &RouteClusterModel,
    cask: &BTreeMap<String, f64>,
    flights: &[&FlightRecord],
    table: &AiracTable,
    zone_set: &ZoneSet,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let derived = derive_flights(flights, zone_set, table)?;
    let route_of: Vec<usize> = derived.iter().map(|d| clusters.classify(&d.feature)).collect();
    let seg_of: Vec<usize> = flights
        .iter()
        .map(|f| {
            bundle.segmentation.segment_id(
                bundle
                    .segmentation
                    .airline_classes
                    .classify_with_cask(&f.airline, cask),
                bundle.segmentation.time_classes.classify(f.arrival_hour),
            )
        })
        .collect();
    Ok((seg_of, route_of))
}

/// Score the bundle on the held-out validation share of the training
/// cycles. `extra_cask` supplies unit costs for airlines absent from the
/// bundled table.
pub fn validate(
    bundle: &TrainedBundle,
    flights: &[FlightRecord],
    extra_cask: Option<&BTreeMap<String, f64>>,
) -> Result<EvalReport> {
    let config = &bundle.config;
    let table = config.airac_table()?;
    let zone_set = ZoneSet::new(bundle.zones.clone());

    let filtered = filter_flights(
        flights,
        &config.origin,
        &config.destination,
        &table,
        &config.training_airacs,
    );
    let split = split_train_validation(
        filtered.len(),
        config.split_ratio,
        sub_seed(config.seed, "split"),
    )?;
    if split.train.len() != bundle.training_flights
        || split.validation.len() != bundle.validation_flights
    {
        return Err(Error::InvalidConfig(format!(
            "flights file does not match the training run: split {}/{} vs bundled {}/{}",
            split.train.len(),
            split.validation.len(),
            bundle.training_flights,
            bundle.validation_flights
        )));
    }
    let val_set: Vec<&FlightRecord> = split.validation.iter().map(|&i| filtered[i]).collect();

    let cask = merged_cask(bundle, extra_cask);
    let (seg_of, route_of) =
        classify_cohort(bundle, &bundle.clusters, &cask, &val_set, &table, &zone_set)?;
    let options: Vec<Vec<RouteOption>> = bundle.segments.iter().map(|e| e.options.clone()).collect();
    let models: Vec<SegmentChoiceModel> = bundle.segments.iter().map(|e| e.model.clone()).collect();
    evaluate_cohort(
        "validation",
        &seg_of,
        &route_of,
        bundle.route_count(),
        &options,
        &models,
        &bundle.null_counts,
        &bundle.segmentation,
    )
}

/// How one trained route lines up with one refreshed route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondencePair {
    pub trained: usize,
    pub fresh: usize,
    /// Raw-feature centroid distance, present under centroid matching.
    pub centroid_distance: Option<f64>,
}

/// Pair up trained and refreshed routes, either positionally (both sides
/// are ordered densest first) or greedily by nearest raw centroid.
fn correspond(
    trained: &RouteClusterModel,
    fresh: &RouteClusterModel,
    by_centroid: bool,
) -> Vec<CorrespondencePair> {
    let kt = trained.cluster_count;
    let kf = fresh.cluster_count;
    if !by_centroid {
        return (0..kt.min(kf))
            .map(|i| CorrespondencePair {
                trained: i,
                fresh: i,
                centroid_distance: None,
            })
            .collect();
    }
    let ct = trained.raw_centroids();
    let cf = fresh.raw_centroids();
    let mut pairs = Vec::new();
    let mut used_t = vec![false; kt];
    let mut used_f = vec![false; kf];
    for _ in 0..kt.min(kf) {
        let mut best: Option<(f64, usize, usize)> = None;
        for t in 0..kt {
            if used_t[t] {
                continue;
            }
            for f in 0..kf {
                if used_f[f] {
                    continue;
                }
                let d = euclidean(&ct[t], &cf[f]).expect("centroids share one dimension");
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, t, f));
                }
            }
        }
        let (d, t, f) = best.expect("an unmatched pair remains");
        used_t[t] = true;
        used_f[f] = true;
        pairs.push(CorrespondencePair {
            trained: t,
            fresh: f,
            centroid_distance: Some(d),
        });
    }
    pairs.sort_by_key(|p| p.trained);
    pairs
}

/// Rewrite a trained model onto the refreshed route axis. Routes without a
/// counterpart fold into the other bucket; trees for them are dropped.
fn remap_model(
    model: &SegmentChoiceModel,
    to_fresh: &[Option<usize>],
    trained_count: usize,
    fresh_count: usize,
) -> SegmentChoiceModel {
    let map_route = |r: usize| -> usize {
        if r >= trained_count {
            fresh_count
        } else {
            to_fresh[r].unwrap_or(fresh_count)
        }
    };
    match model {
        SegmentChoiceModel::Multinomial { .. } | SegmentChoiceModel::Uniform => model.clone(),
        SegmentChoiceModel::Tree { trees } => {
            let mut remapped = BTreeMap::new();
            for (route, tree) in trees {
                if let Some(Some(f)) = to_fresh.get(*route) {
                    remapped.insert(*f, tree.clone());
                }
            }
            SegmentChoiceModel::Tree { trees: remapped }
        }
        SegmentChoiceModel::Constant { route } => SegmentChoiceModel::Constant {
            route: map_route(*route),
        },
        SegmentChoiceModel::Null { shares } => {
            let mut remapped = vec![0.0; fresh_count + 1];
            for (r, share) in shares.iter().enumerate() {
                remapped[map_route(r)] += share;
            }
            SegmentChoiceModel::Null { shares: remapped }
        }
    }
}

/// Outcome of replaying a trained bundle on the held-out cycles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    /// Cycle whose flights rebuilt the route geometry.
    pub recluster_airac: String,
    pub trained_clusters: usize,
    pub fresh_clusters: usize,
    pub matching: Vec<CorrespondencePair>,
    /// Set when the refresh clustering missed its acceptance criteria.
    pub clustering_warning: bool,
    /// One entry per forecast cycle, in config order.
    pub evals: Vec<EvalReport>,
}

/// Replay the bundle on the testing cycles: the first cycle refreshes the
/// route geometry and option features, later cycles are forecast with the
/// trained segment parameters and scored against what actually flew.
pub fn test(
    bundle: &TrainedBundle,
    flights: &[FlightRecord],
    extra_cask: Option<&BTreeMap<String, f64>>,
) -> Result<TestReport> {
    let config = &bundle.config;
    if config.testing_airacs.len() < 2 {
        return Err(Error::InvalidConfig(
            "testing needs at least two cycles: one to refresh the routes, the rest to forecast"
                .to_string(),
        ));
    }
    let table = config.airac_table()?;
    let zone_set = ZoneSet::new(bundle.zones.clone());
    let cask = merged_cask(bundle, extra_cask);

    let recluster_airac = config.testing_airacs[0].clone();
    let rc_flights = filter_flights(
        flights,
        &config.origin,
        &config.destination,
        &table,
        std::slice::from_ref(&recluster_airac),
    );
    if rc_flights.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no flights in refresh cycle {recluster_airac}"
        )));
    }
    let rc_derived = derive_flights(&rc_flights, &zone_set, &table)?;
    let rc_regulated: Vec<bool> = rc_flights.iter().map(|f| f.regulated).collect();
    let fresh = fit_route_clusters(
        &rc_derived,
        &rc_regulated,
        zone_set.zone_ids(),
        &config.clustering,
    )?;

    let trained_count = bundle.route_count();
    let fresh_count = fresh.cluster_count;
    let matching = correspond(&bundle.clusters, &fresh, config.centroid_matching);
    let mut to_fresh: Vec<Option<usize>> = vec![None; trained_count];
    for pair in &matching {
        to_fresh[pair.trained] = Some(pair.fresh);
    }

    // Refresh each segment's consideration set from the refresh cycle's
    // own choices; segments that cycle never saw keep their trained set,
    // translated onto the new axis.
    let segment_count = bundle.segments.len();
    let rc_route_of: Vec<usize> = fresh.labels.iter().map(|&l| fresh.route_index(l)).collect();
    let rc_seg_of: Vec<usize> = rc_flights
        .iter()
        .map(|f| {
            bundle.segmentation.segment_id(
                bundle
                    .segmentation
                    .airline_classes
                    .classify_with_cask(&f.airline, &cask),
                bundle.segmentation.time_classes.classify(f.arrival_hour),
            )
        })
        .collect();
    let mut rc_counts = vec![vec![0usize; fresh_count + 1]; segment_count];
    for (&s, &r) in rc_seg_of.iter().zip(&rc_route_of) {
        rc_counts[s][r] += 1;
    }

    let mut options = Vec::with_capacity(segment_count);
    let mut models = Vec::with_capacity(segment_count);
    for entry in &bundle.segments {
        let seen: usize = rc_counts[entry.segment].iter().sum();
        let considered = if seen > 0 {
            considered_routes(&rc_counts[entry.segment])
        } else {
            let mut mapped: Vec<usize> = entry
                .considered
                .iter()
                .filter_map(|&r| to_fresh[r])
                .collect();
            mapped.sort_unstable();
            mapped
        };
        options.push(
            considered
                .iter()
                .map(|&r| RouteOption {
                    route: r,
                    features: bundle.option_bounds.features(&fresh.properties[r]),
                })
                .collect::<Vec<_>>(),
        );
        models.push(remap_model(
            &entry.model,
            &to_fresh,
            trained_count,
            fresh_count,
        ));
    }

    let mut null_counts = vec![vec![0usize; fresh_count + 1]; TIME_CLASSES];
    for (tc, counts) in bundle.null_counts.iter().enumerate() {
        for (r, &n) in counts.iter().enumerate() {
            let slot = if r >= trained_count {
                fresh_count
            } else {
                to_fresh[r].unwrap_or(fresh_count)
            };
            null_counts[tc][slot] += n;
        }
    }

    let mut evals = Vec::new();
    for airac in &config.testing_airacs[1..] {
        let cohort = filter_flights(
            flights,
            &config.origin,
            &config.destination,
            &table,
            std::slice::from_ref(airac),
        );
        let derived = derive_flights(&cohort, &zone_set, &table)?;
        let route_of: Vec<usize> = derived.iter().map(|d| fresh.classify(&d.feature)).collect();
        let seg_of: Vec<usize> = cohort
            .iter()
            .map(|f| {
                bundle.segmentation.segment_id(
                    bundle
                        .segmentation
                        .airline_classes
                        .classify_with_cask(&f.airline, &cask),
                    bundle.segmentation.time_classes.classify(f.arrival_hour),
                )
            })
            .collect();
        evals.push(evaluate_cohort(
            airac,
            &seg_of,
            &route_of,
            fresh_count,
            &options,
            &models,
            &null_counts,
            &bundle.segmentation,
        )?);
    }

    Ok(TestReport {
        recluster_airac,
        trained_clusters: trained_count,
        fresh_clusters: fresh_count,
        matching,
        clustering_warning: fresh.warning,
        evals,
    })
}
