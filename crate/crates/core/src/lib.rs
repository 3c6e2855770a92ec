//! Pre-tactical route-choice forecasting for a single origin/destination
//! pair: cluster flown trajectories into routes, segment demand by airline
//! and arrival time, fit a per-segment choice model on route properties
//! (length, charges, congestion) and predict per-route flight counts for a
//! future charging period.

pub mod airac;
pub mod charges;
pub mod choice;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod geo;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod segmentation;
pub mod synth;
pub mod tree;
pub mod util;

pub use airac::{AiracEpoch, AiracTable};
pub use charges::{
    route_charges, weight_factor, zone_distance_profile, ChargeBreakdown, ChargingZone,
    ZoneDistanceProfile, ZoneSet,
};
pub use choice::{
    considered_routes, empirical_shares, fit_multinomial, fit_segment_trees, is_distribution,
    multinomial_probabilities, renormalize_with_other, segment_targets, MultinomialFit,
    OptionBounds, RouteOption, SegmentChoiceModel, BETA_MAX, BETA_MIN, CONSIDERED_SHARE,
};
pub use clustering::{
    apply_noise_rule, dbscan, derive_flights, fit_route_clusters, iterative_cluster,
    route_properties, silhouette_mean, ClusteringConfig, FeatureBounds, FlightDerived,
    RouteClusterModel, RouteProperties,
};
pub use metrics::{euclidean, pearson};
pub use optim::{minimize_bounded, MinimizeOptions, MinimizeResult};
pub use pipeline::{
    test as test_bundle, train, validate as validate_bundle, CorrespondencePair, EvalReport,
    GroupEval, ModelFamily, PipelineConfig, SegmentEntry, TestReport, TrainedBundle,
};
pub use report::{
    eval_csv, eval_summary, route_slot_name, routes_csv, segment_counts_csv, segments_csv,
    test_summary, train_summary,
};
pub use segmentation::{
    wrap_hour, AirlineClasses, Segmentation, TimeClasses, TimeGroup, DEFAULT_CASK_EUR,
    TIME_CLASSES,
};
pub use synth::{
    generate as synth_generate, largest_remainder_quotas, ChoiceSpec, SynthOutput, SynthSpec,
};
pub use tree::{fit_regression_tree, RegressionTree, TreeNode};
pub use dataset::{
    load_cask, load_flights, load_labels, save_cask, save_flights, save_labels,
    split_train_validation, DatasetSplit, FlightRecord,
};
pub use error::{Error, Result};
pub use geo::{great_circle_km, GeoPoint, Trajectory, TrajectoryPoint};
