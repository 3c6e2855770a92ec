//! Per-segment route choice models.
//!
//! Every segment gets one model over its considered routes (the named routes
//! holding strictly more than 5% of the segment's flights) plus an implicit
//! "other" alternative that absorbs everything else. Depending on the data
//! and the configured family, the model is a multinomial logit, a bundle of
//! regression trees, a constant, a uniform spread or the empirical shares.
//!
//! The logit gives alternative `i` the probability
//! `P_i = exp(A_i) / (1 + sum_j exp(A_j))`, with `A_i` a linear function of
//! route length, route charges and congestion, and the `1` standing for the
//! "other" alternative pinned at `A = 0`. Coefficients are constrained to
//! `[-10, 0]`: longer, pricier, more congested routes cannot be preferred.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::RouteProperties;
use crate::error::{Error, Result};
use crate::optim::{minimize_bounded, MinimizeOptions};
use crate::tree::{fit_regression_tree, RegressionTree};
use crate::util::sub_seed;

/// Minimum intra-segment share, strictly exceeded, for a route to be
/// considered an alternative of its own.
pub const CONSIDERED_SHARE: f64 = 0.05;

/// Coefficient box: non-positive taste weights.
pub const BETA_MIN: f64 = -10.0;
pub const BETA_MAX: f64 = 0.0;

const MULTI_STARTS: u64 = 5;

/// Training-set bounds used to scale length and charges onto [-1, 1].
/// Features computed later (new periods) may leave that interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionBounds {
    pub length_min_nm: f64,
    pub length_max_nm: f64,
    pub charges_min_eur: f64,
    pub charges_max_eur: f64,
}

fn scale_symmetric(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        2.0 * (v - min) / (max - min) - 1.0
    } else {
        0.0
    }
}

impl OptionBounds {
    /// Fit from the named routes' aggregates (the "other" bucket stays out:
    /// it has no utility function of its own).
    pub fn fit(route_properties: &[RouteProperties]) -> Self {
        let mut b = Self {
            length_min_nm: f64::INFINITY,
            length_max_nm: f64::NEG_INFINITY,
            charges_min_eur: f64::INFINITY,
            charges_max_eur: f64::NEG_INFINITY,
        };
        for p in route_properties {
            b.length_min_nm = b.length_min_nm.min(p.avg_length_nm);
            b.length_max_nm = b.length_max_nm.max(p.avg_length_nm);
            b.charges_min_eur = b.charges_min_eur.min(p.avg_charges_eur);
            b.charges_max_eur = b.charges_max_eur.max(p.avg_charges_eur);
        }
        b
    }

    /// Model variables for one route: scaled length, scaled charges and the
    /// raw congestion rate (already a fraction).
    pub fn features(&self, p: &RouteProperties) -> [f64; 3] {
        [
            scale_symmetric(p.avg_length_nm, self.length_min_nm, self.length_max_nm),
            scale_symmetric(p.avg_charges_eur, self.charges_min_eur, self.charges_max_eur),
            p.regulated_rate,
        ]
    }
}

/// One considered alternative: its index on the route axis and its scaled
/// model variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOption {
    pub route: usize,
    pub features: [f64; 3],
}

/// Logit probabilities over `options`, with the "other" alternative
/// appended last.
pub fn multinomial_probabilities(beta: &[f64; 3], options: &[RouteOption]) -> Vec<f64> {
    let exps: Vec<f64> = options
        .iter()
        .map(|o| {
            let a: f64 = beta.iter().zip(&o.features).map(|(b, x)| b * x).sum();
            a.exp()
        })
        .collect();
    let denom = 1.0 + exps.iter().sum::<f64>();
    let mut probs: Vec<f64> = exps.iter().map(|e| e / denom).collect();
    probs.push(1.0 / denom);
    probs
}

/// Squared residual and its gradient for the logit fit.
fn objective(beta: &[f64], options: &[RouteOption], targets: &[f64]) -> (f64, Vec<f64>) {
    let beta3 = [beta[0], beta[1], beta[2]];
    let probs = multinomial_probabilities(&beta3, options);
    let m = options.len();
    // z_k = sum_j P_j x_jk, the probability-weighted mean of each variable
    let mut z = [0.0f64; 3];
    for (o, p) in options.iter().zip(&probs) {
        for k in 0..3 {
            z[k] += p * o.features[k];
        }
    }
    let mut value = 0.0;
    let mut grad = vec![0.0f64; 3];
    for i in 0..m {
        let err = probs[i] - targets[i];
        value += err * err;
        for k in 0..3 {
            grad[k] += 2.0 * err * probs[i] * (options[i].features[k] - z[k]);
        }
    }
    let err_other = probs[m] - targets[m];
    value += err_other * err_other;
    for k in 0..3 {
        grad[k] -= 2.0 * err_other * probs[m] * z[k];
    }
    (value, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialFit {
    pub beta: [f64; 3],
    /// Euclidean distance between fitted and target shares (considered
    /// routes plus other).
    pub residual: f64,
    pub converged: bool,
}

/// Fit the logit coefficients to target shares by bounded least squares
/// from several seeded starts. `targets` holds one share per option plus
/// the other share last.
pub fn fit_multinomial(
    options: &[RouteOption],
    targets: &[f64],
    seed: u64,
) -> Result<MultinomialFit> {
    if options.is_empty() {
        return Err(Error::InvalidConfig(
            "logit fit needs at least one considered route".to_string(),
        ));
    }
    if targets.len() != options.len() + 1 {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: options.len() + 1,
        });
    }
    let total: f64 = targets.iter().sum();
    if targets.iter().any(|t| !(-1e-9..=1.0 + 1e-9).contains(t)) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "target shares must form a distribution, got sum {total}"
        )));
    }

    let lo = [BETA_MIN; 3];
    let hi = [BETA_MAX; 3];
    let opts = MinimizeOptions::default();
    // two shallow fixed starts precede the random ones: deep in the box
    // the logit saturates and its gradient vanishes, so a start far past
    // an extreme target share can stall where it stands
    let mut starts: Vec<Vec<f64>> = vec![vec![-0.01; 3], vec![-1.0; 3]];
    for start in 0..MULTI_STARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("logit-start-{start}")));
        starts.push((0..3).map(|_| BETA_MIN * rng.gen::<f64>()).collect());
    }
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for x0 in &starts {
        let result = minimize_bounded(
            |beta| objective(beta, options, targets),
            x0,
            &lo,
            &hi,
            &opts,
        )?;
        if best.as_ref().map_or(true, |(v, _, _)| result.value < *v) {
            best = Some((result.value, result.x, result.converged));
        }
    }
    let (value, x, converged) = best.expect("at least one start ran");
    Ok(MultinomialFit {
        beta: [x[0], x[1], x[2]],
        residual: value.sqrt(),
        converged,
    })
}

/// Expand per-flight choices into the tree design matrix: one row per
/// (flight, option) carrying that option's features. Row order is flights
/// outer, options inner.
pub fn tree_design_rows(options: &[RouteOption], flights: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(flights * options.len());
    for _ in 0..flights {
        for option in options {
            rows.push(option.features.to_vec());
        }
    }
    rows
}

/// One-vs-rest targets for the tree of `options[tree_idx]`: a row scores 1
/// exactly when it is that option's row and the flight chose that route.
pub fn tree_targets(options: &[RouteOption], choices: &[usize], tree_idx: usize) -> Vec<f64> {
    let mut targets = Vec::with_capacity(choices.len() * options.len());
    for &chosen in choices {
        for (j, option) in options.iter().enumerate() {
            let hit = j == tree_idx && chosen == option.route;
            targets.push(if hit { 1.0 } else { 0.0 });
        }
    }
    targets
}

/// Fit one regression tree per considered route, keyed by route index.
pub fn fit_segment_trees(
    options: &[RouteOption],
    choices: &[usize],
    seed: u64,
) -> Result<BTreeMap<usize, RegressionTree>> {
    let rows = tree_design_rows(options, choices.len());
    let mut trees = BTreeMap::new();
    for (idx, option) in options.iter().enumerate() {
        let targets = tree_targets(options, choices, idx);
        let tree = fit_regression_tree(
            &rows,
            &targets,
            sub_seed(seed, &format!("route-tree-{}", option.route)),
        )?;
        trees.insert(option.route, tree);
    }
    Ok(trees)
}

/// Turn raw per-option tree outputs into a distribution with an "other"
/// share: clamp to [0, 1]; if the mass fits under 1, the remainder is
/// other, else everything is scaled down and other gets nothing.
pub fn renormalize_with_other(raw: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let sum: f64 = clamped.iter().sum();
    let mut out;
    if sum <= 1.0 {
        out = clamped;
        out.push(1.0 - sum);
    } else {
        out = clamped.iter().map(|v| v / sum).collect();
        out.push(0.0);
    }
    out
}

/// Named routes whose intra-segment share strictly exceeds the threshold.
/// `route_counts` is padded: one slot per named route, then the other slot.
pub fn considered_routes(route_counts: &[usize]) -> Vec<usize> {
    let total: usize = route_counts.iter().sum();
    if total == 0 || route_counts.len() < 2 {
        return Vec::new();
    }
    let named = route_counts.len() - 1;
    (0..named)
        .filter(|&r| route_counts[r] as f64 / total as f64 > CONSIDERED_SHARE)
        .collect()
}

/// Fit targets for a segment: the considered routes' shares, then one other
/// share absorbing noise flights and sub-threshold named routes.
pub fn segment_targets(route_counts: &[usize], considered: &[usize]) -> Vec<f64> {
    let total: usize = route_counts.iter().sum();
    let mut targets: Vec<f64> = considered
        .iter()
        .map(|&r| route_counts[r] as f64 / total as f64)
        .collect();
    let sum: f64 = targets.iter().sum();
    targets.push((1.0 - sum).max(0.0));
    targets
}

/// Padded empirical distribution over the full route axis.
pub fn empirical_shares(route_counts: &[usize]) -> Vec<f64> {
    let total: usize = route_counts.iter().sum();
    if total == 0 {
        return vec![0.0; route_counts.len()];
    }
    route_counts
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect()
}

/// A segment's fitted predictor. Options are stored separately so the same
/// parameters can be replayed against refreshed route properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SegmentChoiceModel {
    Multinomial {
        beta: [f64; 3],
        residual: f64,
        converged: bool,
    },
    Tree {
        // serialized as index/tree pairs: the internal enum tag forces the
        // map through a string-keyed buffer that cannot hold usize keys
        #[serde(with = "tree_map_pairs")]
        trees: BTreeMap<usize, RegressionTree>,
    },
    /// Fewer than two alternatives stood out; everything goes to one slot
    /// (possibly the other slot itself).
    Constant { route: usize },
    /// Nothing observed in this segment at all.
    Uniform,
    /// Empirical shares over the full padded axis.
    Null { shares: Vec<f64> },
}

impl SegmentChoiceModel {
    /// Predicted distribution over the padded route axis
    /// (`route_count` named routes plus other, in that order).
    pub fn predict(&self, options: &[RouteOption], route_count: usize) -> Result<Vec<f64>> {
        let other = route_count;
        let mut padded = vec![0.0; route_count + 1];
        match self {
            SegmentChoiceModel::Multinomial { beta, .. } => {
                let probs = multinomial_probabilities(beta, options);
                for (option, p) in options.iter().zip(&probs) {
                    if option.route > route_count {
                        return Err(Error::InvalidConfig(format!(
                            "option route {} outside axis of {route_count}",
                            option.route
                        )));
                    }
                    padded[option.route.min(other)] += p;
                }
                padded[other] += probs[options.len()];
            }
            SegmentChoiceModel::Tree { trees } => {
                // a considered route without a matched tree predicts raw 0;
                // its mass migrates to other through the renormalization
                let raw: Vec<f64> = options
                    .iter()
                    .map(|o| trees.get(&o.route).map_or(0.0, |t| t.predict(&o.features)))
                    .collect();
                let shares = renormalize_with_other(&raw);
                for (option, p) in options.iter().zip(&shares) {
                    if option.route > route_count {
                        return Err(Error::InvalidConfig(format!(
                            "option route {} outside axis of {route_count}",
                            option.route
                        )));
                    }
                    padded[option.route.min(other)] += p;
                }
                padded[other] += shares[options.len()];
            }
            SegmentChoiceModel::Constant { route } => {
                if *route > route_count {
                    return Err(Error::InvalidConfig(format!(
                        "constant route {route} outside axis of {route_count}"
                    )));
                }
                padded[*route] = 1.0;
            }
            SegmentChoiceModel::Uniform => {
                let share = 1.0 / (route_count + 1) as f64;
                padded.iter_mut().for_each(|p| *p = share);
            }
            SegmentChoiceModel::Null { shares } => {
                if shares.len() != route_count + 1 {
                    return Err(Error::LengthMismatch {
                        left: shares.len(),
                        right: route_count + 1,
                    });
                }
                padded.copy_from_slice(shares);
            }
        }
        Ok(padded)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SegmentChoiceModel::Multinomial { .. } => "multinomial",
            SegmentChoiceModel::Tree { .. } => "tree",
            SegmentChoiceModel::Constant { .. } => "constant",
            SegmentChoiceModel::Uniform => "uniform",
            SegmentChoiceModel::Null { .. } => "null",
        }
    }

    /// Fit quality where one exists: the logit residual.
    pub fn score(&self) -> Option<f64> {
        match self {
            SegmentChoiceModel::Multinomial { residual, .. } => Some(*residual),
            _ => None,
        }
    }
}

mod tree_map_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::tree::RegressionTree;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<usize, RegressionTree>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<usize, RegressionTree>, D::Error> {
        Vec::<(usize, RegressionTree)>::deserialize(deserializer)
            .map(|pairs| pairs.into_iter().collect())
    }
}

/// Check that a vector is a probability distribution to within `tol`.
pub fn is_distribution(p: &[f64], tol: f64) -> bool {
    p.iter().all(|v| (-tol..=1.0 + tol).contains(v))
        && ((p.iter().sum::<f64>()) - 1.0).abs() <= tol
}
