//! Regression trees for route-probability prediction.
//!
//! Binary CART with variance-reduction splits and mean-value leaves. The
//! depth cap is chosen by k-fold cross-validation (k = min(5, n)) over
//! depths 1 through 5, scored by mean squared error; ties go to the
//! shallower tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sub_seed;

const MIN_SPLIT_GAIN: f64 = 1e-12;
pub const MAX_DEPTH: usize = 5;

/// One tree node. Internal nodes route `x[var] <= threshold` to the left.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        var: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
    pub depth: usize,
    /// Cross-validation MSE per candidate depth (1-indexed by position).
    pub cv_mse: Vec<f64>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    var,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*var] <= *threshold { left } else { right };
                }
            }
        }
    }
}

fn mean(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

fn sse(values: &[f64], idx: &[usize]) -> f64 {
    let m = mean(values, idx);
    idx.iter().map(|&i| (values[i] - m) * (values[i] - m)).sum()
}

struct BestSplit {
    var: usize,
    threshold: f64,
    gain: f64,
}

/// Exhaustive best split over all variables. For each variable the rows are
/// sorted once and candidate thresholds are midpoints between adjacent
/// distinct values; left/right sums come from prefix accumulation.
fn best_split(rows: &[Vec<f64>], targets: &[f64], idx: &[usize]) -> Option<BestSplit> {
    let n = idx.len();
    let dims = rows[idx[0]].len();
    let total_sum: f64 = idx.iter().map(|&i| targets[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for var in 0..dims {
        order.sort_by(|&a, &b| rows[a][var].partial_cmp(&rows[b][var]).unwrap());
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 0..n - 1 {
            let i = order[pos];
            left_sum += targets[i];
            left_sq += targets[i] * targets[i];
            let here = rows[i][var];
            let next = rows[order[pos + 1]][var];
            if next <= here {
                continue; // identical values cannot separate
            }
            let left_n = (pos + 1) as f64;
            let right_n = (n - pos - 1) as f64;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let child_sse = (left_sq - left_sum * left_sum / left_n)
                + (right_sq - right_sum * right_sum / right_n);
            let gain = parent_sse - child_sse;
            if gain > best.as_ref().map_or(MIN_SPLIT_GAIN, |b| b.gain) {
                best = Some(BestSplit {
                    var,
                    threshold: (here + next) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(rows: &[Vec<f64>], targets: &[f64], idx: &[usize], depth_left: usize) -> TreeNode {
    let leaf = |idx: &[usize]| TreeNode::Leaf {
        value: mean(targets, idx),
        samples: idx.len(),
    };
    if depth_left == 0 || idx.len() < 2 || sse(targets, idx) <= MIN_SPLIT_GAIN {
        return leaf(idx);
    }
    let Some(split) = best_split(rows, targets, idx) else {
        return leaf(idx);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| rows[i][split.var] <= split.threshold);
    TreeNode::Split {
        var: split.var,
        threshold: split.threshold,
        left: Box::new(grow(rows, targets, &left, depth_left - 1)),
        right: Box::new(grow(rows, targets, &right, depth_left - 1)),
    }
}

fn node_depth(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 0,
        TreeNode::Split { left, right, .. } => 1 + node_depth(left).max(node_depth(right)),
    }
}

/// Fit a tree at a fixed depth cap on the given row subset.
fn fit_at_depth(rows: &[Vec<f64>], targets: &[f64], idx: &[usize], depth: usize) -> TreeNode {
    grow(rows, targets, idx, depth)
}

/// Fit with cross-validated depth selection.
///
/// Folds come from a seeded shuffle: row `order[i]` lands in fold `i % k`.
/// With fewer than two rows the tree is a single mean leaf.
pub fn fit_regression_tree(rows: &[Vec<f64>], targets: &[f64], seed: u64) -> Result<RegressionTree> {
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows for tree fit".to_string()));
    }
    let n = rows.len();
    let all: Vec<usize> = (0..n).collect();
    if n < 2 {
        let root = fit_at_depth(rows, targets, &all, 1);
        return Ok(RegressionTree {
            depth: node_depth(&root),
            root,
            cv_mse: vec![],
        });
    }

    let k = n.min(5);
    let mut order = all.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "tree-folds"));
    for i in (1..order.len()).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }

    let mut cv_mse = Vec::with_capacity(MAX_DEPTH);
    let mut best_depth = 1;
    let mut best_mse = f64::INFINITY;
    for depth in 1..=MAX_DEPTH {
        let mut squared_error = 0.0;
        for fold in 0..k {
            let mut train = Vec::new();
            let mut held = Vec::new();
            for (pos, &row) in order.iter().enumerate() {
                if pos % k == fold {
                    held.push(row);
                } else {
                    train.push(row);
                }
            }
            if train.is_empty() {
                continue;
            }
            let tree = fit_at_depth(rows, targets, &train, depth);
            let model = RegressionTree {
                root: tree,
                depth,
                cv_mse: vec![],
            };
            for &i in &held {
                let err = model.predict(&rows[i]) - targets[i];
                squared_error += err * err;
            }
        }
        let mse = squared_error / n as f64;
        cv_mse.push(mse);
        if mse < best_mse - MIN_SPLIT_GAIN {
            best_mse = mse;
            best_depth = depth;
        }
    }

    let root = fit_at_depth(rows, targets, &all, best_depth);
    Ok(RegressionTree {
        depth: node_depth(&root),
        root,
        cv_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_split_recovers_a_step_function() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..20).map(|i| if i < 12 { 0.2 } else { 0.9 }).collect();
        let tree = fit_regression_tree(&rows, &targets, 1).unwrap();
        assert_eq!(tree.depth, 1);
        match &tree.root {
            TreeNode::Split { var, threshold, left, right } => {
                assert_eq!(*var, 0);
                assert_abs_diff_eq!(*threshold, 11.5, epsilon = 1e-12);
                let (TreeNode::Leaf { value: lv, .. }, TreeNode::Leaf { value: rv, .. }) =
                    (left.as_ref(), right.as_ref())
                else {
                    panic!("expected leaves at depth 1");
                };
                assert_abs_diff_eq!(*lv, 0.2, epsilon = 1e-12);
                assert_abs_diff_eq!(*rv, 0.9, epsilon = 1e-12);
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
        assert_abs_diff_eq!(tree.predict(&[3.0]), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(tree.predict(&[11.5]), 0.2, epsilon = 1e-12); // <= goes left
        assert_abs_diff_eq!(tree.predict(&[11.6]), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn constant_targets_become_one_leaf() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
        let targets = vec![0.4; 10];
        let tree = fit_regression_tree(&rows, &targets, 2).unwrap();
        assert_eq!(tree.depth, 0);
        assert!(matches!(
            tree.root,
            TreeNode::Leaf { value, samples } if (value - 0.4).abs() < 1e-12 && samples == 10
        ));
    }

    #[test]
    fn depth_grows_only_when_cv_supports_it() {
        // 2-D checkerboard of four plateaus needs depth 2
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                rows.push(vec![i as f64, j as f64]);
                targets.push(match (i < 4, j < 4) {
                    (true, true) => 0.1,
                    (true, false) => 0.8,
                    (false, true) => 0.6,
                    (false, false) => 0.3,
                });
            }
        }
        let tree = fit_regression_tree(&rows, &targets, 3).unwrap();
        assert_eq!(tree.depth, 2);
        assert_abs_diff_eq!(tree.predict(&[1.0, 1.0]), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(tree.predict(&[1.0, 6.0]), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(tree.predict(&[6.0, 1.0]), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(tree.predict(&[6.0, 6.0]), 0.3, epsilon = 1e-12);
        assert_eq!(tree.cv_mse.len(), MAX_DEPTH);
        // the selected depth should not beat deeper fits by less than the
        // tolerance; shallower ones must be strictly worse
        assert!(tree.cv_mse[0] > tree.cv_mse[1]);
    }

    #[test]
    fn noisy_linear_target_caps_at_max_depth() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 10.0]).collect();
        let targets: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let tree = fit_regression_tree(&rows, &targets, 9).unwrap();
        assert!(tree.depth <= MAX_DEPTH);
        assert!(tree.depth >= 3, "smooth ramps reward depth, got {}", tree.depth);
        // predictions stay within the target range
        for i in 0..200 {
            let p = tree.predict(&[i as f64 / 10.0]);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn tiny_samples_skip_cross_validation() {
        let tree = fit_regression_tree(&[vec![1.0]], &[0.7], 5).unwrap();
        assert_eq!(tree.depth, 0);
        assert!(tree.cv_mse.is_empty());
        assert_abs_diff_eq!(tree.predict(&[99.0]), 0.7);

        assert!(fit_regression_tree(&[], &[], 5).is_err());
        assert!(fit_regression_tree(&[vec![1.0]], &[0.5, 0.6], 5).is_err());
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 11) as f64])
            .collect();
        let targets: Vec<f64> = (0..50).map(|i| ((i * 5 % 17) as f64) / 17.0).collect();
        let a = fit_regression_tree(&rows, &targets, 42).unwrap();
        let b = fit_regression_tree(&rows, &targets, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn serde_round_trip_preserves_predictions() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 5) as f64]).collect();
        let targets: Vec<f64> = (0..30).map(|i| if i % 5 < 2 { 0.9 } else { 0.1 }).collect();
        let tree = fit_regression_tree(&rows, &targets, 8).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: RegressionTree = serde_json::from_str(&json).unwrap();
        for row in &rows {
            assert_abs_diff_eq!(tree.predict(row), back.predict(row), epsilon = 0.0);
        }
    }
}
