//! Scoring helpers for comparing predicted and observed route counts.

use crate::error::{Error, Result};

/// Sample Pearson correlation between two equal-length series.
///
/// Fails on length mismatch, on fewer than two points, and when either side
/// has zero variance (the coefficient is undefined there; callers report it
/// as unavailable rather than inventing a number).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} points are not enough",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x <= 0.0 || var_y <= 0.0 {
        return Err(Error::UndefinedCorrelation(
            "a series with zero variance has no correlation".to_string(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook two-pass formula, kept deliberately separate from the
    /// implementation above.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
        let dy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
        num / (dx * dy)
    }

    #[test]
    fn perfect_and_inverse_relationships() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 3.0 * v + 2.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -0.5 * v + 9.0).collect();
        assert_abs_diff_eq!(pearson(&x, &up).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pearson(&x, &down).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn known_four_point_value() {
        // counts (187, 63, 22, 7) against (179.5, 65.4, 21.6, 12.5)
        let observed = [187.0, 63.0, 22.0, 7.0];
        let predicted = [179.5, 65.4, 21.6, 12.5];
        let r = pearson(&observed, &predicted).unwrap();
        assert!((r - 0.999).abs() <= 5e-4, "r = {r}");
    }

    #[test]
    fn matches_oracle_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..1000 {
            let n = rng.gen_range(2..40);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let ours = pearson(&x, &y);
            if let Ok(r) = ours {
                assert_abs_diff_eq!(r, pearson_oracle(&x, &y), epsilon = 1e-12);
                assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r), "trial {trial}");
            }
        }
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
        assert!(pearson(&[1.0], &[2.0]).is_err());
        assert!(matches!(
            pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).is_err());
    }

    #[test]
    fn euclidean_distance_basics() {
        assert_abs_diff_eq!(
            euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            5.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(euclidean(&[], &[]).unwrap(), 0.0);
        assert!(euclidean(&[1.0], &[1.0, 2.0]).is_err());
    }
}
