//! Summary features describing one series, used by the feature-based
//! clustering baseline: mean, variance, leading autocorrelations, trend
//! strength and the first-difference variance ratio.

use crate::error::{Error, Result};

/// Per-series feature vector of fixed length `4 + n_acf`.
pub fn feature_vector(values: &[f64], n_acf: usize) -> Result<Vec<f64>> {
    if values.len() <= n_acf + 1 {
        return Err(Error::InsufficientHistory(format!(
            "{} observations cannot support {n_acf} autocorrelation features",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ss: f64 = centered.iter().map(|c| c * c).sum();
    let variance = ss / (n - 1.0);

    let mut features = vec![mean, variance];
    for k in 1..=n_acf {
        let num: f64 = (k..values.len()).map(|t| centered[t] * centered[t - k]).sum();
        features.push(if ss > 0.0 { num / ss } else { 0.0 });
    }
    features.push(trend_r_squared(values));
    features.push(diff_variance_ratio(values, variance));
    Ok(features)
}

/// R-squared of regressing the series on time.
fn trend_r_squared(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut s_tt, mut s_ty, mut s_yy) = (0.0, 0.0, 0.0);
    for (t, &y) in values.iter().enumerate() {
        let dt = t as f64 - t_mean;
        let dy = y - y_mean;
        s_tt += dt * dt;
        s_ty += dt * dy;
        s_yy += dy * dy;
    }
    if s_yy > 0.0 && s_tt > 0.0 {
        (s_ty * s_ty) / (s_tt * s_yy)
    } else {
        0.0
    }
}

fn diff_variance_ratio(values: &[f64], variance: f64) -> f64 {
    if variance <= 0.0 || values.len() < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var_d = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    var_d / variance
}

/// Standardizes feature columns to zero mean and unit variance over the
/// dataset, dropping constant columns first.
pub fn standardize(mut vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let Some(dim) = vectors.first().map(|v| v.len()) else {
        return Err(Error::InvalidArgument("no feature vectors".into()));
    };
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument(
            "feature vectors have inconsistent lengths".into(),
        ));
    }
    let n = vectors.len() as f64;
    let mut keep = Vec::new();
    for c in 0..dim {
        let mean = vectors.iter().map(|v| v[c]).sum::<f64>() / n;
        let var = vectors.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            keep.push((c, mean, var.sqrt()));
        }
    }
    if keep.is_empty() {
        return Err(Error::DuplicateCollapse(
            "all feature columns are constant".into(),
        ));
    }
    for v in &mut vectors {
        let reduced: Vec<f64> = keep.iter().map(|&(c, mean, sd)| (v[c] - mean) / sd).collect();
        *v = reduced;
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_layout_and_acf_sign() {
        let up: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let f = feature_vector(&up, 3).unwrap();
        assert_eq!(f.len(), 4 + 3 - 1 + 1 - 1 + 1); // mean, var, 3 acf, trend, diff ratio
        assert!(f[2] > 0.9, "lag-1 autocorrelation of a trend: {}", f[2]);
        assert!((f[5] - 1.0).abs() < 1e-9, "perfect trend r2: {}", f[5]);

        let alternating: Vec<f64> = (0..50).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = feature_vector(&alternating, 1).unwrap();
        assert!(f[2] < -0.9, "lag-1 autocorrelation alternating: {}", f[2]);
    }

    #[test]
    fn constant_series_features_are_finite() {
        let f = feature_vector(&[3.0; 30], 4).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn standardize_drops_constant_columns() {
        let vectors = vec![vec![1.0, 5.0, 2.0], vec![2.0, 5.0, 4.0], vec![3.0, 5.0, 9.0]];
        let out = standardize(vectors).unwrap();
        assert_eq!(out[0].len(), 2);
        for c in 0..2 {
            let mean: f64 = out.iter().map(|v| v[c]).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
        }
    }
}
