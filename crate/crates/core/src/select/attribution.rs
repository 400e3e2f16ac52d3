use ndarray::{Array2, Axis};

use super::SelectError;
use crate::embed::Target;
use crate::models::{logistic_fit, ridge_fit};

/// A linear model on standardized features, used to attribute predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSurrogate {
    pub mean: Vec<f64>,
    /// Zero marks a constant column, which standardizes to 0.
    pub std: Vec<f64>,
    /// One weight vector per output (one for regression and binary tasks).
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub(crate) fn standardize_stats(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows().max(1) as f64;
    let mean: Vec<f64> = x.mean_axis(Axis(0)).map_or_else(|| vec![0.0; x.ncols()], |m| m.to_vec());
    let std = x
        .columns()
        .into_iter()
        .zip(&mean)
        .map(|(c, m)| {
            let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            if s > 1e-12 { s } else { 0.0 }
        })
        .collect();
    (mean, std)
}

pub(crate) fn apply_standardize(x: &Array2<f64>, mean: &[f64], std: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(x.dim(), |(i, j)| if std[j] > 0.0 { (x[[i, j]] - mean[j]) / std[j] } else { 0.0 })
}

/// Per-output weights of a fitted logistic model.
type Weights = (Vec<Vec<f64>>, Vec<f64>);

fn classification_weights(z: &Array2<f64>, codes: &[usize], n_classes: usize) -> Result<Weights, SelectError> {
    let p = logistic_fit(z, codes, n_classes, 1.0, 1000, 1e-6)?;
    Ok((p.weights.rows().into_iter().map(|r| r.to_vec()).collect(), p.bias.to_vec()))
}

impl LinearSurrogate {
    pub fn fit(x: &Array2<f64>, target: &Target) -> Result<Self, SelectError> {
        let (mean, std) = standardize_stats(x);
        let z = apply_standardize(x, &mean, &std);
        let (weights, bias) = match target {
            Target::Regression(y) => {
                let p = ridge_fit(&z, y, 1.0)?;
                (vec![p.weights.to_vec()], vec![p.intercept])
            }
            Target::Classes { codes, labels } => classification_weights(&z, codes, labels.len().max(2))?,
        };
        Ok(LinearSurrogate { mean, std, weights, bias })
    }

    pub fn standardize(&self, x: &Array2<f64>) -> Array2<f64> {
        apply_standardize(x, &self.mean, &self.std)
    }

    /// Linear score of output `k` on a standardized row.
    pub fn value(&self, z_row: &[f64], k: usize) -> f64 {
        self.bias[k] + self.weights[k].iter().zip(z_row).map(|(w, v)| w * v).sum::<f64>()
    }

    /// `phi[k][[i, j]] = w_kj * (z_ij - mean_i z_ij)`.
    pub fn attributions(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let z = self.standardize(x);
        let zbar = z.mean_axis(Axis(0)).map_or_else(|| vec![0.0; z.ncols()], |m| m.to_vec());
        self.weights
            .iter()
            .map(|w| Array2::from_shape_fn(z.dim(), |(i, j)| w[j] * (z[[i, j]] - zbar[j])))
            .collect()
    }

    /// Mean absolute attribution per feature, averaged over outputs.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        let phis = self.attributions(x);
        let n = x.nrows().max(1) as f64;
        let mut scores = vec![0.0; x.ncols()];
        for phi in &phis {
            for (j, s) in scores.iter_mut().enumerate() {
                *s += phi.column(j).iter().map(|v| v.abs()).sum::<f64>() / n;
            }
        }
        let outputs = phis.len().max(1) as f64;
        scores.iter_mut().for_each(|s| *s /= outputs);
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_feature_scores_zero() {
        let s = LinearSurrogate { mean: vec![0.0; 2], std: vec![1.0; 2], weights: vec![vec![2.0, 0.0]], bias: vec![0.0] };
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        let scores = s.scores(&x);
        assert!(scores[0] > 0.0 && scores[1] == 0.0);
    }

    #[test]
    fn larger_weight_ranks_higher_under_equal_spread() {
        let s = LinearSurrogate { mean: vec![0.0; 2], std: vec![1.0; 2], weights: vec![vec![2.0, 0.1]], bias: vec![0.0] };
        let x = Array2::from_shape_fn((6, 2), |(i, _)| i as f64);
        let scores = s.scores(&x);
        assert!(scores[0] > scores[1]);
    }
}
