use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};

/// Components with eigenvalues below this are ignored.
const MIN_EIGENVALUE: f64 = 1e-12;

/// Eigenvalues and unit loading vectors (columns, length `d`) of the
/// covariance of centered `x`.
pub fn principal_components(x: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = x.dim();
    let mean = x.mean_axis(Axis(0)).expect("n >= 1");
    let xc = x - &mean;
    let xm = DMatrix::from_fn(n, d, |i, j| xc[[i, j]]);
    let denom = (n.max(2) - 1) as f64;
    if d <= n {
        let cov = (xm.transpose() * &xm) / denom;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    } else {
        // Dual form: eigenvectors u of X X^T give loadings X^T u / ||X^T u||.
        let gram = (&xm * xm.transpose()) / denom;
        let eig = SymmetricEigen::new(gram);
        let mut loadings = xm.transpose() * &eig.eigenvectors;
        for mut c in loadings.column_iter_mut() {
            let norm = c.norm();
            if norm > 0.0 {
                c /= norm;
            }
        }
        (eig.eigenvalues.iter().copied().collect(), loadings)
    }
}

/// `score_j = sum_c |loading_jc| * lambda_c / sum(lambda)`.
pub fn pca_scores(x: &Array2<f64>) -> Vec<f64> {
    let d = x.ncols();
    if x.nrows() < 2 {
        return vec![0.0; d];
    }
    let (values, loadings) = principal_components(x);
    let total: f64 = values.iter().filter(|&&l| l >= MIN_EIGENVALUE).sum();
    let mut scores = vec![0.0; d];
    if total <= 0.0 {
        return scores;
    }
    for (c, &lambda) in values.iter().enumerate() {
        if lambda < MIN_EIGENVALUE {
            continue;
        }
        let evr = lambda / total;
        for (j, s) in scores.iter_mut().enumerate() {
            *s += loadings[(j, c)].abs() * evr;
        }
    }
    scores
}
