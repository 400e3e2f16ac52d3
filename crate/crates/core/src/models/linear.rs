use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::ModelError;

/// Linear model with intercept: `y = X w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeParams {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

/// Solves `(A + alpha I) z = rhs` for symmetric positive semi-definite `A`.
fn solve_spd(mut a: DMatrix<f64>, alpha: f64, rhs: DVector<f64>) -> Result<DVector<f64>, ModelError> {
    for i in 0..a.nrows() {
        a[(i, i)] += alpha;
    }
    let chol = a.cholesky().ok_or(ModelError::SingularSystem)?;
    // Rank deficiency survives factorization as a near-zero pivot.
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().copied().fold(0.0f64, f64::max);
    if diag.iter().any(|&v| v <= 1e-7 * max) {
        return Err(ModelError::SingularSystem);
    }
    let z = chol.solve(&rhs);
    if z.iter().all(|v| v.is_finite()) {
        Ok(z)
    } else {
        Err(ModelError::SingularSystem)
    }
}

/// Minimizes `||X w + b - y||^2 + alpha ||w||^2` in closed form; the
/// intercept is unpenalized. Uses the dual system when `d > n`.
pub fn ridge_fit(x: &Array2<f64>, y: &[f64], alpha: f64) -> Result<RidgeParams, ModelError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mu = column_means(x.view());
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = x - &mu;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let xm = to_dmatrix(&xc);
    let w = if d == 0 {
        DVector::zeros(0)
    } else if d <= n {
        let gram = xm.transpose() * &xm;
        let rhs = xm.transpose() * &yc;
        solve_spd(gram, alpha, rhs)?
    } else {
        let gram = &xm * xm.transpose();
        let z = solve_spd(gram, alpha, yc)?;
        xm.transpose() * z
    };
    let weights = Array1::from_iter(w.iter().copied());
    let intercept = y_mean - mu.dot(&weights);
    Ok(RidgeParams { weights, intercept })
}

impl RidgeParams {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// Weights are `classes x d`; binary problems keep a single row scoring
/// class 1 through a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub n_classes: usize,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl LogisticParams {
    fn scores(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }

    /// Class probabilities, `n x n_classes`.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut s = self.scores(x);
        if self.n_classes == 2 {
            let mut out = Array2::zeros((x.nrows(), 2));
            for (i, &z) in s.column(0).iter().enumerate() {
                let p = sigmoid(z);
                out[[i, 0]] = 1.0 - p;
                out[[i, 1]] = p;
            }
            out
        } else {
            softmax_rows(&mut s);
            s
        }
    }
}

struct LogisticProblem<'a> {
    x: &'a Array2<f64>,
    /// One-hot targets (binary: single column for class 1).
    y: Array2<f64>,
    l2: f64,
    binary: bool,
}

impl LogisticProblem<'_> {
    fn probs(&self, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        let mut s = self.x.dot(&w.t()) + b;
        if self.binary {
            s.mapv_inplace(sigmoid);
        } else {
            softmax_rows(&mut s);
        }
        s
    }

    fn objective(&self, w: &Array2<f64>, b: &Array1<f64>) -> f64 {
        let n = self.x.nrows() as f64;
        let p = self.probs(w, b);
        let eps = 1e-300;
        let mut loss = 0.0;
        for (pr, yr) in p.rows().into_iter().zip(self.y.rows()) {
            for (&pv, &yv) in pr.iter().zip(yr.iter()) {
                if self.binary {
                    loss -= yv * (pv + eps).ln() + (1.0 - yv) * (1.0 - pv + eps).ln();
                } else if yv > 0.0 {
                    loss -= (pv + eps).ln();
                }
            }
        }
        loss / n + self.l2 / (2.0 * n) * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &Array2<f64>, b: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
        let n = self.x.nrows() as f64;
        let resid = self.probs(w, b) - &self.y;
        let gw = resid.t().dot(self.x) / n + &(w * (self.l2 / n));
        let gb = resid.sum_axis(Axis(0)) / n;
        (gw, gb)
    }
}

/// L2-regularized logistic regression by gradient descent with
/// backtracking line search. Minimizes mean log loss plus
/// `l2 / (2n) ||W||^2`; the bias is unpenalized.
pub fn logistic_fit(
    x: &Array2<f64>,
    codes: &[usize],
    n_classes: usize,
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticParams, ModelError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let binary = n_classes == 2;
    let c = if binary { 1 } else { n_classes.max(1) };
    let mut y = Array2::zeros((n, c));
    for (i, &code) in codes.iter().enumerate() {
        if binary {
            y[[i, 0]] = code as f64;
        } else if code < c {
            y[[i, code]] = 1.0;
        }
    }
    let prob = LogisticProblem { x, y, l2, binary };
    let mut w = Array2::zeros((c, d));
    let mut b = Array1::zeros(c);
    let mut step = 1.0;
    let mut f = prob.objective(&w, &b);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let (gw, gb) = prob.gradient(&w, &b);
        let gmax = gw.iter().chain(gb.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < tol {
            converged = true;
            break;
        }
        let gsq: f64 = gw.iter().chain(gb.iter()).map(|v| v * v).sum();
        step *= 2.0;
        loop {
            let w_new = &w - &(&gw * step);
            let b_new = &b - &(&gb * step);
            let f_new = prob.objective(&w_new, &b_new);
            if f_new <= f - 0.5 * step * gsq || step < 1e-12 {
                w = w_new;
                b = b_new;
                f = f_new;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LogisticParams { weights: w, bias: b, n_classes, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ridge_recovers_noiseless_weights() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * (j + 3)) % 7) as f64 + 0.1 * i as f64);
        let y: Vec<f64> = x.rows().into_iter().map(|r| 2.0 * r[0] - r[1]).collect();
        let p = ridge_fit(&x, &y, 1e-10).unwrap();
        assert!((p.weights[0] - 2.0).abs() < 1e-6 && (p.weights[1] + 1.0).abs() < 1e-6);
        assert!(p.intercept.abs() < 1e-6);
    }

    #[test]
    fn ridge_dual_matches_primal_direction() {
        let x = Array2::from_shape_fn((3, 5), |(i, j)| ((i + 1) * (j + 2) % 5) as f64);
        let y = [1.0, -1.0, 0.5];
        let p = ridge_fit(&x, &y, 0.3).unwrap();
        // Stationarity of the penalized least-squares objective.
        let r = p.predict(&x) - Array1::from(y.to_vec());
        let g = x.t().dot(&r) * 2.0 + &p.weights * (2.0 * 0.3);
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn ridge_zero_alpha_rank_deficient_is_singular() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        assert!(matches!(ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0), Err(ModelError::SingularSystem)));
    }

    #[test]
    fn logistic_separates_1d() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let codes: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let p = logistic_fit(&x, &codes, 2, 1.0, 1000, 1e-6).unwrap();
        let proba = p.predict_proba(&x);
        for i in 0..10 {
            assert_eq!(usize::from(proba[[i, 1]] > 0.5), codes[i]);
        }
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let x = Array2::from_shape_fn((9, 2), |(i, j)| (i % 3) as f64 + 0.1 * j as f64 * i as f64);
        let codes: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let p = logistic_fit(&x, &codes, 3, 1.0, 200, 1e-6).unwrap();
        for row in p.predict_proba(&x).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}
