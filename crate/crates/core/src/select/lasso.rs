//! L1-penalized regression and classification.
//!
//! Lasso minimizes `(1/2n) ||y - X w||^2 + lambda ||w||_1` by cyclic
//! coordinate descent. With `c_j = x_j^T x_j / n` and the partial residual
//! correlation `rho_j = x_j^T r / n + c_j w_j`, each coordinate update is
//! `w_j = S(rho_j, lambda) / c_j`, where `S(z, t) = sign(z) max(|z| - t, 0)`.

use ndarray::{Array1, Array2, Axis};

use crate::models::{sigmoid, softmax_rows};

pub const TOL: f64 = 1e-6;
pub const MAX_SWEEPS: usize = 1000;
pub const PATH_POINTS: usize = 20;
pub const PATH_RATIO: f64 = 1e-3;

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// `max_j |x_j^T y| / n`: the smallest penalty with an all-zero solution.
pub fn lasso_lambda_max(x: &Array2<f64>, y: &[f64]) -> f64 {
    let n = x.nrows().max(1) as f64;
    let y = Array1::from(y.to_vec());
    x.t().dot(&y).iter().fold(0.0f64, |m, v| m.max(v.abs())) / n
}

/// Coordinate descent from `warm` (or zero).
pub fn lasso_cd(x: &Array2<f64>, y: &[f64], lambda: f64, warm: Option<&[f64]>) -> LassoFit {
    let (n, d) = x.dim();
    let nf = n.max(1) as f64;
    // Row j of `xt` is column j of `x`, contiguous.
    let xt = x.t().as_standard_layout().into_owned();
    let col_sq: Vec<f64> = xt.rows().into_iter().map(|c| c.dot(&c) / nf).collect();
    let mut w = warm.map_or_else(|| vec![0.0; d], <[f64]>::to_vec);
    let mut r = Array1::from(y.to_vec()) - x.dot(&Array1::from(w.clone()));
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                w[j] = 0.0;
                continue;
            }
            let xj = xt.row(j);
            let rho = xj.dot(&r) / nf + col_sq[j] * w[j];
            let new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &xj);
                w[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < TOL {
            converged = true;
            break;
        }
    }
    LassoFit { weights: w, lambda, sweeps, converged }
}

/// Log-spaced penalties from `lambda_max` down to `lambda_max * PATH_RATIO`.
pub fn lambda_path(lambda_max: f64) -> Vec<f64> {
    let lo = (lambda_max * PATH_RATIO).ln();
    let hi = lambda_max.ln();
    (0..PATH_POINTS)
        .map(|i| (hi + (lo - hi) * i as f64 / (PATH_POINTS - 1) as f64).exp())
        .collect()
}

fn nonzeros(w: &[f64]) -> usize {
    w.iter().filter(|v| **v != 0.0).count()
}

/// Walks the path with warm starts and stops at the first penalty giving at
/// least `k` nonzero weights (else the smallest penalty).
pub fn lasso_path_select(x: &Array2<f64>, y: &[f64], k: usize) -> LassoFit {
    let lmax = lasso_lambda_max(x, y);
    if lmax <= 0.0 {
        return LassoFit { weights: vec![0.0; x.ncols()], lambda: 0.0, sweeps: 0, converged: true };
    }
    let mut fit: Option<LassoFit> = None;
    let mut all_converged = true;
    for lambda in lambda_path(lmax) {
        let next = lasso_cd(x, y, lambda, fit.as_ref().map(|f| f.weights.as_slice()));
        all_converged &= next.converged;
        let done = nonzeros(&next.weights) >= k;
        fit = Some(next);
        if done {
            break;
        }
    }
    let mut fit = fit.expect("path is nonempty");
    fit.converged = all_converged;
    fit
}

/// L1-penalized logistic (binary) or softmax (multiclass) regression.
#[derive(Debug, Clone, PartialEq)]
pub struct L1LogisticFit {
    /// `outputs x d`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub lambda: f64,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a Array2<f64>,
    y: Array2<f64>,
    binary: bool,
}

impl Problem<'_> {
    fn new<'a>(x: &'a Array2<f64>, codes: &[usize], n_classes: usize) -> Problem<'a> {
        let binary = n_classes <= 2;
        let c = if binary { 1 } else { n_classes };
        let mut y = Array2::zeros((x.nrows(), c));
        for (i, &code) in codes.iter().enumerate() {
            if binary {
                y[[i, 0]] = code as f64;
            } else {
                y[[i, code]] = 1.0;
            }
        }
        Problem { x, y, binary }
    }

    fn probs(&self, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        let mut s = self.x.dot(&w.t()) + b;
        if self.binary {
            s.mapv_inplace(sigmoid);
        } else {
            softmax_rows(&mut s);
        }
        s
    }

    fn loss(&self, w: &Array2<f64>, b: &Array1<f64>) -> f64 {
        let p = self.probs(w, b);
        let eps = 1e-300;
        let n = self.x.nrows() as f64;
        let mut l = 0.0;
        for (pr, yr) in p.rows().into_iter().zip(self.y.rows()) {
            for (&pv, &yv) in pr.iter().zip(yr.iter()) {
                if self.binary {
                    l -= yv * (pv + eps).ln() + (1.0 - yv) * (1.0 - pv + eps).ln();
                } else if yv > 0.0 {
                    l -= (pv + eps).ln();
                }
            }
        }
        l / n
    }

    fn grad(&self, w: &Array2<f64>, b: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
        let n = self.x.nrows() as f64;
        let resid = self.probs(w, b) - &self.y;
        (resid.t().dot(self.x) / n, resid.sum_axis(Axis(0)) / n)
    }

    fn prior_bias(&self) -> Array1<f64> {
        let means = self.y.mean_axis(Axis(0)).expect("n >= 1");
        if self.binary {
            means.mapv(|p| {
                let p = p.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            })
        } else {
            means.mapv(|p| p.max(1e-6).ln())
        }
    }

    fn lambda_max(&self) -> f64 {
        let n = self.x.nrows() as f64;
        let centered = &self.y - &self.y.mean_axis(Axis(0)).expect("n >= 1");
        centered.t().dot(self.x).iter().fold(0.0f64, |m, v| m.max(v.abs())) / n
    }
}

/// Proximal gradient with backtracking.
fn prox_fit(p: &Problem, lambda: f64, warm: Option<&L1LogisticFit>) -> L1LogisticFit {
    let (c, d) = (p.y.ncols(), p.x.ncols());
    let (mut w, mut b) = match warm {
        Some(f) => (f.weights.clone(), f.bias.clone()),
        None => (Array2::zeros((c, d)), p.prior_bias()),
    };
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let f = p.loss(&w, &b);
        let (gw, gb) = p.grad(&w, &b);
        step *= 2.0;
        let (w_new, b_new) = loop {
            let mut cand = &w - &(&gw * step);
            cand.mapv_inplace(|v| soft_threshold(v, step * lambda));
            let b_cand = &b - &(&gb * step);
            let dw = &cand - &w;
            let db = &b_cand - &b;
            let lin = (&gw * &dw).sum() + (&gb * &db).sum();
            let quad = (dw.iter().chain(db.iter()).map(|v| v * v).sum::<f64>()) / (2.0 * step);
            if p.loss(&cand, &b_cand) <= f + lin + quad + 1e-15 || step < 1e-12 {
                break (cand, b_cand);
            }
            step *= 0.5;
        };
        let delta = w_new.iter().zip(w.iter()).chain(b_new.iter().zip(b.iter())).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = w_new;
        b = b_new;
        if delta < TOL {
            converged = true;
            break;
        }
    }
    L1LogisticFit { weights: w, bias: b, lambda, converged }
}

pub fn l1_logistic_fit(x: &Array2<f64>, codes: &[usize], n_classes: usize, lambda: f64) -> L1LogisticFit {
    prox_fit(&Problem::new(x, codes, n_classes), lambda, None)
}

/// Path variant of [`lasso_path_select`] for classification.
pub fn l1_logistic_path_select(x: &Array2<f64>, codes: &[usize], n_classes: usize, k: usize) -> L1LogisticFit {
    let p = Problem::new(x, codes, n_classes);
    let lmax = p.lambda_max();
    let mut fit: Option<L1LogisticFit> = None;
    let mut all_converged = true;
    if lmax <= 0.0 {
        return prox_fit(&p, 0.0, None);
    }
    for lambda in lambda_path(lmax) {
        let next = prox_fit(&p, lambda, fit.as_ref());
        all_converged &= next.converged;
        let active = (0..x.ncols()).filter(|&j| next.weights.column(j).iter().any(|v| *v != 0.0)).count();
        fit = Some(next);
        if active >= k {
            break;
        }
    }
    let mut fit = fit.expect("path is nonempty");
    fit.converged = all_converged;
    fit
}
