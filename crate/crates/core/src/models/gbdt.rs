//! Second-order gradient boosted trees with exact greedy splits.
//!
//! Each round fits a regression tree to the per-row gradient `g` and
//! hessian `h` of the loss. A split of a node with sums `(G, H)` into
//! `(G_L, H_L)` and `(G_R, H_R)` has gain
//!
//! ```text
//! 0.5 * (G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda))
//! ```
//!
//! and a leaf predicts `-G / (max(H, 1e-6) + lambda)`, scaled by the
//! learning rate. Trees grow level by level to `max_depth`.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use super::linear::{sigmoid, softmax_rows};

pub const LAMBDA: f64 = 1.0;
pub const HESSIAN_FLOOR: f64 = 1e-6;
/// Splits whose gain is below this are rejected; zero-gain splits are kept.
const MIN_GAIN: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Squared,
    Logistic,
    Softmax(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub objective: Objective,
    pub learning_rate: f64,
    /// One base score per output (classes for softmax).
    pub base: Vec<f64>,
    /// `trees[round][output]`.
    pub trees: Vec<Vec<Tree>>,
    /// Training loss before the first round and after every round.
    pub train_loss: Vec<f64>,
    pub n_features: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Builds one tree from gradients.
fn build_tree(x: &Array2<f64>, order: &[Vec<u32>], g: &[f64], h: &[f64], max_depth: usize, lr: f64) -> Tree {
    let n = x.nrows();
    let leaf_value = |gs: f64, hs: f64| -gs / (hs.max(HESSIAN_FLOOR) + LAMBDA) * lr;
    let mut nodes = vec![Node::Leaf(0.0)];
    // Per-node (G, H) for nodes still open at the current level.
    let mut open: Vec<(usize, f64, f64)> = vec![(0, g.iter().sum(), h.iter().sum())];
    // Position in `open` for each row, or usize::MAX when the row's node is closed.
    let mut slot_of_row = vec![0usize; n];

    for _depth in 0..max_depth {
        if open.is_empty() {
            break;
        }
        let m = open.len();
        let per_feature: Vec<Vec<Option<Candidate>>> = (0..x.ncols())
            .into_par_iter()
            .map(|j| {
                let col = x.column(j);
                let mut gl = vec![0.0; m];
                let mut hl = vec![0.0; m];
                let mut last = vec![f64::NAN; m];
                let mut best: Vec<Option<Candidate>> = vec![None; m];
                for &r in &order[j] {
                    let r = r as usize;
                    let s = slot_of_row[r];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[r];
                    if !last[s].is_nan() && v > last[s] {
                        let (_, gt, ht) = open[s];
                        let gain = 0.5
                            * (gl[s] * gl[s] / (hl[s] + LAMBDA) + (gt - gl[s]).powi(2) / (ht - hl[s] + LAMBDA)
                                - gt * gt / (ht + LAMBDA));
                        if best[s].is_none_or(|b| gain > b.gain) {
                            let mut threshold = last[s] + (v - last[s]) / 2.0;
                            if threshold <= last[s] {
                                threshold = v;
                            }
                            best[s] = Some(Candidate { gain, feature: j, threshold });
                        }
                    }
                    gl[s] += g[r];
                    hl[s] += h[r];
                    last[s] = v;
                }
                best
            })
            .collect();

        let mut chosen: Vec<Option<Candidate>> = vec![None; m];
        for feature_best in &per_feature {
            for (s, cand) in feature_best.iter().enumerate() {
                if let Some(c) = cand {
                    if chosen[s].is_none_or(|b| c.gain > b.gain) {
                        chosen[s] = Some(*c);
                    }
                }
            }
        }

        // children[s] = (left slot, right slot) in the next level
        let mut next_open = Vec::new();
        let mut children = vec![None; m];
        for (s, cand) in chosen.iter().enumerate() {
            let node_id = open[s].0;
            match cand {
                Some(c) if c.gain >= MIN_GAIN => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[node_id] = Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                    children[s] = Some((next_open.len(), c.feature, c.threshold));
                    next_open.push((left, 0.0, 0.0));
                    next_open.push((left + 1, 0.0, 0.0));
                }
                _ => {
                    let (_, gs, hs) = open[s];
                    nodes[node_id] = Node::Leaf(leaf_value(gs, hs));
                }
            }
        }
        for r in 0..n {
            let s = slot_of_row[r];
            if s == usize::MAX {
                continue;
            }
            slot_of_row[r] = match children[s] {
                Some((base, feature, threshold)) => {
                    let ns = if x[[r, feature]] < threshold { base } else { base + 1 };
                    next_open[ns].1 += g[r];
                    next_open[ns].2 += h[r];
                    ns
                }
                None => usize::MAX,
            };
        }
        open = next_open;
    }
    for (node_id, gs, hs) in open {
        nodes[node_id] = Node::Leaf(leaf_value(gs, hs));
    }
    Tree { nodes }
}

fn presort(x: &Array2<f64>) -> Vec<Vec<u32>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect()
}

fn loss(objective: Objective, raw: &Array2<f64>, y: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    let eps = 1e-300;
    match objective {
        Objective::Squared => raw.column(0).iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n,
        Objective::Logistic => {
            raw.column(0)
                .iter()
                .zip(y)
                .map(|(&f, &t)| {
                    let p = sigmoid(f);
                    -(t * (p + eps).ln() + (1.0 - t) * (1.0 - p + eps).ln())
                })
                .sum::<f64>()
                / n
        }
        Objective::Softmax(_) => {
            let mut p = raw.clone();
            softmax_rows(&mut p);
            y.iter().enumerate().map(|(i, &t)| -(p[[i, t as usize]] + eps).ln()).sum::<f64>() / n
        }
    }
}

/// `y` holds regression values or class codes as floats.
pub fn gbdt_fit(
    x: &Array2<f64>,
    y: &[f64],
    objective: Objective,
    max_depth: usize,
    learning_rate: f64,
    n_rounds: usize,
) -> GbdtModel {
    let n = x.nrows();
    let outputs = match objective {
        Objective::Softmax(c) => c,
        _ => 1,
    };
    let base: Vec<f64> = match objective {
        Objective::Squared => vec![y.iter().sum::<f64>() / n.max(1) as f64],
        Objective::Logistic => {
            let p = (y.iter().sum::<f64>() / n.max(1) as f64).clamp(1e-6, 1.0 - 1e-6);
            vec![(p / (1.0 - p)).ln()]
        }
        Objective::Softmax(c) => (0..c)
            .map(|k| {
                let count = y.iter().filter(|&&t| t as usize == k).count();
                ((count as f64 / n.max(1) as f64).max(1e-6)).ln()
            })
            .collect(),
    };
    let mut raw = Array2::from_shape_fn((n, outputs), |(_, k)| base[k]);
    let order = presort(x);
    let mut trees = Vec::with_capacity(n_rounds);
    let mut train_loss = vec![loss(objective, &raw, y)];
    for _ in 0..n_rounds {
        let grads: Vec<(Vec<f64>, Vec<f64>)> = match objective {
            Objective::Squared => {
                vec![(raw.column(0).iter().zip(y).map(|(p, t)| p - t).collect(), vec![1.0; n])]
            }
            Objective::Logistic => {
                let p: Vec<f64> = raw.column(0).iter().map(|&f| sigmoid(f)).collect();
                vec![(p.iter().zip(y).map(|(p, t)| p - t).collect(), p.iter().map(|p| p * (1.0 - p)).collect())]
            }
            Objective::Softmax(c) => {
                let mut p = raw.clone();
                softmax_rows(&mut p);
                (0..c)
                    .map(|k| {
                        let g = (0..n).map(|i| p[[i, k]] - f64::from(y[i] as usize == k)).collect();
                        let h = (0..n).map(|i| (p[[i, k]] * (1.0 - p[[i, k]])).max(HESSIAN_FLOOR)).collect();
                        (g, h)
                    })
                    .collect()
            }
        };
        let round: Vec<Tree> = grads
            .par_iter()
            .map(|(g, h)| build_tree(x, &order, g, h, max_depth, learning_rate))
            .collect();
        for (k, tree) in round.iter().enumerate() {
            for i in 0..n {
                raw[[i, k]] += tree.predict_row(x.row(i));
            }
        }
        trees.push(round);
        train_loss.push(loss(objective, &raw, y));
    }
    GbdtModel { objective, learning_rate, base, trees, train_loss, n_features: x.ncols() }
}

impl GbdtModel {
    /// Raw additive scores, `n x outputs`.
    pub fn raw_scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut raw = Array2::from_shape_fn((x.nrows(), self.base.len()), |(_, k)| self.base[k]);
        for round in &self.trees {
            for (k, tree) in round.iter().enumerate() {
                for (i, row) in x.rows().into_iter().enumerate() {
                    raw[[i, k]] += tree.predict_row(row);
                }
            }
        }
        raw
    }
}
