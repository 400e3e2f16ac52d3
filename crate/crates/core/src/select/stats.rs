use ndarray::Array2;

use super::SelectError;

pub const EPS: f64 = 1e-12;

/// Per-class sample indices, for codes in `0..n_classes`.
fn groups(codes: &[usize]) -> Vec<Vec<usize>> {
    let n_classes = codes.iter().copied().max().map_or(0, |m| m + 1);
    let mut g = vec![Vec::new(); n_classes];
    for (i, &c) in codes.iter().enumerate() {
        g[c].push(i);
    }
    g.retain(|v| !v.is_empty());
    g
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss = values.map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss, n)
}

/// `|t|` of Welch's statistic per column.
pub fn ttest_scores(x: &Array2<f64>, codes: &[usize]) -> Result<Vec<f64>, SelectError> {
    let g = groups(codes);
    if g.len() != 2 || g.iter().any(|v| v.len() < 2) {
        return Err(SelectError::NotBinary);
    }
    let (g0, g1) = (&g[0], &g[1]);
    Ok((0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let (m0, ss0, n0) = mean_var(g0.iter().map(|&i| col[i]));
            let (m1, ss1, n1) = mean_var(g1.iter().map(|&i| col[i]));
            let v0 = ss0 / (n0 - 1) as f64;
            let v1 = ss1 / (n1 - 1) as f64;
            ((m1 - m0) / (v1 / n1 as f64 + v0 / n0 as f64 + EPS).sqrt()).abs()
        })
        .collect())
}

/// One-way ANOVA F statistic per column.
pub fn anova_scores(x: &Array2<f64>, codes: &[usize]) -> Result<Vec<f64>, SelectError> {
    let g = groups(codes);
    if g.len() < 2 || g.iter().any(|v| v.len() < 2) {
        return Err(SelectError::DegenerateClasses);
    }
    let n = codes.len() as f64;
    let k = g.len() as f64;
    Ok((0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let grand = col.sum() / n;
            let mut between = 0.0;
            let mut within = 0.0;
            for members in &g {
                let (m, ss, cnt) = mean_var(members.iter().map(|&i| col[i]));
                between += cnt as f64 * (m - grand).powi(2);
                within += ss;
            }
            let msb = between / (k - 1.0);
            let msw = within / (n - k);
            msb / (msw + EPS)
        })
        .collect())
}

/// Population variance per column.
pub fn variance_scores(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows().max(1) as f64;
    x.columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.len() < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn welch_t_hand_value() {
        let x = array![[0.0], [0.1], [1.0], [1.1]];
        let t = ttest_scores(&x, &[0, 0, 1, 1]).unwrap()[0];
        let expected = 1.0 / (0.005f64 / 2.0 + 0.005 / 2.0).sqrt();
        assert!((t - expected).abs() < 1e-6, "{t} vs {expected}");
        assert!((t - 14.142).abs() < 1e-3);
    }

    #[test]
    fn identical_feature_scores_zero() {
        let x = array![[1.0], [2.0], [1.0], [2.0]];
        assert_eq!(ttest_scores(&x, &[0, 0, 1, 1]).unwrap()[0], 0.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn anova_requires_two_classes() {
        let x = array![[1.0], [2.0], [3.0]];
        assert!(matches!(anova_scores(&x, &[0, 0, 0]), Err(SelectError::DegenerateClasses)));
    }
}
