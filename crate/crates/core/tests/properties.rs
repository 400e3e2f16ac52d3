use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabtext::breaklab::{score_cell, synthetic_binary_table, BreakOptions, BreakScenario};
use tabtext::embed::{wordvec_avg_transform, tfidf_fit, tfidf_transform, Embedder, EmbedderKind, FeatureMatrix, FeaturePipeline, Provenance, Target, WordVecModel};
use tabtext::eval::{prepare_folds, run_experiment_on, ExperimentSpec};
use tabtext::ingest::{classify_column, general_preprocess, DatasetManifest};
use tabtext::models::{fit_predict, gbdt_fit, ridge_fit, ModelKind, Objective};
use tabtext::select::{select, SelectorKind};
use tabtext::table::{k_fold_split, Cell, Column, ColumnRole, TaskKind, Table, TargetSpec};
use tabtext::vetting::{binarize, directional_coverage, CoverageMatrix, FeatureMatchReport, SimilarPair, DEFAULT_THRESHOLD};

fn labelled(counts: &[usize]) -> Table {
    let labels: Vec<String> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(format!("c{c}"), n)).collect();
    let n = labels.len();
    let task = if counts.len() == 2 { TaskKind::BinaryClassification } else { TaskKind::MulticlassClassification };
    Table::new(
        "t",
        vec![Column::numerical("x", (0..n).map(|i| i as f64)), Column::text("y", ColumnRole::Categorical, labels)],
        TargetSpec { column: "y".into(), task },
    )
}

fn matrix(x: Array2<f64>, target: Target) -> FeatureMatrix {
    let provenance = (0..x.ncols()).map(|j| Provenance { source_column: format!("f{j}"), encoder: "num".into(), index: 0 }).collect();
    FeatureMatrix { matrix: x, provenance, target }
}

/// Binary table whose label is carried by a text token and weakly by `x`.
fn text_table(n: usize, seed: u64) -> Table {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "pos" } else { "neg" }).collect();
    let notes: Vec<String> = labels
        .iter()
        .map(|l| format!("{} unit {} area {}", if *l == "pos" { "fine" } else { "poor" }, r.random_range(0..300), r.random_range(0..30)))
        .collect();
    let x: Vec<f64> = labels.iter().map(|l| r.random_range(0.0..1.0) + if *l == "pos" { 0.2 } else { 0.0 }).collect();
    let shade: Vec<&str> = (0..n).map(|_| ["a", "b", "c"][r.random_range(0..3)]).collect();
    Table::new(
        "text",
        vec![
            Column::numerical("x", x),
            Column::text("shade", ColumnRole::Categorical, shade),
            Column::text("notes", ColumnRole::Textual, notes),
            Column::text("label", ColumnRole::Categorical, labels),
        ],
        TargetSpec { column: "label".into(), task: TaskKind::BinaryClassification },
    )
}

fn small_spec(model: ModelKind, with_text: bool, seed: u64) -> ExperimentSpec {
    let manifest = DatasetManifest::new("text", "text.csv", "label", TaskKind::BinaryClassification);
    let mut s = ExperimentSpec::new(manifest, EmbedderKind::tfidf(), model, with_text, seed);
    s.k_folds = 3;
    s
}

proptest! {
    #[test]
    fn folds_partition_rows_and_stratify(counts in prop::collection::vec(6usize..40, 2..5), k in 2usize..6, seed in any::<u64>()) {
        let t = labelled(&counts);
        let folds = k_fold_split(&t, k, seed).unwrap();
        prop_assert_eq!(folds.fold_of_row.len(), t.n_rows);
        let mut seen = vec![0usize; t.n_rows];
        for f in 0..k {
            let test = folds.test_rows(f);
            prop_assert!(!test.is_empty());
            for &r in &test {
                seen[r] += 1;
            }
            let mut per_class = BTreeMap::new();
            for &r in &test {
                *per_class.entry(r_class(&counts, r)).or_insert(0usize) += 1;
            }
            for (c, &n_c) in counts.iter().enumerate() {
                let got = *per_class.get(&c).unwrap_or(&0) as f64;
                prop_assert!((got - n_c as f64 / k as f64).abs() <= 1.0, "fold {} class {}: {} of {}", f, c, got, n_c);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn preprocessing_is_idempotent(rows in prop::collection::vec((0u8..4, prop::option::of(0u8..3), 0u8..2, prop::option::of(0u8..5)), 4..40)) {
        let col = |name: &str, v: Vec<Cell>| Column::new(name, None, v);
        let text = |s: String| Cell::Text(s);
        let table = Table::new(
            "raw",
            vec![
                col("a", rows.iter().map(|r| text(format!("a{}", r.0))).collect()),
                col("b", rows.iter().map(|r| r.1.map_or(Cell::Missing, |v| text(format!("b{v}")))).collect()),
                col("same", rows.iter().map(|_| text("k".into())).collect()),
                col("Unnamed: 0", rows.iter().map(|r| text(format!("{}", r.2))).collect()),
                col("y", rows.iter().map(|r| r.3.map_or(Cell::Missing, |v| text(format!("y{v}")))).collect()),
            ],
            TargetSpec { column: "y".into(), task: TaskKind::MulticlassClassification },
        );
        if let Ok((once, report)) = general_preprocess(table) {
            prop_assert!(report.dropped_reason("same").is_some());
            let (twice, again) = general_preprocess(once.clone()).unwrap();
            prop_assert_eq!(&twice, &once);
            prop_assert_eq!(again.rows_in, again.rows_out);
            prop_assert!(again.dropped_columns.is_empty());
        }
    }

    #[test]
    fn roles_survive_row_permutation(values in prop::collection::vec(0u32..200, 1..300), numeric in any::<bool>(), seed in any::<u64>()) {
        let cells: Vec<Cell> = values.iter().map(|&v| Cell::Text(if numeric { v.to_string() } else { format!("w{v}") })).collect();
        let n = cells.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let shuffled: Vec<Cell> = perm.iter().map(|&i| cells[i].clone()).collect();
        let a = classify_column(&Column::new("c", None, cells), n);
        let b = classify_column(&Column::new("c", None, shuffled), n);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unseen_tokens_embed_to_zero(train in prop::collection::vec("[a-f]{2,5}( [a-f]{2,5}){0,3}", 2..10), test in prop::collection::vec("[p-z]{2,5}( [p-z]{2,5}){0,3}", 1..5)) {
        let m = tfidf_fit(&train, 1, 2, 1000).unwrap();
        let block = tfidf_transform(&m, &test, "t");
        prop_assert!(block.matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn selection_ties_go_to_lower_index(n in 10usize..60, d in 2usize..8, dup in 0usize..8, seed in any::<u64>()) {
        let dup = dup % d;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::from_shape_fn((n, d + 1), |_| r.random_range(-1.0..1.0));
        let col = x.column(dup).to_owned();
        x.column_mut(d).assign(&col);
        let y: Vec<f64> = (0..n).map(|i| x[[i, dup]] * 5.0 + r.random_range(-0.01..0.01)).collect();
        let res = select(SelectorKind::Variance, &x, &Target::Regression(y), 1, seed).unwrap();
        let best = res.scores.iter().cloned().fold(f64::MIN, f64::max);
        let first = res.scores.iter().position(|&s| s == best).unwrap();
        prop_assert_eq!(&res.selected, &vec![first]);
        prop_assert!(res.selected.iter().all(|&j| j < d + 1));
        prop_assert!(res.selected[0] != d || res.scores[dup] < best);
    }

    #[test]
    fn coverage_is_a_fraction_and_binarized_at_half(s in 0usize..10, da in 0usize..10, db in 0usize..10) {
        prop_assume!(s + da > 0 && s + db > 0);
        let report = FeatureMatchReport {
            dataset_a: "a".into(),
            dataset_b: "b".into(),
            similar_pairs: (0..s).map(|i| SimilarPair { col_a: format!("a{i}"), col_b: format!("b{i}"), reason: String::new() }).collect(),
            dissimilar_a: (0..da).map(|i| format!("xa{i}")).collect(),
            dissimilar_b: (0..db).map(|i| format!("xb{i}")).collect(),
        };
        let (ab, ba) = directional_coverage(&report).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab) && (0.0..=1.0).contains(&ba));
        let m = binarize(&CoverageMatrix::from_reports(vec!["a".into(), "b".into()], &[report]).unwrap(), DEFAULT_THRESHOLD);
        prop_assert_eq!(m.binary[0][1], Some(ab >= 0.5));
        prop_assert_eq!(m.binary[1][0], Some(ba >= 0.5));
    }

    #[test]
    fn ridge_solution_zeroes_the_gradient(n in 3usize..40, d in 1usize..12, alpha in 0.01f64..10.0, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| r.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let p = ridge_fit(&x, &y, alpha).unwrap();
        let resid: Vec<f64> = (0..n).map(|i| x.row(i).dot(&p.weights) + p.intercept - y[i]).collect();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut g2 = resid.iter().sum::<f64>().powi(2) * 4.0;
        for j in 0..d {
            let gj = 2.0 * (0..n).map(|i| x[[i, j]] * resid[i]).sum::<f64>() + 2.0 * alpha * p.weights[j];
            g2 += gj * gj;
        }
        prop_assert!(g2.sqrt() < 1e-6 * (1.0 + y_norm), "gradient norm {}", g2.sqrt());
    }
}

fn r_class(counts: &[usize], row: usize) -> usize {
    let mut acc = 0;
    for (c, &n) in counts.iter().enumerate() {
        acc += n;
        if row < acc {
            return c;
        }
    }
    unreachable!()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gbdt_training_loss_never_increases(n in 8usize..80, classes in 1usize..4, depth in 1usize..5, lr in 0.05f64..1.0, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| r.random_range(-1.0..1.0));
        let (y, objective): (Vec<f64>, Objective) = match classes {
            1 => ((0..n).map(|i| x[[i, 0]] * 2.0 + r.random_range(-0.5..0.5)).collect(), Objective::Squared),
            2 => ((0..n).map(|i| (i % 2) as f64).collect(), Objective::Logistic),
            c => ((0..n).map(|i| (i % c) as f64).collect(), Objective::Softmax(c)),
        };
        let m = gbdt_fit(&x, &y, objective, depth, lr, 15);
        for w in m.train_loss.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn renaming_classes_renames_predictions(n in 12usize..60, model in 0usize..2, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
        let codes: Vec<usize> = (0..n).map(|i| if x[[i, 0]] + 0.3 * x[[i, 1]] > 0.0 { (i % 2) + 1 } else { 0 }).collect();
        prop_assume!((0..3).all(|c| codes.contains(&c)));
        let kind = if model == 0 { ModelKind::gbdt() } else { ModelKind::logistic() };
        let labels = vec!["ant".to_string(), "bee".to_string(), "cat".to_string()];
        // Same classes under names whose sorted order is reversed.
        let swap = |c: usize| 2 - c;
        let renamed = vec!["xu".to_string(), "yo".to_string(), "zed".to_string()];
        let a = matrix(x.clone(), Target::Classes { codes: codes.clone(), labels: labels.clone() });
        let b = matrix(x.clone(), Target::Classes { codes: codes.iter().map(|&c| swap(c)).collect(), labels: renamed.clone() });
        let pa = fit_predict(&kind, &a, &a, None).unwrap().0.label_strings();
        let pb = fit_predict(&kind, &b, &b, None).unwrap().0.label_strings();
        let map: BTreeMap<&str, &str> = [("ant", "zed"), ("bee", "yo"), ("cat", "xu")].into();
        for (u, v) in pa.iter().zip(&pb) {
            prop_assert_eq!(map[u.as_str()], v.as_str());
        }
    }

    #[test]
    fn synonym_tokens_embed_identically(words in prop::collection::vec(prop::sample::select(vec!["alpha", "beta", "gamma", "delta"]), 1..8)) {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "4 3\nalpha 0.1 0.7 -0.2\nbeta 0.1 0.7 -0.2\ngamma 0.9 -0.3 0.4\ndelta -0.5 0.2 0.8").unwrap();
        let model = WordVecModel::load(f.path()).unwrap();
        let text = words.join(" ");
        let swapped: String = words.iter().map(|w| match *w { "alpha" => "beta", "beta" => "alpha", o => o }).collect::<Vec<_>>().join(" ");
        let a = wordvec_avg_transform(&model, &[text], "t");
        let b = wordvec_avg_transform(&model, &[swapped], "t");
        prop_assert_eq!(a.matrix, b.matrix);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fitted_pipeline_ignores_test_rows(seed in any::<u64>(), fold in 0usize..3) {
        let table = text_table(90, seed);
        let folds = k_fold_split(&table, 3, seed).unwrap();
        let train_rows = folds.train_rows(fold);
        let embedder = Embedder::without_resources(&EmbedderKind::tfidf()).unwrap();
        let fit = |t: &Table| FeaturePipeline::fit(&t.take_rows(&train_rows), &embedder, true, 5).unwrap().fingerprint();
        let base = fit(&table);
        let mut mutated = table.clone();
        let notes = mutated.column_index("notes").unwrap();
        let x = mutated.column_index("x").unwrap();
        for r in folds.test_rows(fold) {
            mutated.columns[notes].values[r] = Cell::Text("completely novel words here".into());
            mutated.columns[x].values[r] = Cell::Num(1e6);
        }
        prop_assert_eq!(fit(&mutated), base);
    }

    #[test]
    fn regression_test_targets_change_only_the_metric(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + r.random_range(-0.1..0.1)).collect();
        let table = Table::new("reg", vec![Column::numerical("x", x), Column::numerical("y", y)], TargetSpec { column: "y".into(), task: TaskKind::Regression });
        let manifest = DatasetManifest::new("reg", "reg.csv", "y", TaskKind::Regression);
        let mut spec = ExperimentSpec::new(manifest, EmbedderKind::tfidf(), ModelKind::ridge(), false, seed);
        spec.k_folds = 3;
        let base = run_experiment_on(&table, &spec).unwrap();
        let (sub, folds) = prepare_folds(&table, &spec).unwrap();
        let mut mutated = table.clone();
        for r in folds.test_rows(0) {
            mutated.columns[1].values[sub.row_ids[r]] = Cell::Num(-50.0 - r as f64);
        }
        let after = run_experiment_on(&mutated, &spec).unwrap();
        prop_assert_eq!(&after.fold_fingerprints[0], &base.fold_fingerprints[0]);
        prop_assert!(after.per_fold[0] != base.per_fold[0]);
    }

    #[test]
    fn identical_specs_reproduce_bitwise(seed in any::<u64>()) {
        let table = text_table(90, seed);
        let spec = small_spec(ModelKind::Gbdt { max_depth: 3, learning_rate: 0.3, n_rounds: 10 }, true, seed);
        let a = run_experiment_on(&table, &spec).unwrap();
        let b = run_experiment_on(&table, &spec).unwrap();
        prop_assert_eq!(a.per_fold.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.per_fold.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.fold_fingerprints, b.fold_fingerprints);
    }

    #[test]
    fn text_never_narrows_the_matrix(seed in any::<u64>(), fold in 0usize..3) {
        let table = text_table(60, seed);
        let folds = k_fold_split(&table, 3, seed).unwrap();
        let train = table.take_rows(&folds.train_rows(fold));
        let embedder = Embedder::without_resources(&EmbedderKind::hashed()).unwrap();
        let with = FeaturePipeline::fit(&train, &embedder, true, 1).unwrap().transform(&train).unwrap();
        let without = FeaturePipeline::fit(&train, &embedder, false, 1).unwrap().transform(&train).unwrap();
        prop_assert!(with.n_cols() >= without.n_cols());
        prop_assert!(without.text_columns().is_empty());
    }

    #[test]
    fn complete_leak_tops_every_scenario(seed in 0u64..1000) {
        let table = synthetic_binary_table(seed);
        let opts = BreakOptions { scenarios: BreakScenario::standard(), subsample: 200, test_fraction: 0.3, seed };
        let emb = Embedder::prepare(&EmbedderKind::tfidf(), &table).unwrap();
        let kind = ModelKind::Gbdt { max_depth: 3, learning_rate: 0.3, n_rounds: 20 };
        let leak = score_cell(&table, &emb, &kind, BreakScenario::CompleteLeak, &opts).unwrap();
        for s in BreakScenario::standard() {
            let acc = score_cell(&table, &emb, &kind, s, &opts).unwrap();
            prop_assert!(leak >= acc, "{:?}: {} > leak {}", s, acc, leak);
        }
    }
}
