use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabtext::ingest::{prepare, ColumnRule, DatasetManifest};
use tabtext::table::{Column, ColumnRole, TaskKind, Table, TargetSpec};
use tabtext::vetting::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn vet_table(name: &str) -> (DatasetManifest, Table) {
    let m = DatasetManifest::from_file(&fixtures().join(format!("vet/{name}.toml"))).unwrap();
    let (t, _) = prepare(&m).unwrap();
    (m, t)
}

#[test]
fn templates_match_golden_files() {
    let golden = |f: &str| fs::read_to_string(fixtures().join("prompts").join(f)).unwrap();
    assert_eq!(SIMILARITY_TEMPLATE, golden("similarity_template.txt"));
    assert_eq!(FITNESS_TEMPLATE, golden("fitness_template.txt"));
}

#[test]
fn prompts_are_deterministic_and_fully_substituted() {
    let (_, a) = vet_table("bikedekho");
    let (_, b) = vet_table("cars_24");
    let sa = SchemaSample::from_table(&a, SAMPLE_ROWS);
    let sb = SchemaSample::from_table(&b, SAMPLE_ROWS);
    let p1 = build_similarity_prompt(&sa, &sb);
    assert_eq!(p1, build_similarity_prompt(&SchemaSample::from_table(&a, SAMPLE_ROWS), &sb));
    for placeholder in ["{dataset1_name}", "{dataset2_name}", "{dataset1_values}", "{dataset2_values}", "{format_template}"] {
        assert!(!p1.contains(placeholder), "{placeholder} left in prompt");
    }
    assert!(p1.contains("listing_notes") && p1.contains("power_bhp"));
    let f = build_fitness_prompt(&sa);
    assert!(f.starts_with(FITNESS_TEMPLATE));
    assert!(f.contains("Target feature: price"));
}

#[test]
fn replayed_pair_parses_and_gives_directional_coverage() {
    let (_, a) = vet_table("bikedekho");
    let (_, b) = vet_table("cars_24");
    let client = ReplayClient::new(fixtures().join("vet/llm"));
    let report = compare_pair(&client, &a, &b).unwrap().normalized();
    assert_eq!(report.dataset_a, "bikedekho");
    assert_eq!(report.similar_pairs.len(), 7);
    assert_eq!(report.dissimilar_a, vec!["mileage_kmpl", "power_bhp"]);
    assert_eq!(report.dissimilar_b, vec!["fuel_type"]);
    assert!(report.similar_pairs.iter().any(|p| p.col_a == "description" && p.col_b == "listing_notes"));
    let (ab, ba) = directional_coverage(&report).unwrap();
    assert!((ab - 7.0 / 9.0).abs() < 1e-12);
    assert!((ba - 7.0 / 8.0).abs() < 1e-12);
    assert!(matches!(compare_pair(&client, &b, &a), Err(VetError::MissingFixture(_))));
}

#[test]
fn coverage_is_asymmetric_in_schema_size() {
    let pair = |i: usize| SimilarPair { col_a: format!("a{i}"), col_b: format!("b{i}"), reason: String::new() };
    let report = FeatureMatchReport {
        dataset_a: "small".into(),
        dataset_b: "wide".into(),
        similar_pairs: (0..7).map(pair).collect(),
        dissimilar_a: vec!["a7".into(), "a8".into()],
        dissimilar_b: (7..17).map(|i| format!("b{i}")).collect(),
    };
    let (ab, ba) = directional_coverage(&report).unwrap();
    assert!((ab - 7.0 / 9.0).abs() < 1e-12);
    assert!((ba - 7.0 / 17.0).abs() < 1e-12);
    let m = CoverageMatrix::from_reports(vec!["small".into(), "wide".into()], &[report]).unwrap();
    let b = binarize(&m, DEFAULT_THRESHOLD);
    assert_eq!(b.binary[0][1], Some(true));
    assert_eq!(b.binary[1][0], Some(false));
    assert_eq!(b.binary[0][0], None);
}

#[test]
fn replayed_fitness_verdicts() {
    let client = ReplayClient::new(fixtures().join("vet/llm"));
    let (_, bikes) = vet_table("bikedekho");
    let (_, cars) = vet_table("cars_24");
    assert_eq!(assess_fitness(&client, &bikes).unwrap().0, FitnessColor::Green);
    assert_eq!(assess_fitness(&client, &cars).unwrap().0, FitnessColor::Yellow);
}

#[test]
fn dual_signal_passes_when_text_and_numbers_both_carry_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 300;
    let labels: Vec<&str> = (0..n).map(|_| if rng.random_bool(0.5) { "up" } else { "down" }).collect();
    let x: Vec<f64> = labels.iter().map(|l| if *l == "up" { 1.0 } else { 0.0 } + rng.random_range(-0.8..0.8)).collect();
    let notes: Vec<String> = labels
        .iter()
        .map(|l| {
            let cue = if rng.random_bool(0.85) == (*l == "up") { "bright" } else { "dim" };
            format!("{cue} lamp {} shelf {}", rng.random_range(0..500), rng.random_range(0..40))
        })
        .collect();
    let colour: Vec<&str> = (0..n).map(|_| ["red", "blue"][rng.random_range(0..2)]).collect();
    let table = Table::new(
        "designed",
        vec![
            Column::numerical("x", x),
            Column::text("colour", ColumnRole::Categorical, colour),
            Column::text("notes", ColumnRole::Textual, notes),
            Column::text("label", ColumnRole::Categorical, labels),
        ],
        TargetSpec { column: "label".into(), task: TaskKind::BinaryClassification },
    );
    let manifest = DatasetManifest::new("designed", "designed.csv", "label", TaskKind::BinaryClassification);
    let checks = curation_checks(&manifest, &table, 3);
    let rules: Vec<CurationRule> = checks.iter().map(|c| c.rule).collect();
    assert_eq!(
        rules,
        [CurationRule::HasFreeText, CurationRule::DualSignalProxy, CurationRule::PredictiveTask, CurationRule::Accessible, CurationRule::DomainDiversity]
    );
    let dual = &checks[1];
    assert_eq!(dual.verdict, Verdict::Pass, "{}", dual.line());
    assert!(dual.heuristic && dual.line().contains("(heuristic, advisory)"));
    assert!(dual.detail.contains("notes") && dual.detail.contains("x ("));
    assert_eq!(checks[0].verdict, Verdict::Pass);
    assert_eq!(checks[3].verdict, Verdict::Manual);

    // Same table with the text cue removed: the text side no longer beats chance.
    let mut flat = table.clone();
    let idx = flat.column_index("notes").unwrap();
    let mut r2 = ChaCha8Rng::seed_from_u64(9);
    flat.columns[idx] = Column::text("notes", ColumnRole::Textual, (0..n).map(|_| format!("lamp {} shelf {}", r2.random_range(0..500), r2.random_range(0..40))));
    assert_eq!(curation_checks(&manifest, &flat, 3)[1].verdict, Verdict::Fail);
}

#[test]
fn rewritten_target_fails_predictive_task() {
    let (mut m, t) = vet_table("cars_24");
    assert_eq!(curation_checks(&m, &t, 1)[2].verdict, Verdict::Pass);
    m.column_rules.insert(m.target_column.clone(), ColumnRule { numeric_prefix: true, ..Default::default() });
    assert_eq!(curation_checks(&m, &t, 1)[2].verdict, Verdict::Fail);
}
