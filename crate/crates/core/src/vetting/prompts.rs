use crate::table::{Cell, Table, TaskKind};

use super::templates::{FITNESS_TEMPLATE, SIMILARITY_TEMPLATE};

/// Rows shown per dataset in prompts.
pub const SAMPLE_ROWS: usize = 3;

/// Column names plus the first few values of each, as shown to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaSample {
    pub name: String,
    pub columns: Vec<(String, Vec<String>)>,
    pub target: Option<(String, TaskKind)>,
}

fn cell_text(c: &Cell) -> String {
    c.as_label().unwrap_or_default()
}

impl SchemaSample {
    pub fn from_table(table: &Table, rows: usize) -> Self {
        let take = rows.min(table.n_rows);
        SchemaSample {
            name: table.name.clone(),
            columns: table
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.values[..take].iter().map(cell_text).collect()))
                .collect(),
            target: Some((table.target.column.clone(), table.task())),
        }
    }

    /// One `"column": ["v1", "v2", ...]` line per column.
    pub fn values_block(&self) -> String {
        self.columns
            .iter()
            .map(|(name, vals)| {
                format!("{}: {}", serde_json::to_string(name).expect("string"), serde_json::to_string(vals).expect("strings"))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn format_template(a: &str, b: &str) -> String {
    format!(
        r#""{a} vs {b}": {{
    "similar_features": [
        {{
            "dataset1_col_name": {{"<column>": "<example value>"}},
            "dataset2_col_name": {{"<column>": "<example value>"}},
            "reason": "<why both columns represent the same concept>"
        }}
    ],
    "dissimilar_features": {{
        "dataset1": [{{"col_name": "<column>"}}],
        "dataset2": [{{"col_name": "<column>"}}]
    }}
}}"#
    )
}

pub fn build_similarity_prompt(a: &SchemaSample, b: &SchemaSample) -> String {
    SIMILARITY_TEMPLATE
        .replace("{format_template}", &format_template(&a.name, &b.name))
        .replace("{dataset1_values}", &a.values_block())
        .replace("{dataset2_values}", &b.values_block())
        .replace("{dataset1_name}", &a.name)
        .replace("{dataset2_name}", &b.name)
}

/// The fitness instructions followed by the dataset description.
pub fn build_fitness_prompt(s: &SchemaSample) -> String {
    let mut out = FITNESS_TEMPLATE.to_string();
    out.push_str(&format!("\nDataset: {}\n", s.name));
    let names: Vec<&str> = s.columns.iter().map(|(n, _)| n.as_str()).collect();
    out.push_str(&format!("Columns: {}\n", names.join(", ")));
    if let Some((target, task)) = &s.target {
        out.push_str(&format!("Target feature: {target} ({})\n", task.tag()));
    }
    out.push_str("First rows:\n");
    let rows = s.columns.first().map_or(0, |(_, v)| v.len());
    for r in 0..rows {
        let vals: Vec<&str> = s.columns.iter().map(|(_, v)| v[r].as_str()).collect();
        out.push_str(&serde_json::to_string(&vals).expect("strings"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(name: &str) -> SchemaSample {
        SchemaSample {
            name: name.into(),
            columns: vec![("Brand".into(), vec!["MIT".into()]), ("Stars".into(), vec!["4.5".into()])],
            target: Some(("Stars".into(), TaskKind::Regression)),
        }
    }

    #[test]
    fn similarity_prompt_contents() {
        let p = build_similarity_prompt(&sample("ramen"), &sample("coffee"));
        assert!(p.contains("Find Similar Features"));
        assert!(p.contains("ramen") && p.contains("coffee"));
        assert!(p.contains(r#""Brand": ["MIT"]"#));
        assert!(!p.contains("{dataset"));
        assert_eq!(p, build_similarity_prompt(&sample("ramen"), &sample("coffee")));
    }

    #[test]
    fn fitness_prompt_lists_target() {
        let p = build_fitness_prompt(&sample("beer"));
        assert!(p.starts_with(FITNESS_TEMPLATE));
        assert!(p.contains("Target feature: Stars (reg)"));
        assert!(p.contains("Columns: Brand, Stars"));
    }
}
