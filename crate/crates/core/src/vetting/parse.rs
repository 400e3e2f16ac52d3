use serde_json::Value;

use super::{FeatureMatchReport, SimilarPair, VetError};

/// Drops code-fence lines, `...` placeholders and the trailing commas
/// they leave behind. String contents are left alone.
fn clean(raw: &str) -> String {
    let unfenced: String =
        raw.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n");
    let chars: Vec<char> = unfenced.chars().collect();
    let mut out = String::with_capacity(chars.len());
    let mut in_str = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
            out.push(c);
        } else if c == '.' && chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.') {
            i += 2;
        } else {
            out.push(c);
        }
        i += 1;
    }
    strip_trailing_commas(&out)
}

fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(chars.len());
    let mut in_str = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
            out.push(c);
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            let prev = out.chars().rev().find(|c| !c.is_whitespace());
            let dangling = matches!(next, Some(']') | Some('}') | None) || matches!(prev, Some('[') | Some('{') | Some(','));
            if !dangling {
                out.push(c);
            }
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

/// End (exclusive) of the balanced `{...}` starting at `start`.
fn object_end(chars: &[char], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate().skip(start) {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts the first JSON object from free text.
pub fn extract_json_object(raw: &str) -> Result<Value, VetError> {
    let cleaned = clean(raw);
    let chars: Vec<char> = cleaned.chars().collect();
    let start = chars.iter().position(|&c| c == '{').ok_or_else(|| VetError::MalformedResponse("no JSON object found".into()))?;
    // A bare `"key": { ... }` member, as in the sample reply, is wrapped.
    let prefix: String = chars[..start].iter().collect();
    let line = prefix[prefix.rfind('\n').map_or(0, |p| p + 1)..].trim();
    let end = object_end(&chars, start).ok_or_else(|| VetError::MalformedResponse("unbalanced braces".into()))?;
    let body: String = chars[start..end].iter().collect();
    if line.starts_with('"') && line.ends_with(':') {
        if let Ok(v) = serde_json::from_str::<Value>(&format!("{{{line} {body}}}")) {
            return Ok(v);
        }
    }
    serde_json::from_str(&body).map_err(|e| VetError::MalformedResponse(format!("invalid JSON: {e}")))
}

fn column_name(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Object(m) => match m.get("col_name") {
            Some(Value::String(s)) => Some(s.clone()),
            _ => m.keys().next().cloned(),
        },
        _ => None,
    }
}

fn malformed(msg: &str) -> VetError {
    VetError::MalformedResponse(msg.to_string())
}

/// Parses a feature-match reply. Dataset names come from a `"A vs B"`
/// wrapper key when present, else stay empty.
pub fn parse_match_response(raw: &str) -> Result<FeatureMatchReport, VetError> {
    let root = extract_json_object(raw)?;
    let (names, body) = match root.get("similar_features") {
        Some(_) => ((String::new(), String::new()), &root),
        None => {
            let obj = root.as_object().ok_or_else(|| malformed("top level is not an object"))?;
            let (key, inner) = obj
                .iter()
                .find(|(_, v)| v.get("similar_features").is_some())
                .ok_or_else(|| malformed("missing \"similar_features\""))?;
            let names = match key.split_once(" vs ") {
                Some((a, b)) => (a.trim().to_string(), b.trim().to_string()),
                None => (String::new(), String::new()),
            };
            (names, inner)
        }
    };
    let similar = body["similar_features"].as_array().ok_or_else(|| malformed("\"similar_features\" is not a list"))?;
    let mut pairs = Vec::new();
    for entry in similar {
        let a = entry.get("dataset1_col_name").and_then(column_name);
        let b = entry.get("dataset2_col_name").and_then(column_name);
        let (Some(col_a), Some(col_b)) = (a, b) else {
            return Err(malformed("similar pair without both column names"));
        };
        let reason = entry.get("reason").and_then(Value::as_str).unwrap_or_default().to_string();
        pairs.push(SimilarPair { col_a, col_b, reason });
    }
    let dis = body.get("dissimilar_features").ok_or_else(|| malformed("missing \"dissimilar_features\""))?;
    let side = |key: &str| -> Result<Vec<String>, VetError> {
        let list = dis.get(key).and_then(Value::as_array).ok_or_else(|| malformed(&format!("missing dissimilar \"{key}\" list")))?;
        list.iter().map(|v| column_name(v).ok_or_else(|| malformed("dissimilar entry without a column name"))).collect()
    };
    let report = FeatureMatchReport {
        dataset_a: names.0,
        dataset_b: names.1,
        similar_pairs: pairs,
        dissimilar_a: side("dataset1")?,
        dissimilar_b: side("dataset2")?,
    };
    Ok(report.normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FitnessColor {
    Green,
    Yellow,
    Red,
}

fn word_at(text: &[u8], i: usize, len: usize) -> bool {
    let before = i == 0 || !text[i - 1].is_ascii_alphanumeric();
    let after = i + len >= text.len() || !text[i + len].is_ascii_alphanumeric();
    before && after
}

/// First whole-word GREEN / YELLOW / RED (any case) and the text after it.
pub fn parse_fitness_response(raw: &str) -> Result<(FitnessColor, String), VetError> {
    let lower = raw.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<(usize, usize, FitnessColor)> = None;
    for (word, color) in [("green", FitnessColor::Green), ("yellow", FitnessColor::Yellow), ("red", FitnessColor::Red)] {
        let hit = lower.match_indices(word).map(|(i, _)| i).find(|&i| word_at(bytes, i, word.len()));
        if let Some(i) = hit {
            if best.is_none_or(|(j, _, _)| i < j) {
                best = Some((i, word.len(), color));
            }
        }
    }
    let (i, len, color) = best.ok_or(VetError::NoVerdictFound)?;
    let rest = raw[i + len..].trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ':' | '-' | '.'));
    Ok((color, rest.trim_end().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = r#""carte_ramen_ratings vs carte_coffee_ratings": {
    "similar_features": [
        {
            "dataset1_col_name": {"Brand": "MIT"},
            "dataset2_col_name": {"roaster": "A.R.C."},
            "reason": "Both represent the product's manufacturer or origin."
        },
        ...
    ],
    "dissimilar_features": {
        "dataset1": [{"col_name": "Style", ...}],
        "dataset2": [{"col_name": "origin", ...}]
    }
}"#;

    #[test]
    fn parses_sample_reply_with_placeholders() {
        let r = parse_match_response(LISTING).unwrap();
        assert_eq!(r.dataset_a, "carte_ramen_ratings");
        assert_eq!(r.similar_pairs.len(), 1);
        assert_eq!((r.similar_pairs[0].col_a.as_str(), r.similar_pairs[0].col_b.as_str()), ("Brand", "roaster"));
        assert_eq!(r.dissimilar_a, vec!["Style"]);
        assert_eq!(r.dissimilar_b, vec!["origin"]);
    }

    #[test]
    fn fenced_reply_with_prose() {
        let raw = "Here you go:\n```json\n{\"similar_features\": [], \"dissimilar_features\": {\"dataset1\": [\"a\"], \"dataset2\": []}, \"extra\": 1}\n```\nThanks";
        let r = parse_match_response(raw).unwrap();
        assert!(r.similar_pairs.is_empty());
        assert_eq!(r.dissimilar_a, vec!["a"]);
    }

    #[test]
    fn ellipsis_inside_strings_survives() {
        let raw = r#"{"similar_features": [{"dataset1_col_name": "a", "dataset2_col_name": "b", "reason": "wait..."}], "dissimilar_features": {"dataset1": [], "dataset2": []}}"#;
        assert_eq!(parse_match_response(raw).unwrap().similar_pairs[0].reason, "wait...");
    }

    #[test]
    fn non_json_is_malformed() {
        assert!(matches!(parse_match_response("no idea"), Err(VetError::MalformedResponse(_))));
        assert!(matches!(parse_match_response("{\"similar_features\": 3}"), Err(VetError::MalformedResponse(_))));
    }

    #[test]
    fn verdicts() {
        assert_eq!(parse_fitness_response("Classification: GREEN\n\nAnalysis").unwrap().0, FitnessColor::Green);
        let (c, rest) = parse_fitness_response("Final Rating: RED: Only condition 1 is clearly met.").unwrap();
        assert_eq!(c, FitnessColor::Red);
        assert_eq!(rest, "Only condition 1 is clearly met.");
        assert_eq!(parse_fitness_response("it was considered reduced, then yellow").unwrap().0, FitnessColor::Yellow);
        assert!(matches!(parse_fitness_response("no verdict here"), Err(VetError::NoVerdictFound)));
    }
}
