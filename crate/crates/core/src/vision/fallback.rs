//! Built-in part tables and the conservative synonym matcher used when no
//! language-model endpoint is configured.

use super::{LabelList, ProviderError, SynonymMap};

const TABLES: &[(&str, &[&str])] = &[
    ("airplane", &["body", "wings", "tail", "engine"]),
    ("chair", &["back", "seat", "leg", "arm"]),
    ("table", &["top", "leg"]),
    ("animal", &["head", "body", "leg", "tail"]),
];

pub fn builtin_labels(category: &str) -> Result<LabelList, ProviderError> {
    let key = category.trim().to_lowercase();
    TABLES
        .iter()
        .find(|(c, _)| *c == key)
        .map(|(_, labels)| LabelList::new(&key, labels.iter()).expect("tables are non-empty"))
        .ok_or(ProviderError::UnknownCategory(key))
}

/// Lowercased with one trailing plural `s` removed.
pub fn stem(label: &str) -> String {
    let l = label.trim().to_lowercase();
    match l.strip_suffix('s') {
        Some(s) if !s.is_empty() && !s.ends_with('s') => s.to_string(),
        _ => l,
    }
}

/// Exact match after lowercasing and plural stemming; anything else maps to `None`.
pub fn plural_synonyms(predicted: &[String], ground_truth: &[String]) -> SynonymMap {
    predicted
        .iter()
        .map(|p| {
            let target = ground_truth.iter().find(|g| stem(g) == stem(p)).cloned();
            (p.clone(), target)
        })
        .collect()
}
