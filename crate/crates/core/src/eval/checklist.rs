//! Checklist coverage: greedy one-to-one matching of module descriptions to
//! required items.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::describe::ModuleDescription;
use super::{normalize, EvalError, Judge};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    pub topic: String,
    #[serde(rename = "item", default)]
    pub items: Vec<ChecklistItem>,
}

impl Checklist {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let list: Checklist = toml::from_str(text).map_err(|e| EvalError::ChecklistFormat(e.to_string()))?;
        list.validate()?;
        Ok(list)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::ChecklistFormat(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.items.is_empty() {
            return Err(EvalError::EmptyChecklist);
        }
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            if !seen.insert(item.id.as_str()) {
                return Err(EvalError::DuplicateItem(item.id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMatch {
    pub item_id: String,
    /// Index into the description list.
    pub description: Option<usize>,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistResult {
    pub topic: String,
    pub items: Vec<ItemMatch>,
    pub descriptions: Vec<ModuleDescription>,
    /// Description indices matched to no item.
    pub unmatched_descriptions: Vec<usize>,
    pub matched: usize,
    pub total: usize,
    pub completion_rate: f64,
}

/// Decides whether a description satisfies an item. `Some(confidence)` is a
/// match candidate; higher confidences are assigned first.
pub trait Matcher {
    fn confidence(&self, item: &ChecklistItem, description: &ModuleDescription) -> Result<Option<f64>, EvalError>;
}

impl<F> Matcher for F
where
    F: Fn(&ChecklistItem, &ModuleDescription) -> Option<f64>,
{
    fn confidence(&self, item: &ChecklistItem, description: &ModuleDescription) -> Result<Option<f64>, EvalError> {
        Ok(self(item, description))
    }
}

/// Matches exactly when the normalized strings are equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatcher;

impl Matcher for ExactMatcher {
    fn confidence(&self, item: &ChecklistItem, description: &ModuleDescription) -> Result<Option<f64>, EvalError> {
        Ok((normalize(&item.description) == normalize(&description.text)).then_some(1.0))
    }
}

/// Asks a judge model per (item, description) pair; a positive Yes/No key is
/// a match and the key is its confidence.
#[derive(Debug, Clone)]
pub struct ModelMatcher<'a> {
    pub judge: Judge<'a>,
}

pub fn matching_prompt(item: &ChecklistItem, description: &ModuleDescription) -> String {
    format!(
        "A checklist lists what an interactive website about a research topic must contain.\n\n\
         Checklist item: {}\nModule description: {}\n\n\
         Does the described module fulfil this checklist item? Answer with one word: Yes or No.\n",
        item.description, description.text
    )
}

impl Matcher for ModelMatcher<'_> {
    fn confidence(&self, item: &ChecklistItem, description: &ModuleDescription) -> Result<Option<f64>, EvalError> {
        let key = self.judge.score(matching_prompt(item, description), &[])?.ranking_key;
        Ok((key > 0.0).then_some(key))
    }
}

pub fn match_checklist(descriptions: &[ModuleDescription], checklist: &Checklist, matcher: &dyn Matcher) -> Result<ChecklistResult, EvalError> {
    checklist.validate()?;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, item) in checklist.items.iter().enumerate() {
        for (d, desc) in descriptions.iter().enumerate() {
            if let Some(c) = matcher.confidence(item, desc)? {
                pairs.push((c, i, d));
            }
        }
    }
    // Highest confidence first; ties by item order, then description order.
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut items: Vec<ItemMatch> = checklist
        .items
        .iter()
        .map(|i| ItemMatch { item_id: i.id.clone(), description: None, confidence: None })
        .collect();
    let mut used = vec![false; descriptions.len()];
    for (c, i, d) in pairs {
        if items[i].description.is_none() && !used[d] {
            items[i].description = Some(d);
            items[i].confidence = Some(c);
            used[d] = true;
        }
    }
    let matched = items.iter().filter(|m| m.description.is_some()).count();
    let total = items.len();
    Ok(ChecklistResult {
        topic: checklist.topic.clone(),
        items,
        descriptions: descriptions.to_vec(),
        unmatched_descriptions: (0..descriptions.len()).filter(|d| !used[*d]).collect(),
        matched,
        total,
        completion_rate: matched as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(n: usize) -> Checklist {
        Checklist {
            topic: "T".into(),
            items: (1..=n).map(|i| ChecklistItem { id: format!("t-{i}"), description: format!("Item {i}: does thing {i}") }).collect(),
        }
    }

    fn desc(text: &str) -> ModuleDescription {
        ModuleDescription { module: None, text: text.into() }
    }

    #[test]
    fn three_of_four_matched() {
        let matcher = |item: &ChecklistItem, d: &ModuleDescription| (item.id != "t-4" && d.text == item.id).then_some(0.9);
        let descs: Vec<_> = ["t-1", "t-2", "t-3", "t-9"].into_iter().map(desc).collect();
        let r = match_checklist(&descs, &list(4), &matcher).unwrap();
        assert_eq!((r.matched, r.total, r.completion_rate), (3, 4, 0.75));
        assert_eq!(r.unmatched_descriptions, vec![3]);
    }

    #[test]
    fn empty_and_duplicate_checklists_are_rejected() {
        assert!(matches!(match_checklist(&[], &list(0), &ExactMatcher), Err(EvalError::EmptyChecklist)));
        let mut dup = list(2);
        dup.items[1].id = "t-1".into();
        assert!(matches!(match_checklist(&[], &dup, &ExactMatcher), Err(EvalError::DuplicateItem(_))));
    }

    #[test]
    fn exact_oracle_five_of_six() {
        let items = list(6);
        let mut descs: Vec<ModuleDescription> = items.items.iter().map(|i| desc(&i.description.to_uppercase())).collect();
        descs[2] = desc("Something else entirely");
        let r = match_checklist(&descs, &items, &ExactMatcher).unwrap();
        assert_eq!(r.matched, 5);
        assert_eq!(r.completion_rate, 5.0 / 6.0);
    }

    #[test]
    fn one_description_satisfies_at_most_one_item() {
        let greedy = |_: &ChecklistItem, _: &ModuleDescription| Some(1.0);
        let r = match_checklist(&[desc("anything")], &list(3), &greedy).unwrap();
        assert_eq!(r.matched, 1);
        assert_eq!(r.items[0].description, Some(0));
        let conf = |i: &ChecklistItem, _: &ModuleDescription| Some(if i.id == "t-2" { 0.8 } else { 0.3 });
        let r = match_checklist(&[desc("x")], &list(3), &conf).unwrap();
        assert_eq!(r.items[1].description, Some(0));
    }

    #[test]
    fn toml_round_trip() {
        let text = std::fs::read_to_string(crate::testkit::assets_dir().join("benchmark/checklists/ML-GD.toml")).unwrap();
        let c = Checklist::parse(&text).unwrap();
        assert_eq!(c.items.len(), 6);
        assert_eq!(Checklist::parse(&toml::to_string(&c).unwrap()).unwrap(), c);
        assert!(matches!(Checklist::parse("topic = \"x\""), Err(EvalError::EmptyChecklist)));
    }

    proptest! {
        #[test]
        fn rate_times_total_is_matched(n in 1usize..12, m in 0usize..12, seed in any::<u64>()) {
            let matcher = move |i: &ChecklistItem, d: &ModuleDescription| {
                let h = crate::digest::sha256_hex(format!("{seed}{}{}", i.id, d.text).as_bytes());
                h.as_bytes()[0].is_multiple_of(3).then(|| f64::from(h.as_bytes()[1]))
            };
            let descs: Vec<_> = (0..m).map(|j| desc(&format!("d{j}"))).collect();
            let r = match_checklist(&descs, &list(n), &matcher).unwrap();
            prop_assert_eq!((r.completion_rate * r.total as f64).round() as usize, r.matched);
            prop_assert!(r.matched <= n.min(m));
            let mut used: Vec<usize> = r.items.iter().filter_map(|i| i.description).collect();
            used.sort_unstable();
            let len = used.len();
            used.dedup();
            prop_assert_eq!(used.len(), len);
        }
    }
}
