use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{LayerId, Taxonomy};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Antecedent {
    Always,
    /// Named value ranked within the top `k`.
    ItemInTop { item: String, k: usize },
    /// Named higher-order category has the highest mean rank score; ties go
    /// to the category appearing first in the taxonomy.
    CategoryDominant { category: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consequent {
    pub layer: LayerId,
    pub prefer: String,
    pub over: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub id: String,
    #[serde(default)]
    pub provenance: String,
    pub antecedent: Antecedent,
    pub consequents: Vec<Consequent>,
}

/// Declarative value-to-evidence/source constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRuleSet {
    pub format_version: u32,
    pub version: String,
    #[serde(default)]
    pub description: String,
    pub rules: Vec<MappingRule>,
}

/// `better` is predicted to be preferred over `worse`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedPref {
    pub better: usize,
    pub worse: usize,
    /// Every fired rule that implies this preference.
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedPrefs {
    pub layer: LayerId,
    pub prefs: Vec<PredictedPref>,
}

impl PredictedPrefs {
    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    /// Smallest-index-first topological order of `n` items consistent with
    /// every preference.
    pub fn linear_extension(&self, n: usize) -> Result<Vec<usize>> {
        let mut indegree = vec![0usize; n];
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for p in &self.prefs {
            if p.better >= n || p.worse >= n {
                return Err(Error::Data(format!(
                    "preference ({} over {}) outside {n} items",
                    p.better, p.worse
                )));
            }
            edges[p.better].push(p.worse);
            indegree[p.worse] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &edges[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != n {
            return Err(Error::RuleSet(format!("preferences on {} contain a cycle", self.layer)));
        }
        Ok(order)
    }
}

/// Predictions for the evidence and source layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadePredictions {
    pub rule_set_version: String,
    pub fired_rules: Vec<String>,
    pub layers: Vec<PredictedPrefs>,
}

impl CascadePredictions {
    pub fn layer(&self, layer: LayerId) -> Option<&PredictedPrefs> {
        self.layers.iter().find(|p| p.layer == layer)
    }
}

impl MappingRuleSet {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let rules: MappingRuleSet = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if rules.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                path: origin.to_path_buf(),
                found: rules.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn baseline() -> MappingRuleSet {
        Self::from_toml_str(include_str!("../../data/baseline_rules.toml"), Path::new("baseline_rules.toml"))
            .expect("baseline rules parse")
    }

    /// Checks every name against the taxonomies and that no rule on its own
    /// contains a cycle.
    pub fn validate(&self, taxonomies: &BTreeMap<LayerId, &Taxonomy>) -> Result<()> {
        let normative = taxonomies
            .get(&LayerId::Normative)
            .ok_or_else(|| Error::RuleSet("rules need the normative taxonomy".into()))?;
        let mut ids = BTreeSet::new();
        for rule in &self.rules {
            if !ids.insert(rule.id.as_str()) {
                return Err(Error::RuleSet(format!("duplicate rule id `{}`", rule.id)));
            }
            match &rule.antecedent {
                Antecedent::Always => {}
                Antecedent::ItemInTop { item, k } => {
                    if normative.item_by_name(item).is_none() {
                        return Err(Error::RuleSet(format!("rule `{}`: unknown value `{item}`", rule.id)));
                    }
                    if *k == 0 {
                        return Err(Error::RuleSet(format!("rule `{}`: k must be positive", rule.id)));
                    }
                }
                Antecedent::CategoryDominant { category } => {
                    if !normative.categories().contains(&category.as_str()) {
                        return Err(Error::RuleSet(format!(
                            "rule `{}`: unknown category `{category}`",
                            rule.id
                        )));
                    }
                }
            }
            let resolved = resolve(rule, taxonomies)?;
            check_consistent(&resolved)?;
        }
        Ok(())
    }
}

struct Resolved<'a> {
    layer: LayerId,
    better: usize,
    worse: usize,
    rule: &'a str,
}

fn resolve<'a>(rule: &'a MappingRule, taxonomies: &BTreeMap<LayerId, &Taxonomy>) -> Result<Vec<Resolved<'a>>> {
    let mut out = Vec::with_capacity(rule.consequents.len());
    for c in &rule.consequents {
        if c.layer == LayerId::Normative {
            return Err(Error::RuleSet(format!(
                "rule `{}`: consequents must target the evidence or source layer",
                rule.id
            )));
        }
        let tax = taxonomies
            .get(&c.layer)
            .ok_or_else(|| Error::RuleSet(format!("rule `{}`: no taxonomy for {}", rule.id, c.layer)))?;
        let find = |name: &str| {
            tax.item_by_name(name).map(|i| i.index).ok_or_else(|| {
                Error::RuleSet(format!("rule `{}`: unknown {} item `{name}`", rule.id, c.layer))
            })
        };
        let better = find(&c.prefer)?;
        let worse = find(&c.over)?;
        if better == worse {
            return Err(Error::RuleSet(format!("rule `{}`: `{}` preferred over itself", rule.id, c.prefer)));
        }
        out.push(Resolved {
            layer: c.layer,
            better,
            worse,
            rule: &rule.id,
        });
    }
    Ok(out)
}

/// Rejects opposite orientations (naming both rules) and longer cycles.
fn check_consistent(constraints: &[Resolved<'_>]) -> Result<()> {
    let mut seen: BTreeMap<(LayerId, usize, usize), &str> = BTreeMap::new();
    for c in constraints {
        if let Some(other) = seen.get(&(c.layer, c.worse, c.better)) {
            return Err(Error::RuleSet(format!(
                "rules `{other}` and `{}` contradict on {} items {} and {}",
                c.rule, c.layer, c.better, c.worse
            )));
        }
        seen.entry((c.layer, c.better, c.worse)).or_insert(c.rule);
    }
    for layer in [LayerId::Epistemic, LayerId::Source] {
        let prefs = PredictedPrefs {
            layer,
            prefs: constraints
                .iter()
                .filter(|c| c.layer == layer)
                .map(|c| PredictedPref {
                    better: c.better,
                    worse: c.worse,
                    rules: vec![c.rule.to_string()],
                })
                .collect(),
        };
        let n = prefs
            .prefs
            .iter()
            .map(|p| p.better.max(p.worse) + 1)
            .max()
            .unwrap_or(0);
        prefs.linear_extension(n)?;
    }
    Ok(())
}

/// Normalized rank score of every item: best gets 1, worst gets 0.
pub fn rank_scores(ranking: &[usize]) -> Vec<f64> {
    let n = ranking.len();
    let mut scores = vec![0.0; n];
    if n < 2 {
        return vec![1.0; n];
    }
    for (pos, &item) in ranking.iter().enumerate() {
        scores[item] = (n - 1 - pos) as f64 / (n - 1) as f64;
    }
    scores
}

fn holds(antecedent: &Antecedent, ranking: &[usize], normative: &Taxonomy) -> bool {
    match antecedent {
        Antecedent::Always => true,
        Antecedent::ItemInTop { item, k } => normative
            .item_by_name(item)
            .and_then(|it| ranking.iter().position(|&r| r == it.index))
            .is_some_and(|pos| pos < *k),
        Antecedent::CategoryDominant { category } => {
            let scores = rank_scores(ranking);
            let mut best: Option<(&str, f64)> = None;
            for cat in normative.categories() {
                let members: Vec<f64> = normative
                    .items
                    .iter()
                    .filter(|i| i.category == cat)
                    .map(|i| scores[i.index])
                    .collect();
                let m = members.iter().sum::<f64>() / members.len() as f64;
                if best.is_none_or(|(_, b)| m > b) {
                    best = Some((cat, m));
                }
            }
            best.is_some_and(|(cat, _)| cat == category)
        }
    }
}

/// Fires every rule whose antecedent holds on the normative ranking and
/// returns the union of their consequents.
pub fn predict_lower_layers(
    normative_ranking: &[usize],
    rules: &MappingRuleSet,
    taxonomies: &BTreeMap<LayerId, &Taxonomy>,
) -> Result<CascadePredictions> {
    rules.validate(taxonomies)?;
    let normative = taxonomies[&LayerId::Normative];
    let mut fired = Vec::new();
    let mut constraints = Vec::new();
    for rule in &rules.rules {
        if holds(&rule.antecedent, normative_ranking, normative) {
            fired.push(rule.id.clone());
            constraints.extend(resolve(rule, taxonomies)?);
        }
    }
    check_consistent(&constraints)?;

    let mut layers = Vec::new();
    for layer in [LayerId::Epistemic, LayerId::Source] {
        let mut prefs: Vec<PredictedPref> = Vec::new();
        for c in constraints.iter().filter(|c| c.layer == layer) {
            match prefs.iter_mut().find(|p| p.better == c.better && p.worse == c.worse) {
                Some(p) => p.rules.push(c.rule.to_string()),
                None => prefs.push(PredictedPref {
                    better: c.better,
                    worse: c.worse,
                    rules: vec![c.rule.to_string()],
                }),
            }
        }
        prefs.sort_by_key(|p| (p.better.min(p.worse), p.better.max(p.worse)));
        layers.push(PredictedPrefs { layer, prefs });
    }
    Ok(CascadePredictions {
        rule_set_version: rules.version.clone(),
        fired_rules: fired,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxonomies() -> BTreeMap<LayerId, Taxonomy> {
        LayerId::ALL.iter().map(|&l| (l, Taxonomy::builtin(l))).collect()
    }

    fn refs(t: &BTreeMap<LayerId, Taxonomy>) -> BTreeMap<LayerId, &Taxonomy> {
        t.iter().map(|(k, v)| (*k, v)).collect()
    }

    fn rule(id: &str, antecedent: Antecedent, cons: &[(LayerId, &str, &str)]) -> MappingRule {
        MappingRule {
            id: id.into(),
            provenance: String::new(),
            antecedent,
            consequents: cons
                .iter()
                .map(|(l, p, o)| Consequent {
                    layer: *l,
                    prefer: p.to_string(),
                    over: o.to_string(),
                })
                .collect(),
        }
    }

    fn set(rules: Vec<MappingRule>) -> MappingRuleSet {
        MappingRuleSet {
            format_version: 1,
            version: "test".into(),
            description: String::new(),
            rules,
        }
    }

    #[test]
    fn top_k_rule_fires() {
        let t = taxonomies();
        let rules = set(vec![rule(
            "u-top2",
            Antecedent::ItemInTop {
                item: "Universalism".into(),
                k: 2,
            },
            &[(LayerId::Epistemic, "systematic review", "anecdotal testimony")],
        )]);
        let ranking: Vec<usize> = (0..10).collect();
        let p = predict_lower_layers(&ranking, &rules, &refs(&t)).unwrap();
        let l3 = p.layer(LayerId::Epistemic).unwrap();
        assert_eq!(l3.prefs.len(), 1);
        assert_eq!((l3.prefs[0].better, l3.prefs[0].worse), (0, 8));
        assert_eq!(p.fired_rules, vec!["u-top2"]);

        let mut low = ranking.clone();
        low.rotate_left(3);
        let p = predict_lower_layers(&low, &rules, &refs(&t)).unwrap();
        assert!(p.layers.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn empty_rule_set_predicts_nothing() {
        let t = taxonomies();
        let p = predict_lower_layers(&(0..10).collect::<Vec<_>>(), &set(vec![]), &refs(&t)).unwrap();
        assert!(p.layers.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn contradiction_names_both_rules() {
        let t = taxonomies();
        let rules = set(vec![
            rule("one", Antecedent::Always, &[(LayerId::Source, "government agency", "NGO advocacy")]),
            rule("two", Antecedent::Always, &[(LayerId::Source, "NGO advocacy", "government agency")]),
        ]);
        let err = predict_lower_layers(&(0..10).collect::<Vec<_>>(), &rules, &refs(&t)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::RuleSet(_)));
        assert!(msg.contains("one") && msg.contains("two"), "{msg}");
    }

    #[test]
    fn three_cycle_rejected() {
        let t = taxonomies();
        let rules = set(vec![rule(
            "cyc",
            Antecedent::Always,
            &[
                (LayerId::Epistemic, "case report", "expert opinion"),
                (LayerId::Epistemic, "expert opinion", "popular consensus"),
                (LayerId::Epistemic, "popular consensus", "case report"),
            ],
        )]);
        assert!(matches!(rules.validate(&refs(&t)), Err(Error::RuleSet(_))));
    }

    #[test]
    fn unknown_names_rejected() {
        let t = taxonomies();
        let bad_item = set(vec![rule("x", Antecedent::Always, &[(LayerId::Source, "oracle", "NGO advocacy")])]);
        assert!(bad_item.validate(&refs(&t)).is_err());
        let bad_cat = set(vec![rule(
            "y",
            Antecedent::CategoryDominant {
                category: "Hedonics".into(),
            },
            &[],
        )]);
        assert!(bad_cat.validate(&refs(&t)).is_err());
    }

    #[test]
    fn dominant_category_is_unique() {
        let t = taxonomies();
        let normative = &t[&LayerId::Normative];
        for ranking in [
            (0..10).collect::<Vec<_>>(),
            (0..10).rev().collect(),
            vec![5, 6, 0, 1, 2, 3, 4, 7, 8, 9],
        ] {
            let fired: Vec<_> = normative
                .categories()
                .into_iter()
                .filter(|c| {
                    holds(
                        &Antecedent::CategoryDominant {
                            category: c.to_string(),
                        },
                        &ranking,
                        normative,
                    )
                })
                .collect();
            assert_eq!(fired.len(), 1, "{ranking:?}");
        }
    }

    #[test]
    fn baseline_is_valid_and_each_rule_has_three_to_five_per_layer() {
        let t = taxonomies();
        let base = MappingRuleSet::baseline();
        base.validate(&refs(&t)).unwrap();
        assert_eq!(base.rules.len(), 4);
        for r in &base.rules {
            for layer in [LayerId::Epistemic, LayerId::Source] {
                let n = r.consequents.iter().filter(|c| c.layer == layer).count();
                assert!((3..=5).contains(&n), "{} has {n} on {layer}", r.id);
            }
        }
    }

    #[test]
    fn rank_scores_endpoints() {
        let s = rank_scores(&[3, 0, 1, 2]);
        assert_eq!(s[3], 1.0);
        assert_eq!(s[2], 0.0);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_extension_respects_prefs() {
        let prefs = PredictedPrefs {
            layer: LayerId::Epistemic,
            prefs: vec![
                PredictedPref { better: 8, worse: 0, rules: vec![] },
                PredictedPref { better: 5, worse: 8, rules: vec![] },
            ],
        };
        let order = prefs.linear_extension(10).unwrap();
        let pos = |x: usize| order.iter().position(|&o| o == x).unwrap();
        assert!(pos(5) < pos(8) && pos(8) < pos(0));
    }
}
