use std::path::Path;

use serde::{Deserialize, Serialize};

use super::l1::{composite_score, DataItemTag, L1Parameters};
use crate::bank::Bank;
use crate::error::{Error, Result};
use crate::records::{read_versioned, Versioned};
use crate::taxonomy::{ItemPair, LayerId};
use crate::FORMAT_VERSION;

/// Accuracy above which the profile counts as predictive.
pub const ASPA_THRESHOLD: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StanceLabel {
    #[serde(rename = "stance-1")]
    First,
    #[serde(rename = "stance-2")]
    Second,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    #[serde(rename = "stance-1")]
    First,
    #[serde(rename = "stance-2")]
    Second,
    Undetermined,
}

impl Prediction {
    pub fn is_correct(self, label: StanceLabel) -> bool {
        matches!(
            (self, label),
            (Prediction::First, StanceLabel::First)
                | (Prediction::Second, StanceLabel::Second)
                | (Prediction::Undetermined, StanceLabel::Abstain)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stance {
    pub text: String,
    #[serde(default)]
    pub tag: Option<DataItemTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeformScenario {
    pub id: String,
    pub domain: String,
    pub narrative: String,
    pub stances: [Stance; 2],
    pub label: StanceLabel,
}

impl FreeformScenario {
    fn tags(&self) -> Result<(&DataItemTag, &DataItemTag)> {
        match (&self.stances[0].tag, &self.stances[1].tag) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Data(format!("fixture {} has an untagged stance", self.id))),
        }
    }

    /// Value pair the fixture contrasts, from each stance's dominant value.
    pub fn value_pair(&self) -> Result<Option<ItemPair>> {
        let (a, b) = self.tags()?;
        Ok(match (a.dominant_value(), b.dominant_value()) {
            (Some(x), Some(y)) if x != y => Some(ItemPair::new(LayerId::Normative, x, y)?),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub format_version: u32,
    /// Who or what produced the labels.
    pub source: String,
    pub fixtures: Vec<FreeformScenario>,
}

impl Versioned for FixtureSet {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

impl FixtureSet {
    pub fn new(source: impl Into<String>, fixtures: Vec<FreeformScenario>) -> Self {
        FixtureSet {
            format_version: FORMAT_VERSION,
            source: source.into(),
            fixtures,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path)
    }
}

pub fn predict_freeform(params: &L1Parameters, scenario: &FreeformScenario) -> Result<Prediction> {
    let (a, b) = scenario.tags()?;
    let sa = composite_score(a, &params.rank_scores, params.weights)?;
    let sb = composite_score(b, &params.rank_scores, params.weights)?;
    Ok(match sa.total_cmp(&sb) {
        std::cmp::Ordering::Greater => Prediction::First,
        std::cmp::Ordering::Less => Prediction::Second,
        std::cmp::Ordering::Equal => Prediction::Undetermined,
    })
}

pub fn aspa(predictions: &[Prediction], labels: &[StanceLabel]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Data("no held-out fixtures to score".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p.is_correct(**l))
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Rejects fixtures that contrast a measured value pair inside a bank domain.
pub fn check_holdout(fixtures: &FixtureSet, bank: &Bank) -> Result<()> {
    if !bank.manifest.layers.contains(&LayerId::Normative) {
        return Ok(());
    }
    let mut clashes = Vec::new();
    for f in &fixtures.fixtures {
        if !bank.manifest.domains.iter().any(|d| d.name == f.domain) {
            continue;
        }
        match f.value_pair()? {
            Some(pair) => clashes.push(format!("{} ({} in {})", f.id, pair, f.domain)),
            None => clashes.push(format!("{} (no value contrast, in {})", f.id, f.domain)),
        }
    }
    if clashes.is_empty() {
        Ok(())
    } else {
        Err(Error::HoldoutViolation(clashes.join(", ")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureResult {
    pub id: String,
    pub prediction: Prediction,
    pub label: StanceLabel,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspaReport {
    pub format_version: u32,
    pub respondent: String,
    pub fixture_source: String,
    pub aspa: f64,
    pub threshold: f64,
    pub pass: bool,
    pub undetermined: usize,
    pub params: L1Parameters,
    pub results: Vec<FixtureResult>,
}

impl Versioned for AspaReport {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

pub fn aspa_report(respondent: &str, params: &L1Parameters, fixtures: &FixtureSet) -> Result<AspaReport> {
    params.weights.validate()?;
    let predictions = fixtures
        .fixtures
        .iter()
        .map(|f| predict_freeform(params, f))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<StanceLabel> = fixtures.fixtures.iter().map(|f| f.label).collect();
    let value = aspa(&predictions, &labels)?;
    Ok(AspaReport {
        format_version: FORMAT_VERSION,
        respondent: respondent.to_string(),
        fixture_source: fixtures.source.clone(),
        aspa: value,
        threshold: ASPA_THRESHOLD,
        pass: value > ASPA_THRESHOLD,
        undetermined: predictions.iter().filter(|p| **p == Prediction::Undetermined).count(),
        params: params.clone(),
        results: fixtures
            .fixtures
            .iter()
            .zip(predictions)
            .map(|(f, prediction)| FixtureResult {
                id: f.id.clone(),
                prediction,
                label: f.label,
                correct: prediction.is_correct(f.label),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::l1::{CompositeWeights, RankScores};
    use crate::cascade::rules::rank_scores;

    fn tag(v: usize, e: usize, s: usize) -> DataItemTag {
        let mut value_relevance = vec![0.0; 10];
        value_relevance[v] = 1.0;
        DataItemTag {
            value_relevance,
            evidence_type: e,
            source_type: s,
        }
    }

    fn fixture(a: DataItemTag, b: DataItemTag, label: StanceLabel) -> FreeformScenario {
        FreeformScenario {
            id: "f".into(),
            domain: "agriculture".into(),
            narrative: "n".into(),
            stances: [
                Stance { text: "x".into(), tag: Some(a) },
                Stance { text: "y".into(), tag: Some(b) },
            ],
            label,
        }
    }

    fn params(weights: CompositeWeights) -> L1Parameters {
        let id: Vec<usize> = (0..10).collect();
        L1Parameters {
            weights,
            rank_scores: RankScores::from_rankings(&id, &id, &id),
        }
    }

    #[test]
    fn dominance_and_ties() {
        let p = params(CompositeWeights::default());
        let f = fixture(tag(0, 1, 2), tag(3, 4, 5), StanceLabel::First);
        assert_eq!(predict_freeform(&p, &f).unwrap(), Prediction::First);
        let g = fixture(tag(3, 4, 5), tag(3, 4, 5), StanceLabel::First);
        assert_eq!(predict_freeform(&p, &g).unwrap(), Prediction::Undetermined);
        assert!(!Prediction::Undetermined.is_correct(StanceLabel::First));
        assert!(Prediction::Undetermined.is_correct(StanceLabel::Abstain));
    }

    #[test]
    fn untagged_stance_is_a_data_error() {
        let mut f = fixture(tag(0, 0, 0), tag(1, 1, 1), StanceLabel::First);
        f.stances[1].tag = None;
        assert!(matches!(predict_freeform(&params(CompositeWeights::default()), &f), Err(Error::Data(_))));
    }

    #[test]
    fn aspa_counts_and_empty_set() {
        let p = [Prediction::First, Prediction::Second, Prediction::First, Prediction::Undetermined];
        let l = [StanceLabel::First, StanceLabel::Second, StanceLabel::Second, StanceLabel::Abstain];
        assert_eq!(aspa(&p, &l).unwrap(), 0.75);
        assert_eq!(aspa(&p[..2], &l[..2]).unwrap(), 1.0);
        assert!(aspa(&[], &[]).is_err());
    }

    #[test]
    fn value_only_weights_reduce_to_rank_comparison() {
        let ranking = [4usize, 7, 0, 9, 1, 3, 8, 2, 6, 5];
        let id: Vec<usize> = (0..10).collect();
        let p = L1Parameters {
            weights: CompositeWeights::normalized(1.0, 0.0, 0.0).unwrap(),
            rank_scores: RankScores::from_rankings(&ranking, &id, &id),
        };
        let pos = |v: usize| ranking.iter().position(|&r| r == v).unwrap();
        for i in 0..10 {
            for j in (i + 1)..10 {
                let f = fixture(tag(i, 9, 0), tag(j, 0, 9), StanceLabel::First);
                let expected = if pos(i) < pos(j) { Prediction::First } else { Prediction::Second };
                assert_eq!(predict_freeform(&p, &f).unwrap(), expected, "{i} vs {j}");
            }
        }
        assert_eq!(rank_scores(&ranking)[4], 1.0);
    }

    #[test]
    fn labels_serialize_as_stance_names() {
        assert_eq!(serde_json::to_string(&StanceLabel::First).unwrap(), "\"stance-1\"");
        assert_eq!(serde_json::to_string(&Prediction::Undetermined).unwrap(), "\"undetermined\"");
    }
}
