//! Data-layer selection derived from the three measured rankings.
//!
//! A data item is tagged with how relevant it is to each value, the evidence
//! type it carries and the source it comes from. Its score is a weighted sum
//! of ordinal rank scores only; win-rate magnitudes are never consumed.

use serde::{Deserialize, Serialize};

use super::rules::rank_scores;
use crate::error::{Error, Result};
use crate::metrics::LayerProfile;
use crate::taxonomy::LayerId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub normative: f64,
    pub epistemic: f64,
    pub source: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights {
            normative: 1.0 / 3.0,
            epistemic: 1.0 / 3.0,
            source: 1.0 / 3.0,
        }
    }
}

impl CompositeWeights {
    /// Scales non-negative weights to sum to one.
    pub fn normalized(normative: f64, epistemic: f64, source: f64) -> Result<Self> {
        let w = [normative, epistemic, source];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("weights must be finite and non-negative: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Config("weights sum to zero".into()));
        }
        Ok(CompositeWeights {
            normative: normative / sum,
            epistemic: epistemic / sum,
            source: source / sum,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.normative + self.epistemic + self.source;
        if [self.normative, self.epistemic, self.source]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!("weights {self:?} must be non-negative and sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataItemTag {
    /// One entry per value, each in [0, 1].
    pub value_relevance: Vec<f64>,
    pub evidence_type: usize,
    pub source_type: usize,
}

impl DataItemTag {
    pub fn validate(&self, sizes: &RankScores) -> Result<()> {
        if self.value_relevance.len() != sizes.normative.len() {
            return Err(Error::Data(format!(
                "value relevance has {} entries, expected {}",
                self.value_relevance.len(),
                sizes.normative.len()
            )));
        }
        if self
            .value_relevance
            .iter()
            .any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(Error::Data("value relevance outside [0, 1]".into()));
        }
        if !self.value_relevance.iter().any(|&r| r > 0.0) {
            return Err(Error::Data("value relevance has no positive entry".into()));
        }
        if self.evidence_type >= sizes.epistemic.len() {
            return Err(Error::Data(format!("unknown evidence type {}", self.evidence_type)));
        }
        if self.source_type >= sizes.source.len() {
            return Err(Error::Data(format!("unknown source type {}", self.source_type)));
        }
        Ok(())
    }

    /// Index of the most relevant value, first on ties.
    pub fn dominant_value(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in self.value_relevance.iter().enumerate() {
            if r > 0.0 && best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Normalized rank score per item for each measured layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScores {
    pub normative: Vec<f64>,
    pub epistemic: Vec<f64>,
    pub source: Vec<f64>,
}

impl RankScores {
    pub fn from_rankings(normative: &[usize], epistemic: &[usize], source: &[usize]) -> Self {
        RankScores {
            normative: rank_scores(normative),
            epistemic: rank_scores(epistemic),
            source: rank_scores(source),
        }
    }

    pub fn from_profiles(profiles: &[LayerProfile]) -> Result<Self> {
        let get = |layer: LayerId| {
            profiles
                .iter()
                .find(|p| p.layer == layer)
                .map(|p| p.ranking.as_slice())
                .ok_or_else(|| Error::Data(format!("missing {layer} profile")))
        };
        Ok(Self::from_rankings(
            get(LayerId::Normative)?,
            get(LayerId::Epistemic)?,
            get(LayerId::Source)?,
        ))
    }
}

pub fn composite_score(tag: &DataItemTag, scores: &RankScores, weights: CompositeWeights) -> Result<f64> {
    tag.validate(scores)?;
    let value_term: f64 = tag
        .value_relevance
        .iter()
        .zip(&scores.normative)
        .map(|(r, s)| r * s)
        .sum();
    Ok(weights.normative * value_term
        + weights.epistemic * scores.epistemic[tag.evidence_type]
        + weights.source * scores.source[tag.source_type])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    /// Position in the input list.
    pub item: usize,
    pub score: f64,
}

/// Ranks data items by composite score, descending; equal scores keep input
/// order.
pub fn derive_l1(scores: &RankScores, weights: CompositeWeights, items: &[DataItemTag]) -> Result<Vec<ScoredItem>> {
    weights.validate()?;
    let mut out = items
        .iter()
        .enumerate()
        .map(|(item, tag)| {
            Ok(ScoredItem {
                item,
                score: composite_score(tag, scores, weights)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}

/// Everything needed to recompute data-layer scores from a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Parameters {
    pub weights: CompositeWeights,
    pub rank_scores: RankScores,
}
