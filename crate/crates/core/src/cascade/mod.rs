//! Cascade predictions from the value layer, concordance scoring, the derived
//! data-layer function, free-form stance prediction and selective-deviation
//! flags.

mod cci;
mod freeform;
mod l1;
mod pollution;
mod rules;

pub use cci::{cci, cci_report, concordance, CciReport, Concordance, DomainCci, LayerCci, MeasuredLayer};
pub use freeform::{
    aspa, aspa_report, check_holdout, predict_freeform, AspaReport, FixtureResult, FixtureSet, FreeformScenario,
    Prediction, Stance, StanceLabel, ASPA_THRESHOLD,
};
pub use l1::{composite_score, derive_l1, CompositeWeights, DataItemTag, L1Parameters, RankScores, ScoredItem};
pub use pollution::{flag_pollution, DomainMatrices, PollutionConfig, PollutionFlag};
pub use rules::{
    predict_lower_layers, rank_scores, Antecedent, CascadePredictions, Consequent, MappingRule, MappingRuleSet,
    PredictedPref, PredictedPrefs,
};
