//! The full measurement record for one respondent.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::Bank;
use crate::cascade::{
    cci_report, flag_pollution, predict_lower_layers, CascadePredictions, CciReport, CompositeWeights, DomainMatrices,
    L1Parameters, MappingRuleSet, MeasuredLayer, PollutionConfig, PollutionFlag, RankScores,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gateway::{DecodeParams, Transcript};
use crate::metrics::{
    classify_ih, layer_profile, reliability, win_matrix, IhDiagnosis, LayerProfile, ReliabilityReport, ResponseTable,
    Thresholds, WinMatrix,
};
use crate::records::Versioned;
use crate::taxonomy::{Domain, LayerId, Taxonomy};
use crate::FORMAT_VERSION;

/// Pair-level repeat agreement needed for a pair to count as stable.
pub const PAIR_TRR_GATE: f64 = 0.75;
/// Share of value pairs that must be stable.
pub const PAIR_SHARE_GATE: f64 = 0.80;
pub const DOMAIN_CCI_GATE: f64 = 0.60;
pub const DOMAIN_COUNT_GATE: usize = 3;
pub const SOURCE_OVER_EVIDENCE_GATE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub thresholds: Thresholds,
    pub weights: CompositeWeights,
    pub rules: MappingRuleSet,
    pub pollution: PollutionConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            thresholds: Thresholds::default(),
            weights: CompositeWeights::default(),
            rules: MappingRuleSet::baseline(),
            pollution: PollutionConfig::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisConfigFile {
    format_version: u32,
    #[serde(default)]
    rules: Option<String>,
    #[serde(default)]
    thresholds: Option<Thresholds>,
    #[serde(default)]
    weights: Option<CompositeWeights>,
    #[serde(default)]
    pollution: Option<PollutionConfig>,
}

impl AnalysisConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: AnalysisConfigFile = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                path: origin.to_path_buf(),
                found: file.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let mut cfg = AnalysisConfig::default();
        if let Some(rel) = file.rules {
            let base = origin.parent().unwrap_or(Path::new("."));
            cfg.rules = MappingRuleSet::load(&base.join(rel))?;
        }
        if let Some(t) = file.thresholds {
            if !(t.trr > 0.0 && t.trr <= 1.0 && t.srs > 0.0 && t.srs <= 1.0) {
                return Err(Error::Config(format!("thresholds {t:?} must lie in (0, 1]")));
            }
            cfg.thresholds = t;
        }
        if let Some(w) = file.weights {
            cfg.weights = CompositeWeights::normalized(w.normative, w.epistemic, w.source)?;
        }
        if let Some(p) = file.pollution {
            cfg.pollution = p;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

/// Every setting a reported number depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub thresholds: Thresholds,
    pub weights: CompositeWeights,
    pub rule_set_version: String,
    pub pollution: PollutionConfig,
    pub decode: Option<DecodeParams>,
    pub respondent_config: serde_json::Value,
    pub bank_seed: u64,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub id: String,
    pub criterion: String,
    pub observed: String,
    /// `None` when the data cannot decide it.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrismProfile {
    pub format_version: u32,
    pub respondent: String,
    pub bank_digest: String,
    pub transcripts: usize,
    pub config: ConfigEcho,
    pub layers: Vec<LayerProfile>,
    /// Pooled over every measured layer.
    pub reliability: ReliabilityReport,
    pub diagnosis: Option<IhDiagnosis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis_note: Option<String>,
    pub predictions: Option<CascadePredictions>,
    pub cci: Option<CciReport>,
    pub l1: Option<L1Parameters>,
    pub pollution_flags: Vec<PollutionFlag>,
    pub gates: Vec<Gate>,
}

impl Versioned for PrismProfile {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

impl PrismProfile {
    pub fn layer(&self, layer: LayerId) -> Option<&LayerProfile> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::json("profile", e))?;
        s.push('\n');
        Ok(s)
    }
}

/// Respondent metadata carried into the profile.
#[derive(Debug, Clone, Default)]
pub struct RespondentInfo {
    pub id: String,
    pub decode: Option<DecodeParams>,
    pub config: serde_json::Value,
}

fn domain_matrices(table: &ResponseTable<'_>, layer: LayerId) -> Result<Vec<(Domain, WinMatrix)>> {
    table
        .bank
        .manifest
        .domains
        .iter()
        .map(|d| Ok((d.clone(), win_matrix(table, layer, Some(d.index))?)))
        .collect()
}

fn gates(layers: &[LayerProfile], cci: Option<&CciReport>, n_domains: usize) -> Vec<Gate> {
    let mut out = Vec::new();
    let stable = layers.iter().find(|l| l.layer == LayerId::Normative).map(|l| {
        let measured: Vec<f64> = l.reliability.per_pair.iter().filter_map(|p| p.trr).collect();
        let ok = measured.iter().filter(|&&t| t >= PAIR_TRR_GATE).count();
        (ok, measured.len())
    });
    out.push(match stable {
        Some((ok, n)) if n > 0 => {
            let share = ok as f64 / n as f64;
            Gate {
                id: "value-pair-stability".into(),
                criterion: format!("TRR >= {PAIR_TRR_GATE} on >= {:.0}% of value pairs", PAIR_SHARE_GATE * 100.0),
                observed: format!("{ok} of {n} pairs ({:.1}%)", share * 100.0),
                pass: Some(share >= PAIR_SHARE_GATE),
            }
        }
        _ => Gate {
            id: "value-pair-stability".into(),
            criterion: format!("TRR >= {PAIR_TRR_GATE} on >= {:.0}% of value pairs", PAIR_SHARE_GATE * 100.0),
            observed: "no value-layer repeat data".into(),
            pass: None,
        },
    });

    let evidence = cci.and_then(|c| c.layer(LayerId::Epistemic));
    let above = cci.map_or(0, |c| c.domains_above(LayerId::Epistemic, DOMAIN_CCI_GATE));
    out.push(Gate {
        id: "evidence-cascade".into(),
        criterion: format!("evidence CCI > {DOMAIN_CCI_GATE} in >= {DOMAIN_COUNT_GATE} of {n_domains} domains"),
        observed: match evidence {
            Some(_) => format!("{above} domains"),
            None => "no evidence-layer predictions".into(),
        },
        pass: evidence.map(|_| above >= DOMAIN_COUNT_GATE),
    });

    let source = cci.and_then(|c| c.layer(LayerId::Source));
    let compare = match (evidence, source) {
        (Some(e), Some(s)) => {
            let mut wins = 0;
            let mut both = 0;
            for (de, ds) in e.by_domain.iter().zip(&s.by_domain) {
                if let (Some(a), Some(b)) = (de.cci.value(), ds.cci.value()) {
                    both += 1;
                    wins += (b >= a) as usize;
                }
            }
            Some((wins, both))
        }
        _ => None,
    };
    out.push(Gate {
        id: "source-cascade".into(),
        criterion: format!("source CCI >= evidence CCI in >= {SOURCE_OVER_EVIDENCE_GATE} of {n_domains} domains"),
        observed: match compare {
            Some((w, b)) => format!("{w} of {b} comparable domains"),
            None => "no source or evidence predictions".into(),
        },
        pass: compare.map(|(w, _)| w >= SOURCE_OVER_EVIDENCE_GATE),
    });
    out
}

/// Computes every metric the transcripts support. Nothing here reads the
/// clock, so equal inputs give byte-identical records.
pub fn compute_profile(
    bank: &Bank,
    transcripts: &[Transcript],
    respondent: &RespondentInfo,
    cfg: &AnalysisConfig,
    exec: Exec,
) -> Result<PrismProfile> {
    cfg.weights.validate()?;
    let table = ResponseTable::build(bank, transcripts)?;
    let measured = &bank.manifest.layers;
    let layers = measured
        .iter()
        .map(|&l| layer_profile(&table, l, exec))
        .collect::<Result<Vec<_>>>()?;
    let overall = reliability(&table, measured, exec)?;

    let (diagnosis, diagnosis_note) = match (overall.trr.value(), overall.srs.value()) {
        (Some(t), Some(s)) => (Some(classify_ih(t, s, cfg.thresholds)), None),
        _ => (None, Some("TRR or SRS undefined".to_string())),
    };

    let has_all = LayerId::ALL.iter().all(|l| measured.contains(l));
    let mut predictions = None;
    let mut cci = None;
    let mut l1 = None;
    let mut pollution_flags = Vec::new();
    if has_all {
        let taxonomies: BTreeMap<LayerId, &Taxonomy> = LayerId::ALL
            .iter()
            .map(|&l| Ok((l, bank.taxonomy(l).ok_or_else(|| Error::Data(format!("bank lacks {l}")))?)))
            .collect::<Result<_>>()?;
        let normative = layers
            .iter()
            .find(|l| l.layer == LayerId::Normative)
            .expect("normative layer measured");
        let pred = predict_lower_layers(&normative.ranking, &cfg.rules, &taxonomies)?;
        let lower = [LayerId::Epistemic, LayerId::Source];
        let by_domain = lower
            .iter()
            .map(|&l| domain_matrices(&table, l))
            .collect::<Result<Vec<_>>>()?;
        let pooled: Vec<&WinMatrix> = lower
            .iter()
            .map(|&l| &layers.iter().find(|p| p.layer == l).expect("layer measured").matrix)
            .collect();
        let measured_layers: Vec<MeasuredLayer<'_>> = pooled
            .iter()
            .zip(&by_domain)
            .map(|(p, d)| MeasuredLayer { pooled: p, by_domain: d })
            .collect();
        cci = Some(cci_report(&pred, &measured_layers));
        let dm: Vec<DomainMatrices<'_>> = lower
            .iter()
            .zip(&by_domain)
            .map(|(&layer, d)| DomainMatrices { layer, by_domain: d })
            .collect();
        pollution_flags = flag_pollution(&pred, &dm, cfg.pollution);
        l1 = Some(L1Parameters {
            weights: cfg.weights,
            rank_scores: RankScores::from_profiles(&layers)?,
        });
        predictions = Some(pred);
    }

    let gates = gates(&layers, cci.as_ref(), bank.manifest.domains.len());
    Ok(PrismProfile {
        format_version: FORMAT_VERSION,
        respondent: respondent.id.clone(),
        bank_digest: bank.manifest.scenarios_digest.clone(),
        transcripts: table.transcript_count(),
        config: ConfigEcho {
            thresholds: cfg.thresholds,
            weights: cfg.weights,
            rule_set_version: cfg.rules.version.clone(),
            pollution: cfg.pollution,
            decode: respondent.decode.clone(),
            respondent_config: respondent.config.clone(),
            bank_seed: bank.manifest.seed,
            template_version: bank.manifest.template_version.clone(),
        },
        layers,
        reliability: overall,
        diagnosis,
        diagnosis_note,
        predictions,
        cci,
        l1,
        pollution_flags,
        gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_config_normalizes_weights_and_loads_rules() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("rules.toml"),
            "format_version = 1\nversion = \"empty-1\"\nrules = []\n",
        )
        .unwrap();
        let path = dir.path().join("analysis.toml");
        let text = "format_version = 1\nrules = \"rules.toml\"\n[weights]\nnormative = 2.0\nepistemic = 1.0\nsource = 1.0\n";
        let cfg = AnalysisConfig::from_toml_str(text, &path).unwrap();
        assert_eq!(cfg.rules.version, "empty-1");
        assert!((cfg.weights.normative - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_thresholds_are_config_errors() {
        let text = "format_version = 1\n[thresholds]\ntrr = 0.0\nsrs = 0.75\n";
        assert!(matches!(
            AnalysisConfig::from_toml_str(text, Path::new("a.toml")),
            Err(Error::Config(_))
        ));
    }
}
