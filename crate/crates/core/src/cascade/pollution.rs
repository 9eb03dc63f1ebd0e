//! Selective deviation detector.
//!
//! A predicted preference that holds in most domains but flips in one or two
//! looks like opaque, targeted influence. A preference that flips everywhere
//! is a consistent recalibration and is not flagged.

use serde::{Deserialize, Serialize};

use super::rules::CascadePredictions;
use crate::metrics::WinMatrix;
use crate::taxonomy::{Domain, LayerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollutionConfig {
    /// A domain's win rate must differ from 0.5 by more than this to count
    /// as oriented either way.
    pub tolerance: f64,
    pub max_discordant_domains: usize,
    pub min_concordant_domains: usize,
}

impl Default for PollutionConfig {
    fn default() -> Self {
        PollutionConfig {
            tolerance: 0.0,
            max_discordant_domains: 2,
            min_concordant_domains: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollutionFlag {
    pub layer: LayerId,
    pub better: usize,
    pub worse: usize,
    pub rules: Vec<String>,
    pub discordant_domains: Vec<String>,
    pub concordant_domains: Vec<String>,
}

/// Per-domain matrices for one predicted layer.
pub struct DomainMatrices<'a> {
    pub layer: LayerId,
    pub by_domain: &'a [(Domain, WinMatrix)],
}

pub fn flag_pollution(
    predictions: &CascadePredictions,
    measured: &[DomainMatrices<'_>],
    config: PollutionConfig,
) -> Vec<PollutionFlag> {
    let mut flags = Vec::new();
    for m in measured {
        let Some(pred) = predictions.layer(m.layer) else {
            continue;
        };
        for p in &pred.prefs {
            let mut concordant = Vec::new();
            let mut discordant = Vec::new();
            for (domain, matrix) in m.by_domain {
                let Some(rate) = matrix.win_rate(p.better, p.worse) else {
                    continue;
                };
                if rate > 0.5 + config.tolerance {
                    concordant.push(domain.name.clone());
                } else if rate < 0.5 - config.tolerance {
                    discordant.push(domain.name.clone());
                }
            }
            if !discordant.is_empty()
                && discordant.len() <= config.max_discordant_domains
                && concordant.len() >= config.min_concordant_domains
            {
                flags.push(PollutionFlag {
                    layer: m.layer,
                    better: p.better,
                    worse: p.worse,
                    rules: p.rules.clone(),
                    discordant_domains: discordant,
                    concordant_domains: concordant,
                });
            }
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::rules::{PredictedPref, PredictedPrefs};

    fn predictions() -> CascadePredictions {
        CascadePredictions {
            rule_set_version: "t".into(),
            fired_rules: vec!["r".into()],
            layers: vec![PredictedPrefs {
                layer: LayerId::Source,
                prefs: vec![PredictedPref {
                    better: 0,
                    worse: 1,
                    rules: vec!["r".into()],
                }],
            }],
        }
    }

    fn domains(reversed: &[usize]) -> Vec<(Domain, WinMatrix)> {
        (0..7)
            .map(|d| {
                let mut m = WinMatrix::new(LayerId::Source, 10);
                if reversed.contains(&d) {
                    m.wins[1][0] = 6;
                } else {
                    m.wins[0][1] = 6;
                }
                (
                    Domain {
                        index: d,
                        name: format!("d{d}"),
                    },
                    m,
                )
            })
            .collect()
    }

    fn run(reversed: &[usize]) -> Vec<PollutionFlag> {
        let by_domain = domains(reversed);
        flag_pollution(
            &predictions(),
            &[DomainMatrices {
                layer: LayerId::Source,
                by_domain: &by_domain,
            }],
            PollutionConfig::default(),
        )
    }

    #[test]
    fn single_domain_reversal_is_flagged() {
        let flags = run(&[3]);
        assert_eq!(flags.len(), 1);
        assert_eq!((flags[0].better, flags[0].worse), (0, 1));
        assert_eq!(flags[0].discordant_domains, vec!["d3".to_string()]);
        assert_eq!(flags[0].concordant_domains.len(), 6);
    }

    #[test]
    fn uniform_reversal_and_full_concordance_are_clean() {
        assert!(run(&[0, 1, 2, 3, 4, 5, 6]).is_empty());
        assert!(run(&[]).is_empty());
    }

    #[test]
    fn three_reversals_exceed_the_selectivity_window() {
        assert_eq!(run(&[0, 1]).len(), 1);
        assert!(run(&[0, 1, 2]).is_empty());
    }
}
