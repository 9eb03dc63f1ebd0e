use serde::{Deserialize, Serialize};

use super::rules::{CascadePredictions, PredictedPrefs};
use crate::error::{Error, Result};
use crate::metrics::{Metric, WinMatrix};
use crate::taxonomy::{Domain, LayerId};

/// How measured win rates line up with predicted orientations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concordance {
    pub concordant: usize,
    pub discordant: usize,
    /// Measured win rate exactly 0.5.
    pub ties: usize,
    /// No decisive trial for the pair.
    pub no_data: usize,
}

impl Concordance {
    pub fn add(&mut self, other: Concordance) {
        self.concordant += other.concordant;
        self.discordant += other.discordant;
        self.ties += other.ties;
        self.no_data += other.no_data;
    }

    pub fn scorable(&self) -> usize {
        self.concordant + self.discordant
    }

    pub fn index(&self) -> Result<f64> {
        if self.scorable() == 0 {
            return Err(Error::UndefinedMetric(format!(
                "no scorable predicted pairs ({} ties, {} without data)",
                self.ties, self.no_data
            )));
        }
        Ok(self.concordant as f64 / self.scorable() as f64)
    }
}

pub fn concordance(predicted: &PredictedPrefs, measured: &WinMatrix) -> Concordance {
    let mut c = Concordance::default();
    for p in &predicted.prefs {
        let (w, l) = (measured.wins[p.better][p.worse], measured.wins[p.worse][p.better]);
        match w.cmp(&l) {
            _ if w + l == 0 => c.no_data += 1,
            std::cmp::Ordering::Greater => c.concordant += 1,
            std::cmp::Ordering::Less => c.discordant += 1,
            std::cmp::Ordering::Equal => c.ties += 1,
        }
    }
    c
}

/// Fraction of predicted pairs whose measured win rate favors the predicted
/// item. Reads only the orientation of each rate relative to 0.5.
pub fn cci(predicted: &PredictedPrefs, measured: &WinMatrix) -> Result<f64> {
    if predicted.layer != measured.layer {
        return Err(Error::Data(format!(
            "predictions for {} scored against a {} matrix",
            predicted.layer, measured.layer
        )));
    }
    concordance(predicted, measured).index()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCci {
    pub domain: Domain,
    pub cci: Metric,
    pub counts: Concordance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCci {
    pub layer: LayerId,
    pub cci: Metric,
    pub counts: Concordance,
    pub by_domain: Vec<DomainCci>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CciReport {
    pub rule_set_version: String,
    /// Pooled over both predicted layers.
    pub overall: Metric,
    pub counts: Concordance,
    pub layers: Vec<LayerCci>,
    /// Both layers pooled within each domain.
    pub by_domain: Vec<DomainCci>,
}

/// Per-layer inputs: the pooled matrix and one matrix per domain.
pub struct MeasuredLayer<'a> {
    pub pooled: &'a WinMatrix,
    pub by_domain: &'a [(Domain, WinMatrix)],
}

pub fn cci_report(predictions: &CascadePredictions, measured: &[MeasuredLayer<'_>]) -> CciReport {
    let mut overall = Concordance::default();
    let mut layers = Vec::new();
    let mut domain_totals: Vec<(Domain, Concordance)> = Vec::new();
    for m in measured {
        let Some(pred) = predictions.layer(m.pooled.layer) else {
            continue;
        };
        let counts = concordance(pred, m.pooled);
        overall.add(counts);
        let by_domain: Vec<DomainCci> = m
            .by_domain
            .iter()
            .map(|(d, w)| {
                let c = concordance(pred, w);
                match domain_totals.iter_mut().find(|(dd, _)| dd == d) {
                    Some((_, t)) => t.add(c),
                    None => domain_totals.push((d.clone(), c)),
                }
                DomainCci {
                    domain: d.clone(),
                    cci: Metric::from_result(c.index()),
                    counts: c,
                }
            })
            .collect();
        layers.push(LayerCci {
            layer: pred.layer,
            cci: Metric::from_result(counts.index()),
            counts,
            by_domain,
        });
    }
    CciReport {
        rule_set_version: predictions.rule_set_version.clone(),
        overall: Metric::from_result(overall.index()),
        counts: overall,
        layers,
        by_domain: domain_totals
            .into_iter()
            .map(|(domain, c)| DomainCci {
                domain,
                cci: Metric::from_result(c.index()),
                counts: c,
            })
            .collect(),
    }
}

impl CciReport {
    pub fn layer(&self, layer: LayerId) -> Option<&LayerCci> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    /// Domains whose per-domain index for `layer` exceeds `threshold`.
    pub fn domains_above(&self, layer: LayerId, threshold: f64) -> usize {
        self.layer(layer).map_or(0, |l| {
            l.by_domain
                .iter()
                .filter(|d| d.cci.value().is_some_and(|v| v > threshold))
                .count()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::rules::PredictedPref;
    use proptest::prelude::*;

    fn prefs(list: &[(usize, usize)]) -> PredictedPrefs {
        PredictedPrefs {
            layer: LayerId::Epistemic,
            prefs: list
                .iter()
                .map(|&(b, w)| PredictedPref {
                    better: b,
                    worse: w,
                    rules: vec!["r".into()],
                })
                .collect(),
        }
    }

    #[test]
    fn counts_and_exclusions() {
        let mut m = WinMatrix::new(LayerId::Epistemic, 10);
        m.wins[0][1] = 5;
        m.wins[1][0] = 2; // concordant
        m.wins[2][3] = 1;
        m.wins[3][2] = 4; // discordant
        m.wins[4][5] = 3;
        m.wins[5][4] = 3; // tie
        let p = prefs(&[(0, 1), (2, 3), (4, 5), (6, 7)]);
        let c = concordance(&p, &m);
        assert_eq!(
            c,
            Concordance {
                concordant: 1,
                discordant: 1,
                ties: 1,
                no_data: 1
            }
        );
        assert_eq!(cci(&p, &m).unwrap(), 0.5);
    }

    #[test]
    fn nothing_scorable_is_undefined() {
        let m = WinMatrix::new(LayerId::Epistemic, 10);
        assert!(matches!(cci(&prefs(&[(0, 1)]), &m), Err(Error::UndefinedMetric(_))));
    }

    proptest! {
        #[test]
        fn invariant_under_positive_rescaling(
            cells in prop::collection::vec(0u32..30, 100),
            scale in 1u32..50,
        ) {
            let mut m = WinMatrix::new(LayerId::Epistemic, 10);
            let mut scaled = m.clone();
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        m.wins[i][j] = cells[i * 10 + j];
                        scaled.wins[i][j] = cells[i * 10 + j] * scale;
                    }
                }
            }
            let p = prefs(&[(0, 1), (3, 2), (9, 4), (5, 7), (8, 6)]);
            prop_assert_eq!(concordance(&p, &m), concordance(&p, &scaled));
        }
    }
}
