//! Repeat, instantiation and perspective agreement.
//!
//! All three scores treat abstention as a third outcome, so two abstentions
//! agree. Decisive-only variants drop any cell containing an abstention.
//! Per-cell values are computed through [`Exec`] and reduced sequentially in
//! cell order.

use serde::{Deserialize, Serialize};

use super::table::{modal_fraction, Outcome, ResponseTable};
use super::Metric;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::taxonomy::{enumerate_pairs, Domain, ItemPair, LayerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    pub complete: usize,
    pub incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReliability {
    pub pair: ItemPair,
    pub trr: Option<f64>,
    pub srs: Option<f64>,
    /// Present only for pairs in the reframing subset.
    pub pcs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReliability {
    pub domain: Domain,
    pub trr: Option<f64>,
    pub srs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub trr: Metric,
    pub srs: Metric,
    pub pcs: Metric,
    pub trr_decisive: Metric,
    pub srs_decisive: Metric,
    pub pcs_decisive: Metric,
    /// Lowest modal fraction attainable with the bank's instantiation count.
    pub srs_floor: f64,
    /// Lowest modal fraction attainable with the bank's perspective count.
    pub pcs_floor: f64,
    pub trr_cells: CellCounts,
    pub srs_cells: CellCounts,
    pub pcs_cells: CellCounts,
    pub abstain_rate: Metric,
    pub per_pair: Vec<PairReliability>,
    pub per_domain: Vec<DomainReliability>,
}

/// Smallest modal fraction over `trials` with three possible outcomes.
pub fn modal_floor(trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    trials.div_ceil(3) as f64 / trials as f64
}

#[derive(Clone, Copy)]
struct RepeatCell {
    agree: Option<bool>,
    decisive_agree: Option<bool>,
}

#[derive(Clone, Copy)]
struct ModalCell {
    value: Option<f64>,
    decisive: Option<f64>,
}

fn modal_cell(outcomes: Option<Vec<Outcome>>) -> ModalCell {
    match outcomes {
        None => ModalCell {
            value: None,
            decisive: None,
        },
        Some(o) => ModalCell {
            value: Some(modal_fraction(&o)),
            decisive: o
                .iter()
                .all(|x| x.is_decisive())
                .then(|| modal_fraction(&o)),
        },
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn metric(value: Option<f64>, what: &str) -> Metric {
    match value {
        Some(v) => Metric::Defined { value: v },
        None => Metric::Undefined {
            reason: format!("no complete {what} cells"),
        },
    }
}

/// Test-retest agreement over the neutral scenarios of `layers`.
pub fn trr(table: &ResponseTable<'_>, layers: &[LayerId]) -> Result<f64> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for &layer in layers {
        for s in table.neutral_scenarios(layer) {
            if let (Some(a), Some(b)) = (table.outcome(s, 1), table.outcome(s, 2)) {
                total += 1;
                agree += (a == b) as usize;
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("no scenario has both repeats".into()));
    }
    Ok(agree as f64 / total as f64)
}

/// Modal fraction over the first-repeat outcomes of every instantiation of
/// one (pair, domain) cell. `None` when any instantiation is missing.
pub fn srs_cell(table: &ResponseTable<'_>, pair: ItemPair, domain: usize) -> Option<f64> {
    srs_outcomes(table, pair, domain).map(|o| modal_fraction(&o))
}

fn srs_outcomes(table: &ResponseTable<'_>, pair: ItemPair, domain: usize) -> Option<Vec<Outcome>> {
    let k = table.bank.manifest.instantiations;
    (1..=k)
        .map(|inst| {
            let s = table.neutral_scenario(pair, domain, inst as u8)?;
            table.outcome(s, 1)
        })
        .collect()
}

fn pcs_outcomes(table: &ResponseTable<'_>, pair: ItemPair, domain: usize) -> Option<Vec<Outcome>> {
    let p = table.bank.manifest.perspectives;
    (0..p)
        .map(|persp| {
            let s = table.framed_scenario(pair, domain, persp as u8)?;
            table.outcome(s, 1)
        })
        .collect()
}

/// Perspective consistency of one reframing pair, averaged over domains
/// with all framings present.
pub fn pcs(table: &ResponseTable<'_>, pair: ItemPair) -> Result<f64> {
    if !table.bank.is_pcs_pair(pair) {
        return Err(Error::Scope(format!("{pair} is not in the reframing subset")));
    }
    let domains = &table.bank.manifest.domains;
    mean(
        domains
            .iter()
            .filter_map(|d| pcs_outcomes(table, pair, d.index).map(|o| modal_fraction(&o))),
    )
    .ok_or_else(|| Error::UndefinedMetric(format!("no domain of {pair} has all framings")))
}

/// Full reliability breakdown over `layers`.
pub fn reliability(table: &ResponseTable<'_>, layers: &[LayerId], exec: Exec) -> Result<ReliabilityReport> {
    let manifest = &table.bank.manifest;
    let domains = &manifest.domains;
    let mut pairs = Vec::new();
    for &layer in layers {
        let tax = table
            .bank
            .taxonomy(layer)
            .ok_or_else(|| Error::Data(format!("bank has no layer {layer}")))?;
        pairs.extend(enumerate_pairs(tax)?);
    }
    let k = manifest.instantiations;

    // (pair, domain) cells in canonical order.
    let cells: Vec<(ItemPair, usize)> = pairs
        .iter()
        .flat_map(|&p| domains.iter().map(move |d| (p, d.index)))
        .collect();

    struct CellResult {
        repeats: Vec<RepeatCell>,
        srs: ModalCell,
        pcs: Option<ModalCell>,
    }

    let results: Vec<CellResult> = exec.map(&cells, |&(pair, domain)| {
        let repeats = (1..=k)
            .map(|inst| {
                let s = table.neutral_scenario(pair, domain, inst as u8);
                let both = s.and_then(|s| Some((table.outcome(s, 1)?, table.outcome(s, 2)?)));
                RepeatCell {
                    agree: both.map(|(a, b)| a == b),
                    decisive_agree: both
                        .filter(|(a, b)| a.is_decisive() && b.is_decisive())
                        .map(|(a, b)| a == b),
                }
            })
            .collect();
        let pcs = table
            .bank
            .is_pcs_pair(pair)
            .then(|| modal_cell(pcs_outcomes(table, pair, domain)));
        CellResult {
            repeats,
            srs: modal_cell(srs_outcomes(table, pair, domain)),
            pcs,
        }
    });

    let frac = |xs: &mut dyn Iterator<Item = bool>| -> Option<f64> {
        let (mut yes, mut n) = (0usize, 0usize);
        for x in xs {
            n += 1;
            yes += x as usize;
        }
        (n > 0).then(|| yes as f64 / n as f64)
    };

    let all_repeats = || results.iter().flat_map(|r| r.repeats.iter());
    let trr_value = frac(&mut all_repeats().filter_map(|c| c.agree));
    let trr_decisive = frac(&mut all_repeats().filter_map(|c| c.decisive_agree));
    let trr_complete = all_repeats().filter(|c| c.agree.is_some()).count();
    let srs_value = mean(results.iter().filter_map(|r| r.srs.value));
    let srs_decisive = mean(results.iter().filter_map(|r| r.srs.decisive));
    let srs_complete = results.iter().filter(|r| r.srs.value.is_some()).count();

    let nd = domains.len();
    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut pcs_pair_values = Vec::new();
    let mut pcs_pair_decisive = Vec::new();
    let (mut pcs_complete, mut pcs_incomplete) = (0, 0);
    for (pi, &pair) in pairs.iter().enumerate() {
        let block = &results[pi * nd..(pi + 1) * nd];
        let pair_trr = frac(&mut block.iter().flat_map(|r| r.repeats.iter()).filter_map(|c| c.agree));
        let pair_srs = mean(block.iter().filter_map(|r| r.srs.value));
        let pair_pcs = if table.bank.is_pcs_pair(pair) {
            let cells: Vec<ModalCell> = block.iter().filter_map(|r| r.pcs).collect();
            pcs_complete += cells.iter().filter(|c| c.value.is_some()).count();
            pcs_incomplete += cells.iter().filter(|c| c.value.is_none()).count();
            let v = mean(cells.iter().filter_map(|c| c.value));
            if let Some(v) = v {
                pcs_pair_values.push(v);
            }
            if let Some(d) = mean(cells.iter().filter_map(|c| c.decisive)) {
                pcs_pair_decisive.push(d);
            }
            v
        } else {
            None
        };
        per_pair.push(PairReliability {
            pair,
            trr: pair_trr,
            srs: pair_srs,
            pcs: pair_pcs,
        });
    }

    let per_domain = domains
        .iter()
        .enumerate()
        .map(|(di, d)| {
            let in_domain = || results.iter().skip(di).step_by(nd);
            DomainReliability {
                domain: d.clone(),
                trr: frac(&mut in_domain().flat_map(|r| r.repeats.iter()).filter_map(|c| c.agree)),
                srs: mean(in_domain().filter_map(|r| r.srs.value)),
            }
        })
        .collect();

    let total_repeat_cells = results.len() * k;
    let (mut answered, mut abstained) = (0usize, 0usize);
    for s in table.bank.scenarios.iter().filter(|s| layers.contains(&s.layer)) {
        for repeat in [1, 2] {
            if let Some(o) = table.outcome(s, repeat) {
                answered += 1;
                abstained += (o == Outcome::Abstain) as usize;
            }
        }
    }
    let abstain_rate = if answered == 0 {
        Metric::Undefined {
            reason: "no transcripts".into(),
        }
    } else {
        Metric::Defined {
            value: abstained as f64 / answered as f64,
        }
    };

    let pcs_metric = if manifest.perspectives < 2 || pcs_complete + pcs_incomplete == 0 {
        Metric::Undefined {
            reason: "bank has no reframing scenarios for these layers".into(),
        }
    } else {
        metric(mean(pcs_pair_values.iter().copied()), "perspective")
    };
    let pcs_decisive = match &pcs_metric {
        Metric::Undefined { reason } => Metric::Undefined {
            reason: reason.clone(),
        },
        Metric::Defined { .. } => metric(mean(pcs_pair_decisive.iter().copied()), "decisive perspective"),
    };

    Ok(ReliabilityReport {
        trr: metric(trr_value, "repeat"),
        srs: metric(srs_value, "instantiation"),
        pcs: pcs_metric,
        trr_decisive: metric(trr_decisive, "decisive repeat"),
        srs_decisive: metric(srs_decisive, "decisive instantiation"),
        pcs_decisive,
        srs_floor: modal_floor(k),
        pcs_floor: modal_floor(manifest.perspectives),
        trr_cells: CellCounts {
            complete: trr_complete,
            incomplete: total_repeat_cells - trr_complete,
        },
        srs_cells: CellCounts {
            complete: srs_complete,
            incomplete: results.len() - srs_complete,
        },
        pcs_cells: CellCounts {
            complete: pcs_complete,
            incomplete: pcs_incomplete,
        },
        abstain_rate,
        per_pair,
        per_domain,
    })
}
