use serde::{Deserialize, Serialize};

use super::table::{Outcome, ResponseTable};
use crate::error::{Error, Result};
use crate::taxonomy::{ItemPair, LayerId};

/// Decisive pairwise win counts for one layer. `wins[i][j]` counts choices of
/// item `i` over item `j`; `abstains` is symmetric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub layer: LayerId,
    pub wins: Vec<Vec<u32>>,
    pub abstains: Vec<Vec<u32>>,
}

impl WinMatrix {
    pub fn new(layer: LayerId, n: usize) -> Self {
        WinMatrix {
            layer,
            wins: vec![vec![0; n]; n],
            abstains: vec![vec![0; n]; n],
        }
    }

    pub fn size(&self) -> usize {
        self.wins.len()
    }

    pub fn record(&mut self, pair: ItemPair, outcome: Outcome) {
        match outcome {
            Outcome::Lo => self.wins[pair.lo][pair.hi] += 1,
            Outcome::Hi => self.wins[pair.hi][pair.lo] += 1,
            Outcome::Abstain => {
                self.abstains[pair.lo][pair.hi] += 1;
                self.abstains[pair.hi][pair.lo] += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &WinMatrix) {
        for i in 0..self.size() {
            for j in 0..self.size() {
                self.wins[i][j] += other.wins[i][j];
                self.abstains[i][j] += other.abstains[i][j];
            }
        }
    }

    /// Total decisive wins of each item (its Copeland-style score).
    pub fn win_totals(&self) -> Vec<u64> {
        self.wins
            .iter()
            .map(|row| row.iter().map(|&w| w as u64).sum())
            .collect()
    }

    pub fn decisive_total(&self) -> u64 {
        self.win_totals().iter().sum()
    }

    /// Wins of `i` over `j` divided by decisive trials of the pair.
    pub fn win_rate(&self, i: usize, j: usize) -> Option<f64> {
        let total = self.wins[i][j] + self.wins[j][i];
        (total > 0).then(|| self.wins[i][j] as f64 / total as f64)
    }

    /// Decisive choices that contradict `order` (best first).
    pub fn upsets(&self, order: &[usize]) -> u64 {
        let mut n = 0;
        for (pos, &better) in order.iter().enumerate() {
            for &worse in &order[pos + 1..] {
                n += self.wins[worse][better] as u64;
            }
        }
        n
    }
}

/// Counts both repeats of every neutral scenario of `layer`, optionally
/// restricted to one domain.
pub fn win_matrix(table: &ResponseTable<'_>, layer: LayerId, domain: Option<usize>) -> Result<WinMatrix> {
    let tax = table
        .bank
        .taxonomy(layer)
        .ok_or_else(|| Error::Data(format!("bank has no layer {layer}")))?;
    let mut m = WinMatrix::new(layer, tax.len());
    for s in table.neutral_scenarios(layer) {
        if domain.is_some_and(|d| d != s.domain.index) {
            continue;
        }
        for repeat in [1, 2] {
            if let Some(o) = table.outcome(s, repeat) {
                m.record(s.pair, o);
            }
        }
    }
    Ok(m)
}

/// Shannon entropy in bits of the normalized win-total distribution.
pub fn value_entropy(m: &WinMatrix) -> Result<f64> {
    let totals = m.win_totals();
    let sum: u64 = totals.iter().sum();
    if sum == 0 {
        return Err(Error::UndefinedMetric(format!(
            "value entropy of {} has no decisive choices",
            m.layer
        )));
    }
    Ok(entropy_bits(&totals, sum))
}

fn entropy_bits(counts: &[u64], sum: u64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / sum as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// Entropy of a perfectly transitive single round robin over `n` items,
/// the smallest value complete pairwise data can produce.
pub fn round_robin_floor(n: usize) -> f64 {
    let counts: Vec<u64> = (0..n as u64).collect();
    let sum = counts.iter().sum();
    if sum == 0 {
        return 0.0;
    }
    entropy_bits(&counts, sum)
}

/// Items by descending win total, ties broken by taxonomy index.
pub fn ranking(m: &WinMatrix) -> Vec<usize> {
    let totals = m.win_totals();
    let mut order: Vec<usize> = (0..m.size()).collect();
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round_robin(order: &[usize]) -> WinMatrix {
        let mut m = WinMatrix::new(LayerId::Normative, order.len());
        for (pos, &better) in order.iter().enumerate() {
            for &worse in &order[pos + 1..] {
                m.wins[better][worse] += 1;
            }
        }
        m
    }

    #[test]
    fn entropy_of_round_robin_matches_closed_form() {
        let m = round_robin(&[3, 1, 4, 0, 5, 9, 2, 6, 8, 7]);
        let closed: f64 = -(1..=9)
            .map(|k| {
                let p = k as f64 / 45.0;
                p * p.log2()
            })
            .sum::<f64>();
        assert!((value_entropy(&m).unwrap() - closed).abs() < 1e-12);
        assert!((closed - 2.957).abs() < 5e-4, "{closed}");
        assert!((round_robin_floor(10) - closed).abs() < 1e-12);
    }

    #[test]
    fn uniform_wins_give_log2_n() {
        let mut m = WinMatrix::new(LayerId::Source, 10);
        for i in 0..10 {
            m.wins[i][(i + 1) % 10] = 4;
        }
        assert!((value_entropy(&m).unwrap() - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn single_winner_gives_zero() {
        let mut m = WinMatrix::new(LayerId::Source, 10);
        m.wins[2][5] = 7;
        m.wins[2][8] = 1;
        assert_eq!(value_entropy(&m).unwrap(), 0.0);
    }

    #[test]
    fn no_decisive_choice_is_undefined() {
        let mut m = WinMatrix::new(LayerId::Source, 10);
        m.record(ItemPair::new(LayerId::Source, 0, 1).unwrap(), Outcome::Abstain);
        assert!(matches!(value_entropy(&m), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ranking_tie_breaks() {
        let m = WinMatrix::new(LayerId::Epistemic, 10);
        assert_eq!(ranking(&m), (0..10).collect::<Vec<_>>());
        let mut m = WinMatrix::new(LayerId::Epistemic, 4);
        m.wins[3][0] = 2;
        m.wins[1][2] = 2;
        assert_eq!(ranking(&m), vec![1, 3, 0, 2]);
    }

    #[test]
    fn ranking_recovers_round_robin_order() {
        let order = vec![7, 2, 9, 0, 1, 8, 3, 6, 5, 4];
        let m = round_robin(&order);
        assert_eq!(ranking(&m), order);
        assert_eq!(m.upsets(&order), 0);
    }

    proptest! {
        #[test]
        fn entropy_bounded(cells in prop::collection::vec(0u32..20, 100)) {
            let mut m = WinMatrix::new(LayerId::Normative, 10);
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        m.wins[i][j] = cells[i * 10 + j];
                    }
                }
            }
            if let Ok(h) = value_entropy(&m) {
                prop_assert!(h >= 0.0);
                prop_assert!(h <= 10f64.log2() + 1e-12);
                let totals = m.win_totals();
                let uniform = totals.iter().all(|&t| t == totals[0]);
                prop_assert_eq!(uniform, (h - 10f64.log2()).abs() < 1e-12);
            }
        }

        #[test]
        fn relabeling_permutes_ranking(
            cells in prop::collection::vec(0u32..6, 100),
            perm in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let mut m = WinMatrix::new(LayerId::Normative, 10);
            let mut relabeled = WinMatrix::new(LayerId::Normative, 10);
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        m.wins[i][j] = cells[i * 10 + j];
                        relabeled.wins[perm[i]][perm[j]] = cells[i * 10 + j];
                    }
                }
            }
            let totals = m.win_totals();
            let distinct = totals.iter().collect::<std::collections::BTreeSet<_>>().len() == 10;
            if distinct {
                let mapped: Vec<usize> = ranking(&m).iter().map(|&i| perm[i]).collect();
                prop_assert_eq!(mapped, ranking(&relabeled));
            }
            if m.decisive_total() > 0 {
                prop_assert!((value_entropy(&m).unwrap() - value_entropy(&relabeled).unwrap()).abs() < 1e-12);
            }
        }
    }
}
