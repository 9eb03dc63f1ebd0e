use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bank::{Bank, Scenario};
use crate::error::{Error, Result};
use crate::gateway::{Choice, Transcript};
use crate::taxonomy::{ItemPair, LayerId};

/// A choice expressed in items rather than option labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Lo,
    Hi,
    Abstain,
}

impl Outcome {
    pub fn from_choice(scenario: &Scenario, choice: Choice) -> Outcome {
        match choice.label() {
            None => Outcome::Abstain,
            Some(label) => {
                if scenario.option_map.item(label) == scenario.pair.lo {
                    Outcome::Lo
                } else {
                    Outcome::Hi
                }
            }
        }
    }

    pub fn is_decisive(self) -> bool {
        self != Outcome::Abstain
    }
}

/// Fraction of trials equal to the most frequent outcome.
pub fn modal_fraction(outcomes: &[Outcome]) -> f64 {
    let mut counts = [0usize; 3];
    for o in outcomes {
        counts[*o as usize] += 1;
    }
    let max = counts.into_iter().max().unwrap_or(0);
    max as f64 / outcomes.len() as f64
}

type NeutralKey = (LayerId, usize, usize, usize, u8);
type FramedKey = (LayerId, usize, usize, usize, u8);

/// Transcripts resolved against a bank, keyed by scenario and repeat.
pub struct ResponseTable<'a> {
    pub bank: &'a Bank,
    outcomes: HashMap<(&'a str, u8), Outcome>,
    neutral: HashMap<NeutralKey, &'a Scenario>,
    framed: HashMap<FramedKey, &'a Scenario>,
    transcripts: usize,
    abstains: usize,
}

impl<'a> ResponseTable<'a> {
    /// Later transcripts for the same presentation replace earlier ones.
    pub fn build(bank: &'a Bank, transcripts: &[Transcript]) -> Result<Self> {
        let mut neutral = HashMap::new();
        let mut framed = HashMap::new();
        for s in &bank.scenarios {
            if s.is_neutral() {
                neutral.insert(
                    (s.layer, s.pair.lo, s.pair.hi, s.domain.index, s.instantiation),
                    s,
                );
            } else if s.instantiation == 1 {
                framed.insert(
                    (s.layer, s.pair.lo, s.pair.hi, s.domain.index, s.perspective),
                    s,
                );
            }
        }
        let mut outcomes = HashMap::with_capacity(transcripts.len());
        for t in transcripts {
            let scenario = bank.scenario(&t.scenario_id).ok_or_else(|| {
                Error::Data(format!("transcript references unknown scenario `{}`", t.scenario_id))
            })?;
            outcomes.insert(
                (scenario.id.as_str(), t.repeat),
                Outcome::from_choice(scenario, t.parsed),
            );
        }
        let abstains = outcomes.values().filter(|o| **o == Outcome::Abstain).count();
        Ok(ResponseTable {
            bank,
            transcripts: outcomes.len(),
            abstains,
            outcomes,
            neutral,
            framed,
        })
    }

    pub fn outcome(&self, scenario: &Scenario, repeat: u8) -> Option<Outcome> {
        self.outcomes.get(&(scenario.id.as_str(), repeat)).copied()
    }

    pub fn neutral_scenario(&self, pair: ItemPair, domain: usize, instantiation: u8) -> Option<&'a Scenario> {
        self.neutral
            .get(&(pair.layer, pair.lo, pair.hi, domain, instantiation))
            .copied()
    }

    /// Scenario for one perspective of the reframing set; perspective 0 is the
    /// neutral first instantiation.
    pub fn framed_scenario(&self, pair: ItemPair, domain: usize, perspective: u8) -> Option<&'a Scenario> {
        if perspective == 0 {
            return self.neutral_scenario(pair, domain, 1);
        }
        self.framed
            .get(&(pair.layer, pair.lo, pair.hi, domain, perspective))
            .copied()
    }

    pub fn neutral_scenarios(&self, layer: LayerId) -> impl Iterator<Item = &'a Scenario> + '_ {
        self.bank
            .scenarios
            .iter()
            .filter(move |s| s.layer == layer && s.is_neutral())
    }

    pub fn transcript_count(&self) -> usize {
        self.transcripts
    }

    pub fn abstain_count(&self) -> usize {
        self.abstains
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modal_fraction_cases() {
        use Outcome::*;
        assert_eq!(modal_fraction(&[Lo, Lo, Lo]), 1.0);
        assert_eq!(modal_fraction(&[Lo, Lo, Hi]), 2.0 / 3.0);
        assert_eq!(modal_fraction(&[Lo, Hi, Abstain]), 1.0 / 3.0);
        assert_eq!(modal_fraction(&[Lo, Lo, Lo, Hi, Hi]), 0.6);
        assert_eq!(modal_fraction(&[Lo, Lo, Hi, Hi, Abstain]), 0.4);
    }
}
