//! Synthetic respondents with known ground truth.
//!
//! Every draw is a hash of the agent seed and the presentation, never a
//! stateful generator, so choices do not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bank::{OptionLabel, Scenario};
use crate::cascade::{
    predict_lower_layers, rank_scores, CompositeWeights, DataItemTag, FixtureSet, FreeformScenario, MappingRuleSet,
    Stance, StanceLabel,
};
use crate::error::{Error, Result};
use crate::hashing::{u64_of, unit_draw};
use crate::taxonomy::{LayerId, Taxonomy, LAYER_SIZE};

/// Domains no default bank uses, for held-out fixtures.
pub const HELDOUT_DOMAINS: [&str; 4] = ["agriculture", "energy", "transport", "housing"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingEntry {
    /// Matches any instantiation when absent.
    #[serde(default)]
    pub instantiation: Option<u8>,
    /// Matches any perspective when absent.
    #[serde(default)]
    pub perspective: Option<u8>,
    /// Position `k` of the effective order is position `permutation[k]` of
    /// the base order.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Behavior {
    /// Prefers the higher-ranked item, flipping with probability `epsilon`.
    Strict {
        orders: BTreeMap<LayerId, Vec<usize>>,
        #[serde(default)]
        epsilon: f64,
    },
    /// Logistic choice on utility differences.
    BradleyTerry {
        utilities: BTreeMap<LayerId, Vec<f64>>,
        temperature: f64,
    },
    /// Deterministic, but the order depends on the surface presentation.
    Framing {
        orders: BTreeMap<LayerId, Vec<usize>>,
        table: Vec<FramingEntry>,
    },
    /// Fair coin per presentation.
    Incoherent,
}

/// Flips the agent's choice on one pair within the listed domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reversal {
    pub layer: LayerId,
    pub items: [usize; 2],
    /// All domains when empty.
    #[serde(default)]
    pub domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub behavior: Behavior,
    #[serde(default)]
    pub reversals: Vec<Reversal>,
}

fn check_order(order: &[usize], what: &str) -> Result<()> {
    let mut seen = vec![false; order.len()];
    for &i in order {
        if i >= order.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Agent(format!("{what} {order:?} is not a permutation")));
        }
    }
    Ok(())
}

fn identity() -> Vec<usize> {
    (0..LAYER_SIZE).collect()
}

fn all_layers<T: Clone>(value: T) -> BTreeMap<LayerId, T> {
    LayerId::ALL.iter().map(|l| (*l, value.clone())).collect()
}

impl AgentSpec {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let spec: AgentSpec = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.behavior {
            Behavior::Strict { orders, epsilon } => {
                if !(0.0..0.5).contains(epsilon) {
                    return Err(Error::Agent(format!("epsilon {epsilon} outside [0, 0.5)")));
                }
                for (layer, o) in orders {
                    check_order(o, &format!("{layer} order"))?;
                }
            }
            Behavior::BradleyTerry { utilities, temperature } => {
                if !(*temperature > 0.0 && temperature.is_finite()) {
                    return Err(Error::Agent(format!("temperature {temperature} must be positive")));
                }
                if utilities.values().flatten().any(|u| !u.is_finite()) {
                    return Err(Error::Agent("utilities must be finite".into()));
                }
            }
            Behavior::Framing { orders, table } => {
                for (layer, o) in orders {
                    check_order(o, &format!("{layer} order"))?;
                    for e in table {
                        if e.permutation.len() != o.len() {
                            return Err(Error::Agent(format!(
                                "permutation of length {} for a {}-item {layer} order",
                                e.permutation.len(),
                                o.len()
                            )));
                        }
                    }
                }
                for e in table {
                    check_order(&e.permutation, "framing permutation")?;
                }
            }
            Behavior::Incoherent => {}
        }
        for r in &self.reversals {
            if r.items[0] == r.items[1] {
                return Err(Error::Agent(format!("reversal on a single item {}", r.items[0])));
            }
        }
        Ok(())
    }

    /// Strict agent with the identity order on every layer.
    pub fn strict(id: &str, epsilon: f64, seed: u64) -> Self {
        AgentSpec {
            id: id.into(),
            seed,
            behavior: Behavior::Strict {
                orders: all_layers(identity()),
                epsilon,
            },
            reversals: Vec::new(),
        }
    }

    /// Strict agent whose evidence and source orders satisfy every
    /// preference the rules predict from `normative_order`.
    pub fn strict_consistent(
        id: &str,
        normative_order: Vec<usize>,
        rules: &MappingRuleSet,
        taxonomies: &BTreeMap<LayerId, &Taxonomy>,
    ) -> Result<Self> {
        let predictions = predict_lower_layers(&normative_order, rules, taxonomies)?;
        let mut orders = BTreeMap::new();
        orders.insert(LayerId::Normative, normative_order);
        for layer in [LayerId::Epistemic, LayerId::Source] {
            let n = taxonomies.get(&layer).map_or(LAYER_SIZE, |t| t.len());
            let order = match predictions.layer(layer) {
                Some(p) => p.linear_extension(n)?,
                None => (0..n).collect(),
            };
            orders.insert(layer, order);
        }
        let spec = AgentSpec {
            id: id.into(),
            seed: 0,
            behavior: Behavior::Strict { orders, epsilon: 0.0 },
            reversals: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Bradley-Terry agent on evenly spaced utilities, with the spacing
    /// solved so the mean over all pairs of `q(1 - q)` equals `p(1 - p)`,
    /// where `q` is the pair's choice probability. Repeat agreement then
    /// averages `p^2 + (1 - p)^2` and three-trial modal agreement
    /// `1 - p(1 - p)`.
    pub fn bradley_terry_reference(id: &str, p: f64, seed: u64) -> Result<Self> {
        let gap = bt_reference_gap(LAYER_SIZE, p)?;
        let utilities: Vec<f64> = (0..LAYER_SIZE).map(|k| -(k as f64) * gap).collect();
        Ok(AgentSpec {
            id: id.into(),
            seed,
            behavior: Behavior::BradleyTerry {
                utilities: all_layers(utilities),
                temperature: 1.0,
            },
            reversals: Vec::new(),
        })
    }

    /// Identity order, reversed whenever the second instantiation is shown.
    pub fn framing_reference(id: &str) -> Self {
        AgentSpec {
            id: id.into(),
            seed: 0,
            behavior: Behavior::Framing {
                orders: all_layers(identity()),
                table: vec![FramingEntry {
                    instantiation: Some(2),
                    perspective: None,
                    permutation: identity().into_iter().rev().collect(),
                }],
            },
            reversals: Vec::new(),
        }
    }

    pub fn incoherent(id: &str, seed: u64) -> Self {
        AgentSpec {
            id: id.into(),
            seed,
            behavior: Behavior::Incoherent,
            reversals: Vec::new(),
        }
    }

    /// The agent's noise-free order on a layer, if it has one.
    pub fn base_order(&self, layer: LayerId) -> Option<Vec<usize>> {
        match &self.behavior {
            Behavior::Strict { orders, .. } | Behavior::Framing { orders, .. } => orders.get(&layer).cloned(),
            Behavior::BradleyTerry { utilities, .. } => utilities.get(&layer).map(|u| {
                let mut order: Vec<usize> = (0..u.len()).collect();
                order.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
                order
            }),
            Behavior::Incoherent => None,
        }
    }
}

/// Mean of `q(1 - q)` over all pairs of `n` evenly spaced utilities.
fn bt_mean_variance(n: usize, gap: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for d in 1..n {
        let q = 1.0 / (1.0 + (-(d as f64) * gap).exp());
        sum += (n - d) as f64 * q * (1.0 - q);
        count += n - d;
    }
    sum / count as f64
}

pub fn bt_reference_gap(n: usize, p: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&p) || n < 2 {
        return Err(Error::Agent(format!("decisiveness {p} outside [0.5, 1)")));
    }
    let target = p * (1.0 - p);
    let (mut lo, mut hi) = (0.0f64, 50.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bt_mean_variance(n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn position(order: &[usize], item: usize) -> Result<usize> {
    order
        .iter()
        .position(|&i| i == item)
        .ok_or_else(|| Error::Agent(format!("item {item} outside the agent's order")))
}

fn layer_entry<T>(map: &BTreeMap<LayerId, T>, layer: LayerId) -> Result<&T> {
    map.get(&layer)
        .ok_or_else(|| Error::Agent(format!("agent has no {layer} preferences")))
}

fn draw(spec: &AgentSpec, tag: &str, scenario: &Scenario, repeat: u8) -> f64 {
    unit_draw(&[
        &spec.seed.to_le_bytes(),
        tag.as_bytes(),
        scenario.id.as_bytes(),
        &[repeat],
    ])
}

/// The option the agent picks on one presentation.
pub fn choose(spec: &AgentSpec, scenario: &Scenario, repeat: u8) -> Result<OptionLabel> {
    let (lo, hi) = (scenario.pair.lo, scenario.pair.hi);
    let mut pick = match &spec.behavior {
        Behavior::Strict { orders, epsilon } => {
            let order = layer_entry(orders, scenario.layer)?;
            let (better, worse) = if position(order, lo)? < position(order, hi)? {
                (lo, hi)
            } else {
                (hi, lo)
            };
            if *epsilon > 0.0 && draw(spec, "strict", scenario, repeat) < *epsilon {
                worse
            } else {
                better
            }
        }
        Behavior::BradleyTerry { utilities, temperature } => {
            let u = layer_entry(utilities, scenario.layer)?;
            let (ul, uh) = match (u.get(lo), u.get(hi)) {
                (Some(a), Some(b)) => (*a, *b),
                _ => return Err(Error::Agent(format!("no utility for pair {}", scenario.pair))),
            };
            let p_lo = 1.0 / (1.0 + (-(ul - uh) / temperature).exp());
            if draw(spec, "bradley-terry", scenario, repeat) < p_lo {
                lo
            } else {
                hi
            }
        }
        Behavior::Framing { orders, table } => {
            let base = layer_entry(orders, scenario.layer)?;
            let entry = table.iter().find(|e| {
                e.instantiation.is_none_or(|i| i == scenario.instantiation)
                    && e.perspective.is_none_or(|p| p == scenario.perspective)
            });
            let effective: Vec<usize> = match entry {
                Some(e) => e.permutation.iter().map(|&k| base[k]).collect(),
                None => base.clone(),
            };
            if position(&effective, lo)? < position(&effective, hi)? {
                lo
            } else {
                hi
            }
        }
        Behavior::Incoherent => {
            if draw(spec, "incoherent", scenario, repeat) < 0.5 {
                lo
            } else {
                hi
            }
        }
    };
    let reversed = spec.reversals.iter().any(|r| {
        r.layer == scenario.layer
            && scenario.pair.contains(r.items[0])
            && scenario.pair.contains(r.items[1])
            && (r.domains.is_empty() || r.domains.contains(&scenario.domain.name))
    });
    if reversed {
        pick = if pick == lo { hi } else { lo };
    }
    scenario
        .option_map
        .label_of(pick)
        .ok_or_else(|| Error::Agent(format!("scenario {} does not show item {pick}", scenario.id)))
}

/// Which stance the agent endorses, or `None` when its own scoring ties.
pub fn endorse(
    spec: &AgentSpec,
    fixture_id: &str,
    tags: [&DataItemTag; 2],
    weights: CompositeWeights,
) -> Result<Option<StanceLabel>> {
    if matches!(spec.behavior, Behavior::Incoherent) {
        let u = unit_draw(&[&spec.seed.to_le_bytes(), b"endorse", fixture_id.as_bytes()]);
        return Ok(Some(if u < 0.5 { StanceLabel::First } else { StanceLabel::Second }));
    }
    let order = |layer| {
        spec.base_order(layer)
            .ok_or_else(|| Error::Agent(format!("agent has no {layer} preferences")))
    };
    let scores = crate::cascade::RankScores {
        normative: rank_scores(&order(LayerId::Normative)?),
        epistemic: rank_scores(&order(LayerId::Epistemic)?),
        source: rank_scores(&order(LayerId::Source)?),
    };
    let a = crate::cascade::composite_score(tags[0], &scores, weights)?;
    let b = crate::cascade::composite_score(tags[1], &scores, weights)?;
    Ok(match a.total_cmp(&b) {
        std::cmp::Ordering::Greater => Some(StanceLabel::First),
        std::cmp::Ordering::Less => Some(StanceLabel::Second),
        std::cmp::Ordering::Equal => None,
    })
}

fn one_hot(value: usize) -> Vec<f64> {
    let mut v = vec![0.0; LAYER_SIZE];
    v[value] = 1.0;
    v
}

/// Free-form fixtures labelled by the agent's own endorsement. Fixtures the
/// agent's scoring cannot separate are skipped.
pub fn generate_fixtures(
    spec: &AgentSpec,
    count: usize,
    seed: u64,
    domains: &[String],
    weights: CompositeWeights,
) -> Result<FixtureSet> {
    if domains.is_empty() {
        return Err(Error::Config("fixture generation needs at least one domain".into()));
    }
    let names = |layer| Taxonomy::builtin(layer).items.into_iter().map(|i| i.name).collect::<Vec<_>>();
    let (values, evidence, sources) = (
        names(LayerId::Normative),
        names(LayerId::Epistemic),
        names(LayerId::Source),
    );
    let mut fixtures = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while fixtures.len() < count {
        if attempt > 100 * count as u64 + 1000 {
            return Err(Error::Agent(format!("agent {} separates too few fixtures", spec.id)));
        }
        let pick = |what: &str, n: usize| {
            (u64_of(&[&seed.to_le_bytes(), b"fixture", &attempt.to_le_bytes(), what.as_bytes()]) % n as u64) as usize
        };
        let v1 = pick("v1", LAYER_SIZE);
        let v2 = (v1 + 1 + pick("v2", LAYER_SIZE - 1)) % LAYER_SIZE;
        let tags = [
            DataItemTag {
                value_relevance: one_hot(v1),
                evidence_type: pick("e1", LAYER_SIZE),
                source_type: pick("s1", LAYER_SIZE),
            },
            DataItemTag {
                value_relevance: one_hot(v2),
                evidence_type: pick("e2", LAYER_SIZE),
                source_type: pick("s2", LAYER_SIZE),
            },
        ];
        let domain = &domains[pick("domain", domains.len())];
        let id = format!("ff-{seed}-{attempt}");
        attempt += 1;
        let Some(label) = endorse(spec, &id, [&tags[0], &tags[1]], weights)? else {
            continue;
        };
        let stance = |t: &DataItemTag, v: usize| Stance {
            text: format!(
                "Act on {} from {} to protect {}.",
                evidence[t.evidence_type],
                sources[t.source_type],
                values[v].to_lowercase()
            ),
            tag: Some(t.clone()),
        };
        let [t1, t2] = tags;
        fixtures.push(FreeformScenario {
            id,
            domain: domain.clone(),
            narrative: format!("A {domain} team must choose between two proposals and explain the choice."),
            stances: [stance(&t1, v1), stance(&t2, v2)],
            label,
        });
    }
    Ok(FixtureSet::new(format!("simulated agent {}", spec.id), fixtures))
}
