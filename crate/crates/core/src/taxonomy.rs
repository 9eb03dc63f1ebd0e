//! Layer taxonomies and pair enumeration.
//!
//! Three layers are measured directly: normative values, evidence types and
//! source types. Each ships as an editable TOML file with ten items. The data
//! layer is never part of a bank; it is derived from the other three.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

/// Number of items every bank layer carries.
pub const LAYER_SIZE: usize = 10;

pub const SCHWARTZ_VALUES: [&str; LAYER_SIZE] = [
    "Universalism",
    "Benevolence",
    "Conformity",
    "Tradition",
    "Security",
    "Power",
    "Achievement",
    "Hedonism",
    "Stimulation",
    "Self-Direction",
];

pub const SCHWARTZ_CATEGORIES: [&str; 4] = [
    "Self-Transcendence",
    "Conservation",
    "Self-Enhancement",
    "Openness to Change",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerId {
    #[serde(rename = "L4-normative")]
    Normative,
    #[serde(rename = "L3-epistemic")]
    Epistemic,
    #[serde(rename = "L2-source")]
    Source,
}

impl LayerId {
    pub const ALL: [LayerId; 3] = [LayerId::Normative, LayerId::Epistemic, LayerId::Source];

    pub fn tag(self) -> &'static str {
        match self {
            LayerId::Normative => "L4-normative",
            LayerId::Epistemic => "L3-epistemic",
            LayerId::Source => "L2-source",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            LayerId::Normative => "L4",
            LayerId::Epistemic => "L3",
            LayerId::Source => "L2",
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L4-normative" | "L4" => Ok(LayerId::Normative),
            "L3-epistemic" | "L3" => Ok(LayerId::Epistemic),
            "L2-source" | "L2" => Ok(LayerId::Source),
            other => Err(Error::Config(format!("unknown layer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyItem {
    pub index: usize,
    pub name: String,
    /// Higher-order grouping.
    pub category: String,
    /// Respondent-facing wording of what choosing this item means.
    pub stake: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub format_version: u32,
    pub layer: LayerId,
    pub version: String,
    /// Question placed before the answer directive.
    pub question: String,
    pub items: Vec<TaxonomyItem>,
}

/// Unordered item pair in canonical order, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemPair {
    pub layer: LayerId,
    pub lo: usize,
    pub hi: usize,
}

impl ItemPair {
    pub fn new(layer: LayerId, a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::Data(format!("degenerate pair ({a},{a}) on {layer}")));
        }
        Ok(ItemPair {
            layer,
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    pub fn contains(&self, item: usize) -> bool {
        self.lo == item || self.hi == item
    }
}

impl fmt::Display for ItemPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.layer.short(), self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Domain {
    pub index: usize,
    pub name: String,
}

impl Taxonomy {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let tax: Taxonomy = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if tax.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                path: origin.to_path_buf(),
                found: tax.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(tax)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn builtin(layer: LayerId) -> Taxonomy {
        let (text, name) = match layer {
            LayerId::Normative => (include_str!("../data/taxonomy_l4.toml"), "taxonomy_l4.toml"),
            LayerId::Epistemic => (include_str!("../data/taxonomy_l3.toml"), "taxonomy_l3.toml"),
            LayerId::Source => (include_str!("../data/taxonomy_l2.toml"), "taxonomy_l2.toml"),
        };
        Self::from_toml_str(text, Path::new(name)).expect("builtin taxonomy parses")
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Structural checks: at least two items, indices exactly `0..n` in
    /// order, distinct non-empty names.
    pub fn validate(&self) -> Result<()> {
        if self.items.len() < 2 {
            return Err(Error::Taxonomy(format!(
                "{} has {} items, need at least 2",
                self.layer,
                self.items.len()
            )));
        }
        let mut names = BTreeSet::new();
        for (pos, item) in self.items.iter().enumerate() {
            if item.index != pos {
                return Err(Error::Taxonomy(format!(
                    "{}: item `{}` has index {} at position {} (duplicate or out-of-order index)",
                    self.layer, item.name, item.index, pos
                )));
            }
            if item.name.trim().is_empty() {
                return Err(Error::Taxonomy(format!("{}: item {pos} has no name", self.layer)));
            }
            if !names.insert(item.name.as_str()) {
                return Err(Error::Taxonomy(format!(
                    "{}: duplicate item name `{}`",
                    self.layer, item.name
                )));
            }
        }
        Ok(())
    }

    /// Bank-level checks on top of [`validate`](Self::validate): exactly ten
    /// items, and for the normative layer the ten basic values under the four
    /// higher-order categories.
    pub fn validate_for_bank(&self) -> Result<()> {
        self.validate()?;
        if self.items.len() != LAYER_SIZE {
            return Err(Error::Taxonomy(format!(
                "{} has {} items, a bank layer needs exactly {LAYER_SIZE}",
                self.layer,
                self.items.len()
            )));
        }
        if self.layer == LayerId::Normative {
            for (item, expected) in self.items.iter().zip(SCHWARTZ_VALUES) {
                if item.name != expected {
                    return Err(Error::Taxonomy(format!(
                        "normative item {} is `{}`, expected `{expected}`",
                        item.index, item.name
                    )));
                }
                if !SCHWARTZ_CATEGORIES.contains(&item.category.as_str()) {
                    return Err(Error::Taxonomy(format!(
                        "`{}` has unknown higher-order category `{}`",
                        item.name, item.category
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn item_by_name(&self, name: &str) -> Option<&TaxonomyItem> {
        self.items
            .iter()
            .find(|it| it.name.eq_ignore_ascii_case(name))
    }

    /// Distinct categories in order of first appearance.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for item in &self.items {
            if !out.contains(&item.category.as_str()) {
                out.push(&item.category);
            }
        }
        out
    }
}

/// All unordered pairs of a taxonomy in lexicographic `(lo, hi)` order.
pub fn enumerate_pairs(taxonomy: &Taxonomy) -> Result<Vec<ItemPair>> {
    taxonomy.validate()?;
    let n = taxonomy.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for lo in 0..n {
        for hi in lo + 1..n {
            pairs.push(ItemPair {
                layer: taxonomy.layer,
                lo,
                hi,
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
pub(crate) fn test_taxonomy(layer: LayerId, n: usize) -> Taxonomy {
    Taxonomy {
        format_version: FORMAT_VERSION,
        layer,
        version: "test".into(),
        question: "Which?".into(),
        items: (0..n)
            .map(|i| TaxonomyItem {
                index: i,
                name: format!("item-{i}"),
                category: "c".into(),
                stake: format!("stake {i}"),
            })
            .collect(),
    }
}
