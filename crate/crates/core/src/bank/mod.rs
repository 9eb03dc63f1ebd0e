//! Scenario bank generation.
//!
//! A bank holds, per layer, every item pair in every domain under `K`
//! narrative instantiations at the neutral perspective, plus a reframing set
//! for a seeded subset of pairs: instantiation 1 under perspectives `1..P`.
//! The neutral instantiation-1 scenario doubles as perspective 0 of that set.

mod templates;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use templates::{DomainTemplate, Perspective, Story, Templates};

use crate::error::{Error, Result};
use crate::hashing::{hex_digest, u64_of};
use crate::records::{self, Versioned};
use crate::taxonomy::{enumerate_pairs, Domain, ItemPair, LayerId, Taxonomy};
use crate::FORMAT_VERSION;

pub const DEFAULT_SEED: u64 = 2026;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENARIOS_FILE: &str = "scenarios.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionLabel {
    A,
    B,
}

impl fmt::Display for OptionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionLabel::A => "A",
            OptionLabel::B => "B",
        })
    }
}

/// Which pair item is shown as option A and which as option B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptionMap {
    pub a: usize,
    pub b: usize,
}

impl OptionMap {
    pub fn item(&self, label: OptionLabel) -> usize {
        match label {
            OptionLabel::A => self.a,
            OptionLabel::B => self.b,
        }
    }

    pub fn label_of(&self, item: usize) -> Option<OptionLabel> {
        if item == self.a {
            Some(OptionLabel::A)
        } else if item == self.b {
            Some(OptionLabel::B)
        } else {
            None
        }
    }
}

/// Maps the pair onto option sides by the parity of `side_seed`: even puts
/// the lower-index item on A.
pub fn assign_option_sides(pair: ItemPair, side_seed: u64) -> OptionMap {
    if side_seed & 1 == 0 {
        OptionMap {
            a: pair.lo,
            b: pair.hi,
        }
    } else {
        OptionMap {
            a: pair.hi,
            b: pair.lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub layer: LayerId,
    pub pair: ItemPair,
    pub domain: Domain,
    /// 1-based.
    pub instantiation: u8,
    /// 0 is the neutral narrator.
    pub perspective: u8,
    pub side_seed: u64,
    pub option_map: OptionMap,
    pub prompt: String,
}

impl Scenario {
    pub fn is_neutral(&self) -> bool {
        self.perspective == 0
    }
}

/// Stable content-derived id.
pub fn scenario_id(
    pair: ItemPair,
    domain: usize,
    instantiation: u8,
    perspective: u8,
    side_seed: u64,
) -> String {
    let digest = hex_digest(&[
        pair.layer.tag().as_bytes(),
        &(pair.lo as u64).to_le_bytes(),
        &(pair.hi as u64).to_le_bytes(),
        &(domain as u64).to_le_bytes(),
        &[instantiation, perspective],
        &side_seed.to_le_bytes(),
    ]);
    format!(
        "{}-{}{}-d{}-i{}-v{}-{}",
        pair.layer.short(),
        pair.lo,
        pair.hi,
        domain,
        instantiation,
        perspective,
        &digest[..10]
    )
}

#[derive(Debug, Clone)]
pub struct BankConfig {
    pub seed: u64,
    pub layers: Vec<LayerId>,
    pub taxonomies: BTreeMap<LayerId, Taxonomy>,
    pub templates: Templates,
    /// Domain names, each present in `templates`.
    pub domains: Vec<String>,
    pub instantiations: usize,
    pub perspectives: usize,
    pub pcs_pairs: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        let templates = Templates::builtin();
        BankConfig {
            seed: DEFAULT_SEED,
            layers: LayerId::ALL.to_vec(),
            taxonomies: LayerId::ALL
                .iter()
                .map(|&l| (l, Taxonomy::builtin(l)))
                .collect(),
            domains: templates.domains.iter().map(|d| d.name.clone()).collect(),
            templates,
            instantiations: 3,
            perspectives: 5,
            pcs_pairs: 10,
        }
    }
}

/// On-disk form of [`BankConfig`]. Paths are relative to the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfigFile {
    pub format_version: u32,
    pub seed: Option<u64>,
    pub layers: Option<Vec<LayerId>>,
    pub domains: Option<Vec<String>>,
    pub instantiations: Option<usize>,
    pub perspectives: Option<usize>,
    pub pcs_pairs: Option<usize>,
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub taxonomies: BTreeMap<LayerId, PathBuf>,
}

impl BankConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: BankConfigFile = toml::from_str(text).map_err(|e| Error::Toml {
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
        let base = origin.parent().unwrap_or(Path::new("."));
        let mut cfg = BankConfig::default();
        if let Some(seed) = file.seed {
            cfg.seed = seed;
        }
        if let Some(layers) = file.layers {
            cfg.layers = layers;
        }
        if let Some(path) = file.templates {
            cfg.templates = Templates::load(&base.join(path))?;
            cfg.domains = cfg.templates.domains.iter().map(|d| d.name.clone()).collect();
        }
        if let Some(domains) = file.domains {
            cfg.domains = domains;
        }
        if let Some(k) = file.instantiations {
            cfg.instantiations = k;
        }
        if let Some(p) = file.perspectives {
            cfg.perspectives = p;
        }
        if let Some(n) = file.pcs_pairs {
            cfg.pcs_pairs = n;
        }
        for (layer, path) in file.taxonomies {
            let tax = Taxonomy::load(&base.join(path))?;
            if tax.layer != layer {
                return Err(Error::Config(format!(
                    "taxonomy file for {layer} declares layer {}",
                    tax.layer
                )));
            }
            cfg.taxonomies.insert(layer, tax);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    fn validate(&self) -> Result<Vec<(Domain, &DomainTemplate)>> {
        if self.layers.is_empty() {
            return Err(Error::Config("no layers selected".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if self.layers[..i].contains(layer) {
                return Err(Error::Config(format!("layer {layer} listed twice")));
            }
            let tax = self
                .taxonomies
                .get(layer)
                .ok_or_else(|| Error::Config(format!("no taxonomy for layer {layer}")))?;
            tax.validate_for_bank()?;
        }
        if self.instantiations < 2 {
            return Err(Error::Config(format!(
                "instantiations = {}; at least 2 are needed for replication metrics",
                self.instantiations
            )));
        }
        if self.instantiations > self.templates.narratives.len() {
            return Err(Error::Config(format!(
                "instantiations = {} but templates provide {} narratives",
                self.instantiations,
                self.templates.narratives.len()
            )));
        }
        if self.perspectives == 0 || self.perspectives > self.templates.perspectives.len() {
            return Err(Error::Config(format!(
                "perspectives = {} but templates provide {}",
                self.perspectives,
                self.templates.perspectives.len()
            )));
        }
        if self.pcs_pairs > 45 {
            return Err(Error::Config(format!(
                "pcs_pairs = {} exceeds the 45 pairs per layer",
                self.pcs_pairs
            )));
        }
        if self.domains.is_empty() {
            return Err(Error::Config("no domains selected".into()));
        }
        let mut out = Vec::with_capacity(self.domains.len());
        for (index, name) in self.domains.iter().enumerate() {
            if self.domains[..index].contains(name) {
                return Err(Error::Config(format!("domain `{name}` listed twice")));
            }
            let template = self
                .templates
                .domain(name)
                .ok_or_else(|| Error::Config(format!("domain `{name}` has no template")))?;
            if template.stories.len() < self.instantiations {
                return Err(Error::Config(format!(
                    "domain `{name}` has {} stories, need {}",
                    template.stories.len(),
                    self.instantiations
                )));
            }
            out.push((
                Domain {
                    index,
                    name: name.clone(),
                },
                template,
            ));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub layer: LayerId,
    pub neutral: usize,
    pub pcs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankManifest {
    pub format_version: u32,
    pub seed: u64,
    pub layers: Vec<LayerId>,
    pub domains: Vec<Domain>,
    pub instantiations: usize,
    pub perspectives: usize,
    pub pcs_pairs: BTreeMap<LayerId, Vec<ItemPair>>,
    pub counts: Vec<LayerCount>,
    pub template_version: String,
    pub taxonomies: Vec<Taxonomy>,
    /// SHA-256 of the scenarios file.
    pub scenarios_digest: String,
    pub created_unix: u64,
}

impl Versioned for BankManifest {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone)]
pub struct Bank {
    pub manifest: BankManifest,
    pub scenarios: Vec<Scenario>,
    by_id: HashMap<String, usize>,
}

impl Bank {
    fn new(manifest: BankManifest, scenarios: Vec<Scenario>) -> Self {
        let by_id = scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Bank {
            manifest,
            scenarios,
            by_id,
        }
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.by_id.get(id).map(|&i| &self.scenarios[i])
    }

    pub fn taxonomy(&self, layer: LayerId) -> Option<&Taxonomy> {
        self.manifest.taxonomies.iter().find(|t| t.layer == layer)
    }

    pub fn is_pcs_pair(&self, pair: ItemPair) -> bool {
        self.manifest
            .pcs_pairs
            .get(&pair.layer)
            .is_some_and(|v| v.contains(&pair))
    }

    pub fn scenarios_jsonl(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        for s in &self.scenarios {
            serde_json::to_writer(&mut buf, s).map_err(|e| Error::json("scenario", e))?;
            buf.push(b'\n');
        }
        Ok(buf)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        records::write_atomic(&dir.join(SCENARIOS_FILE), &self.scenarios_jsonl()?)?;
        records::write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    pub fn load(dir: &Path) -> Result<Bank> {
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            return Err(Error::BankMissing(dir.to_path_buf()));
        }
        let manifest: BankManifest = records::read_versioned(&manifest_path)?;
        let scen_path = dir.join(SCENARIOS_FILE);
        let bytes = std::fs::read(&scen_path).map_err(|e| Error::io(&scen_path, e))?;
        let digest = hex_digest(&[&bytes]);
        if digest != manifest.scenarios_digest {
            return Err(Error::Data(format!(
                "{} does not match the manifest digest",
                scen_path.display()
            )));
        }
        let scenarios = records::read_jsonl(&scen_path)?;
        Ok(Bank::new(manifest, scenarios))
    }
}

/// Reframing subset: pairs ordered by a seeded hash, first `n` taken, then
/// returned in canonical order.
fn pcs_subset(seed: u64, pairs: &[ItemPair], n: usize) -> Vec<ItemPair> {
    let mut keyed: Vec<(u64, ItemPair)> = pairs
        .iter()
        .map(|&p| {
            (
                u64_of(&[
                    b"pcs",
                    &seed.to_le_bytes(),
                    p.layer.tag().as_bytes(),
                    &(p.lo as u64).to_le_bytes(),
                    &(p.hi as u64).to_le_bytes(),
                ]),
                p,
            )
        })
        .collect();
    keyed.sort();
    let mut chosen: Vec<ItemPair> = keyed.into_iter().take(n).map(|(_, p)| p).collect();
    chosen.sort();
    chosen
}

fn side_base(seed: u64, pair: ItemPair) -> u64 {
    u64_of(&[
        b"side",
        &seed.to_le_bytes(),
        pair.layer.tag().as_bytes(),
        &(pair.lo as u64).to_le_bytes(),
        &(pair.hi as u64).to_le_bytes(),
    ])
}

pub fn render_scenario_prompt(
    templates: &Templates,
    taxonomy: &Taxonomy,
    narrative: &str,
    perspective: &Perspective,
    option_map: OptionMap,
) -> String {
    let stake = |i: usize| templates::capitalize(&taxonomy.items[i].stake);
    format!(
        "{}\n\n{}\n\nOption A: {}.\nOption B: {}.\n\n{}\n{}",
        perspective.intro,
        narrative,
        stake(option_map.a),
        stake(option_map.b),
        taxonomy.question,
        templates.directive
    )
}

/// Generates the bank. Pure and deterministic in `config`.
pub fn build_bank(config: &BankConfig) -> Result<Bank> {
    let domains = config.validate()?;
    let k = config.instantiations;
    let p = config.perspectives;
    let mut scenarios = Vec::new();
    let mut counts = Vec::new();
    let mut pcs_pairs = BTreeMap::new();

    for &layer in &config.layers {
        let taxonomy = &config.taxonomies[&layer];
        let pairs = enumerate_pairs(taxonomy)?;
        let pcs = if p > 1 {
            pcs_subset(config.seed, &pairs, config.pcs_pairs)
        } else {
            Vec::new()
        };
        let mut neutral = 0;
        let mut reframed = 0;

        let mut emit = |pair: ItemPair, domain: &Domain, narrative: &str, inst: u8, persp: u8, cell: u64| {
            let side_seed = side_base(config.seed, pair).wrapping_add(cell);
            let option_map = assign_option_sides(pair, side_seed);
            let prompt = render_scenario_prompt(
                &config.templates,
                taxonomy,
                narrative,
                &config.templates.perspectives[persp as usize],
                option_map,
            );
            scenarios.push(Scenario {
                id: scenario_id(pair, domain.index, inst, persp, side_seed),
                layer,
                pair,
                domain: domain.clone(),
                instantiation: inst,
                perspective: persp,
                side_seed,
                option_map,
                prompt,
            });
        };

        for &pair in &pairs {
            for (domain, template) in &domains {
                for inst in 1..=k {
                    let narrative = config
                        .templates
                        .narrative(template, inst)
                        .expect("validated instantiation count");
                    let cell = (domain.index * k + inst - 1) as u64;
                    emit(pair, domain, &narrative, inst as u8, 0, cell);
                    neutral += 1;
                }
            }
        }
        let neutral_cells = (domains.len() * k) as u64;
        for &pair in &pcs {
            for (domain, template) in &domains {
                let narrative = config
                    .templates
                    .narrative(template, 1)
                    .expect("validated instantiation count");
                for persp in 1..p {
                    let cell = neutral_cells + (domain.index * (p - 1) + persp - 1) as u64;
                    emit(pair, domain, &narrative, 1, persp as u8, cell);
                    reframed += 1;
                }
            }
        }
        counts.push(LayerCount {
            layer,
            neutral,
            pcs: reframed,
        });
        pcs_pairs.insert(layer, pcs);
    }

    let mut bank = Bank::new(
        BankManifest {
            format_version: FORMAT_VERSION,
            seed: config.seed,
            layers: config.layers.clone(),
            domains: domains.iter().map(|(d, _)| d.clone()).collect(),
            instantiations: k,
            perspectives: p,
            pcs_pairs,
            counts,
            template_version: config.templates.version.clone(),
            taxonomies: config
                .layers
                .iter()
                .map(|l| config.taxonomies[l].clone())
                .collect(),
            scenarios_digest: String::new(),
            created_unix: crate::unix_now(),
        },
        scenarios,
    );
    bank.manifest.scenarios_digest = hex_digest(&[&bank.scenarios_jsonl()?]);
    Ok(bank)
}

/// Problems a respondent-facing prompt must not have: digits (which would
/// expose taxonomy indices) and layer names.
pub fn prompt_leaks(prompt: &str) -> Vec<String> {
    let mut found = Vec::new();
    if let Some(c) = prompt.chars().find(|c| c.is_ascii_digit()) {
        found.push(format!("digit `{c}`"));
    }
    let lower = prompt.to_lowercase();
    for word in ["normative", "epistemic"] {
        if lower.contains(word) {
            found.push(format!("layer word `{word}`"));
        }
    }
    found
}
