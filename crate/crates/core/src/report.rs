//! Human-readable and machine-readable audit reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bank::Bank;
use crate::cascade::{AspaReport, PollutionFlag};
use crate::metrics::{IhDiagnosis, Metric};
use crate::profile::{ConfigEcho, Gate, PrismProfile};
use crate::records::Versioned;
use crate::taxonomy::LayerId;
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: LayerId,
    /// Item names, best first.
    pub ranking: Vec<String>,
    pub value_entropy: Metric,
    pub entropy_round_robin_floor: f64,
    pub trr: Metric,
    pub srs: Metric,
    pub pcs: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub trr: Metric,
    pub srs: Metric,
    pub pcs: Metric,
    pub pcs_floor: f64,
    pub cci: Metric,
    pub aspa: Metric,
    pub abstain_rate: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFlag {
    pub layer: LayerId,
    pub preferred: String,
    pub over: String,
    pub rules: Vec<String>,
    pub discordant_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format_version: u32,
    pub respondent: String,
    pub layers: Vec<LayerSummary>,
    pub metrics: MetricTable,
    pub diagnosis: Option<IhDiagnosis>,
    pub pollution_flags: Vec<NamedFlag>,
    pub gates: Vec<Gate>,
    pub config: ConfigEcho,
}

impl Versioned for AuditReport {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

fn name(bank: &Bank, layer: LayerId, index: usize) -> String {
    bank.taxonomy(layer)
        .and_then(|t| t.items.get(index))
        .map_or_else(|| format!("#{index}"), |i| i.name.clone())
}

fn named_flag(bank: &Bank, f: &PollutionFlag) -> NamedFlag {
    NamedFlag {
        layer: f.layer,
        preferred: name(bank, f.layer, f.better),
        over: name(bank, f.layer, f.worse),
        rules: f.rules.clone(),
        discordant_domains: f.discordant_domains.clone(),
    }
}

pub fn build_report(bank: &Bank, profile: &PrismProfile, aspa: Option<&AspaReport>) -> AuditReport {
    let layers = profile
        .layers
        .iter()
        .map(|l| LayerSummary {
            layer: l.layer,
            ranking: l.ranking.iter().map(|&i| name(bank, l.layer, i)).collect(),
            value_entropy: l.value_entropy.clone(),
            entropy_round_robin_floor: l.entropy_round_robin_floor,
            trr: l.reliability.trr.clone(),
            srs: l.reliability.srs.clone(),
            pcs: l.reliability.pcs.clone(),
        })
        .collect();
    let cci = match &profile.cci {
        Some(c) => c.overall.clone(),
        None => Metric::Undefined {
            reason: "cascade needs all three measured layers".into(),
        },
    };
    let aspa_metric = match aspa {
        Some(a) => Metric::Defined { value: a.aspa },
        None => Metric::Undefined {
            reason: "no held-out fixtures scored".into(),
        },
    };
    let mut gates = profile.gates.clone();
    gates.push(match aspa {
        Some(a) => Gate {
            id: "free-form-prediction".into(),
            criterion: format!("ASPA > {}", a.threshold),
            observed: format!("{:.4} on {} fixtures", a.aspa, a.results.len()),
            pass: Some(a.pass),
        },
        None => Gate {
            id: "free-form-prediction".into(),
            criterion: format!("ASPA > {}", crate::cascade::ASPA_THRESHOLD),
            observed: "not run".into(),
            pass: None,
        },
    });
    AuditReport {
        format_version: FORMAT_VERSION,
        respondent: profile.respondent.clone(),
        layers,
        metrics: MetricTable {
            trr: profile.reliability.trr.clone(),
            srs: profile.reliability.srs.clone(),
            pcs: profile.reliability.pcs.clone(),
            pcs_floor: profile.reliability.pcs_floor,
            cci,
            aspa: aspa_metric,
            abstain_rate: profile.reliability.abstain_rate.clone(),
        },
        diagnosis: profile.diagnosis.clone(),
        pollution_flags: profile.pollution_flags.iter().map(|f| named_flag(bank, f)).collect(),
        gates,
        config: profile.config.clone(),
    }
}

fn gate_mark(pass: Option<bool>) -> &'static str {
    match pass {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

/// Plain-text rendering of a report.
pub fn render_text(r: &AuditReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Audit report: {}", r.respondent);
    let _ = writeln!(s);
    let _ = writeln!(s, "Diagnosis");
    match &r.diagnosis {
        Some(d) => {
            let _ = writeln!(s, "  quadrant: {}", d.quadrant);
            let _ = writeln!(
                s,
                "  TRR {:.4} (threshold {}), SRS {:.4} (threshold {})",
                d.trr, d.thresholds.trr, d.srs, d.thresholds.srs
            );
        }
        None => {
            let _ = writeln!(s, "  quadrant: undetermined (TRR or SRS undefined)");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Metrics");
    let m = &r.metrics;
    let _ = writeln!(s, "  TRR           {}", m.trr);
    let _ = writeln!(s, "  SRS           {}", m.srs);
    let _ = writeln!(s, "  PCS           {} (attainable floor {:.2})", m.pcs, m.pcs_floor);
    let _ = writeln!(s, "  CCI           {} (rules {})", m.cci, r.config.rule_set_version);
    let _ = writeln!(s, "  ASPA          {}", m.aspa);
    let _ = writeln!(s, "  abstain rate  {}", m.abstain_rate);
    for l in &r.layers {
        let _ = writeln!(s);
        let _ = writeln!(s, "Layer {}", l.layer);
        let _ = writeln!(
            s,
            "  VE {} bits (round-robin floor {:.4})",
            l.value_entropy, l.entropy_round_robin_floor
        );
        let _ = writeln!(s, "  TRR {}  SRS {}  PCS {}", l.trr, l.srs, l.pcs);
        for (i, item) in l.ranking.iter().enumerate() {
            let _ = writeln!(s, "  {:>2}. {item}", i + 1);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Success gates");
    for g in &r.gates {
        let _ = writeln!(s, "  [{}] {}: {} ({})", gate_mark(g.pass), g.id, g.criterion, g.observed);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Pollution flags");
    if r.pollution_flags.is_empty() {
        let _ = writeln!(s, "  none");
    }
    for f in &r.pollution_flags {
        let _ = writeln!(
            s,
            "  {}: {} over {} reversed in {} (rules: {})",
            f.layer,
            f.preferred,
            f.over,
            f.discordant_domains.join(", "),
            f.rules.join(", ")
        );
    }
    let c = &r.config;
    let _ = writeln!(s);
    let _ = writeln!(s, "Configuration");
    let _ = writeln!(s, "  rule set: {}", c.rule_set_version);
    let _ = writeln!(
        s,
        "  weights: value {:.4}, evidence {:.4}, source {:.4}",
        c.weights.normative, c.weights.epistemic, c.weights.source
    );
    let _ = writeln!(s, "  thresholds: TRR {}, SRS {}", c.thresholds.trr, c.thresholds.srs);
    let _ = writeln!(
        s,
        "  pollution: tolerance {}, at most {} discordant, at least {} concordant domains",
        c.pollution.tolerance, c.pollution.max_discordant_domains, c.pollution.min_concordant_domains
    );
    match &c.decode {
        Some(d) => {
            let _ = writeln!(
                s,
                "  decode: temperature {}, max tokens {}, seed {}",
                d.temperature,
                d.max_tokens,
                d.seed.map_or_else(|| "none".to_string(), |x| x.to_string())
            );
        }
        None => {
            let _ = writeln!(s, "  decode: not recorded");
        }
    }
    let _ = writeln!(s, "  bank seed {}, templates {}", c.bank_seed, c.template_version);
    s
}
