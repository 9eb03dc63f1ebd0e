//! Presenting scenarios to respondents and persisting what they said.

mod campaign;
mod parse;
mod remote;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use campaign::{
    cache_key, dedupe_latest, presentations, run_campaign, CampaignManifest, CampaignOutcome, CampaignPlan,
    Presentation, CAMPAIGN_MANIFEST, TRANSCRIPTS_FILE,
};
pub use parse::{parse_choice, Choice};
pub use remote::{RemoteConfig, RemoteRespondent, RetryPolicy};

use crate::agents::{choose, AgentSpec};
use crate::bank::Scenario;
use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

/// One respondent answer to one presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario_id: String,
    /// 1 or 2.
    pub repeat: u8,
    pub respondent: String,
    pub raw_text: String,
    pub parsed: Choice,
    pub parse_ok: bool,
    /// Set when the presentation never produced an answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_ms: u64,
    pub cache_key: String,
}

impl Transcript {
    pub fn is_transport_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.0,
            max_tokens: 16,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RespondentKind {
    Remote,
    Simulated,
}

/// Something that can answer a rendered prompt.
pub trait Respondent: Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> RespondentKind;
    fn decode(&self) -> &DecodeParams;
    /// Raw completion text. Transport failures surface as
    /// [`Error::Transport`]; rejected credentials as [`Error::Auth`].
    fn submit(&self, scenario: &Scenario, prompt: &str, repeat: u8) -> Result<String>;
}

/// The prompt exactly as stored in the bank, so repeats are identical.
pub fn render_prompt(scenario: &Scenario) -> &str {
    &scenario.prompt
}

pub struct SimulatedRespondent {
    pub spec: AgentSpec,
    decode: DecodeParams,
}

impl SimulatedRespondent {
    pub fn new(spec: AgentSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SimulatedRespondent {
            spec,
            decode: DecodeParams::default(),
        })
    }
}

impl Respondent for SimulatedRespondent {
    fn id(&self) -> &str {
        &self.spec.id
    }

    fn kind(&self) -> RespondentKind {
        RespondentKind::Simulated
    }

    fn decode(&self) -> &DecodeParams {
        &self.decode
    }

    fn submit(&self, scenario: &Scenario, _prompt: &str, repeat: u8) -> Result<String> {
        Ok(choose(&self.spec, scenario, repeat)?.to_string())
    }
}

/// Run configuration file: who answers, and how the campaign is scheduled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    #[serde(default)]
    pub remote: Option<RemoteConfig>,
    #[serde(default)]
    pub agent: Option<AgentSpec>,
    #[serde(default)]
    pub campaign: CampaignPlan,
}

impl RunConfig {
    pub fn simulated(agent: AgentSpec) -> Self {
        RunConfig {
            format_version: FORMAT_VERSION,
            remote: None,
            agent: Some(agent),
            campaign: CampaignPlan::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                path: origin.to_path_buf(),
                found: cfg.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn respondent(&self) -> Result<Box<dyn Respondent>> {
        match (&self.remote, &self.agent) {
            (Some(r), None) => Ok(Box::new(RemoteRespondent::new(r.clone())?)),
            (None, Some(a)) => Ok(Box::new(SimulatedRespondent::new(a.clone())?)),
            _ => Err(Error::Config(
                "run config needs exactly one of [remote] or [agent]".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_requires_one_respondent() {
        let both = r#"
format_version = 1
[agent]
id = "a"
behavior = { kind = "incoherent" }
[remote]
id = "m"
base_url = "http://127.0.0.1:9"
model = "m"
"#;
        let cfg = RunConfig::from_toml_str(both, Path::new("run.toml")).unwrap();
        assert!(matches!(cfg.respondent(), Err(Error::Config(_))));
        let agent = r#"
format_version = 1
[agent]
id = "a"
behavior = { kind = "incoherent" }
[campaign]
order_seed = 5
"#;
        let cfg = RunConfig::from_toml_str(agent, Path::new("run.toml")).unwrap();
        assert_eq!(cfg.respondent().unwrap().id(), "a");
        assert_eq!(cfg.campaign.order_seed, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "format_version = 1\nbogus = 1\n";
        assert!(matches!(RunConfig::from_toml_str(text, Path::new("r.toml")), Err(Error::Toml { .. })));
    }
}
