use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub setting: String,
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTemplate {
    pub name: String,
    /// One story per instantiation.
    pub stories: Vec<Story>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perspective {
    pub name: String,
    pub intro: String,
}

/// Narrative templates, perspective framings and domain stories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub format_version: u32,
    pub version: String,
    pub directive: String,
    pub narratives: Vec<String>,
    pub perspectives: Vec<Perspective>,
    pub domains: Vec<DomainTemplate>,
}

impl Templates {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let t: Templates = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if t.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                path: origin.to_path_buf(),
                found: t.format_version,
                expected: FORMAT_VERSION,
            });
        }
        for n in &t.narratives {
            if !n.contains("{setting}") || !n.contains("{decision}") {
                return Err(Error::Config(format!(
                    "{}: narrative must use both {{setting}} and {{decision}}: `{n}`",
                    origin.display()
                )));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn builtin() -> Templates {
        Self::from_toml_str(include_str!("../../data/templates.toml"), Path::new("templates.toml"))
            .expect("builtin templates parse")
    }

    pub fn domain(&self, name: &str) -> Option<&DomainTemplate> {
        self.domains.iter().find(|d| d.name == name)
    }

    /// Narrative text for one instantiation (1-based) of a domain.
    pub fn narrative(&self, domain: &DomainTemplate, instantiation: usize) -> Option<String> {
        let template = self.narratives.get(instantiation.checked_sub(1)?)?;
        let story = domain.stories.get(instantiation - 1)?;
        Some(
            template
                .replace("{setting}", &story.setting)
                .replace("{decision}", &story.decision),
        )
    }
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
