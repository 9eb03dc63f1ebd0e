use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bank::OptionLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
    #[serde(rename = "ABSTAIN")]
    Abstain,
}

impl Choice {
    pub fn label(self) -> Option<OptionLabel> {
        match self {
            Choice::A => Some(OptionLabel::A),
            Choice::B => Some(OptionLabel::B),
            Choice::Abstain => None,
        }
    }
}

impl From<OptionLabel> for Choice {
    fn from(label: OptionLabel) -> Self {
        match label {
            OptionLabel::A => Choice::A,
            OptionLabel::B => Choice::B,
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::A => "A",
            Choice::B => "B",
            Choice::Abstain => "ABSTAIN",
        })
    }
}

fn label_tokens(text: &str) -> Vec<Choice> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter_map(|tok| match tok {
            "A" | "a" => Some(Choice::A),
            "B" | "b" => Some(Choice::B),
            _ => None,
        })
        .collect()
}

fn single_label(text: &str) -> Option<Choice> {
    match label_tokens(text).as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// Extracts the option label from a raw completion.
///
/// A label counts only as a standalone, case-insensitive word. The final
/// non-empty line is searched first, then the whole text; either must hold
/// exactly one label token. Anything else is an abstention.
pub fn parse_choice(raw: &str) -> Choice {
    let last_line = raw.lines().rev().find(|l| !l.trim().is_empty());
    last_line
        .and_then(single_label)
        .or_else(|| single_label(raw))
        .unwrap_or(Choice::Abstain)
}
