//! Win matrices, rankings, entropy, reliability scores and the
//! TRR x SRS mechanism diagnosis.

mod reliability;
mod table;
mod win;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use reliability::{
    modal_floor, pcs, reliability, srs_cell, trr, CellCounts, DomainReliability, PairReliability,
    ReliabilityReport,
};
pub use table::{modal_fraction, Outcome, ResponseTable};
pub use win::{ranking, round_robin_floor, value_entropy, win_matrix, WinMatrix};

use crate::error::Result;
use crate::exec::Exec;
use crate::taxonomy::LayerId;

/// A metric value, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Metric {
    Defined { value: f64 },
    Undefined { reason: String },
}

impl Metric {
    pub fn value(&self) -> Option<f64> {
        match self {
            Metric::Defined { value } => Some(*value),
            Metric::Undefined { .. } => None,
        }
    }

    pub fn from_result(r: Result<f64>) -> Metric {
        match r {
            Ok(value) => Metric::Defined { value },
            Err(e) => Metric::Undefined {
                reason: e.to_string(),
            },
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Defined { value } => write!(f, "{value:.4}"),
            Metric::Undefined { reason } => write!(f, "undefined ({reason})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub trr: f64,
    pub srs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { trr: 0.75, srs: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrant {
    GenuineHierarchy,
    FramingSensitivity,
    StochasticNoise,
    StructuralIncoherence,
}

impl Quadrant {
    pub fn name(self) -> &'static str {
        match self {
            Quadrant::GenuineHierarchy => "genuine-hierarchy",
            Quadrant::FramingSensitivity => "framing-sensitivity",
            Quadrant::StochasticNoise => "stochastic-noise",
            Quadrant::StructuralIncoherence => "structural-incoherence",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhDiagnosis {
    pub quadrant: Quadrant,
    pub thresholds: Thresholds,
    pub trr: f64,
    pub srs: f64,
}

pub fn classify_ih(trr: f64, srs: f64, thresholds: Thresholds) -> IhDiagnosis {
    let quadrant = match (trr >= thresholds.trr, srs >= thresholds.srs) {
        (true, true) => Quadrant::GenuineHierarchy,
        (true, false) => Quadrant::FramingSensitivity,
        (false, true) => Quadrant::StochasticNoise,
        (false, false) => Quadrant::StructuralIncoherence,
    };
    IhDiagnosis {
        quadrant,
        thresholds,
        trr,
        srs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub layer: LayerId,
    pub matrix: WinMatrix,
    /// Item indices, best first.
    pub ranking: Vec<usize>,
    pub value_entropy: Metric,
    /// Entropy of a transitive single round robin, the practical minimum.
    pub entropy_round_robin_floor: f64,
    /// Row-major `n x n`, `None` where the pair has no decisive trial.
    pub win_rates: Vec<Vec<Option<f64>>>,
    pub reliability: ReliabilityReport,
}

pub fn layer_profile(table: &ResponseTable<'_>, layer: LayerId, exec: Exec) -> Result<LayerProfile> {
    let matrix = win_matrix(table, layer, None)?;
    let n = matrix.size();
    let win_rates = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { None } else { matrix.win_rate(i, j) })
                .collect()
        })
        .collect();
    Ok(LayerProfile {
        layer,
        ranking: ranking(&matrix),
        value_entropy: Metric::from_result(value_entropy(&matrix)),
        entropy_round_robin_floor: round_robin_floor(n),
        win_rates,
        reliability: reliability(table, &[layer], exec)?,
        matrix,
    })
}
