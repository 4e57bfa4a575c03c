//! Comprehensive evaluation: indicators from event logs, hierarchical
//! weights from pairwise judgments, and the composite score.

mod ahp;
mod indicators;

pub use ahp::{ahp_weights, AhpResult, ComparisonMatrix, CONSISTENCY_LIMIT, RANDOM_INDEX, RECIPROCAL_TOLERANCE};
pub use indicators::{build_indicators, Indicator, IndicatorSet, NormalizationBounds};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::EventLog;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("log contains no aircraft state records")]
    EmptyLog,
    #[error("comparison matrix entry ({row}, {col}) breaks reciprocity or positivity")]
    NotReciprocal { row: usize, col: usize },
    #[error("comparison matrix order {0} outside 2..=9")]
    MatrixOrder(usize),
    #[error("comparison matrix is not square")]
    NotSquare,
    #[error("consistency ratio {ratio} exceeds the accepted limit")]
    InconsistentJudgments { ratio: f64 },
    #[error("power iteration did not converge")]
    NoConvergence,
    #[error("{what}: expected {expected} weights, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },
    #[error("invalid weights file: {0}")]
    Config(String),
}

/// Weighted leaf sum within each group, then across groups.
pub fn composite_score(indicators: &IndicatorSet, group_weights: &[f64], leaf_weights: &[Vec<f64>]) -> Result<f64, EvalError> {
    weighted(&group_scores(indicators, leaf_weights)?, group_weights, "groups")
}

pub fn group_scores(indicators: &IndicatorSet, leaf_weights: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    let groups = indicators.groups();
    if leaf_weights.len() != groups.len() {
        return Err(EvalError::DimensionMismatch { what: "leaf weight groups".into(), expected: groups.len(), got: leaf_weights.len() });
    }
    groups
        .iter()
        .zip(leaf_weights)
        .enumerate()
        .map(|(k, (g, w))| {
            let values: Vec<f64> = g.iter().map(|i| i.value).collect();
            weighted(&values, w, &format!("group {k}"))
        })
        .collect()
}

fn weighted(values: &[f64], weights: &[f64], what: &str) -> Result<f64, EvalError> {
    if values.len() != weights.len() {
        return Err(EvalError::DimensionMismatch { what: what.into(), expected: values.len(), got: weights.len() });
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>().clamp(0.0, 1.0))
}

/// One judgment matrix in a weights file: crisp `matrix` or `fuzzy` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub fuzzy: Option<Vec<Vec<[f64; 3]>>>,
}

impl MatrixConfig {
    fn comparison(&self, name: &str) -> Result<ComparisonMatrix, EvalError> {
        match (&self.matrix, &self.fuzzy) {
            (Some(m), None) => Ok(ComparisonMatrix::Crisp(m.clone())),
            (None, Some(f)) => Ok(ComparisonMatrix::Fuzzy(f.clone())),
            _ => Err(EvalError::Config(format!("[{name}] needs exactly one of `matrix` or `fuzzy`"))),
        }
    }
}

/// Weights file: group judgments over (structure, performance, safety) and
/// one leaf matrix per group, in indicator order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub groups: MatrixConfig,
    pub structure: MatrixConfig,
    pub performance: MatrixConfig,
    pub safety: MatrixConfig,
    #[serde(default)]
    pub bounds: NormalizationBounds,
}

impl WeightsConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub groups: AhpResult,
    pub structure: AhpResult,
    pub performance: AhpResult,
    pub safety: AhpResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub indicators: IndicatorSet,
    pub weights: GroupWeights,
    pub group_scores: Vec<f64>,
    pub composite_score: f64,
    /// Every judgment matrix passed the consistency limit.
    pub consistent: bool,
}

pub fn evaluate(log: &EventLog, cfg: &WeightsConfig) -> Result<EvaluationReport, EvalError> {
    let indicators = build_indicators(log, &cfg.bounds)?;
    let weights = GroupWeights {
        groups: ahp_weights(&cfg.groups.comparison("groups")?)?,
        structure: ahp_weights(&cfg.structure.comparison("structure")?)?,
        performance: ahp_weights(&cfg.performance.comparison("performance")?)?,
        safety: ahp_weights(&cfg.safety.comparison("safety")?)?,
    };
    let leaves = vec![weights.structure.weights.clone(), weights.performance.weights.clone(), weights.safety.weights.clone()];
    let group_scores = group_scores(&indicators, &leaves)?;
    let composite_score = weighted(&group_scores, &weights.groups.weights, "groups")?;
    let consistent = [&weights.groups, &weights.structure, &weights.performance, &weights.safety].iter().all(|w| w.consistent);
    Ok(EvaluationReport { indicators, weights, group_scores, composite_score, consistent })
}
