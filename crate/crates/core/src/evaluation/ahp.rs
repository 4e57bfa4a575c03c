use serde::{Deserialize, Serialize};

use super::EvalError;

/// Random consistency index by matrix order (index 0 unused).
pub const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45];

/// Largest consistency ratio still accepted.
pub const CONSISTENCY_LIMIT: f64 = 0.1;

/// Relative tolerance on `a_ij · a_ji = 1`, loose enough for judgments typed
/// as rounded decimals such as 0.333.
pub const RECIPROCAL_TOLERANCE: f64 = 1e-3;

const RESIDUAL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// Pairwise importance judgments, crisp or as triangular fuzzy numbers
/// `(low, mid, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMatrix {
    Crisp(Vec<Vec<f64>>),
    Fuzzy(Vec<Vec<[f64; 3]>>),
}

impl ComparisonMatrix {
    pub fn order(&self) -> usize {
        match self {
            ComparisonMatrix::Crisp(m) => m.len(),
            ComparisonMatrix::Fuzzy(m) => m.len(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let n = self.order();
        if !(2..=9).contains(&n) {
            return Err(EvalError::MatrixOrder(n));
        }
        let rows_ok = match self {
            ComparisonMatrix::Crisp(m) => m.iter().all(|r| r.len() == n),
            ComparisonMatrix::Fuzzy(m) => m.iter().all(|r| r.len() == n),
        };
        if !rows_ok {
            return Err(EvalError::NotSquare);
        }
        let close = |a: f64, b: f64| (a - b).abs() <= RECIPROCAL_TOLERANCE * a.abs().max(b.abs());
        for i in 0..n {
            for j in 0..n {
                let ok = match self {
                    ComparisonMatrix::Crisp(m) => {
                        let (a, b) = (m[i][j], m[j][i]);
                        a.is_finite() && a > 0.0 && if i == j { a == 1.0 } else { close(a * b, 1.0) }
                    }
                    ComparisonMatrix::Fuzzy(m) => {
                        let ([l, c, u], [bl, bc, bu]) = (m[i][j], m[j][i]);
                        let ordered = l.is_finite() && u.is_finite() && 0.0 < l && l <= c && c <= u;
                        ordered
                            && if i == j {
                                [l, c, u] == [1.0, 1.0, 1.0]
                            } else {
                                close(l * bu, 1.0) && close(c * bc, 1.0) && close(u * bl, 1.0)
                            }
                    }
                };
                if !ok {
                    return Err(EvalError::NotReciprocal { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Crisp matrix; fuzzy entries become their centroid `(l + m + u) / 3`.
    pub fn defuzzified(&self) -> Vec<Vec<f64>> {
        match self {
            ComparisonMatrix::Crisp(m) => m.clone(),
            ComparisonMatrix::Fuzzy(m) => {
                m.iter().map(|r| r.iter().map(|[l, c, u]| (l + c + u) / 3.0).collect()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpResult {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub consistency_ratio: f64,
    /// False when the ratio exceeds the accepted limit.
    pub consistent: bool,
}

impl AhpResult {
    pub fn require_consistent(&self) -> Result<(), EvalError> {
        if self.consistent {
            Ok(())
        } else {
            Err(EvalError::InconsistentJudgments { ratio: self.consistency_ratio })
        }
    }
}

/// Principal eigenvector weights by power iteration, with Saaty's
/// consistency ratio. Inconsistent judgments are flagged, not rejected.
pub fn ahp_weights(m: &ComparisonMatrix) -> Result<AhpResult, EvalError> {
    m.validate()?;
    let a = m.defuzzified();
    let n = a.len();
    let mul = |w: &[f64]| -> Vec<f64> { a.iter().map(|row| row.iter().zip(w).map(|(x, y)| x * y).sum()).collect() };
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERS {
        let aw = mul(&w);
        let s: f64 = aw.iter().sum();
        let next: Vec<f64> = aw.iter().map(|x| x / s).collect();
        let residual = next.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        w = next;
        if residual < RESIDUAL {
            let aw = mul(&w);
            let lambda_max = aw.iter().zip(&w).map(|(x, y)| x / y).sum::<f64>() / n as f64;
            let ri = RANDOM_INDEX[n];
            let consistency_ratio = if ri > 0.0 { ((lambda_max - n as f64) / (n as f64 - 1.0) / ri).max(0.0) } else { 0.0 };
            return Ok(AhpResult {
                weights: w,
                lambda_max,
                consistency_ratio,
                consistent: consistency_ratio <= CONSISTENCY_LIMIT,
            });
        }
    }
    Err(EvalError::NoConvergence)
}
