//! Cost modeling: map token ledgers to wall-clock estimates.
//!
//! Verification time scales linearly with the number of tokens
//! regenerated, so a measurement set fits an ordinary least-squares model
//! `seconds = overhead + decode_rate * decode [+ prefill_rate * prefill]`.
//! The bundled reference measurements come from one 792-token generation
//! run and four suffix verifications of it; on that set prefill and decode
//! tokens sum to a constant on every row, so the three-column design is
//! rank-deficient; the fitter must detect that and drop the prefill
//! column rather than produce unstable coefficients.
//!
//! This module reproduces published *arithmetic* (ratios, linearity);
//! reproducing absolute wall-clock numbers on other hardware is a
//! non-goal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verify::CostLedger;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("fit needs at least {needed} rows, got {rows}")]
    Underdetermined { rows: usize, needed: usize },
    #[error("row {label:?} has non-positive seconds {seconds}")]
    InvalidSeconds { label: String, seconds: f64 },
    #[error("decode column is constant; the decode rate cannot be identified")]
    SingularDesign,
    #[error("effort ratio needs a positive verification cost, got {0}")]
    NonPositiveVerifyCost(f64),
}

/// Linear two-rate cost model. Rates are seconds per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub fixed_overhead_s: f64,
    pub decode_rate_s: f64,
    pub prefill_rate_s: f64,
}

/// One wall-clock measurement: how many extra context tokens were
/// supplied, how many tokens were generated, and how long it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub label: String,
    pub prefill_extra_tokens: u64,
    pub decode_tokens: u64,
    pub seconds: f64,
}

impl MeasurementRow {
    pub fn new(label: &str, prefill_extra_tokens: u64, decode_tokens: u64, seconds: f64) -> Self {
        Self {
            label: label.to_string(),
            prefill_extra_tokens,
            decode_tokens,
            seconds,
        }
    }
}

/// A fitted model together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub model: CostModel,
    /// True when the prefill column was collinear with the intercept and
    /// decode columns and had to be dropped.
    pub prefill_dropped: bool,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub relative_residuals: Vec<f64>,
}

/// The bundled reference measurement set: one full 792-token generation
/// and four suffix verifications of the same sequence. Suffix verification
/// of the last `d` tokens supplies `792 - d` extra prefill tokens.
pub fn reference_rows() -> Vec<MeasurementRow> {
    vec![
        MeasurementRow::new("Full 792 tokens", 0, 792, 32.13),
        MeasurementRow::new("Last 50 tokens", 742, 50, 2.59),
        MeasurementRow::new("Last 100 tokens", 692, 100, 5.25),
        MeasurementRow::new("Last 200 tokens", 592, 200, 10.01),
        MeasurementRow::new("Last 400 tokens", 392, 400, 19.85),
    ]
}

/// Forward evaluation of a fitted model on a verification ledger.
pub fn estimate(model: &CostModel, ledger: &CostLedger) -> f64 {
    model.fixed_overhead_s
        + model.prefill_rate_s * ledger.prefill_tokens as f64
        + model.decode_rate_s * ledger.decode_tokens as f64
}

/// Full generation time divided by verification time.
pub fn effort_ratio(full_cost: f64, verify_cost: f64) -> Result<f64, CostError> {
    if verify_cost <= 0.0 || verify_cost.is_nan() {
        return Err(CostError::NonPositiveVerifyCost(verify_cost));
    }
    Ok(full_cost / verify_cost)
}

/// Ordinary least squares of seconds against `(1, decode[, prefill])`.
///
/// When the design matrix is rank-deficient (any row set where
/// `prefill + decode` is constant) the prefill column is dropped
/// automatically and the degeneracy reported via `prefill_dropped`.
pub fn fit(rows: &[MeasurementRow], include_prefill: bool) -> Result<CostFit, CostError> {
    let needed = if include_prefill { 3 } else { 2 };
    if rows.len() < needed {
        return Err(CostError::Underdetermined {
            rows: rows.len(),
            needed,
        });
    }
    for row in rows {
        if row.seconds <= 0.0 || row.seconds.is_nan() {
            return Err(CostError::InvalidSeconds {
                label: row.label.clone(),
                seconds: row.seconds,
            });
        }
    }

    let (model, prefill_dropped) = if include_prefill {
        match fit_three_column(rows) {
            Some(model) => (model, false),
            None => (fit_decode_only(rows)?, true),
        }
    } else {
        (fit_decode_only(rows)?, false)
    };

    let mut residuals = Vec::with_capacity(rows.len());
    let mut relative_residuals = Vec::with_capacity(rows.len());
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mean_y: f64 = rows.iter().map(|r| r.seconds).sum::<f64>() / rows.len() as f64;
    for row in rows {
        let ledger = CostLedger {
            prefill_tokens: row.prefill_extra_tokens,
            decode_tokens: row.decode_tokens,
        };
        let resid = estimate(&model, &ledger) - row.seconds;
        residuals.push(resid);
        relative_residuals.push(resid.abs() / row.seconds);
        ss_res += resid * resid;
        ss_tot += (row.seconds - mean_y) * (row.seconds - mean_y);
    }
    let r_squared = if ss_tot > f64::EPSILON {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };

    Ok(CostFit {
        model,
        prefill_dropped,
        r_squared,
        residuals,
        relative_residuals,
    })
}

fn fit_decode_only(rows: &[MeasurementRow]) -> Result<CostModel, CostError> {
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r.decode_tokens as f64).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.seconds).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for row in rows {
        let dx = row.decode_tokens as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (row.seconds - mean_y);
    }
    if sxx <= f64::EPSILON * mean_x.abs().max(1.0) {
        return Err(CostError::SingularDesign);
    }
    let decode_rate_s = sxy / sxx;
    Ok(CostModel {
        fixed_overhead_s: mean_y - decode_rate_s * mean_x,
        decode_rate_s,
        prefill_rate_s: 0.0,
    })
}

/// Solves the 3x3 normal equations; `None` on rank deficiency.
#[allow(clippy::needless_range_loop)]
fn fit_three_column(rows: &[MeasurementRow]) -> Option<CostModel> {
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for row in rows {
        let x = [
            1.0,
            row.decode_tokens as f64,
            row.prefill_extra_tokens as f64,
        ];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += x[i] * x[j];
            }
            b[i] += x[i] * row.seconds;
        }
    }

    // Gaussian elimination with partial pivoting; a pivot collapsing
    // relative to the matrix scale means the columns are collinear.
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    let mut rows_order = [0usize, 1, 2];
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| {
                a[rows_order[i]][col]
                    .abs()
                    .total_cmp(&a[rows_order[j]][col].abs())
            })
            .unwrap();
        rows_order.swap(col, pivot_row);
        let pivot = a[rows_order[col]][col];
        if pivot.abs() <= 1e-9 * scale {
            return None;
        }
        for &ri in rows_order.iter().skip(col + 1) {
            let factor = a[ri][col] / pivot;
            for j in col..3 {
                a[ri][j] -= factor * a[rows_order[col]][j];
            }
            b[ri] -= factor * b[rows_order[col]];
        }
    }

    let mut coef = [0.0f64; 3];
    for col in (0..3).rev() {
        let ri = rows_order[col];
        let mut acc = b[ri];
        for j in col + 1..3 {
            acc -= a[ri][j] * coef[j];
        }
        coef[col] = acc / a[ri][col];
    }
    Some(CostModel {
        fixed_overhead_s: coef[0],
        decode_rate_s: coef[1],
        prefill_rate_s: coef[2],
    })
}
