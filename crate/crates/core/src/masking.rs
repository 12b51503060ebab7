//! Bernoulli token masking over `L × D` token sequences.
//!
//! Row `i` survives when `mask[i] == 1` and is replaced by zeros otherwise.
//! Mask entries come from a counter-based generator keyed by `(seed, i)`, so
//! any entry can be recomputed without drawing the ones before it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::counter_uniform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("probability {0} is not in [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("mask has {mask} entries but the sequence has {tokens} tokens")]
    LengthMismatch { mask: usize, tokens: usize },
    #[error("invalid token sequence: {0}")]
    InvalidSequence(String),
}

impl MaskError {
    pub fn kind(&self) -> &'static str {
        match self {
            MaskError::ProbabilityOutOfRange(_) => "ProbabilityOutOfRange",
            MaskError::LengthMismatch { .. } => "LengthMismatch",
            MaskError::InvalidSequence(_) => "InvalidSequence",
        }
    }
}

/// Dense row-major `L × D` matrix of finite values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenSequence {
    tokens: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TokenSequence {
    pub fn new(tokens: usize, dim: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        if tokens == 0 || dim == 0 {
            return Err(MaskError::InvalidSequence(format!(
                "shape {tokens}x{dim} has an empty axis"
            )));
        }
        if values.len() != tokens * dim {
            return Err(MaskError::InvalidSequence(format!(
                "{} values for a {tokens}x{dim} sequence",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MaskError::InvalidSequence(format!(
                "value at row {} column {} is not finite",
                i / dim,
                i % dim
            )));
        }
        Ok(Self { tokens, dim, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MaskError> {
        let tokens = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(MaskError::InvalidSequence(format!(
                "row {bad} has {} columns, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(tokens, dim, rows.into_iter().flatten().collect())
    }

    /// Parse whitespace- or comma-delimited text, one token per line. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse_text(text: &str) -> Result<Self, MaskError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        MaskError::InvalidSequence(format!("line {}: {s:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens
    }

    /// Always false; sequences have at least one token.
    pub fn is_empty(&self) -> bool {
        self.tokens == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub p: f64,
    pub seed: u64,
}

impl MaskConfig {
    pub fn new(p: f64, seed: u64) -> Result<Self, MaskError> {
        let config = Self { p, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        if (0.0..=1.0).contains(&self.p) {
            Ok(())
        } else {
            Err(MaskError::ProbabilityOutOfRange(self.p))
        }
    }
}

/// Binary keep-mask: `true` keeps the token, `false` zeroes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMask(pub Vec<bool>);

impl TokenMask {
    pub fn all_ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.0.iter().filter(|keep| !**keep).count()
    }

    /// Elementwise AND.
    pub fn and(&self, other: &TokenMask) -> Result<TokenMask, MaskError> {
        if self.len() != other.len() {
            return Err(MaskError::LengthMismatch {
                mask: other.len(),
                tokens: self.len(),
            });
        }
        Ok(TokenMask(
            self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect(),
        ))
    }

    /// `0`/`1` digits, one per token.
    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|keep| u8::from(*keep)).collect()
    }
}

/// Draw an `L`-entry mask where each entry is independently 0 with
/// probability `p`.
pub fn bernoulli_mask(len: usize, config: &MaskConfig) -> Result<TokenMask, MaskError> {
    config.validate()?;
    Ok(TokenMask(
        (0..len as u64)
            .map(|i| counter_uniform(config.seed, i) >= config.p)
            .collect(),
    ))
}

pub fn apply_token_mask(seq: &TokenSequence, mask: &TokenMask) -> Result<TokenSequence, MaskError> {
    if mask.len() != seq.len() {
        return Err(MaskError::LengthMismatch {
            mask: mask.len(),
            tokens: seq.len(),
        });
    }
    let mut values = seq.values.clone();
    for (row, keep) in values.chunks_mut(seq.dim).zip(&mask.0) {
        if !keep {
            row.fill(0.0);
        }
    }
    Ok(TokenSequence {
        tokens: seq.tokens,
        dim: seq.dim,
        values,
    })
}

/// Inference path: no token is masked.
pub fn inference_pass(seq: &TokenSequence) -> TokenSequence {
    apply_token_mask(seq, &TokenMask::all_ones(seq.len())).expect("mask length matches")
}
