//! `mask-demo`: apply a Bernoulli token mask to a sequence file.

use std::fs;
use std::path::PathBuf;

use occbench::masking::{apply_token_mask, bernoulli_mask};
use occbench::seed::counter_uniform;
use occbench::{MaskConfig, TokenMask, TokenSequence};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct MaskDemoConfig {
    /// Delimited text, one token per line. A seeded `L × D` sequence is
    /// synthesized when absent.
    pub input: Option<PathBuf>,
    pub tokens: Option<usize>,
    pub dim: Option<usize>,
    pub p: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskDemoOutput {
    pub input: TokenSequence,
    pub mask: TokenMask,
    pub masked: TokenSequence,
}

impl MaskDemoOutput {
    /// One `0`/`1` per line.
    pub fn mask_text(&self) -> String {
        self.mask
            .to_bits()
            .iter()
            .map(|b| format!("{b}\n"))
            .collect()
    }
}

fn synthesize(tokens: usize, dim: usize, seed: u64) -> Result<TokenSequence, CliError> {
    // values in [-1, 1), drawn from a stream separate from the mask's
    let stream = seed ^ 0x5EED_5EED_5EED_5EED;
    let values = (0..(tokens * dim) as u64)
        .map(|i| 2.0 * counter_uniform(stream, i) - 1.0)
        .collect();
    Ok(TokenSequence::new(tokens, dim, values)?)
}

pub fn run_mask_demo(cfg: &MaskDemoConfig) -> Result<MaskDemoOutput, CliError> {
    let config = MaskConfig::new(cfg.p, cfg.seed)?;
    let input = match &cfg.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let seq = TokenSequence::parse_text(&text)?;
            for (name, want, got) in [("--l", cfg.tokens, seq.len()), ("--d", cfg.dim, seq.dim())] {
                if want.is_some_and(|w| w != got) {
                    return Err(CliError::Input(format!(
                        "{name} {} does not match the input ({got})",
                        want.unwrap_or_default()
                    )));
                }
            }
            seq
        }
        None => match (cfg.tokens, cfg.dim) {
            (Some(l), Some(d)) => synthesize(l, d, cfg.seed)?,
            _ => {
                return Err(CliError::Config(
                    "mask-demo needs --input or both --l and --d".into(),
                ))
            }
        },
    };
    let mask = bernoulli_mask(input.len(), &config)?;
    let masked = apply_token_mask(&input, &mask)?;
    let output = MaskDemoOutput {
        input,
        mask,
        masked,
    };
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        for (name, body) in [
            ("masked.txt", output.masked.to_text()),
            ("mask.txt", output.mask_text()),
        ] {
            let path = out.join(name);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(output)
}
