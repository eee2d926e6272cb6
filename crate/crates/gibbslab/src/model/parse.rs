//! Text format for model files.
//!
//! Structured key-value lines, `#` comments allowed:
//!
//! ```text
//! kind = bernoulli          # bernoulli | markov | homogeneous
//! d = 1
//! weights = 0.2, 0.8        # bernoulli: 2^d reals summing to 1
//! init = 0.5, 0.5           # markov: initial distribution
//! rows = 0.7, 0.3; 0.4, 0.6 # markov: 2^d stochastic rows, ';'-separated
//! K = 1
//! alpha = 1
//! beta_bits = 0
//! ```

use super::{BaseMeasure, GibbsModel};
use crate::{LabError, Result};

#[derive(Default)]
struct Raw {
    kind: Option<(String, usize)>,
    d: Option<(u8, usize)>,
    weights: Option<(Vec<f64>, usize)>,
    init: Option<(Vec<f64>, usize)>,
    rows: Option<(Vec<Vec<f64>>, usize)>,
    k: Option<(f64, usize)>,
    alpha: Option<(f64, usize)>,
    beta_bits: Option<(f64, usize)>,
}

fn parse_reals(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| LabError::Parse {
                line,
                msg: format!("expected a real number, got {:?}", t.trim()),
            })
        })
        .collect()
}

/// Parses a model file. Rejects non-positive weights and non-stochastic rows
/// with line-numbered errors.
pub fn parse_model_file(text: &str) -> Result<GibbsModel> {
    let mut raw = Raw::default();
    for (i, line_text) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match line_text.find('#') {
            Some(h) => &line_text[..h],
            None => line_text,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or_else(|| LabError::Parse {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "kind" => raw.kind = Some((value.to_ascii_lowercase(), line)),
            "d" => {
                let d = value.parse::<u8>().map_err(|_| LabError::Parse {
                    line,
                    msg: format!("bad dimension {value:?}"),
                })?;
                raw.d = Some((d, line));
            }
            "weights" => raw.weights = Some((parse_reals(value, line)?, line)),
            "init" => raw.init = Some((parse_reals(value, line)?, line)),
            "rows" => {
                let rows = value
                    .split(';')
                    .map(|r| parse_reals(r, line))
                    .collect::<Result<Vec<_>>>()?;
                raw.rows = Some((rows, line));
            }
            "K" => {
                raw.k = Some((
                    value.parse::<f64>().map_err(|_| LabError::Parse {
                        line,
                        msg: format!("bad K {value:?}"),
                    })?,
                    line,
                ))
            }
            "alpha" => {
                raw.alpha = Some((
                    value.parse::<f64>().map_err(|_| LabError::Parse {
                        line,
                        msg: format!("bad alpha {value:?}"),
                    })?,
                    line,
                ))
            }
            "beta_bits" => {
                raw.beta_bits = Some((
                    value.parse::<f64>().map_err(|_| LabError::Parse {
                        line,
                        msg: format!("bad beta_bits {value:?}"),
                    })?,
                    line,
                ))
            }
            other => {
                return Err(LabError::Parse {
                    line,
                    msg: format!("unknown key {other:?}"),
                })
            }
        }
    }

    let (kind, kind_line) = raw.kind.ok_or_else(|| LabError::Parse {
        line: 0,
        msg: "missing `kind`".into(),
    })?;
    let d = raw.d.map(|(v, _)| v).unwrap_or(1);
    let k = raw.k.map(|(v, _)| v).unwrap_or(1.0);
    let alpha = raw.alpha.map(|(v, _)| v).unwrap_or(1.0);
    let beta_bits = raw.beta_bits.map(|(v, _)| v).unwrap_or(0.0);

    // re-attribute model validation errors to the offending line
    let attribute = |err: LabError, line: usize| -> LabError {
        match err {
            LabError::InvalidInput(msg) => LabError::Parse { line, msg },
            other => other,
        }
    };

    let (base, base_line) = match kind.as_str() {
        "bernoulli" => {
            let (weights, line) = raw.weights.ok_or_else(|| LabError::Parse {
                line: kind_line,
                msg: "bernoulli model needs `weights`".into(),
            })?;
            (BaseMeasure::Bernoulli { weights }, line)
        }
        "markov" => {
            let (init, _) = raw.init.ok_or_else(|| LabError::Parse {
                line: kind_line,
                msg: "markov model needs `init`".into(),
            })?;
            let (rows, line) = raw.rows.ok_or_else(|| LabError::Parse {
                line: kind_line,
                msg: "markov model needs `rows`".into(),
            })?;
            (BaseMeasure::Markov { init, rows }, line)
        }
        "homogeneous" => (BaseMeasure::Homogeneous, kind_line),
        other => {
            return Err(LabError::Parse {
                line: kind_line,
                msg: format!("unknown kind {other:?} (expected bernoulli|markov|homogeneous)"),
            })
        }
    };

    GibbsModel::new(d, base, k, alpha, beta_bits).map_err(|e| attribute(e, base_line))
}

impl GibbsModel {
    /// Deterministic text rendering, used for fingerprinting grids.
    pub fn canonical_string(&self) -> String {
        let fmt = |v: &[f64]| {
            v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",")
        };
        let base = match self.base() {
            BaseMeasure::Bernoulli { weights } => format!("bernoulli:{}", fmt(weights)),
            BaseMeasure::Markov { init, rows } => format!(
                "markov:{}|{}",
                fmt(init),
                rows.iter().map(|r| fmt(r)).collect::<Vec<_>>().join(";")
            ),
            BaseMeasure::Homogeneous => "homogeneous".into(),
        };
        format!(
            "d={};{};K={:.17e};alpha={:.17e};beta_bits={:.17e}",
            self.dimension(),
            base,
            self.k(),
            self.alpha(),
            self.beta_bits()
        )
    }

    /// 64-bit FNV-1a fingerprint of the canonical rendering.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in self.canonical_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }
}
