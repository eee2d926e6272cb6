//! Pair-based reconstruction of Gibbs weights from the sampled tree, and the
//! threshold experiment in the sampling index.
//!
//! A word `u` is 1-reconstructible when some `w` has both `w` and `wu`
//! surviving: the ratio `mu(I_wu) / mu(I_w)` then estimates `mu(I_u)` up to
//! the almost-multiplicativity constant. `k`-reconstruction concatenates `k`
//! such estimated factors.
//!
//! Pair queries evaluate survival at arbitrary concatenations, so this module
//! requires the hash backend (the index backend cannot answer lazily).

use crate::field::{Backend, FieldConfig};
use crate::model::GibbsModel;
use crate::word::DyadicWord;
use crate::{LabError, Result};

/// One reconstructed factor: `part = u_i`, witnessed by the surviving pair
/// `(prefix, prefix . part)`.
#[derive(Debug, Clone)]
pub struct ReconPart {
    pub part: DyadicWord,
    pub prefix: DyadicWord,
    /// Depth at which the pair search found this witness.
    pub prefix_depth: u32,
}

/// Outcome of a reconstruction attempt.
#[derive(Debug, Clone)]
pub struct ReconResult {
    pub target: DyadicWord,
    pub found: bool,
    /// The `k` factors; empty unless `found`.
    pub parts: Vec<ReconPart>,
    /// `sum_i (mu_log2(w_i u_i) - mu_log2(w_i))`; present iff found.
    pub mu_estimate_log2: Option<f64>,
    /// `(k+1) * quasi_bernoulli_log2C`.
    pub error_bound_log2: f64,
    /// Deepest prefix depth examined by the search.
    pub search_depth_used: u32,
}

fn require_hash(field: &FieldConfig) -> Result<()> {
    if field.backend() != Backend::Hash {
        return Err(LabError::invalid(
            "reconstruction needs the hash backend (lazy pair queries)",
        ));
    }
    Ok(())
}

/// Searches for the shallowest, then lexicographically smallest `w` with both
/// `w` and `w u` surviving, scanning prefixes of depth `0..=depth_budget`
/// (depth 0 is the always-surviving empty word, so the pair degenerates to
/// `u` itself surviving).
pub fn find_pair(
    model: &GibbsModel,
    field: &FieldConfig,
    u: &DyadicWord,
    depth_budget: u32,
) -> Result<ReconResult> {
    require_hash(field)?;
    if u.depth() + depth_budget > field.max_depth() {
        return Err(LabError::DepthOverflow {
            depth: u.depth() + depth_budget,
            max_depth: field.max_depth(),
        });
    }
    let c = model.quasi_bernoulli_log2c();
    let mut deepest = 0;
    for b in 0..=depth_budget {
        deepest = b;
        if b == 0 {
            if field.survives(u)? {
                return finish(model, u.clone(), DyadicWord::root(u.dimension()), 0, c, 0);
            }
            continue;
        }
        // survivor proposals at depth b, then confirmation of the concatenation
        for w in field.survivors_at(b, None)? {
            let mut st = field.state_for(&w);
            for &l in u.letters() {
                st = field.absorb(st, l);
            }
            if field.state_survives(&st) {
                return finish(model, u.clone(), w, b, c, b);
            }
        }
    }
    Ok(ReconResult {
        target: u.clone(),
        found: false,
        parts: Vec::new(),
        mu_estimate_log2: None,
        error_bound_log2: 2.0 * c,
        search_depth_used: deepest,
    })
}

fn finish(
    model: &GibbsModel,
    target: DyadicWord,
    prefix: DyadicWord,
    prefix_depth: u32,
    log2c: f64,
    search_depth_used: u32,
) -> Result<ReconResult> {
    let wu = prefix.concat(&target)?;
    let estimate = model.mu_log2(&wu)? - model.mu_log2(&prefix)?;
    Ok(ReconResult {
        target: target.clone(),
        found: true,
        parts: vec![ReconPart { part: target, prefix, prefix_depth }],
        mu_estimate_log2: Some(estimate),
        error_bound_log2: 2.0 * log2c,
        search_depth_used,
    })
}

/// Number of surviving pairs `(w, wu)` with `1 <= |w| <= depth_budget`
/// (the depth-0 pair is excluded, matching [`expected_pair_count`]).
pub fn count_pairs(field: &FieldConfig, u: &DyadicWord, depth_budget: u32) -> Result<u64> {
    require_hash(field)?;
    if u.depth() + depth_budget > field.max_depth() {
        return Err(LabError::DepthOverflow {
            depth: u.depth() + depth_budget,
            max_depth: field.max_depth(),
        });
    }
    let mut count = 0;
    for b in 1..=depth_budget {
        for w in field.survivors_at(b, None)? {
            let mut st = field.state_for(&w);
            for &l in u.letters() {
                st = field.absorb(st, l);
            }
            if field.state_survives(&st) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Expected number of surviving pairs `(w, wu)` over `1 <= |w| <= depth_budget`
/// for a word of length `word_len`:
/// `2^(-l (1-eta) d) * sum_b 2^(d b (2 eta - 1))`.
pub fn expected_pair_count(dimension: u8, eta: f64, word_len: u32, depth_budget: u32) -> f64 {
    let d = dimension as f64;
    let word_factor = (-(word_len as f64) * (1.0 - eta) * d).exp2();
    let mut sum = 0.0;
    for b in 1..=depth_budget {
        sum += (d * b as f64 * (2.0 * eta - 1.0)).exp2();
    }
    word_factor * sum
}

/// Tries `k = 1` first, then a dynamic-programming split of `u` into at most
/// `k_max` factors, each with a surviving pair. The split with the fewest
/// factors wins; ties prefer earlier cut points.
pub fn reconstruct(
    model: &GibbsModel,
    field: &FieldConfig,
    u: &DyadicWord,
    depth_budget: u32,
    k_max: u32,
) -> Result<ReconResult> {
    require_hash(field)?;
    let whole = find_pair(model, field, u, depth_budget)?;
    if whole.found || k_max <= 1 || u.depth() < 2 {
        return Ok(whole);
    }
    let c = model.quasi_bernoulli_log2c();
    let len = u.depth() as usize;
    // memoized 1-reconstruction of every substring
    let mut sub: Vec<Vec<Option<ReconResult>>> = vec![vec![None; len + 1]; len + 1];
    let mut deepest = whole.search_depth_used;
    let mut part_of = |i: usize, j: usize,
                       sub: &mut Vec<Vec<Option<ReconResult>>>|
     -> Result<bool> {
        if sub[i][j].is_none() {
            let piece = DyadicWord::from_letters(
                u.dimension(),
                &u.letters()[i..j],
            )?;
            let r = find_pair(model, field, &piece, depth_budget)?;
            sub[i][j] = Some(r);
        }
        Ok(sub[i][j].as_ref().unwrap().found)
    };

    // dp[j] = fewest factors covering the length-j prefix
    let mut dp = vec![u32::MAX; len + 1];
    let mut back = vec![usize::MAX; len + 1];
    dp[0] = 0;
    for j in 1..=len {
        for i in 0..j {
            if dp[i] == u32::MAX || dp[i] + 1 > k_max {
                continue;
            }
            if (dp[i] + 1) < dp[j] && part_of(i, j, &mut sub)? {
                dp[j] = dp[i] + 1;
                back[j] = i;
            }
        }
    }
    if dp[len] == u32::MAX {
        return Ok(ReconResult {
            target: u.clone(),
            found: false,
            parts: Vec::new(),
            mu_estimate_log2: None,
            error_bound_log2: (k_max as f64 + 1.0) * c,
            search_depth_used: depth_budget,
        });
    }
    // walk the split back to front
    let mut cuts = vec![len];
    let mut at = len;
    while at > 0 {
        at = back[at];
        cuts.push(at);
    }
    cuts.reverse();
    let mut parts = Vec::new();
    let mut estimate = 0.0;
    for w in cuts.windows(2) {
        let r = sub[w[0]][w[1]].as_ref().unwrap();
        estimate += r.mu_estimate_log2.unwrap();
        deepest = deepest.max(r.search_depth_used);
        parts.push(r.parts[0].clone());
    }
    let k = parts.len() as f64;
    Ok(ReconResult {
        target: u.clone(),
        found: true,
        parts,
        mu_estimate_log2: Some(estimate),
        error_bound_log2: (k + 1.0) * c,
        search_depth_used: deepest,
    })
}

/// One row of the fraction experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FractionRow {
    pub eta: f64,
    pub seed: u64,
    pub word_len: u32,
    pub fraction: f64,
    pub expected_pairs: f64,
}

/// For each `(eta, seed)`, the fraction of all length-`word_len` words that
/// are 1-reconstructible within the depth budget. Monotone nondecreasing in
/// `eta` in expectation.
pub fn fraction_experiment(
    model: &GibbsModel,
    etas: &[f64],
    word_len: u32,
    depth_budget: u32,
    seeds: &[u64],
) -> Result<Vec<FractionRow>> {
    let d = model.dimension();
    if d as u64 * word_len as u64 > 20 {
        return Err(LabError::Resource {
            detail: format!("2^(d*word_len) words is too many to enumerate (d*l = {})",
                d as u64 * word_len as u64),
        });
    }
    let mut rows = Vec::new();
    for &eta in etas {
        let expected = expected_pair_count(d, eta, word_len, depth_budget);
        for &seed in seeds {
            let field =
                FieldConfig::new(seed, eta, d, Backend::Hash, word_len + depth_budget)?;
            let fraction = if word_len == 0 {
                1.0 // the empty word is always reconstructible via the root
            } else {
                run_fraction(&field, word_len, depth_budget)?
            };
            rows.push(FractionRow { eta, seed, word_len, fraction, expected_pairs: expected });
        }
    }
    Ok(rows)
}

fn run_fraction(field: &FieldConfig, word_len: u32, depth_budget: u32) -> Result<f64> {
    let d = field.dimension();
    let total = 1u64 << (d as u32 * word_len);
    // letters of every candidate word, reused across prefixes
    let letters: Vec<Vec<u8>> = (0..total)
        .map(|t| {
            DyadicWord::from_tree_index(d, word_len, t)
                .letters()
                .to_vec()
        })
        .collect();
    let mut pending: Vec<usize> = (0..total as usize).collect();
    // depth 0: the empty prefix always survives
    pending.retain(|&i| {
        let mut st = field.root_state();
        for &l in &letters[i] {
            st = field.absorb(st, l);
        }
        !field.state_survives(&st)
    });
    for b in 1..=depth_budget {
        if pending.is_empty() {
            break;
        }
        for w in field.survivor_indices_below(b, 0, 0)? {
            if pending.is_empty() {
                break;
            }
            let mut st = field.root_state();
            let mask = (1u64 << d) - 1;
            for k in 1..=b {
                st = field.absorb(st, ((w >> (d as u32 * (b - k))) & mask) as u8);
            }
            pending.retain(|&i| {
                let mut s = st;
                for &l in &letters[i] {
                    s = field.absorb(s, l);
                }
                !field.state_survives(&s)
            });
        }
    }
    Ok((total as usize - pending.len()) as f64 / total as f64)
}

/// Interpolated sampling index at which `mean_fraction` crosses one half
/// (`None` when it never does).
pub fn crossing_eta(etas: &[f64], mean_fractions: &[f64]) -> Option<f64> {
    for i in 0..etas.len() {
        if mean_fractions[i] >= 0.5 {
            if i == 0 {
                return Some(etas[0]);
            }
            let (x0, x1) = (etas[i - 1], etas[i]);
            let (y0, y1) = (mean_fractions[i - 1], mean_fractions[i]);
            return Some(x0 + (0.5 - y0) / (y1 - y0) * (x1 - x0));
        }
    }
    None
}

#[cfg(test)]
mod tests;
