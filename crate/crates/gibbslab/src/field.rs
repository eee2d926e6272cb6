//! Deterministic, seeded realization of the independent Bernoulli survival
//! variables `p_w` with `P(p_w = 1) = 2^(-d (1-eta) |w|)`.
//!
//! Two interchangeable backends:
//! - [`Backend::Hash`]: ground truth. `p_w` is a pure function of
//!   `(seed, word)` through a keyed 64-bit mixer, so arbitrary lazy point
//!   queries (including concatenations) are possible. Enumerating survivors
//!   costs a full scan of the level.
//! - [`Backend::Index`]: scalable. Per depth, draws the survivor count
//!   `N ~ Binomial(2^(d j), p_j)` from a seeded stream and then a uniform
//!   `N`-subset of the level by rejection; a pure function of `(seed, depth)`.
//!   Distributionally identical to the hash backend by exchangeability, at
//!   cost `O(N)` instead of `O(2^(d j))`.
//!
//! Both backends replay exactly: re-evaluation always returns identical
//! results for the same configuration.

use crate::word::DyadicWord;
use crate::{LabError, Result};
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which realization backs the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    Hash,
    Index,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Hash => write!(f, "hash"),
            Backend::Index => write!(f, "index"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hash" => Ok(Backend::Hash),
            "index" => Ok(Backend::Index),
            other => Err(LabError::invalid(format!(
                "unknown backend {other:?} (expected hash|index)"
            ))),
        }
    }
}

/// Default cap on full-scan candidates for the hash backend.
pub const DEFAULT_SCAN_CAP: u64 = 1 << 32;
/// Default cap on the survivor count materialized per depth.
pub const DEFAULT_SURVIVOR_CAP: u64 = 1 << 27;

/// A seeded survival field over words of depth `<= max_depth`.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    seed: u64,
    eta: f64,
    dimension: u8,
    backend: Backend,
    max_depth: u32,
    scan_cap: u64,
    survivor_cap: u64,
}

/// Incremental hash state over a word prefix.
#[derive(Debug, Clone, Copy)]
pub struct HashState {
    state: u64,
    depth: u32,
}

impl HashState {
    pub fn depth(&self) -> u32 {
        self.depth
    }
}

#[inline]
fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}

impl FieldConfig {
    pub fn new(seed: u64, eta: f64, dimension: u8, backend: Backend, max_depth: u32) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(LabError::invalid(format!("eta must lie in (0,1), got {eta}")));
        }
        if dimension < 1 || dimension > 8 {
            return Err(LabError::invalid("dimension must be in 1..=8"));
        }
        if max_depth < 1 {
            return Err(LabError::invalid("max_depth must be at least 1"));
        }
        Ok(FieldConfig {
            seed,
            eta,
            dimension,
            backend,
            max_depth,
            scan_cap: DEFAULT_SCAN_CAP,
            survivor_cap: DEFAULT_SURVIVOR_CAP,
        })
    }

    pub fn with_scan_cap(mut self, cap: u64) -> Self {
        self.scan_cap = cap;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Depths whose per-node survival probability falls below `2^-64` are
    /// treated as empty levels; this returns a warning when the configured
    /// range contains such depths.
    pub fn warnings(&self) -> Vec<String> {
        let x_per_level = self.dimension as f64 * (1.0 - self.eta);
        let first_empty = (64.0 / x_per_level).ceil() as u32;
        if self.max_depth >= first_empty {
            vec![format!(
                "survival probability underflows 2^-64 from depth {first_empty}; \
                 those levels are treated as empty"
            )]
        } else {
            Vec::new()
        }
    }

    /// 64-bit acceptance threshold at depth `j`:
    /// `round(2^64 * 2^(-d (1-eta) j))` clamped to `[1, 2^64]`.
    /// `None` encodes a saturated threshold (the root: always survive);
    /// `Some(0)` encodes an empty level (probability below `2^-64`).
    fn threshold(&self, j: u32) -> Option<u64> {
        let x = self.dimension as f64 * (1.0 - self.eta) * j as f64;
        if x <= 0.0 {
            return None;
        }
        if x >= 64.0 {
            return Some(0);
        }
        let t = (64.0 - x).exp2().round();
        if t >= 1.845e19 {
            // rounds past u64::MAX: saturated
            return None;
        }
        Some((t as u64).max(1))
    }

    /// Exact marginal survival probability realized by the hash backend at
    /// depth `j` (threshold / 2^64). The index backend draws its per-depth
    /// counts with this same probability.
    pub fn marginal_probability(&self, j: u32) -> f64 {
        match self.threshold(j) {
            None => 1.0,
            Some(t) => t as f64 / 2f64.powi(64),
        }
    }

    pub(crate) fn root_state(&self) -> HashState {
        // fold seed and dimension into the initial state
        let state = fmix64(self.seed ^ 0x6a09_e667_f3bc_c909 ^ ((self.dimension as u64) << 56));
        HashState { state, depth: 0 }
    }

    #[inline]
    pub(crate) fn absorb(&self, st: HashState, letter: u8) -> HashState {
        let mut s = st.state ^ (letter as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        s = s.wrapping_mul(0x2545_f491_4f6c_dd1d);
        s ^= s >> 31;
        HashState { state: s, depth: st.depth + 1 }
    }

    #[inline]
    pub(crate) fn state_survives(&self, st: &HashState) -> bool {
        match self.threshold(st.depth) {
            None => true,
            Some(0) => false,
            Some(t) => fmix64(st.state ^ (st.depth as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)) < t,
        }
    }

    pub(crate) fn state_for(&self, w: &DyadicWord) -> HashState {
        let mut st = self.root_state();
        for &l in w.letters() {
            st = self.absorb(st, l);
        }
        st
    }

    /// Survival of a single word (hash backend only; the index backend has no
    /// lazy per-node field). The empty word always survives.
    pub fn survives(&self, w: &DyadicWord) -> Result<bool> {
        if self.backend != Backend::Hash {
            return Err(LabError::invalid(
                "survives() needs the hash backend; the index backend only enumerates levels",
            ));
        }
        if w.dimension() != self.dimension {
            return Err(LabError::DimensionMismatch {
                word: w.dimension(),
                expected: self.dimension,
            });
        }
        if w.depth() > self.max_depth {
            return Err(LabError::DepthOverflow {
                depth: w.depth(),
                max_depth: self.max_depth,
            });
        }
        if w.is_root() {
            return Ok(true);
        }
        Ok(self.state_survives(&self.state_for(w)))
    }

    /// Sorted tree indices of the depth-`j` survivors below `prefix`
    /// (`prefix_depth = 0`, `prefix_index = 0` for the whole level).
    pub fn survivor_indices_below(
        &self,
        j: u32,
        prefix_depth: u32,
        prefix_index: u64,
    ) -> Result<Vec<u64>> {
        if j > self.max_depth {
            return Err(LabError::DepthOverflow { depth: j, max_depth: self.max_depth });
        }
        if prefix_depth > j {
            return Err(LabError::invalid("prefix deeper than the requested level"));
        }
        // enumeration manipulates packed tree indices
        if self.dimension as u64 * j as u64 > 62 {
            return Err(LabError::Resource {
                detail: format!(
                    "survivor enumeration needs d*j <= 62 to pack indices, got {}",
                    self.dimension as u64 * j as u64
                ),
            });
        }
        match self.backend {
            Backend::Hash => {
                if prefix_depth == j {
                    // single candidate: the prefix itself
                    let mut st = self.root_state();
                    let d = self.dimension as u32;
                    let mask = (1u64 << d) - 1;
                    for k in 1..=j {
                        st = self.absorb(st, ((prefix_index >> (d * (j - k))) & mask) as u8);
                    }
                    let alive = j == 0 || self.state_survives(&st);
                    return Ok(if alive { vec![prefix_index] } else { Vec::new() });
                }
                self.scan_level(j, prefix_depth, prefix_index)
            }
            Backend::Index => {
                let all = self.index_level(j)?;
                if prefix_depth == 0 {
                    return Ok(all);
                }
                let shift = self.dimension as u32 * (j - prefix_depth);
                let lo = prefix_index << shift;
                let hi = lo + (1u64 << shift);
                let start = all.partition_point(|&t| t < lo);
                let end = all.partition_point(|&t| t < hi);
                Ok(all[start..end].to_vec())
            }
        }
    }

    /// The survivor set `S_j(eta, prefix)` as words. `prefix = None` means
    /// the whole level.
    pub fn survivors_at(&self, j: u32, prefix: Option<&DyadicWord>) -> Result<Vec<DyadicWord>> {
        let (pd, pi) = match prefix {
            None => (0, 0),
            Some(p) => {
                if p.dimension() != self.dimension {
                    return Err(LabError::DimensionMismatch {
                        word: p.dimension(),
                        expected: self.dimension,
                    });
                }
                (p.depth(), p.tree_index())
            }
        };
        Ok(self
            .survivor_indices_below(j, pd, pi)?
            .into_iter()
            .map(|t| DyadicWord::from_tree_index(self.dimension, j, t))
            .collect())
    }

    /// Hash backend: full scan of the `2^(d (j - prefix_depth))` candidates,
    /// carrying incremental states down the tree. Indices come out sorted.
    fn scan_level(&self, j: u32, prefix_depth: u32, prefix_index: u64) -> Result<Vec<u64>> {
        let extra = j - prefix_depth;
        let candidates = 1u128 << (self.dimension as u32 * extra);
        if candidates > self.scan_cap as u128 {
            return Err(LabError::Resource {
                detail: format!(
                    "hash-backend scan of 2^{} candidates exceeds the cap of {}; \
                     use the index backend for deep levels",
                    self.dimension as u32 * extra,
                    self.scan_cap
                ),
            });
        }
        let mut prefix_state = self.root_state();
        if prefix_depth > 0 {
            let d = self.dimension as u32;
            let mask = (1u64 << d) - 1;
            for k in 1..=prefix_depth {
                let letter = (prefix_index >> (d * (prefix_depth - k))) & mask;
                prefix_state = self.absorb(prefix_state, letter as u8);
            }
        }
        let mut out = Vec::new();
        if self.threshold(j) == Some(0) {
            return Ok(out);
        }
        let alphabet = 1u8 << self.dimension;
        // iterative DFS in lexicographic order
        let mut stack: Vec<(HashState, u64, u8)> = vec![(prefix_state, prefix_index, 0)];
        while let Some((st, idx, next_letter)) = stack.pop() {
            if next_letter >= alphabet {
                continue;
            }
            stack.push((st, idx, next_letter + 1));
            let child = self.absorb(st, next_letter);
            let child_idx = (idx << self.dimension) | next_letter as u64;
            if child.depth == j {
                if self.state_survives(&child) {
                    out.push(child_idx);
                }
            } else {
                stack.push((child, child_idx, 0));
            }
        }
        Ok(out)
    }

    /// Index backend: `N ~ Binomial(2^(d j), p_j)` then a uniform `N`-subset
    /// by rejection of duplicates. Pure function of `(seed, j)`.
    fn index_level(&self, j: u32) -> Result<Vec<u64>> {
        let p = self.marginal_probability(j);
        if j == 0 {
            return Ok(vec![0]);
        }
        if p <= 0.0 {
            return Ok(Vec::new());
        }
        let n = 1u64 << (self.dimension as u32 * j);
        let mut rng = self.level_rng(j);
        let binom = rand_distr::Binomial::new(n, p).map_err(|e| {
            LabError::Numerical(format!("binomial draw failed at depth {j}: {e}"))
        })?;
        let count = binom.sample(&mut rng);
        if count > self.survivor_cap {
            return Err(LabError::Resource {
                detail: format!(
                    "depth {j} holds {count} survivors, above the per-depth cap {}",
                    self.survivor_cap
                ),
            });
        }
        let count = count as usize;
        let mut set: Vec<u64> = Vec::with_capacity(count + count / 8 + 4);
        while set.len() < count {
            for _ in 0..(count - set.len()) {
                set.push(rng.gen_range(0..n));
            }
            set.sort_unstable();
            set.dedup();
        }
        Ok(set)
    }

    fn level_rng(&self, j: u32) -> ChaCha8Rng {
        let derived = fmix64(self.seed ^ fmix64((j as u64) ^ 0xa076_1d64_78bd_642f));
        ChaCha8Rng::seed_from_u64(derived)
    }
}

#[cfg(test)]
mod tests;
