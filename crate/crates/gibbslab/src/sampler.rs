//! Construction of the neighbor-aware sampled capacity on a depth-`J` grid,
//! plus survivor diagnostics (value ranges, level histograms, root/tail
//! decompositions).
//!
//! For every depth-`J` cell `W` the grid holds
//! `log2 max { mu(I_w) : w survivor, I_w inside a cube of N(W) ∪ {W} }`,
//! the supremum truncated at `truncation_depth`. The own-cube (non-neighbor)
//! maxima are kept alongside: they form a genuine capacity (monotone under
//! refinement) and drive the internal consistency checks.

use crate::field::{Backend, FieldConfig};
use crate::model::GibbsModel;
use crate::word::{neighborhood_indices, DyadicWord};
use crate::{LabError, Result};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Grid memory envelope: one real per cell, 512 MiB, i.e. `d*J <= 26`.
pub const MAX_GRID_BITS: u32 = 26;

/// Knobs for [`build_capacity_grid`].
#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Slack multiplier: `truncation = ceil(J/eta) + ceil(trunc_factor * log2 J)`.
    pub trunc_factor: f64,
    /// Worker threads; 0 uses the process default.
    pub threads: usize,
    /// Pins the truncation depth directly (used by refinement tests).
    pub truncation_override: Option<u32>,
    /// Extra levels scanned one by one when completing empty cells.
    pub completion_extra: u32,
    /// Hash-scan budget (candidate nodes) for the completion phase.
    pub completion_scan_cap: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            trunc_factor: 1.0,
            threads: 0,
            truncation_override: None,
            completion_extra: 4,
            completion_scan_cap: 1 << 28,
        }
    }
}

impl BuildOptions {
    pub fn with_trunc_factor(trunc_factor: f64) -> Self {
        BuildOptions { trunc_factor, ..Default::default() }
    }
}

/// Witness of a cell value: the surviving word whose `mu` realizes the max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellWitness {
    pub depth: u32,
    pub index: u64,
    /// True when found by the post-sweep completion scan (hash field).
    pub completion: bool,
}

/// Identification of the run that produced a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub model_fingerprint: u64,
    pub seed: u64,
    pub eta: f64,
    pub backend: Backend,
    pub trunc_factor: f64,
}

/// All `log2` sampled-capacity values at a fixed depth `J`
/// (`-inf` encodes an empty cell).
#[derive(Debug, Clone)]
pub struct CapacityGrid {
    dimension: u8,
    depth: u32,
    values: Vec<f64>,
    truncation_depth: u32,
    incomplete_cells: Vec<u64>,
    provenance: Provenance,
    /// Own-cube maxima (the non-neighbor capacity); absent on grids loaded
    /// from disk.
    own_values: Option<Vec<f64>>,
    witnesses: Option<Vec<Option<CellWitness>>>,
}

impl CapacityGrid {
    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    /// Grid depth `J`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn truncation_depth(&self) -> u32 {
        self.truncation_depth
    }

    pub fn incomplete_cells(&self) -> &[u64] {
        &self.incomplete_cells
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn cell_count(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn finite_count(&self) -> u64 {
        self.values.iter().filter(|v| v.is_finite()).count() as u64
    }

    /// Own-cube (non-neighbor) maxima; `None` on grids loaded from disk.
    pub fn own_values(&self) -> Option<&[f64]> {
        self.own_values.as_deref()
    }

    pub fn witnesses(&self) -> Option<&[Option<CellWitness>]> {
        self.witnesses.as_deref()
    }

    /// Exponent `-log2 value / J` of one cell (`+inf` for empty cells).
    pub fn exponent(&self, cell: u64) -> f64 {
        -self.values[cell as usize] / self.depth as f64
    }

    pub(crate) fn from_parts(
        dimension: u8,
        depth: u32,
        values: Vec<f64>,
        truncation_depth: u32,
        incomplete_cells: Vec<u64>,
        provenance: Provenance,
    ) -> Self {
        CapacityGrid {
            dimension,
            depth,
            values,
            truncation_depth,
            incomplete_cells,
            provenance,
            own_values: None,
            witnesses: None,
        }
    }
}

/// Atomic f64 max over the raw bit pattern (commutative and associative, so
/// the result is schedule-independent).
struct AtomicF64Max(Vec<AtomicU64>);

impl AtomicF64Max {
    fn new(n: usize) -> Self {
        let bits = f64::NEG_INFINITY.to_bits();
        AtomicF64Max((0..n).map(|_| AtomicU64::new(bits)).collect())
    }

    #[inline]
    fn update(&self, i: usize, v: f64) {
        let cell = &self.0[i];
        let mut cur = cell.load(Ordering::Relaxed);
        while v > f64::from_bits(cur) {
            match cell.compare_exchange_weak(
                cur,
                v.to_bits(),
                Ordering::Relaxed,
                Ordering::Relaxed,
            ) {
                Ok(_) => break,
                Err(seen) => cur = seen,
            }
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

/// Truncation depth `ceil(J/eta) + ceil(trunc_factor * log2 J)`.
pub fn truncation_depth(j: u32, eta: f64, trunc_factor: f64) -> u32 {
    let base = (j as f64 / eta).ceil() as u32;
    let slack = (trunc_factor * (j as f64).log2()).ceil() as u32;
    (base + slack).max(j)
}

/// Builds the sampled-capacity grid at depth `j`.
///
/// Sweeps every depth in `[j, truncation]`, mapping each survivor to its
/// depth-`j` ancestor and max-updating that cell and all neighboring cells.
/// Cells left empty are completed by a targeted hash-field scan of their own
/// subtree, one extra level at a time (up to `completion_extra`); cells that
/// stay empty remain flagged in `incomplete_cells`.
pub fn build_capacity_grid(
    model: &GibbsModel,
    field: &FieldConfig,
    j: u32,
    opts: &BuildOptions,
) -> Result<CapacityGrid> {
    if j < 1 {
        return Err(LabError::invalid("grid depth J must be at least 1"));
    }
    if model.dimension() != field.dimension() {
        return Err(LabError::DimensionMismatch {
            word: field.dimension(),
            expected: model.dimension(),
        });
    }
    if opts.trunc_factor < 1.0 && opts.truncation_override.is_none() {
        return Err(LabError::invalid("trunc_factor must be >= 1"));
    }
    let d = model.dimension();
    let grid_bits = d as u32 * j;
    if grid_bits > MAX_GRID_BITS {
        return Err(LabError::invalid(format!(
            "d*J = {grid_bits} exceeds the supported envelope of {MAX_GRID_BITS} \
             (512 MiB of cell values)"
        )));
    }
    let truncation = opts
        .truncation_override
        .unwrap_or_else(|| truncation_depth(j, field.eta(), opts.trunc_factor));
    if truncation > field.max_depth() {
        return Err(LabError::invalid(format!(
            "truncation depth {truncation} exceeds the field's max_depth {}",
            field.max_depth()
        )));
    }

    let cells = 1usize << grid_bits;
    let nbr = AtomicF64Max::new(cells);
    let own = AtomicF64Max::new(cells);

    run_in_pool(opts.threads, || -> Result<()> {
        for depth in j..=truncation {
            let survivors = field.survivor_indices_below(depth, 0, 0)?;
            let shift = d as u32 * (depth - j);
            survivors.par_chunks(4096).for_each(|chunk| {
                let mut hood = Vec::with_capacity(27);
                for &t in chunk {
                    let v = model.mu_log2_index(depth, t);
                    let ancestor = t >> shift;
                    own.update(ancestor as usize, v);
                    neighborhood_indices(d, j, ancestor, &mut hood);
                    for &c in &hood {
                        nbr.update(c as usize, v);
                    }
                }
            });
        }
        Ok(())
    })?;

    let mut values = nbr.into_vec();
    let mut own_values = own.into_vec();

    // Deterministic witness pass: re-enumerate the (pure) survivor stream in
    // ascending depth and keep, per cell, the first match of the final max in
    // (depth, index) order.
    let mut witnesses: Vec<Option<CellWitness>> = vec![None; cells];
    run_in_pool(opts.threads, || -> Result<()> {
        for depth in j..=truncation {
            let survivors = field.survivor_indices_below(depth, 0, 0)?;
            let shift = d as u32 * (depth - j);
            let values_ref = &values;
            let witnesses_ref = &witnesses;
            let mut matches: Vec<(u64, u64)> = survivors
                .par_chunks(4096)
                .map(|chunk| {
                    let mut hood = Vec::with_capacity(27);
                    let mut found = Vec::new();
                    for &t in chunk {
                        let v = model.mu_log2_index(depth, t);
                        let ancestor = t >> shift;
                        neighborhood_indices(d, j, ancestor, &mut hood);
                        for &c in &hood {
                            if witnesses_ref[c as usize].is_none()
                                && v.to_bits() == values_ref[c as usize].to_bits()
                            {
                                found.push((c, t));
                            }
                        }
                    }
                    found
                })
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                });
            matches.sort_unstable();
            matches.dedup();
            for (c, t) in matches {
                let w = &mut witnesses[c as usize];
                if w.is_none() {
                    *w = Some(CellWitness { depth, index: t, completion: false });
                }
            }
        }
        Ok(())
    })?;

    // targeted per-cell completion of empty cells
    let mut incomplete: Vec<u64> = (0..cells as u64)
        .filter(|&c| values[c as usize] == f64::NEG_INFINITY)
        .collect();
    if !incomplete.is_empty() {
        let hash_field = match field.backend() {
            Backend::Hash => field.clone(),
            Backend::Index => FieldConfig::new(
                field.seed(),
                field.eta(),
                d,
                Backend::Hash,
                field.max_depth().max(truncation + opts.completion_extra),
            )?,
        };
        let mut budget = opts.completion_scan_cap;
        let mut still_empty = Vec::new();
        let mut hood = Vec::with_capacity(27);
        for &cell in &incomplete {
            let mut found = false;
            for extra in 1..=opts.completion_extra {
                let depth = truncation + extra;
                if d as u64 * depth as u64 > 62 || depth > hash_field.max_depth() {
                    break;
                }
                let cost = 1u64 << (d as u32 * (depth - j));
                if cost > budget {
                    break;
                }
                budget -= cost;
                let survivors = hash_field.survivor_indices_below(depth, j, cell)?;
                for &t in &survivors {
                    let v = model.mu_log2_index(depth, t);
                    if v > own_values[cell as usize] {
                        own_values[cell as usize] = v;
                    }
                    neighborhood_indices(d, j, cell, &mut hood);
                    for &c in &hood {
                        if v > values[c as usize] {
                            values[c as usize] = v;
                            witnesses[c as usize] =
                                Some(CellWitness { depth, index: t, completion: true });
                        }
                    }
                }
                if values[cell as usize] > f64::NEG_INFINITY {
                    found = true;
                    break;
                }
            }
            if !found {
                still_empty.push(cell);
            }
        }
        incomplete = still_empty;
    }

    Ok(CapacityGrid {
        dimension: d,
        depth: j,
        values,
        truncation_depth: truncation,
        incomplete_cells: incomplete,
        provenance: Provenance {
            model_fingerprint: model.fingerprint(),
            seed: field.seed(),
            eta: field.eta(),
            backend: field.backend(),
            trunc_factor: opts.trunc_factor,
        },
        own_values: Some(own_values),
        witnesses: Some(witnesses),
    })
}

fn run_in_pool<T>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if threads == 0 {
        job()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| LabError::Resource { detail: format!("thread pool: {e}") })?;
        pool.install(job)
    }
}

/// Histogram layout over exponents.
#[derive(Debug, Clone, Copy)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let b = ((x - self.lo) / (self.hi - self.lo) * self.bins as f64) as usize;
        Some(b.min(self.bins - 1))
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * (self.hi - self.lo) / self.bins as f64
    }
}

/// Per-bin survivor counts of the exponent `-log2 mu(I_w) / j`.
#[derive(Debug, Clone)]
pub struct LevelHistogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
    pub total: u64,
}

/// Empirical exponent range `(min, max)` of `-log2 mu(I_w)/j` over the
/// depth-`j` survivors.
pub fn survivor_value_range(
    model: &GibbsModel,
    field: &FieldConfig,
    j: u32,
) -> Result<(f64, f64)> {
    let survivors = field.survivor_indices_below(j, 0, 0)?;
    if survivors.is_empty() {
        return Err(LabError::EmptyRange { depth: j });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in &survivors {
        let e = -model.mu_log2_index(j, t) / j as f64;
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}

/// Histogram of survivor exponents at depth `j`.
pub fn survivor_level_histogram(
    model: &GibbsModel,
    field: &FieldConfig,
    j: u32,
    spec: HistogramSpec,
) -> Result<LevelHistogram> {
    let survivors = field.survivor_indices_below(j, 0, 0)?;
    let mut h = LevelHistogram {
        spec,
        counts: vec![0; spec.bins],
        below: 0,
        above: 0,
        total: survivors.len() as u64,
    };
    for &t in &survivors {
        let e = -model.mu_log2_index(j, t) / j as f64;
        match spec.bin_of(e) {
            Some(b) => h.counts[b] += 1,
            None if e < spec.lo => h.below += 1,
            None => h.above += 1,
        }
    }
    Ok(h)
}

/// Joint root/tail decomposition of the depth-`j` survivors at split `eta_prime`.
#[derive(Debug, Clone)]
pub struct DecompositionHistogram {
    pub root_spec: HistogramSpec,
    pub tail_spec: HistogramSpec,
    /// `counts[root_bin][tail_bin]`, out-of-range pairs dropped.
    pub counts: Vec<Vec<u64>>,
    pub survivor_count: u64,
    /// Fraction of generation-`floor(eta_prime j)` cylinders containing a
    /// survivor whose tail exponent lies within `tol` of `tail_target`.
    pub cylinder_fraction: f64,
}

/// For each survivor `w` at depth `j`: the root exponent over the first
/// `floor(eta_prime j)` letters and the tail exponent over the rest, plus the
/// fraction of root cylinders holding a survivor with tail exponent within
/// `tol` of `tail_target` (callers pass the theory value `H_ell(eta_prime)`).
#[allow(clippy::too_many_arguments)]
pub fn decomposition_histogram(
    model: &GibbsModel,
    field: &FieldConfig,
    j: u32,
    eta_prime: f64,
    root_spec: HistogramSpec,
    tail_spec: HistogramSpec,
    tail_target: f64,
    tol: f64,
) -> Result<DecompositionHistogram> {
    if !(eta_prime > 0.0 && eta_prime <= field.eta()) {
        return Err(LabError::invalid(format!(
            "eta_prime must lie in (0, eta], got {eta_prime}"
        )));
    }
    let split = (eta_prime * j as f64).floor() as u32;
    if split == 0 || split >= j {
        return Err(LabError::invalid(format!(
            "split depth floor(eta_prime * j) = {split} must lie strictly inside (0, {j})"
        )));
    }
    let d = model.dimension() as u32;
    let survivors = field.survivor_indices_below(j, 0, 0)?;
    let mut counts = vec![vec![0u64; tail_spec.bins]; root_spec.bins];
    let mut covered = vec![false; 1usize << (d * split)];
    for &t in &survivors {
        let root_idx = t >> (d * (j - split));
        let root_v = model.mu_log2_index(split, root_idx);
        let tail_word = DyadicWord::from_tree_index(model.dimension(), j, t).shift(split);
        let tail_v = model.mu_log2(&tail_word)?;
        let root_e = -root_v / split as f64;
        let tail_e = -tail_v / (j - split) as f64;
        if let (Some(rb), Some(tb)) = (root_spec.bin_of(root_e), tail_spec.bin_of(tail_e)) {
            counts[rb][tb] += 1;
        }
        if (tail_e - tail_target).abs() <= tol {
            covered[root_idx as usize] = true;
        }
    }
    let hit = covered.iter().filter(|&&b| b).count();
    Ok(DecompositionHistogram {
        root_spec,
        tail_spec,
        counts,
        survivor_count: survivors.len() as u64,
        cylinder_fraction: hit as f64 / covered.len() as f64,
    })
}

#[cfg(test)]
mod tests;
