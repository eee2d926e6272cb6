//! Empirical `L^q` spectra, large-deviation counts, and a numerical Legendre
//! conjugate shared by all modules.

use crate::numerics::{golden_min, log2_sum_exp2, CubicSpline};
use crate::sampler::CapacityGrid;
use crate::{LabError, Result};
use rayon::prelude::*;

/// What a sampled curve represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Tau,
    TauStar,
    D,
    FLower,
    FUpper,
}

/// A sampled `(x, y)` curve with strictly increasing abscissae
/// (`-inf` ordinates allowed).
#[derive(Debug, Clone)]
pub struct Curve {
    pub kind: CurveKind,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Provenance note (depth, seeds, grid spec).
    pub meta: String,
}

impl Curve {
    pub fn new(kind: CurveKind, xs: Vec<f64>, ys: Vec<f64>, meta: impl Into<String>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(LabError::invalid("curve needs >= 2 matching samples"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::invalid("curve abscissae must be strictly increasing"));
        }
        if ys.iter().any(|y| y.is_nan() || *y == f64::INFINITY) {
            return Err(LabError::invalid("curve ordinates must be finite or -inf"));
        }
        Ok(Curve { kind, xs, ys, meta: meta.into() })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Largest concavity violation (positive = above-chord defect is fine,
    /// negative values mean the middle point dips below the chord).
    pub fn concavity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.xs.len().saturating_sub(2) {
            let (x1, x2, x3) = (self.xs[i], self.xs[i + 1], self.xs[i + 2]);
            let (y1, y2, y3) = (self.ys[i], self.ys[i + 1], self.ys[i + 2]);
            if !y1.is_finite() || !y2.is_finite() || !y3.is_finite() {
                continue;
            }
            let chord = y1 + (y3 - y1) * (x2 - x1) / (x3 - x1);
            worst = worst.max(chord - y2);
        }
        worst
    }
}

/// Finite-volume free energy of a grid:
/// `tau_J(q) = -(1/J) log2 sum_{finite cells} 2^(q log2 M(I_W))`,
/// max-shifted so no exponent overflows for any practical `q`.
pub fn lq_spectrum(grid: &CapacityGrid, q_grid: &[f64]) -> Result<Curve> {
    if grid.finite_count() == 0 {
        return Err(LabError::EmptySupport);
    }
    if q_grid.len() < 2 {
        return Err(LabError::invalid("q grid needs >= 2 points"));
    }
    let j = grid.depth() as f64;
    let finite: Vec<f64> =
        grid.values().iter().copied().filter(|v| v.is_finite()).collect();
    let mut ys = vec![0.0; q_grid.len()];
    q_grid
        .par_iter()
        .map(|&q| -log2_sum_exp2(finite.iter().map(|&v| q * v)) / j)
        .collect_into_vec(&mut ys);
    let curve = Curve::new(
        CurveKind::Tau,
        q_grid.to_vec(),
        ys,
        format!(
            "lq_spectrum J={} seed={} backend={}",
            grid.depth(),
            grid.provenance().seed,
            grid.provenance().backend
        ),
    )?;
    let defect = curve.concavity_defect();
    if defect > 1e-9 {
        return Err(LabError::Inconsistency(format!(
            "finite-volume free energy must be concave; defect {defect}"
        )));
    }
    Ok(curve)
}

/// Large-deviation counts at one depth: per-center window counts and the
/// normalized estimate `log2(count)/J` (`-inf` on empty windows). At a single
/// depth the lower and upper estimates coincide; see [`ld_envelope`].
#[derive(Debug, Clone)]
pub struct LdEstimate {
    pub centers: Vec<f64>,
    pub epsilon: f64,
    pub counts: Vec<u64>,
    pub f_est: Vec<f64>,
    pub depth: u32,
}

impl LdEstimate {
    pub fn curve(&self, kind: CurveKind) -> Result<Curve> {
        Curve::new(
            kind,
            self.centers.clone(),
            self.f_est.clone(),
            format!("ld_counts J={} eps={}", self.depth, self.epsilon),
        )
    }
}

/// Counts cells whose exponent `-log2 M(I_W) / J` lies within `epsilon` of
/// each center (empty cells never counted).
pub fn ld_counts(grid: &CapacityGrid, h_centers: &[f64], epsilon: f64) -> Result<LdEstimate> {
    if epsilon <= 0.0 {
        return Err(LabError::invalid("epsilon must be positive"));
    }
    let j = grid.depth() as f64;
    let mut exps: Vec<f64> = grid
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| -v / j)
        .collect();
    exps.sort_unstable_by(f64::total_cmp);
    let counts: Vec<u64> = h_centers
        .iter()
        .map(|&h| {
            let lo = exps.partition_point(|&e| e < h - epsilon);
            let hi = exps.partition_point(|&e| e <= h + epsilon);
            (hi - lo) as u64
        })
        .collect();
    let f_est = counts
        .iter()
        .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64).log2() / j })
        .collect();
    Ok(LdEstimate {
        centers: h_centers.to_vec(),
        epsilon,
        counts,
        f_est,
        depth: grid.depth(),
    })
}

/// Depth-ladder envelopes: pointwise min (lower) and max (upper) of the
/// single-depth estimates across `grids`.
pub fn ld_envelope(
    grids: &[&CapacityGrid],
    h_centers: &[f64],
    epsilon: f64,
) -> Result<(Curve, Curve)> {
    if grids.is_empty() {
        return Err(LabError::invalid("depth ladder must not be empty"));
    }
    let mut lower = vec![f64::INFINITY; h_centers.len()];
    let mut upper = vec![f64::NEG_INFINITY; h_centers.len()];
    let mut depths = Vec::new();
    for grid in grids {
        let est = ld_counts(grid, h_centers, epsilon)?;
        depths.push(grid.depth());
        for (i, &f) in est.f_est.iter().enumerate() {
            lower[i] = lower[i].min(f);
            upper[i] = upper[i].max(f);
        }
    }
    let lower: Vec<f64> =
        lower.into_iter().map(|v| if v == f64::INFINITY { f64::NEG_INFINITY } else { v }).collect();
    let meta = format!("ld_envelope depths={depths:?} eps={epsilon}");
    Ok((
        Curve::new(CurveKind::FLower, h_centers.to_vec(), lower, meta.clone())?,
        Curve::new(CurveKind::FUpper, h_centers.to_vec(), upper, meta)?,
    ))
}

/// Numerical Legendre conjugate of a sampled concave curve:
/// `(conj)(H) = inf_q (H q - y(q))`.
///
/// The infimum over the samples is exact for the piecewise-linear
/// interpolant; a golden-section pass over a per-segment cubic spline then
/// recovers the sub-sample behavior of smooth curves. Slope-discontinuity
/// nodes are detected from the sample slopes and split the spline, so kinked
/// free energies (first-order phase transitions) conjugate cleanly. Outside
/// the attainable slope range the conjugate is exactly `-inf`.
pub fn legendre_conjugate_numeric(curve: &Curve, h_grid: &[f64]) -> Result<Curve> {
    let (c, _) = conjugate_with_argmin(curve, h_grid)?;
    Ok(c)
}

/// As [`legendre_conjugate_numeric`], also returning the minimizing `q` per
/// `H` (`NaN` where the conjugate is `-inf`).
pub fn conjugate_with_argmin(curve: &Curve, h_grid: &[f64]) -> Result<(Curve, Vec<f64>)> {
    // trim non-finite edges; interior -inf would break concavity anyway
    let xs_all = curve.xs();
    let ys_all = curve.ys();
    let start = ys_all.iter().position(|y| y.is_finite()).unwrap_or(0);
    let end = ys_all.iter().rposition(|y| y.is_finite()).map(|i| i + 1).unwrap_or(0);
    let xs = &xs_all[start..end];
    let ys = &ys_all[start..end];
    if xs.len() < 8 {
        return Err(LabError::invalid(format!(
            "conjugation needs >= 8 finite samples, got {}",
            xs.len()
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(LabError::invalid("curve has non-finite interior samples"));
    }
    let n = xs.len();
    let slopes: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    for i in 0..slopes.len() - 1 {
        if slopes[i + 1] > slopes[i] + 1e-9 {
            return Err(LabError::invalid(format!(
                "curve is not concave within 1e-9: slope rises from {} to {} across \
                 the triple ({}, {}, {})",
                slopes[i],
                slopes[i + 1],
                xs[i],
                xs[i + 1],
                xs[i + 2]
            )));
        }
    }

    // detect slope-discontinuity nodes: a drop far above its neighbors
    let mut kinks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        let drop = slopes[i - 1] - slopes[i];
        let left = if i >= 2 { slopes[i - 2] - slopes[i - 1] } else { 0.0 };
        let right = if i + 1 < slopes.len() { slopes[i] - slopes[i + 1] } else { 0.0 };
        let smooth = left.max(0.0).max(right.max(0.0));
        if drop > 1e-7 && drop > 64.0 * smooth + 1e-7 {
            kinks.push(i);
        }
    }
    // per-segment natural splines between kinks
    let mut bounds = vec![0usize];
    bounds.extend(&kinks);
    bounds.push(n - 1);
    let mut segments: Vec<(usize, usize, CubicSpline)> = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        segments.push((a, b, CubicSpline::fit(&xs[a..=b], &ys[a..=b])?));
    }
    let eval = |q: f64| -> f64 {
        let seg = segments
            .iter()
            .find(|(a, b, _)| q >= xs[*a] && q <= xs[*b])
            .unwrap_or(segments.last().unwrap());
        seg.2.eval(q)
    };

    let max_slope = slopes[0];
    let min_slope = slopes[n - 2];
    let mut out = vec![f64::NEG_INFINITY; h_grid.len()];
    let mut arg = vec![f64::NAN; h_grid.len()];
    for (k, &h) in h_grid.iter().enumerate() {
        if h > max_slope + 1e-12 || h < min_slope - 1e-12 {
            continue;
        }
        // discrete inf sits where the slope sequence crosses h
        let i = slopes.partition_point(|&s| s > h).min(n - 1);
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(n - 1);
        let mut best = f64::INFINITY;
        let mut best_q = xs[i];
        for v in lo..=hi {
            let g = h * xs[v] - ys[v];
            if g < best {
                best = g;
                best_q = xs[v];
            }
        }
        let (q_ref, g_ref) = golden_min(|q| h * q - eval(q), xs[lo], xs[hi], 1e-10);
        if g_ref < best {
            best = g_ref;
            best_q = q_ref;
        }
        out[k] = best;
        arg[k] = best_q;
    }
    let curve = Curve::new(
        CurveKind::TauStar,
        h_grid.to_vec(),
        out,
        format!("conjugate of [{}]", curve.meta),
    )?;
    Ok((curve, arg))
}

#[cfg(test)]
mod tests;
