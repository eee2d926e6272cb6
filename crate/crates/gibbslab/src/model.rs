//! Gibbs capacities on the `2^d`-ary tree and their thermodynamics.
//!
//! A model assigns `mu(I_w) = K nu([w])^alpha 2^(-beta_bits |w|)` where `nu`
//! is a fully supported Bernoulli or memory-1 Markov measure (or Lebesgue for
//! the homogeneous case). Every value is handled in log2 domain end to end;
//! `mu = 0` never occurs here, only in sampled grids.

use crate::numerics::{bisect, log2_sum_exp2};
use crate::word::DyadicWord;
use crate::{LabError, Result};

/// Stand-in for `q = +/- infinity` in endpoint and Legendre computations.
/// `tau'` approaches its limits exponentially fast, so the cap error is far
/// below every tolerance used in this crate.
pub const Q_CAP: f64 = 200.0;

const POWER_ITER_TOL: f64 = 1e-13;
const POWER_ITER_CAP: usize = 10_000;
const LN2: f64 = std::f64::consts::LN_2;

/// Base measure `nu` of a Gibbs capacity.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    /// Product measure with one weight per letter; weights sum to 1.
    Bernoulli { weights: Vec<f64> },
    /// Memory-1 Markov measure: initial distribution plus a strictly
    /// positive row-stochastic transition matrix.
    Markov { init: Vec<f64>, rows: Vec<Vec<f64>> },
    /// Lebesgue measure (`nu([w]) = 2^(-d |w|)`).
    Homogeneous,
}

/// Degree of homogeneity detected for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    /// Linear free energy; single local dimension.
    Exact,
    /// Weight spread below `1e-6`: breakpoints of the sampled spectrum
    /// collide numerically. Treated as non-homogeneous, with a warning.
    Near,
    No,
}

/// A Gibbs capacity with full support.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    dimension: u8,
    base: BaseMeasure,
    k: f64,
    alpha: f64,
    beta_bits: f64,
    log2_k: f64,
    /// Per-level log2 increments, including the `-beta_bits` drift:
    /// Bernoulli: by letter; Markov: `init_step` then `trans_step[prev][next]`;
    /// Homogeneous: the constant `-(alpha d + beta)`.
    step: StepTable,
}

#[derive(Debug, Clone)]
enum StepTable {
    Bernoulli(Vec<f64>),
    Markov { init: Vec<f64>, trans: Vec<Vec<f64>> },
    Homogeneous(f64),
}

impl GibbsModel {
    pub fn new(
        dimension: u8,
        base: BaseMeasure,
        k: f64,
        alpha: f64,
        beta_bits: f64,
    ) -> Result<Self> {
        if dimension < 1 || dimension > 8 {
            return Err(LabError::invalid("dimension must be in 1..=8"));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(LabError::invalid("K must be a positive finite real"));
        }
        if alpha < 0.0 || beta_bits < 0.0 || !alpha.is_finite() || !beta_bits.is_finite() {
            return Err(LabError::invalid("alpha and beta_bits must be nonnegative"));
        }
        if alpha == 0.0 && beta_bits == 0.0 {
            return Err(LabError::invalid("(alpha, beta_bits) = (0, 0) makes mu constant"));
        }
        let m = 1usize << dimension;
        let check_dist = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != m {
                return Err(LabError::invalid(format!(
                    "{what} must have 2^d = {m} entries, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(LabError::invalid(format!("{what} must be strictly positive")));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(LabError::invalid(format!("{what} must sum to 1, got {s}")));
            }
            Ok(())
        };
        match &base {
            BaseMeasure::Bernoulli { weights } => check_dist(weights, "weights")?,
            BaseMeasure::Markov { init, rows } => {
                check_dist(init, "init")?;
                if rows.len() != m {
                    return Err(LabError::invalid(format!(
                        "transition matrix must have 2^d = {m} rows, got {}",
                        rows.len()
                    )));
                }
                for (a, row) in rows.iter().enumerate() {
                    check_dist(row, &format!("transition row {a}"))?;
                }
            }
            BaseMeasure::Homogeneous => {}
        }

        let log2_k = k.log2();
        let step = match &base {
            BaseMeasure::Bernoulli { weights } => StepTable::Bernoulli(
                weights.iter().map(|&w| alpha * w.log2() - beta_bits).collect(),
            ),
            BaseMeasure::Markov { init, rows } => StepTable::Markov {
                init: init.iter().map(|&w| alpha * w.log2() - beta_bits).collect(),
                trans: rows
                    .iter()
                    .map(|row| row.iter().map(|&w| alpha * w.log2() - beta_bits).collect())
                    .collect(),
            },
            BaseMeasure::Homogeneous => {
                StepTable::Homogeneous(-(alpha * dimension as f64) - beta_bits)
            }
        };
        Ok(GibbsModel { dimension, base, k, alpha, beta_bits, log2_k, step })
    }

    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    pub fn dim_f(&self) -> f64 {
        self.dimension as f64
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta_bits(&self) -> f64 {
        self.beta_bits
    }

    /// Detects homogeneity up to tolerance `1e-12` on weight equality
    /// (`Near` below spread `1e-6`).
    pub fn homogeneity(&self) -> Homogeneity {
        if self.alpha == 0.0 {
            return Homogeneity::Exact;
        }
        let spread = match &self.base {
            BaseMeasure::Homogeneous => 0.0,
            BaseMeasure::Bernoulli { weights } => {
                let mx = weights.iter().cloned().fold(f64::MIN, f64::max);
                let mn = weights.iter().cloned().fold(f64::MAX, f64::min);
                mx - mn
            }
            BaseMeasure::Markov { rows, .. } => {
                // homogeneous iff every transition probability equals 2^-d
                let u = (self.dimension as f64).exp2().recip();
                rows.iter()
                    .flat_map(|r| r.iter())
                    .map(|&w| (w - u).abs())
                    .fold(0.0, f64::max)
            }
        };
        if spread <= 1e-12 {
            Homogeneity::Exact
        } else if spread < 1e-6 {
            Homogeneity::Near
        } else {
            Homogeneity::No
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneity() == Homogeneity::Exact
    }

    /// For a homogeneous model, the per-level exponent in bits:
    /// `mu(I_w) = K 2^(-effective_beta |w|)`.
    pub fn effective_beta(&self) -> f64 {
        self.alpha * self.dimension as f64 + self.beta_bits
    }

    /// `log2 mu(I_w)` as a running sum over the letters; finite for any depth.
    pub fn mu_log2(&self, w: &DyadicWord) -> Result<f64> {
        if w.dimension() != self.dimension {
            return Err(LabError::DimensionMismatch {
                word: w.dimension(),
                expected: self.dimension,
            });
        }
        Ok(self.mu_log2_letters(w.letters().iter().copied()))
    }

    /// Same running sum, decoding the letters of a `(depth, tree index)` pair.
    /// Bit-identical to [`GibbsModel::mu_log2`] on the corresponding word.
    pub fn mu_log2_index(&self, depth: u32, index: u64) -> f64 {
        let d = self.dimension as u32;
        let mask = (1u64 << d) - 1;
        self.mu_log2_letters((1..=depth).map(|k| ((index >> (d * (depth - k))) & mask) as u8))
    }

    fn mu_log2_letters(&self, letters: impl Iterator<Item = u8>) -> f64 {
        let mut acc = self.log2_k;
        match &self.step {
            StepTable::Bernoulli(step) => {
                for l in letters {
                    acc += step[l as usize];
                }
            }
            StepTable::Homogeneous(step) => {
                for _ in letters {
                    acc += *step;
                }
            }
            StepTable::Markov { init, trans } => {
                let mut prev: Option<u8> = None;
                for l in letters {
                    acc += match prev {
                        None => init[l as usize],
                        Some(a) => trans[a as usize][l as usize],
                    };
                    prev = Some(l);
                }
            }
        }
        acc
    }

    /// A finite `log2 C` for the almost-multiplicativity
    /// `C^-1 mu(I_w) mu(I_v) <= mu(I_wv) <= C mu(I_w) mu(I_v)`.
    /// One valid choice, not necessarily minimal: callers must treat it as an
    /// upper bound only.
    pub fn quasi_bernoulli_log2c(&self) -> f64 {
        let k_term = self.log2_k.abs();
        match &self.base {
            BaseMeasure::Bernoulli { .. } | BaseMeasure::Homogeneous => k_term,
            BaseMeasure::Markov { init, rows } => {
                // concatenation replaces the initial weight of v's first letter
                // by a transition from w's last letter
                let mut worst = 0.0f64;
                for row in rows {
                    for (b, &p) in row.iter().enumerate() {
                        worst = worst.max((p / init[b]).log2().abs());
                    }
                }
                self.alpha * worst + k_term
            }
        }
    }

    /// `tau_nu(s) = -log2 sum_i p_i^s` (Bernoulli / homogeneous) or
    /// `-log2 rho(A_s)` for the entrywise power matrix (Markov).
    fn tau_nu(&self, s: f64) -> Result<f64> {
        match &self.base {
            BaseMeasure::Homogeneous => Ok(self.dim_f() * (s - 1.0)),
            BaseMeasure::Bernoulli { weights } => {
                Ok(-log2_sum_exp2(weights.iter().map(|&p| s * p.log2())))
            }
            BaseMeasure::Markov { rows, .. } => {
                let (log2_rho, _, _) = markov_spectral(rows, s)?;
                Ok(-log2_rho)
            }
        }
    }

    fn tau_nu_prime(&self, s: f64) -> Result<f64> {
        match &self.base {
            BaseMeasure::Homogeneous => Ok(self.dim_f()),
            BaseMeasure::Bernoulli { weights } => {
                let logs: Vec<f64> = weights.iter().map(|&p| p.log2()).collect();
                let m = logs.iter().map(|&l| s * l).fold(f64::MIN, f64::max);
                let mut num = 0.0;
                let mut den = 0.0;
                for &l in &logs {
                    let w = (s * l - m).exp2();
                    num += w * l;
                    den += w;
                }
                Ok(-num / den)
            }
            BaseMeasure::Markov { rows, .. } => {
                let (log2_rho, right, left) = markov_spectral(rows, s)?;
                Ok(-markov_rho_log_derivative(rows, s, log2_rho, &right, &left))
            }
        }
    }

    /// Exact thermodynamic-limit free energy
    /// `tau_mu(q) = beta_bits q + tau_nu(alpha q)`.
    pub fn tau_mu(&self, q: f64) -> Result<f64> {
        Ok(self.beta_bits * q + self.tau_nu(self.alpha * q)?)
    }

    /// Derivative of the free energy; strictly decreasing in `q` for
    /// non-homogeneous models.
    pub fn tau_mu_prime(&self, q: f64) -> Result<f64> {
        Ok(self.beta_bits + self.alpha * self.tau_nu_prime(self.alpha * q)?)
    }

    /// Support endpoints `(H_min, H_s, H_max)` of the Legendre spectrum;
    /// all three coincide iff the model is homogeneous.
    pub fn endpoints(&self) -> Result<(f64, f64, f64)> {
        if self.is_homogeneous() {
            let h = self.effective_beta();
            return Ok((h, h, h));
        }
        let h_s = self.tau_mu_prime(0.0)?;
        match &self.base {
            BaseMeasure::Bernoulli { weights } => {
                let neg_logs: Vec<f64> = weights.iter().map(|&p| -p.log2()).collect();
                let mn = neg_logs.iter().cloned().fold(f64::MAX, f64::min);
                let mx = neg_logs.iter().cloned().fold(f64::MIN, f64::max);
                Ok((
                    self.beta_bits + self.alpha * mn,
                    h_s,
                    self.beta_bits + self.alpha * mx,
                ))
            }
            _ => Ok((self.tau_mu_prime(Q_CAP)?, h_s, self.tau_mu_prime(-Q_CAP)?)),
        }
    }

    /// Legendre transform `tau_mu*(H) = inf_q (Hq - tau_mu(q))`, which equals
    /// the singularity spectrum `D_mu(H)`. Returns `-inf` outside
    /// `[H_min, H_max]`.
    pub fn tau_star(&self, h: f64) -> Result<f64> {
        if self.is_homogeneous() {
            let h0 = self.effective_beta();
            return Ok(if (h - h0).abs() <= 1e-12 {
                self.dim_f()
            } else {
                f64::NEG_INFINITY
            });
        }
        let (h_min, _, h_max) = self.endpoints()?;
        if h < h_min - 1e-12 || h > h_max + 1e-12 {
            return Ok(f64::NEG_INFINITY);
        }
        let q = self.solve_slope(h)?;
        Ok(h * q - self.tau_mu(q)?)
    }

    /// Solves `tau_mu'(q) = h` by bisection on `[-Q_CAP, Q_CAP]` (the slope
    /// is strictly decreasing); clamps to the cap outside the bracket.
    pub fn solve_slope(&self, h: f64) -> Result<f64> {
        let lo = self.tau_mu_prime(Q_CAP)?;
        let hi = self.tau_mu_prime(-Q_CAP)?;
        if h <= lo {
            return Ok(Q_CAP);
        }
        if h >= hi {
            return Ok(-Q_CAP);
        }
        bisect(
            |q| self.tau_mu_prime(q).unwrap_or(f64::NAN) - h,
            -Q_CAP,
            Q_CAP,
            1e-12,
        )
    }
}

/// Log-domain power iteration for the entrywise power matrix
/// `A_s[a][b] = pi(a->b)^s`. Returns `(log2 rho, right, left)` where the
/// eigenvectors are log2-scaled with max component 0.
fn markov_spectral(rows: &[Vec<f64>], s: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let m = rows.len();
    let l: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|&p| s * p.log2()).collect())
        .collect();
    let iterate = |transpose: bool| -> Result<(f64, Vec<f64>)> {
        let mut v = vec![0.0f64; m]; // log2 of the all-ones start vector
        let mut rate = f64::NAN;
        for _ in 0..POWER_ITER_CAP {
            let mut next = vec![0.0f64; m];
            for a in 0..m {
                next[a] = log2_sum_exp2((0..m).map(|b| {
                    let lab = if transpose { l[b][a] } else { l[a][b] };
                    lab + v[b]
                }));
            }
            let deltas: Vec<f64> = (0..m).map(|a| next[a] - v[a]).collect();
            let dmax = deltas.iter().cloned().fold(f64::MIN, f64::max);
            let dmin = deltas.iter().cloned().fold(f64::MAX, f64::min);
            let shift = next.iter().cloned().fold(f64::MIN, f64::max);
            for x in next.iter_mut() {
                *x -= shift;
            }
            v = next;
            rate = 0.5 * (dmax + dmin);
            if dmax - dmin < POWER_ITER_TOL {
                return Ok((rate, v));
            }
        }
        Err(LabError::Numerical(format!(
            "power iteration did not converge after {POWER_ITER_CAP} iterations \
             (s = {s}, last rate = {rate})"
        )))
    };
    let (log2_rho, right) = iterate(false)?;
    let (_, left) = iterate(true)?;
    Ok((log2_rho, right, left))
}

/// `d/ds log2 rho(A_s) = (u^T A' v) / (rho u^T v) / ln 2` via the Perron pair.
fn markov_rho_log_derivative(
    rows: &[Vec<f64>],
    s: f64,
    log2_rho: f64,
    right: &[f64],
    left: &[f64],
) -> f64 {
    let m = rows.len();
    let mut shift = f64::MIN;
    for a in 0..m {
        for b in 0..m {
            shift = shift.max(left[a] + s * rows[a][b].log2() + right[b]);
        }
    }
    let mut num = 0.0; // u^T A' v, scaled by 2^-shift
    for a in 0..m {
        for b in 0..m {
            let lw = rows[a][b].ln();
            num += lw * (left[a] + s * rows[a][b].log2() + right[b] - shift).exp2();
        }
    }
    let mut dot = 0.0; // u^T v, scaled by 2^(log2_rho - shift)
    for a in 0..m {
        dot += (left[a] + right[a] + log2_rho - shift).exp2();
    }
    num / dot / LN2
}

mod parse;
pub use parse::parse_model_file;

#[cfg(test)]
mod tests;
