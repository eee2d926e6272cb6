//! Closed-form predictions for the sampled capacity: the tangent/threshold
//! parameters, the piecewise free energy with its phase transitions, the
//! piecewise singularity spectrum, a brute-force optimization oracle for the
//! spectrum's increasing part, and the homogeneous specializations.

use crate::model::{GibbsModel, Q_CAP};
use crate::numerics::{bisect, golden_min, nelder_mead};
use crate::{LabError, Result};
use serde::Serialize;

const ROOT_TOL: f64 = 1e-14;

/// Derived parameters for a `(model, eta)` pair, plus the residuals of the
/// built-in self-checks.
#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    pub eta: f64,
    pub dimension: f64,
    pub homogeneous: bool,
    pub h_min: f64,
    pub h_s: f64,
    pub h_max: f64,
    pub eta_ell: f64,
    pub eta_r: f64,
    /// `H_ell(eta_ell)`: left edge of the sampled spectrum's support.
    pub h_ell_at_eta_ell: f64,
    /// `H_r(eta_r)`: right edge of the survivor exponent range.
    pub h_r_at_eta_r: f64,
    pub eta_tilde: f64,
    pub q_eta_tilde: f64,
    /// `H_ell(eta_tilde)`.
    pub h_ell_tilde: f64,
    /// `H_tilde_ell(eta_tilde)`: the tail exponent added by sampling.
    pub h_tilde_ell_tilde: f64,
    /// `None` encodes `+inf` (exactly when `eta_ell > 0`).
    pub q_eta_ell: Option<f64>,
    /// `H_ell(0)` (only meaningful when `eta_ell = 0`).
    pub h_ell_zero: Option<f64>,
    /// `[H_ell(eta_ell), H_ell(~eta), H_ell(~eta)+Ht, H_max+Ht]`.
    pub breakpoints: [f64; 4],
    /// `|tau(q_eta_tilde) + d(1-eta)|`.
    pub residual_tau_at_q_eta_tilde: f64,
    /// Tangency `|D'(H_ell(~eta)) - (D(H_ell(~eta)) - d(1-eta)) / H_ell(~eta)|`.
    pub residual_tangency: f64,
    /// Disagreement of the two independent eta_tilde constructions.
    pub residual_eta_tilde_agreement: f64,
    /// Worst mismatch of the sampled free energy across its breakpoints.
    pub residual_tau_tilde_continuity: f64,
    /// Worst mismatch of the sampled spectrum across its breakpoints.
    pub residual_d_continuity: f64,
    /// Equality of the middle-piece slope written two ways:
    /// `|eta_tilde D(H_ell(~eta)) / H_ell(~eta) - q_eta_tilde|`.
    pub residual_middle_slope: f64,
    pub warnings: Vec<String>,
}

/// Closed-form machinery bound to one `(model, eta)` pair.
pub struct Theory<'a> {
    model: &'a GibbsModel,
    eta: f64,
    summary: TheorySummary,
}

impl<'a> Theory<'a> {
    pub fn new(model: &'a GibbsModel, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(LabError::invalid(format!("eta must lie in (0,1), got {eta}")));
        }
        let d = model.dim_f();
        let mut warnings = Vec::new();
        match model.homogeneity() {
            crate::model::Homogeneity::Exact => {
                let beta = model.effective_beta();
                let forms = homogeneous_forms(beta, model.dimension(), eta)?;
                let summary = TheorySummary {
                    eta,
                    dimension: d,
                    homogeneous: true,
                    h_min: beta,
                    h_s: beta,
                    h_max: beta,
                    eta_ell: eta,
                    eta_r: eta,
                    h_ell_at_eta_ell: beta,
                    h_r_at_eta_r: beta,
                    eta_tilde: eta,
                    q_eta_tilde: forms.q_eta_tilde,
                    h_ell_tilde: beta,
                    h_tilde_ell_tilde: beta * (1.0 / eta - 1.0),
                    q_eta_ell: None,
                    h_ell_zero: None,
                    breakpoints: [beta, beta, beta / eta, beta / eta],
                    residual_tau_at_q_eta_tilde: (forms.tau_sampled(forms.q_eta_tilde)).abs(),
                    residual_tangency: 0.0,
                    residual_eta_tilde_agreement: 0.0,
                    residual_tau_tilde_continuity: 0.0,
                    residual_d_continuity: 0.0,
                    residual_middle_slope: 0.0,
                    warnings,
                };
                return Ok(Theory { model, eta, summary });
            }
            crate::model::Homogeneity::Near => warnings.push(
                "model is nearly homogeneous (weight spread < 1e-6); spectrum \
                 breakpoints collide numerically"
                    .into(),
            ),
            crate::model::Homogeneity::No => {}
        }

        let (h_min, h_s, h_max) = model.endpoints()?;
        let d_h_min = model.tau_star(h_min)?;
        let d_h_max = model.tau_star(h_max)?;
        let target0 = d * (1.0 - eta);
        let eta_ell = if d_h_min <= target0 { 0.0 } else { 1.0 - target0 / d_h_min };
        let eta_r = if d_h_max <= target0 { 0.0 } else { 1.0 - target0 / d_h_max };

        // route (b): q_eta_tilde solves tau(q) = -d(1-eta) on q > 0
        let mut hi = 1.0;
        while model.tau_mu(hi)? < -target0 && hi < Q_CAP {
            hi *= 2.0;
        }
        let q_eta_tilde = bisect(
            |q| model.tau_mu(q).unwrap_or(f64::NAN) + target0,
            0.0,
            hi.min(Q_CAP),
            ROOT_TOL,
        )?;
        let h_ell_tilde = model.tau_mu_prime(q_eta_tilde)?;
        let d_at_tilde = q_eta_tilde * h_ell_tilde + target0;
        let eta_tilde = 1.0 - target0 / d_at_tilde;
        let h_tilde_ell_tilde = target0 / q_eta_tilde;

        // route (a): minimize (1/eta' - 1) H_ell(eta') by golden section
        let lo = (eta_ell + 1e-9).max(1e-6);
        let (eta_tilde_gs, _) = golden_min(
            |ep| match h_ell_of(model, eta, ep) {
                Ok(h) => (1.0 / ep - 1.0) * h,
                Err(_) => f64::INFINITY,
            },
            lo,
            eta,
            1e-10,
        );
        let residual_eta_tilde_agreement = (eta_tilde_gs - eta_tilde).abs();
        if residual_eta_tilde_agreement > 1e-5 {
            return Err(LabError::Inconsistency(format!(
                "eta_tilde constructions disagree: argmin {eta_tilde_gs} vs tangent \
                 {eta_tilde} (gap {residual_eta_tilde_agreement})"
            )));
        }

        let h_ell_at_eta_ell =
            if eta_ell > 0.0 { h_min } else { h_ell_of(model, eta, 0.0)? };
        let h_r_at_eta_r = if eta_r > 0.0 { h_max } else { h_r_of(model, eta, 0.0)? };
        let h_ell_zero = if eta_ell == 0.0 { Some(h_ell_at_eta_ell) } else { None };

        // q_eta_ell: finite iff eta_ell = 0; the q > q_eta_tilde where the
        // dual value g(q) = q tau'(q) - tau(q) falls to d(1-eta)
        let q_eta_ell = if eta_ell > 0.0 {
            None
        } else {
            let g = |q: f64| {
                let tp = model.tau_mu_prime(q).unwrap_or(f64::NAN);
                let t = model.tau_mu(q).unwrap_or(f64::NAN);
                q * tp - t - target0
            };
            Some(if g(Q_CAP) >= 0.0 {
                Q_CAP
            } else {
                bisect(g, q_eta_tilde, Q_CAP, ROOT_TOL)?
            })
        };

        let residual_tau_at_q_eta_tilde = (model.tau_mu(q_eta_tilde)? + target0).abs();
        let residual_tangency = {
            let d_prime = model.solve_slope(h_ell_tilde)?;
            (d_prime - (d_at_tilde - target0) / h_ell_tilde).abs()
        };
        let residual_middle_slope =
            (eta_tilde * d_at_tilde / h_ell_tilde - q_eta_tilde).abs();

        let breakpoints = [
            h_ell_at_eta_ell,
            h_ell_tilde,
            h_ell_tilde + h_tilde_ell_tilde,
            h_max + h_tilde_ell_tilde,
        ];

        let mut summary = TheorySummary {
            eta,
            dimension: d,
            homogeneous: false,
            h_min,
            h_s,
            h_max,
            eta_ell,
            eta_r,
            h_ell_at_eta_ell,
            h_r_at_eta_r,
            eta_tilde,
            q_eta_tilde,
            h_ell_tilde,
            h_tilde_ell_tilde,
            q_eta_ell,
            h_ell_zero,
            breakpoints,
            residual_tau_at_q_eta_tilde,
            residual_tangency,
            residual_eta_tilde_agreement,
            residual_tau_tilde_continuity: 0.0,
            residual_d_continuity: 0.0,
            residual_middle_slope,
            warnings,
        };

        let theory = Theory { model, eta, summary: summary.clone() };
        let mut cont = (theory.tau_tilde_piece(q_eta_tilde, Piece::Low)?
            - theory.tau_tilde_piece(q_eta_tilde, Piece::Mid)?)
        .abs();
        if let Some(qe) = q_eta_ell {
            cont = cont.max(
                (theory.tau_tilde_piece(qe, Piece::Mid)?
                    - theory.tau_tilde_piece(qe, Piece::High)?)
                .abs(),
            );
        }
        summary.residual_tau_tilde_continuity = cont;

        let d1 = (model.tau_star(breakpoints[1])? - target0 - q_eta_tilde * breakpoints[1])
            .abs();
        let d2 = (q_eta_tilde * breakpoints[2]
            - model.tau_star(breakpoints[2] - h_tilde_ell_tilde)?)
        .abs();
        summary.residual_d_continuity = d1.max(d2);

        Ok(Theory { model, eta, summary })
    }

    pub fn summary(&self) -> &TheorySummary {
        &self.summary
    }

    pub fn model(&self) -> &GibbsModel {
        self.model
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The unsampled singularity spectrum `D_mu = tau_mu*`.
    pub fn d_mu(&self, h: f64) -> Result<f64> {
        self.model.tau_star(h)
    }

    /// `H_ell(eta')`: unique `H` on the increasing branch with
    /// `D_mu(H) = d(1-eta)/(1-eta')`.
    pub fn h_ell(&self, eta_prime: f64) -> Result<f64> {
        if eta_prime < self.summary.eta_ell - 1e-12 || eta_prime > self.eta + 1e-12 {
            return Err(LabError::invalid(format!(
                "eta_prime {eta_prime} outside [eta_ell, eta] = [{}, {}]",
                self.summary.eta_ell, self.eta
            )));
        }
        h_ell_of(self.model, self.eta, eta_prime)
    }

    /// `H_r(eta')`: decreasing-branch counterpart on `[H_s, H_max]`.
    pub fn h_r(&self, eta_prime: f64) -> Result<f64> {
        if eta_prime < self.summary.eta_r - 1e-12 || eta_prime > self.eta + 1e-12 {
            return Err(LabError::invalid(format!(
                "eta_prime {eta_prime} outside [eta_r, eta] = [{}, {}]",
                self.summary.eta_r, self.eta
            )));
        }
        h_r_of(self.model, self.eta, eta_prime)
    }

    /// `H_tilde_ell(eta') = (1/eta' - 1) H_ell(eta')`.
    pub fn h_tilde_ell(&self, eta_prime: f64) -> Result<f64> {
        if eta_prime == 0.0 {
            return Err(LabError::invalid("H_tilde_ell is undefined at eta' = 0"));
        }
        Ok((1.0 / eta_prime - 1.0) * self.h_ell(eta_prime)?)
    }

    pub fn h_tilde_r(&self, eta_prime: f64) -> Result<f64> {
        if eta_prime == 0.0 {
            return Err(LabError::invalid("H_tilde_r is undefined at eta' = 0"));
        }
        Ok((1.0 / eta_prime - 1.0) * self.h_r(eta_prime)?)
    }

    /// Predicted free energy of the sampled capacity (three pieces, first-order
    /// transition at `q_eta_tilde`, second-order one at `q_eta_ell`).
    pub fn tau_tilde(&self, q: f64) -> Result<f64> {
        if self.summary.homogeneous {
            let forms =
                homogeneous_forms(self.model.effective_beta(), self.model.dimension(), self.eta)?;
            return Ok(forms.tau_sampled(q));
        }
        let s = &self.summary;
        if q <= s.q_eta_tilde {
            self.tau_tilde_piece(q, Piece::Low)
        } else {
            match s.q_eta_ell {
                Some(qe) if q >= qe => self.tau_tilde_piece(q, Piece::High),
                _ => self.tau_tilde_piece(q, Piece::Mid),
            }
        }
    }

    fn tau_tilde_piece(&self, q: f64, piece: Piece) -> Result<f64> {
        let s = &self.summary;
        let target0 = s.dimension * (1.0 - s.eta);
        Ok(match piece {
            Piece::Low => self.model.tau_mu(q)? + s.h_tilde_ell_tilde * q,
            Piece::Mid => self.model.tau_mu(q)? + target0,
            Piece::High => {
                s.h_ell_zero.ok_or_else(|| {
                    LabError::Inconsistency("high piece needs eta_ell = 0".into())
                })? * q
            }
        })
    }

    /// Predicted singularity spectrum of the sampled capacity (also the
    /// predicted dimension of the upper-level sets on its third piece).
    pub fn d_sampled(&self, h: f64) -> Result<f64> {
        if self.summary.homogeneous {
            let forms =
                homogeneous_forms(self.model.effective_beta(), self.model.dimension(), self.eta)?;
            return Ok(forms.d_sampled(h));
        }
        let s = &self.summary;
        let [b0, b1, b2, b3] = s.breakpoints;
        let target0 = s.dimension * (1.0 - s.eta);
        if h < b0 - 1e-12 || h > b3 + 1e-12 {
            return Ok(f64::NEG_INFINITY);
        }
        if h <= b1 {
            Ok(self.model.tau_star(h.clamp(b0, b1))? - target0)
        } else if h <= b2 {
            Ok(s.q_eta_tilde * h)
        } else {
            self.model.tau_star((h - s.h_tilde_ell_tilde).clamp(s.h_min, s.h_max))
        }
    }

    /// Brute-force optimization oracle for the spectrum's increasing part:
    /// maximizes `D_mu(alpha)/delta` over the admissible
    /// `(alpha, eta', delta)` triplets of both branches. A coarse 3-D grid is
    /// refined by Nelder-Mead from the best grid points. Returns `-inf` on an
    /// empty feasible set.
    pub fn d_bruteforce(&self, h: f64, grid_n: usize) -> Result<f64> {
        if h < 0.0 {
            return Err(LabError::invalid("H must be nonnegative"));
        }
        let (best, _) = self.d_bruteforce_argmax(h, grid_n)?;
        Ok(best)
    }

    /// As [`Theory::d_bruteforce`], also returning the best triplet.
    pub fn d_bruteforce_argmax(&self, h: f64, grid_n: usize) -> Result<(f64, [f64; 3])> {
        let s = &self.summary;
        let n = grid_n.max(8);
        let mut best = f64::NEG_INFINITY;
        let mut best_arg = [f64::NAN; 3];
        let mut top: Vec<(f64, [f64; 3])> = Vec::new();

        for branch in [Branch::Ell, Branch::R] {
            let eta_lo = match branch {
                Branch::Ell => s.eta_ell,
                Branch::R => s.eta_r,
            }
            .max(1e-4);
            if eta_lo >= self.eta {
                continue;
            }
            // cache D(alpha) and H_i(eta') rows
            let alphas: Vec<f64> = (0..n)
                .map(|i| s.h_min + (s.h_max - s.h_min) * i as f64 / (n - 1) as f64)
                .collect();
            let d_alpha: Vec<f64> = alphas
                .iter()
                .map(|&a| self.model.tau_star(a))
                .collect::<Result<_>>()?;
            for k in 0..n {
                let ep = eta_lo + (self.eta - eta_lo) * k as f64 / (n - 1) as f64;
                let hi_val = match branch {
                    Branch::Ell => h_ell_of(self.model, self.eta, ep)?,
                    Branch::R => h_r_of(self.model, self.eta, ep)?,
                };
                let ht = (1.0 / ep - 1.0) * hi_val;
                for (ai, &alpha) in alphas.iter().enumerate() {
                    if d_alpha[ai] == f64::NEG_INFINITY {
                        continue;
                    }
                    for m in 0..n {
                        let delta = 1.0 + (1.0 / ep - 1.0) * m as f64 / (n - 1) as f64;
                        if (alpha + ht) / delta > h {
                            continue;
                        }
                        let val = d_alpha[ai] / delta;
                        if val > best {
                            best = val;
                            best_arg = [alpha, ep, delta];
                        }
                        top.push((val, [alpha, ep, delta]));
                        if top.len() > 64 {
                            top.sort_by(|a, b| b.0.total_cmp(&a.0));
                            top.truncate(8);
                        }
                    }
                }
            }
        }
        if best == f64::NEG_INFINITY {
            return Ok((best, best_arg));
        }
        top.sort_by(|a, b| b.0.total_cmp(&a.0));
        top.truncate(5);

        // Nelder-Mead refinement of -D(alpha)/delta with infeasible -> +inf
        let objective = |p: &[f64]| -> f64 {
            let (alpha, ep, delta) = (p[0], p[1], p[2]);
            if alpha < s.h_min || alpha > s.h_max || ep <= 1e-5 || ep > self.eta {
                return f64::INFINITY;
            }
            if delta < 1.0 || delta > 1.0 / ep {
                return f64::INFINITY;
            }
            for branch in [Branch::Ell, Branch::R] {
                let lo = match branch {
                    Branch::Ell => s.eta_ell,
                    Branch::R => s.eta_r,
                };
                if ep < lo {
                    continue;
                }
                let hv = match branch {
                    Branch::Ell => h_ell_of(self.model, self.eta, ep),
                    Branch::R => h_r_of(self.model, self.eta, ep),
                };
                let Ok(hv) = hv else { continue };
                let ht = (1.0 / ep - 1.0) * hv;
                if (alpha + ht) / delta <= h {
                    let da = self.model.tau_star(alpha).unwrap_or(f64::NEG_INFINITY);
                    if da > f64::NEG_INFINITY {
                        return -(da / delta);
                    }
                }
            }
            f64::INFINITY
        };
        let scale = [
            (s.h_max - s.h_min) / n as f64,
            (self.eta - 1e-4) / n as f64,
            0.5 / n as f64,
        ];
        for (_, start) in &top {
            let (arg, val) = nelder_mead(&objective, start, &scale, 400, 1e-13);
            if -val > best {
                best = -val;
                best_arg = [arg[0], arg[1], arg[2]];
            }
        }
        Ok((best, best_arg))
    }
}

enum Piece {
    Low,
    Mid,
    High,
}

#[derive(Clone, Copy)]
enum Branch {
    Ell,
    R,
}

/// Increasing-branch solve of `D_mu(H) = d(1-eta)/(1-eta')` via the dual
/// variable (`g(q) = q tau'(q) - tau(q)` decreases from `d` to `D(H_min)`).
fn h_ell_of(model: &GibbsModel, eta: f64, eta_prime: f64) -> Result<f64> {
    let target = model.dim_f() * (1.0 - eta) / (1.0 - eta_prime);
    let g = |q: f64| {
        let tp = model.tau_mu_prime(q).unwrap_or(f64::NAN);
        let t = model.tau_mu(q).unwrap_or(f64::NAN);
        q * tp - t - target
    };
    if g(Q_CAP) >= 0.0 {
        return model.tau_mu_prime(Q_CAP);
    }
    let q = bisect(g, 0.0, Q_CAP, ROOT_TOL)?;
    model.tau_mu_prime(q)
}

/// Decreasing-branch counterpart on `q <= 0`.
fn h_r_of(model: &GibbsModel, eta: f64, eta_prime: f64) -> Result<f64> {
    let target = model.dim_f() * (1.0 - eta) / (1.0 - eta_prime);
    let g = |q: f64| {
        let tp = model.tau_mu_prime(q).unwrap_or(f64::NAN);
        let t = model.tau_mu(q).unwrap_or(f64::NAN);
        q * tp - t - target
    };
    if g(-Q_CAP) >= 0.0 {
        return model.tau_mu_prime(-Q_CAP);
    }
    let q = bisect(g, -Q_CAP, 0.0, ROOT_TOL)?;
    model.tau_mu_prime(q)
}

/// Closed forms for a homogeneous capacity with per-level exponent `beta`.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousForms {
    pub beta: f64,
    pub dimension: f64,
    pub eta: f64,
    /// The transition `q_eta_tilde = d eta / beta`.
    pub q_eta_tilde: f64,
}

/// `tau(q) = beta q - d` gives `q_eta_tilde = d eta / beta`, a two-piece
/// sampled free energy and a linear sampled spectrum on `[beta, beta/eta]`.
pub fn homogeneous_forms(beta: f64, dimension: u8, eta: f64) -> Result<HomogeneousForms> {
    if !(beta > 0.0) {
        return Err(LabError::invalid("beta must be positive"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(LabError::invalid("eta must lie in (0,1)"));
    }
    let d = dimension as f64;
    Ok(HomogeneousForms { beta, dimension: d, eta, q_eta_tilde: d * eta / beta })
}

impl HomogeneousForms {
    /// Sampled free energy: `q beta / eta - d` up to the transition,
    /// `q beta - d(1-eta)` beyond it.
    pub fn tau_sampled(&self, q: f64) -> f64 {
        if q <= self.q_eta_tilde {
            q * self.beta / self.eta - self.dimension
        } else {
            q * self.beta - self.dimension * (1.0 - self.eta)
        }
    }

    /// Sampled spectrum: `(d eta / beta) H` on `[beta, beta/eta]`, else `-inf`.
    pub fn d_sampled(&self, h: f64) -> f64 {
        if h >= self.beta - 1e-12 && h <= self.beta / self.eta + 1e-12 {
            self.dimension * self.eta / self.beta * h
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests;
