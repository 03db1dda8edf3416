//! Normal approximations of the maximal rate and the Berry–Esseen constants
//! behind them. The `O(log n / n)` and `O(1/n)` remainders are never added;
//! callers get the leading-order rate plus [`berry_esseen_radius`] to judge it.

use std::f64::consts::{LN_2, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

use crate::capacity::{check_epsilon, CapacityDispersion};
use crate::channel::{mutual_information, Dist, Dmc};
use crate::density::info_density_pmf;
use crate::error::{Error, Result};
use crate::learning::{max_blocklength, TrainingBudget};

/// Gaussian tail `Q(t) = P[N(0,1) ≥ t]`.
pub fn gaussian_q(t: f64) -> f64 {
    0.5 * erfc(t / SQRT_2)
}

/// Inverse of [`gaussian_q`] on `(0, 1)`.
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // evaluate on the lower tail and mirror, so Q^-1(1-p) = -Q^-1(p) exactly
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut t = SQRT_2 * erfc_inv(2.0 * tail);
    // Newton polish against our own Q
    for _ in 0..2 {
        let density = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        t += (gaussian_q(t) - tail) / density;
    }
    Ok(sign * t)
}

/// Mean, variance and third absolute central moment of a real variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryEsseenMoments {
    pub mean: f64,
    pub variance: f64,
    pub third_abs_central: f64,
}

/// Moments of `log2 U` for `U ~ Unif(0, 1)`.
///
/// `−ln U` is `Exp(1)`, whose centered third absolute moment is
/// `12/e − 2`; scaling by `1/ln 2` gives the base-2 constants.
pub fn log_u_moments() -> BerryEsseenMoments {
    let scale = 1.0 / LN_2;
    BerryEsseenMoments {
        mean: -scale,
        variance: scale * scale,
        third_abs_central: scale.powi(3) * (12.0 / std::f64::consts::E - 2.0),
    }
}

/// Moments of the per-letter information density under `px ∘ W`.
///
/// The variance is the unconditional `Var[i(X, Y)]`; at a capacity-achieving
/// input it coincides with the conditional dispersion.
pub fn info_density_moments(w: &Dmc, px: &Dist) -> Result<BerryEsseenMoments> {
    let pmf = info_density_pmf(w, px)?;
    let mean = mutual_information(px, w)?;
    let (mut variance, mut third) = (0.0, 0.0);
    for a in pmf.atoms() {
        let d = a.value - mean;
        variance += a.p_mass * d * d;
        third += a.p_mass * d.abs().powi(3);
    }
    Ok(BerryEsseenMoments {
        mean,
        variance,
        third_abs_central: third,
    })
}

/// `B(n)/√n` with `B(n) = 6 (T + t̃/n) / (V + ṽ/n)^{3/2}`, where `(V, T)` are
/// the channel moments and `(ṽ, t̃)` those of `log2 U`.
pub fn berry_esseen_radius(channel: &BerryEsseenMoments, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be >= 1".into()));
    }
    let u = log_u_moments();
    let nf = n as f64;
    let var = channel.variance + u.variance / nf;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let b = 6.0 * (channel.third_abs_central + u.third_abs_central / nf) / var.powf(1.5);
    Ok(b / nf.sqrt())
}

/// Leading-order rate and its validity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalApproxResult {
    pub rate: f64,
    pub capacity_term: f64,
    pub dispersion_term: f64,
    /// Blocklength condition against the training budget; `true` when the
    /// channel is known.
    pub condition_ok: bool,
    /// `1/ε²`, the scale below which the expansion is not trusted.
    pub min_n_hint: f64,
}

impl NormalApproxResult {
    /// The blocklength is below the `1/ε²` scale.
    pub fn small_n_warning(&self, n: usize) -> bool {
        (n as f64) < self.min_n_hint
    }
}

fn blocklength_condition(len: usize, training: Option<TrainingBudget>, card: usize) -> Result<bool> {
    match training {
        None => Ok(true),
        Some(t) => Ok(len as u64 <= max_blocklength(t.m, card, t.delta)?),
    }
}

/// `C − sqrt(V^ε / n) Q^{-1}(ε)`.
///
/// `alphabet_product` is `|X||Y|` of the empirical channel; it is only used
/// for the blocklength condition when `training` is given.
pub fn normal_approx_rate(
    cd: &CapacityDispersion,
    n: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
    alphabet_product: usize,
) -> Result<NormalApproxResult> {
    normal_approx_rate_partial(cd, n, n, epsilon, training, alphabet_product)
}

/// Rate of the concatenated scheme using sub-blocks of length `n0`:
/// `n0 C / n − sqrt(n0 V^ε / n²) Q^{-1}(ε)`.
pub fn normal_approx_rate_partial(
    cd: &CapacityDispersion,
    n: usize,
    n0: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
    alphabet_product: usize,
) -> Result<NormalApproxResult> {
    check_epsilon(epsilon)?;
    if n0 == 0 || n0 > n {
        return Err(Error::InvalidN0 { n0, n });
    }
    let v = cd.dispersion_for(epsilon)?;
    let (nf, n0f) = (n as f64, n0 as f64);
    let capacity_term = n0f * cd.capacity / nf;
    let dispersion_term = (n0f * v).sqrt() / nf * gaussian_q_inv(epsilon)?;
    Ok(NormalApproxResult {
        rate: capacity_term - dispersion_term,
        capacity_term,
        dispersion_term,
        condition_ok: blocklength_condition(n0, training, alphabet_product)?,
        min_n_hint: 1.0 / (epsilon * epsilon),
    })
}
