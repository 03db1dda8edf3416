//! Metaconverse bound for codes built from an estimated channel.
//!
//! For a product auxiliary output distribution the hypothesis test against a
//! fixed input string depends only on the string's composition, so the
//! supremum over inputs reduces to a search over compositions.

use rayon::prelude::*;

use crate::capacity::{blahut_arimoto, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use crate::channel::{Dist, Dmc};
use crate::density::{convolve, np_log2_beta, row_llr_pmf, self_convolve, SparsePmf, DEFAULT_ATOM_CAP};
use crate::error::{Error, Result};
use crate::learning::{tv_penalty, PenaltyParams, TrainingBudget};

const MAX_CLIMB_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseResult {
    /// Upper bound on `log2 M`; `+∞` when vacuous.
    pub log2_m_upper: f64,
    pub alpha_used: f64,
    pub kappa: f64,
    /// Per-input counts summing to `n`; empty when vacuous.
    pub best_composition: Vec<usize>,
    /// `β` of the best composition; zero once it underflows.
    pub beta: f64,
    pub log2_beta: f64,
    pub vacuous: bool,
    /// The composition came from a local search.
    pub heuristic: bool,
}

impl ConverseResult {
    /// Upper bound on the rate in bits per channel use.
    pub fn rate(&self, n: usize) -> f64 {
        self.log2_m_upper / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSearch {
    pub composition: Vec<usize>,
    pub beta: f64,
    pub log2_beta: f64,
    pub heuristic: bool,
}

/// Inputs grouped by their log-likelihood pmf against `qy`.
struct Classes {
    pmfs: Vec<SparsePmf>,
    /// Highest input index of each class.
    reps: Vec<usize>,
    /// Class of each input.
    class_of: Vec<usize>,
}

fn llr_classes(w: &Dmc, qy: &Dist) -> Result<Classes> {
    let mut c = Classes {
        pmfs: Vec::new(),
        reps: Vec::new(),
        class_of: Vec::new(),
    };
    for x in 0..w.num_inputs() {
        let pmf = row_llr_pmf(w, x, qy)?;
        match c.pmfs.iter().position(|p| same_pmf(p, &pmf)) {
            Some(i) => {
                c.reps[i] = x;
                c.class_of.push(i);
            }
            None => {
                c.class_of.push(c.pmfs.len());
                c.pmfs.push(pmf);
                c.reps.push(x);
            }
        }
    }
    Ok(c)
}

fn same_pmf(a: &SparsePmf, b: &SparsePmf) -> bool {
    a.len() == b.len()
        && a.atoms().iter().zip(b.atoms()).all(|(u, v)| {
            (u.value - v.value).abs() <= 1e-12 * (1.0 + u.value.abs())
                && (u.p_mass - v.p_mass).abs() <= 1e-15
                && (u.q_mass - v.q_mass).abs() <= 1e-15
        })
}

/// Distribution of the log-likelihood sum for an input string with the given
/// per-class counts.
fn composition_pmf(classes: &[SparsePmf], counts: &[usize]) -> Result<SparsePmf> {
    let mut acc: Option<SparsePmf> = None;
    for (pmf, &k) in classes.iter().zip(counts) {
        if k == 0 {
            continue;
        }
        let part = self_convolve(pmf, k)?;
        acc = Some(match acc {
            None => part,
            Some(a) => convolve(&a, &part, DEFAULT_ATOM_CAP)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidParameter("empty composition".into()))
}

fn class_log2_beta(classes: &[SparsePmf], counts: &[usize], alpha: f64) -> Result<f64> {
    np_log2_beta(&composition_pmf(classes, counts)?, alpha)
}

/// `β_α` for a point-mass input with composition `counts` (indexed by input).
pub fn composition_beta(w: &Dmc, qy: &Dist, counts: &[usize], alpha: f64) -> Result<f64> {
    if counts.len() != w.num_inputs() {
        return Err(Error::DimensionMismatch {
            expected: w.num_inputs(),
            found: counts.len(),
        });
    }
    let pmfs = (0..w.num_inputs())
        .map(|x| row_llr_pmf(w, x, qy))
        .collect::<Result<Vec<_>>>()?;
    Ok(class_log2_beta(&pmfs, counts, alpha)?.exp2())
}

fn expand(reps: &[usize], num_inputs: usize, class_counts: &[usize]) -> Vec<usize> {
    let mut out = vec![0; num_inputs];
    for (&x, &k) in reps.iter().zip(class_counts) {
        out[x] = k;
    }
    out
}

/// Composition minimizing `β_α`, exhaustively when at most two inputs are
/// distinguishable and by ±1 hill climbing from the capacity-achieving
/// composition otherwise.
pub fn composition_search(w: &Dmc, qy: &Dist, n: usize, alpha: f64) -> Result<CompositionSearch> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be >= 1".into()));
    }
    let c = llr_classes(w, qy)?;
    let (classes, reps) = (&c.pmfs, &c.reps);
    let nx = w.num_inputs();
    match classes.len() {
        1 => Ok(found(expand(reps, nx, &[n]), class_log2_beta(classes, &[n], alpha)?, false)),
        2 => {
            let betas = (0..=n)
                .into_par_iter()
                .map(|k| class_log2_beta(classes, &[k, n - k], alpha))
                .collect::<Result<Vec<f64>>>()?;
            let floor = betas.iter().copied().fold(f64::INFINITY, f64::min);
            // equal up to rounding counts as a tie
            let (composition, log2_beta) = betas
                .iter()
                .enumerate()
                .filter(|(_, &b)| b <= floor + TIE_LOG2)
                .map(|(k, &b)| (expand(reps, nx, &[k, n - k]), b))
                .min_by(|a, b| a.0.cmp(&b.0))
                .expect("n + 1 candidates");
            Ok(found(composition, log2_beta, false))
        }
        _ => hill_climb(w, &c, n, alpha),
    }
}

/// `log2(1 + 1e-12)`: relative tie tolerance on `β`.
const TIE_LOG2: f64 = 1e-12 * std::f64::consts::LOG2_E;

fn found(composition: Vec<usize>, log2_beta: f64, heuristic: bool) -> CompositionSearch {
    CompositionSearch {
        composition,
        beta: log2_beta.exp2(),
        log2_beta,
        heuristic,
    }
}

fn hill_climb(w: &Dmc, c: &Classes, n: usize, alpha: f64) -> Result<CompositionSearch> {
    let classes = &c.pmfs;
    let k = classes.len();
    let start_dist = blahut_arimoto(w, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)
        .map(|e| e.caid_witness)
        .unwrap_or_else(|_| Dist::uniform(w.num_inputs()));
    let mut weights = vec![0.0; k];
    for (x, &class) in c.class_of.iter().enumerate() {
        weights[class] += start_dist[x];
    }
    let mut counts = round_to_counts(&weights, n);
    let mut beta = class_log2_beta(classes, &counts, alpha)?;
    for _ in 0..MAX_CLIMB_STEPS {
        let moves: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && counts[i] > 0)
            .collect();
        let scored = moves
            .par_iter()
            .map(|&(i, j)| {
                let mut c = counts.clone();
                c[i] -= 1;
                c[j] += 1;
                class_log2_beta(classes, &c, alpha).map(|b| (b, c))
            })
            .collect::<Result<Vec<_>>>()?;
        let best = scored
            .into_iter()
            .filter(|(b, _)| *b < beta - TIE_LOG2)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        match best {
            Some((b, c)) => {
                beta = b;
                counts = c;
            }
            None => break,
        }
    }
    Ok(found(expand(&c.reps, w.num_inputs(), &counts), beta, true))
}

/// Largest-remainder rounding of `n · weights` to integer counts.
fn round_to_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
    let mut missing = n - counts.iter().sum::<usize>();
    for i in order.into_iter().cycle() {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

/// `log2` of the metaconverse bound with `α = max{0, 1 − ε − κ}` and
/// `κ` the learning penalty at `n0 = n` (zero without a training budget).
pub fn converse_bound(
    w_hat: &Dmc,
    n: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
    qy: &Dist,
) -> Result<ConverseResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be >= 1".into()));
    }
    let kappa = match training {
        None => 0.0,
        Some(t) => tv_penalty(&PenaltyParams::new(t.m, w_hat.alphabet_product(), t.delta, n)?),
    };
    let alpha = (1.0 - epsilon - kappa).max(0.0);
    if alpha <= 0.0 {
        // still reject a bad auxiliary distribution
        for x in 0..w_hat.num_inputs() {
            row_llr_pmf(w_hat, x, qy)?;
        }
        return Ok(ConverseResult {
            log2_m_upper: f64::INFINITY,
            alpha_used: 0.0,
            kappa,
            best_composition: Vec::new(),
            beta: 0.0,
            log2_beta: f64::NEG_INFINITY,
            vacuous: true,
            heuristic: false,
        });
    }
    let s = composition_search(w_hat, qy, n, alpha)?;
    Ok(ConverseResult {
        log2_m_upper: -s.log2_beta,
        alpha_used: alpha,
        kappa,
        best_composition: s.composition,
        beta: s.beta,
        log2_beta: s.log2_beta,
        vacuous: false,
        heuristic: s.heuristic,
    })
}
