//! Random-coding-union bound for codes built from an estimated channel, and
//! the largest rate it certifies.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{Dist, Dmc};
use crate::density::{convolve, info_density_pmf, self_convolve_capped, SparsePmf, DEFAULT_ATOM_CAP};
use crate::error::{Error, Result};
use crate::learning::{tv_penalty, PenaltyParams, TrainingBudget};
use crate::rng::{derive_seed, stream, stream_rng, unit_f64};

/// Sub-blocklengths scanned exhaustively up to this `n`.
pub const FULL_SCAN_LIMIT: usize = 512;
/// Size of the geometric `n0` grid beyond [`FULL_SCAN_LIMIT`].
pub const GRID_POINTS: usize = 64;
pub const RATE_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Code and reliability parameters.
///
/// Without a training budget the channel is treated as known and the
/// learning penalty is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub n: usize,
    /// Bits per channel use.
    pub rate: f64,
    pub epsilon: f64,
    pub training: Option<TrainingBudget>,
    /// Forces a single sub-blocklength instead of scanning.
    pub n0: Option<usize>,
}

impl BoundParams {
    pub fn new(n: usize, rate: f64, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("blocklength must be >= 1".into()));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate must be finite and >= 0, got {rate}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(BoundParams {
            n,
            rate,
            epsilon,
            training: None,
            n0: None,
        })
    }

    pub fn with_training(mut self, training: TrainingBudget) -> Self {
        self.training = Some(training);
        self
    }

    pub fn with_n0(mut self, n0: usize) -> Result<Self> {
        check_n0(n0, self.n)?;
        self.n0 = Some(n0);
        Ok(self)
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }
}

fn check_n0(n0: usize, n: usize) -> Result<()> {
    if n0 == 0 || n0 > n {
        Err(Error::InvalidN0 { n0, n })
    } else {
        Ok(())
    }
}

/// How the first term was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Evaluation knobs for the first term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcuOptions {
    pub atom_cap: usize,
    /// Monte Carlo sample count used once the atom cap is exceeded.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for RcuOptions {
    fn default() -> Self {
        RcuOptions {
            atom_cap: DEFAULT_ATOM_CAP,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcuTerm {
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AchievabilityResult {
    /// Clamped to `[0, 1]`.
    pub error_upper_bound: f64,
    pub best_n0: usize,
    pub first_term: f64,
    pub penalty_term: f64,
    /// `first_term + penalty_term` before clamping.
    pub raw_sum: f64,
    pub method: Method,
    pub mc_std_error: Option<f64>,
}

/// `log2 L + log2(M0^L − 1)` with `L = ⌊n/n0⌋` and `M0 = ⌈2^{nR/L}⌉`.
///
/// Returns `−∞` when `M0 = 1`. Once `M0^L` exceeds `2^53` the `−1` is
/// dropped, which can only enlarge the bound.
pub fn log2_multiplier(n: usize, rate: f64, n0: usize) -> f64 {
    let l = (n / n0) as f64;
    let mut exponent = n as f64 * rate / l;
    if (exponent - exponent.round()).abs() < 1e-12 {
        exponent = exponent.round();
    }
    if exponent <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let log2_m0 = if exponent < 52.0 {
        exponent.exp2().ceil().log2()
    } else {
        exponent
    };
    let total = l * log2_m0;
    let log2_rest = if total <= 53.0 {
        let m0 = log2_m0.exp2().round() as u64;
        let power = m0.pow(l as u32);
        if power <= 1 {
            return f64::NEG_INFINITY;
        }
        ((power - 1) as f64).log2()
    } else {
        total
    };
    l.log2() + log2_rest
}

/// `E[min{1, 2^{log_a − S}}]` over a value-sorted distribution in
/// `O(log N)` per query.
#[derive(Debug, Clone)]
struct RcuTable {
    values: Vec<f64>,
    /// `below[k]`: mass of the `k` smallest values.
    below: Vec<f64>,
    /// `tail[k] = Σ_{i ≥ k} p_i 2^{values[k] − values[i]}`, at most the tail mass.
    tail: Vec<f64>,
}

impl RcuTable {
    fn new(values: Vec<f64>, mass: &[f64]) -> Self {
        let n = values.len();
        let mut below = Vec::with_capacity(n + 1);
        below.push(0.0);
        for &p in mass {
            below.push(below.last().copied().unwrap_or(0.0) + p);
        }
        let mut tail = vec![0.0; n];
        for k in (0..n).rev() {
            tail[k] = mass[k] + if k + 1 < n { tail[k + 1] * (values[k] - values[k + 1]).exp2() } else { 0.0 };
        }
        RcuTable { values, below, tail }
    }

    fn eval(&self, log_a: f64) -> f64 {
        if log_a == f64::NEG_INFINITY {
            return 0.0;
        }
        let k = self.values.partition_point(|&v| v <= log_a);
        let mut total = self.below[k];
        if k < self.values.len() {
            total += self.tail[k] * (log_a - self.values[k]).exp2();
        }
        total.clamp(0.0, 1.0)
    }
}

/// Distribution of `i(X^{n0}; Y^{n0})`, exact or sampled.
#[derive(Debug, Clone)]
enum DensitySum {
    Exact(RcuTable),
    Samples { table: RcuTable, sums: Vec<f64> },
}

impl DensitySum {
    fn exact(pmf: &SparsePmf) -> Self {
        let values = pmf.atoms().iter().map(|a| a.value).collect();
        let mass: Vec<f64> = pmf.atoms().iter().map(|a| a.p_mass).collect();
        DensitySum::Exact(RcuTable::new(values, &mass))
    }

    fn sampled(mut sums: Vec<f64>) -> Self {
        sums.sort_by(f64::total_cmp);
        let mass = vec![1.0 / sums.len() as f64; sums.len()];
        DensitySum::Samples {
            table: RcuTable::new(sums.clone(), &mass),
            sums,
        }
    }

    fn value(&self, log_a: f64) -> f64 {
        match self {
            DensitySum::Exact(t) | DensitySum::Samples { table: t, .. } => t.eval(log_a),
        }
    }

    fn term(&self, log_a: f64) -> RcuTerm {
        let value = self.value(log_a);
        match self {
            DensitySum::Exact(_) => RcuTerm {
                value,
                method: Method::Exact,
                std_error: None,
            },
            DensitySum::Samples { sums, .. } => {
                let k = sums.len() as f64;
                let std_error = if log_a == f64::NEG_INFINITY {
                    0.0
                } else {
                    let f = |v: f64| (log_a - v).min(0.0).exp2();
                    let var = sums.iter().map(|&v| (f(v) - value).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
                    (var / k).sqrt()
                };
                RcuTerm {
                    value,
                    method: Method::MonteCarlo,
                    std_error: Some(std_error),
                }
            }
        }
    }
}

/// Running Monte Carlo sums; sample `k` is the sum of the first `n0` letters
/// of its own stream, so every `n0` sees a prefix of the same draws.
struct SampleWalk {
    cdf: Vec<f64>,
    values: Vec<f64>,
    letters: usize,
    states: Vec<(ChaCha8Rng, f64)>,
}

impl SampleWalk {
    fn new(letter: &SparsePmf, opts: &RcuOptions) -> Self {
        let mut cdf: Vec<f64> = letter
            .atoms()
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.p_mass;
                Some(*acc)
            })
            .collect();
        let total = *cdf.last().unwrap_or(&1.0);
        cdf.iter_mut().for_each(|c| *c /= total);
        let states = (0..opts.mc_samples.max(1))
            .map(|k| (stream_rng(derive_seed(opts.seed, stream::RCU_SAMPLES, k as u64), stream::RCU_SAMPLES), 0.0))
            .collect();
        SampleWalk {
            cdf,
            values: letter.atoms().iter().map(|a| a.value).collect(),
            letters: 0,
            states,
        }
    }

    fn advance_to(&mut self, n0: usize) -> DensitySum {
        let steps = n0 - self.letters;
        let (cdf, values) = (&self.cdf, &self.values);
        self.states.par_iter_mut().for_each(|(rng, sum)| {
            for _ in 0..steps {
                let u = unit_f64(rng);
                *sum += values[cdf.partition_point(|&c| c <= u).min(values.len() - 1)];
            }
        });
        self.letters = n0;
        DensitySum::sampled(self.states.iter().map(|s| s.1).collect())
    }
}

/// Calls `visit` on the distribution of every requested sub-blocklength, in
/// ascending order, without holding more than one exact pmf per worker.
///
/// Up to [`FULL_SCAN_LIMIT`] letters the exact pmf is grown one letter at a
/// time; longer blocks are built by repeated squaring. Blocks over the atom
/// cap are sampled.
fn scan_densities<T: Send>(
    letter: &SparsePmf,
    n0s: &[usize],
    opts: &RcuOptions,
    visit: impl Fn(usize, &DensitySum) -> T + Sync,
) -> Result<Vec<T>> {
    let mut out: Vec<Option<T>> = n0s.iter().map(|_| None).collect();
    let (short, long): (Vec<usize>, Vec<usize>) = (0..n0s.len()).partition(|&i| n0s[i] <= FULL_SCAN_LIMIT);

    let mut acc: Option<SparsePmf> = None;
    let mut grown = 0;
    for &i in &short {
        while grown < n0s[i] {
            acc = match acc {
                None => Some(letter.clone()),
                Some(a) => match convolve(&a, letter, opts.atom_cap) {
                    Ok(next) => Some(next),
                    Err(Error::AtomBudgetExceeded { .. }) => None,
                    Err(e) => return Err(e),
                },
            };
            if acc.is_none() {
                break;
            }
            grown += 1;
        }
        match &acc {
            Some(pmf) if grown == n0s[i] => out[i] = Some(visit(n0s[i], &DensitySum::exact(pmf))),
            _ => break,
        }
    }

    let long_results = long
        .par_iter()
        .map(|&i| match self_convolve_capped(letter, n0s[i], opts.atom_cap) {
            Ok(pmf) => Ok(Some(visit(n0s[i], &DensitySum::exact(&pmf)))),
            Err(Error::AtomBudgetExceeded { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    for (&i, r) in long.iter().zip(long_results) {
        out[i] = r;
    }

    let mut walk: Option<SampleWalk> = None;
    let mut order: Vec<usize> = (0..n0s.len()).filter(|&i| out[i].is_none()).collect();
    order.sort_by_key(|&i| n0s[i]);
    for i in order {
        let w = walk.get_or_insert_with(|| SampleWalk::new(letter, opts));
        out[i] = Some(visit(n0s[i], &w.advance_to(n0s[i])));
    }
    Ok(out.into_iter().map(|t| t.expect("every n0 visited")).collect())
}

fn penalty(w_hat: &Dmc, training: Option<TrainingBudget>, n0: usize) -> Result<f64> {
    match training {
        None => Ok(0.0),
        Some(t) => Ok(tv_penalty(&PenaltyParams::new(t.m, w_hat.alphabet_product(), t.delta, n0)?)),
    }
}

/// First term of the bound at sub-blocklength `n0`.
pub fn rcu_learning_term(w_hat: &Dmc, px: &Dist, p: &BoundParams, n0: usize) -> Result<f64> {
    Ok(rcu_learning_term_with(w_hat, px, p, n0, &RcuOptions::default())?.value)
}

pub fn rcu_learning_term_with(
    w_hat: &Dmc,
    px: &Dist,
    p: &BoundParams,
    n0: usize,
    opts: &RcuOptions,
) -> Result<RcuTerm> {
    check_n0(n0, p.n)?;
    let letter = info_density_pmf(w_hat, px)?;
    let log_a = log2_multiplier(p.n, p.rate, n0);
    if log_a == f64::NEG_INFINITY {
        return Ok(RcuTerm {
            value: 0.0,
            method: Method::Exact,
            std_error: None,
        });
    }
    Ok(scan_densities(&letter, &[n0], opts, |_, d| d.term(log_a))?[0])
}

/// Sub-blocklengths the bound minimizes over.
///
/// All of `1..=n` up to [`FULL_SCAN_LIMIT`]; beyond it a geometric grid
/// containing 1 and `n`, plus the longest block whose penalty stays within
/// `epsilon`.
pub fn candidate_n0s(n: usize, epsilon: f64, penalty_of: impl Fn(usize) -> f64) -> Vec<usize> {
    if n <= FULL_SCAN_LIMIT {
        return (1..=n).collect();
    }
    let mut set: Vec<usize> = (0..GRID_POINTS)
        .map(|k| {
            let t = k as f64 / (GRID_POINTS - 1) as f64;
            ((n as f64).powf(t).round() as usize).clamp(1, n)
        })
        .collect();
    set.push(n);
    // penalty is nondecreasing in n0
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if penalty_of(mid) <= epsilon {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo >= 1 {
        set.push(lo);
    }
    set.sort_unstable();
    set.dedup();
    set
}

/// Scanned sub-blocklengths with their penalties.
fn candidates(
    w_hat: &Dmc,
    n: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
    forced: Option<usize>,
) -> Result<Vec<(usize, f64)>> {
    let n0s = match forced {
        Some(n0) => vec![n0],
        None => candidate_n0s(n, epsilon, |n0| penalty(w_hat, training, n0).unwrap_or(f64::INFINITY)),
    };
    n0s.into_iter().map(|n0| Ok((n0, penalty(w_hat, training, n0)?))).collect()
}

/// Minimum over sub-blocklengths of first term plus learning penalty.
pub fn rcu_learning_bound(w_hat: &Dmc, px: &Dist, p: &BoundParams) -> Result<AchievabilityResult> {
    rcu_learning_bound_with(w_hat, px, p, &RcuOptions::default())
}

pub fn rcu_learning_bound_with(
    w_hat: &Dmc,
    px: &Dist,
    p: &BoundParams,
    opts: &RcuOptions,
) -> Result<AchievabilityResult> {
    if let Some(n0) = p.n0 {
        check_n0(n0, p.n)?;
    }
    let letter = info_density_pmf(w_hat, px)?;
    let cands = candidates(w_hat, p.n, p.epsilon, p.training, p.n0)?;
    // a penalty of one saturates the bound whatever the first term
    let live: Vec<(usize, f64)> = cands.iter().copied().filter(|c| c.1 < 1.0).collect();
    let live_n0s: Vec<usize> = live.iter().map(|c| c.0).collect();
    let terms = scan_densities(&letter, &live_n0s, opts, |n0, d| d.term(log2_multiplier(p.n, p.rate, n0)))?;
    let mut best: Option<AchievabilityResult> = None;
    let mut live_terms = live.iter().zip(terms).peekable();
    for &(n0, pen) in &cands {
        let term = match live_terms.peek() {
            Some(((m, _), _)) if *m == n0 => live_terms.next().expect("peeked").1,
            _ => RcuTerm {
                value: 0.0,
                method: Method::Exact,
                std_error: None,
            },
        };
        let raw = term.value + pen;
        let r = AchievabilityResult {
            error_upper_bound: raw.clamp(0.0, 1.0),
            best_n0: n0,
            first_term: term.value,
            penalty_term: pen,
            raw_sum: raw,
            method: term.method,
            mc_std_error: term.std_error,
        };
        // candidates are ascending, so strict improvement keeps the lowest n0
        if best.is_none_or(|b| r.error_upper_bound < b.error_upper_bound) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Largest rate whose bound stays within `epsilon`, found by bisection to
/// [`RATE_TOLERANCE`]; `0` when no rate qualifies.
pub fn max_rate_achievable(
    w_hat: &Dmc,
    px: &Dist,
    n: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
) -> Result<f64> {
    max_rate_achievable_with(w_hat, px, n, epsilon, training, &RcuOptions::default())
}

/// The bound is within `epsilon` at some rate iff it is for some `n0`, so the
/// answer is the largest per-`n0` bisection result.
pub fn max_rate_achievable_with(
    w_hat: &Dmc,
    px: &Dist,
    n: usize,
    epsilon: f64,
    training: Option<TrainingBudget>,
    opts: &RcuOptions,
) -> Result<f64> {
    BoundParams::new(n, 0.0, epsilon)?;
    let letter = info_density_pmf(w_hat, px)?;
    let cands: Vec<(usize, f64)> = candidates(w_hat, n, epsilon, training, None)?
        .into_iter()
        .filter(|c| c.1 <= epsilon)
        .collect();
    let n0s: Vec<usize> = cands.iter().map(|c| c.0).collect();
    let top = (w_hat.num_inputs() as f64).log2();
    let rates = scan_densities(&letter, &n0s, opts, |n0, d| {
        let pen = cands.iter().find(|c| c.0 == n0).expect("scanned n0").1;
        let ok = |rate: f64| d.value(log2_multiplier(n, rate, n0)) + pen <= epsilon;
        let (mut lo, mut hi) = (0.0, top);
        if !ok(lo) {
            return 0.0;
        }
        if ok(hi) {
            return hi;
        }
        while hi - lo > RATE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    })?;
    Ok(rates.into_iter().fold(0.0, f64::max))
}
