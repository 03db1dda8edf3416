//! Monte Carlo of the learned concatenated random code: a random mini
//! codebook of `M0` sub-codewords of length `n0`, its `L`-fold product, and
//! sub-block-wise maximum-likelihood decoding under the estimated channel.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{Dist, Dmc};
use crate::error::{Error, Result};
use crate::learning::{estimate_empirical_channel, sample_training_set};
use crate::rng::{derive_seed, sample_index, stream, stream_rng};

/// Largest mini codebook a simulation accepts.
pub const DEFAULT_CODEBOOK_CAP: usize = 1 << 20;

const TRIAL_CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    mini: Vec<usize>,
    m0: usize,
    n0: usize,
    l_factor: usize,
    num_inputs: usize,
}

impl Codebook {
    /// Builds a codebook from explicit sub-codewords.
    pub fn from_rows(rows: &[Vec<usize>], l_factor: usize, num_inputs: usize) -> Result<Self> {
        let n0 = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || n0 == 0 {
            return Err(Error::EmptyMatrix);
        }
        if l_factor == 0 {
            return Err(Error::InvalidParameter("extension order must be >= 1".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n0 {
                return Err(Error::NotRectangular {
                    row: i,
                    expected: n0,
                    found: r.len(),
                });
            }
            if let Some(&x) = r.iter().find(|&&x| x >= num_inputs) {
                return Err(Error::DimensionMismatch {
                    expected: num_inputs,
                    found: x + 1,
                });
            }
        }
        Ok(Codebook {
            mini: rows.concat(),
            m0: rows.len(),
            n0,
            l_factor,
            num_inputs,
        })
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn l_factor(&self) -> usize {
        self.l_factor
    }

    /// `log2` of the number of messages, `L log2 M0`.
    pub fn log2_effective_m(&self) -> f64 {
        self.l_factor as f64 * (self.m0 as f64).log2()
    }

    pub fn effective_n(&self) -> usize {
        self.n0 * self.l_factor
    }

    pub fn sub_codeword(&self, i: usize) -> &[usize] {
        &self.mini[i * self.n0..(i + 1) * self.n0]
    }

    /// Concatenation of the sub-codewords named by `message`.
    pub fn encode(&self, message: &[usize]) -> Vec<usize> {
        message.iter().flat_map(|&i| self.sub_codeword(i).iter().copied()).collect()
    }
}

/// Random code for `2^{log2_m}` messages over `n` channel uses.
///
/// `L = ⌊n/n0⌋` and `M0 = ⌈2^{(n/L)·R}⌉` with `R = log2_m / n`; symbols are
/// i.i.d. `px` and depend only on `seed`.
pub fn generate_codebook(px: &Dist, log2_m: f64, n: usize, n0: usize, seed: u64) -> Result<Codebook> {
    generate_codebook_capped(px, log2_m, n, n0, seed, DEFAULT_CODEBOOK_CAP)
}

pub fn generate_codebook_capped(
    px: &Dist,
    log2_m: f64,
    n: usize,
    n0: usize,
    seed: u64,
    cap: usize,
) -> Result<Codebook> {
    if n0 == 0 || n0 > n {
        return Err(Error::InvalidN0 { n0, n });
    }
    if !(log2_m >= 0.0 && log2_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("log2 M must be finite and >= 0, got {log2_m}")));
    }
    let l = n / n0;
    let mut exponent = log2_m / l as f64;
    if (exponent - exponent.round()).abs() < 1e-12 {
        exponent = exponent.round();
    }
    let m0 = exponent.exp2().ceil();
    if m0 > cap as f64 {
        return Err(Error::CodebookTooLarge { rows: m0, cap });
    }
    let m0 = m0 as usize;
    let mut rng = stream_rng(seed, stream::CODEBOOK);
    let rows: Vec<Vec<usize>> = (0..m0)
        .map(|_| (0..n0).map(|_| sample_index(&mut rng, px.as_slice())).collect())
        .collect();
    let cb = Codebook::from_rows(&rows, l, px.len())?;
    debug_assert!(cb.log2_effective_m() >= log2_m - 1e-9 && cb.effective_n() <= n);
    Ok(cb)
}

/// Decoder output. A full message is a vector of `L` sub-codeword indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Decoded {
    Message(Vec<usize>),
    Erasure,
}

/// Natural-log likelihood table with `−∞` for zero entries.
struct LogTable {
    table: Vec<f64>,
    ny: usize,
}

impl LogTable {
    fn new(w: &Dmc) -> Self {
        LogTable {
            table: w.rows().flat_map(|r| r.iter().map(|&p| p.ln())).collect(),
            ny: w.num_outputs(),
        }
    }

    fn score(&self, codeword: &[usize], y: &[usize]) -> f64 {
        let mut s = 0.0;
        for (&x, &yy) in codeword.iter().zip(y) {
            s += self.table[x * self.ny + yy];
            if s == f64::NEG_INFINITY {
                break;
            }
        }
        s
    }
}

/// Index of the most likely sub-codeword, lowest index on ties, or `None`
/// when every row has zero likelihood.
fn decode_block(lt: &LogTable, cb: &Codebook, y: &[usize], rng: Option<&mut ChaCha8Rng>) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut winners: Vec<usize> = Vec::new();
    for i in 0..cb.m0 {
        let s = lt.score(cb.sub_codeword(i), y);
        if s > best {
            best = s;
            winners.clear();
            winners.push(i);
        } else if s == best && s > f64::NEG_INFINITY && rng.is_some() {
            winners.push(i);
        }
    }
    if best == f64::NEG_INFINITY {
        return None;
    }
    match rng {
        Some(r) if winners.len() > 1 => Some(winners[r.random_range(0..winners.len())]),
        _ => Some(winners[0]),
    }
}

fn check_decode_inputs(w_hat: &Dmc, cb: &Codebook, y: &[usize]) -> Result<()> {
    if y.len() != cb.effective_n() {
        return Err(Error::LengthMismatch {
            expected: cb.effective_n(),
            found: y.len(),
        });
    }
    if w_hat.num_inputs() != cb.num_inputs {
        return Err(Error::DimensionMismatch {
            expected: cb.num_inputs,
            found: w_hat.num_inputs(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= w_hat.num_outputs()) {
        return Err(Error::DimensionMismatch {
            expected: w_hat.num_outputs(),
            found: bad + 1,
        });
    }
    Ok(())
}

fn decode_all(lt: &LogTable, cb: &Codebook, y: &[usize], mut rng: Option<&mut ChaCha8Rng>) -> Decoded {
    let mut msg = Vec::with_capacity(cb.l_factor);
    for block in y.chunks(cb.n0) {
        match decode_block(lt, cb, block, rng.as_deref_mut()) {
            Some(i) => msg.push(i),
            None => return Decoded::Erasure,
        }
    }
    // the extended book is the full product, so every index tuple is a message
    debug_assert!(msg.len() == cb.l_factor && msg.iter().all(|&i| i < cb.m0));
    Decoded::Message(msg)
}

/// Maximum-likelihood decoding under `w_hat`, one sub-block at a time.
pub fn empirical_ml_decode(w_hat: &Dmc, cb: &Codebook, y: &[usize]) -> Result<Decoded> {
    check_decode_inputs(w_hat, cb, y)?;
    Ok(decode_all(&LogTable::new(w_hat), cb, y, None))
}

/// As [`empirical_ml_decode`], with ties broken uniformly at random.
pub fn empirical_ml_decode_random_ties(w_hat: &Dmc, cb: &Codebook, y: &[usize], rng: &mut ChaCha8Rng) -> Result<Decoded> {
    check_decode_inputs(w_hat, cb, y)?;
    Ok(decode_all(&LogTable::new(w_hat), cb, y, Some(rng)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub error_estimate: f64,
    pub trials: u64,
    pub std_error: f64,
    pub seed: u64,
}

impl SimResult {
    fn from_errors(errors: u64, trials: u64, seed: u64) -> Self {
        let p = errors as f64 / trials as f64;
        SimResult {
            error_estimate: p,
            trials,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub random_ties: bool,
}

/// Average error over `trials` uniformly drawn messages; trial `t` depends
/// only on `(seed, t)`.
pub fn simulate_error_prob(w_true: &Dmc, w_hat: &Dmc, cb: &Codebook, trials: u64, seed: u64) -> Result<SimResult> {
    simulate_error_prob_with(w_true, w_hat, cb, trials, seed, SimOptions::default())
}

pub fn simulate_error_prob_with(
    w_true: &Dmc,
    w_hat: &Dmc,
    cb: &Codebook,
    trials: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if w_true.num_inputs() != cb.num_inputs || w_true.num_outputs() != w_hat.num_outputs() {
        return Err(Error::DimensionMismatch {
            expected: cb.num_inputs,
            found: w_true.num_inputs(),
        });
    }
    check_decode_inputs(w_hat, cb, &vec![0; cb.effective_n()])?;
    let lt = LogTable::new(w_hat);
    let errors: u64 = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut y = vec![0usize; cb.effective_n()];
            let mut msg = vec![0usize; cb.l_factor];
            let mut errs = 0u64;
            for t in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let mut rng = stream_rng(derive_seed(seed, stream::TRIAL, t), stream::TRIAL);
                for m in msg.iter_mut() {
                    *m = rng.random_range(0..cb.m0);
                }
                for (j, &i) in msg.iter().enumerate() {
                    for (k, &x) in cb.sub_codeword(i).iter().enumerate() {
                        y[j * cb.n0 + k] = sample_index(&mut rng, w_true.row(x));
                    }
                }
                let decoded = decode_all(&lt, cb, &y, opts.random_ties.then_some(&mut rng));
                if decoded != Decoded::Message(msg.clone()) {
                    errs += 1;
                }
            }
            errs
        })
        .sum();
    Ok(SimResult::from_errors(errors, trials, seed))
}

/// Exact average error of the lowest-index decoder, summing over every
/// message and every output string.
pub fn exhaustive_error_prob(w_true: &Dmc, w_hat: &Dmc, cb: &Codebook) -> Result<f64> {
    check_decode_inputs(w_hat, cb, &vec![0; cb.effective_n()])?;
    let lt = LogTable::new(w_hat);
    let ny = w_true.num_outputs();
    let n = cb.effective_n();
    let outputs = (ny as f64).powi(n as i32);
    let messages = (cb.m0 as f64).powi(cb.l_factor as i32);
    if outputs * messages > 1e8 {
        return Err(Error::InvalidParameter("exhaustive enumeration too large".into()));
    }
    let (outputs, messages) = (outputs as usize, messages as usize);
    let mut correct = 0.0;
    let mut y = vec![0usize; n];
    let mut msg = vec![0usize; cb.l_factor];
    for m in 0..messages {
        let mut r = m;
        for slot in msg.iter_mut().rev() {
            *slot = r % cb.m0;
            r /= cb.m0;
        }
        let x = cb.encode(&msg);
        for code in 0..outputs {
            let mut c = code;
            let mut prob = 1.0;
            for (i, slot) in y.iter_mut().enumerate() {
                *slot = c % ny;
                c /= ny;
                prob *= w_true.prob(x[i], *slot);
            }
            if prob > 0.0 && decode_all(&lt, cb, &y, None) == Decoded::Message(msg.clone()) {
                correct += prob;
            }
        }
    }
    Ok((1.0 - correct / messages as f64).clamp(0.0, 1.0))
}

/// Error averaged over independently drawn codebooks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub mean_error: f64,
    /// Standard error across codebooks.
    pub std_error: f64,
    pub per_codebook: Vec<f64>,
}

/// Simulates `codebooks` fresh random codes with `trials` messages each.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ensemble(
    w_true: &Dmc,
    w_hat: &Dmc,
    px: &Dist,
    log2_m: f64,
    n: usize,
    n0: usize,
    codebooks: usize,
    trials: u64,
    seed: u64,
) -> Result<EnsembleResult> {
    if codebooks == 0 {
        return Err(Error::InvalidParameter("codebooks must be >= 1".into()));
    }
    let per_codebook = (0..codebooks)
        .into_par_iter()
        .map(|k| {
            let cb_seed = derive_seed(seed, stream::CODEBOOK, k as u64);
            let cb = generate_codebook(px, log2_m, n, n0, cb_seed)?;
            Ok(simulate_error_prob(w_true, w_hat, &cb, trials, derive_seed(seed, stream::TRIAL, k as u64))?.error_estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean_error, std_error) = mean_and_std_error(&per_codebook);
    Ok(EnsembleResult {
        mean_error,
        std_error,
        per_codebook,
    })
}

fn mean_and_std_error(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Setup for checking the statistical reliability of the learned code.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityConfig {
    /// Training pairs per draw.
    pub m: usize,
    pub log2_m: f64,
    pub n: usize,
    pub n0: usize,
    pub px: Dist,
    pub epsilon: f64,
    pub delta: f64,
    pub training_draws: usize,
    pub trials_per_draw: u64,
    /// Reuse one codebook across training draws instead of drawing a fresh one.
    pub fixed_codebook: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    /// Per-draw simulated error probabilities.
    pub per_draw: Vec<f64>,
    /// Fraction of draws with error at most `epsilon`.
    pub fraction_within: f64,
    pub fraction_sigma: f64,
    pub mean_error: f64,
    pub mean_sigma: f64,
    /// `fraction_within ≥ 1 − δ − 3σ`.
    pub fraction_ok: bool,
    /// `mean_error ≤ ε + δ + 3σ`.
    pub mean_ok: bool,
}

impl ReliabilityReport {
    pub fn passed(&self) -> bool {
        self.fraction_ok && self.mean_ok
    }
}

/// The codebook shared by every training draw when `cfg.fixed_codebook` is set.
pub fn reliability_codebook(cfg: &ReliabilityConfig, seed: u64) -> Result<Codebook> {
    generate_codebook(&cfg.px, cfg.log2_m, cfg.n, cfg.n0, derive_seed(seed, stream::CODEBOOK, u64::MAX))
}

/// Draws independent training sets, learns `Ŵ`, builds the code and
/// simulates it on the true channel.
pub fn verify_reliability(w_true: &Dmc, cfg: &ReliabilityConfig, seed: u64) -> Result<ReliabilityReport> {
    if cfg.training_draws == 0 {
        return Err(Error::InvalidParameter("training draws must be >= 1".into()));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(cfg.epsilon));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::InvalidDelta(cfg.delta));
    }
    let shared = if cfg.fixed_codebook {
        Some(reliability_codebook(cfg, seed)?)
    } else {
        None
    };
    let per_draw = (0..cfg.training_draws)
        .into_par_iter()
        .map(|d| {
            let d = d as u64;
            let train = sample_training_set(w_true, cfg.m, derive_seed(seed, stream::DRAW, d))?;
            let w_hat = estimate_empirical_channel(&train);
            let cb = match &shared {
                Some(cb) => cb.clone(),
                None => generate_codebook(&cfg.px, cfg.log2_m, cfg.n, cfg.n0, derive_seed(seed, stream::CODEBOOK, d))?,
            };
            let sim = simulate_error_prob(w_true, &w_hat, &cb, cfg.trials_per_draw, derive_seed(seed, stream::TRIAL, d))?;
            Ok(sim.error_estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = per_draw.len() as f64;
    let fraction_within = per_draw.iter().filter(|&&p| p <= cfg.epsilon).count() as f64 / k;
    // binomial spread of the indicator count at the boundary 1 − δ
    let fraction_sigma = (cfg.delta * (1.0 - cfg.delta) / k).sqrt();
    let (mean_error, mean_sigma) = mean_and_std_error(&per_draw);
    Ok(ReliabilityReport {
        fraction_ok: fraction_within >= 1.0 - cfg.delta - 3.0 * fraction_sigma,
        mean_ok: mean_error <= cfg.epsilon + cfg.delta + 3.0 * mean_sigma,
        per_draw,
        fraction_within,
        fraction_sigma,
        mean_error,
        mean_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn antipodal(n: usize) -> Codebook {
        Codebook::from_rows(&[vec![0; n], vec![1; n]], 1, 2).unwrap()
    }

    #[test]
    fn codebook_shapes() {
        let px = Dist::uniform(2);
        let cb = generate_codebook(&px, 3.0, 5, 5, 1).unwrap();
        assert_eq!((cb.m0(), cb.l_factor(), cb.effective_n()), (8, 1, 5));
        let cb = generate_codebook(&px, 4.0, 10, 3, 1).unwrap();
        assert_eq!(cb.l_factor(), 3);
        // M0 = ceil(2^{4/3}) = 3, and 3^3 >= 2^4
        assert_eq!(cb.m0(), 3);
        assert!(cb.log2_effective_m() >= 4.0 && cb.effective_n() == 9);
        assert_eq!(cb, generate_codebook(&px, 4.0, 10, 3, 1).unwrap());
        assert_ne!(cb, generate_codebook(&px, 4.0, 10, 3, 2).unwrap());
        assert!(matches!(
            generate_codebook_capped(&px, 21.0, 21, 21, 0, 1 << 20),
            Err(Error::CodebookTooLarge { .. })
        ));
        assert!(generate_codebook(&px, 1.0, 4, 5, 0).is_err());
        let point = generate_codebook(&Dist::point(2, 1), 2.0, 6, 6, 3).unwrap();
        assert!((0..4).all(|i| point.sub_codeword(i) == [1; 6]));
    }

    #[test]
    fn hand_decoding() {
        let w = Dmc::bsc(0.1);
        let cb = antipodal(1);
        assert_eq!(empirical_ml_decode(&w, &cb, &[0]).unwrap(), Decoded::Message(vec![0]));
        assert_eq!(empirical_ml_decode(&w, &cb, &[1]).unwrap(), Decoded::Message(vec![1]));
        assert!(matches!(empirical_ml_decode(&w, &cb, &[0, 1]), Err(Error::LengthMismatch { .. })));
        // zero likelihood everywhere: erasure
        let z = Dmc::new(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(empirical_ml_decode(&z, &cb, &[1]).unwrap(), Decoded::Erasure);
        // a zero row entry excludes that codeword only
        let zc = Dmc::z_channel(0.2);
        assert_eq!(empirical_ml_decode(&zc, &cb, &[0]).unwrap(), Decoded::Message(vec![0]));
        assert_eq!(empirical_ml_decode(&zc, &cb, &[1]).unwrap(), Decoded::Message(vec![1]));
    }

    #[test]
    fn noiseless_identity_decodes_everything() {
        let cb = Codebook::from_rows(&[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], 2, 2).unwrap();
        let id = Dmc::identity(2);
        let sim = simulate_error_prob(&id, &id, &cb, 5_000, 9).unwrap();
        assert_eq!(sim.error_estimate, 0.0);
        assert_eq!(sim.std_error, 0.0);
        for m0 in 0..4 {
            for m1 in 0..4 {
                let y = cb.encode(&[m0, m1]);
                assert_eq!(empirical_ml_decode(&id, &cb, &y).unwrap(), Decoded::Message(vec![m0, m1]));
            }
        }
    }

    #[test]
    fn one_bit_on_bsc() {
        let w = Dmc::bsc(0.1);
        let sim = simulate_error_prob(&w, &w, &antipodal(1), 100_000, 4).unwrap();
        assert!((sim.error_estimate - 0.1).abs() < 3.0 * sim.std_error);
        assert!((exhaustive_error_prob(&w, &w, &antipodal(1)).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn duplicate_codewords_and_tie_breaking() {
        let cb = Codebook::from_rows(&[vec![1, 0], vec![1, 0], vec![1, 0]], 1, 2).unwrap();
        let id = Dmc::identity(2);
        // lowest index always wins
        let det = simulate_error_prob(&id, &id, &cb, 30_000, 5).unwrap();
        assert!((det.error_estimate - 2.0 / 3.0).abs() < 4.0 * det.std_error);
        let rnd = simulate_error_prob_with(&id, &id, &cb, 30_000, 5, SimOptions { random_ties: true }).unwrap();
        assert!((rnd.error_estimate - 2.0 / 3.0).abs() < 4.0 * rnd.std_error);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let picks: std::collections::BTreeSet<_> = (0..200)
            .map(|_| empirical_ml_decode_random_ties(&id, &cb, &[1, 0], &mut rng).unwrap())
            .collect();
        assert_eq!(picks.len(), 3);
    }

    /// Error of the lowest-index joint ML decoder over the full product book,
    /// decoding whole strings at once.
    fn joint_ml_error(w_true: &Dmc, w_hat: &Dmc, rows: &[Vec<usize>], l: usize) -> f64 {
        let m0 = rows.len();
        let words: Vec<Vec<usize>> = (0..m0.pow(l as u32))
            .map(|m| (0..l).rev().flat_map(|j| rows[m / m0.pow(j as u32) % m0].clone()).collect())
            .collect();
        let n = words[0].len();
        let ny = w_true.num_outputs();
        let mut correct = 0.0;
        for code in 0..ny.pow(n as u32) {
            let y: Vec<usize> = (0..n).map(|i| code / ny.pow(i as u32) % ny).collect();
            let like = |w: &Dmc, x: &[usize]| x.iter().zip(&y).map(|(&a, &b)| w.prob(a, b)).product::<f64>();
            let mut best = (0usize, -1.0f64);
            for (m, x) in words.iter().enumerate() {
                let l = like(w_hat, x);
                if l > best.1 {
                    best = (m, l);
                }
            }
            if best.1 > 0.0 {
                correct += like(w_true, &words[best.0]);
            }
        }
        1.0 - correct / words.len() as f64
    }

    #[test]
    fn exhaustive_matches_joint_ml() {
        let channels = [Dmc::bsc(0.2), Dmc::z_channel(0.35), Dmc::new(&[vec![0.6, 0.4], vec![0.25, 0.75]]).unwrap()];
        let books: [(Vec<Vec<usize>>, usize); 4] = [
            (vec![vec![0], vec![1]], 2),
            (vec![vec![0, 1], vec![1, 1], vec![0, 0]], 1),
            (vec![vec![0, 0], vec![1, 1], vec![0, 1], vec![1, 0]], 1),
            (vec![vec![1, 0], vec![0, 1]], 2),
        ];
        for w_true in &channels {
            for w_hat in &channels {
                for (rows, l) in &books {
                    let cb = Codebook::from_rows(rows, *l, 2).unwrap();
                    let got = exhaustive_error_prob(w_true, w_hat, &cb).unwrap();
                    let want = joint_ml_error(w_true, w_hat, rows, *l);
                    assert!((got - want).abs() < 1e-12, "{got} {want}");
                }
            }
        }
    }

    #[test]
    fn simulation_tracks_exhaustive_value() {
        let w = Dmc::bsc(0.15);
        let w_hat = Dmc::new(&[vec![0.83, 0.17], vec![0.12, 0.88]]).unwrap();
        let cb = Codebook::from_rows(&[vec![0, 0], vec![1, 1], vec![0, 1]], 2, 2).unwrap();
        let exact = exhaustive_error_prob(&w, &w_hat, &cb).unwrap();
        let sim = simulate_error_prob(&w, &w_hat, &cb, 200_000, 11).unwrap();
        assert!((sim.error_estimate - exact).abs() < 4.0 * sim.std_error);
    }

    #[test]
    fn simulation_is_deterministic_across_thread_counts() {
        let w = Dmc::bsc(0.11);
        let cb = generate_codebook(&Dist::uniform(2), 3.0, 12, 12, 8).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_error_prob(&w, &w, &cb, 20_000, 21).unwrap())
        };
        assert_eq!(run(1), run(4));
        let decoded = empirical_ml_decode(&w, &cb, &[0; 12]).unwrap();
        assert_eq!(decoded, empirical_ml_decode(&w, &cb, &[0; 12]).unwrap());
    }

    #[test]
    fn reliability_on_noiseless_channel() {
        let cfg = ReliabilityConfig {
            m: 20,
            log2_m: 2.0,
            n: 2,
            n0: 2,
            px: Dist::uniform(2),
            epsilon: 0.01,
            delta: 0.1,
            training_draws: 5,
            trials_per_draw: 500,
            fixed_codebook: false,
        };
        let id = Dmc::identity(2);
        // distinct codewords are not guaranteed for random books; use a fixed one
        let cb = Codebook::from_rows(&[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], 1, 2).unwrap();
        assert_eq!(simulate_error_prob(&id, &id, &cb, 100, 0).unwrap().error_estimate, 0.0);
        let r = verify_reliability(&id, &cfg, 3).unwrap();
        assert_eq!(r.per_draw.len(), 5);
        let vacuous = verify_reliability(&id, &ReliabilityConfig { delta: 1.0, ..cfg.clone() }, 3).unwrap();
        assert!(vacuous.passed());
        assert!(verify_reliability(&id, &ReliabilityConfig { training_draws: 0, ..cfg }, 3).is_err());
    }

    #[test]
    fn reliability_is_reproducible() {
        let cfg = ReliabilityConfig {
            m: 2_000,
            log2_m: 2.0,
            n: 8,
            n0: 8,
            px: Dist::uniform(2),
            epsilon: 0.2,
            delta: 0.1,
            training_draws: 6,
            trials_per_draw: 2_000,
            fixed_codebook: true,
        };
        let w = Dmc::bsc(0.05);
        let a = verify_reliability(&w, &cfg, 17).unwrap();
        assert_eq!(a, verify_reliability(&w, &cfg, 17).unwrap());
        assert!(a.mean_error < 0.2 && a.passed());
    }

    #[test]
    fn ensemble_statistics() {
        let w = Dmc::bsc(0.11);
        let e = simulate_ensemble(&w, &w, &Dist::uniform(2), 2.0, 6, 6, 20, 2_000, 1).unwrap();
        assert_eq!(e.per_codebook.len(), 20);
        let (m, s) = mean_and_std_error(&e.per_codebook);
        assert_eq!((e.mean_error, e.std_error), (m, s));
        assert!(s > 0.0);
    }
}
