//! Training sets, the counting estimator of the channel, and the
//! concentration penalties that turn empirical quantities into guarantees.

use rayon::prelude::*;

use crate::channel::{Dist, Dmc};
use crate::error::{Error, Result};
use crate::rng::{indexed_rng, sample_index, stream, unit_f64};

/// i.i.d. pairs `(x, y)` with `x` uniform and `y ~ W(·|x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    pairs: Vec<(usize, usize)>,
    num_inputs: usize,
    num_outputs: usize,
}

impl TrainingSet {
    pub fn new(pairs: Vec<(usize, usize)>, num_inputs: usize, num_outputs: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter("training set must be non-empty".into()));
        }
        if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= num_inputs || y >= num_outputs) {
            return Err(Error::InvalidParameter(format!(
                "pair ({x}, {y}) outside {num_inputs}x{num_outputs} alphabet"
            )));
        }
        Ok(Self {
            pairs,
            num_inputs,
            num_outputs,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }
}

/// Training size and confidence; `None` in a bound means the channel is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingBudget {
    pub m: u64,
    pub delta: f64,
}

impl TrainingBudget {
    pub fn new(m: u64, delta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("training size m must be >= 1".into()));
        }
        check_delta(delta)?;
        Ok(Self { m, delta })
    }
}

/// Inputs of the total-variation penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub m: u64,
    pub alphabet_product: usize,
    pub delta: f64,
    pub n0: usize,
}

impl PenaltyParams {
    pub fn new(m: u64, alphabet_product: usize, delta: f64, n0: usize) -> Result<Self> {
        if m == 0 || alphabet_product == 0 || n0 == 0 {
            return Err(Error::InvalidParameter(
                "m, |X||Y| and n0 must all be >= 1".into(),
            ));
        }
        check_delta(delta)?;
        Ok(Self {
            m,
            alphabet_product,
            delta,
            n0,
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

// Each pair consumes exactly two u64 draws (four ChaCha words).
const WORDS_PER_PAIR: u64 = 4;
const CHUNK: usize = 8192;

/// Draws `m` pairs; pair `i` depends only on `(seed, i)`.
pub fn sample_training_set(w: &Dmc, m: usize, seed: u64) -> Result<TrainingSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("training size m must be >= 1".into()));
    }
    let nx = w.num_inputs();
    let chunks: Vec<Vec<(usize, usize)>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(m);
            let mut rng = indexed_rng(seed, stream::TRAINING, start as u64, WORDS_PER_PAIR);
            (start..end)
                .map(|_| {
                    let x = ((unit_f64(&mut rng) * nx as f64) as usize).min(nx - 1);
                    let y = sample_index(&mut rng, w.row(x));
                    (x, y)
                })
                .collect()
        })
        .collect();
    TrainingSet::new(chunks.concat(), nx, w.num_outputs())
}

/// Counting estimator `Ŵ(y|x) = N(x, y) / N(x)`.
///
/// Inputs absent from the training set get a uniform row and are reported by
/// [`Dmc::unvisited_inputs`]; the PAC guarantee says nothing about them.
pub fn estimate_empirical_channel(d: &TrainingSet) -> Dmc {
    let (nx, ny) = (d.num_inputs, d.num_outputs);
    let mut counts = vec![vec![0u64; ny]; nx];
    for &(x, y) in &d.pairs {
        counts[x][y] += 1;
    }
    let mut unvisited = Vec::new();
    let rows: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                unvisited.push(x);
                vec![1.0 / ny as f64; ny]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Dmc::new(&rows)
        .expect("count ratios are stochastic")
        .with_unvisited(unvisited)
}

/// Joint `W(y|x) / |X|` under the uniform training input, row-major.
pub fn uniform_input_joint(w: &Dmc) -> Dist {
    let nx = w.num_inputs() as f64;
    let mass: Vec<f64> = w.rows().flat_map(|r| r.iter().map(move |&p| p / nx)).collect();
    let sum: f64 = mass.iter().sum();
    Dist::new(mass.iter().map(|p| p / sum).collect()).expect("joint of a valid channel")
}

/// High-probability bound on `KL(empirical ‖ true)` for `m` samples over an
/// alphabet of the given cardinality, in nats.
pub fn kl_concentration_bound(m: u64, cardinality: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if m == 0 || cardinality == 0 {
        return Err(Error::InvalidParameter("m and cardinality must be >= 1".into()));
    }
    let m = m as f64;
    Ok(((cardinality as f64 - 1.0) * (m + 1.0).ln() - delta.ln()) / m)
}

/// Total-variation penalty `κ = sqrt(1 − exp(−n0 · KLbound))`.
pub fn tv_penalty(p: &PenaltyParams) -> f64 {
    let kl = kl_concentration_bound(p.m, p.alphabet_product, p.delta)
        .expect("validated by PenaltyParams::new");
    // 1 - exp(-t) without cancellation for small t
    (-(-(p.n0 as f64) * kl).exp_m1()).sqrt()
}

/// Largest `n` with `n ≤ sqrt(m / ((card − 1) ln(m + 1) − ln δ))`.
pub fn max_blocklength(m: u64, cardinality: usize, delta: f64) -> Result<u64> {
    let kl = kl_concentration_bound(m, cardinality, delta)?;
    let bound = (1.0 / kl).sqrt();
    Ok(bound.floor() as u64)
}
