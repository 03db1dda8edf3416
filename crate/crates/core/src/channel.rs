//! Discrete memoryless channels, finite distributions and the elementary
//! information measures built on them.
//!
//! Information quantities are in bits; [`kl_divergence`] is the exception
//! and reports nats, since the concentration penalties are stated in nats.

use crate::error::{Error, Result};

/// Row-sum deviation accepted from user-supplied matrices.
pub const INPUT_ROW_TOLERANCE: f64 = 1e-9;

/// Rows further than this from 1 are renormalized on construction.
const RENORMALIZE_THRESHOLD: f64 = 1e-15;

/// A probability mass function over `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    mass: Vec<f64>,
}

impl Dist {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        for (i, &p) in mass.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::NegativeEntry {
                    row: 0,
                    col: i,
                    value: p,
                });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            mass: normalize(mass, sum),
        })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution over an empty alphabet");
        Self {
            mass: vec![1.0 / len as f64; len],
        }
    }

    /// Point mass at `index`.
    pub fn point(len: usize, index: usize) -> Self {
        assert!(index < len);
        let mut mass = vec![0.0; len];
        mass[index] = 1.0;
        Self { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
    }
}

impl std::ops::Index<usize> for Dist {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.mass[i]
    }
}

fn normalize(mut v: Vec<f64>, sum: f64) -> Vec<f64> {
    if (sum - 1.0).abs() > RENORMALIZE_THRESHOLD {
        v.iter_mut().for_each(|p| *p /= sum);
    }
    v
}

/// A discrete memoryless channel `W(y|x)`, stored row-major.
///
/// Rows of an estimated channel that were never observed in training carry a
/// uniform placeholder and are listed in [`Dmc::unvisited_inputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    num_inputs: usize,
    num_outputs: usize,
    transition: Vec<f64>,
    unvisited: Vec<usize>,
}

impl Dmc {
    /// Validates a raw matrix, `raw[x][y] = W(y|x)`.
    pub fn new(raw: &[Vec<f64>]) -> Result<Self> {
        validate_dmc(raw)
    }

    pub fn bsc(p: f64) -> Self {
        validate_dmc(&[vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("crossover in [0, 1]")
    }

    /// Binary erasure channel; output 2 is the erasure symbol.
    pub fn bec(p: f64) -> Self {
        validate_dmc(&[vec![1.0 - p, 0.0, p], vec![0.0, 1.0 - p, p]]).expect("erasure in [0, 1]")
    }

    /// Z-channel: input 0 is noiseless, input 1 flips to 0 with probability `p`.
    pub fn z_channel(p: f64) -> Self {
        validate_dmc(&[vec![1.0, 0.0], vec![p, 1.0 - p]]).expect("flip in [0, 1]")
    }

    pub fn identity(k: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|x| (0..k).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        validate_dmc(&rows).expect("identity is stochastic")
    }

    /// Every input produces the uniform output distribution.
    pub fn uniform(num_inputs: usize, num_outputs: usize) -> Self {
        let rows = vec![vec![1.0 / num_outputs as f64; num_outputs]; num_inputs];
        validate_dmc(&rows).expect("uniform rows are stochastic")
    }

    pub(crate) fn with_unvisited(mut self, unvisited: Vec<usize>) -> Self {
        self.unvisited = unvisited;
        self
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    /// `|X||Y|`, the cardinality entering the concentration penalties.
    pub fn alphabet_product(&self) -> usize {
        self.num_inputs * self.num_outputs
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.transition[x * self.num_outputs..(x + 1) * self.num_outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.transition.chunks_exact(self.num_outputs)
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.transition[x * self.num_outputs + y]
    }

    /// Inputs whose row is a placeholder because training never visited them.
    pub fn unvisited_inputs(&self) -> &[usize] {
        &self.unvisited
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn check_input_dist(&self, px: &Dist) -> Result<()> {
        if px.len() != self.num_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.num_inputs,
                found: px.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_output_dist(&self, qy: &Dist) -> Result<()> {
        if qy.len() != self.num_outputs {
            return Err(Error::DimensionMismatch {
                expected: self.num_outputs,
                found: qy.len(),
            });
        }
        Ok(())
    }
}

/// Checks that `raw` is a non-empty rectangular row-stochastic matrix.
///
/// Rows within [`INPUT_ROW_TOLERANCE`] of unit sum are accepted and rescaled.
pub fn validate_dmc(raw: &[Vec<f64>]) -> Result<Dmc> {
    let num_outputs = raw.first().map_or(0, Vec::len);
    if raw.is_empty() || num_outputs == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut transition = Vec::with_capacity(raw.len() * num_outputs);
    for (x, row) in raw.iter().enumerate() {
        if row.len() != num_outputs {
            return Err(Error::NotRectangular {
                row: x,
                expected: num_outputs,
                found: row.len(),
            });
        }
        for (y, &w) in row.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::NegativeEntry {
                    row: x,
                    col: y,
                    value: w,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
            return Err(Error::RowNotStochastic { row: x, sum });
        }
        transition.extend(normalize(row.clone(), sum));
    }
    Ok(Dmc {
        num_inputs: raw.len(),
        num_outputs,
        transition,
        unvisited: Vec::new(),
    })
}

/// `PY(y) = Σ_x px(x) W(y|x)`.
pub fn output_marginal(px: &Dist, w: &Dmc) -> Result<Dist> {
    w.check_input_dist(px)?;
    let mut py = vec![0.0; w.num_outputs()];
    for (x, row) in w.rows().enumerate() {
        let p = px[x];
        if p == 0.0 {
            continue;
        }
        for (acc, &wy) in py.iter_mut().zip(row) {
            *acc += p * wy;
        }
    }
    let sum: f64 = py.iter().sum();
    Ok(Dist {
        mass: normalize(py, sum),
    })
}

/// Per-letter information density `log2(W(y|x) / PY(y))`.
///
/// Entries with `W(y|x) = 0` are absent rather than `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoDensityTable {
    num_outputs: usize,
    values: Vec<Option<f64>>,
    input_dist: Dist,
    output_marginal: Dist,
}

impl InfoDensityTable {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[x * self.num_outputs + y]
    }

    pub fn input_dist(&self) -> &Dist {
        &self.input_dist
    }

    pub fn output_marginal(&self) -> &Dist {
        &self.output_marginal
    }
}

pub fn info_density_table(px: &Dist, w: &Dmc) -> Result<InfoDensityTable> {
    let py = output_marginal(px, w)?;
    let mut values = Vec::with_capacity(w.alphabet_product());
    for (x, row) in w.rows().enumerate() {
        for (y, &wy) in row.iter().enumerate() {
            if wy == 0.0 {
                values.push(None);
            } else if py[y] > 0.0 {
                values.push(Some((wy / py[y]).log2()));
            } else if px[x] > 0.0 {
                return Err(Error::UnreachableOutputWithMass { output: y });
            } else {
                // input never used, and nothing else reaches y
                values.push(None);
            }
        }
    }
    Ok(InfoDensityTable {
        num_outputs: w.num_outputs(),
        values,
        input_dist: px.clone(),
        output_marginal: py,
    })
}

/// `I(px, W)` in bits.
pub fn mutual_information(px: &Dist, w: &Dmc) -> Result<f64> {
    let table = info_density_table(px, w)?;
    let mut total = 0.0;
    for (x, row) in w.rows().enumerate() {
        if px[x] == 0.0 {
            continue;
        }
        for (y, &wy) in row.iter().enumerate() {
            if let Some(i) = table.get(x, y) {
                total += px[x] * wy * i;
            }
        }
    }
    Ok(total.max(0.0))
}

/// `D(p ‖ q)` in nats; `+inf` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// Relative entropy of a channel row against an output distribution, in bits.
pub(crate) fn row_divergence_bits(row: &[f64], q: &[f64]) -> f64 {
    row.iter()
        .zip(q)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &qy)| {
            if qy == 0.0 {
                f64::INFINITY
            } else {
                w * (w / qy).log2()
            }
        })
        .sum()
}

/// `(1/2) Σ |p − q|`.
pub fn total_variation(p: &Dist, q: &Dist) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let sum: f64 = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * sum).min(1.0))
}

/// Joint distribution `px(x) W(y|x)` flattened row-major.
pub fn joint_distribution(px: &Dist, w: &Dmc) -> Result<Dist> {
    w.check_input_dist(px)?;
    let mass = w
        .rows()
        .enumerate()
        .flat_map(|(x, row)| row.iter().map(move |&wy| px[x] * wy))
        .collect::<Vec<_>>();
    let sum: f64 = mass.iter().sum();
    Ok(Dist {
        mass: normalize(mass, sum),
    })
}
