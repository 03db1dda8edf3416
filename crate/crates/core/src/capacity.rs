//! Capacity, the capacity-achieving output distribution, and the extremal
//! dispersion over the polytope of capacity-achieving inputs.

use crate::channel::{mutual_information, output_marginal, row_divergence_bits, Dist, Dmc};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_SUPPORT_SLACK: f64 = 1e-7;
const SLACK_RETRIES: usize = 3;
const LP_FEASIBILITY: f64 = 1e-8;

/// Output of [`blahut_arimoto`].
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    /// Certified lower bound `I(caid_witness, W)`, bits.
    pub capacity: f64,
    /// `max_x D(W(·|x) ‖ caod)`, bits.
    pub upper_bound: f64,
    pub caid_witness: Dist,
    pub caod: Dist,
    pub iterations: usize,
}

/// Alternating-maximization state; each [`step`](Self::step) multiplies the
/// input weights by `2^{μ D(W(·|x) ‖ q)}` and renormalizes.
///
/// `μ = 1` is the classical update. The gain doubles after every accepted
/// step and halves when a step would widen the bracket, which keeps nearly
/// useless channels from crawling. Near such optima the mutual information
/// moves by less than its rounding error, so the bracket width is the
/// acceptance signal.
#[derive(Debug, Clone)]
pub struct BlahutArimoto<'a> {
    w: &'a Dmc,
    px: Vec<f64>,
    divergences: Vec<f64>,
    caod: Vec<f64>,
    gain: f64,
}

const MAX_GAIN: f64 = 1e12;

/// Lower and upper capacity bounds at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl<'a> BlahutArimoto<'a> {
    /// Starts from the uniform input.
    pub fn new(w: &'a Dmc) -> Self {
        let mut state = Self {
            w,
            px: vec![1.0 / w.num_inputs() as f64; w.num_inputs()],
            divergences: Vec::new(),
            caod: Vec::new(),
            gain: 1.0,
        };
        state.refresh();
        state
    }

    fn refresh(&mut self) {
        let px = Dist::new(self.px.clone()).expect("iterate stays normalized");
        self.caod = output_marginal(&px, self.w).expect("dimensions agree").as_slice().to_vec();
        self.divergences = self
            .w
            .rows()
            .map(|row| row_divergence_bits(row, &self.caod))
            .collect();
    }

    pub fn bracket(&self) -> Bracket {
        let lower: f64 = self
            .px
            .iter()
            .zip(&self.divergences)
            .filter(|(&p, _)| p > 0.0)
            .map(|(p, d)| p * d)
            .sum();
        let upper = self.divergences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Bracket {
            lower: lower.max(0.0),
            upper: upper.max(0.0),
        }
    }

    pub fn step(&mut self) -> Bracket {
        let before = self.bracket();
        let (px, divergences, caod) = (self.px.clone(), self.divergences.clone(), self.caod.clone());
        loop {
            // shift by the max exponent to keep 2^d finite
            for (p, d) in self.px.iter_mut().zip(&divergences) {
                *p *= (self.gain * (d - before.upper)).exp2();
            }
            let s: f64 = self.px.iter().sum();
            self.px.iter_mut().for_each(|p| *p /= s);
            self.refresh();
            let after = self.bracket();
            if self.gain == 1.0 || after.upper - after.lower <= before.upper - before.lower {
                self.gain = (self.gain * 2.0).min(MAX_GAIN);
                return after;
            }
            self.gain = (self.gain / 2.0).max(1.0);
            self.px.clone_from(&px);
            self.divergences.clone_from(&divergences);
            self.caod.clone_from(&caod);
        }
    }

    pub fn input(&self) -> Dist {
        Dist::new(self.px.clone()).expect("normalized")
    }

    pub fn output(&self) -> Dist {
        Dist::new(self.caod.clone()).expect("normalized")
    }
}

/// Capacity of `w` with a certified bracket no wider than `tol`.
pub fn blahut_arimoto(w: &Dmc, tol: f64, max_iter: usize) -> Result<CapacityEstimate> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let mut ba = BlahutArimoto::new(w);
    let mut bracket = ba.bracket();
    let mut iterations = 0;
    while bracket.upper - bracket.lower > tol {
        if iterations == max_iter {
            return Err(Error::NotConverged {
                gap: bracket.upper - bracket.lower,
                iterations,
            });
        }
        bracket = ba.step();
        iterations += 1;
    }
    let caid_witness = ba.input();
    let capacity = mutual_information(&caid_witness, w)?;
    Ok(CapacityEstimate {
        capacity,
        upper_bound: bracket.upper.max(capacity),
        caid_witness,
        caod: ba.output(),
        iterations,
    })
}

/// Inputs whose divergence to `caod` is within `slack` of capacity. Every
/// capacity-achieving input distribution is supported inside this set.
pub fn caid_support(w: &Dmc, caod: &Dist, capacity: f64, slack: f64) -> Vec<usize> {
    w.rows()
        .enumerate()
        .filter(|(_, row)| row_divergence_bits(row, caod.as_slice()) >= capacity - slack)
        .map(|(x, _)| x)
        .collect()
}

/// `Var_{Y~W(·|x)}[log2(W(Y|x) / caod(Y))]` for a single input.
pub fn row_dispersion(row: &[f64], caod: &[f64]) -> Result<f64> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (y, (&wy, &q)) in row.iter().zip(caod).enumerate() {
        if wy == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::SupportViolation { output: y });
        }
        let i = (wy / q).log2();
        mean += wy * i;
        second += wy * i * i;
    }
    Ok((second - mean * mean).max(0.0))
}

/// Conditional information variance `Σ_x px(x) Var[i(x, Y) | X = x]`, bits².
pub fn conditional_dispersion(w: &Dmc, px: &Dist, caod: &Dist) -> Result<f64> {
    w.check_input_dist(px)?;
    w.check_output_dist(caod)?;
    let mut total = 0.0;
    for (x, row) in w.rows().enumerate() {
        if px[x] > 0.0 {
            total += px[x] * row_dispersion(row, caod.as_slice())?;
        }
    }
    Ok(total)
}

/// Capacity together with the extremal dispersions over all
/// capacity-achieving inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityDispersion {
    pub capacity: f64,
    pub caod: Dist,
    pub caid_witness: Dist,
    pub dispersion_min: f64,
    pub dispersion_max: f64,
    pub unique_caid: bool,
    /// Input distribution attaining `dispersion_min`.
    pub caid_min: Dist,
    /// Input distribution attaining `dispersion_max`.
    pub caid_max: Dist,
}

impl CapacityDispersion {
    /// Minimum dispersion below one half, maximum above.
    pub fn dispersion_for(&self, epsilon: f64) -> Result<f64> {
        check_epsilon(epsilon)?;
        Ok(if epsilon < 0.5 {
            self.dispersion_min
        } else {
            self.dispersion_max
        })
    }

    /// Capacity-achieving input attaining [`dispersion_for`](Self::dispersion_for).
    pub fn caid_for(&self, epsilon: f64) -> Result<&Dist> {
        check_epsilon(epsilon)?;
        Ok(if epsilon < 0.5 {
            &self.caid_min
        } else {
            &self.caid_max
        })
    }

    /// A dispersion of zero hints at a degenerate or exotic channel.
    pub fn zero_dispersion_warning(&self) -> bool {
        self.dispersion_min <= 0.0
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 && epsilon != 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

/// Capacity and dispersion extremes, validating `epsilon` as a side check.
pub fn dispersion_extremal(w: &Dmc, epsilon: f64) -> Result<CapacityDispersion> {
    check_epsilon(epsilon)?;
    capacity_dispersion(w)
}

/// Solves the min and max dispersion LPs over the capacity-achieving inputs.
pub fn capacity_dispersion(w: &Dmc) -> Result<CapacityDispersion> {
    let est = blahut_arimoto(w, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    let mut slack = DEFAULT_SUPPORT_SLACK;
    for _ in 0..=SLACK_RETRIES {
        let support = caid_support(w, &est.caod, est.capacity, slack);
        if let Some(cd) = solve_polytope(w, &est, &support)? {
            return Ok(cd);
        }
        slack *= 10.0;
    }
    Err(Error::InfeasibleLp)
}

fn solve_polytope(w: &Dmc, est: &CapacityEstimate, support: &[usize]) -> Result<Option<CapacityDispersion>> {
    let caod = est.caod.as_slice();
    let v: Vec<f64> = support
        .iter()
        .map(|&x| row_dispersion(w.row(x), caod))
        .collect::<Result<_>>()?;
    let mut constraints: Vec<Vec<f64>> = (0..w.num_outputs())
        .map(|y| support.iter().map(|&x| w.prob(x, y)).collect())
        .collect();
    constraints.push(vec![1.0; support.len()]);
    let mut rhs = caod.to_vec();
    rhs.push(1.0);

    let solve = |objective: Vec<f64>| {
        LinearProgram {
            objective,
            constraints: constraints.clone(),
            rhs: rhs.clone(),
        }
        .solve(LP_FEASIBILITY)
    };
    let lift = |x: &[f64]| {
        let mut full = vec![0.0; w.num_inputs()];
        for (&i, &p) in support.iter().zip(x) {
            full[i] = p;
        }
        let s: f64 = full.iter().sum();
        Dist::new(full.iter().map(|p| p / s).collect())
    };

    let (min_x, min_v) = match solve(v.clone()) {
        LpOutcome::Optimal { x, value } => (x, value),
        _ => return Ok(None),
    };
    let (max_x, max_v) = match solve(v.iter().map(|c| -c).collect()) {
        LpOutcome::Optimal { x, value } => (x, -value),
        _ => return Ok(None),
    };

    // the polytope is a single point iff every coordinate is pinned
    let mut unique = true;
    for j in 0..support.len() {
        let mut e = vec![0.0; support.len()];
        e[j] = 1.0;
        let lo = solve(e.clone());
        e[j] = -1.0;
        let hi = solve(e);
        if let (LpOutcome::Optimal { value: a, .. }, LpOutcome::Optimal { value: b, .. }) = (lo, hi) {
            if -b - a > 1e-7 {
                unique = false;
                break;
            }
        }
    }

    Ok(Some(CapacityDispersion {
        capacity: est.capacity,
        caod: est.caod.clone(),
        caid_witness: est.caid_witness.clone(),
        dispersion_min: min_v.max(0.0),
        dispersion_max: max_v.max(min_v).max(0.0),
        unique_caid: unique,
        caid_min: lift(&min_x)?,
        caid_max: lift(&max_x)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn bsc_capacity_closed_form() {
        let est = blahut_arimoto(&Dmc::bsc(0.11), 1e-10, 100_000).unwrap();
        assert!((est.capacity - (1.0 - h2(0.11))).abs() < 1e-10);
        assert!((est.caid_witness[0] - 0.5).abs() < 1e-12);
        assert!(est.upper_bound - est.capacity <= 1e-10);
    }

    #[test]
    fn degenerate_capacities() {
        let est = blahut_arimoto(&Dmc::uniform(3, 2), 1e-10, 10).unwrap();
        assert!(est.capacity.abs() < 1e-12);
        let est = blahut_arimoto(&Dmc::identity(5), 1e-10, 10).unwrap();
        assert!((est.capacity - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn every_iterate_brackets_capacity() {
        let w = Dmc::new(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]]).unwrap();
        let est = blahut_arimoto(&w, 1e-12, 100_000).unwrap();
        let mut ba = BlahutArimoto::new(&w);
        for _ in 0..500 {
            let b = ba.step();
            assert!(b.lower <= est.upper_bound + 1e-15);
            assert!(b.upper >= est.capacity - 1e-15);
        }
        assert!(est.upper_bound - est.capacity <= 1e-12);
    }

    #[test]
    fn nearly_useless_channel_converges() {
        let (a, b) = (0.931_992_484_959_406_5, 0.931_643_249_539_889_6);
        let w = Dmc::new(&[vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
        let est = blahut_arimoto(&w, 1e-10, 100_000).unwrap();
        assert!(est.iterations < 1_000);
        // binary-input capacity by golden-section search on I(p)
        let info = |p: f64| mutual_information(&Dist::new(vec![p, 1.0 - p]).unwrap(), &w).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if info(c) < info(d) {
                lo = c;
            } else {
                hi = d;
            }
        }
        assert!((est.capacity - info(0.5 * (lo + hi))).abs() < 1e-12);
    }

    #[test]
    fn not_converged_is_reported() {
        let w = Dmc::new(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]]).unwrap();
        assert!(matches!(blahut_arimoto(&w, 1e-14, 2), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn support_examples() {
        for w in [Dmc::bsc(0.11), Dmc::identity(2)] {
            let est = blahut_arimoto(&w, 1e-10, 1000).unwrap();
            assert_eq!(caid_support(&w, &est.caod, est.capacity, 1e-7), vec![0, 1]);
        }
        let w = Dmc::new(&[vec![0.8, 0.2, 0.0], vec![0.0, 0.3, 0.7], vec![0.8, 0.2, 0.0]]).unwrap();
        let est = blahut_arimoto(&w, 1e-10, 100_000).unwrap();
        let s = caid_support(&w, &est.caod, est.capacity, 1e-7);
        assert!(s.contains(&0) && s.contains(&2));
    }

    #[test]
    fn dispersion_closed_forms() {
        let p: f64 = 0.11;
        let closed = p * (1.0 - p) * ((1.0 - p) / p).log2().powi(2);
        let caod = Dist::uniform(2);
        // direct summation over the four letters
        let w = Dmc::bsc(p);
        let mut direct = 0.0;
        for x in 0..2 {
            let mean: f64 = (0..2).map(|y| w.prob(x, y) * (w.prob(x, y) / 0.5).log2()).sum();
            direct += 0.5 * (0..2).map(|y| w.prob(x, y) * ((w.prob(x, y) / 0.5).log2() - mean).powi(2)).sum::<f64>();
        }
        assert!((closed - direct).abs() < 1e-12);
        let v = conditional_dispersion(&w, &Dist::uniform(2), &caod).unwrap();
        assert!((v - closed).abs() < 1e-12);
        assert!((v - 0.890_701_701_397_556).abs() < 1e-12);
        let v1 = conditional_dispersion(&w, &Dist::point(2, 1), &caod).unwrap();
        assert!((v1 - closed).abs() < 1e-12);
        assert_eq!(conditional_dispersion(&Dmc::identity(3), &Dist::uniform(3), &Dist::uniform(3)).unwrap(), 0.0);
        assert!(matches!(
            conditional_dispersion(&w, &Dist::uniform(2), &Dist::point(2, 0)),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn bsc_extremal_dispersion() {
        let p: f64 = 0.11;
        let closed = p * (1.0 - p) * ((1.0 - p) / p).log2().powi(2);
        let cd = dispersion_extremal(&Dmc::bsc(p), 1e-3).unwrap();
        assert!(cd.unique_caid);
        assert!((cd.dispersion_min - closed).abs() < 1e-9);
        assert!((cd.dispersion_max - closed).abs() < 1e-9);
        assert!((cd.dispersion_for(0.9).unwrap() - cd.dispersion_for(0.1).unwrap()).abs() < 1e-12);
        assert!(dispersion_extremal(&Dmc::bsc(0.11), 0.5).is_err());
        assert!(cd.dispersion_for(0.5).is_err());
    }

    #[test]
    fn generic_channel_has_unique_caid() {
        let w = Dmc::new(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]]).unwrap();
        let cd = capacity_dispersion(&w).unwrap();
        assert!(cd.unique_caid);
        let v = conditional_dispersion(&w, &cd.caid_witness, &cd.caod).unwrap();
        assert!((cd.dispersion_min - v).abs() < 1e-6);
        assert!((cd.dispersion_max - v).abs() < 1e-6);
    }
}
