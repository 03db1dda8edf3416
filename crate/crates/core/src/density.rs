//! Exact distributions of sums of i.i.d. per-letter log-likelihood values.
//!
//! A [`SparsePmf`] carries, for each distinct value, its probability under two
//! measures at once: `P` (the forward measure the value was drawn under) and
//! `Q` (the alternative in a hypothesis test). Values are base-2 logarithms
//! of `dP/dQ`-type ratios, so for atoms built by [`letter_pmf`] and
//! [`row_llr_pmf`] the identity `q_mass = p_mass · 2^(−value)` holds exactly in
//! real arithmetic and is preserved by convolution.
//!
//! Q-masses are only tracked on the P-support. Outcomes of zero P-probability
//! are never accepted by an optimal test, so dropping them leaves every
//! functional in this module unchanged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::channel::{output_marginal, Dist, Dmc};
use crate::error::{Error, Result};

/// Default cap on the number of atoms a pmf may hold.
pub const DEFAULT_ATOM_CAP: usize = 5_000_000;

/// Pairwise-sum work allowed per atom of cap in one convolution.
const WORK_PER_ATOM: usize = 40;

const GROUP_RELATIVE: f64 = 1e-11;
const GROUP_ABSOLUTE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub p_mass: f64,
    pub q_mass: f64,
}

/// Finite pmf over real values with masses under two measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePmf {
    atoms: Vec<Atom>,
}

fn same_value(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d <= GROUP_ABSOLUTE || d <= GROUP_RELATIVE * a.abs().max(b.abs())
}

/// Appends `atom` to a value-sorted list, merging into the last group when
/// close enough. The group value is the P-weighted mean of its members.
fn push_grouped(out: &mut Vec<Atom>, anchor: &mut f64, atom: Atom) {
    if let Some(last) = out.last_mut() {
        if same_value(*anchor, atom.value) {
            let p = last.p_mass + atom.p_mass;
            if p > 0.0 {
                // interpolation form stays between the two values even when
                // the masses are subnormal
                last.value += (atom.value - last.value) * (atom.p_mass / p);
            }
            last.p_mass = p;
            last.q_mass += atom.q_mass;
            return;
        }
    }
    *anchor = atom.value;
    out.push(atom);
}

impl SparsePmf {
    /// Sorts and groups arbitrary atoms. Atoms with zero P-mass are dropped.
    pub fn from_atoms(mut atoms: Vec<Atom>) -> Self {
        atoms.retain(|a| a.p_mass > 0.0);
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut out = Vec::with_capacity(atoms.len());
        let mut anchor = f64::NAN;
        for a in atoms {
            push_grouped(&mut out, &mut anchor, a);
        }
        Self { atoms: out }
    }

    /// Single atom of full mass under both measures' natural pairing.
    pub fn point(value: f64, p_mass: f64, q_mass: f64) -> Self {
        Self {
            atoms: vec![Atom {
                value,
                p_mass,
                q_mass,
            }],
        }
    }

    /// Atoms in increasing value order.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_p(&self) -> f64 {
        self.atoms.iter().map(|a| a.p_mass).sum()
    }

    pub fn total_q(&self) -> f64 {
        self.atoms.iter().map(|a| a.q_mass).sum()
    }

    pub fn max_value(&self) -> Option<f64> {
        self.atoms.last().map(|a| a.value)
    }

    /// Mean under `P`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.p_mass * a.value).sum::<f64>() / self.total_p()
    }

    /// Variance under `P`.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.atoms
            .iter()
            .map(|a| a.p_mass * (a.value - mu).powi(2))
            .sum::<f64>()
            / self.total_p()
    }
}

/// Per-letter information density with dual masses.
///
/// Atom `(x, y)` has value `log2(W(y|x) / qy(y))`, P-mass `px(x) W(y|x)` and
/// Q-mass `px(x) qy(y)`.
pub fn letter_pmf(w: &Dmc, px: &Dist, qy: &Dist) -> Result<SparsePmf> {
    w.check_input_dist(px)?;
    w.check_output_dist(qy)?;
    let mut atoms = Vec::with_capacity(w.alphabet_product());
    for (x, row) in w.rows().enumerate() {
        if px[x] == 0.0 {
            continue;
        }
        for (y, &wy) in row.iter().enumerate() {
            if wy == 0.0 {
                continue;
            }
            if qy[y] == 0.0 {
                return Err(Error::SupportViolation { output: y });
            }
            atoms.push(Atom {
                value: (wy / qy[y]).log2(),
                p_mass: px[x] * wy,
                q_mass: px[x] * qy[y],
            });
        }
    }
    Ok(SparsePmf::from_atoms(atoms))
}

/// [`letter_pmf`] against the output marginal of `px` through `w`.
pub fn info_density_pmf(w: &Dmc, px: &Dist) -> Result<SparsePmf> {
    let py = output_marginal(px, w)?;
    letter_pmf(w, px, &py)
}

/// Log-likelihood ratio of row `x` against `qy`: value `log2(W(y|x)/qy(y))`,
/// P-mass `W(y|x)`, Q-mass `qy(y)`.
pub fn row_llr_pmf(w: &Dmc, x: usize, qy: &Dist) -> Result<SparsePmf> {
    letter_pmf(w, &Dist::point(w.num_inputs(), x), qy)
}

#[derive(PartialEq)]
struct Cursor {
    value: f64,
    row: usize,
    col: usize,
}

impl Eq for Cursor {}

impl Ord for Cursor {
    // reversed: BinaryHeap is a max-heap and we pop smallest first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.row.cmp(&self.row))
    }
}

impl PartialOrd for Cursor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distribution of the sum of independent draws from `a` and `b`, under both
/// measures. Output order and grouping are fully deterministic.
pub fn convolve(a: &SparsePmf, b: &SparsePmf, cap: usize) -> Result<SparsePmf> {
    // rows = shorter side keeps the heap small
    let (rows, cols) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let work = rows.len().saturating_mul(cols.len());
    if work > cap.saturating_mul(WORK_PER_ATOM) {
        return Err(Error::AtomBudgetExceeded { atoms: work, cap });
    }
    let mut heap: BinaryHeap<Cursor> = rows
        .atoms
        .iter()
        .enumerate()
        .filter(|_| !cols.is_empty())
        .map(|(row, r)| Cursor {
            value: r.value + cols.atoms[0].value,
            row,
            col: 0,
        })
        .collect();
    let mut out: Vec<Atom> = Vec::new();
    let mut anchor = f64::NAN;
    while let Some(Cursor { value, row, col }) = heap.pop() {
        let (r, c) = (rows.atoms[row], cols.atoms[col]);
        push_grouped(
            &mut out,
            &mut anchor,
            Atom {
                value,
                p_mass: r.p_mass * c.p_mass,
                q_mass: r.q_mass * c.q_mass,
            },
        );
        if out.len() > cap {
            return Err(Error::AtomBudgetExceeded {
                atoms: out.len(),
                cap,
            });
        }
        if col + 1 < cols.len() {
            heap.push(Cursor {
                value: r.value + cols.atoms[col + 1].value,
                row,
                col: col + 1,
            });
        }
    }
    Ok(SparsePmf { atoms: out })
}

/// `n`-fold convolution by repeated squaring, with the default atom cap.
pub fn self_convolve(pmf: &SparsePmf, n: usize) -> Result<SparsePmf> {
    self_convolve_capped(pmf, n, DEFAULT_ATOM_CAP)
}

pub fn self_convolve_capped(pmf: &SparsePmf, n: usize, cap: usize) -> Result<SparsePmf> {
    if n == 0 {
        return Err(Error::InvalidParameter("convolution power must be >= 1".into()));
    }
    let mut acc: Option<SparsePmf> = None;
    let mut base = pmf.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => convolve(&a, &base, cap)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = convolve(&base, &base, cap)?;
    }
    Ok(acc.expect("n >= 1"))
}

/// `E_P[min{1, 2^(log_a − S)}]`.
pub fn expect_min_one(pmf: &SparsePmf, log_a: f64) -> f64 {
    if log_a == f64::NEG_INFINITY {
        return 0.0;
    }
    let total: f64 = pmf
        .atoms
        .iter()
        .map(|a| a.p_mass * (log_a - a.value).min(0.0).exp2())
        .sum();
    total.clamp(0.0, 1.0)
}

/// Optimal randomized test for a given P-acceptance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaResult {
    /// Minimum Q-probability of acceptance.
    pub beta: f64,
    /// Values above this are accepted outright.
    pub threshold: f64,
    /// Acceptance probability of the atom at `threshold`.
    pub randomization: f64,
}

/// Neyman–Pearson `β_α(P, Q)` for a pmf of `log2(dP/dQ)`.
///
/// Accepts atoms in decreasing likelihood-ratio order until the P-mass reaches
/// `alpha`, randomizing exactly on the boundary atom.
pub fn np_beta(pmf: &SparsePmf, alpha: f64) -> Result<BetaResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 0.0 || pmf.is_empty() {
        return Ok(BetaResult {
            beta: 0.0,
            threshold: f64::INFINITY,
            randomization: 0.0,
        });
    }
    let mut p_acc = 0.0;
    let mut q_acc = 0.0;
    for atom in pmf.atoms.iter().rev() {
        if p_acc + atom.p_mass >= alpha {
            let r = ((alpha - p_acc) / atom.p_mass).clamp(0.0, 1.0);
            return Ok(BetaResult {
                beta: (q_acc + r * atom.q_mass).clamp(0.0, 1.0),
                threshold: atom.value,
                randomization: r,
            });
        }
        p_acc += atom.p_mass;
        q_acc += atom.q_mass;
    }
    // alpha above the accumulated P-mass only through rounding: accept all
    Ok(BetaResult {
        beta: q_acc.clamp(0.0, 1.0),
        threshold: pmf.atoms[0].value,
        randomization: 1.0,
    })
}

/// `log2 β_α(P, Q)`, finite even when `β` underflows.
///
/// The test is the one chosen by [`np_beta`]. Tiny results are summed in the
/// log domain from `Q = P·2^{−value}`, so atoms whose P-mass underflowed are
/// left out.
pub fn np_log2_beta(pmf: &SparsePmf, alpha: f64) -> Result<f64> {
    let b = np_beta(pmf, alpha)?;
    if b.beta >= LINEAR_BETA_FLOOR || b.threshold == f64::INFINITY {
        return Ok(b.beta.log2());
    }
    let mut terms: Vec<f64> = Vec::new();
    for atom in pmf.atoms.iter().rev() {
        if atom.p_mass <= 0.0 {
            continue;
        }
        let weight = if atom.value > b.threshold {
            1.0
        } else if atom.value == b.threshold {
            b.randomization
        } else {
            break;
        };
        if weight > 0.0 {
            terms.push((weight * atom.p_mass).log2() - atom.value);
        }
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(top + terms.iter().map(|t| (t - top).exp2()).sum::<f64>().log2())
}

/// Below this a linear `β` has lost too many digits to be trusted.
const LINEAR_BETA_FLOOR: f64 = 1e-280;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::mutual_information;

    fn two_atom() -> SparsePmf {
        info_density_pmf(&Dmc::bsc(0.1), &Dist::uniform(2)).unwrap()
    }

    #[test]
    fn letter_pmf_bsc() {
        let pmf = two_atom();
        assert_eq!(pmf.len(), 2);
        let [lo, hi] = [pmf.atoms()[0], pmf.atoms()[1]];
        assert!((lo.value - 0.2f64.log2()).abs() < 1e-12);
        assert!((hi.value - 1.8f64.log2()).abs() < 1e-12);
        assert!((lo.p_mass - 0.1).abs() < 1e-15 && (hi.p_mass - 0.9).abs() < 1e-15);
        assert!((lo.q_mass - 0.5).abs() < 1e-15 && (hi.q_mass - 0.5).abs() < 1e-15);
    }

    #[test]
    fn letter_pmf_identity_and_support() {
        let pmf = letter_pmf(&Dmc::identity(2), &Dist::uniform(2), &Dist::uniform(2)).unwrap();
        assert_eq!(
            pmf.atoms(),
            &[Atom {
                value: 1.0,
                p_mass: 1.0,
                q_mass: 0.5
            }]
        );
        let qy = Dist::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(
            letter_pmf(&Dmc::bsc(0.1), &Dist::uniform(2), &qy),
            Err(Error::SupportViolation { output: 1 })
        );
    }

    #[test]
    fn two_point_square() {
        let sq = self_convolve(&two_atom(), 2).unwrap();
        let expect = [(-4.643_856_189_774_724, 0.01), (-1.473_931_188_332_412, 0.18), (1.695_993_813_109_9, 0.81)];
        assert_eq!(sq.len(), 3);
        for (a, (v, p)) in sq.atoms().iter().zip(expect) {
            assert!((a.value - v).abs() < 1e-12, "{} vs {v}", a.value);
            assert!((a.p_mass - p).abs() < 1e-15);
        }
        assert_eq!(self_convolve(&two_atom(), 1).unwrap(), two_atom());
        assert!(self_convolve(&two_atom(), 0).is_err());
    }

    #[test]
    fn moments_add_under_convolution() {
        let w = Dmc::bsc(0.11);
        let px = Dist::uniform(2);
        let letter = info_density_pmf(&w, &px).unwrap();
        let i = mutual_information(&px, &w).unwrap();
        let s = self_convolve(&letter, 20).unwrap();
        assert!((s.total_p() - 1.0).abs() < 1e-9);
        assert!((s.mean() - 20.0 * i).abs() < 1e-9);
        assert!((s.variance() - 20.0 * letter.variance()).abs() < 1e-9);

        let z = info_density_pmf(&Dmc::z_channel(0.3), &Dist::new(vec![0.6, 0.4]).unwrap()).unwrap();
        for n in [3, 7, 16, 33] {
            let s = self_convolve(&z, n).unwrap();
            assert!((s.mean() - n as f64 * z.mean()).abs() < 1e-9);
            assert!((s.variance() - n as f64 * z.variance()).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_mass_identity_survives_convolution() {
        let pmf = info_density_pmf(&Dmc::z_channel(0.25), &Dist::new(vec![0.3, 0.7]).unwrap()).unwrap();
        let s = self_convolve(&pmf, 9).unwrap();
        for a in s.atoms() {
            assert!((a.q_mass - a.p_mass * (-a.value).exp2()).abs() < 1e-12);
        }
    }

    #[test]
    fn atom_cap_is_enforced() {
        let w = Dmc::new(&[vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]]).unwrap();
        let pmf = info_density_pmf(&w, &Dist::new(vec![0.2, 0.3, 0.5]).unwrap()).unwrap();
        assert!(matches!(
            self_convolve_capped(&pmf, 40, 1000),
            Err(Error::AtomBudgetExceeded { cap: 1000, .. })
        ));
    }

    #[test]
    fn expect_min_one_examples() {
        let pmf = two_atom();
        assert_eq!(expect_min_one(&pmf, pmf.max_value().unwrap()), 1.0);
        assert_eq!(expect_min_one(&pmf, f64::NEG_INFINITY), 0.0);
        assert!(expect_min_one(&pmf, -1e3) < 1e-290);
        assert_eq!(expect_min_one(&SparsePmf::point(1.0, 1.0, 0.5), 0.0), 0.5);
    }

    #[test]
    fn np_beta_examples() {
        let pmf = two_atom();
        assert_eq!(np_beta(&pmf, 0.0).unwrap().beta, 0.0);
        assert!(np_beta(&pmf, 1.5).is_err());

        // identical measures: the beta function is the diagonal
        let same = SparsePmf::from_atoms(vec![Atom {
            value: 0.0,
            p_mass: 1.0,
            q_mass: 1.0,
        }]);
        for alpha in [0.1, 0.37, 0.9, 1.0] {
            assert!((np_beta(&same, alpha).unwrap().beta - alpha).abs() < 1e-15);
        }

        // one letter, P = (0.9, 0.1) vs Q uniform
        let llr = row_llr_pmf(&Dmc::bsc(0.1), 0, &Dist::uniform(2)).unwrap();
        let r = np_beta(&llr, 0.9).unwrap();
        assert!((r.beta - 0.5).abs() < 1e-15);
        assert!((r.randomization - 1.0).abs() < 1e-12);
        // brute force over randomized tests on two outcomes: phi in [0,1]^2 grid
        let (p, q) = ([0.9, 0.1], [0.5, 0.5]);
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let phi = [i as f64 / 100.0, j as f64 / 100.0];
                if p[0] * phi[0] + p[1] * phi[1] >= 0.9 - 1e-12 {
                    best = best.min(q[0] * phi[0] + q[1] * phi[1]);
                }
            }
        }
        assert!((best - r.beta).abs() < 1e-12);
    }

    #[test]
    fn np_beta_full_acceptance_at_one() {
        let llr = row_llr_pmf(&Dmc::z_channel(0.2), 1, &Dist::new(vec![0.6, 0.4]).unwrap()).unwrap();
        let b = np_beta(&llr, 1.0).unwrap();
        assert!((b.beta - 1.0).abs() < 1e-15);
        let llr = row_llr_pmf(&Dmc::z_channel(0.2), 0, &Dist::new(vec![0.6, 0.4]).unwrap()).unwrap();
        assert!((np_beta(&llr, 1.0).unwrap().beta - 0.6).abs() < 1e-15);
    }

    #[test]
    fn np_beta_is_monotone_and_convex() {
        let pmf = self_convolve(
            &info_density_pmf(&Dmc::z_channel(0.3), &Dist::new(vec![0.55, 0.45]).unwrap()).unwrap(),
            6,
        )
        .unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let betas: Vec<f64> = grid.iter().map(|&a| np_beta(&pmf, a).unwrap().beta).collect();
        for w in betas.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        for w in betas.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn underflowing_masses_keep_lattice_grouped() {
        // P-masses of the extreme sums underflow well before n = 4000
        let letter = row_llr_pmf(&Dmc::bsc(0.11), 0, &Dist::uniform(2)).unwrap();
        let pmf = self_convolve(&letter, 4000).unwrap();
        assert_eq!(pmf.len(), 4001);
        let (a, b) = (letter.atoms()[0].value, letter.atoms()[1].value);
        for (j, atom) in pmf.atoms().iter().enumerate() {
            let want = 4000.0 * a + j as f64 * (b - a);
            assert!((atom.value - want).abs() < 1e-8 * want.abs().max(1.0), "{j}");
        }
    }

    #[test]
    fn log_beta_survives_underflow() {
        // BSC(0.11) against the uniform output: the LLR decreases in the
        // number of flips j, so beta is a binomial tail under Q
        let letter = row_llr_pmf(&Dmc::bsc(0.11), 0, &Dist::uniform(2)).unwrap();
        for n in [200usize, 1500, 4000] {
            let pmf = self_convolve(&letter, n).unwrap();
            let alpha = 0.999;
            let ln_choose = |j: usize| -> f64 { (0..j).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum() };
            let (mut p_acc, mut terms) = (0.0, Vec::new());
            for j in 0..=n {
                let ln_p = ln_choose(j) + j as f64 * 0.11f64.ln() + (n - j) as f64 * 0.89f64.ln();
                let p = ln_p.exp();
                let ln_q = ln_choose(j) - n as f64 * 2f64.ln();
                if p_acc + p >= alpha {
                    terms.push(ln_q + ((alpha - p_acc) / p).ln());
                    break;
                }
                p_acc += p;
                terms.push(ln_q);
            }
            let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let want = (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()) / 2f64.ln();
            let got = np_log2_beta(&pmf, alpha).unwrap();
            assert!((got - want).abs() < 1e-6 * want.abs(), "n = {n}: {got} vs {want}");
            if n == 200 {
                assert!((got - np_beta(&pmf, alpha).unwrap().beta.log2()).abs() < 1e-12);
            }
        }
        assert_eq!(np_log2_beta(&letter, 0.0).unwrap(), f64::NEG_INFINITY);
    }
}
