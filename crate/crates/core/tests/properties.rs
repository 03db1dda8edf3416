use fblearn_core::achievability::{max_rate_achievable, rcu_learning_bound, rcu_learning_term, BoundParams};
use fblearn_core::capacity::capacity_dispersion;
use fblearn_core::channel::info_density_table;
use fblearn_core::converse::converse_bound;
use fblearn_core::density::{expect_min_one, info_density_pmf, np_beta, self_convolve};
use fblearn_core::{Dist, Dmc, TrainingBudget};
use proptest::prelude::*;

fn binary_channel() -> impl Strategy<Value = Dmc> {
    (0.02f64..0.98, 0.02f64..0.98).prop_map(|(a, b)| Dmc::new(&[vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap())
}

fn binary_input() -> impl Strategy<Value = Dist> {
    (0.05f64..0.95).prop_map(|p| Dist::new(vec![p, 1.0 - p]).unwrap())
}

/// Every `(x^k, y^k)` outcome with its information density, P- and Q-mass.
fn outcomes(w: &Dmc, px: &Dist, k: usize) -> Vec<(f64, f64, f64)> {
    let table = info_density_table(px, w).unwrap();
    let q = table.output_marginal().clone();
    let mut out = Vec::new();
    for xs in 0..1usize << k {
        for ys in 0..1usize << k {
            let (mut p, mut qq, mut i) = (1.0, 1.0, 0.0);
            for j in 0..k {
                let (x, y) = (xs >> j & 1, ys >> j & 1);
                p *= px[x] * w.prob(x, y);
                qq *= px[x] * q[y];
                if let Some(v) = table.get(x, y) {
                    i += v;
                }
            }
            if p > 0.0 {
                out.push((i, p, qq));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rcu_term_is_monotone_in_rate(w in binary_channel(), px in binary_input(), n in 1usize..24, r1 in 0.0f64..1.2, r2 in 0.0f64..1.2) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let n0 = n.div_ceil(2);
        let a = rcu_learning_term(&w, &px, &BoundParams::new(n, lo, 0.1).unwrap(), n0).unwrap();
        let b = rcu_learning_term(&w, &px, &BoundParams::new(n, hi, 0.1).unwrap(), n0).unwrap();
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn bound_is_clamped_and_minimal(w in binary_channel(), px in binary_input(), n in 1usize..40, rate in 0.0f64..1.0, m in 10u64..100_000, forced in 1usize..40) {
        let p = BoundParams::new(n, rate, 0.1).unwrap().with_training(TrainingBudget::new(m, 0.05).unwrap());
        let r = rcu_learning_bound(&w, &px, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.error_upper_bound));
        prop_assert!(r.raw_sum >= 0.0 && r.raw_sum <= 2.0);
        prop_assert_eq!(r.error_upper_bound, r.raw_sum.clamp(0.0, 1.0));
        let n0 = forced.min(n);
        let f = rcu_learning_bound(&w, &px, &p.with_n0(n0).unwrap()).unwrap();
        prop_assert!(r.error_upper_bound <= f.error_upper_bound);
    }

    #[test]
    fn enumeration_agrees(w in binary_channel(), px in binary_input(), k in 1usize..4, log_a in -3.0f64..4.0, alpha in 0.01f64..1.0) {
        let pmf = self_convolve(&info_density_pmf(&w, &px).unwrap(), k).unwrap();
        let mut all = outcomes(&w, &px, k);
        let rcu: f64 = all.iter().map(|(i, p, _)| p * (log_a - i).min(0.0).exp2()).sum();
        prop_assert!((expect_min_one(&pmf, log_a) - rcu).abs() < 1e-12);
        // Neyman–Pearson on the ungrouped outcomes, largest ratio first
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (mut pa, mut qa, mut beta) = (0.0, 0.0, None);
        let mut idx = 0;
        while idx < all.len() {
            // equal ratios form one block so the randomization is shared
            let mut end = idx;
            let (mut bp, mut bq) = (0.0, 0.0);
            while end < all.len() && (all[end].0 - all[idx].0).abs() <= 1e-11 * (1.0 + all[idx].0.abs()) {
                bp += all[end].1;
                bq += all[end].2;
                end += 1;
            }
            if pa + bp >= alpha {
                beta = Some(qa + (alpha - pa) / bp * bq);
                break;
            }
            pa += bp;
            qa += bq;
            idx = end;
        }
        let beta = beta.unwrap_or(qa);
        prop_assert!((np_beta(&pmf, alpha).unwrap().beta - beta).abs() < 1e-12);
    }

    #[test]
    fn converse_is_monotone_in_epsilon(w in binary_channel(), n in 1usize..30, e1 in 0.001f64..0.9, e2 in 0.001f64..0.9) {
        let qy = capacity_dispersion(&w).unwrap().caod;
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = converse_bound(&w, n, lo, None, &qy).unwrap();
        let b = converse_bound(&w, n, hi, None, &qy).unwrap();
        prop_assert!(a.log2_m_upper <= b.log2_m_upper + 1e-12);
        prop_assert_eq!(a.best_composition.iter().sum::<usize>(), n);
    }

    #[test]
    fn achievability_never_exceeds_converse(w in binary_channel(), n in 1usize..40, eps in 0.01f64..0.4) {
        let cd = capacity_dispersion(&w).unwrap();
        let ach = max_rate_achievable(&w, &cd.caid_witness, n, eps, None).unwrap();
        let conv = converse_bound(&w, n, eps, None, &cd.caod).unwrap();
        prop_assert!(ach <= conv.rate(n) + 1e-9, "{} > {}", ach, conv.rate(n));
    }
}
