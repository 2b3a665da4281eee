use proptest::prelude::*;

use orderstat_core::marginals::Marginal;
use orderstat_core::montecarlo::{
    estimate_many, kth_max_abs, kth_min_abs, step_integral_topk, topk_abs_sum, RunConfig, Statistic,
};
use orderstat_core::stats::{wilson, Welford, Z95};
use orderstat_core::thresholds::{t_threshold, tstar_threshold, MarginalGroups, ThresholdKind};
use orderstat_core::VectorModel;

fn marginal() -> impl Strategy<Value = Marginal> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|s| Marginal::gaussian(s).unwrap()),
        (0.2f64..5.0).prop_map(|s| Marginal::laplace(s).unwrap()),
        (0.2f64..5.0).prop_map(|a| Marginal::uniform(a).unwrap()),
        (0.2f64..3.0).prop_map(|r| Marginal::shifted_exponential(r, true).unwrap()),
        (0.2f64..3.0).prop_map(|s| Marginal::half_normal_modulus(s).unwrap()),
    ]
}

fn marginals() -> impl Strategy<Value = Vec<Marginal>> {
    prop::collection::vec(marginal(), 1..12)
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(2.0), Just(-2.0), -50.0f64..50.0], 1..40)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thresholds_scale_with_the_vector(ms in marginals(), lambda in 0.1f64..10.0, frac in 0.05f64..0.95) {
        let scaled: Vec<Marginal> = ms.iter().map(|m| Marginal::scaled(m.clone(), lambda).unwrap()).collect();
        let k = frac * ms.len() as f64;
        let t = t_threshold(&ms, k).unwrap().value;
        let ts = t_threshold(&scaled, k).unwrap().value;
        prop_assert!(close(ts, lambda * t, 1e-9), "{ts} vs {}", lambda * t);
        let s = tstar_threshold(&ms, k).unwrap().value;
        let ss = tstar_threshold(&scaled, k).unwrap().value;
        prop_assert!(close(ss, lambda * s, 1e-9), "{ss} vs {}", lambda * s);
    }

    #[test]
    fn thresholds_decrease_in_the_level(ms in marginals(), a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let n = ms.len() as f64;
        let (lo, hi) = if a <= b { (a * n, b * n) } else { (b * n, a * n) };
        prop_assert!(t_threshold(&ms, lo).unwrap().value >= t_threshold(&ms, hi).unwrap().value);
        prop_assert!(tstar_threshold(&ms, lo).unwrap().value >= tstar_threshold(&ms, hi).unwrap().value);
    }

    #[test]
    fn threshold_is_the_infimum(ms in marginals(), frac in 0.05f64..0.95) {
        let groups = MarginalGroups::new(&ms).unwrap();
        let level = frac * ms.len() as f64;
        for kind in [ThresholdKind::T, ThresholdKind::TStar] {
            let r = groups.solve(kind, level).unwrap();
            prop_assert!(groups.defining_sum(kind, r.value) <= level);
            prop_assert!(groups.defining_sum(kind, r.value * (1.0 - 1e-8)) > level);
        }
    }

    #[test]
    fn tstar_at_most_t(ms in marginals(), frac in 0.05f64..0.95) {
        let k = frac * ms.len() as f64;
        prop_assert!(tstar_threshold(&ms, k).unwrap().value <= t_threshold(&ms, k).unwrap().value * (1.0 + 1e-12));
    }

    #[test]
    fn step_integral_equals_topk(x in vector(), kf in 0.0f64..1.0) {
        let k = 1 + (kf * (x.len() - 1) as f64) as usize;
        let a = step_integral_topk(&x, k).unwrap();
        let b = topk_abs_sum(&x, k).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
    }

    #[test]
    fn topk_is_sum_of_kth_maxima(x in vector(), kf in 0.0f64..1.0) {
        let k = 1 + (kf * (x.len() - 1) as f64) as usize;
        let sum: f64 = (1..=k).map(|l| kth_max_abs(&x, l).unwrap()).sum();
        prop_assert!((sum - topk_abs_sum(&x, k).unwrap()).abs() <= 1e-9 * sum.max(1.0));
    }

    #[test]
    fn topk_splits(x in vector(), f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
        let n = x.len();
        let k1 = 1 + (f1 * (n - 1) as f64) as usize;
        let k2 = 1 + (f2 * (n - 1) as f64) as usize;
        prop_assume!(k1 + k2 <= n);
        let whole = topk_abs_sum(&x, k1 + k2).unwrap();
        prop_assert!(whole <= topk_abs_sum(&x, k1).unwrap() + topk_abs_sum(&x, k2).unwrap() + 1e-9);
        prop_assert!(whole >= topk_abs_sum(&x, k1).unwrap());
    }

    #[test]
    fn order_statistics_are_monotone(x in vector()) {
        let n = x.len();
        for k in 1..n {
            prop_assert!(kth_max_abs(&x, k).unwrap() >= kth_max_abs(&x, k + 1).unwrap());
        }
        for k in 1..=n {
            prop_assert_eq!(kth_min_abs(&x, k).unwrap(), kth_max_abs(&x, n - k + 1).unwrap());
        }
    }

    #[test]
    fn welford_merge_matches_sequential(a in prop::collection::vec(-1e3f64..1e3, 0..50), b in prop::collection::vec(-1e3f64..1e3, 0..50)) {
        let mut left = Welford::new();
        a.iter().for_each(|v| left.push(*v));
        let mut right = Welford::new();
        b.iter().for_each(|v| right.push(*v));
        let mut all = Welford::new();
        a.iter().chain(&b).for_each(|v| all.push(*v));
        left.merge(&right);
        prop_assert_eq!(left.count(), all.count());
        if all.count() > 0 {
            prop_assert!((left.mean() - all.mean()).abs() <= 1e-9 * all.mean().abs().max(1.0));
        }
        if all.count() > 1 {
            prop_assert!((left.variance() - all.variance()).abs() <= 1e-8 * all.variance().max(1.0));
        }
    }

    #[test]
    fn wilson_interval_brackets_the_proportion(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let successes = (frac * trials as f64).round() as u64;
        let (lo, hi) = wilson(successes, trials, Z95);
        let p = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimates_ignore_thread_count(seed in any::<u64>(), stream in 0u64..4, n in 2usize..20) {
        let model = VectorModel::iid(Marginal::laplace(1.0).unwrap(), n).unwrap();
        let stats = [Statistic::TopKSum(1), Statistic::KMax(n / 2 + 1), Statistic::KMin(1)];
        let base = RunConfig::new(3000, seed).stream(stream);
        let one = estimate_many(&model, &stats, &base.threads(Some(1))).unwrap();
        let three = estimate_many(&model, &stats, &base.threads(Some(3))).unwrap();
        prop_assert_eq!(&one, &three);
        for e in &one {
            prop_assert!(e.stderr >= 0.0 && e.ci95.0 <= e.mean && e.mean <= e.ci95.1);
        }
    }
}
