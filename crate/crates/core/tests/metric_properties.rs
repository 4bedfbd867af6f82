use earsym::metrics::{auc, bootstrap_ci, dprime, eer, fnmr_at_fmr, rank_k, BootstrapConfig, Labeled, Metric};
use earsym::Embedding;
use proptest::prelude::*;

fn auc_oracle(g: &[f64], i: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &x in g {
        for &y in i {
            wins += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (g.len() * i.len()) as f64
}

fn fmr(i: &[f64], t: f64) -> usize {
    i.iter().filter(|&&s| s >= t).count()
}

fn fnm(g: &[f64], t: f64) -> usize {
    g.iter().filter(|&&s| s < t).count()
}

/// Lowest threshold over the sweep whose FMR is within the target.
fn fnmr_oracle(g: &[f64], i: &[f64], target: f64) -> (f64, f64) {
    let mut thresholds: Vec<f64> = i.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(f64::total_cmp);
    let t = thresholds
        .into_iter()
        .find(|&t| fmr(i, t) as f64 / i.len() as f64 <= target)
        .unwrap();
    (fnm(g, t) as f64 / g.len() as f64, t)
}

fn eer_oracle(g: &[f64], i: &[f64]) -> (f64, f64) {
    let mut thresholds: Vec<f64> = g.iter().chain(i).copied().collect();
    thresholds.extend([f64::NEG_INFINITY, f64::INFINITY]);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (ng, ni) = (g.len() as i128, i.len() as i128);
    let gap = |t: f64| (fmr(i, t) as i128 * ng - fnm(g, t) as i128 * ni).abs();
    let best = thresholds.iter().copied().min_by_key(|&t| gap(t)).unwrap();
    let rate = (fmr(i, best) as f64 / i.len() as f64 + fnm(g, best) as f64 / g.len() as f64) / 2.0;
    (rate, best)
}

/// Scores on a coarse grid so ties are common.
fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((-20i32..=20).prop_map(|v| v as f64 / 20.0), 1..max)
}

fn targets() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.01), Just(0.05), Just(0.1), 0.001f64..0.999]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auc_matches_pair_counting(g in scores(200), i in scores(200)) {
        prop_assert!((auc(&g, &i).unwrap() - auc_oracle(&g, &i)).abs() <= 1e-12);
    }

    #[test]
    fn auc_complement_is_exact(g in scores(60), i in scores(60)) {
        prop_assert_eq!(auc(&i, &g).unwrap(), 1.0 - auc(&g, &i).unwrap());
        prop_assert_eq!(auc(&g, &i).unwrap(), 1.0 - auc(&i, &g).unwrap());
    }

    #[test]
    fn fnmr_matches_sweep(g in scores(200), i in scores(200), target in targets()) {
        let op = fnmr_at_fmr(&g, &i, target).unwrap();
        prop_assert_eq!((op.rate, op.threshold), fnmr_oracle(&g, &i, target));
    }

    #[test]
    fn eer_matches_sweep(g in scores(200), i in scores(200)) {
        let op = eer(&g, &i).unwrap();
        prop_assert_eq!((op.rate, op.threshold), eer_oracle(&g, &i));
    }

    #[test]
    fn monotone_transform_invariance(g in scores(80), i in scores(80), target in targets()) {
        let f = |v: &[f64]| v.iter().map(|x| (3.0 * x).exp() - 7.0).collect::<Vec<_>>();
        let (fg, fi) = (f(&g), f(&i));
        prop_assert_eq!(auc(&g, &i).unwrap(), auc(&fg, &fi).unwrap());
        prop_assert_eq!(fnmr_at_fmr(&g, &i, target).unwrap().rate, fnmr_at_fmr(&fg, &fi, target).unwrap().rate);
        prop_assert_eq!(eer(&g, &i).unwrap().rate, eer(&fg, &fi).unwrap().rate);
    }

    #[test]
    fn high_genuine_never_raises_fnmr(g in scores(80), i in scores(80), target in targets(), bump in 0.0f64..1.0) {
        let before = fnmr_at_fmr(&g, &i, target).unwrap().rate;
        let top = i.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut more = g.clone();
        more.push(top + 0.01 + bump);
        prop_assert!(fnmr_at_fmr(&more, &i, target).unwrap().rate <= before);
    }

    #[test]
    fn dprime_swap_negates(g in scores(50), i in scores(50)) {
        prop_assume!(g.len() >= 2 && i.len() >= 2);
        let a = dprime(&g, &i).unwrap();
        let b = dprime(&i, &g).unwrap();
        prop_assert!(a == -b || (a.is_nan() && b.is_nan()), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bootstrap_brackets_and_repeats(g in scores(40), i in scores(40), seed in any::<u64>()) {
        prop_assume!(g.len() >= 2 && i.len() >= 2);
        let cfg = BootstrapConfig { replicates: 100, level: 0.9, seed };
        let a = bootstrap_ci(Metric::Auc, &g, &i, &cfg).unwrap();
        prop_assert!(0.0 <= a.lo && a.lo <= a.hi && a.hi <= 1.0);
        prop_assert_eq!(a, bootstrap_ci(Metric::Auc, &g, &i, &cfg).unwrap());
    }

    #[test]
    fn rank_k_monotone_and_complete(n_subjects in 2usize..6, per in 1usize..4, dim in 3usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |id: String, subject: usize| Labeled {
            id,
            subject: format!("s{subject}"),
            embedding: Embedding::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
        };
        let gallery: Vec<_> = (0..n_subjects * per).map(|j| draw(format!("g{j}"), j % n_subjects)).collect();
        let probes: Vec<_> = (0..n_subjects).map(|s| draw(format!("p{s}"), s)).collect();
        let rates: Vec<f64> = (1..=gallery.len()).map(|k| rank_k(&gallery, &probes, k).unwrap()).collect();
        prop_assert!(rates.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*rates.last().unwrap(), 1.0);
    }
}
