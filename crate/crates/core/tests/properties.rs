mod common;

use std::sync::Arc;

use dpsoa::adaptive::{adaptive_list_differences, FixedTarget};
use dpsoa::forest::Forest;
use dpsoa::hypothesis::{generators, HypothesisClass, LabeledExample, Labels, OnlineLearner, Predictor, Soa};
use dpsoa::mech::{laplace, stable_histogram, HistParams, HypList, RngSeed};
use dpsoa::sparse::{AboveThreshold, Response};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Laplace};

use common::{freq_naive, ldim_bruteforce, random_rows};

fn predictor(bits: u8, n: usize) -> Predictor {
    if bits == u8::MAX {
        Predictor::Bottom
    } else {
        Predictor::Labels(Labels::from_bits((0..n).map(|b| (bits >> b) & 1 == 1)))
    }
}

fn list_strategy() -> impl Strategy<Value = Vec<u8>> {
    // u8::MAX stands for ⊥; the rest is drawn from a small pool so repeats occur
    prop::collection::vec(prop_oneof![Just(u8::MAX), 0u8..6], 1..60)
}

fn to_list(raw: &[u8]) -> HypList {
    raw.iter().map(|&b| predictor(b, 3)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn freq_matches_naive_count(raw in list_strategy(), probe in prop_oneof![Just(u8::MAX), 0u8..8]) {
        let list = to_list(&raw);
        let f = predictor(probe, 3);
        let (hits, len) = freq_naive(&list, &f);
        let got = list.freq(&f).unwrap();
        prop_assert_eq!(*got.numer() * len as u64, hits as u64 * *got.denom());
    }

    #[test]
    fn release_is_a_subset_of_the_list(raw in list_strategy(), seed in any::<u64>(), eps in 0.1f64..20.0) {
        let list = to_list(&raw);
        let params = HistParams::new(eps, 0.05, 0.5, 1.0).unwrap();
        let rel = stable_histogram(&list, &params, &mut RngSeed::new(seed, 0).rng()).unwrap();
        let present = list.labelled_counts();
        for (labels, v) in &rel.released {
            prop_assert!(present.contains_key(labels));
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn one_entry_moves_each_frequency_by_at_most_one_over_k(
        raw in list_strategy(), i in any::<prop::sample::Index>(), replacement in prop_oneof![Just(u8::MAX), 0u8..6],
    ) {
        let mut other = raw.clone();
        other[i.index(raw.len())] = replacement;
        let (a, b) = (to_list(&raw), to_list(&other));
        prop_assert!(a.hamming(&b) <= 1);
        let k = raw.len() as f64;
        for bits in (0u8..6).chain([u8::MAX]) {
            let f = predictor(bits, 3);
            let d = (a.freq_f64(&f).unwrap() - b.freq_f64(&f).unwrap()).abs();
            prop_assert!(d <= 1.0 / k + 1e-12);
        }
    }

    #[test]
    fn above_threshold_counter_is_monotone(queries in prop::collection::vec(0.0f64..1.0, 1..40), c in 1u64..5, seed in any::<u64>()) {
        let mut rng = RngSeed::new(seed, 0).rng();
        let mut at = AboveThreshold::new(0.5, 0.1, c, &mut rng).unwrap();
        let mut last = 0;
        for q in queries {
            if at.is_aborted() {
                prop_assert!(at.step(q, &mut rng).is_err());
                break;
            }
            let r = at.step(q, &mut rng).unwrap();
            prop_assert_eq!(at.counter(), last + (r == Response::Above) as u64);
            prop_assert!(at.counter() <= c);
            last = at.counter();
        }
    }

    #[test]
    fn ldim_agrees_with_shattering(n in 1usize..=6, m in 1usize..=64, seed in any::<u64>()) {
        let rows = random_rows(n, m, &mut ChaCha8Rng::seed_from_u64(seed));
        let class = HypothesisClass::from_bit_rows(n, &rows).unwrap();
        prop_assert_eq!(class.ldim().unwrap() as i32, ldim_bruteforce(&rows, n));
    }

    #[test]
    fn soa_mistakes_bounded_by_ldim(n in 1usize..=6, m in 1usize..=32, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class = Arc::new(HypothesisClass::from_bit_rows(n, &random_rows(n, m, &mut rng)).unwrap());
        let soa = Soa::new(class.clone());
        let target = class.hypothesis(rng.gen_range(0..class.len())).clone();
        let mut st = soa.fresh();
        for _ in 0..100 {
            let x = rng.gen_range(0..n);
            soa.update(&mut st, LabeledExample::new(x, target.get(x))).unwrap();
        }
        prop_assert!(soa.mistakes(&st) <= class.ldim().unwrap() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forest_invariants_hold_every_round(seed in any::<u64>(), k1 in prop_oneof![Just(2usize), Just(4), Just(8)], k2 in 1usize..8) {
        let class = Arc::new(generators::intervals(5));
        let seq = FixedTarget::new(&class, seed).unwrap().sequence(150);
        let mut forest = Forest::new(Soa::new(class.clone()), k1, k2, seq.len(), seed).unwrap().with_strict(true);
        for ex in seq {
            let before = forest.pertinent_count();
            let obs = forest.observe(ex).unwrap();
            prop_assert!(forest.check_invariants().is_ok());
            if !obs.reset {
                prop_assert_eq!(before - forest.pertinent_count(), obs.while_iters);
            }
        }
    }

    #[test]
    fn adaptive_instances_are_one_sensitive(seed in any::<u64>(), i in 0usize..20, shift in 1usize..4) {
        let class = Arc::new(generators::points(4));
        let target = FixedTarget::new(&class, seed).unwrap();
        let labels = target.target().clone();
        let a = target.sequence(20);
        let mut b = a.clone();
        let x = (b[i].x + shift) % 4;
        b[i] = LabeledExample::new(x, labels.get(x));
        let diffs = adaptive_list_differences(&class, &a, &b, 2, 8, seed).unwrap();
        prop_assert!(diffs.into_iter().all(|d| d <= 1));
    }
}

#[test]
fn laplace_sampler_matches_cdf() {
    let mut rng = RngSeed::new(11, 0).rng();
    let n = 200_000;
    let scale = 2.0;
    let mut draws: Vec<f64> = (0..n).map(|_| laplace(scale, &mut rng).unwrap()).collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dist = Laplace::new(0.0, scale).unwrap();
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = dist.cdf(x);
            (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1.63/√n is the 1% critical value of the Kolmogorov statistic
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn histogram_release_rates_match_laplace_tail() {
    // one bin just above the threshold τ: released w.p. P[Lap(b) > τ − freq]
    let k = 400;
    let params = HistParams::new(1.0, 0.01, 0.5, 1.0).unwrap();
    let tau = params.threshold(k);
    let b = params.noise_scale(k);
    let f = predictor(1, 3);
    let heavy = (tau * k as f64) as usize + 1;
    let list: HypList = (0..k).map(|i| if i < heavy { f.clone() } else { predictor(i as u8 % 5 + 2, 3) }).collect();
    let freq = heavy as f64 / k as f64;
    let expect = 1.0 - Laplace::new(0.0, b).unwrap().cdf(tau - freq);
    assert!(expect > 0.2 && expect < 0.8);
    let mut rng = RngSeed::new(12, 0).rng();
    let trials = 20_000;
    let hits = (0..trials)
        .filter(|_| stable_histogram(&list, &params, &mut rng).unwrap().get(&f).is_some())
        .count();
    let p = hits as f64 / trials as f64;
    let sd = (expect * (1.0 - expect) / trials as f64).sqrt().max(1e-4);
    assert!((p - expect).abs() < 4.0 * sd, "rate {p} vs {expect}");
}
