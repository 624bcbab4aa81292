use pate_bounds::analysis::{analyze_population, StratificationSpec};
use pate_bounds::bounds::{stratified_bounds, StratumRangePolicy, StratumSummary};
use pate_bounds::model::true_pate_of;
use pate_bounds::population::redefine_by_sd;
use pate_bounds::propensity::{assign_strata, CovariateSpec};
use pate_bounds::resampling::resample;
use pate_bounds::stats::quantile;
use pate_bounds::{
    mss_bounds, worst_case_bounds, OutcomeRange, PotentialOutcomes, StudyData, UnitRecord,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bound_inputs() -> impl Strategy<Value = (f64, f64, OutcomeRange)> {
    (-50.0..50.0f64, 0.1..40.0f64, 0.001..=1.0f64, -1.0..=1.0f64).prop_map(
        |(lo, span, p, frac)| {
            let range = OutcomeRange::new(lo, lo + span).unwrap();
            (frac * span, p, range)
        },
    )
}

/// Sampled units alternate arms; potential outcomes are attached to all.
fn study() -> impl Strategy<Value = StudyData> {
    (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64, -3.0..3.0f64), 4..12),
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64, -3.0..3.0f64), 4..30),
    )
        .prop_map(|(sampled, others)| {
            let mut units = Vec::new();
            for (i, &(y1, y0, a, b)) in sampled.iter().enumerate() {
                let t = i % 2 == 0;
                let y = if t { y1 } else { y0 };
                units.push(
                    UnitRecord::sampled(format!("s{i}"), t, y, vec![a, b])
                        .with_potential(PotentialOutcomes { y1, y0 }),
                );
            }
            for (i, &(y1, y0, a, b)) in others.iter().enumerate() {
                units.push(
                    UnitRecord::unsampled(format!("p{i}"), vec![a, b])
                        .with_potential(PotentialOutcomes { y1, y0 }),
                );
            }
            StudyData::new(units, OutcomeRange::new(-1.0, 1.0).unwrap()).unwrap()
        })
}

proptest! {
    #[test]
    fn width_identity((sate, p, range) in bound_inputs()) {
        let b = worst_case_bounds(sate, p, range).unwrap();
        let expected = 2.0 * range.width() * (1.0 - p);
        prop_assert!((b.width() - expected).abs() <= 1e-12 * expected.max(1.0));
        prop_assert!(b.lo <= sate * p + 1e-12 && sate * p <= b.hi + 1e-12);
    }

    #[test]
    fn mss_shares_lower_end((sate, p, range) in bound_inputs()) {
        let wc = worst_case_bounds(sate, p, range).unwrap();
        let mss = mss_bounds(sate, p, range).unwrap();
        prop_assert_eq!(mss.lo, wc.lo);
        prop_assert_eq!(mss.hi, sate);
        prop_assert!(mss.width() <= wc.width() + 1e-12);
    }

    #[test]
    fn single_stratum_is_unstratified((sate, p, range) in bound_inputs()) {
        let s = [StratumSummary { weight: 1.0, sate, p_sel: p, range }];
        for mss in [false, true] {
            let strat = stratified_bounds(&s, mss).unwrap();
            let plain = if mss { mss_bounds(sate, p, range) } else { worst_case_bounds(sate, p, range) }.unwrap();
            prop_assert!((strat.lo - plain.lo).abs() <= 1e-12);
            prop_assert!((strat.hi - plain.hi).abs() <= 1e-12);
        }
    }

    #[test]
    fn declared_stratum_ranges_keep_the_width(data in study(), k in 1usize..5) {
        let mut spec = StratificationSpec::new(k, CovariateSpec::linear(vec![0, 1]));
        spec.ranges = StratumRangePolicy::Declared;
        let a = analyze_population(&data, Some(&spec));
        if let Ok(a) = a {
            let s = a.stratified.unwrap();
            prop_assert!((s.worst_case.width() - a.worst_case.width()).abs() <= 1e-12);
        }
    }

    #[test]
    fn pate_decomposes_over_selection(data in study()) {
        let units = data.units();
        let (s, o): (Vec<UnitRecord>, Vec<UnitRecord>) = units.iter().cloned().partition(|u| u.z);
        let p = data.p_sel();
        let combined = p * true_pate_of(&s).unwrap() + (1.0 - p) * true_pate_of(&o).unwrap();
        prop_assert!((true_pate_of(units).unwrap() - combined).abs() < 1e-12);
    }

    #[test]
    fn worst_case_bound_contains_pate(data in study()) {
        // outcomes lie in the declared range, so the truth is always inside
        let a = analyze_population(&data, None).unwrap();
        let pate = true_pate_of(data.units()).unwrap();
        prop_assert!(a.worst_case.lo <= pate + 1e-12 && pate <= a.worst_case.hi + 1e-12);
    }

    #[test]
    fn sd_trimming_is_nested(data in study(), s in 0.2..4.0f64) {
        let narrow = redefine_by_sd(&data, s);
        let wide = redefine_by_sd(&data, s * 1.5);
        if let (Ok(n), Ok(w)) = (narrow, wide) {
            prop_assert!(n.population_size() <= w.population_size());
            prop_assert_eq!(n.sample_size(), data.sample_size());
            let ids: std::collections::HashSet<_> = w.units().iter().map(|u| &u.id).collect();
            prop_assert!(n.units().iter().all(|u| ids.contains(&u.id)));
        }
    }

    #[test]
    fn strata_are_ordered_and_balanced(scores in prop::collection::vec(0.0..1.0f64, 1..200), k in 1usize..8) {
        let a = assign_strata(&scores, k).unwrap();
        prop_assert_eq!(a.labels.len(), scores.len());
        for (i, si) in scores.iter().enumerate() {
            for (j, sj) in scores.iter().enumerate() {
                if si < sj {
                    prop_assert!(a.labels[i] <= a.labels[j]);
                }
            }
        }
        prop_assert!(a.labels.iter().all(|&l| (1..=k).contains(&l)));
        prop_assert_eq!(a.population_counts().iter().sum::<usize>(), scores.len());
    }

    #[test]
    fn resample_keeps_population_and_size(data in study(), seed in any::<u64>()) {
        let population: Vec<UnitRecord> = data.units().iter().filter(|u| !u.z).cloned().collect();
        let sampled: Vec<&UnitRecord> = data.sampled().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = resample(&population, &sampled, &mut rng);
        prop_assert_eq!(out.len(), data.population_size());
        prop_assert_eq!(&out[..population.len()], &population[..]);
        prop_assert!(out[population.len()..].iter().all(|u| u.z));
    }

    #[test]
    fn quantile_is_monotone(xs in prop::collection::vec(-1e3..1e3f64, 1..50), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile(&xs, lo) <= quantile(&xs, hi));
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= quantile(&xs, lo) && quantile(&xs, hi) <= max);
    }
}
