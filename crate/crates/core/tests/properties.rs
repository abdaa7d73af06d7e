use fbreg::estimator::NelderMead;
use fbreg::frbinom::{
    config_prob, joint_ones_prob, pmf, pmf_bruteforce, FbParams, FbParamsNatural, OnesSet,
};
use fbreg::inference::vuong_from_ratios;
use fbreg::likelihoods::{fb_logpmf, CoefVector, ModelKind};
use fbreg::regdata::{read_csv, ColumnSpec, Dataset};
use proptest::prelude::*;

fn natural() -> impl Strategy<Value = FbParams> {
    (0.02f64..0.98, 0.02f64..0.98, 0.0f64..0.99).prop_map(|(p, h, c)| {
        FbParamsNatural::new(p, h, c).unwrap().to_constrained().unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_is_a_distribution(params in natural(), n in 1usize..60) {
        let t = pmf(n, &params).unwrap();
        prop_assert_eq!(t.probs().len(), n + 1);
        prop_assert!(t.probs().iter().all(|&v| v >= 0.0));
        prop_assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-8);
        prop_assert!(t.diagnostics().is_empty());
    }

    #[test]
    fn pmf_matches_enumeration(params in natural(), n in 1usize..11) {
        let fast = pmf(n, &params).unwrap();
        let slow = pmf_bruteforce(n, &params).unwrap();
        for (a, b) in fast.probs().iter().zip(slow.probs()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_count_is_the_all_zero_configuration(params in natural(), n in 1usize..13) {
        let zeros = OnesSet::full(n);
        let direct = config_prob(&OnesSet::empty(), &zeros, &params).unwrap();
        prop_assert!((pmf(n, &params).unwrap().prob(0) - direct).abs() < 1e-10);
    }

    #[test]
    fn joint_probability_depends_only_on_gaps(
        params in natural(),
        mut pos in prop::collection::btree_set(1usize..40, 1..6),
        shift in 0usize..50,
    ) {
        let set = OnesSet::new(std::mem::take(&mut pos).into_iter().collect()).unwrap();
        prop_assert_eq!(joint_ones_prob(&set, &params), joint_ones_prob(&set.shifted(shift), &params));
    }

    #[test]
    fn zero_mass_grows_with_dependence(p in 0.05f64..0.95, h in 0.05f64..0.95, n in 2usize..40,
                                       a in 0.0f64..0.98, b in 0.0f64..0.98) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let at = |c: f64| pmf(n, &FbParamsNatural::new(p, h, c).unwrap().to_constrained().unwrap()).unwrap().prob(0);
        prop_assert!(at(hi) >= at(lo) - 1e-12);
    }

    #[test]
    fn fb_log_pmf_sums_to_one(x in prop::collection::vec(-2.0f64..2.0, 2),
                              theta in prop::collection::vec(-3.0f64..3.0, 6),
                              n in 1u32..25) {
        let theta = CoefVector::new(ModelKind::Fb, 2, theta).unwrap();
        let mut total = 0.0;
        for y in 0..=n {
            let l = fb_logpmf(y, &x, &theta, n).unwrap();
            prop_assert!(l <= 0.0);
            total += l.exp();
        }
        prop_assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((0u32..30, -1e6f64..1e6, any::<f64>().prop_filter("finite", |v| v.is_finite())), 3..40)) {
        let y: Vec<u32> = rows.iter().map(|r| r.0).collect();
        let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.1, r.2]).collect();
        let Ok(data) = Dataset::from_rows(y, &x, vec!["a".into(), "b".into()], true, None) else {
            return Ok(());
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.write_csv(&path).unwrap();
        let back = fbreg::regdata::load_csv(&path, "y", &[ColumnSpec::numeric("a"), ColumnSpec::numeric("b")], None).unwrap();
        prop_assert_eq!(back.y(), data.y());
        for i in 0..data.len() {
            prop_assert_eq!(back.row(i), data.row(i));
        }
        prop_assert_eq!(back.digest(), data.digest());
    }

    #[test]
    fn dummy_block_is_one_hot_or_reference(levels in prop::collection::vec(0usize..4, 8..40)) {
        let names = ["a", "b", "c", "d"];
        let mut text = String::from("y,f\n");
        for (i, l) in levels.iter().enumerate() {
            text.push_str(&format!("{},{}\n", i % 3, names[*l]));
        }
        let spec = [ColumnSpec::categorical("f")];
        match read_csv(text.as_bytes(), "y", &spec, None) {
            Ok(data) => {
                for row in data.rows() {
                    let s: f64 = row[1..].iter().sum();
                    prop_assert!(s == 0.0 || s == 1.0);
                }
            }
            Err(e) => prop_assert!(matches!(e, fbreg::Error::RankDeficient { .. }), "{e}"),
        }
    }

    #[test]
    fn vuong_is_antisymmetric_and_shift_free(
        pairs in prop::collection::vec((-20.0f64..0.0, -20.0f64..0.0), 3..50),
        shift in -10.0f64..10.0,
    ) {
        let m: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
        let a = vuong_from_ratios(m.clone());
        let b = vuong_from_ratios(m.iter().map(|v| -v).collect());
        prop_assert_eq!(a.statistic().map(|s| -s), b.statistic());
        let moved: Vec<f64> = pairs.iter().map(|(a, b)| (a + shift) - (b + shift)).collect();
        if let (Some(s), Some(t)) = (a.statistic(), vuong_from_ratios(moved).statistic()) {
            prop_assert!((s - t).abs() <= 1e-9 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn simplex_best_value_never_increases(c in prop::collection::vec(-3.0f64..3.0, 3), scale in 0.1f64..10.0) {
        let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| scale * (a - b).powi(2) + (a * b).sin()).sum::<f64>();
        let m = NelderMead::default().minimize(f, &[0.0; 3], None);
        prop_assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
