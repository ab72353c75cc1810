//! Property tests for the cross-cutting invariants: label symmetry, shift
//! equivariance, monotone-transform invariance, and ingestion round trips.

use proptest::prelude::*;

use embexp::balance::{ks_two_sample, smd_of};
use embexp::dataset::{load_csv_str, Covariate, SchemaMap};
use embexp::design::{design_none, freeze, unseal_outcomes, AnalysisDataset, ExperimentKind};
use embexp::inference::{
    ace_posterior, fisher_test, neyman_crude, ols_adjusted, RandomizationScheme, Statistic,
};
use embexp::numerics::{solve_ols, DesignMatrix};

fn csv_from(rows: &[(u32, f64, f64, u8, u8)]) -> String {
    let mut text = String::from("age,fev,ht,sex,smoke\n");
    for (age, fev, ht, sex, smoke) in rows {
        text.push_str(&format!("{age},{fev},{ht},{sex},{smoke}\n"));
    }
    text
}

fn analysis_from(rows: &[(u32, f64, f64, u8, u8)]) -> AnalysisDataset {
    let ds = load_csv_str(&csv_from(rows), &SchemaMap::default()).unwrap();
    let d = design_none(&ds);
    let lock = freeze(&d, "prop").unwrap();
    unseal_outcomes(&ds, &lock, &d, "prop").unwrap()
}

/// Arbitrary small two-group dataset with enough units and spread for every
/// estimator (12 per arm, covariates jittered).
fn arb_rows() -> impl Strategy<Value = Vec<(u32, f64, f64, u8, u8)>> {
    proptest::collection::vec((0u32..200, 0u32..200, 0u32..2), 24).prop_map(|seeds| {
        seeds
            .iter()
            .enumerate()
            .map(|(i, &(a, h, s))| {
                let age = 5 + (a % 13) + (i as u32 % 3);
                let ht = 48.0 + (h % 90) as f64 / 4.0 + (i % 5) as f64;
                let fev = 0.04 * age as f64 + 0.02 * ht + (a as f64 * 0.013).sin() * 0.4 + 1.0;
                (age, fev, ht, s as u8, (i % 2) as u8)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smd_flips_sign_when_labels_swap(
        t in proptest::collection::vec(0.0f64..10.0, 3..12),
        c in proptest::collection::vec(0.0f64..10.0, 3..12),
    ) {
        prop_assume!(smd_of(&t, &c).is_ok());
        let a = smd_of(&t, &c).unwrap();
        let b = smd_of(&c, &t).unwrap();
        prop_assert!((a + b).abs() < 1e-10);
    }

    #[test]
    fn ks_statistic_invariant_under_strictly_increasing_maps(
        x in proptest::collection::vec(-5.0f64..5.0, 2..20),
        y in proptest::collection::vec(-5.0f64..5.0, 2..20),
        scale in 0.1f64..3.0,
        cubic in 0.0f64..2.0,
    ) {
        let f = |v: f64| scale * v + cubic * v * v * v;
        let xf: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let yf: Vec<f64> = y.iter().map(|&v| f(v)).collect();
        let d1 = ks_two_sample(&x, &y).unwrap().statistic;
        let d2 = ks_two_sample(&xf, &yf).unwrap().statistic;
        prop_assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn outcome_shift_equivariance(rows in arb_rows(), shift in -0.8f64..3.0) {
        // the lower shift bound keeps every outcome positive, as ingestion
        // requires
        let ad = analysis_from(&rows);
        let shifted_rows: Vec<_> = rows
            .iter()
            .map(|&(a, f, h, s, w)| (a, f + shift, h, s, w))
            .collect();
        let ad2 = analysis_from(&shifted_rows);

        let (c1, c2) = (neyman_crude(&ad).unwrap(), neyman_crude(&ad2).unwrap());
        prop_assert!((c1.estimate - c2.estimate).abs() < 1e-9);
        prop_assert!(((c1.interval.1 - c1.interval.0) - (c2.interval.1 - c2.interval.0)).abs() < 1e-9);

        let (a1, a2) = (
            ols_adjusted(&ad, &Covariate::ALL).unwrap(),
            ols_adjusted(&ad2, &Covariate::ALL).unwrap(),
        );
        prop_assert!((a1.estimate - a2.estimate).abs() < 1e-8);

        let scheme = RandomizationScheme::for_design(&ad, ExperimentKind::CompletelyRandomized).unwrap();
        let f1 = fisher_test(&ad, &scheme, Statistic::WelchT, 0.0, 200, 5, 1).unwrap();
        let f2 = fisher_test(&ad2, &scheme, Statistic::WelchT, 0.0, 200, 5, 1).unwrap();
        // identical up to float jitter at comparison boundaries
        prop_assert!((f1.p_value - f2.p_value).abs() <= 2.0 / 201.0);

        let p1 = ace_posterior(&ad, 300, 5, 1).unwrap();
        let p2 = ace_posterior(&ad2, 300, 5, 1).unwrap();
        prop_assert!((p1.mean - p2.mean).abs() < 1e-9);
        prop_assert!((p1.sd - p2.sd).abs() < 1e-9);
    }

    #[test]
    fn label_swap_negates_crude_estimate(rows in arb_rows()) {
        let ad = analysis_from(&rows);
        let swapped: Vec<_> = rows
            .iter()
            .map(|&(a, f, h, s, w)| (a, f, h, s, 1 - w))
            .collect();
        let ad2 = analysis_from(&swapped);
        let c1 = neyman_crude(&ad).unwrap();
        let c2 = neyman_crude(&ad2).unwrap();
        prop_assert!((c1.estimate + c2.estimate).abs() < 1e-10);
        // intervals reflect about zero
        prop_assert!((c1.interval.0 + c2.interval.1).abs() < 1e-9);
        prop_assert!((c1.interval.1 + c2.interval.0).abs() < 1e-9);
    }

    #[test]
    fn ols_residuals_orthogonal_to_design(
        xs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 8..40),
        b0 in -2.0f64..2.0,
        b1 in -2.0f64..2.0,
    ) {
        let c1: Vec<f64> = xs.iter().map(|p| p.0).collect();
        let c2: Vec<f64> = xs.iter().map(|p| p.1).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|p| b0 + b1 * p.0 - 0.5 * p.1 + (p.0 * 3.1).sin())
            .collect();
        let x = DesignMatrix::with_intercept(&[("c1", &c1), ("c2", &c2)]);
        if let Ok(fit) = solve_ols(&x, &y) {
            let fitted = x.matrix().matvec(&fit.coefficients);
            let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            for v in x.matrix().t_matvec(&resid) {
                prop_assert!(v.abs() < 1e-7, "gradient component {v}");
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_covariates_and_treatment(rows in arb_rows()) {
        let text = csv_from(&rows);
        let ds = load_csv_str(&text, &SchemaMap::default()).unwrap();
        prop_assert_eq!(ds.len(), rows.len());
        for (unit, row) in ds.units().iter().zip(&rows) {
            prop_assert_eq!(unit.age, row.0 as f64);
            prop_assert_eq!(unit.height, row.2);
            prop_assert_eq!(unit.sex.as_f64(), row.3 as f64);
            prop_assert_eq!(unit.treated, row.4 == 1);
        }
        // writing the covariate/treatment columns back reproduces the input
        let mut out = String::from("age,fev,ht,sex,smoke\n");
        for u in ds.units() {
            // outcomes are sealed: reproduce them from the source rows
            let fev = rows[(u.id - 1) as usize].1;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                u.age, fev, u.height,
                u.sex.as_f64() as u8,
                u.treated as u8
            ));
        }
        let ds2 = load_csv_str(&out, &SchemaMap::default()).unwrap();
        for (a, b) in ds.units().iter().zip(ds2.units()) {
            prop_assert_eq!(a.age, b.age);
            prop_assert_eq!(a.height, b.height);
            prop_assert_eq!(a.sex, b.sex);
            prop_assert_eq!(a.treated, b.treated);
        }
    }
}
