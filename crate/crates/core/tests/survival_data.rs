mod common;

use cdpd::survival_data::{
    km_weights, marginal_km_survival, read_csv, sort_sample, stute_cdf, CensoredSample, CsvSchema,
    KmCurve, MissingPolicy,
};
use cdpd::Error;
use proptest::prelude::*;

fn sample(z: Vec<f64>, d: Vec<bool>) -> CensoredSample {
    let rows = z.iter().map(|v| vec![v * 0.5]).collect();
    CensoredSample::new(z, d, rows).unwrap()
}

/// Weights attached to each original record index.
fn weights_by_record(s: &CensoredSample) -> Vec<f64> {
    let sorted = sort_sample(s);
    let w = km_weights(&sorted);
    let mut out = vec![0.0; s.n()];
    for (k, &i) in sorted.order.iter().enumerate() {
        out[i] = w.w[k];
    }
    out
}

fn distinct_times() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..12).prop_flat_map(|n| {
        (
            proptest::collection::btree_set(1u32..10_000, n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(set, d)| (set.into_iter().map(|v| v as f64 / 100.0).collect(), d))
    })
}

proptest! {
    #[test]
    fn weights_follow_records_under_permutation((z, d) in distinct_times(), seed in any::<u64>()) {
        let base = weights_by_record(&sample(z.clone(), d.clone()));
        // deterministic shuffle from the seed
        let mut perm: Vec<usize> = (0..z.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let zp: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
        let dp: Vec<bool> = perm.iter().map(|&i| d[i]).collect();
        let moved = weights_by_record(&sample(zp, dp));
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((moved[k] - base[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_mass_when_largest_is_uncensored((z, mut d) in distinct_times()) {
        let last = z.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        d[last] = true;
        let w = km_weights(&sort_sample(&sample(z, d)));
        prop_assert!((w.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn weights_match_product_limit_jumps(
        z in proptest::collection::vec(1u8..6, 1..8),
        seed in proptest::collection::vec(any::<bool>(), 8),
    ) {
        let z: Vec<f64> = z.into_iter().map(f64::from).collect();
        let d: Vec<bool> = seed[..z.len()].to_vec();
        let sorted = sort_sample(&sample(z.clone(), d.clone()));
        let w = km_weights(&sorted);
        let (order, oracle) = common::km_jumps(&z, &d);
        prop_assert_eq!(order, sorted.order.clone());
        for (a, b) in w.w.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn stute_marginal_is_one_minus_km((z, d) in distinct_times(), t in 0.0f64..100.0) {
        let s = sample(z, d);
        let sorted = sort_sample(&s);
        let w = km_weights(&sorted);
        let f = stute_cdf(&sorted, &w, &[f64::INFINITY], t);
        let surv = marginal_km_survival(&sorted, KmCurve::Event).eval(t);
        prop_assert!((f - (1.0 - surv)).abs() < 1e-12);
    }
}

#[test]
fn ties_put_events_before_censorings() {
    let s = sample(vec![2.0, 2.0, 3.0], vec![false, true, true]);
    let sorted = sort_sample(&s);
    assert_eq!(sorted.order, vec![1, 0, 2]);
    assert_eq!(km_weights(&sorted).w, vec![1.0 / 3.0, 0.0, 2.0 / 3.0]);
}

fn schema(missing: MissingPolicy) -> CsvSchema {
    CsvSchema {
        time_col: "time".into(),
        status_col: "status".into(),
        covariate_cols: vec!["age".into()],
        id_col: Some("id".into()),
        missing,
    }
}

#[test]
fn csv_round_trip_and_missing_policy() {
    let data = "id,time,status,age\na,1.5,1,40\nb,2.0,0,\nc,3.0,1,55\n";
    let err = read_csv(data.as_bytes(), &schema(MissingPolicy::Reject)).unwrap_err();
    assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
    let s = read_csv(data.as_bytes(), &schema(MissingPolicy::Drop)).unwrap();
    assert_eq!(s.n(), 2);
    assert_eq!(s.z(), &[1.5, 3.0]);
    assert_eq!(s.ids().unwrap(), &["a".to_string(), "c".to_string()]);
    let cleaned = s.exclude_ids(&["c".into()]).unwrap();
    assert_eq!(cleaned.n(), 1);
    assert!(s.exclude_ids(&["zzz".into()]).is_err());
}

#[test]
fn csv_rejects_bad_rows() {
    for (data, row) in [
        ("id,time,status,age\na,-1,1,40\n", 1),
        ("id,time,status,age\na,1,1,40\nb,2,7,41\n", 2),
        ("id,time,status,age\na,1,1,forty\n", 1),
    ] {
        let err = read_csv(data.as_bytes(), &schema(MissingPolicy::Reject)).unwrap_err();
        assert!(matches!(err, Error::Row { row: r, .. } if r == row), "{data}: {err}");
    }
    let err = read_csv("id,time,status\n".as_bytes(), &schema(MissingPolicy::Reject)).unwrap_err();
    assert!(err.to_string().contains("age"), "{err}");
}
