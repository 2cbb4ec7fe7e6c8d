mod common;

use proptest::prelude::*;
use soilres::dataset::{
    encode, histogram, parse_csv, quantile_sorted, summarize_values, write_csv, SoilRecord,
    SoilType,
};

fn opt_value(lo: f64, hi: f64) -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 4 => (lo..hi).prop_map(Some)]
}

fn record() -> impl Strategy<Value = SoilRecord> {
    (
        0..9usize,
        opt_value(0.0, 2.0),
        opt_value(0.0, 40.0),
        opt_value(0.5, 2.5),
        opt_value(0.01, 7000.0),
    )
        .prop_map(|(st, mol, moist, uw, er)| SoilRecord {
            soil_type: SoilType::ALL[st],
            mol,
            moist,
            uw,
            er,
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bitwise(recs in prop::collection::vec(record(), 1..60)) {
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, recs);
    }

    #[test]
    fn encoding_is_idempotent(recs in prop::collection::vec(record(), 1..60)) {
        let once = encode(&recs);
        let again: Vec<SoilRecord> = once.iter().map(|r| r.to_soil_record()).collect();
        prop_assert_eq!(encode(&again), once.clone());
        let complete = recs
            .iter()
            .filter(|r| r.mol.is_some() && r.moist.is_some() && r.uw.is_some() && r.er.is_some())
            .count();
        prop_assert_eq!(once.len(), complete);
        for r in &once {
            prop_assert!(r.x.st_kb == 0.0 || r.x.st_ks == 0.0);
            prop_assert!(r.x.st_k == 0.0 || r.x.st_k == 1.0);
        }
    }

    #[test]
    fn histogram_counts_every_finite_value(
        values in prop::collection::vec(prop_oneof![9 => -1e4..1e4f64, 1 => Just(f64::NAN)], 1..200),
        bins in 1..40usize,
    ) {
        let finite = values.iter().filter(|v| v.is_finite()).count();
        prop_assume!(finite > 0);
        let h = histogram(&values, bins).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.edges.len(), bins + 1);
        prop_assert_eq!(h.counts.iter().sum::<usize>(), finite);
        prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn summary_is_ordered(values in prop::collection::vec(opt_value(-100.0, 100.0), 1..100)) {
        prop_assume!(values.iter().any(|v| v.is_some()));
        let s = summarize_values("x", &values).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        prop_assert!(s.min - 1e-9 <= s.mean && s.mean <= s.max + 1e-9);
        prop_assert_eq!(s.missing, values.iter().filter(|v| v.is_none()).count());
    }
}

#[test]
fn type_seven_quantiles() {
    let v: Vec<f64> = (1..=10).map(f64::from).collect();
    assert_eq!(quantile_sorted(&v, 0.25), 3.25);
    assert_eq!(quantile_sorted(&v, 0.5), 5.5);
    assert_eq!(quantile_sorted(&v, 0.75), 7.75);
    assert_eq!(quantile_sorted(&v, 0.0), 1.0);
    assert_eq!(quantile_sorted(&v, 1.0), 10.0);
}

#[test]
fn synthetic_design_covers_every_cell() {
    let data = common::synthetic_full(1);
    assert_eq!(data.len(), 864);
    let types: Vec<SoilType> = data.iter().map(|r| r.x.soil_type).collect();
    let counts = soilres::dataset::soil_type_counts(types.iter());
    assert!(counts.iter().all(|&c| c == 96));
}
