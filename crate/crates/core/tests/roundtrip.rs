use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use d2lv::pairs::{read_pairs, write_pairs};
use d2lv::store::{read_feature_store, write_feature_store};
use d2lv::types::normalize_in_place;
use d2lv::{FeatureRecord, FeatureStore, ImageId, PairScore};

#[test]
fn ten_thousand_pairs_round_trip_to_six_decimals() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<PairScore> = (0..10_000)
        .map(|i| PairScore {
            query: ImageId::new(format!("Q{:05}", i % 500)).unwrap(),
            reference: ImageId::new(format!("R{:06}", rng.random_range(0..100_000))).unwrap(),
            score: rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-8..3)),
        })
        .collect();
    let mut buf = Vec::new();
    write_pairs(&pairs, &mut buf).unwrap();
    let back = read_pairs(buf.as_slice()).unwrap();
    assert_eq!(back.len(), pairs.len());
    for (a, b) in pairs.iter().zip(&back) {
        assert_eq!(a.query, b.query);
        assert_eq!(a.reference, b.reference);
        assert!((a.score - b.score).abs() <= 5e-7 + 1e-12 * a.score.abs(), "{} vs {}", a.score, b.score);
    }
}

#[test]
fn large_store_round_trips_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dim = 1500;
    let records: Vec<FeatureRecord> = (0..1000)
        .map(|i| {
            let mut vector: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize_in_place(&mut vector);
            FeatureRecord {
                image: ImageId::new(format!("R{:06}", i / 4)).unwrap(),
                patch: ["orig", "g4-0", "g9-3", "prop-1"][i % 4].to_string(),
                model: "tiled8".into(),
                scale: 256,
                vector,
            }
        })
        .collect();
    let store = FeatureStore::new(dim, records).unwrap();
    let mut buf = Vec::new();
    write_feature_store(&store, &mut buf).unwrap();
    let back = read_feature_store(buf.as_slice()).unwrap();
    assert_eq!(back.dim(), dim);
    assert_eq!(back.len(), store.len());
    for (a, b) in store.records().iter().zip(back.records()) {
        assert_eq!(a.key(), b.key());
        assert!(a.vector.iter().zip(&b.vector).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
