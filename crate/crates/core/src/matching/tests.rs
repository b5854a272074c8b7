use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let n = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x as f64 / n) as f32).collect()
}

fn rec(image: &str, patch: &str, model: &str, scale: u32, vector: Vec<f32>) -> FeatureRecord {
    FeatureRecord { image: ImageId::new(image).unwrap(), patch: patch.into(), model: model.into(), scale, vector }
}

const QUERY_PATCHES: [&str; 6] = ["orig", "rot90", "rot180", "rot270", "c-exact", "c-third"];

fn reference_patches() -> Vec<String> {
    let mut v: Vec<String> = ["orig", "rot90", "rot180", "rot270", "c-exact", "c-third"].map(String::from).to_vec();
    v.extend((0..4).map(|i| format!("g4-{i}")));
    v.extend((0..9).map(|i| format!("g9-{i}")));
    v
}

fn random_store(rng: &mut ChaCha8Rng, prefix: &str, n: usize, patches: &[String], models: &[&str], d: usize) -> FeatureStore {
    let mut records = Vec::new();
    for i in 0..n {
        for p in patches {
            for m in models {
                records.push(rec(&format!("{prefix}{i:03}"), p, m, 256, unit(rng, d)));
            }
        }
    }
    FeatureStore::new(d, records).unwrap()
}

#[test]
fn self_and_orthogonal_scores() {
    let q = FeatureStore::new(2, vec![rec("Q", "orig", "m", 1, vec![1.0, 0.0])]).unwrap();
    let r = FeatureStore::new(2, vec![rec("A", "orig", "m", 1, vec![1.0, 0.0]), rec("B", "orig", "m", 1, vec![0.0, 1.0])]).unwrap();
    let t = pairwise_scores(&q, &r, MatchModes::default()).unwrap();
    assert_eq!(t.get("Q", "orig", "A", "orig", "m", 1), Some(1.0));
    assert_eq!(t.get("Q", "orig", "B", "orig", "m", 1), Some(0.0));
}

#[test]
fn dim_mismatch_is_config_error() {
    let q = FeatureStore::new(2, vec![rec("Q", "orig", "m", 1, vec![1.0, 0.0])]).unwrap();
    let r = FeatureStore::new(3, vec![rec("A", "orig", "m", 1, vec![1.0, 0.0, 0.0])]).unwrap();
    assert!(matches!(pairwise_scores(&q, &r, MatchModes::default()), Err(Error::Config(_))));
    let none = match_pipeline(&q, &r, &[], &TrickConfig::default(), &MatchConfig::default());
    assert!(matches!(none, Err(Error::Config(_))));
}

#[test]
fn blocked_scores_match_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let qs: Vec<_> = (0..100).map(|i| rec(&format!("Q{i:03}"), "orig", "m", 256, unit(&mut rng, 48))).collect();
    let rs: Vec<_> = (0..100).map(|i| rec(&format!("R{i:03}"), "orig", "m", 256, unit(&mut rng, 48))).collect();
    let t = pairwise_scores(&FeatureStore::new(48, qs.clone()).unwrap(), &FeatureStore::new(48, rs.clone()).unwrap(), MatchModes::default()).unwrap();
    assert_eq!(t.len(), 10_000);
    for q in &qs {
        for r in &rs {
            let mut naive = 0.0f64;
            for k in 0..48 {
                naive += q.vector[k] as f64 * r.vector[k] as f64;
            }
            let got = t.get(q.image.as_str(), "orig", r.image.as_str(), "orig", "m", 256).unwrap();
            assert!((got - naive).abs() <= 1e-6);
        }
    }
}

#[test]
fn modes_select_patch_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let qp: Vec<String> = QUERY_PATCHES.map(String::from).to_vec();
    let q = random_store(&mut rng, "Q", 1, &qp, &["m"], 8);
    let r = random_store(&mut rng, "R", 2, &reference_patches(), &["m"], 8);
    let count = |modes| pairwise_scores(&q, &r, modes).unwrap().len();
    assert_eq!(count(MatchModes::GLOBAL_ONLY), 2);
    assert_eq!(count(MatchModes { global_local: true, local_global: false }), 2 * 6);
    assert_eq!(count(MatchModes { global_local: false, local_global: true }), 2 * 19);
    assert_eq!(count(MatchModes::default()), 2 * (6 + 19 - 1));
}

#[test]
fn trick_examples() {
    let entry = |qp: &str, rp: &str, score| ScoreEntry {
        query: ImageId::new("Q").unwrap(),
        query_patch: qp.into(),
        reference: ImageId::new("R").unwrap(),
        reference_patch: rp.into(),
        model: "m".into(),
        scale: 256,
        score,
    };
    let table = ScoreTable::new(vec![entry("c-exact", "orig", 0.8), entry("rot90", "orig", 0.7), entry("orig", "g4-1", 0.6)]).unwrap();
    let same = apply_tricks(&table, &TrickConfig { partial_penalty: 1.0, ..TrickConfig::default() }).unwrap();
    assert_eq!(same, table);
    let t = apply_tricks(&table, &TrickConfig::default()).unwrap();
    assert!((t.get("Q", "c-exact", "R", "orig", "m", 256).unwrap() - 0.76).abs() < 1e-12);
    assert_eq!(t.get("Q", "rot90", "R", "orig", "m", 256), Some(0.7));
    let skip_all = TrickConfig { face_skip: FaceSkip::new(|_| true), ..TrickConfig::default() };
    let t = apply_tricks(&table, &skip_all).unwrap();
    assert!(t.entries().iter().all(|e| e.reference_patch == "orig"));
    assert_eq!(t.len(), 2);
    assert!(apply_tricks(&table, &TrickConfig { partial_penalty: 1.5, ..TrickConfig::default() }).is_err());
}

#[test]
fn exact_copy_ranks_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = random_store(&mut rng, "R", 20, &reference_patches(), &["m"], 16);
    let copy: Vec<FeatureRecord> = r
        .records()
        .iter()
        .filter(|x| x.image.as_str() == "R007" && QUERY_PATCHES.contains(&x.patch.as_str()))
        .map(|x| FeatureRecord { image: ImageId::new("Q").unwrap(), ..x.clone() })
        .collect();
    let q = FeatureStore::new(16, copy).unwrap();
    let ranked = match_pipeline(&q, &r, &[], &TrickConfig::default(), &MatchConfig::default()).unwrap();
    let top = &ranked.pairs()[0];
    assert_eq!(top.reference.as_str(), "R007");
    assert!((top.score - 1.0).abs() < 1e-6);
}

/// Direct evaluation over a score table: per patch pair, max over scales per
/// model, fuse models, penalize partial pairs, then max (or top-2 mean) over
/// the pooled global-local and local-global values.
fn oracle_pair_score(table: &ScoreTable, q: &str, r: &str, specs: &[EnsembleSpec], tricks: &TrickConfig) -> Option<f64> {
    let mut per_pair: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for e in table.entries().iter().filter(|e| e.query.as_str() == q && e.reference.as_str() == r) {
        let slot = per_pair.entry((e.query_patch.clone(), e.reference_patch.clone())).or_default();
        let v = slot.entry(e.model.clone()).or_insert(f64::NEG_INFINITY);
        *v = v.max(e.score);
    }
    let mut pool = Vec::new();
    for ((qp, rp), models) in &per_pair {
        if rp != "orig" && tricks.face_skip.skips(&ImageId::new(r).unwrap()) {
            continue;
        }
        let fused = if specs.is_empty() {
            models.values().copied().reduce(f64::max)
        } else {
            let mut best: Option<f64> = None;
            for s in specs {
                let out = match s.criterion {
                    Criterion::Confidence => {
                        let scores: Option<Vec<f64>> = s.models.iter().map(|m| models.get(m).copied()).collect();
                        scores.and_then(|sc| {
                            let pass = sc.iter().zip(&s.thresholds).all(|(a, t)| a > t);
                            if pass { sc.into_iter().reduce(f64::max) } else { None }
                        })
                    }
                    Criterion::Completeness => s.models.iter().filter_map(|m| models.get(m).copied()).reduce(f64::max),
                };
                best = match (best, out) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
            }
            best
        };
        let Some(f) = fused else { continue };
        let orig = |p: &str| ["orig", "rot90", "rot180", "rot270"].contains(&p);
        let g = if orig(qp) && orig(rp) { 1.0 } else { tricks.partial_penalty };
        pool.push(f * g);
    }
    pool.sort_by(|a, b| b.total_cmp(a));
    match (pool.len(), tricks.top2_average) {
        (0, _) => None,
        (1, _) | (_, false) => Some(pool[0]),
        (_, true) => Some((pool[0] + pool[1]) / 2.0),
    }
}

#[test]
fn pipeline_matches_table_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let qp: Vec<String> = QUERY_PATCHES.map(String::from).to_vec();
    let specs = vec![
        EnsembleSpec::confidence(vec!["a".into(), "b".into()], vec![-0.2, -0.3]).unwrap(),
        EnsembleSpec::completeness(vec!["c".into()]).unwrap(),
    ];
    for (seed_tricks, top2) in [(0, false), (1, true)] {
        let q = random_store(&mut rng, "Q", 3, &qp, &["a", "b", "c"], 6);
        let r = random_store(&mut rng, "R", 4, &reference_patches(), &["a", "b", "c"], 6);
        let tricks = TrickConfig {
            top2_average: top2,
            face_skip: if seed_tricks == 1 { FaceSkip::from_ids([ImageId::new("R002").unwrap()]) } else { FaceSkip::default() },
            ..TrickConfig::default()
        };
        let cfg = MatchConfig { top_t: 0, modes: MatchModes::default() };
        let ranked = match_pipeline(&q, &r, &specs, &tricks, &cfg).unwrap();
        let table = pairwise_scores(&q, &r, MatchModes::default()).unwrap();
        let mut expected = 0;
        for qi in 0..3 {
            for ri in 0..4 {
                let (qn, rn) = (format!("Q{qi:03}"), format!("R{ri:03}"));
                let want = oracle_pair_score(&table, &qn, &rn, &specs, &tricks);
                let got = ranked.pairs().iter().find(|p| p.query.as_str() == qn && p.reference.as_str() == rn).map(|p| p.score);
                assert_eq!(got, want, "{qn} {rn}");
                expected += want.is_some() as usize;
            }
        }
        assert_eq!(ranked.len(), expected);
    }
}

#[test]
fn single_pair_default_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let qp: Vec<String> = QUERY_PATCHES.map(String::from).to_vec();
    let q = random_store(&mut rng, "Q", 1, &qp, &["m"], 5);
    let r = random_store(&mut rng, "R", 1, &reference_patches(), &["m"], 5);
    let tricks = TrickConfig::default();
    let table = pairwise_scores(&q, &r, MatchModes::default()).unwrap();
    let ranked = match_pipeline(&q, &r, &[], &tricks, &MatchConfig::default()).unwrap();
    assert_eq!(ranked.len(), 1);
    // Eq: max over the 6 query patches against the reference original and
    // the 19 reference patches against the query original.
    let mut best = f64::NEG_INFINITY;
    for p in QUERY_PATCHES {
        let g = if p.starts_with('c') { 0.95 } else { 1.0 };
        best = best.max(g * table.get("Q000", p, "R000", "orig", "m", 256).unwrap());
    }
    for p in reference_patches() {
        let g = if p.starts_with('c') || p.starts_with('g') { 0.95 } else { 1.0 };
        best = best.max(g * table.get("Q000", "orig", "R000", &p, "m", 256).unwrap());
    }
    assert_eq!(ranked.pairs()[0].score, best);
}

#[test]
fn reference_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let qp: Vec<String> = QUERY_PATCHES.map(String::from).to_vec();
    let q = random_store(&mut rng, "Q", 5, &qp, &["m"], 8);
    let r = random_store(&mut rng, "R", 30, &reference_patches(), &["m"], 8);
    let mut shuffled = r.records().to_vec();
    shuffled.reverse();
    shuffled.swap(3, 100);
    let r2 = FeatureStore::new(8, shuffled).unwrap();
    let cfg = MatchConfig { top_t: 3, ..MatchConfig::default() };
    let a = match_pipeline(&q, &r, &[], &TrickConfig::default(), &cfg).unwrap();
    let b = match_pipeline(&q, &r2, &[], &TrickConfig::default(), &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.len() <= 5 * 30);
}

#[test]
fn pruning_keeps_top_references() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let qp: Vec<String> = QUERY_PATCHES.map(String::from).to_vec();
    let q = random_store(&mut rng, "Q", 2, &qp, &["m"], 8);
    let r = random_store(&mut rng, "R", 40, &reference_patches(), &["m"], 8);
    let all = match_pipeline(&q, &r, &[], &TrickConfig::default(), &MatchConfig { top_t: 0, ..MatchConfig::default() }).unwrap();
    let pruned = match_pipeline(&q, &r, &[], &TrickConfig::default(), &MatchConfig { top_t: 1, ..MatchConfig::default() }).unwrap();
    assert_eq!(all.len(), 80);
    assert!(pruned.len() < all.len());
    for p in pruned.pairs() {
        assert!(all.pairs().contains(p));
    }
    let top_q0 = all.pairs().iter().find(|p| p.query.as_str() == "Q000").unwrap();
    assert!(pruned.pairs().contains(top_q0));
}

#[test]
fn empty_stores_give_empty_list() {
    let e = FeatureStore::empty(4);
    assert!(match_pipeline(&e, &e, &[], &TrickConfig::default(), &MatchConfig::default()).unwrap().is_empty());
}

fn score() -> impl Strategy<Value = f64> {
    -1.0f64..1.0
}

proptest! {
    #[test]
    fn confidence_matches_formula(pairs in prop::collection::vec((score(), score()), 1..6)) {
        let all_pass = pairs.iter().all(|(s, t)| s > t);
        let got = confidence_ensemble(&pairs);
        prop_assert_eq!(got.is_none(), !all_pass);
        if all_pass {
            let m = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(got.unwrap().to_bits(), m.to_bits());
        }
    }

    #[test]
    fn completeness_is_monotone(mut scores in prop::collection::vec(score(), 1..8), i in 0usize..8, bump in 0.0f64..1.0) {
        let before = completeness_ensemble(&scores).unwrap();
        let i = i % scores.len();
        scores[i] += bump;
        prop_assert!(completeness_ensemble(&scores).unwrap() >= before);
    }

    #[test]
    fn patch_ensemble_is_monotone(gl in prop::collection::vec(score(), 0..6), lg in prop::collection::vec(score(), 1..6), i in 0usize..12, bump in 0.0f64..1.0, top2 in any::<bool>()) {
        let before = patch_ensemble(&gl, &lg, top2).unwrap();
        let mut all: Vec<f64> = gl.iter().chain(&lg).copied().collect();
        let i = i % all.len();
        all[i] += bump;
        let (a, b) = all.split_at(gl.len());
        prop_assert!(patch_ensemble(a, b, top2).unwrap() >= before);
    }

    #[test]
    fn scaling_preserves_order(gl in prop::collection::vec(prop::collection::vec(score(), 1..5), 2..6), c in 0.1f64..10.0, top2 in any::<bool>()) {
        let plain: Vec<f64> = gl.iter().map(|g| patch_ensemble(g, &[], top2).unwrap()).collect();
        let scaled: Vec<f64> = gl.iter().map(|g| patch_ensemble(&g.iter().map(|x| x * c).collect::<Vec<_>>(), &[], top2).unwrap()).collect();
        for i in 0..plain.len() {
            for j in 0..plain.len() {
                if plain[i] < plain[j] {
                    prop_assert!(scaled[i] <= scaled[j]);
                }
            }
        }
    }
}
