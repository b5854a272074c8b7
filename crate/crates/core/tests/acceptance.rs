//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use d2lv::augment::{enumerate_sets, generate_corpus, AssetPool, AugmentConfig, AugmentationSet, SeedPolicy};
use d2lv::evaluation::{micro_ap, RankedPairList};
use d2lv::features::{extract_all, pca_fit, project_store, ExtractRequest, PcaOptions, TiledDescriptor};
use d2lv::learncore::{
    ce_label_smooth, gem_pool, lr_ratio, triplet_hard_loss, GemParams, ScheduleConfig, SmoothConfig, TripletConfig,
    TripletDistance,
};
use d2lv::matching::{
    completeness_ensemble, confidence_ensemble, match_pipeline, patch_ensemble, MatchConfig, MatchModes,
    TrickConfig,
};
use d2lv::pairs::{write_pairs, GroundTruth};
use d2lv::patches::{grid_cells, reference_patches, PatchConfig, PatchPlan, PatchRole, PatchRule, StubDetector};
use d2lv::store::write_feature_store;
use d2lv::synth::{generate_bench, synth_bench, SynthConfig};
use d2lv::{ImageBuffer, ImageId, PairScore};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn schedule_oracle(e: f64) -> f64 {
    if e < 5.0 {
        0.99 * e / 5.0 + 0.01
    } else if e < 10.0 {
        1.0
    } else {
        0.5 * (((e - 10.0) / 15.0 * std::f64::consts::PI).cos() + 1.0)
    }
}

fn schedule_fidelity() -> Outcome {
    let cfg = ScheduleConfig::default();
    let mut worst = 0.0f64;
    for e in [0.0, 2.0, 5.0, 7.0, 10.0, 17.5, 24.999] {
        let got = lr_ratio(e, &cfg).map_err(|x| x.to_string())?;
        worst = worst.max((got - schedule_oracle(e)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let h = 1e-9;
    for b in [5.0, 10.0] {
        let left = lr_ratio(b - h, &cfg).unwrap();
        let right = lr_ratio(b, &cfg).unwrap();
        ensure((left - right).abs() < 1e-8, || format!("jump of {} at epoch {b}", (left - right).abs()))?;
    }
    Ok(format!("max deviation {worst:.1e}, continuous at 5 and 10"))
}

// ---------------------------------------------------------------- 2

fn ensemble_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Quantized draws make exact ties with thresholds common.
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if rng.random_bool(0.3) {
            rng.random_range(-10i32..=10) as f64 / 10.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    let mut gated_none = 0;
    for t in 0..10_000 {
        let n = rng.random_range(1..=5);
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
        let want_conf = if pairs.iter().all(|&(s, a)| s > a) {
            Some(pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max))
        } else {
            None
        };
        let got = confidence_ensemble(&pairs);
        gated_none += got.is_none() as usize;
        ensure(got.map(f64::to_bits) == want_conf.map(f64::to_bits), || format!("confidence tuple {t}: {pairs:?}"))?;

        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut want = scores[0];
        for &s in &scores[1..] {
            if s > want {
                want = s;
            }
        }
        ensure(completeness_ensemble(&scores).map(f64::to_bits) == Some(want.to_bits()), || format!("completeness tuple {t}"))?;

        let gl: Vec<f64> = (0..rng.random_range(0..6)).map(|_| draw(&mut rng)).collect();
        let lg: Vec<f64> = (0..rng.random_range(usize::from(gl.is_empty())..6)).map(|_| draw(&mut rng)).collect();
        let max_gl = gl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_lg = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let want_max = max_gl.max(max_lg);
        ensure(patch_ensemble(&gl, &lg, false).map(f64::to_bits) == Some(want_max.to_bits()), || format!("patch max tuple {t}"))?;
        let mut pool: Vec<f64> = gl.iter().chain(&lg).copied().collect();
        pool.sort_by(|a, b| b.total_cmp(a));
        let want_top2 = if pool.len() == 1 { pool[0] } else { (pool[0] + pool[1]) / 2.0 };
        let got_top2 = patch_ensemble(&gl, &lg, true).unwrap();
        ensure((got_top2 - want_top2).abs() <= 1e-15, || format!("top-2 tuple {t}: {got_top2} vs {want_top2}"))?;
    }
    Ok(format!("10000 tuples, {gated_none} gated out"))
}

// ---------------------------------------------------------------- 3

fn naive_micro_ap(hits: &[bool], total: usize) -> f64 {
    let mut sum = 0.0;
    for r in 0..hits.len() {
        if hits[r] {
            let found = hits[..=r].iter().filter(|&&h| h).count();
            sum += found as f64 / (r + 1) as f64;
        }
    }
    sum / total as f64
}

fn id(s: String) -> ImageId {
    ImageId::new(s).unwrap()
}

fn micro_ap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let n = rng.random_range(1..=10_000);
        let rate: f64 = rng.random_range(0.01..0.6);
        let mut pairs = Vec::with_capacity(n);
        let mut positives = Vec::new();
        for i in 0..n {
            let (q, r) = (id(format!("Q{}", i % 97)), id(format!("R{i}")));
            if rng.random_bool(rate) {
                positives.push((q.clone(), r.clone()));
            }
            // Coarse scores force tie-breaking by ids.
            pairs.push(PairScore { query: q, reference: r, score: (rng.random_range(0..500) as f64) / 7.0 });
        }
        let missing = rng.random_range(0..5);
        let total = positives.len() + missing;
        if total == 0 {
            continue;
        }
        let gt = GroundTruth::new(positives).with_total_positives(total).unwrap();
        let ranked = RankedPairList::new(pairs).unwrap();
        let hits: Vec<bool> = ranked.pairs().iter().map(|p| gt.is_positive(&p.query, &p.reference)).collect();
        let got = micro_ap(&ranked, &gt).unwrap();
        let want = naive_micro_ap(&hits, total);
        worst = worst.max((got - want).abs());
        ensure(worst <= 1e-9, || format!("instance {inst}: {got} vs {want}"))?;
    }
    let fixture = |total: usize| {
        let pairs = vec![
            PairScore { query: id("A".into()), reference: id("a".into()), score: 3.0 },
            PairScore { query: id("B".into()), reference: id("x".into()), score: 2.0 },
            PairScore { query: id("C".into()), reference: id("c".into()), score: 1.0 },
        ];
        let gt = GroundTruth::new([(id("A".into()), id("a".into())), (id("C".into()), id("c".into()))])
            .with_total_positives(total)
            .unwrap();
        format!("{:.6}", micro_ap(&RankedPairList::new(pairs).unwrap(), &gt).unwrap())
    };
    ensure(fixture(2) == "0.833333", || format!("5/6 fixture gave {}", fixture(2)))?;
    ensure(fixture(3) == "0.555556", || format!("5/9 fixture gave {}", fixture(3)))?;
    Ok(format!("100 instances, max deviation {worst:.1e}; fixtures 0.833333 and 0.555556"))
}

// ---------------------------------------------------------------- 4

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Hard mining margins: gaps to the runner-up positive/negative and the
/// distance of every hinge from its kink.
fn triplet_is_degenerate(points: &[Vec<f64>], labels: &[usize], margin: f64, normalized: bool) -> bool {
    let pts: Vec<Vec<f64>> = if normalized {
        points.iter().map(|p| {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            p.iter().map(|x| x / n).collect()
        }).collect()
    } else {
        points.to_vec()
    };
    for a in 0..pts.len() {
        let mut pos: Vec<f64> = Vec::new();
        let mut neg: Vec<f64> = Vec::new();
        for j in 0..pts.len() {
            if j != a {
                let d = dist(&pts[a], &pts[j]);
                if labels[j] == labels[a] { pos.push(d) } else { neg.push(d) }
            }
        }
        pos.sort_by(|x, y| y.total_cmp(x));
        neg.sort_by(|x, y| x.total_cmp(y));
        if (pos.len() > 1 && pos[0] - pos[1] < 1e-3) || (neg.len() > 1 && neg[1] - neg[0] < 1e-3) {
            return true;
        }
        if (pos[0] - neg[0] + margin).abs() < 1e-3 || pos[0] < 1e-3 || neg[0] < 1e-3 {
            return true;
        }
    }
    false
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst_t = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let normalized = checked % 2 == 1;
        let cfg = TripletConfig {
            margin: 0.3,
            distance: if normalized { TripletDistance::NormalizedEuclidean } else { TripletDistance::Euclidean },
        };
        let (p, k, d) = (3, 2, 4);
        let labels: Vec<usize> = (0..p * k).map(|i| i / k).collect();
        let emb: Vec<Vec<f64>> = (0..p * k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        if triplet_is_degenerate(&emb, &labels, cfg.margin, normalized) {
            continue;
        }
        let out = triplet_hard_loss(&emb, &labels, &cfg).map_err(|e| e.to_string())?;
        let mut numeric = Vec::new();
        let mut analytic = Vec::new();
        for i in 0..emb.len() {
            for j in 0..d {
                let mut plus = emb.clone();
                plus[i][j] += h;
                let mut minus = emb.clone();
                minus[i][j] -= h;
                let lp = triplet_hard_loss(&plus, &labels, &cfg).unwrap().loss;
                let lm = triplet_hard_loss(&minus, &labels, &cfg).unwrap().loss;
                numeric.push((lp - lm) / (2.0 * h));
                analytic.push(out.gradient[i][j]);
            }
        }
        let e = rel_err(&analytic, &numeric);
        worst_t = worst_t.max(e);
        ensure(e < 1e-4, || format!("triplet point {checked}: relative error {e:e}"))?;
        checked += 1;
    }

    let mut worst_c = 0.0f64;
    for point in 0..100 {
        let classes = rng.random_range(2..12);
        let cfg = SmoothConfig { epsilon: rng.random_range(0.0..0.3), classes };
        let target = rng.random_range(0..classes);
        let logits: Vec<f64> = (0..classes).map(|_| rng.random_range(-4.0..4.0)).collect();
        let (_, grad) = ce_label_smooth(&logits, target, &cfg).map_err(|e| e.to_string())?;
        let numeric: Vec<f64> = (0..classes)
            .map(|j| {
                let mut plus = logits.clone();
                plus[j] += h;
                let mut minus = logits.clone();
                minus[j] -= h;
                (ce_label_smooth(&plus, target, &cfg).unwrap().0 - ce_label_smooth(&minus, target, &cfg).unwrap().0) / (2.0 * h)
            })
            .collect();
        let e = rel_err(&grad, &numeric);
        worst_c = worst_c.max(e);
        ensure(e < 1e-4, || format!("cross-entropy point {point}: relative error {e:e}"))?;
    }
    Ok(format!("triplet max rel err {worst_t:.1e}, cross-entropy {worst_c:.1e}"))
}

// ---------------------------------------------------------------- 5

fn gem_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let n = rng.random_range(1..64);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..5.0)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let max = x.iter().copied().fold(0.0, f64::max);
        let g1 = gem_pool(&x, &GemParams { p: 1.0, epsilon: 1e-6 }).unwrap();
        ensure((g1 - mean).abs() <= 1e-12 * mean, || format!("case {case}: p=1 gives {g1}, mean {mean}"))?;
        let mut prev = 0.0f64;
        for p in [0.5, 1.0, 2.0, 3.0, 4.5, 8.0, 16.0] {
            let g = gem_pool(&x, &GemParams { p, epsilon: 1e-6 }).unwrap();
            ensure(g >= prev * (1.0 - 1e-12), || format!("case {case}: not monotone at p={p}"))?;
            let lower = max * (1.0 / n as f64).powf(1.0 / p);
            ensure(g >= lower * (1.0 - 1e-12) && g <= max * (1.0 + 1e-12), || format!("case {case}: bound broken at p={p}"))?;
            prev = g;
        }
    }
    Ok("1000 inputs, 7 exponents each".into())
}

// ---------------------------------------------------------------- 6

fn patch_cardinality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let plan = PatchPlan::default_reference();
    let cfg = PatchConfig::default();
    for _case in 0..100 {
        let (w, h) = (rng.random_range(3..=600), rng.random_range(3..=600));
        let img = ImageBuffer::from_fn(w, h, |x, y| [(x % 251) as u8, (y % 241) as u8, 9]);
        let patches = reference_patches(&img, &ImageId::new("R").unwrap(), &plan, &cfg).map_err(|e| e.to_string())?;
        ensure(patches.len() == 19, || format!("{w}x{h}: {} patches", patches.len()))?;
        for n in [2u32, 3] {
            let mut cover = vec![0u8; (w * h) as usize];
            for c in grid_cells(w, h, n) {
                ensure(c.w >= 1 && c.h >= 1 && c.fits(w, h), || format!("{w}x{h}: bad cell {c:?}"))?;
                for y in c.y..c.bottom() {
                    for x in c.x..c.right() {
                        cover[(y * w + x) as usize] += 1;
                    }
                }
            }
            ensure(cover.iter().all(|&c| c == 1), || format!("{w}x{h}: grid {n} is not a partition"))?;
        }
    }
    Ok("100 sizes, 19 patches each, grids partition exactly".into())
}

// ---------------------------------------------------------------- 7

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn pca_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_orth = 0.0f64;
    let mut worst_var = 0.0f64;
    for (n, d, k) in [(400usize, 32usize, 10usize), (120, 96, 20), (600, 512, 40)] {
        // Latent factors with a decaying spectrum plus small noise.
        let latent = d.min(48);
        let basis: Vec<Vec<f64>> = (0..latent).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let samples: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                let mut v = vec![0.0f64; d];
                for (i, b) in basis.iter().enumerate() {
                    let z: f64 = rng.random_range(-1.0..1.0) / (1.0 + i as f64);
                    for (x, bb) in v.iter_mut().zip(b) {
                        *x += z * bb;
                    }
                }
                v.iter().map(|&x| (x + rng.random_range(-0.01..0.01)) as f32).collect()
            })
            .collect();
        let model = pca_fit(&samples, PcaOptions { d_out: Some(k), whiten: false }).map_err(|e| e.to_string())?;
        let c = model.components();
        for i in 0..c.len() {
            for j in 0..c.len() {
                let dot: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                worst_orth = worst_orth.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        // Oracle covariance (population normalization) and its spectrum.
        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j] as f64).sum::<f64>() / n as f64).collect();
        let centered: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().zip(&mean).map(|(&x, m)| x as f64 - m).collect()).collect();
        let mut cov = vec![vec![0.0f64; d]; d];
        for s in &centered {
            for i in 0..d {
                for j in i..d {
                    cov[i][j] += s[i] * s[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] /= n as f64;
                cov[j][i] = cov[i][j];
            }
        }
        let eig = jacobi_eigenvalues(cov);
        let total: f64 = eig.iter().sum();
        let retained: f64 = eig[..k].iter().sum();
        for (a, b) in model.variances().iter().zip(&eig) {
            worst_var = worst_var.max((a - b).abs());
        }
        worst_var = worst_var.max((model.total_variance() - total).abs());
        // Reconstruction residual of the training samples.
        let mut residual = 0.0;
        for s in &samples {
            let y = model.transform(s).unwrap();
            let c2: f64 = centered_norm2(s, &mean);
            residual += c2 - y.iter().map(|v| v * v).sum::<f64>();
        }
        residual /= n as f64;
        worst_var = worst_var.max((residual - (total - retained)).abs());
        ensure(worst_orth <= 1e-10, || format!("n={n} d={d}: orthonormality error {worst_orth:e}"))?;
        ensure(worst_var <= 1e-8, || format!("n={n} d={d}: variance disagreement {worst_var:e}"))?;
    }
    Ok(format!("orthonormality {worst_orth:.1e}, variance agreement {worst_var:.1e} (up to 512 dims)"))
}

fn centered_norm2(s: &[f32], mean: &[f64]) -> f64 {
    s.iter().zip(mean).map(|(&x, m)| (x as f64 - m).powi(2)).sum()
}

// ---------------------------------------------------------------- 8

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Every artifact of one run, as bytes.
fn determinism_run(workers: usize) -> BTreeMap<String, Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| {
        let mut out = BTreeMap::new();
        let tmp = tempfile::tempdir().unwrap();

        let src = tmp.path().join("src");
        std::fs::create_dir(&src).unwrap();
        let mut sources = Vec::new();
        for i in 0..20u32 {
            let p = src.join(format!("s{i:02}.ppm"));
            ImageBuffer::from_fn(72, 60, |x, y| [(x * 3 + i) as u8, (y * 4) as u8, ((x ^ y) * 5) as u8]).save(&p).unwrap();
            sources.push(p);
        }
        let cfg = AugmentConfig { train_side: 64, ..AugmentConfig::default() };
        let assets = AssetPool { faces: vec![ImageBuffer::filled(16, 16, [200, 160, 140])], images: vec![ImageBuffer::filled(40, 40, [10, 90, 30])] };
        for set in enumerate_sets(&cfg).unwrap().into_iter().filter(|s: &AugmentationSet| s.advanced.is_some() || s.black_white).take(3) {
            let dir = tmp.path().join(&set.name);
            generate_corpus(&sources, &set, SeedPolicy::new(11), &assets, &dir).unwrap();
            for (k, v) in read_tree(&dir) {
                out.insert(format!("corpus/{}/{}", set.name, k.display()), v);
            }
        }

        let bench_dir = tmp.path().join("bench");
        let bench = synth_bench(&SynthConfig::new(12, 4, 4, 4, 13), &bench_dir).unwrap();
        for (k, v) in read_tree(&bench_dir) {
            out.insert(format!("synth/{}", k.display()), v);
        }

        let model = TiledDescriptor::new("t4", 4);
        let pcfg = PatchConfig::default();
        let rplan = PatchPlan::default_reference();
        let qplan = PatchPlan::default_query().with_rule(PatchRule::Proposals(2)).unwrap();
        let rreq = ExtractRequest { plan: &rplan, patch_cfg: &pcfg, role: PatchRole::Reference, detector: None, scales: &[64, 96], pca: None };
        let qreq = ExtractRequest { plan: &qplan, role: PatchRole::Query, detector: Some(&StubDetector), ..rreq };
        let refs = extract_all(&bench.references, &model, &rreq).unwrap().store;
        let queries = extract_all(&bench.query_images(), &model, &qreq).unwrap().store;
        for (name, store) in [("refs", &refs), ("queries", &queries)] {
            let mut buf = Vec::new();
            write_feature_store(store, &mut buf).unwrap();
            out.insert(format!("extract/{name}"), buf);
        }

        let ranked = match_pipeline(&queries, &refs, &[], &TrickConfig::default(), &MatchConfig { top_t: 5, ..MatchConfig::default() }).unwrap();
        let mut buf = Vec::new();
        write_pairs(ranked.pairs(), &mut buf).unwrap();
        out.insert("match/pairs.csv".into(), buf);
        out
    })
}

fn determinism() -> Outcome {
    let a = determinism_run(1);
    let b = determinism_run(1);
    let c = determinism_run(8);
    ensure(a.len() > 100, || format!("only {} artifacts", a.len()))?;
    for (name, other) in [("rerun", &b), ("8 workers", &c)] {
        ensure(a.keys().eq(other.keys()), || format!("{name}: artifact sets differ"))?;
        for (k, v) in &a {
            ensure(other[k] == *v, || format!("{name}: {k} differs"))?;
        }
    }
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("{} artifacts ({bytes} bytes) identical across reruns and 1 vs 8 workers", a.len()))
}

// ---------------------------------------------------------------- 9

fn ablation_trend() -> Outcome {
    let bench = generate_bench(&SynthConfig::new(200, 50, 50, 100, 7)).map_err(|e| e.to_string())?;
    let gt = GroundTruth::new(bench.ground_truth());
    let model = TiledDescriptor::default();
    let pcfg = PatchConfig::default();
    let rplan = PatchPlan::default_reference();
    let qplan = PatchPlan::default_query().with_rule(PatchRule::Proposals(3)).unwrap();
    let rreq = ExtractRequest { plan: &rplan, patch_cfg: &pcfg, role: PatchRole::Reference, detector: None, scales: &[256], pca: None };
    let qreq = ExtractRequest { plan: &qplan, role: PatchRole::Query, detector: Some(&StubDetector), ..rreq };
    let refs_raw = extract_all(&bench.references, &model, &rreq).map_err(|e| e.to_string())?.store;
    let queries_raw = extract_all(&bench.query_images(), &model, &qreq).map_err(|e| e.to_string())?.store;
    let samples: Vec<Vec<f32>> = refs_raw.records().iter().map(|r| r.vector.clone()).collect();
    let pca = pca_fit(&samples, PcaOptions { d_out: Some(64), whiten: false }).map_err(|e| e.to_string())?;
    let refs = project_store(&refs_raw, &pca).unwrap().0;
    let queries = project_store(&queries_raw, &pca).unwrap().0;

    let tricks = TrickConfig::default();
    let run = |modes| {
        let ranked = match_pipeline(&queries, &refs, &[], &tricks, &MatchConfig { top_t: 50, modes }).unwrap();
        micro_ap(&ranked, &gt).unwrap()
    };
    let global = run(MatchModes::GLOBAL_ONLY);
    let local = run(MatchModes::default());
    let gain = local - global;
    let detail = format!("global-only uAP {global:.4}, with local verification {local:.4} (gain {gain:+.4})");
    ensure(gain >= 0.05, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 10

fn augmentation_sets() -> Outcome {
    let sets = enumerate_sets(&AugmentConfig::default()).map_err(|e| e.to_string())?;
    let bw = sets.iter().filter(|s| s.black_white).count();
    ensure(sets.len() == 11 && bw == 4, || format!("{} sets, {bw} black-white", sets.len()))?;
    Ok(format!("11 sets, 4 black-white: {}", sets.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(" ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "schedule fidelity", schedule_fidelity, Duration::from_secs(1)),
        (2, "ensemble oracle", ensemble_oracle, Duration::from_secs(5)),
        (3, "micro-AP oracle", micro_ap_oracle, Duration::from_secs(30)),
        (4, "gradient checks", gradient_checks, Duration::from_secs(10)),
        (5, "GeM properties", gem_properties, Duration::from_secs(5)),
        (6, "patch-plan cardinality", patch_cardinality, Duration::from_secs(10)),
        (7, "PCA oracle", pca_oracle, Duration::from_secs(30)),
        (8, "determinism", determinism, Duration::from_secs(180)),
        (9, "ablation trend", ablation_trend, Duration::from_secs(300)),
        (10, "augmentation sets", augmentation_sets, Duration::from_secs(1)),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f, budget) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > budget => Err(format!("{d}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
