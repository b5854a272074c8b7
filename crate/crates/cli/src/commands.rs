use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use d2lv::augment::{enumerate_sets, generate_corpus, AssetPool, SeedPolicy};
use d2lv::config::PipelineConfig;
use d2lv::evaluation::{micro_ap, pr_curve, recall_at_precision, RankedPairList};
use d2lv::features::{
    extract_all, load_pca, merge_stores, pca_fit, project_store, save_pca, ExtractRequest, PcaOptions,
};
use d2lv::learncore::{lr_ratio, ScheduleConfig};
use d2lv::matching::{match_pipeline, parse_ensemble_specs, FaceSkip, MatchModes};
use d2lv::pairs::{load_ground_truth, save_pairs};
use d2lv::patches::{plan_patches, write_patch_csv, PatchRole, StubDetector};
use d2lv::store::{load_feature_store, save_feature_store};
use d2lv::synth::{synth_bench, SynthConfig};
use d2lv::{image_files, Error, ImageBuffer, ImageId, Result};

use crate::{Cli, Command, Mode, Role};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Corpus(a) => {
            let cfg_sets = enumerate_sets(&cfg.augment)?;
            let Some(set) = cfg_sets.iter().find(|s| s.name == a.set) else {
                let names: Vec<&str> = cfg_sets.iter().map(|s| s.name.as_str()).collect();
                return Err(Error::Config(format!("unknown set {:?}; known: {}", a.set, names.join(" "))));
            };
            let sources = image_files(&a.sources)?;
            let assets = AssetPool::load(a.faces.as_deref(), a.images.as_deref())?;
            let policy = SeedPolicy::new(a.seed.unwrap_or(cfg.seed));
            let manifest = generate_corpus(&sources, set, policy, &assets, &a.out)?;
            let skipped = manifest.skipped().count();
            info!("wrote {} corpus entries ({skipped} skipped)", manifest.entries.len());
            Ok(())
        }
        Command::Patches(a) => {
            let (path, role) = match (a.reference, a.query) {
                (Some(p), _) => (p, PatchRole::Reference),
                (None, Some(p)) => (p, PatchRole::Query),
                (None, None) => unreachable!("clap enforces one side"),
            };
            let img = ImageBuffer::load(&path)?;
            let plan = match role {
                PatchRole::Query => cfg.query_plan()?,
                PatchRole::Reference => cfg.reference_plan()?,
            };
            let patches = plan_patches(&img, &id_of(&path)?, &plan, &cfg.patch_config(), Some(&StubDetector), role)?;
            with_output(a.out.as_deref(), |w| write_patch_csv(&patches, w))
        }
        Command::Extract(a) => {
            cfg.check_paths()?;
            let pca_path = a.pca.or(cfg.features.pca.clone());
            let pca = pca_path.as_ref().map(load_pca).transpose()?;
            let images = load_images(&a.images)?;
            let (role, plan) = match a.role {
                Role::Query => (PatchRole::Query, cfg.query_plan()?),
                Role::Reference => (PatchRole::Reference, cfg.reference_plan()?),
            };
            let scales = a.scales.unwrap_or(cfg.features.scales.clone());
            let patch_cfg = cfg.patch_config();
            let req = ExtractRequest { plan: &plan, patch_cfg: &patch_cfg, role, detector: Some(&StubDetector), scales: &scales, pca: pca.as_ref() };
            let mut stores = Vec::new();
            for model in &cfg.features.models {
                let out = extract_all(&images, model, &req)?;
                if out.degenerate > 0 {
                    warn!("{}: {} projections vanished and were replaced by a basis vector", model.id, out.degenerate);
                }
                stores.push(out.store);
            }
            let store = merge_stores(stores)?;
            info!("{} records of dim {}", store.len(), store.dim());
            save_feature_store(&store, &a.out)
        }
        Command::PcaFit(a) => {
            let store = load_feature_store(&a.store)?;
            let samples: Vec<Vec<f32>> = store.records().iter().map(|r| r.vector.clone()).collect();
            let opts = PcaOptions { d_out: a.dim.or(cfg.features.pca_dim), whiten: a.whiten || cfg.features.whiten };
            let model = pca_fit(&samples, opts)?;
            info!("PCA {} -> {} explains {:.6} of the variance", model.d_raw(), model.d_out(), model.explained_variance_ratio());
            save_pca(&model, &a.out)
        }
        Command::PcaApply(a) => {
            let Some(pca_path) = a.pca.or(cfg.features.pca.clone()) else {
                return Err(Error::Config("pca-apply needs --pca or features.pca".into()));
            };
            let pca = load_pca(&pca_path)?;
            let (store, degenerate) = project_store(&load_feature_store(&a.store)?, &pca)?;
            if degenerate > 0 {
                warn!("{degenerate} projections vanished and were replaced by a basis vector");
            }
            save_feature_store(&store, &a.out)
        }
        Command::Match(a) => {
            let queries = load_feature_store(&a.queries)?;
            let references = load_feature_store(&a.references)?;
            let specs = match &a.specs {
                Some(p) => parse_ensemble_specs(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                None => cfg.ensemble.clone(),
            };
            let mut tricks = cfg.tricks.clone();
            if let Some(g) = a.penalty {
                tricks.partial_penalty = g;
            }
            tricks.top2_average |= a.top2;
            if let Some(p) = &a.face_skip {
                tricks.face_skip = FaceSkip::from_ids(read_id_list(p)?);
            }
            let mut mcfg = cfg.matching;
            if let Some(t) = a.top_t {
                mcfg.top_t = t;
            }
            if let Some(m) = a.mode {
                mcfg.modes = match m {
                    Mode::Full => MatchModes::default(),
                    Mode::Global => MatchModes::GLOBAL_ONLY,
                    Mode::GlobalLocal => MatchModes { global_local: true, local_global: false },
                    Mode::LocalGlobal => MatchModes { global_local: false, local_global: true },
                };
            }
            let ranked = match_pipeline(&queries, &references, &specs, &tricks, &mcfg)?;
            info!("{} ranked pairs", ranked.len());
            save_pairs(ranked.pairs(), &a.out)
        }
        Command::Eval(a) => {
            let ranked = RankedPairList::new(d2lv::pairs::load_pairs(&a.pairs)?)?;
            let mut gt = load_ground_truth(&a.gt)?;
            if let Some(t) = a.total_positives {
                gt = gt.with_total_positives(t)?;
            }
            let ap = micro_ap(&ranked, &gt)?;
            let recall = recall_at_precision(&ranked, &gt, a.precision)?;
            if let Some(p) = &a.curve {
                let curve = pr_curve(&ranked, &gt)?;
                with_output(Some(p), |w| {
                    writeln!(w, "rank,precision,recall").map_err(|e| Error::io(p, e))?;
                    for (i, (prec, rec)) in curve.iter().enumerate() {
                        writeln!(w, "{},{prec:.6},{rec:.6}", i + 1).map_err(|e| Error::io(p, e))?;
                    }
                    Ok(())
                })?;
            }
            println!("uAP={ap:.6}");
            println!("R@P{}={recall:.6}", (a.precision * 100.0).round() as u32);
            Ok(())
        }
        Command::Schedule(a) => {
            let sc = ScheduleConfig { warmup_end: a.warmup_end, hold_end: a.hold_end, total: a.epochs as f64, floor: a.floor };
            let mut out = std::io::stdout().lock();
            let io = |e| Error::io("<stdout>", e);
            writeln!(out, "epoch,lr_ratio").map_err(io)?;
            for e in 0..a.epochs {
                writeln!(out, "{e},{}", lr_ratio(e as f64, &sc)?).map_err(io)?;
            }
            Ok(())
        }
        Command::SynthBench(a) => {
            let sc = SynthConfig::new(a.refs, a.overlay, a.crop, a.distractors, a.seed.unwrap_or(cfg.seed));
            let bench = synth_bench(&sc, &a.out)?;
            info!("{} references, {} queries, {} true pairs", bench.references.len(), bench.queries.len(), bench.ground_truth().len());
            Ok(())
        }
    }
}

fn id_of(path: &Path) -> Result<ImageId> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    ImageId::new(stem)
}

/// Loads every image of `dir`; unreadable files are skipped with a warning.
fn load_images(dir: &Path) -> Result<Vec<(ImageId, ImageBuffer)>> {
    let files = image_files(dir)?;
    let loaded: Vec<Option<(ImageId, ImageBuffer)>> = files
        .par_iter()
        .map(|p| match id_of(p).and_then(|id| Ok((id, ImageBuffer::load(p)?))) {
            Ok(x) => Some(x),
            Err(e) => {
                warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect();
    Ok(loaded.into_iter().flatten().collect())
}

fn read_id_list(path: &PathBuf) -> Result<Vec<ImageId>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(ImageId::new).collect()
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?);
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => f(&mut std::io::stdout().lock()),
    }
}
