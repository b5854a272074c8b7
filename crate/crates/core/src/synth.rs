//! Procedural copy-detection benchmark.
//!
//! References are compositions of colored shapes over a gradient. Queries
//! come in three kinds: overlays (a reference pasted onto a smooth
//! distractor background), crops (a sub-window of a reference) and
//! distractors (fresh compositions with no match). Query ids are assigned
//! after shuffling so their order does not reveal the kind.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::pairs::write_ground_truth;
use crate::types::{BoundingBox, ImageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_refs: usize,
    pub n_overlay: usize,
    pub n_crop: usize,
    pub n_distractors: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_refs: usize, n_overlay: usize, n_crop: usize, n_distractors: usize, seed: u64) -> Self {
        SynthConfig { n_refs, n_overlay, n_crop, n_distractors, seed }
    }
}

/// Side range of generated references and backgrounds.
const MIN_SIDE: u32 = 200;
const MAX_SIDE: u32 = 320;
const OVERLAY_AREA: (f64, f64) = (0.15, 0.35);
const CROP_AREA: (f64, f64) = (0.25, 0.50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    Overlay,
    Crop,
    Distractor,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Overlay => "overlay",
            QueryKind::Crop => "crop",
            QueryKind::Distractor => "distractor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthQuery {
    pub id: ImageId,
    pub kind: QueryKind,
    pub reference: Option<ImageId>,
    /// Overlays: pasted region in query coordinates. Crops: the window in
    /// reference coordinates.
    pub bbox: Option<BoundingBox>,
    pub image: ImageBuffer,
    /// The distractor background an overlay was pasted onto.
    pub background: Option<ImageBuffer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBench {
    pub references: Vec<(ImageId, ImageBuffer)>,
    pub queries: Vec<SynthQuery>,
}

impl SynthBench {
    pub fn ground_truth(&self) -> Vec<(ImageId, ImageId)> {
        let mut gt: Vec<(ImageId, ImageId)> =
            self.queries.iter().filter_map(|q| q.reference.clone().map(|r| (q.id.clone(), r))).collect();
        gt.sort();
        gt
    }

    pub fn query_images(&self) -> Vec<(ImageId, ImageBuffer)> {
        self.queries.iter().map(|q| (q.id.clone(), q.image.clone())).collect()
    }
}

fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag << 40 | index);
    rng
}

fn random_color(rng: &mut impl Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round().clamp(0.0, 255.0) as u8;
    [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
}

/// Linear gradient between two colors along a random direction.
fn smooth_field(w: u32, h: u32, rng: &mut impl Rng) -> ImageBuffer {
    let (a, b) = (random_color(rng), random_color(rng));
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (theta.cos(), theta.sin());
    let span = (w as f64 * dx.abs() + h as f64 * dy.abs()).max(1.0);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    ImageBuffer::from_fn(w, h, |x, y| {
        let t = ((x as f64 - cx) * dx + (y as f64 - cy) * dy) / span + 0.5;
        lerp(a, b, t.clamp(0.0, 1.0))
    })
}

fn random_side(rng: &mut impl Rng) -> u32 {
    rng.random_range(MIN_SIDE..=MAX_SIDE)
}

/// Gradient background with 4 to 9 rectangles, ellipses and triangles.
pub fn shape_composition(w: u32, h: u32, rng: &mut impl Rng) -> ImageBuffer {
    let mut img = smooth_field(w, h, rng);
    let shapes = rng.random_range(4..=9);
    for _ in 0..shapes {
        let color = random_color(rng);
        let (fw, fh) = (w as f64, h as f64);
        let cx = rng.random_range(0.0..fw);
        let cy = rng.random_range(0.0..fh);
        let rx = rng.random_range(0.08..0.3) * fw;
        let ry = rng.random_range(0.08..0.3) * fh;
        let kind = rng.random_range(0..3);
        let tri = [
            (cx + rng.random_range(-rx..rx), cy - ry),
            (cx - rx, cy + ry),
            (cx + rx, cy + rng.random_range(-ry..ry)),
        ];
        let x0 = (cx - rx).floor().max(0.0) as u32;
        let y0 = (cy - ry).floor().max(0.0) as u32;
        let x1 = ((cx + rx).ceil() as u32).min(w);
        let y1 = ((cy + ry).ceil() as u32).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = match kind {
                    0 => true,
                    1 => ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2) <= 1.0,
                    _ => in_triangle((px, py), tri),
                };
                if inside {
                    img.set_pixel(x, y, color);
                }
            }
        }
    }
    img
}

fn in_triangle(p: (f64, f64), t: [(f64, f64); 3]) -> bool {
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let d1 = cross(t[0], t[1], p);
    let d2 = cross(t[1], t[2], p);
    let d3 = cross(t[2], t[0], p);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn overlay_query(reference: &ImageBuffer, rng: &mut impl Rng) -> (ImageBuffer, ImageBuffer, BoundingBox) {
    let (bw, bh) = (random_side(rng), random_side(rng));
    let background = smooth_field(bw, bh, rng);
    let frac = rng.random_range(OVERLAY_AREA.0..=OVERLAY_AREA.1);
    let aspect = reference.width() as f64 / reference.height() as f64;
    let target_area = frac * (bw * bh) as f64;
    let mut w = (target_area * aspect).sqrt().round() as u32;
    let mut h = (target_area / aspect).sqrt().round() as u32;
    // Keep the area while fitting inside the background.
    if w > bw {
        w = bw;
        h = ((target_area / w as f64).round() as u32).min(bh);
    }
    if h > bh {
        h = bh;
        w = ((target_area / h as f64).round() as u32).min(bw);
    }
    let (w, h) = (w.max(1), h.max(1));
    let x = rng.random_range(0..=bw - w);
    let y = rng.random_range(0..=bh - h);
    let mut img = background.clone();
    img.paste(&reference.resize(w, h), x as i64, y as i64);
    (img, background, BoundingBox { x, y, w, h })
}

fn crop_query(reference: &ImageBuffer, rng: &mut impl Rng) -> Result<(ImageBuffer, BoundingBox)> {
    let (rw, rh) = (reference.width(), reference.height());
    let frac = rng.random_range(CROP_AREA.0..=CROP_AREA.1);
    let aspect: f64 = rng.random_range(0.75..(4.0 / 3.0));
    let area = frac * (rw * rh) as f64;
    let w = ((area * aspect).sqrt().round() as u32).clamp(1, rw);
    let h = ((area / w as f64).round() as u32).clamp(1, rh);
    let x = rng.random_range(0..=rw - w);
    let y = rng.random_range(0..=rh - h);
    let bbox = BoundingBox { x, y, w, h };
    Ok((reference.crop(&bbox)?, bbox))
}

/// Generates the benchmark in memory. Output depends only on `cfg`.
pub fn generate_bench(cfg: &SynthConfig) -> Result<SynthBench> {
    let copies = cfg.n_overlay + cfg.n_crop;
    if copies > 0 && cfg.n_refs == 0 {
        return Err(Error::Config("copy queries need at least one reference".into()));
    }
    let references: Vec<(ImageId, ImageBuffer)> = (0..cfg.n_refs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, 1, i as u64);
            let (w, h) = (random_side(&mut rng), random_side(&mut rng));
            (ImageId::new(format!("R{i:06}")).expect("valid id"), shape_composition(w, h, &mut rng))
        })
        .collect();

    let mut main = stream(cfg.seed, 0, 0);
    let sources: Vec<usize> = if copies <= cfg.n_refs {
        rand::seq::index::sample(&mut main, cfg.n_refs, copies).into_vec()
    } else {
        (0..copies).map(|_| main.random_range(0..cfg.n_refs)).collect()
    };
    let total = copies + cfg.n_distractors;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut main);
    let width = total.to_string().len().max(5);

    let mut queries: Vec<SynthQuery> = (0..total)
        .into_par_iter()
        .map(|slot| -> Result<SynthQuery> {
            let mut rng = stream(cfg.seed, 2, slot as u64);
            let id = ImageId::new(format!("Q{:0width$}", order[slot])).expect("valid id");
            if slot < copies {
                let (rid, rimg) = &references[sources[slot]];
                if slot < cfg.n_overlay {
                    let (image, background, bbox) = overlay_query(rimg, &mut rng);
                    Ok(SynthQuery { id, kind: QueryKind::Overlay, reference: Some(rid.clone()), bbox: Some(bbox), image, background: Some(background) })
                } else {
                    let (image, bbox) = crop_query(rimg, &mut rng)?;
                    Ok(SynthQuery { id, kind: QueryKind::Crop, reference: Some(rid.clone()), bbox: Some(bbox), image, background: None })
                }
            } else {
                let (w, h) = (random_side(&mut rng), random_side(&mut rng));
                let image = shape_composition(w, h, &mut rng);
                Ok(SynthQuery { id, kind: QueryKind::Distractor, reference: None, bbox: None, image, background: None })
            }
        })
        .collect::<Result<_>>()?;
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SynthBench { references, queries })
}

/// Writes `references/`, `queries/`, `ground_truth.csv` and `queries.csv`
/// (`query_id,kind,reference_id,x,y,w,h`, empty fields where unknown).
pub fn write_bench(bench: &SynthBench, dir: &Path) -> Result<()> {
    let refs = dir.join("references");
    let qdir = dir.join("queries");
    for d in [&refs, &qdir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    bench
        .references
        .par_iter()
        .try_for_each(|(id, img)| img.save(refs.join(format!("{id}.ppm"))))?;
    bench
        .queries
        .par_iter()
        .try_for_each(|q| q.image.save(qdir.join(format!("{}.ppm", q.id))))?;

    let gt_path = dir.join("ground_truth.csv");
    let f = std::fs::File::create(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    write_ground_truth(&bench.ground_truth(), std::io::BufWriter::new(f))?;

    let meta_path = dir.join("queries.csv");
    let f = std::fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record(["query_id", "kind", "reference_id", "x", "y", "w", "h"])?;
    for q in &bench.queries {
        let b = q.bbox.map(|b| [b.x, b.y, b.w, b.h].map(|v| v.to_string())).unwrap_or_default();
        let reference = q.reference.as_ref().map(ImageId::to_string).unwrap_or_default();
        w.write_record([q.id.as_str(), q.kind.name(), &reference, &b[0], &b[1], &b[2], &b[3]])?;
    }
    w.flush().map_err(|e| Error::io(&meta_path, e))
}

/// Generates and writes the benchmark to `dir`.
pub fn synth_bench(cfg: &SynthConfig, dir: &Path) -> Result<SynthBench> {
    let bench = generate_bench(cfg)?;
    write_bench(&bench, dir)?;
    Ok(bench)
}
