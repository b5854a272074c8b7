use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const PCA_MAGIC: &[u8; 4] = b"D2PC";

/// Default output dimension for `d_raw`-dimensional inputs and `n` samples.
pub fn default_output_dim(d_raw: usize, n: usize) -> usize {
    if d_raw >= 1500 {
        1500
    } else {
        d_raw.min(n)
    }
}

/// Mean and principal directions fitted on raw descriptors.
///
/// Without whitening the component rows are orthonormal. With whitening
/// each row is divided by the square root of its variance, so the scaling
/// survives persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `d_out` rows of length `d_raw`, by descending variance.
    components: Vec<Vec<f64>>,
    /// Variance along each component (population covariance).
    variances: Vec<f64>,
    total_variance: f64,
    whitened: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PcaOptions {
    /// Target dimension; [`default_output_dim`] when `None`.
    pub d_out: Option<usize>,
    pub whiten: bool,
}

impl PcaModel {
    pub fn d_raw(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Retained variance per component. Empty for loaded models.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        if self.total_variance == 0.0 {
            return 0.0;
        }
        self.variances.iter().sum::<f64>() / self.total_variance
    }

    pub fn is_whitened(&self) -> bool {
        self.whitened
    }

    /// `components * (v - mean)` without normalization.
    pub fn transform(&self, v: &[f32]) -> Result<Vec<f64>> {
        if v.len() != self.d_raw() {
            return Err(Error::Config(format!(
                "vector has dim {} but the PCA model expects {}",
                v.len(),
                self.d_raw()
            )));
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(&x, m)| x as f64 - m).collect();
        Ok(self.components.iter().map(|row| dot(row, &centered)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, applied twice for f64-level orthogonality.
fn orthonormalize(rows: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for i in 0..rows.len() {
            for j in 0..i {
                let (head, tail) = rows.split_at_mut(i);
                let proj = dot(&tail[0], &head[j]);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * y;
                }
            }
            let n = dot(&rows[i], &rows[i]).sqrt();
            for x in rows[i].iter_mut() {
                *x /= n;
            }
        }
    }
}

/// Fits PCA on `samples` (all of equal length).
///
/// Uses the covariance matrix when the dimension does not exceed the sample
/// count and the Gram matrix otherwise. A target above the numerical rank is
/// reduced to the rank with a warning; rank 0 is an error.
pub fn pca_fit(samples: &[Vec<f32>], opts: PcaOptions) -> Result<PcaModel> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Domain("PCA needs at least one sample".into()));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::Config("PCA samples must share a non-zero dimension".into()));
    }
    if samples.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Domain("PCA samples contain non-finite values".into()));
    }
    let requested = opts.d_out.unwrap_or_else(|| default_output_dim(d, n));
    if requested == 0 || requested > d {
        return Err(Error::Config(format!("PCA output dim {requested} outside 1..={d}")));
    }
    if requested > n {
        return Err(Error::Config(format!("PCA output dim {requested} exceeds the {n} samples")));
    }

    let mut mean = vec![0.0f64; d];
    for s in samples {
        for (m, &x) in mean.iter_mut().zip(s) {
            *m += x as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let x = DMatrix::from_fn(n, d, |i, j| samples[i][j] as f64 - mean[j]);
    let total_variance = x.iter().map(|v| v * v).sum::<f64>() / n as f64;

    // (variance, direction) pairs.
    let mut pairs: Vec<(f64, Vec<f64>)> = if d <= n {
        let cov = (x.transpose() * &x) / n as f64;
        let eig = SymmetricEigen::new(cov);
        (0..d).map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())).collect()
    } else {
        let gram = (&x * x.transpose()) / n as f64;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .map(|k| {
                let lambda = eig.eigenvalues[k];
                let dir = x.transpose() * eig.eigenvectors.column(k);
                (lambda, dir.iter().copied().collect())
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first().map_or(0.0, |p| p.0);
    let tol = top.max(0.0) * 1e-10 * d.max(n) as f64;
    let rank = if top <= f64::MIN_POSITIVE { 0 } else { pairs.iter().take_while(|p| p.0 > tol).count() };
    if rank == 0 {
        return Err(Error::Domain("PCA samples have zero variance (rank 0)".into()));
    }
    let d_out = if requested > rank {
        warn!("PCA output dim {requested} exceeds the data rank {rank}; reducing to {rank}");
        rank
    } else {
        requested
    };
    pairs.truncate(d_out);
    let variances: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut components: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();
    orthonormalize(&mut components);
    for row in components.iter_mut() {
        // Sign convention: the largest-magnitude entry is positive.
        let pivot = row.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    if opts.whiten {
        for (row, &var) in components.iter_mut().zip(&variances) {
            let s = var.sqrt();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    Ok(PcaModel { mean, components, variances, total_variance, whitened: opts.whiten })
}

/// Result of projecting one raw vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub vector: Vec<f32>,
    /// The projection vanished and `vector` is the first basis vector.
    pub degenerate: bool,
}

/// Projects and L2-normalizes. A projection below f32 resolution of the
/// input (e.g. `v == mean`) becomes `e_0`.
pub fn pca_project(model: &PcaModel, v: &[f32]) -> Result<Projection> {
    let y = model.transform(v)?;
    let norm = dot(&y, &y).sqrt();
    let input_norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm <= 1e-6 * (1.0 + input_norm) || !norm.is_finite() {
        let mut vector = vec![0.0f32; y.len()];
        vector[0] = 1.0;
        return Ok(Projection { vector, degenerate: true });
    }
    Ok(Projection { vector: y.iter().map(|&x| (x / norm) as f32).collect(), degenerate: false })
}

pub fn write_pca<W: Write>(model: &PcaModel, mut sink: W) -> std::io::Result<()> {
    sink.write_all(PCA_MAGIC)?;
    sink.write_all(&(model.d_raw() as u32).to_le_bytes())?;
    sink.write_all(&(model.d_out() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * model.d_raw() * (model.d_out() + 1));
    for &m in &model.mean {
        buf.extend_from_slice(&(m as f32).to_le_bytes());
    }
    for row in &model.components {
        for &c in row {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    sink.flush()
}

/// Reads a model written by [`write_pca`]. Rows of unit norm are treated as
/// an unwhitened basis and re-orthonormalized in f64.
pub fn read_pca<R: Read>(mut source: R) -> Result<PcaModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| Error::io("<pca>", e))?;
    if bytes.len() < 12 {
        return Err(Error::Truncation("PCA header shorter than 12 bytes".into()));
    }
    if &bytes[..4] != PCA_MAGIC {
        return Err(Error::Format("bad PCA magic".into()));
    }
    let d_raw = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d_out = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if d_raw == 0 || d_out == 0 || d_out > d_raw {
        return Err(Error::Format(format!("PCA dims {d_raw} -> {d_out} are invalid")));
    }
    let need = 12 + 4 * d_raw * (d_out + 1);
    if bytes.len() < need {
        return Err(Error::Truncation(format!("PCA payload needs {need} bytes, got {}", bytes.len())));
    }
    if bytes.len() > need {
        return Err(Error::Format("trailing bytes after PCA payload".into()));
    }
    let floats: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if floats.iter().any(|x| !x.is_finite()) {
        return Err(Error::Corruption("PCA model has non-finite values".into()));
    }
    let mean = floats[..d_raw].to_vec();
    let mut components: Vec<Vec<f64>> = floats[d_raw..].chunks_exact(d_raw).map(<[f64]>::to_vec).collect();
    let whitened = components.iter().any(|r| (dot(r, r).sqrt() - 1.0).abs() > 1e-4);
    if !whitened {
        orthonormalize(&mut components);
    }
    Ok(PcaModel { mean, components, variances: Vec::new(), total_variance: 0.0, whitened })
}

pub fn save_pca(model: &PcaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pca(model, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pca(std::io::BufReader::new(file))
}
