//! Blocked inner products.

const BLOCK: usize = 64;

/// Row-major `a.len() x b.len()` matrix of inner products, accumulated in
/// f64 and computed tile by tile.
pub(crate) fn dot_block(a: &[&[f32]], b: &[&[f32]]) -> Vec<f64> {
    let mut out = vec![0.0f64; a.len() * b.len()];
    for b0 in (0..b.len()).step_by(BLOCK) {
        let b1 = (b0 + BLOCK).min(b.len());
        for (i, row) in a.iter().enumerate() {
            let dst = &mut out[i * b.len() + b0..i * b.len() + b1];
            for (d, col) in dst.iter_mut().zip(&b[b0..b1]) {
                *d = dot(row, col);
            }
        }
    }
    out
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] as f64 * y[k] as f64;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(&x, &y)| x as f64 * y as f64).sum();
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}
