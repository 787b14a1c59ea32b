use rayon::prelude::*;

const CHUNK: usize = 8;

/// Sums per-item loss pairs and gradients. Items are grouped in fixed chunks
/// and chunk sums are added in order, so the result does not depend on the
/// number of worker threads.
pub(crate) fn sum_gradients(n: usize, len: usize, item: impl Fn(usize, &mut [f64]) -> [f64; 2] + Sync) -> ([f64; 2], Vec<f64>) {
    let chunks: Vec<([f64; 2], Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut g = vec![0.0; len];
            let mut loss = [0.0; 2];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let l = item(i, &mut g);
                loss[0] += l[0];
                loss[1] += l[1];
            }
            (loss, g)
        })
        .collect();
    let mut grad = vec![0.0; len];
    let mut loss = [0.0; 2];
    for (l, g) in chunks {
        loss[0] += l[0];
        loss[1] += l[1];
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    (loss, grad)
}
