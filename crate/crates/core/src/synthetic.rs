//! Seeded synthetic embeddings for benchmarks and end-to-end fixtures.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::embed_io::{EmbeddingSet, Modality};
use crate::error::Result;
use crate::rng::SplitMix64;

/// `rows x cols` matrix of independent standard normal draws, row-major.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SplitMix64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`), the Q
/// factor of a Gaussian matrix.
pub fn orthonormal_columns(rows: usize, cols: usize, rng: &mut SplitMix64) -> Array2<f64> {
    assert!(rows >= cols, "need rows >= cols");
    let g = gaussian_matrix(rows, cols, rng);
    let q = DMatrix::from_fn(rows, cols, |i, j| g[[i, j]]).qr().q();
    Array2::from_shape_fn((rows, cols), |(i, j)| q[(i, j)])
}

/// Sample ids `s00000`, `s00001`, ...
pub fn sample_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:05}")).collect()
}

pub fn to_set(rows: &Array2<f64>, modality: Modality, source: &str) -> Result<EmbeddingSet> {
    EmbeddingSet::new(
        sample_ids(rows.nrows()),
        modality,
        rows.mapv(|v| v as f32),
        source,
    )
}

/// Independent Gaussian vision and text sets of `n` rows.
pub fn random_pair(n: usize, d: usize, seed: u64) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let mut rng = SplitMix64::new(seed);
    let v = gaussian_matrix(n, d, &mut rng);
    let t = gaussian_matrix(n, d, &mut rng);
    Ok((
        to_set(&v, Modality::Vision, "vision")?,
        to_set(&t, Modality::Text, "text")?,
    ))
}

/// Text set plus one vision set per `sigma`: the text rows under a random
/// orthogonal map, plus Gaussian noise of standard deviation `sigma` per
/// coordinate. Larger `sigma` means a harder alignment.
pub fn monotone_pool(
    n: usize,
    d: usize,
    sigmas: &[f64],
    seed: u64,
) -> Result<(EmbeddingSet, Vec<EmbeddingSet>)> {
    let mut rng = SplitMix64::new(seed);
    let text = gaussian_matrix(n, d, &mut rng);
    let mut vision = Vec::with_capacity(sigmas.len());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let q = orthonormal_columns(d, d, &mut rng);
        let noise = gaussian_matrix(n, d, &mut rng);
        let rows = text.dot(&q) + noise * sigma;
        vision.push(to_set(&rows, Modality::Vision, &format!("enc{k}"))?);
    }
    Ok((to_set(&text, Modality::Text, "text")?, vision))
}
