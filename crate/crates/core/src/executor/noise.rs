//! Seeded randomness.
//!
//! Every random decision draws from its own ChaCha20 stream. The stream key
//! is SHA-256 over a version tag, the 64-bit run seed (little-endian), a
//! domain label (`"noise"` or `"clip"`), and length-prefixed key parts such as
//! the node id, privacy unit, and scope cell. Editing one part of a plan
//! therefore never shifts the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const STREAM_TAG: &[u8] = b"dpaudit-stream-v1";

pub fn keyed_stream(seed: u64, domain: &str, parts: &[&str]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(STREAM_TAG);
    h.update(seed.to_le_bytes());
    for part in std::iter::once(domain).chain(parts.iter().copied()) {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("Laplace scale must be positive and finite, got {0}")]
pub struct ScaleError(pub f64);

/// One draw from Laplace(0, scale) by inverse CDF:
/// `u ~ U(-1/2, 1/2)`, `x = -scale * sign(u) * ln(1 - 2|u|)`.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64, ScaleError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ScaleError(scale));
    }
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        // u = -1/2 would need ln(0); the open interval excludes it.
        if u == -0.5 {
            continue;
        }
        let sign = if u > 0.0 {
            1.0
        } else if u < 0.0 {
            -1.0
        } else {
            0.0
        };
        return Ok(-scale * sign * (1.0 - 2.0 * u.abs()).ln());
    }
}

/// `n` independent draws from one stream.
pub fn sample_laplace_batch(scale: f64, n: usize, seed: u64) -> Result<Vec<f64>, ScaleError> {
    let mut rng = keyed_stream(seed, "batch", &[]);
    (0..n).map(|_| sample_laplace(scale, &mut rng)).collect()
}

/// Summary statistics of `n` draws, computed in chunks of independent streams.
/// Chunks run in parallel when the `parallel` feature is on; results do not
/// depend on the thread count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceMoments {
    pub n: usize,
    pub mean: f64,
    pub mean_abs: f64,
}

pub const MOMENT_CHUNK: usize = 1 << 16;

pub fn laplace_moments(scale: f64, n: usize, seed: u64, strategy: crate::Strategy) -> Result<LaplaceMoments, ScaleError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ScaleError(scale));
    }
    let chunks: Vec<usize> = (0..n.div_ceil(MOMENT_CHUNK)).collect();
    let chunk_sums = |c: &usize| {
        let start = c * MOMENT_CHUNK;
        let len = MOMENT_CHUNK.min(n - start);
        let mut rng = keyed_stream(seed, "moments", &[&c.to_string()]);
        let mut sum = 0.0;
        let mut sum_abs = 0.0;
        for _ in 0..len {
            let x = sample_laplace(scale, &mut rng).expect("scale checked above");
            sum += x;
            sum_abs += x.abs();
        }
        (sum, sum_abs)
    };
    let partials: Vec<(f64, f64)> = crate::par::map(strategy, &chunks, chunk_sums);
    let (sum, sum_abs) = partials.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(LaplaceMoments { n, mean: sum / n as f64, mean_abs: sum_abs / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_draws() {
        let a = sample_laplace(2.0, &mut keyed_stream(42, "noise", &["n1"])).unwrap();
        let b = sample_laplace(2.0, &mut keyed_stream(42, "noise", &["n1"])).unwrap();
        let c = sample_laplace(2.0, &mut keyed_stream(42, "noise", &["n2"])).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, c);
    }

    #[test]
    fn key_parts_are_length_prefixed() {
        let mut x = keyed_stream(1, "clip", &["ab", "c"]);
        let mut y = keyed_stream(1, "clip", &["a", "bc"]);
        assert_ne!(x.gen::<u64>(), y.gen::<u64>());
    }

    #[test]
    fn rejects_nonpositive_scale() {
        let mut rng = keyed_stream(0, "noise", &[]);
        assert_eq!(sample_laplace(0.0, &mut rng), Err(ScaleError(0.0)));
        assert!(sample_laplace(-1.0, &mut rng).is_err());
        assert!(sample_laplace(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn moments_do_not_depend_on_strategy() {
        let seq = laplace_moments(2.0, 200_000, 9, crate::Strategy::Sequential).unwrap();
        let par = laplace_moments(2.0, 200_000, 9, crate::Strategy::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}
