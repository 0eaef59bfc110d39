//! Reproducible point sets: shifted Halton sequences and uniform grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::models::Domain;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// `count` Halton points in `[0, 1)^dim` with a Cranley–Patterson rotation
/// drawn from `seed`. Index 0 of the sequence is skipped.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

/// Halton points mapped into a domain's interior.
pub fn sample_domain(domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    halton(domain.dim(), count, seed)
        .iter()
        .map(|u| domain.from_unit(u))
        .collect()
}

/// Tensor grid with `per_axis` cell midpoints per coordinate, mapped into the domain.
pub fn grid_domain(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let i = k % per_axis;
                    k /= per_axis;
                    (i as f64 + 0.5) / per_axis as f64
                })
                .collect();
            domain.from_unit(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = halton(3, 50, 7);
        assert_eq!(a, halton(3, 50, 7));
        assert_ne!(a, halton(3, 50, 8));
        assert!(a.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn bernoulli_samples_avoid_the_midpoint() {
        let d = Domain::Box { lo: vec![0.0], hi: vec![1.0] };
        for p in sample_domain(&d, 20, 1) {
            assert!(p[0] > 0.2 - 1e-12 && p[0] < 0.8 + 1e-12 && p[0] != 0.5);
        }
    }

    #[test]
    fn grid_size() {
        let d = Domain::Euclidean { dim: 2 };
        let g = grid_domain(&d, 3);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&vec![0.0, 0.0]));
    }
}
