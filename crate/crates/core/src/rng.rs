//! Per-path random streams: ChaCha8 keyed by the master seed, one stream per
//! path id, so results do not depend on how paths are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Domain separator for the auxiliary stream used by exit tests, so the
/// Gaussian increments stay aligned across runs that branch differently.
const AUX_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

pub fn aux_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    path_rng(seed ^ AUX_KEY, path_id)
}

/// Fills `out` with independent `N(0, var)` samples.
pub fn fill_normal(rng: &mut ChaCha8Rng, var: f64, out: &mut [f64]) {
    let sd = var.sqrt();
    for v in out {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, id| {
            let mut r = path_rng(seed, id);
            let mut v = [0.0; 4];
            fill_normal(&mut r, 1.0, &mut v);
            v
        };
        assert_eq!(draw(42, 3), draw(42, 3));
        assert_ne!(draw(42, 3), draw(42, 4));
        assert_ne!(draw(42, 3), draw(43, 3));
        let mut a = aux_rng(42, 3);
        let mut b = path_rng(42, 3);
        assert_ne!(uniform(&mut a), uniform(&mut b));
    }

    #[test]
    fn normal_moments() {
        let mut r = path_rng(7, 0);
        let mut v = vec![0.0; 200_000];
        fill_normal(&mut r, 4.0, &mut v);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        assert!(m.abs() < 0.02);
        assert!((var - 4.0).abs() < 0.05);
    }
}
