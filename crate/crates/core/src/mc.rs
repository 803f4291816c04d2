//! Shared Monte Carlo plumbing: deterministic seed partitioning and
//! jackknife errors.
//!
//! Every trajectory draws from its own ChaCha stream seeded by
//! `sub_seed(seed, index)`, so ensembles are bit-for-bit reproducible and
//! independent of how trajectories are scheduled across workers.

/// SplitMix64 step; used to hash (seed, trajectory index) into sub-seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-trajectory sub-seed.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x517c_c1b7_2722_0a95)))
}

/// Monte Carlo estimate with its statistical error and reproducibility
/// metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Effective number of independent samples behind `std_error`.
    pub ess: f64,
    /// Relative drift against a halved-step rerun, when one was performed.
    pub step_halving_drift: Option<f64>,
}

impl TrajectoryEstimate {
    /// z-score of this estimate against a reference value.
    pub fn z_score(&self, reference: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == reference {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - reference) / self.std_error
        }
    }
}

/// Leave-one-out jackknife: `full` is the estimate from all `n` units,
/// `loo(k)` the estimate with unit k removed. Returns (estimate, std error).
pub fn jackknife(n: usize, full: f64, loo: impl Fn(usize) -> f64) -> (f64, f64) {
    assert!(n > 1, "jackknife needs at least two units");
    let vals: Vec<f64> = (0..n).map(loo).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (n as f64 - 1.0)
        / n as f64;
    (full, var.sqrt())
}
