use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{simulate, simulate_prevalidated, HybridSystem, ModeId, SimOptions};
use crate::linalg::{is_psd, psd_sqrt, serde_rows, serde_vec, symmetrize, Matrix, Vector};

/// Samples may leave the nominal event sequence up to this fraction.
pub const MAX_SPLIT_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloCovariance {
    pub seed: u64,
    pub total: usize,
    /// Samples excluded because their event sequence differed from the
    /// nominal one or their simulation failed.
    pub diverged: usize,
    #[serde(with = "serde_vec")]
    pub mean: Vector,
    #[serde(with = "serde_rows")]
    pub sigma: Matrix,
}

/// Standard normal draw for sample `index`; each sample owns a ChaCha
/// stream so results do not depend on scheduling.
pub fn sample_normal(seed: u64, index: u64, dim: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng))
}

/// Sum of `f(i)` over `0..n` in a fixed balanced binary tree, so the
/// floating-point result is independent of thread count.
fn tree_sum<T: Send>(lo: usize, hi: usize, f: &(impl Fn(usize) -> T + Sync), add: &(impl Fn(T, T) -> T + Sync)) -> T {
    if hi - lo == 1 {
        return f(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = if hi - lo > 4096 {
        rayon::join(|| tree_sum(lo, mid, f, add), || tree_sum(mid, hi, f, add))
    } else {
        (tree_sum(lo, mid, f, add), tree_sum(mid, hi, f, add))
    };
    add(a, b)
}

/// Empirical covariance at `t_span.1` of `n` Gaussian initial conditions
/// `N(mean0, sigma0)` simulated from `t_span.0`.
pub fn monte_carlo_covariance(
    sys: &HybridSystem,
    mode0: ModeId,
    mean0: &Vector,
    sigma0: &Matrix,
    t_span: (f64, f64),
    n: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<MonteCarloCovariance> {
    let dim = mean0.len();
    if sigma0.shape() != (dim, dim) {
        return Err(Error::dims("initial covariance", dim, sigma0.nrows()));
    }
    if !is_psd(&symmetrize(sigma0), 1e-12 * sigma0.amax().max(1.0)) {
        return Err(Error::InvalidParameter("initial covariance is not PSD".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    let nominal = simulate(sys, mode0, mean0, t_span, opts)?;
    let expected = nominal.event_sequence();
    let root = psd_sqrt(&symmetrize(sigma0));

    let finals: Vec<Option<Vector>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let x0 = mean0 + &root * sample_normal(seed, i, dim);
            match simulate_prevalidated(sys, mode0, &x0, t_span, opts, |_| false) {
                Ok(traj) if traj.event_sequence() == expected => Some(traj.final_state().clone()),
                _ => None,
            }
        })
        .collect();
    let kept: Vec<&Vector> = finals.iter().flatten().collect();
    let diverged = n - kept.len();
    if diverged as f64 > MAX_SPLIT_FRACTION * n as f64 || kept.len() < 2 {
        return Err(Error::SplitDistribution { diverged, total: n });
    }
    let m = kept.len();
    let mean = tree_sum(0, m, &|i| kept[i].clone(), &|a, b| a + b) / m as f64;
    let scatter = tree_sum(
        0,
        m,
        &|i| {
            let d = kept[i] - &mean;
            &d * d.transpose()
        },
        &|a, b| a + b,
    );
    Ok(MonteCarloCovariance {
        seed,
        total: n,
        diverged,
        mean,
        sigma: symmetrize(&(scatter / (m - 1) as f64)),
    })
}
