//! Thread-count independent Monte-Carlo ensembles.

use rayon::prelude::*;
use rayon::ThreadPool;
use tipping_core::monte_carlo::{
    simulate_escape_range, stationary_passage_range, strip_escape_range, EscapeEstimate, EscapeMethod, EscapeTally,
    PassageTally, RateEstimate, SimulationConfig,
};

use crate::error::{Error, Result};

/// Paths per work item.
pub const BLOCK: u64 = 256;

/// A pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument { name: "threads", reason: "must be at least 1".into() });
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::ThreadPool(e.to_string()))
}

fn blocks(n: u64) -> Vec<(u64, u64)> {
    (0..n).step_by(BLOCK as usize).map(|a| (a, (a + BLOCK).min(n))).collect()
}

/// Escape estimate over `cfg.n_paths` paths, spread over `pool`.
pub fn escape_estimate(
    pool: &ThreadPool,
    rho: f64,
    d: f64,
    cfg: &SimulationConfig,
    method: EscapeMethod,
) -> Result<EscapeEstimate> {
    cfg.validate()?;
    let tallies: Vec<_> = pool.install(|| {
        blocks(cfg.n_paths)
            .into_par_iter()
            .map(|(a, b)| match method {
                EscapeMethod::Threshold => simulate_escape_range(rho, d, cfg, a, b),
                EscapeMethod::Strip => strip_escape_range(rho, d, cfg, a, b),
            })
            .collect()
    });
    let mut total = EscapeTally::default();
    for t in tallies {
        total = total.merge(t?);
    }
    Ok(total.estimate(method))
}

/// Stationary escape rate over `cfg.n_paths` paths, spread over `pool`.
pub fn stationary_rate(pool: &ThreadPool, d: f64, cfg: &SimulationConfig) -> Result<RateEstimate> {
    cfg.validate()?;
    let tallies: Vec<_> = pool.install(|| {
        blocks(cfg.n_paths).into_par_iter().map(|(a, b)| stationary_passage_range(d, cfg, a, b)).collect()
    });
    let mut total = PassageTally::default();
    for t in tallies {
        total = total.merge(t?);
    }
    Ok(total.estimate(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_range() {
        assert_eq!(blocks(0), vec![]);
        let b = blocks(600);
        assert_eq!(b, vec![(0, 256), (256, 512), (512, 600)]);
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(thread_pool(Some(0)).is_err());
    }
}
