//! Convergence diagnostics for multi-chain output.

use crate::error::{Error, Result};

/// Potential scale reduction factor (Gelman–Rubin R-hat) for one scalar
/// parameter traced by two or more chains of equal length.
///
/// With chain length `n`, within-chain variance `W` (mean of the per-chain
/// sample variances) and between-chain variance `B` (n times the variance of
/// the chain means), returns `sqrt(((n-1)/n * W + B/n) / W)`.
///
/// A parameter that every chain holds at the same constant has no variance
/// anywhere; by convention that is perfectly converged and yields 1. Chains
/// frozen at *different* constants are irrecoverably stuck and give an error
/// rather than a misleading number.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Diagnostics(format!(
            "potential scale reduction needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if n < 2 {
        return Err(Error::Diagnostics(
            "potential scale reduction needs at least 2 draws per chain".into(),
        ));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Diagnostics("chains have unequal lengths".into()));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Diagnostics("chain contains a non-finite draw".into()));
    }

    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c.iter().sum::<f64>() / nf)
        .collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    let grand = means.iter().sum::<f64>() / m;
    // B/n, i.e. the sample variance of the chain means.
    let b_over_n = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);

    if w == 0.0 {
        return if b_over_n == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Diagnostics(
                "chains are constant at different values; diagnostic undefined".into(),
            ))
        };
    }
    Ok((((nf - 1.0) / nf * w + b_over_n) / w).sqrt())
}
