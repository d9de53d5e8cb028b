use crate::error::{Error, Result};

pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Checks that `probs` is a distribution over the three classes.
pub fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.len() != 3 {
        return Err(Error::Validation(format!(
            "probability vector must have 3 entries, got {}",
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Validation(format!("probability {p} outside [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(Error::Validation(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    validate_probs(probs)?;
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(h.max(0.0))
}
