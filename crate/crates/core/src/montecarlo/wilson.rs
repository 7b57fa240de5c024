use super::SimError;

/// Wilson score interval for a binomial proportion, clamped to `[0, 1]`.
pub fn wilson_interval(p_hat: f64, n: u64, z: f64) -> Result<(f64, f64), SimError> {
    if n == 0 {
        return Err(SimError::InvalidParameter(
            "wilson interval needs n >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(SimError::InvalidParameter(format!(
            "proportion must lie in [0, 1], got {p_hat}"
        )));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "z must be positive, got {z}"
        )));
    }
    let n = n as f64;
    let z2 = z * z;
    let q_hat = 1.0 - p_hat;
    let spread = z * (p_hat * q_hat / n + z2 / (4.0 * n * n)).sqrt();
    // (c - s)(c + s) = p^2 (1 + z^2/n), so the lower bound is p^2 / (c + s);
    // this form is exactly 0 at p = 0 instead of a rounding residue. The
    // upper bound mirrors it through p -> 1 - p.
    let lower = p_hat * p_hat / (p_hat + z2 / (2.0 * n) + spread);
    let upper = 1.0 - q_hat * q_hat / (q_hat + z2 / (2.0 * n) + spread);
    Ok((lower.max(0.0), upper.min(1.0)))
}
