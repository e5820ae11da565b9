use crate::error::{Error, Result};

/// Mean Huber loss over `pred - target`.
pub fn huber_loss(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    check(pred, target, delta)?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let a = (p - t).abs();
            if a <= delta {
                0.5 * a * a
            } else {
                delta * (a - 0.5 * delta)
            }
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`huber_loss`] with respect to each prediction.
pub fn huber_grad(pred: &[f64], target: &[f64], delta: f64) -> Result<Vec<f64>> {
    check(pred, target, delta)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).clamp(-delta, delta) / n)
        .collect())
}

fn check(pred: &[f64], target: &[f64], delta: f64) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "huber: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("huber: empty batch"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("huber: delta must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches() {
        assert_eq!(huber_loss(&[0.5], &[0.0], 1.0).unwrap(), 0.125);
        assert_eq!(huber_loss(&[2.0], &[0.0], 1.0).unwrap(), 1.5);
        assert_eq!(huber_loss(&[0.3, -4.0], &[0.3, -4.0], 1.0).unwrap(), 0.0);
        assert!(huber_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn gradient_is_clipped_residual() {
        let g = huber_grad(&[0.5, 3.0, -2.0], &[0.0; 3], 1.0).unwrap();
        assert_eq!(g, vec![0.5 / 3.0, 1.0 / 3.0, -1.0 / 3.0]);
    }
}
