//! Masked action distributions and heuristic-assisted biasing.

use rand::Rng;

use super::mlp::MlpParams;
use super::AgentError;
use crate::scalar::Scalar;

/// Actor logits with infeasible servers set to `-∞`.
pub fn policy_forward<T: Scalar>(params: &MlpParams<T>, state: &[T], mask: &[bool]) -> Result<Vec<T>, AgentError> {
    if mask.len() != params.output_dim() {
        return Err(AgentError::DimensionMismatch {
            expected: params.output_dim(),
            got: mask.len(),
        });
    }
    let mut logits = params.forward(state)?;
    apply_mask(&mut logits, mask);
    Ok(logits)
}

pub fn apply_mask<T: Scalar>(logits: &mut [T], mask: &[bool]) {
    for (z, &ok) in logits.iter_mut().zip(mask) {
        if !ok {
            *z = T::neg_infinity();
        }
    }
}

/// Softmax over the finite entries; `-∞` entries get probability 0.
pub fn masked_softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>, AgentError> {
    let max = logits
        .iter()
        .copied()
        .filter(|z| z.is_finite())
        .fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(AgentError::NoFeasibleAction);
    }
    let mut probs: Vec<T> = logits
        .iter()
        .map(|&z| if z.is_finite() { (z - max).exp() } else { T::zero() })
        .collect();
    let sum = probs.iter().fold(T::zero(), |acc, &p| acc + p);
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(probs)
}

/// `softmax(logits + β·H)` over the unmasked entries.
pub fn ha_distribution<T: Scalar>(logits: &[T], heuristic: &[T], beta: T) -> Result<Vec<T>, AgentError> {
    if logits.len() != heuristic.len() {
        return Err(AgentError::DimensionMismatch {
            expected: logits.len(),
            got: heuristic.len(),
        });
    }
    let shifted: Vec<T> = logits
        .iter()
        .zip(heuristic)
        .map(|(&z, &h)| if z.is_finite() { z + beta * h } else { z })
        .collect();
    masked_softmax(&shifted)
}

/// Samples an index from `probs` and returns it with its log-probability.
/// Zero-probability entries are never returned.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> (usize, T) {
    let u = T::lit(rng.random::<f64>());
    let mut cumulative = T::zero();
    let mut last_positive = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= T::zero() {
            continue;
        }
        cumulative += p;
        last_positive = Some(i);
        if u < cumulative {
            return (i, p.ln());
        }
    }
    // rounding left u just above the cumulative sum
    let i = last_positive.expect("distribution with positive mass");
    (i, probs[i].ln())
}

/// Index of the most probable entry (lowest index on ties).
pub fn argmax<T: Scalar>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn entropy<T: Scalar>(probs: &[T]) -> T {
    probs
        .iter()
        .filter(|&&p| p > T::zero())
        .fold(T::zero(), |acc, &p| acc - p * p.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_gives_uniform_over_feasible() {
        let params = MlpParams::<f64>::zeros(&[3, 4, 5]);
        let mask = [true, false, true, true, false];
        let logits = policy_forward(&params, &[0.3, 0.1, -0.2], &mask).unwrap();
        assert_eq!(logits[0], 0.0);
        assert_eq!(logits[1], f64::NEG_INFINITY);
        let probs = masked_softmax(&logits).unwrap();
        for (p, &ok) in probs.iter().zip(&mask) {
            assert_eq!(*p, if ok { 1.0 / 3.0 } else { 0.0 });
        }
        assert_eq!(
            policy_forward(&params, &[0.0; 3], &[true; 2]),
            Err(AgentError::DimensionMismatch { expected: 5, got: 2 })
        );
    }

    #[test]
    fn all_masked_has_no_action() {
        let logits = [f64::NEG_INFINITY; 3];
        assert_eq!(masked_softmax(&logits), Err(AgentError::NoFeasibleAction));
        assert_eq!(ha_distribution(&logits, &[0.0, 1.0, 0.0], 2.0), Err(AgentError::NoFeasibleAction));
    }

    #[test]
    fn beta_zero_is_plain_softmax() {
        let logits = [0.3, -1.2, f64::NEG_INFINITY, 2.5];
        let h = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(ha_distribution(&logits, &h, 0.0).unwrap(), masked_softmax(&logits).unwrap());
    }

    #[test]
    fn closed_form_heuristic_bias() {
        let logits = [0.7, 0.7, f64::NEG_INFINITY];
        let h = [0.0, 1.0, 0.0];
        let probs = ha_distribution(&logits, &h, 9f64.ln()).unwrap();
        assert!((probs[1] - 0.9).abs() < 1e-12);
        assert!((probs[0] - 0.1).abs() < 1e-12);
        assert_eq!(probs[2], 0.0);
    }

    #[test]
    fn shift_invariance() {
        let logits = [0.1, 2.0, -0.5, f64::NEG_INFINITY];
        let shifted: Vec<f64> = logits.iter().map(|z| z + 37.25).collect();
        let h = [1.0, 0.0, 0.0, 0.0];
        let a = ha_distribution(&logits, &h, 1.5).unwrap();
        let b = ha_distribution(&shifted, &h, 1.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_sampling() {
        let probs = [0.0, 0.0, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&probs, &mut rng), (2, 0.0));
        }
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| select_action(&probs, &mut rng).0).collect::<Vec<_>>()
        };
        assert_eq!(draw(17), draw(17));
        assert_ne!(draw(17), draw(18));
    }
}
