//! Online advantage actor-critic updates on single-slice episodes.
//!
//! An episode places the VNFs of one request and receives one terminal
//! reward `r`. For step `t` of `T` the return is `G_t = γ^(T-1-t) · r` and
//! the advantage `A_t = G_t − V(s_t)`. The losses are
//!
//! ```text
//! actor  = −Σ A_t · log π(a_t|s_t) − entropy_weight · Σ H(π(·|s_t)) − ha_loss_weight · Σ_j H_j log π_j
//! critic = Σ (G_t − V(s_t))²
//! ```
//!
//! where `π = softmax(z + β·H)` over feasible servers and `β·H` is treated
//! as a constant. Both networks take one plain gradient step per pass.

use super::mlp::{ForwardCache, MlpParams};
use super::policy::{apply_mask, entropy, ha_distribution};
use super::AgentError;
use crate::placement::DecisionCost;
use crate::scalar::Scalar;

/// One per-VNF decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub state: Vec<T>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob: T,
    /// Heuristic score vector (one-hot or zero).
    pub heuristic: Vec<T>,
    /// β in effect when the action was chosen.
    pub beta: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub steps: Vec<Step<T>>,
    pub reward: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn returns(&self, gamma: T) -> Vec<T> {
        let n = self.steps.len();
        (0..n).map(|t| gamma.powi((n - 1 - t) as i32) * self.reward).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateConfig<T> {
    pub learning_rate: T,
    pub gamma: T,
    pub entropy_weight: T,
    pub ha_loss_weight: T,
    pub updates_per_episode: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_entropy: f64,
    pub steps: usize,
}

/// Terms of the actor loss for a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorTerms<T> {
    pub action: usize,
    pub advantage: T,
    pub entropy_weight: T,
    pub ha_loss_weight: T,
}

/// Actor loss of one step and `∂loss/∂z` for the raw (unmasked) logits.
pub fn actor_logit_grad<T: Scalar>(
    raw_logits: &[T],
    mask: &[bool],
    heuristic: &[T],
    beta: T,
    terms: &ActorTerms<T>,
) -> Result<(T, T, Vec<T>), AgentError> {
    let mut logits = raw_logits.to_vec();
    apply_mask(&mut logits, mask);
    let probs = ha_distribution(&logits, heuristic, beta)?;
    if !mask.get(terms.action).copied().unwrap_or(false) {
        return Err(AgentError::InvalidAction(terms.action));
    }
    let ent = entropy(&probs);
    let h_mass = mask
        .iter()
        .zip(heuristic)
        .filter(|(&ok, _)| ok)
        .fold(T::zero(), |acc, (_, &h)| acc + h);

    let mut loss = -terms.advantage * probs[terms.action].ln() - terms.entropy_weight * ent;
    let mut grad = vec![T::zero(); probs.len()];
    for (j, (&p, &ok)) in probs.iter().zip(mask).enumerate() {
        if !ok {
            continue;
        }
        let indicator = if j == terms.action { T::one() } else { T::zero() };
        grad[j] = terms.advantage * (p - indicator);
        // p·(log p + H) → 0 as p → 0; an underflowed p must not turn into 0·∞.
        let log_p = p.ln();
        if p > T::zero() {
            grad[j] += terms.entropy_weight * p * (log_p + ent);
        }
        // Skipped at weight 0 so a zero heuristic and a one-hot heuristic
        // yield bit-identical gradients.
        if terms.ha_loss_weight != T::zero() {
            grad[j] += terms.ha_loss_weight * (p * h_mass - heuristic[j]);
            if heuristic[j] != T::zero() {
                loss -= terms.ha_loss_weight * heuristic[j] * log_p;
            }
        }
    }
    Ok((loss, ent, grad))
}

/// Actor loss of one step.
pub fn actor_loss<T: Scalar>(
    actor: &MlpParams<T>,
    state: &[T],
    mask: &[bool],
    heuristic: &[T],
    beta: T,
    terms: &ActorTerms<T>,
) -> Result<T, AgentError> {
    let logits = actor.forward(state)?;
    Ok(actor_logit_grad(&logits, mask, heuristic, beta, terms)?.0)
}

/// Actor loss of one step and its gradient accumulated into `grads`.
pub fn actor_loss_grad<T: Scalar>(
    actor: &MlpParams<T>,
    state: &[T],
    mask: &[bool],
    heuristic: &[T],
    beta: T,
    terms: &ActorTerms<T>,
    grads: &mut MlpParams<T>,
) -> Result<(T, T), AgentError> {
    let cache = actor.forward_cached(state)?;
    let (loss, ent, dlogits) = actor_logit_grad(cache.output(), mask, heuristic, beta, terms)?;
    actor.backward(&cache, &dlogits, grads);
    Ok((loss, ent))
}

/// `(target − V(s))²` and its gradient accumulated into `grads`.
pub fn critic_loss_grad<T: Scalar>(
    critic: &MlpParams<T>,
    state: &[T],
    target: T,
    grads: &mut MlpParams<T>,
) -> Result<T, AgentError> {
    let cache: ForwardCache<T> = critic.forward_cached(state)?;
    let value = cache.output()[0];
    let err = target - value;
    critic.backward(&cache, &[-(T::one() + T::one()) * err], grads);
    Ok(err * err)
}

pub fn critic_loss<T: Scalar>(critic: &MlpParams<T>, state: &[T], target: T) -> Result<T, AgentError> {
    let value = critic.forward(state)?[0];
    Ok((target - value) * (target - value))
}

/// Runs `updates_per_episode` gradient steps on `traj`. A step whose
/// gradients are not finite is aborted before touching the parameters.
pub fn update<T: Scalar>(
    actor: &mut MlpParams<T>,
    critic: &mut MlpParams<T>,
    traj: &Trajectory<T>,
    config: &UpdateConfig<T>,
) -> Result<LossReport, AgentError> {
    if traj.steps.is_empty() {
        return Err(AgentError::EmptyTrajectory);
    }
    let returns = traj.returns(config.gamma);
    let mut report = LossReport {
        steps: traj.steps.len(),
        ..LossReport::default()
    };
    for pass in 0..config.updates_per_episode {
        let mut actor_grads = MlpParams::zeros(&actor.sizes());
        let mut critic_grads = MlpParams::zeros(&critic.sizes());
        let (mut a_loss, mut c_loss, mut ent_sum) = (T::zero(), T::zero(), T::zero());
        for (step, &ret) in traj.steps.iter().zip(&returns) {
            let value = critic.forward(&step.state)?[0];
            let terms = ActorTerms {
                action: step.action,
                advantage: ret - value,
                entropy_weight: config.entropy_weight,
                ha_loss_weight: config.ha_loss_weight,
            };
            let (loss, ent) =
                actor_loss_grad(actor, &step.state, &step.mask, &step.heuristic, step.beta, &terms, &mut actor_grads)?;
            a_loss += loss;
            ent_sum += ent;
            c_loss += critic_loss_grad(critic, &step.state, ret, &mut critic_grads)?;
        }
        if !actor_grads.is_finite() || !critic_grads.is_finite() {
            return Err(AgentError::NonFiniteGradient);
        }
        actor.descend(&actor_grads, config.learning_rate);
        critic.descend(&critic_grads, config.learning_rate);
        if pass == 0 {
            report.actor_loss = a_loss.to_f64_lossy();
            report.critic_loss = c_loss.to_f64_lossy();
            report.mean_entropy = ent_sum.to_f64_lossy() / traj.steps.len() as f64;
        }
    }
    Ok(report)
}

/// Reward weights for accepted slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub w_lb: f64,
    pub w_bw: f64,
    pub bw_norm: f64,
}

/// `1 + w_lb·(1 − max utilization) − w_bw·bw/bw_norm` when accepted, −1 otherwise.
pub fn episode_reward(outcome: Option<&DecisionCost>, config: &RewardConfig) -> f64 {
    match outcome {
        None => -1.0,
        Some(cost) => {
            let bw_term = if config.bw_norm > 0.0 {
                cost.total_bw_consumed as f64 / config.bw_norm
            } else {
                0.0
            };
            1.0 + config.w_lb * (1.0 - cost.max_server_utilization_after) - config.w_bw * bw_term
        }
    }
}
