//! Finite-difference validation of the analytic actor and critic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::a2c::{actor_loss, actor_loss_grad, critic_loss, critic_loss_grad, ActorTerms};
use super::mlp::MlpParams;
use super::AgentError;

pub const FD_EPSILON: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn max_error_against<F>(params: &MlpParams<f64>, analytic: &MlpParams<f64>, mut loss: F) -> Result<f64, AgentError>
where
    F: FnMut(&MlpParams<f64>) -> Result<f64, AgentError>,
{
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.params().enumerate() {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + FD_EPSILON;
        let plus = loss(&probe)?;
        *probe.param_mut(i) = original - FD_EPSILON;
        let minus = loss(&probe)?;
        *probe.param_mut(i) = original;
        let numeric = (plus - minus) / (2.0 * FD_EPSILON);
        worst = worst.max(relative_error(g, numeric));
    }
    Ok(worst)
}

/// Max relative error between analytic actor gradients and central
/// differences with step [`FD_EPSILON`].
pub fn grad_check(
    params: &MlpParams<f64>,
    state: &[f64],
    mask: &[bool],
    heuristic: &[f64],
    beta: f64,
    terms: &ActorTerms<f64>,
) -> Result<f64, AgentError> {
    let mut analytic = MlpParams::zeros(&params.sizes());
    actor_loss_grad(params, state, mask, heuristic, beta, terms, &mut analytic)?;
    max_error_against(params, &analytic, |p| actor_loss(p, state, mask, heuristic, beta, terms))
}

/// Same check for the critic's squared-error loss.
pub fn critic_grad_check(params: &MlpParams<f64>, state: &[f64], target: f64) -> Result<f64, AgentError> {
    let mut analytic = MlpParams::zeros(&params.sizes());
    critic_loss_grad(params, state, target, &mut analytic)?;
    max_error_against(params, &analytic, |p| critic_loss(p, state, target))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckSummary {
    pub configurations: usize,
    pub max_actor_error: f64,
    pub max_critic_error: f64,
}

impl GradCheckSummary {
    pub fn max_error(&self) -> f64 {
        self.max_actor_error.max(self.max_critic_error)
    }
}

/// Checks `configurations` randomly drawn networks, states, masks,
/// heuristic vectors and loss weights.
pub fn random_suite(seed: u64, configurations: usize) -> Result<GradCheckSummary, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = GradCheckSummary {
        configurations,
        ..GradCheckSummary::default()
    };
    for _ in 0..configurations {
        let inputs = rng.random_range(2..10);
        let actions = rng.random_range(2..8);
        let mut sizes = vec![inputs];
        for _ in 0..rng.random_range(0..3) {
            sizes.push(rng.random_range(2..9));
        }
        sizes.push(actions);
        let actor = MlpParams::<f64>::init(&sizes, rng.random_range(0.1..2.0), &mut rng);
        let state: Vec<f64> = (0..inputs).map(|_| rng.random_range(-1.0..=1.0)).collect();

        let mut mask: Vec<bool> = (0..actions).map(|_| rng.random_bool(0.7)).collect();
        let forced = rng.random_range(0..actions);
        mask[forced] = true;
        let feasible: Vec<usize> = (0..actions).filter(|&a| mask[a]).collect();
        let action = feasible[rng.random_range(0..feasible.len())];
        let mut heuristic = vec![0.0; actions];
        if rng.random_bool(0.8) {
            heuristic[feasible[rng.random_range(0..feasible.len())]] = 1.0;
        }
        let beta = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) };
        let terms = ActorTerms {
            action,
            advantage: rng.random_range(-2.0..2.0),
            entropy_weight: rng.random_range(0.0..0.1),
            ha_loss_weight: if rng.random_bool(0.3) { rng.random_range(0.0..0.5) } else { 0.0 },
        };
        let err = grad_check(&actor, &state, &mask, &heuristic, beta, &terms)?;
        summary.max_actor_error = summary.max_actor_error.max(err);

        sizes.pop();
        sizes.push(1);
        let critic = MlpParams::<f64>::init(&sizes, 1.0, &mut rng);
        let err = critic_grad_check(&critic, &state, rng.random_range(-2.0..2.0))?;
        summary.max_critic_error = summary.max_critic_error.max(err);
    }
    Ok(summary)
}
