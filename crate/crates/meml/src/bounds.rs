//! Evaluators for the theoretical regret-bound formulas and the
//! exploration-length rule.
//!
//! Every universal constant (the `C` factors and the constant hidden in the
//! exploration-length lower bound) is set to 1, so the curves are shapes up
//! to constants, never certified upper bounds. Reports carry that caveat
//! explicitly.

use serde::Serialize;

use crate::error::{MemlError, Result};
use crate::estimation::oful_radius;

/// Caveat attached to every bound artifact.
pub const CONSTANTS_NOTE: &str = "all universal constants set to 1; curves are shape up to constants";

/// Why the exploration-length formula has no usable value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum InfeasibleReason {
    /// `gamma = 0`: the environments cannot be told apart.
    IdenticalEnvironmentMeans,
    /// Too few labeled tasks: `gamma^2 < K sqrt(d (1/N1 + 1/N2))`.
    TrainingCountCondition { gamma_squared: f64, threshold: f64 },
    /// The separation does not cover the concentration terms.
    NonpositiveDenominator { denominator: f64 },
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReason::IdenticalEnvironmentMeans => write!(f, "identical environment means"),
            InfeasibleReason::TrainingCountCondition { gamma_squared, threshold } => write!(
                f,
                "training-count condition violated: gamma^2 = {gamma_squared:.6} < {threshold:.6}"
            ),
            InfeasibleReason::NonpositiveDenominator { denominator } => {
                write!(f, "denominator nonpositive ({denominator:.6})")
            }
        }
    }
}

/// Result of the exploration-length formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum T0Resolution {
    Feasible {
        /// Ceiling of the raw bound, at least 1.
        rounds: usize,
        raw: f64,
    },
    Infeasible {
        #[serde(flatten)]
        reason: InfeasibleReason,
    },
}

impl T0Resolution {
    pub fn rounds(&self) -> Option<usize> {
        match self {
            T0Resolution::Feasible { rounds, .. } => Some(*rounds),
            T0Resolution::Infeasible { .. } => None,
        }
    }
}

/// Exploration-length lower bound (constant factor 1):
/// `R sqrt(d ln(4/delta)) / (gamma - (K^2 d (1/N1 + 1/N2))^{1/4} - 2 K sqrt(ln(4/delta)))`,
/// guarded by the training-count condition
/// `gamma^2 >= K sqrt(d (1/N1 + 1/N2))` and a positive denominator.
pub fn compute_t0(
    gamma: f64,
    sub_gaussian_k: f64,
    dim: usize,
    noise_level: f64,
    delta: f64,
    n1: usize,
    n2: usize,
) -> Result<T0Resolution> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(MemlError::invalid("delta", format!("must lie in (0, 1], got {delta}")));
    }
    for (name, v) in [("gamma", gamma), ("sub_gaussian_k", sub_gaussian_k), ("noise_level", noise_level)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(MemlError::invalid(name, format!("must be nonnegative and finite, got {v}")));
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(MemlError::invalid("training_counts", "need at least one labeled task per environment"));
    }
    if gamma <= 0.0 {
        return Ok(T0Resolution::Infeasible { reason: InfeasibleReason::IdenticalEnvironmentMeans });
    }
    let d = dim as f64;
    let inv_n = 1.0 / n1 as f64 + 1.0 / n2 as f64;
    let threshold = sub_gaussian_k * (d * inv_n).sqrt();
    if gamma * gamma < threshold {
        return Ok(T0Resolution::Infeasible {
            reason: InfeasibleReason::TrainingCountCondition {
                gamma_squared: gamma * gamma,
                threshold,
            },
        });
    }
    let log_term = (4.0 / delta).ln();
    let denominator = gamma
        - (sub_gaussian_k * sub_gaussian_k * d * inv_n).powf(0.25)
        - 2.0 * sub_gaussian_k * log_term.sqrt();
    if denominator <= 0.0 {
        return Ok(T0Resolution::Infeasible {
            reason: InfeasibleReason::NonpositiveDenominator { denominator },
        });
    }
    let raw = noise_level * (d * log_term).sqrt() / denominator;
    Ok(T0Resolution::Feasible { rounds: (raw.ceil() as usize).max(1), raw })
}

/// Lower endpoint of the admissible confidence interval
/// `delta in (1 / (2 e^{gamma^2 / 4K^2}), 1)`. Zero when `K = 0`.
pub fn delta_admissible_floor(gamma: f64, sub_gaussian_k: f64) -> f64 {
    if sub_gaussian_k == 0.0 {
        return 0.0;
    }
    0.5 * (-(gamma * gamma) / (4.0 * sub_gaussian_k * sub_gaussian_k)).exp()
}

/// Single-task expected-regret bound of biased optimism
/// (constant factor 1):
/// `sqrt(t d ln(1 + t L / (lambda d))) * (R sqrt(d ln(t + t^2 L / (lambda d))) + sqrt(lambda) ||h - theta||)`.
pub fn proposition1_bound(
    t: usize,
    dim: usize,
    lambda: f64,
    action_norm_bound: f64,
    noise_level: f64,
    bias_distance: f64,
) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let t = t as f64;
    let d = dim as f64;
    let l = action_norm_bound;
    let first = (t * d * (1.0 + t * l / (lambda * d)).ln()).sqrt();
    let second = noise_level * (d * (t + t * t * l / (lambda * d)).ln()).sqrt()
        + lambda.sqrt() * bias_distance;
    first * second
}

/// Single-environment transfer-regret bound of biased optimism at the
/// variance-tuned regularizer (constant factor 1):
/// `d sqrt(t ln(1 + t^2 L E||theta - h||^2 / d))`.
pub fn proposition2_bound(
    t: usize,
    dim: usize,
    action_norm_bound: f64,
    expected_sq_distance: f64,
) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let t = t as f64;
    let d = dim as f64;
    d * (t * (1.0 + t * t * action_norm_bound * expected_sq_distance / d).ln()).sqrt()
}

/// Inputs to the multi-environment bound evaluation. Analytic when known;
/// the empirical fields may come from diagnostics or training records.
#[derive(Debug, Clone, Serialize)]
pub struct BoundInputs {
    pub horizon: usize,
    pub exploration_rounds: usize,
    pub dim: usize,
    pub lambda: f64,
    pub action_norm_bound: f64,
    pub noise_level: f64,
    pub param_norm_bound: f64,
    pub delta: f64,
    pub probabilities: Vec<f64>,
    /// Per-environment `E ||theta - mu_i||^2`.
    pub env_variances: Vec<f64>,
    /// Per-environment `E ||theta||^2`.
    pub env_second_moments: Vec<f64>,
    pub gamma: f64,
    pub sub_gaussian_k: f64,
    pub training_counts: Vec<usize>,
    /// `||h - theta||` stand-in for the single-task curve.
    pub bias_distance: f64,
    /// `E ||theta - mixture_mean||^2` of the pooled mixture (component
    /// variance plus mean spread).
    pub pooled_variance: f64,
    /// Lower bound on `lambda_min(V_{j,T})` across training designs;
    /// 0 is the conservative default.
    pub design_min_eigenvalue: f64,
}

/// Bound on the squared bias estimation error `tau^i = ||mu_i - h_i||`
/// for one environment: the displayed three-term bound on `sqrt(tau)`,
/// squared, with the constant factor set to 1.
pub fn tau_bound(inputs: &BoundInputs, environment: usize) -> f64 {
    let n_i = inputs.training_counts[environment] as f64;
    let n_total: usize = inputs.training_counts.iter().sum();
    let s = inputs.param_norm_bound;
    let delta = inputs.delta;
    let second_moment = inputs.env_second_moments[environment];
    let estimation_term = 2.0 * s * (2.0 / delta).ln() * second_moment.sqrt() / n_i;
    let beta_at_horizon = oful_radius(
        inputs.horizon,
        inputs.dim,
        inputs.lambda,
        inputs.action_norm_bound,
        inputs.noise_level,
        s,
        1.0 / inputs.horizon as f64,
    )
    .expect("1/T is a valid confidence level for T >= 1");
    let concentration_term =
        beta_at_horizon / (inputs.lambda + inputs.design_min_eigenvalue).sqrt();
    let misclassification_term = delta * (inputs.gamma + 2.0 * s / n_total as f64);
    let sqrt_tau = estimation_term + concentration_term + misclassification_term;
    sqrt_tau * sqrt_tau
}

/// Multi-environment transfer-regret bound at round `t` (constant factor 1):
/// `sum_i p_i (2 min(t, T0) + d sqrt((t - T0) ln(1 + (t - T0)^2 L (Var_i + tau_i) / d)))`.
pub fn theorem1_bound(t: usize, inputs: &BoundInputs, taus: &[f64]) -> f64 {
    let d = inputs.dim as f64;
    let l = inputs.action_norm_bound;
    let t0 = inputs.exploration_rounds;
    let explored = t.min(t0) as f64;
    let exploited = t.saturating_sub(t0) as f64;
    inputs
        .probabilities
        .iter()
        .zip(inputs.env_variances.iter().zip(taus))
        .map(|(&p, (&var, &tau))| {
            let log_arg = 1.0 + exploited * exploited * l * (var + tau) / d;
            p * (2.0 * explored + d * (exploited * log_arg.ln()).sqrt())
        })
        .sum()
}

/// Pooled-mixture comparison bound: the single-environment transfer bound
/// applied to the whole mixture with one pooled bias at the mixture mean.
pub fn pooled_mixture_bound(t: usize, dim: usize, action_norm_bound: f64, pooled_variance: f64) -> f64 {
    proposition2_bound(t, dim, action_norm_bound, pooled_variance)
}

/// Per-environment comparison bound under perfect biases: exploration charge
/// plus the per-environment transfer bound, probability-averaged.
pub fn per_environment_bound(
    t: usize,
    exploration_rounds: usize,
    dim: usize,
    action_norm_bound: f64,
    probabilities: &[f64],
    env_variances: &[f64],
) -> f64 {
    let d = dim as f64;
    let l = action_norm_bound;
    let explored = t.min(exploration_rounds) as f64;
    let exploited = t.saturating_sub(exploration_rounds) as f64;
    let t_sq = (t as f64) * (t as f64);
    probabilities
        .iter()
        .zip(env_variances)
        .map(|(&p, &var)| {
            let log_arg = 1.0 + t_sq * l * var / d;
            p * (2.0 * explored + d * (exploited * log_arg.ln()).sqrt())
        })
        .sum()
}

/// All bound curves for one scenario, plus the feasibility scalars.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub proposition1_curve: Vec<f64>,
    pub proposition2_curve: Vec<f64>,
    pub theorem1_curve: Vec<f64>,
    pub t0_lower_bound: T0Resolution,
    /// Per-environment bound on `||mu_i - h_i||`.
    pub tau_bound: Vec<f64>,
    /// `gamma^2 >= K sqrt(d (1/N1 + 1/N2))`.
    pub n_condition_satisfied: bool,
    pub delta_admissible: bool,
    pub delta_admissible_floor: f64,
    pub constants_note: &'static str,
}

/// Evaluates every bound formula over rounds `1..=horizon`.
pub fn evaluate_bounds(inputs: &BoundInputs) -> Result<BoundReport> {
    let m = inputs.probabilities.len();
    if inputs.env_variances.len() != m
        || inputs.env_second_moments.len() != m
        || inputs.training_counts.len() != m
    {
        return Err(MemlError::invalid(
            "bound_inputs",
            "per-environment vectors must all have the mixture's length",
        ));
    }
    if inputs.horizon == 0 {
        return Err(MemlError::invalid("horizon", "must be positive"));
    }
    let taus: Vec<f64> = (0..m).map(|i| tau_bound(inputs, i)).collect();
    let mut proposition1_curve = Vec::with_capacity(inputs.horizon);
    let mut proposition2_curve = Vec::with_capacity(inputs.horizon);
    let mut theorem1_curve = Vec::with_capacity(inputs.horizon);
    for t in 1..=inputs.horizon {
        proposition1_curve.push(proposition1_bound(
            t,
            inputs.dim,
            inputs.lambda,
            inputs.action_norm_bound,
            inputs.noise_level,
            inputs.bias_distance,
        ));
        proposition2_curve.push(proposition2_bound(
            t,
            inputs.dim,
            inputs.action_norm_bound,
            inputs.pooled_variance,
        ));
        theorem1_curve.push(theorem1_bound(t, inputs, &taus));
    }
    let (n1, n2) = (inputs.training_counts[0], *inputs.training_counts.last().unwrap());
    let t0_lower_bound = compute_t0(
        inputs.gamma,
        inputs.sub_gaussian_k,
        inputs.dim,
        inputs.noise_level,
        inputs.delta,
        n1,
        n2,
    )?;
    let n_condition_satisfied = !matches!(
        t0_lower_bound,
        T0Resolution::Infeasible { reason: InfeasibleReason::TrainingCountCondition { .. } }
            | T0Resolution::Infeasible { reason: InfeasibleReason::IdenticalEnvironmentMeans }
    );
    let floor = delta_admissible_floor(inputs.gamma, inputs.sub_gaussian_k);
    Ok(BoundReport {
        proposition1_curve,
        proposition2_curve,
        theorem1_curve,
        t0_lower_bound,
        tau_bound: taus,
        n_condition_satisfied,
        delta_admissible: inputs.delta > floor && inputs.delta < 1.0,
        delta_admissible_floor: floor,
        constants_note: CONSTANTS_NOTE,
    })
}
