//! Per-task bandit policies and the multi-environment meta-policy.
//!
//! Everything here runs one task for `T` rounds against pre-drawn inputs
//! (parameter, per-round action sets, reward noise), so different policies
//! can be coupled on identical randomness. Selection is always the
//! optimistic rule: maximize `x' center + radius * ||x||_{V^-1}` over the
//! round's finite action set, with ties broken by lowest index.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::TaskParameter;
use crate::error::{MemlError, Result};
use crate::estimation::{biased_radius, ellipsoid_ucb, BiasOracleConfig, ConfidenceEllipsoid, OnlineRlsState};

/// Scalar problem constants shared by every policy in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BanditParams {
    pub dim: usize,
    pub lambda: f64,
    pub delta: f64,
    /// `L`: bound on action norms.
    pub action_norm_bound: f64,
    /// `R`: sub-Gaussian level of the reward noise.
    pub noise_level: f64,
    /// `S`: bound on parameter norms (the unbiased shrinkage distance).
    pub param_norm_bound: f64,
}

/// The policies the simulation harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Meta-policy: explore, classify the environment, then exploit with the
    /// classified environment's bias.
    MemlOful,
    /// Independent task learning: unbiased optimism, no transfer.
    Itl,
    /// Biased optimism with the true mean of the task's true environment.
    Oracle,
    /// Biased optimism with one pooled bias averaged over all training
    /// estimates, ignoring environment structure.
    AvgOful,
    /// Like `AvgOful` but the pooled bias averages estimates computed from
    /// each training task's round-robin exploration prefix only.
    RrOful,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::MemlOful => "meml-oful",
            PolicyKind::Itl => "itl",
            PolicyKind::Oracle => "oracle",
            PolicyKind::AvgOful => "avg-oful",
            PolicyKind::RrOful => "rr-oful",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a bias set's vectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasSource {
    /// Averaged final estimates of labeled training tasks.
    LabeledTraining,
    /// The true environment means (diagnostics / oracle runs).
    OracleMeans,
    /// A single bias pooled over all training tasks.
    PooledAverage,
}

/// Per-environment bias vectors and the task counts behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSet {
    pub biases: Vec<DVector<f64>>,
    pub counts: Vec<usize>,
    pub source: BiasSource,
}

impl BiasSet {
    pub fn oracle_means(means: Vec<DVector<f64>>) -> Self {
        let counts = vec![0; means.len()];
        Self { biases: means, counts, source: BiasSource::OracleMeans }
    }

    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    /// Folds one more unbiased estimate into environment `environment`'s
    /// running average (the post-task bias update).
    pub fn absorb(&mut self, environment: usize, estimate: &DVector<f64>) {
        let n = self.counts[environment] as f64;
        let bias = &mut self.biases[environment];
        *bias = (&*bias * n + estimate) / (n + 1.0);
        self.counts[environment] += 1;
    }
}

/// Stored interaction of one completed task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRunRecord {
    pub actions: Vec<DVector<f64>>,
    pub rewards: Vec<f64>,
    /// Environment picked by classification (meta-policy runs only).
    pub chosen_environment: Option<usize>,
    /// Unbiased ridge estimate from the full stored dataset.
    pub final_unbiased_estimate: DVector<f64>,
    /// Unbiased ridge estimate from the round-robin prefix rounds only
    /// (training runs only); feeds the RR-pooled bias.
    pub prefix_estimate: Option<DVector<f64>>,
}

/// Per-round and cumulative pseudo-regret of one task run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    /// `max_{x in D_t} x' theta - x_t' theta`, one entry per round.
    pub instant: Vec<f64>,
    /// Prefix sums of `instant`.
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    fn with_capacity(n: usize) -> Self {
        Self { instant: Vec::with_capacity(n), cumulative: Vec::with_capacity(n) }
    }

    fn push(&mut self, instant: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.instant.push(instant);
        self.cumulative.push(prev + instant);
    }

    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Meta-policy configuration for one test task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemlConfig {
    /// Pure-exploration rounds before the bias is picked.
    pub exploration_rounds: usize,
    /// Total rounds per task.
    pub total_rounds: usize,
    pub bias_oracle: BiasOracleConfig,
    /// Fold the finished task's unbiased estimate back into the classified
    /// environment's bias (applied between tasks by the harness).
    pub update_bias_after_task: bool,
}

impl MemlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_rounds == 0 {
            return Err(MemlError::invalid("total_rounds", "horizon must be positive"));
        }
        if self.exploration_rounds >= self.total_rounds {
            return Err(MemlError::invalid(
                "exploration_rounds",
                format!(
                    "exploration ({}) must be shorter than the horizon ({})",
                    self.exploration_rounds, self.total_rounds
                ),
            ));
        }
        Ok(())
    }
}

/// Pre-drawn inputs of one task run, shared across coupled policies.
#[derive(Debug, Clone)]
pub struct TaskInputs {
    pub parameter: TaskParameter,
    /// One finite action set per round, `horizon` of them.
    pub action_sets: Vec<Vec<DVector<f64>>>,
    /// One additive reward-noise draw per round.
    pub noise: Vec<f64>,
}

impl TaskInputs {
    pub fn horizon(&self) -> usize {
        self.action_sets.len()
    }
}

/// Optimistic selection over a finite action set: ties go to the lowest
/// index. Returns the winning index and its action.
pub fn oful_select_action(
    state: &OnlineRlsState,
    bias: &DVector<f64>,
    bias_distance: f64,
    action_set: &[DVector<f64>],
    params: &BanditParams,
) -> Result<(usize, DVector<f64>)> {
    if action_set.is_empty() {
        return Err(MemlError::EmptyActionSet { round: state.round_count() + 1 });
    }
    let ellipsoid = ConfidenceEllipsoid {
        center: state.biased_estimate(bias)?,
        shape: state.regularized_gram(),
        radius: biased_radius(
            state.round_count(),
            params.dim,
            params.lambda,
            params.action_norm_bound,
            params.noise_level,
            params.delta,
            bias_distance,
        )?,
    };
    let inverse = state.gram_reg_inverse();
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, action) in action_set.iter().enumerate() {
        let score = ellipsoid_ucb(action, &ellipsoid, inverse);
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok((best, action_set[best].clone()))
}

/// Averages the final unbiased estimates of labeled training records into
/// one bias per environment.
pub fn build_bias_set(training_records: &[Vec<TaskRunRecord>]) -> Result<BiasSet> {
    let mut biases = Vec::with_capacity(training_records.len());
    let mut counts = Vec::with_capacity(training_records.len());
    for (environment, records) in training_records.iter().enumerate() {
        if records.is_empty() {
            return Err(MemlError::InsufficientTrainingTasks { environment });
        }
        let dim = records[0].final_unbiased_estimate.len();
        let mut sum = DVector::zeros(dim);
        for r in records {
            sum += &r.final_unbiased_estimate;
        }
        biases.push(sum / records.len() as f64);
        counts.push(records.len());
    }
    Ok(BiasSet { biases, counts, source: BiasSource::LabeledTraining })
}

/// Which per-task estimate a pooled bias averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PooledEstimateKind {
    /// Final full-horizon estimates (the AVG pooled bias).
    FinalEstimate,
    /// Round-robin prefix estimates (the RR pooled bias).
    ExplorationPrefix,
}

/// Pools one bias vector across all environments' training records.
pub fn build_pooled_bias(
    training_records: &[Vec<TaskRunRecord>],
    kind: PooledEstimateKind,
) -> Result<(DVector<f64>, usize)> {
    let mut sum: Option<DVector<f64>> = None;
    let mut n = 0usize;
    for records in training_records {
        for r in records {
            let estimate = match kind {
                PooledEstimateKind::FinalEstimate => &r.final_unbiased_estimate,
                PooledEstimateKind::ExplorationPrefix => r.prefix_estimate.as_ref().ok_or_else(|| {
                    MemlError::invalid("training_records", "record is missing its exploration-prefix estimate")
                })?,
            };
            sum = Some(match sum {
                Some(s) => s + estimate,
                None => estimate.clone(),
            });
            n += 1;
        }
    }
    match sum {
        Some(s) if n > 0 => Ok((s / n as f64, n)),
        _ => Err(MemlError::InsufficientTrainingTasks { environment: 0 }),
    }
}

/// Nearest bias in squared Euclidean distance; ties to the lowest index.
pub fn classify_environment(exploration_estimate: &DVector<f64>, bias_set: &BiasSet) -> usize {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (i, bias) in bias_set.biases.iter().enumerate() {
        let d2 = (exploration_estimate - bias).norm_squared();
        if d2 < best_d2 {
            best = i;
            best_d2 = d2;
        }
    }
    best
}

fn best_available_reward(action_set: &[DVector<f64>], theta: &DVector<f64>) -> f64 {
    action_set.iter().map(|x| x.dot(theta)).fold(f64::NEG_INFINITY, f64::max)
}

struct RoundOutcome {
    index: usize,
}

/// Shared per-round bookkeeping: regret, reward, state update, record push.
fn play_round(
    state: &mut OnlineRlsState,
    inputs: &TaskInputs,
    round: usize, // zero-based
    selected: usize,
    record: &mut TaskRunRecord,
    trace: &mut RegretTrace,
) -> Result<RoundOutcome> {
    let set = &inputs.action_sets[round];
    let theta = &inputs.parameter.theta;
    let action = set[selected].clone();
    let expected = action.dot(theta);
    trace.push(best_available_reward(set, theta) - expected);
    let reward = expected + inputs.noise[round];
    state.update(&action, reward)?;
    record.actions.push(action);
    record.rewards.push(reward);
    Ok(RoundOutcome { index: selected })
}

fn empty_record(horizon: usize, dim: usize) -> TaskRunRecord {
    TaskRunRecord {
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        chosen_environment: None,
        final_unbiased_estimate: DVector::zeros(dim),
        prefix_estimate: None,
    }
}

/// Runs the meta-policy on one task: `exploration_rounds` uniformly random
/// choices feeding an unbiased estimate, one nearest-bias classification,
/// then biased optimism with the chosen environment's bias for the rest of
/// the horizon. Regret is charged for every round, exploration included.
pub fn meml_run_task(
    config: &MemlConfig,
    params: &BanditParams,
    bias_set: &BiasSet,
    inputs: &TaskInputs,
    exploration_rng: &mut impl Rng,
) -> Result<(TaskRunRecord, RegretTrace)> {
    config.validate()?;
    if bias_set.is_empty() {
        return Err(MemlError::invalid("bias_set", "at least one bias required"));
    }
    let horizon = config.total_rounds.min(inputs.horizon());
    let mut state = OnlineRlsState::new(params.dim, params.lambda)?;
    let mut record = empty_record(horizon, params.dim);
    let mut trace = RegretTrace::with_capacity(horizon);
    let mut chosen: Option<usize> = None;

    for round in 0..horizon {
        let set = &inputs.action_sets[round];
        if set.is_empty() {
            return Err(MemlError::EmptyActionSet { round: round + 1 });
        }
        let selected = if round < config.exploration_rounds {
            exploration_rng.gen_range(0..set.len())
        } else {
            let environment = *chosen.get_or_insert_with(|| classify_environment(&state.estimate(), bias_set));
            let bias = &bias_set.biases[environment];
            let distance = config.bias_oracle.bias_distance(bias, &inputs.parameter.theta);
            oful_select_action(&state, bias, distance, set, params)?.0
        };
        play_round(&mut state, inputs, round, selected, &mut record, &mut trace)?;
    }

    // A horizon made entirely of exploration never classified; do it now so
    // the record always carries a chosen environment.
    let environment = chosen.unwrap_or_else(|| classify_environment(&state.estimate(), bias_set));
    record.chosen_environment = Some(environment);
    record.final_unbiased_estimate = state.estimate();
    Ok((record, trace))
}

/// Baseline policies: which bias (and bias-distance) drives the optimism.
#[derive(Debug, Clone)]
pub enum BaselineSpec<'a> {
    Itl,
    Oracle { environment_means: &'a [DVector<f64>] },
    AvgOful { pooled_bias: &'a DVector<f64> },
    RrOful { pooled_bias: &'a DVector<f64> },
}

impl BaselineSpec<'_> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            BaselineSpec::Itl => PolicyKind::Itl,
            BaselineSpec::Oracle { .. } => PolicyKind::Oracle,
            BaselineSpec::AvgOful { .. } => PolicyKind::AvgOful,
            BaselineSpec::RrOful { .. } => PolicyKind::RrOful,
        }
    }
}

/// Runs a baseline on one task: no exploration phase, a fixed bias from
/// round one. ITL shrinks to the origin with the parameter-norm bound as its
/// distance term; the others use the scenario's bias-distance oracle.
pub fn run_baseline_task(
    baseline: &BaselineSpec<'_>,
    params: &BanditParams,
    bias_oracle: &BiasOracleConfig,
    inputs: &TaskInputs,
) -> Result<(TaskRunRecord, RegretTrace)> {
    let theta = &inputs.parameter.theta;
    let zero;
    let (bias, distance) = match baseline {
        BaselineSpec::Itl => {
            zero = DVector::zeros(params.dim);
            (&zero, params.param_norm_bound)
        }
        BaselineSpec::Oracle { environment_means } => {
            let label = inputs.parameter.environment;
            let mean = environment_means.get(label).ok_or_else(|| {
                MemlError::config(
                    "oracle",
                    format!("true mean for environment {label} not provided"),
                )
            })?;
            (mean, bias_oracle.bias_distance(mean, theta))
        }
        BaselineSpec::AvgOful { pooled_bias } | BaselineSpec::RrOful { pooled_bias } => {
            (*pooled_bias, bias_oracle.bias_distance(pooled_bias, theta))
        }
    };

    let horizon = inputs.horizon();
    let mut state = OnlineRlsState::new(params.dim, params.lambda)?;
    let mut record = empty_record(horizon, params.dim);
    let mut trace = RegretTrace::with_capacity(horizon);
    for round in 0..horizon {
        let set = &inputs.action_sets[round];
        let (selected, _) = oful_select_action(&state, bias, distance, set, params)?;
        play_round(&mut state, inputs, round, selected, &mut record, &mut trace)?;
    }
    record.final_unbiased_estimate = state.estimate();
    Ok((record, trace))
}

/// Runs one labeled training task: the first `dim` rounds pick the action
/// best aligned with the standard basis vector of the round (a round-robin
/// sweep that spans the space and feeds the RR pooled bias), the rest plain
/// unbiased optimism. The prefix estimate is snapshotted right after the
/// sweep.
pub fn run_training_task(
    params: &BanditParams,
    inputs: &TaskInputs,
) -> Result<(TaskRunRecord, RegretTrace)> {
    let horizon = inputs.horizon();
    let mut state = OnlineRlsState::new(params.dim, params.lambda)?;
    let mut record = empty_record(horizon, params.dim);
    let mut trace = RegretTrace::with_capacity(horizon);
    let zero = DVector::zeros(params.dim);
    let sweep = params.dim.min(horizon);
    for round in 0..horizon {
        let set = &inputs.action_sets[round];
        if set.is_empty() {
            return Err(MemlError::EmptyActionSet { round: round + 1 });
        }
        let selected = if round < sweep {
            let mut best = 0usize;
            let mut best_align = f64::NEG_INFINITY;
            for (i, x) in set.iter().enumerate() {
                let align = x[round].abs();
                if align > best_align {
                    best = i;
                    best_align = align;
                }
            }
            best
        } else {
            oful_select_action(&state, &zero, params.param_norm_bound, set, params)?.0
        };
        play_round(&mut state, inputs, round, selected, &mut record, &mut trace)?;
        if round + 1 == sweep {
            record.prefix_estimate = Some(state.estimate());
        }
    }
    record.final_unbiased_estimate = state.estimate();
    Ok((record, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::TaskParameter;
    use crate::estimation::oful_radius;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn params(lambda: f64, delta: f64) -> BanditParams {
        BanditParams {
            dim: 2,
            lambda,
            delta,
            action_norm_bound: 1.0,
            noise_level: 0.1,
            param_norm_bound: 1.0,
        }
    }

    fn constant_oracle(bound: f64) -> BiasOracleConfig {
        BiasOracleConfig::ConstantUpperBound { constant_bound: bound }
    }

    fn inputs_from(
        theta: DVector<f64>,
        environment: usize,
        action_sets: Vec<Vec<DVector<f64>>>,
        noise: Vec<f64>,
    ) -> TaskInputs {
        TaskInputs { parameter: TaskParameter { theta, environment }, action_sets, noise }
    }

    #[test]
    fn perfect_bias_and_zero_radius_selects_the_optimal_action() {
        let p = params(1.0, 1.0);
        let theta = vec2(0.8, 0.6);
        let state = OnlineRlsState::new(2, 1.0).unwrap();
        let set = vec![vec2(0.0, 1.0), vec2(1.0, 0.0), vec2(0.6, 0.8)];
        // Fresh state with bias theta collapses the center onto theta;
        // delta = 1 and t = 0 kill the data term, distance 0 kills the rest.
        let (idx, _) = oful_select_action(&state, &theta, 0.0, &set, &p).unwrap();
        let best = set
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.dot(&theta).partial_cmp(&b.1.dot(&theta)).unwrap())
            .unwrap()
            .0;
        assert_eq!(idx, best);
    }

    #[test]
    fn identical_actions_tie_break_to_index_zero() {
        let p = params(1.0, 0.1);
        let state = OnlineRlsState::new(2, 1.0).unwrap();
        let set = vec![vec2(0.6, 0.8), vec2(0.6, 0.8)];
        let (idx, _) = oful_select_action(&state, &vec2(0.0, 0.0), 1.0, &set, &p).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn fresh_unbiased_scores_match_the_hand_formula() {
        // Fresh state, bias 0: score = beta * ||x|| / sqrt(lambda); both unit
        // actions score beta, so index 0 wins the tie.
        let p = params(1.0, 0.1);
        let state = OnlineRlsState::new(2, 1.0).unwrap();
        let set = vec![vec2(1.0, 0.0), vec2(0.0, 1.0)];
        let beta = oful_radius(0, 2, 1.0, 1.0, 0.1, 1.0, 0.1).unwrap();
        let ell = ConfidenceEllipsoid {
            center: vec2(0.0, 0.0),
            shape: state.regularized_gram(),
            radius: beta,
        };
        for x in &set {
            let score = ellipsoid_ucb(x, &ell, state.gram_reg_inverse());
            assert!((score - beta).abs() < 1e-12);
        }
        let (idx, _) = oful_select_action(&state, &vec2(0.0, 0.0), 1.0, &set, &p).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn empty_action_set_is_a_scenario_error() {
        let p = params(1.0, 0.1);
        let state = OnlineRlsState::new(2, 1.0).unwrap();
        let err = oful_select_action(&state, &vec2(0.0, 0.0), 1.0, &[], &p).unwrap_err();
        assert!(matches!(err, MemlError::EmptyActionSet { round: 1 }));
    }

    fn record_with_estimate(v: DVector<f64>) -> TaskRunRecord {
        TaskRunRecord {
            actions: vec![],
            rewards: vec![],
            chosen_environment: None,
            final_unbiased_estimate: v,
            prefix_estimate: None,
        }
    }

    #[test]
    fn bias_set_means_per_environment() {
        let records = vec![
            vec![record_with_estimate(vec2(1.0, 1.0)), record_with_estimate(vec2(3.0, 3.0))],
            vec![record_with_estimate(vec2(-1.0, 0.5))],
        ];
        let set = build_bias_set(&records).unwrap();
        assert_eq!(set.biases[0], vec2(2.0, 2.0));
        assert_eq!(set.biases[1], vec2(-1.0, 0.5));
        assert_eq!(set.counts, vec![2, 1]);
        assert_eq!(set.source, BiasSource::LabeledTraining);
    }

    #[test]
    fn empty_environment_is_reported_by_index() {
        let records = vec![vec![record_with_estimate(vec2(1.0, 1.0))], vec![]];
        let err = build_bias_set(&records).unwrap_err();
        assert!(matches!(err, MemlError::InsufficientTrainingTasks { environment: 1 }));
    }

    #[test]
    fn bias_set_is_permutation_invariant() {
        let a = record_with_estimate(vec2(1.0, 0.0));
        let b = record_with_estimate(vec2(0.0, 2.0));
        let c = record_with_estimate(vec2(5.0, 5.0));
        let fwd = build_bias_set(&[vec![a.clone(), b.clone(), c.clone()]]).unwrap();
        let rev = build_bias_set(&[vec![c, b, a]]).unwrap();
        assert!((fwd.biases[0].clone() - rev.biases[0].clone()).norm() < 1e-12);
    }

    #[test]
    fn bias_error_shrinks_like_inverse_sqrt_n() {
        // Synthetic training estimates mu + z with i.i.d. Gaussian z: the
        // averaged bias error must follow a log-log slope of -1/2 in N.
        let mu = vec2(1.0, 1.0);
        let sigma = (0.5f64).sqrt();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let ns = [5usize, 10, 20, 40, 80];
        let reps = 300;
        let mut points = Vec::new();
        for &n in &ns {
            let mut err_sum = 0.0;
            for _ in 0..reps {
                let records: Vec<TaskRunRecord> = (0..n)
                    .map(|_| {
                        let z = DVector::from_fn(2, |_, _| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            sigma * g
                        });
                        record_with_estimate(&mu + z)
                    })
                    .collect();
                let set = build_bias_set(&[records]).unwrap();
                err_sum += (set.biases[0].clone() - &mu).norm();
            }
            points.push(((n as f64).ln(), (err_sum / reps as f64).ln()));
        }
        let slope = least_squares_slope(&points);
        assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
    }

    fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        num / den
    }

    #[test]
    fn classification_picks_the_nearest_mean() {
        let set = BiasSet::oracle_means(vec![vec2(1.0, 1.0), vec2(3.0, 3.0)]);
        assert_eq!(classify_environment(&vec2(1.1, 0.9), &set), 0);
        // Equidistant: tie-break to the lowest index.
        assert_eq!(classify_environment(&vec2(2.0, 2.0), &set), 0);
    }

    #[test]
    fn three_way_classification_example() {
        let set = BiasSet::oracle_means(vec![vec2(0.0, 0.0), vec2(2.0, 0.0), vec2(0.0, 2.0)]);
        // Squared distances: 2.65, 0.25, 5.45.
        assert_eq!(classify_environment(&vec2(1.6, 0.3), &set), 1);
    }

    #[test]
    fn classification_is_rotation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let angle: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let (s, c) = angle.sin_cos();
            let rotate = |v: &DVector<f64>| vec2(c * v[0] - s * v[1], s * v[0] + c * v[1]);
            let biases = vec![vec2(rng.gen(), rng.gen()), vec2(rng.gen(), rng.gen()), vec2(rng.gen(), rng.gen())];
            let estimate = vec2(rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0);
            let plain = classify_environment(&estimate, &BiasSet::oracle_means(biases.clone()));
            let rotated = classify_environment(
                &rotate(&estimate),
                &BiasSet::oracle_means(biases.iter().map(&rotate).collect()),
            );
            assert_eq!(plain, rotated);
        }
    }

    fn sphere_sets(seed: u64, horizon: usize, arms: usize) -> Vec<Vec<DVector<f64>>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..horizon)
            .map(|_| {
                (0..arms)
                    .map(|_| {
                        let v = DVector::from_fn(2, |_, _| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g
                        });
                        let n = v.norm();
                        v / n
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn forced_single_action_has_zero_regret() {
        let p = params(1.0, 0.1);
        let sets: Vec<Vec<DVector<f64>>> = sphere_sets(7, 6, 1);
        let inputs = inputs_from(vec2(1.0, 2.0), 0, sets, vec![0.0; 6]);
        let cfg = MemlConfig {
            exploration_rounds: 5,
            total_rounds: 6,
            bias_oracle: constant_oracle(2.0),
            update_bias_after_task: false,
        };
        let set = BiasSet::oracle_means(vec![vec2(0.0, 0.0)]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (_, trace) = meml_run_task(&cfg, &p, &set, &inputs, &mut rng).unwrap();
        assert!(trace.instant.iter().all(|&r| r == 0.0));
        assert_eq!(trace.final_cumulative(), 0.0);
    }

    #[test]
    fn perfect_information_has_zero_regret_after_exploration() {
        // Zero-variance environments (theta = mu exactly), oracle means,
        // exact distance oracle, delta = 1: post-exploration play is greedy
        // on the true parameter.
        let p = params(1.0, 1.0);
        let mu = vec2(0.6, -0.8);
        let sets = sphere_sets(8, 30, 10);
        let inputs = inputs_from(mu.clone(), 0, sets, vec![0.0; 30]);
        let cfg = MemlConfig {
            exploration_rounds: 3,
            total_rounds: 30,
            bias_oracle: BiasOracleConfig::TrueParameter,
            update_bias_after_task: false,
        };
        let set = BiasSet::oracle_means(vec![mu.clone(), vec2(5.0, 5.0)]);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let (record, trace) = meml_run_task(&cfg, &p, &set, &inputs, &mut rng).unwrap();
        assert_eq!(record.chosen_environment, Some(0));
        for &r in &trace.instant[3..] {
            assert!(r.abs() < 1e-12, "nonzero post-exploration regret {r}");
        }
    }

    #[test]
    fn meml_reduces_to_itl_with_one_zero_bias() {
        let p = params(1.0, 0.1);
        let sets = sphere_sets(9, 40, 10);
        let mut noise_rng = ChaCha12Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..40)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut noise_rng);
                0.1 * g
            })
            .collect();
        let inputs = inputs_from(vec2(1.5, -0.7), 0, sets, noise);
        let cfg = MemlConfig {
            exploration_rounds: 0,
            total_rounds: 40,
            // Distance S makes the biased radius identical to the plain one.
            bias_oracle: constant_oracle(p.param_norm_bound),
            update_bias_after_task: false,
        };
        let set = BiasSet {
            biases: vec![vec2(0.0, 0.0)],
            counts: vec![1],
            source: BiasSource::PooledAverage,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (meml_record, meml_trace) = meml_run_task(&cfg, &p, &set, &inputs, &mut rng).unwrap();
        let (itl_record, itl_trace) =
            run_baseline_task(&BaselineSpec::Itl, &p, &constant_oracle(1.0), &inputs).unwrap();
        assert_eq!(meml_record.actions, itl_record.actions);
        assert_eq!(meml_trace, itl_trace);
    }

    #[test]
    fn oracle_with_exact_knowledge_is_greedy_from_round_one() {
        let p = params(1.0, 1.0);
        let mu = vec2(1.0, 1.0);
        let sets = sphere_sets(10, 20, 10);
        let inputs = inputs_from(mu.clone(), 0, sets, vec![0.0; 20]);
        let means = vec![mu, vec2(3.0, 3.0)];
        let (_, trace) = run_baseline_task(
            &BaselineSpec::Oracle { environment_means: &means },
            &p,
            &BiasOracleConfig::TrueParameter,
            &inputs,
        )
        .unwrap();
        // Perfect bias and zero distance: no regret at all.
        assert!(trace.final_cumulative() < 1e-12);
    }

    #[test]
    fn oracle_without_means_for_the_label_errors() {
        let p = params(1.0, 0.1);
        let sets = sphere_sets(11, 3, 2);
        let inputs = inputs_from(vec2(1.0, 0.0), 5, sets, vec![0.0; 3]);
        let err = run_baseline_task(
            &BaselineSpec::Oracle { environment_means: &[vec2(1.0, 0.0)] },
            &p,
            &constant_oracle(1.0),
            &inputs,
        )
        .unwrap_err();
        assert!(matches!(err, MemlError::Config { .. }));
    }

    #[test]
    fn regret_is_nonnegative_and_bounded_by_cauchy_schwarz() {
        let p = params(1.0, 0.1);
        let theta = vec2(0.6, 0.8); // norm 1 = S
        let sets = sphere_sets(12, 50, 8);
        let mut noise_rng = ChaCha12Rng::seed_from_u64(6);
        let noise: Vec<f64> = (0..50)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut noise_rng);
                0.1 * g
            })
            .collect();
        let inputs = inputs_from(theta, 0, sets, noise);
        let (_, trace) = run_baseline_task(&BaselineSpec::Itl, &p, &constant_oracle(1.0), &inputs).unwrap();
        let cap = 2.0 * p.action_norm_bound * p.param_norm_bound;
        for &r in &trace.instant {
            assert!(r >= 0.0);
            assert!(r <= cap + 1e-12);
        }
        // Cumulative is the prefix sum and non-decreasing.
        for w in trace.cumulative.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        let sum: f64 = trace.instant.iter().sum();
        assert!((sum - trace.final_cumulative()).abs() < 1e-9);
    }

    #[test]
    fn training_task_sweeps_then_exploits_and_snapshots_the_prefix() {
        let p = params(1.0, 0.1);
        let sets = sphere_sets(13, 30, 10);
        let inputs = inputs_from(vec2(1.0, 2.0), 0, sets.clone(), vec![0.0; 30]);
        let (record, _) = run_training_task(&p, &inputs).unwrap();
        let prefix = record.prefix_estimate.as_ref().unwrap();
        // Reconstruct the prefix estimate from the stored first-d rounds.
        let mut s = OnlineRlsState::new(2, 1.0).unwrap();
        for (a, &y) in record.actions.iter().take(2).zip(record.rewards.iter().take(2)) {
            s.update(a, y).unwrap();
        }
        assert!((s.estimate() - prefix).norm() < 1e-12);
        // The sweep picks the most axis-aligned arms.
        for (round, chosen) in record.actions.iter().take(2).enumerate() {
            let best = sets[round]
                .iter()
                .map(|x| x[round].abs())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((chosen[round].abs() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_set_absorb_updates_the_running_mean() {
        let mut set = BiasSet {
            biases: vec![vec2(2.0, 2.0)],
            counts: vec![3],
            source: BiasSource::LabeledTraining,
        };
        set.absorb(0, &vec2(6.0, 6.0));
        assert_eq!(set.counts[0], 4);
        assert!((set.biases[0].clone() - vec2(3.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn meml_config_rejects_exploration_at_least_the_horizon() {
        let cfg = MemlConfig {
            exploration_rounds: 10,
            total_rounds: 10,
            bias_oracle: constant_oracle(1.0),
            update_bias_after_task: false,
        };
        assert!(cfg.validate().is_err());
    }
}
