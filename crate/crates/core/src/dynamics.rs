//! Monte Carlo simulation of a single agent on a ladder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::best_response::{
    best_response, instantaneous_utility, select_direction, ActionKind, ClassWindows, EffortWindow,
    Restriction,
};
use crate::error::{Error, Result};
use crate::model::{
    decision_probabilities, raw_decision, sample_decision, BoundaryClass, Ladder, ModelParams,
    Outcome,
};
use crate::scalar::Scalar;

/// Myopic policy family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Never games: best response along the improvement direction.
    NoGaming,
    /// Never improves: best response along the gaming direction.
    NoImprovement,
    /// Improvement best response with probability `rho`, gaming otherwise.
    Mix { rho: f64 },
    /// No effort.
    Zero,
}

impl PolicyKind {
    /// `rho` may sit at either endpoint; `Mix(1)` and `Mix(0)` reproduce the
    /// pure policies draw for draw.
    pub fn mix(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!(
                "mixture weight {rho} outside [0, 1]"
            )));
        }
        Ok(PolicyKind::Mix { rho })
    }

    pub fn name(&self) -> String {
        match self {
            PolicyKind::NoGaming => "ng".into(),
            PolicyKind::NoImprovement => "ni".into(),
            PolicyKind::Mix { rho } => format!("mix({rho})"),
            PolicyKind::Zero => "zero".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState<S> {
    pub level: usize,
    pub attribute: S,
    /// Private qualification; carried along, never updated.
    pub qualification: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub time: usize,
    pub state_before: AgentState<S>,
    pub action_scalar: S,
    /// `None` for a zero action.
    pub action_kind: Option<ActionKind>,
    pub y_hat: S,
    pub outcome: Outcome,
    pub reward_next: S,
    /// Eq.-2 expected utility at the chosen action.
    pub utility: S,
    /// `r i_{t+1} - c a` at the sampled outcome.
    pub realized_utility: S,
    /// Abstention-weighted probability that the decision matches the side of
    /// the threshold the post-response attribute is on.
    pub accuracy: S,
}

impl<S> StepRecord<S> {
    pub fn next_level(&self) -> usize {
        self.outcome.apply(self.state_before.level)
    }
}

pub fn kind_name(kind: Option<ActionKind>) -> &'static str {
    match kind {
        Some(ActionKind::Improvement) => "improve",
        Some(ActionKind::Gaming) => "game",
        None => "none",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMetrics<S> {
    pub level_histogram: Vec<S>,
    pub avg_attribute: S,
    pub avg_utility: S,
    pub avg_realized_utility: S,
    pub avg_accuracy: S,
    /// `[start, end)` record indices used.
    pub window: (usize, usize),
}

impl<S: Scalar> TrajectoryMetrics<S> {
    pub fn mean_level(&self) -> S {
        self.level_histogram
            .iter()
            .enumerate()
            .map(|(k, &q)| S::from_usize(k + 1).unwrap() * q)
            .sum()
    }
}

/// Precomputed windows for both pure policies on one ladder.
#[derive(Debug, Clone)]
pub struct Simulator<S> {
    pub params: ModelParams<S>,
    pub ladder: Ladder<S>,
    pub ng_cost: S,
    pub ni_cost: S,
    /// `None` where `G` has no local maximiser (effort never pays).
    pub ng_windows: Vec<Option<EffortWindow<S>>>,
    pub ni_windows: Vec<Option<EffortWindow<S>>>,
}

fn ladder_windows<S: Scalar>(
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    cost: S,
) -> Result<Vec<Option<EffortWindow<S>>>> {
    use crate::best_response::find_effort_window;
    use crate::model::LevelSpec;
    let mut by_class: [Option<Option<EffortWindow<S>>>; 3] = [None, None, None];
    for (slot, class) in by_class.iter_mut().zip([
        BoundaryClass::First,
        BoundaryClass::Middle,
        BoundaryClass::Terminal,
    ]) {
        *slot = Some(
            match find_effort_window(params, &LevelSpec::of_class(class, S::zero()), cost) {
                Ok(w) => Some(w),
                Err(Error::EmptyLocalMaximizers { .. }) => None,
                Err(e) => return Err(e),
            },
        );
    }
    Ok(ladder
        .levels()
        .map(|l| {
            let k = match l.class {
                BoundaryClass::First => 0,
                BoundaryClass::Middle => 1,
                BoundaryClass::Terminal => 2,
            };
            by_class[k]
                .as_ref()
                .unwrap()
                .as_ref()
                .map(|w| w.shifted(&l))
        })
        .collect())
}

impl<S: Scalar> Simulator<S> {
    pub fn new(params: ModelParams<S>, ladder: Ladder<S>) -> Result<Self> {
        let ng_cost = select_direction(&params, Restriction::ImprovementOnly)?.unit_cost;
        let ni_cost = select_direction(&params, Restriction::GamingOnly)?.unit_cost;
        let ng_windows = ladder_windows(&params, &ladder, ng_cost)?;
        let ni_windows = ladder_windows(&params, &ladder, ni_cost)?;
        Ok(Self {
            params,
            ladder,
            ng_cost,
            ni_cost,
            ng_windows,
            ni_windows,
        })
    }

    /// Reuses class windows computed elsewhere.
    pub fn with_windows(
        params: ModelParams<S>,
        ladder: Ladder<S>,
        ng: &ClassWindows<S>,
        ni: &ClassWindows<S>,
    ) -> Self {
        let ng_windows = ng.for_ladder(&ladder).into_iter().map(Some).collect();
        let ni_windows = ni.for_ladder(&ladder).into_iter().map(Some).collect();
        Self {
            ng_cost: ng.first.unit_cost,
            ni_cost: ni.first.unit_cost,
            params,
            ladder,
            ng_windows,
            ni_windows,
        }
    }

    pub fn levels(&self) -> usize {
        self.ladder.len()
    }

    fn respond(&self, windows: &[Option<EffortWindow<S>>], state: &AgentState<S>) -> S {
        match &windows[state.level - 1] {
            Some(w) => best_response(&self.params, w, state.attribute)
                .map(|(a, _)| a)
                .unwrap_or_else(|_| S::zero()),
            None => S::zero(),
        }
    }

    /// One mixture draw per step regardless of policy, so all policies consume
    /// the stream identically.
    pub fn choose_action<R: Rng + ?Sized>(
        &self,
        state: &AgentState<S>,
        policy: PolicyKind,
        rng: &mut R,
    ) -> (S, Option<ActionKind>) {
        let u: f64 = rng.gen();
        let improve = match policy {
            PolicyKind::NoGaming => Some(true),
            PolicyKind::NoImprovement => Some(false),
            PolicyKind::Mix { rho } => Some(u < rho),
            PolicyKind::Zero => None,
        };
        match improve {
            None => (S::zero(), None),
            Some(true) => self.tag(
                self.respond(&self.ng_windows, state),
                ActionKind::Improvement,
            ),
            Some(false) => self.tag(self.respond(&self.ni_windows, state), ActionKind::Gaming),
        }
    }

    fn tag(&self, a: S, kind: ActionKind) -> (S, Option<ActionKind>) {
        if a > S::zero() {
            (a, Some(kind))
        } else {
            (S::zero(), None)
        }
    }

    pub fn unit_cost(&self, kind: Option<ActionKind>) -> S {
        match kind {
            Some(ActionKind::Improvement) => self.ng_cost,
            Some(ActionKind::Gaming) => self.ni_cost,
            None => S::zero(),
        }
    }

    /// Applies an action: decision at `y_hat = x + a`, then depreciation.
    pub fn step<R: Rng + ?Sized>(
        &self,
        time: usize,
        state: AgentState<S>,
        action: (S, Option<ActionKind>),
        rng: &mut R,
    ) -> (AgentState<S>, StepRecord<S>) {
        let (a, kind) = action;
        let level = self.ladder.level(state.level);
        let y_hat = state.attribute + a;
        let probs = decision_probabilities(&self.params, &level, y_hat);
        let outcome = sample_decision(&probs, rng);
        let next_level = outcome.apply(state.level);
        debug_assert!(next_level >= 1 && next_level <= self.levels());

        let post = if kind == Some(ActionKind::Improvement) {
            y_hat
        } else {
            state.attribute
        };
        let next_attribute = self.params.gamma() * post;
        debug_assert!(next_attribute >= S::zero());

        let cost = self.unit_cost(kind);
        let reward_next = self.params.reward() * S::from_usize(next_level).unwrap();
        let raw = raw_decision(&self.params, &level, y_hat);
        let correct = if post >= level.mu {
            raw.sigma
        } else {
            S::one() - raw.sigma
        };
        let record = StepRecord {
            time,
            state_before: state,
            action_scalar: a,
            action_kind: kind,
            y_hat,
            outcome,
            reward_next,
            utility: instantaneous_utility(&self.params, &level, state.attribute, a, cost),
            realized_utility: reward_next - cost * a,
            accuracy: (S::one() - raw.abstain) * correct,
        };
        let next = AgentState {
            level: next_level,
            attribute: next_attribute,
            qualification: state.qualification,
        };
        (next, record)
    }

    /// `horizon` steps from level 1 at attribute `x0`.
    pub fn run_trial(
        &self,
        policy: PolicyKind,
        horizon: usize,
        seed: u64,
        x0: S,
    ) -> Vec<StepRecord<S>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.run_trial_with(policy, horizon, x0, &mut rng)
    }

    pub fn run_trial_with<R: Rng + ?Sized>(
        &self,
        policy: PolicyKind,
        horizon: usize,
        x0: S,
        rng: &mut R,
    ) -> Vec<StepRecord<S>> {
        let mut state = AgentState {
            level: 1,
            attribute: x0,
            qualification: S::zero(),
        };
        let mut out = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let action = self.choose_action(&state, policy, rng);
            let (next, rec) = self.step(t, state, action, rng);
            out.push(rec);
            state = next;
        }
        out
    }
}

/// Averages over the final `window_length` records.
pub fn summarize<S: Scalar>(
    traj: &[StepRecord<S>],
    levels: usize,
    window_length: usize,
) -> Result<TrajectoryMetrics<S>> {
    if window_length > traj.len() {
        return Err(Error::InvalidInput(format!(
            "averaging window {window_length} exceeds trajectory length {}",
            traj.len()
        )));
    }
    summarize_range(traj, levels, traj.len() - window_length)
}

/// Averages over records `[start, len)`.
pub fn summarize_range<S: Scalar>(
    traj: &[StepRecord<S>],
    levels: usize,
    start: usize,
) -> Result<TrajectoryMetrics<S>> {
    let end = traj.len();
    if start >= end {
        return Err(Error::InvalidInput("empty averaging window".into()));
    }
    let n = S::from_usize(end - start).unwrap();
    let mut counts = vec![0usize; levels];
    let (mut x, mut u, mut ur, mut acc) = (S::zero(), S::zero(), S::zero(), S::zero());
    for rec in &traj[start..end] {
        counts[rec.state_before.level - 1] += 1;
        x = x + rec.state_before.attribute;
        u = u + rec.utility;
        ur = ur + rec.realized_utility;
        acc = acc + rec.accuracy;
    }
    Ok(TrajectoryMetrics {
        level_histogram: counts
            .iter()
            .map(|&c| S::from_usize(c).unwrap() / n)
            .collect(),
        avg_attribute: x / n,
        avg_utility: u / n,
        avg_realized_utility: ur / n,
        avg_accuracy: acc / n,
        window: (start, end),
    })
}

/// Cross-trial mean and sample standard deviation of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary<S> {
    pub policy: PolicyKind,
    pub trials: Vec<TrajectoryMetrics<S>>,
    pub metrics: Vec<MetricSummary>,
}

impl<S: Scalar> ExperimentSummary<S> {
    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Scalar metrics of one trial, in reporting order.
pub fn metric_row<S: Scalar>(m: &TrajectoryMetrics<S>) -> Vec<(String, f64)> {
    let mut row = vec![
        ("mean_level".to_string(), m.mean_level().as_f64()),
        ("avg_attribute".to_string(), m.avg_attribute.as_f64()),
        ("avg_utility".to_string(), m.avg_utility.as_f64()),
        (
            "avg_realized_utility".to_string(),
            m.avg_realized_utility.as_f64(),
        ),
        ("avg_accuracy".to_string(), m.avg_accuracy.as_f64()),
    ];
    for (k, q) in m.level_histogram.iter().enumerate() {
        row.push((format!("q_{}", k + 1), q.as_f64()));
    }
    row
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Which records a trial's metrics average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// The final `n` records.
    Window(usize),
    /// Everything from record `b` on.
    BurnIn(usize),
}

impl Averaging {
    fn start(self, horizon: usize) -> Result<usize> {
        match self {
            Averaging::Window(n) if n >= 1 && n <= horizon => Ok(horizon - n),
            Averaging::BurnIn(b) if b < horizon => Ok(b),
            Averaging::Window(n) => Err(Error::InvalidInput(format!(
                "window {n} outside [1, horizon = {horizon}]"
            ))),
            Averaging::BurnIn(b) => Err(Error::InvalidInput(format!(
                "burn-in {b} leaves nothing of horizon {horizon}"
            ))),
        }
    }
}

/// Independent trials seeded `base_seed + k`, run in parallel, each averaged
/// over its final `window` steps.
pub fn run_experiment<S: Scalar>(
    sim: &Simulator<S>,
    policy: PolicyKind,
    trials: usize,
    horizon: usize,
    window: usize,
    base_seed: u64,
    x0: S,
) -> Result<ExperimentSummary<S>> {
    run_experiment_with(
        sim,
        policy,
        trials,
        horizon,
        Averaging::Window(window),
        base_seed,
        x0,
    )
}

pub fn run_experiment_with<S: Scalar>(
    sim: &Simulator<S>,
    policy: PolicyKind,
    trials: usize,
    horizon: usize,
    averaging: Averaging,
    base_seed: u64,
    x0: S,
) -> Result<ExperimentSummary<S>> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let start = averaging.start(horizon)?;
    let per_trial: Vec<TrajectoryMetrics<S>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let traj = sim.run_trial(policy, horizon, base_seed.wrapping_add(k as u64), x0);
            summarize_range(&traj, sim.levels(), start)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<(String, f64)>> = per_trial.iter().map(metric_row).collect();
    let metrics = (0..rows[0].len())
        .map(|j| {
            let vals: Vec<f64> = rows.iter().map(|r| r[j].1).collect();
            let (mean, std) = mean_std(&vals);
            MetricSummary {
                metric: rows[0][j].0.clone(),
                mean,
                std,
            }
        })
        .collect();
    Ok(ExperimentSummary {
        policy,
        trials: per_trial,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Abstention;

    fn sim() -> Simulator<f64> {
        let p = ModelParams::scalar(
            4.0,
            0.9,
            1.0,
            0.8,
            0.75,
            Abstention::entropy(0.604).unwrap(),
        )
        .unwrap();
        Simulator::new(p, Ladder::evenly_spaced(10, 0.3).unwrap()).unwrap()
    }

    #[test]
    fn zero_policy_decays_geometrically() {
        let s = sim();
        let traj = s.run_trial(PolicyKind::Zero, 101, 5, 1.0);
        let x100 = traj[100].state_before.attribute;
        let exact = 0.9f64.powi(100);
        assert!(((x100 - exact) / exact).abs() < 1e-15);
        assert!(traj
            .iter()
            .all(|r| r.action_scalar == 0.0 && r.action_kind.is_none()));
    }

    #[test]
    fn zero_attribute_is_absorbing() {
        let s = sim();
        let traj = s.run_trial(PolicyKind::Zero, 500, 1, 0.0);
        assert!(traj.iter().all(|r| r.state_before.attribute == 0.0));
    }

    #[test]
    fn empty_and_repeatable_trials() {
        let s = sim();
        assert!(s.run_trial(PolicyKind::NoGaming, 0, 1, 0.0).is_empty());
        let a = s.run_trial(PolicyKind::NoGaming, 300, 9, 0.0);
        let b = s.run_trial(PolicyKind::NoGaming, 300, 9, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn ni_acts_at_zero_on_level_one() {
        let s = sim();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = AgentState {
            level: 1,
            attribute: 0.0,
            qualification: 0.0,
        };
        let (a, k) = s.choose_action(&state, PolicyKind::NoImprovement, &mut rng);
        let w = s.ni_windows[0].as_ref().unwrap();
        assert!(w.mu_under <= 0.0);
        assert_eq!(a, w.mu_bar);
        assert_eq!(k, Some(ActionKind::Gaming));
    }

    #[test]
    fn improvement_moves_attribute_to_target() {
        let s = sim();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = AgentState {
            level: 1,
            attribute: 0.0,
            qualification: 0.0,
        };
        let act = s.choose_action(&state, PolicyKind::NoGaming, &mut rng);
        let (next, rec) = s.step(0, state, act, &mut rng);
        let target = s.ng_windows[0].as_ref().unwrap().mu_bar;
        assert_eq!(rec.y_hat, target);
        assert!((next.attribute - 0.9 * target).abs() < 1e-15);

        let state = AgentState {
            level: 1,
            attribute: 0.0,
            qualification: 0.0,
        };
        let act = s.choose_action(&state, PolicyKind::NoImprovement, &mut rng);
        let (next, _) = s.step(0, state, act, &mut rng);
        assert_eq!(next.attribute, 0.0);
    }

    #[test]
    fn summarize_constant_run() {
        let s = sim();
        let traj = s.run_trial(PolicyKind::Zero, 50, 2, 0.0);
        let m = summarize(&traj, 10, 50).unwrap();
        assert_eq!(m.avg_attribute, 0.0);
        assert!((m.level_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(summarize(&traj, 10, 51).is_err());
        assert!((0.0..=1.0).contains(&m.avg_accuracy));
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let s = sim();
        let e = run_experiment(&s, PolicyKind::NoGaming, 1, 300, 100, 4, 0.0).unwrap();
        assert!(e.metrics.iter().all(|m| m.std == 0.0));
    }
}
