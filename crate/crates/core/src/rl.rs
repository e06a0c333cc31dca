//! Unrestricted agent on a discretised state/action grid: tabular SARSA with
//! UCB exploration and an exact value-iteration oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::best_response::{select_direction, Restriction};
use crate::error::{invalid, Error, Result};
use crate::model::{decision_probabilities, raw_decision, Ladder, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlConfig<S> {
    pub dx: S,
    /// Attribute grid is `{0, dx, ..., n_x dx}`.
    pub n_x: usize,
    pub da: S,
    /// Each action dimension is `{0, da, ..., n_a da}`.
    pub n_a: usize,
    pub episodes: usize,
    pub horizon: usize,
    pub discount: S,
    pub ucb_coefficient: S,
    pub seeds: usize,
    /// Episodes averaged when picking the best seed.
    pub selection_window: usize,
    /// Step size is `(1 + n(s, a))^-exponent`.
    pub learning_rate_exponent: S,
}

impl<S: Scalar> Default for RlConfig<S> {
    fn default() -> Self {
        Self {
            dx: S::lit(0.2),
            n_x: 100,
            da: S::lit(0.2),
            n_a: 15,
            episodes: 1999,
            horizon: 2500,
            discount: S::lit(0.99),
            ucb_coefficient: S::one(),
            seeds: 10,
            selection_window: 100,
            learning_rate_exponent: S::one(),
        }
    }
}

impl<S: Scalar> RlConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > S::zero() && self.dx.is_finite()) {
            return Err(invalid("dx", format!("must be positive, got {}", self.dx)));
        }
        if !(self.da > S::zero() && self.da.is_finite()) {
            return Err(invalid("da", format!("must be positive, got {}", self.da)));
        }
        if self.n_x == 0 {
            return Err(invalid("n_x", "attribute grid needs at least two points"));
        }
        if !(self.discount >= S::zero() && self.discount <= S::one()) {
            return Err(invalid(
                "discount",
                format!("must lie in [0, 1], got {}", self.discount),
            ));
        }
        if !(self.ucb_coefficient >= S::zero() && self.ucb_coefficient.is_finite()) {
            return Err(invalid(
                "ucb_coefficient",
                format!("must be non-negative, got {}", self.ucb_coefficient),
            ));
        }
        let w = self.learning_rate_exponent;
        if !(w > S::lit(0.5) && w <= S::one()) {
            return Err(invalid(
                "learning_rate_exponent",
                format!("must lie in (1/2, 1], got {w}"),
            ));
        }
        if self.episodes == 0 || self.horizon == 0 || self.seeds == 0 {
            return Err(invalid(
                "episodes",
                "episodes, horizon and seeds must be positive",
            ));
        }
        Ok(())
    }
}

/// Which effort dimensions the agent may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionMask {
    #[default]
    Both,
    ImprovementOnly,
    GamingOnly,
}

/// Finite MDP with an exact expected model.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp<S> {
    pub n_states: usize,
    pub n_actions: usize,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<S>>,
    /// `transitions[s][a]` lists `(next state, probability)`.
    pub transitions: Vec<Vec<Vec<(usize, S)>>>,
}

impl<S: Scalar> FiniteMdp<S> {
    pub fn validate(&self) -> Result<()> {
        if self.reward.len() != self.n_states || self.transitions.len() != self.n_states {
            return Err(Error::InvalidInput("state count mismatch".into()));
        }
        for (s, rows) in self.transitions.iter().enumerate() {
            if rows.len() != self.n_actions || self.reward[s].len() != self.n_actions {
                return Err(Error::InvalidInput(format!(
                    "action count mismatch at state {s}"
                )));
            }
            for row in rows {
                let total: S = row.iter().map(|&(_, p)| p).sum();
                if (total - S::one()).abs() > S::tolerance(1e-12)
                    || row.iter().any(|&(n, _)| n >= self.n_states)
                {
                    return Err(Error::InvalidInput(format!(
                        "bad transition row at state {s}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let row = &self.transitions[s][a];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(n, p) in row {
            acc += p.as_f64();
            if u < acc {
                return n;
            }
        }
        row.last().expect("non-empty row").0
    }

    fn q_value(&self, s: usize, a: usize, v: &[S], discount: S) -> S {
        self.reward[s][a]
            + discount
                * self.transitions[s][a]
                    .iter()
                    .map(|&(n, p)| p * v[n])
                    .sum::<S>()
    }
}

/// Grid environment built on the level model.
#[derive(Debug, Clone)]
pub struct DiscreteEnv<S> {
    pub params: ModelParams<S>,
    pub ladder: Ladder<S>,
    pub config: RlConfig<S>,
    pub mask: ActionMask,
    pub c_improve: S,
    pub c_game: S,
    /// `(a+ bin, a- bin)` per action index; index 0 is the zero action.
    pub actions: Vec<(usize, usize)>,
    pub mdp: FiniteMdp<S>,
}

/// Nearest grid bin, halves rounding up, clamped to the grid.
pub fn snap<S: Scalar>(x: S, dx: S, n_x: usize) -> usize {
    let k = (x / dx + S::lit(0.5)).floor();
    k.to_usize().unwrap_or(0).min(n_x)
}

pub fn build_discrete_env<S: Scalar>(
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    config: RlConfig<S>,
    mask: ActionMask,
) -> Result<DiscreteEnv<S>> {
    config.validate()?;
    let top = *ladder.thresholds().last().unwrap();
    let span = config.dx * S::from_usize(config.n_x).unwrap();
    if span < top {
        return Err(invalid(
            "n_x",
            format!("attribute grid tops out at {span}, below the last threshold {top}"),
        ));
    }
    let c_improve = select_direction(params, Restriction::ImprovementOnly)?.unit_cost;
    let c_game = select_direction(params, Restriction::GamingOnly)?.unit_cost;
    let mut actions = Vec::new();
    for j in 0..=config.n_a {
        for m in 0..=config.n_a {
            let ok = match mask {
                ActionMask::Both => true,
                ActionMask::ImprovementOnly => m == 0,
                ActionMask::GamingOnly => j == 0,
            };
            if ok {
                actions.push((j, m));
            }
        }
    }
    let levels = ladder.len();
    let nx = config.n_x + 1;
    let n_states = levels * nx;
    let mut reward = vec![Vec::with_capacity(actions.len()); n_states];
    let mut transitions = vec![Vec::with_capacity(actions.len()); n_states];
    for i in 1..=levels {
        let level = ladder.level(i);
        for k in 0..nx {
            let s = (i - 1) * nx + k;
            let x = config.dx * S::from_usize(k).unwrap();
            for &(j, m) in &actions {
                let ap = config.da * S::from_usize(j).unwrap();
                let am = config.da * S::from_usize(m).unwrap();
                let p = decision_probabilities(params, &level, x + ap + am);
                let nk = snap(params.gamma() * (x + ap), config.dx, config.n_x);
                let ri = S::from_usize(i).unwrap();
                reward[s].push(
                    params.reward() * (ri + p.p_up - p.p_down) - c_improve * ap - c_game * am,
                );
                let mut row = Vec::with_capacity(3);
                for (lvl, prob) in [(i - 1, p.p_down), (i, p.p_stay), (i + 1, p.p_up)] {
                    if prob > S::zero() && lvl >= 1 && lvl <= levels {
                        row.push(((lvl - 1) * nx + nk, prob));
                    }
                }
                transitions[s].push(row);
            }
        }
    }
    let mdp = FiniteMdp {
        n_states,
        n_actions: actions.len(),
        reward,
        transitions,
    };
    Ok(DiscreteEnv {
        params: params.clone(),
        ladder: ladder.clone(),
        config,
        mask,
        c_improve,
        c_game,
        actions,
        mdp,
    })
}

impl<S: Scalar> DiscreteEnv<S> {
    pub fn bins(&self) -> usize {
        self.config.n_x + 1
    }

    pub fn state(&self, level: usize, bin: usize) -> usize {
        (level - 1) * self.bins() + bin
    }

    /// `(level, attribute bin)`.
    pub fn decode(&self, s: usize) -> (usize, usize) {
        (s / self.bins() + 1, s % self.bins())
    }

    pub fn start_state(&self) -> usize {
        0
    }

    /// `(a+, a-)` magnitudes of an action index.
    pub fn efforts(&self, a: usize) -> (S, S) {
        let (j, m) = self.actions[a];
        (
            self.config.da * S::from_usize(j).unwrap(),
            self.config.da * S::from_usize(m).unwrap(),
        )
    }

    /// Abstention-weighted probability of a correct decision about the
    /// post-response attribute.
    pub fn accuracy(&self, s: usize, a: usize) -> S {
        let (i, k) = self.decode(s);
        let level = self.ladder.level(i);
        let x = self.config.dx * S::from_usize(k).unwrap();
        let (ap, am) = self.efforts(a);
        let raw = raw_decision(&self.params, &level, x + ap + am);
        let correct = if x + ap >= level.mu {
            raw.sigma
        } else {
            S::one() - raw.sigma
        };
        (S::one() - raw.abstain) * correct
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution<S> {
    pub values: Vec<S>,
    /// Greedy action per state; ties go to the lowest index.
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Bellman iteration until successive values differ by less than `tolerance`
/// in sup norm.
pub fn value_iteration_oracle<S: Scalar>(
    mdp: &FiniteMdp<S>,
    discount: S,
    tolerance: S,
) -> Result<ValueSolution<S>> {
    if !(discount >= S::zero() && discount < S::one()) {
        return Err(invalid(
            "discount",
            format!("value iteration needs discount in [0, 1), got {discount}"),
        ));
    }
    if !(tolerance > S::zero()) {
        return Err(invalid(
            "tolerance",
            format!("must be positive, got {tolerance}"),
        ));
    }
    let mut v = vec![S::zero(); mdp.n_states];
    let cap = 1_000_000;
    for it in 1..=cap {
        let next: Vec<S> = (0..mdp.n_states)
            .map(|s| {
                (0..mdp.n_actions)
                    .map(|a| mdp.q_value(s, a, &v, discount))
                    .fold(S::neg_infinity(), S::max)
            })
            .collect();
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max);
        v = next;
        if diff < tolerance {
            let policy = greedy_from_values(mdp, &v, discount);
            return Ok(ValueSolution {
                values: v,
                policy,
                iterations: it,
            });
        }
    }
    Err(Error::NotConverged {
        what: "value iteration",
        iterations: cap,
        residual: f64::NAN,
    })
}

fn greedy_from_values<S: Scalar>(mdp: &FiniteMdp<S>, v: &[S], discount: S) -> Vec<usize> {
    (0..mdp.n_states)
        .map(|s| argmax_first((0..mdp.n_actions).map(|a| mdp.q_value(s, a, v, discount))))
        .collect()
}

fn argmax_first<S: Scalar>(vals: impl Iterator<Item = S>) -> usize {
    let mut best = 0;
    let mut best_v = S::neg_infinity();
    for (k, v) in vals.enumerate() {
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}

/// Exact discounted value of a deterministic policy, by iterating its
/// Bellman operator.
pub fn policy_value<S: Scalar>(
    mdp: &FiniteMdp<S>,
    policy: &[usize],
    discount: S,
    tolerance: S,
) -> Result<Vec<S>> {
    if !(discount >= S::zero() && discount < S::one()) {
        return Err(invalid(
            "discount",
            format!("policy evaluation needs discount in [0, 1), got {discount}"),
        ));
    }
    let mut v = vec![S::zero(); mdp.n_states];
    for _ in 0..1_000_000 {
        let next: Vec<S> = (0..mdp.n_states)
            .map(|s| mdp.q_value(s, policy[s], &v, discount))
            .collect();
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max);
        v = next;
        if diff < tolerance {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        what: "policy evaluation",
        iterations: 1_000_000,
        residual: f64::NAN,
    })
}

/// Trained action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy<S> {
    /// `action_values[s][a]`.
    pub action_values: Vec<Vec<S>>,
    pub visit_counts: Vec<Vec<u64>>,
    /// Mean per-step reward of each training episode.
    pub episode_rewards: Vec<S>,
    pub seed: u64,
}

impl<S: Scalar> TabularPolicy<S> {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            action_values: vec![vec![S::zero(); n_actions]; n_states],
            visit_counts: vec![vec![0; n_actions]; n_states],
            episode_rewards: vec![],
            seed: 0,
        }
    }

    /// Greedy action, ties to the lowest index (the zero action first).
    pub fn greedy(&self, s: usize) -> usize {
        argmax_first(self.action_values[s].iter().copied())
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.action_values.len())
            .map(|s| self.greedy(s))
            .collect()
    }

    /// Mean of the last `window` episode rewards.
    pub fn tail_reward(&self, window: usize) -> S {
        let n = self.episode_rewards.len();
        let w = window.clamp(1, n.max(1));
        if n == 0 {
            return S::zero();
        }
        self.episode_rewards[n - w..].iter().copied().sum::<S>() / S::from_usize(w).unwrap()
    }
}

fn ucb_action<S: Scalar>(q: &[S], counts: &[u64], coefficient: S) -> usize {
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return a;
    }
    let total: u64 = counts.iter().sum();
    let ln = S::from_u64(total).unwrap().ln();
    argmax_first(
        q.iter()
            .zip(counts)
            .map(|(&v, &c)| v + coefficient * (ln / S::from_u64(c).unwrap()).sqrt()),
    )
}

/// On-policy SARSA with UCB action choice and step size `(1 + n(s, a))^-w`.
pub fn sarsa_train<S: Scalar>(
    env: &DiscreteEnv<S>,
    config: &RlConfig<S>,
    seed: u64,
) -> TabularPolicy<S> {
    let mdp = &env.mdp;
    let mut table = TabularPolicy::zeros(mdp.n_states, mdp.n_actions);
    table.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config.ucb_coefficient;
    let eta = config.discount;
    for _ in 0..config.episodes {
        let mut s = env.start_state();
        let mut a = ucb_action(&table.action_values[s], &table.visit_counts[s], c);
        let mut total = S::zero();
        for _ in 0..config.horizon {
            let r = mdp.reward[s][a];
            let s2 = mdp.sample(s, a, &mut rng);
            let a2 = ucb_action(&table.action_values[s2], &table.visit_counts[s2], c);
            let n = table.visit_counts[s][a];
            let lr = S::from_u64(n + 1)
                .unwrap()
                .powf(-config.learning_rate_exponent);
            let target = r + eta * table.action_values[s2][a2];
            let q = &mut table.action_values[s][a];
            *q = *q + lr * (target - *q);
            table.visit_counts[s][a] = n + 1;
            total = total + r;
            s = s2;
            a = a2;
        }
        table
            .episode_rewards
            .push(total / S::from_usize(config.horizon).unwrap());
    }
    table
}

/// Trains `config.seeds` tables (seeds `base_seed + k`) in parallel and keeps
/// the one with the best tail reward; earlier seeds win ties.
pub fn train_best_of_seeds<S: Scalar>(
    env: &DiscreteEnv<S>,
    config: &RlConfig<S>,
    base_seed: u64,
) -> TabularPolicy<S> {
    let tables: Vec<TabularPolicy<S>> = (0..config.seeds)
        .into_par_iter()
        .map(|k| sarsa_train(env, config, base_seed.wrapping_add(k as u64)))
        .collect();
    let mut best = 0;
    for k in 1..tables.len() {
        if tables[k].tail_reward(config.selection_window)
            > tables[best].tail_reward(config.selection_window)
        {
            best = k;
        }
    }
    tables.into_iter().nth(best).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<S> {
    pub avg_improve_effort: S,
    pub avg_game_effort: S,
    pub decision_maker_utility: S,
    pub avg_reward: S,
}

impl<S: Scalar> Evaluation<S> {
    pub fn effort_gap(&self) -> S {
        self.avg_improve_effort - self.avg_game_effort
    }
}

/// One greedy episode of `horizon` steps from the start state.
pub fn evaluate_policy<S: Scalar>(
    policy: &TabularPolicy<S>,
    env: &DiscreteEnv<S>,
    horizon: usize,
    seed: u64,
) -> Result<Evaluation<S>> {
    if horizon == 0 {
        return Err(Error::InvalidInput(
            "evaluation horizon must be positive".into(),
        ));
    }
    if policy.action_values.len() != env.mdp.n_states {
        return Err(Error::InvalidInput(
            "policy table does not match the environment".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = env.start_state();
    let (mut ip, mut gm, mut acc, mut rw) = (S::zero(), S::zero(), S::zero(), S::zero());
    for _ in 0..horizon {
        let a = policy.greedy(s);
        let (ap, am) = env.efforts(a);
        ip = ip + ap;
        gm = gm + am;
        acc = acc + env.accuracy(s, a);
        rw = rw + env.mdp.reward[s][a];
        s = env.mdp.sample(s, a, &mut rng);
    }
    let n = S::from_usize(horizon).unwrap();
    Ok(Evaluation {
        avg_improve_effort: ip / n,
        avg_game_effort: gm / n,
        decision_maker_utility: acc / n,
        avg_reward: rw / n,
    })
}

/// `level,attribute,a_improve,a_game,value,visits` rows.
pub fn q_table_csv<S: Scalar>(policy: &TabularPolicy<S>, env: &DiscreteEnv<S>) -> String {
    let mut out = String::from("level,attribute,a_improve,a_game,value,visits\n");
    for s in 0..env.mdp.n_states {
        let (i, k) = env.decode(s);
        let x = env.config.dx * S::from_usize(k).unwrap();
        for a in 0..env.mdp.n_actions {
            let (ap, am) = env.efforts(a);
            out.push_str(&format!(
                "{i},{x},{ap},{am},{},{}\n",
                policy.action_values[s][a], policy.visit_counts[s][a]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Abstention;

    fn params() -> ModelParams<f64> {
        ModelParams::scalar(
            4.0,
            0.9,
            1.0,
            0.8,
            0.75,
            Abstention::entropy(0.604).unwrap(),
        )
        .unwrap()
    }

    fn small(discount: f64) -> RlConfig<f64> {
        RlConfig {
            dx: 0.5,
            n_x: 20,
            da: 0.5,
            n_a: 5,
            episodes: 300,
            horizon: 100,
            discount,
            seeds: 2,
            ..RlConfig::default()
        }
    }

    #[test]
    fn grid_reach_and_snapping() {
        let p = params();
        let ladder = Ladder::evenly_spaced(3, 5.0).unwrap();
        let cfg = RlConfig::<f64> {
            n_x: 100,
            dx: 0.2,
            ..RlConfig::default()
        };
        assert!(build_discrete_env(&p, &ladder, cfg, ActionMask::Both).is_ok());
        let short = RlConfig { n_x: 10, ..cfg };
        assert!(build_discrete_env(&p, &ladder, short, ActionMask::Both).is_err());
        assert_eq!(snap(0.25, 0.5, 10), 1);
        assert_eq!(snap(0.2499, 0.5, 10), 0);
        assert_eq!(snap(100.0, 0.5, 10), 10);
        for k in 0..200 {
            let x = k as f64 * 0.0137;
            assert!((snap(x, 0.2, 1000) as f64 * 0.2 - x).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn origin_absorbs_without_effort() {
        let env = build_discrete_env(
            &params(),
            &Ladder::evenly_spaced(3, 2.0).unwrap(),
            small(0.9),
            ActionMask::Both,
        )
        .unwrap();
        for &(n, _) in &env.mdp.transitions[env.start_state()][0] {
            assert_eq!(env.decode(n).1, 0);
        }
        env.mdp.validate().unwrap();
    }

    #[test]
    fn single_state_geometric_value() {
        let mdp = FiniteMdp::<f64> {
            n_states: 1,
            n_actions: 2,
            reward: vec![vec![1.0, 2.0]],
            transitions: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
        };
        let sol = value_iteration_oracle(&mdp, 0.9, 1e-12).unwrap();
        assert!((sol.values[0] - 20.0).abs() < 1e-10);
        assert_eq!(sol.policy, vec![1]);
        assert!(value_iteration_oracle(&mdp, 1.0, 1e-9).is_err());
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let mdp = FiniteMdp::<f64> {
            n_states: 1,
            n_actions: 2,
            reward: vec![vec![1.0, 1.0]],
            transitions: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
        };
        assert_eq!(
            value_iteration_oracle(&mdp, 0.5, 1e-12).unwrap().policy,
            vec![0]
        );
        let zero = TabularPolicy::<f64>::zeros(3, 4);
        assert_eq!(zero.greedy(1), 0);
    }

    #[test]
    fn toy_mdp_sarsa_matches_oracle() {
        // Action 1 moves to the rewarding state, action 0 stays.
        let mdp = FiniteMdp {
            n_states: 2,
            n_actions: 2,
            reward: vec![vec![0.0, 0.0], vec![1.0, 0.2]],
            transitions: vec![
                vec![vec![(0, 1.0)], vec![(1, 1.0)]],
                vec![vec![(1, 1.0)], vec![(0, 1.0)]],
            ],
        };
        let oracle = value_iteration_oracle(&mdp, 0.8, 1e-12).unwrap();
        let env = DiscreteEnv {
            params: params(),
            ladder: Ladder::evenly_spaced(2, 1.0).unwrap(),
            config: small(0.8),
            mask: ActionMask::Both,
            c_improve: 0.8,
            c_game: 0.75,
            actions: vec![(0, 0), (1, 0)],
            mdp,
        };
        let cfg = RlConfig {
            episodes: 200,
            horizon: 50,
            ucb_coefficient: 0.3,
            ..small(0.8)
        };
        let table = sarsa_train(&env, &cfg, 1);
        assert_eq!(table.greedy_policy(), oracle.policy);
    }

    #[test]
    fn myopic_limit_is_one_step_argmax() {
        let env = build_discrete_env(
            &params(),
            &Ladder::evenly_spaced(3, 2.0).unwrap(),
            small(0.0),
            ActionMask::Both,
        )
        .unwrap();
        let sol = value_iteration_oracle(&env.mdp, 0.0, 1e-12).unwrap();
        for s in 0..env.mdp.n_states {
            assert_eq!(
                sol.policy[s],
                argmax_first(env.mdp.reward[s].iter().copied())
            );
        }
        let table = sarsa_train(
            &env,
            &RlConfig {
                episodes: 200,
                ..small(0.0)
            },
            3,
        );
        let start = env.start_state();
        assert_eq!(table.greedy(start), sol.policy[start]);
    }

    #[test]
    fn masks_and_zero_tables() {
        let p = params();
        let ladder = Ladder::evenly_spaced(3, 2.0).unwrap();
        let env = build_discrete_env(&p, &ladder, small(0.9), ActionMask::ImprovementOnly).unwrap();
        let table = sarsa_train(
            &env,
            &RlConfig {
                episodes: 50,
                ..small(0.9)
            },
            0,
        );
        let ev = evaluate_policy(&table, &env, 500, 1).unwrap();
        assert_eq!(ev.avg_game_effort, 0.0);
        let zero = TabularPolicy::zeros(env.mdp.n_states, env.mdp.n_actions);
        let ev = evaluate_policy(&zero, &env, 200, 1).unwrap();
        assert_eq!((ev.avg_improve_effort, ev.avg_game_effort), (0.0, 0.0));
        assert!(table.action_values.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn oracle_stable_under_refinement() {
        let env = build_discrete_env(
            &params(),
            &Ladder::evenly_spaced(3, 2.0).unwrap(),
            small(0.9),
            ActionMask::Both,
        )
        .unwrap();
        let a = value_iteration_oracle(&env.mdp, 0.9, 1e-8).unwrap();
        let b = value_iteration_oracle(&env.mdp, 0.9, 1e-9).unwrap();
        let d = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-7);
    }
}
