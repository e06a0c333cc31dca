//! Level chains induced by the two myopic policies, their stationary
//! distributions, and the long-run quantities derived from them.

use std::collections::HashMap;
use std::collections::VecDeque;

use crate::best_response::{best_response, EffortWindow};
use crate::design::check_windows;
use crate::error::{Error, Result};
use crate::model::{decision_probabilities, sigmoid, Ladder, ModelParams, TransitionProbs};
use crate::scalar::Scalar;

/// Chains up to this size are solved directly.
pub const DENSE_LIMIT: usize = 200;
const POWER_ITERATION_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    NiLevels,
    NgTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState<S> {
    pub level: usize,
    pub attribute: S,
    /// `(j, t)` when the attribute is `gamma^t mu_bar_j`.
    pub origin: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<S> {
    pub kind: ChainKind,
    pub states: Vec<ChainState<S>>,
    /// Sparse rows: `(column, probability)`.
    pub transition: Vec<Vec<(usize, S)>>,
    pub stationary: Vec<S>,
    pub levels: usize,
    /// Number of transitions redirected by the depth clamp.
    pub truncated: usize,
}

impl<S: Scalar> ChainModel<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dense(&self) -> Vec<Vec<S>> {
        let n = self.len();
        let mut m = vec![vec![S::zero(); n]; n];
        for (i, row) in self.transition.iter().enumerate() {
            for &(j, p) in row {
                m[i][j] = m[i][j] + p;
            }
        }
        m
    }

    pub fn row_sum_error(&self) -> S {
        self.transition
            .iter()
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<S>() - S::one()).abs())
            .fold(S::zero(), S::max)
    }

    /// `|pi P - pi|_inf` for the stored stationary vector.
    pub fn residual(&self) -> S {
        residual(&self.transition, &self.stationary)
    }

    pub fn level_marginal(&self) -> Vec<S> {
        let mut q = vec![S::zero(); self.levels];
        for (s, &p) in self.states.iter().zip(&self.stationary) {
            q[s.level - 1] = q[s.level - 1] + p;
        }
        q
    }

    pub fn mean_attribute(&self) -> S {
        self.states
            .iter()
            .zip(&self.stationary)
            .map(|(s, &p)| s.attribute * p)
            .sum()
    }

    pub fn mean_level(&self) -> S {
        self.level_marginal()
            .iter()
            .enumerate()
            .map(|(k, &q)| S::from_usize(k + 1).unwrap() * q)
            .sum()
    }
}

fn residual<S: Scalar>(rows: &[Vec<(usize, S)>], pi: &[S]) -> S {
    let next = step(rows, pi);
    next.iter()
        .zip(pi)
        .map(|(a, b)| (*a - *b).abs())
        .fold(S::zero(), S::max)
}

fn step<S: Scalar>(rows: &[Vec<(usize, S)>], pi: &[S]) -> Vec<S> {
    let mut next = vec![S::zero(); pi.len()];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            next[j] = next[j] + pi[i] * p;
        }
    }
    next
}

/// Solves `pi P = pi`, `sum pi = 1`.
pub fn stationary_distribution<S: Scalar>(chain: &ChainModel<S>) -> Result<Vec<S>> {
    solve_stationary(&chain.transition)
}

/// Dense Gaussian elimination up to [`DENSE_LIMIT`] states, power iteration
/// beyond.
pub fn solve_stationary<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<Vec<S>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty chain".into()));
    }
    let pi = if n <= DENSE_LIMIT {
        dense_solve(rows)?
    } else {
        power_iteration(rows)?
    };
    Ok(pi)
}

fn normalize<S: Scalar>(mut v: Vec<S>) -> Vec<S> {
    for x in v.iter_mut() {
        if *x < S::zero() {
            *x = S::zero();
        }
    }
    let s: S = v.iter().copied().sum();
    v.iter().map(|&x| x / s).collect()
}

fn dense_solve<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<Vec<S>> {
    let n = rows.len();
    // a = P^T - I with the last equation replaced by sum(pi) = 1.
    let mut a = vec![vec![S::zero(); n + 1]; n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            a[j][i] = a[j][i] + p;
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] = r[i] - S::one();
    }
    for x in a[n - 1].iter_mut() {
        *x = S::one();
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() <= S::epsilon() * S::epsilon() {
            return Err(Error::NotConverged {
                what: "dense stationary solve (singular system)",
                iterations: col,
                residual: 0.0,
            });
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != S::zero() {
                for k in col..=n {
                    let v = a[col][k];
                    a[r][k] = a[r][k] - f * v;
                }
            }
        }
    }
    let mut pi = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut s = a[r][n];
        for k in r + 1..n {
            s = s - a[r][k] * pi[k];
        }
        pi[r] = s / a[r][r];
    }
    Ok(normalize(pi))
}

fn power_iteration<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<Vec<S>> {
    let n = rows.len();
    let tol = S::tolerance(1e-12);
    let mut pi = vec![S::one() / S::from_usize(n).unwrap(); n];
    let mut res = S::infinity();
    for _ in 0..POWER_ITERATION_CAP {
        let next = normalize(step(rows, &pi));
        res = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max);
        pi = next;
        if res < tol {
            return Ok(pi);
        }
    }
    Err(Error::NotConverged {
        what: "power iteration",
        iterations: POWER_ITERATION_CAP,
        residual: res.as_f64(),
    })
}

fn require_valid<S: Scalar>(ladder: &Ladder<S>, windows: &[EffortWindow<S>]) -> Result<()> {
    if windows.len() != ladder.len() {
        return Err(Error::InvalidInput(format!(
            "{} windows for {} levels",
            windows.len(),
            ladder.len()
        )));
    }
    if let Some(w) = windows.iter().find(|w| !w.valid) {
        return Err(Error::InvalidWindow {
            level: w.level_index,
        });
    }
    Ok(())
}

/// `l = max { i : mu_under_i <= 0 }`, or 0 when no level qualifies.
pub fn ni_peak_level<S: Scalar>(ni_windows: &[EffortWindow<S>]) -> usize {
    ni_windows
        .iter()
        .rposition(|w| w.mu_under <= S::zero())
        .map_or(0, |k| k + 1)
}

/// Decision target of an NI agent sitting at attribute 0 on each level.
fn ni_targets<S: Scalar>(
    params: &ModelParams<S>,
    ni_windows: &[EffortWindow<S>],
) -> Result<Vec<S>> {
    ni_windows
        .iter()
        .map(|w| best_response(params, w, S::zero()).map(|(a, _)| a))
        .collect()
}

/// Level chain of an NI agent. Its attribute is 0 forever, so each row is the
/// decision at its best-response target from 0.
pub fn build_ni_chain<S: Scalar>(
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    ni_windows: &[EffortWindow<S>],
) -> Result<ChainModel<S>> {
    require_valid(ladder, ni_windows)?;
    let n = ladder.len();
    let targets = ni_targets(params, ni_windows)?;
    let transition = (1..=n)
        .map(|i| {
            let p = decision_probabilities(params, &ladder.level(i), targets[i - 1]);
            level_row(i, n, p)
        })
        .collect::<Vec<_>>();
    let states = (1..=n)
        .map(|i| ChainState {
            level: i,
            attribute: S::zero(),
            origin: None,
        })
        .collect();
    let mut chain = ChainModel {
        kind: ChainKind::NiLevels,
        states,
        transition,
        stationary: vec![],
        levels: n,
        truncated: 0,
    };
    chain.stationary = stationary_distribution(&chain)?;
    Ok(chain)
}

fn level_row<S: Scalar>(i: usize, n: usize, p: TransitionProbs<S>) -> Vec<(usize, S)> {
    let mut row = Vec::with_capacity(3);
    if i > 1 {
        row.push((i - 2, p.p_down));
    }
    row.push((i - 1, p.p_stay));
    if i < n {
        row.push((i, p.p_up));
    }
    row
}

/// Truncated countable chain of an NG agent started at level 1 with attribute 0.
///
/// States are `(i, gamma^t mu_bar_j)`. Inside the window at level `i` the
/// agent improves to `mu_bar_i` and restarts at `gamma mu_bar_i`; above it the
/// attribute just decays. Decay steps past `depth` are held at `t = depth`.
pub fn build_ng_chain<S: Scalar>(
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    ng_windows: &[EffortWindow<S>],
    depth: usize,
) -> Result<ChainModel<S>> {
    require_valid(ladder, ng_windows)?;
    if depth == 0 {
        return Err(Error::InvalidInput(
            "truncation depth must be at least 1".into(),
        ));
    }
    let report = check_windows(ng_windows, params.gamma());
    if !report.all() {
        return Err(Error::NonCompliantLadder(format!(
            "{} condition violations",
            report.violations.len()
        )));
    }
    let n = ladder.len();
    let gamma = params.gamma();

    // Attribute grid gamma^t mu_bar_j by repeated multiplication, matching the simulator.
    let mut grid = vec![vec![S::zero(); depth + 1]; n];
    for (j, w) in ng_windows.iter().enumerate() {
        grid[j][0] = w.mu_bar;
        for t in 1..=depth {
            grid[j][t] = gamma * grid[j][t - 1];
        }
    }

    type Key = (usize, usize, usize);
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let mut queue: VecDeque<Key> = VecDeque::new();
    fn intern(
        k: Key,
        index: &mut HashMap<Key, usize>,
        keys: &mut Vec<Key>,
        queue: &mut VecDeque<Key>,
    ) -> usize {
        *index.entry(k).or_insert_with(|| {
            keys.push(k);
            queue.push_back(k);
            keys.len() - 1
        })
    }
    // From (1, 0) the agent improves to mu_bar_1, landing at gamma mu_bar_1 on level 1 or 2.
    let p0 = decision_probabilities(params, &ladder.level(1), ng_windows[0].mu_bar);
    intern((1, 1, 1), &mut index, &mut keys, &mut queue);
    if n > 1 && p0.p_up > S::zero() {
        intern((2, 1, 1), &mut index, &mut keys, &mut queue);
    }

    let mut rows: Vec<Vec<(usize, S)>> = Vec::new();
    let mut truncated = 0usize;
    while let Some((i, j, t)) = queue.pop_front() {
        let w = &ng_windows[i - 1];
        let x = grid[j - 1][t];
        let (y_hat, next_origin) = if x < w.mu_bar {
            // Compliance keeps x >= mu_under here; below it the agent would idle.
            if x >= w.mu_under {
                (w.mu_bar, (i, 1))
            } else {
                (x, (j, t + 1))
            }
        } else {
            (x, (j, t + 1))
        };
        let (nj, mut nt) = next_origin;
        if nt > depth {
            nt = depth;
            truncated += 1;
        }
        let p = decision_probabilities(params, &ladder.level(i), y_hat);
        let mut row = Vec::with_capacity(3);
        for (lvl, prob) in [
            (i.wrapping_sub(1), p.p_down),
            (i, p.p_stay),
            (i + 1, p.p_up),
        ] {
            if prob > S::zero() && lvl >= 1 && lvl <= n {
                let c = intern((lvl, nj, nt), &mut index, &mut keys, &mut queue);
                row.push((c, prob));
            }
        }
        let id = index[&(i, j, t)];
        if rows.len() <= id {
            rows.resize(id + 1, Vec::new());
        }
        rows[id] = row;
    }
    rows.resize(keys.len(), Vec::new());
    let states = keys
        .iter()
        .map(|&(i, j, t)| ChainState {
            level: i,
            attribute: grid[j - 1][t],
            origin: Some((j, t)),
        })
        .collect();
    let mut chain = ChainModel {
        kind: ChainKind::NgTruncated,
        states,
        transition: rows,
        stationary: vec![],
        levels: n,
        truncated,
    };
    chain.stationary = stationary_distribution(&chain)?;
    Ok(chain)
}

/// Absolute residuals of the adjacent-level balance equations.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport<S> {
    /// `|p+_i pi_i - p-_{i+1} pi_{i+1}|` for `i = 1..I-1`.
    pub residuals: Vec<S>,
    /// NI only: the upper-regime equation read literally,
    /// `|p+_i(0) pi_i - p+_{i+1}(0) pi_i|` for `i = l+1..I-1`.
    pub literal_upper_residuals: Vec<S>,
    /// NG only: the mixture promotion and demotion probabilities per level.
    pub mixed_up: Vec<S>,
    pub mixed_down: Vec<S>,
}

impl<S: Scalar> BalanceReport<S> {
    pub fn max_residual(&self) -> S {
        self.residuals.iter().copied().fold(S::zero(), S::max)
    }
}

/// Detailed-balance residuals. NI rows use the decisions at each level's
/// target from attribute 0; NG uses the attribute mixture of `pi`.
pub fn verify_detailed_balance<S: Scalar>(
    chain: &ChainModel<S>,
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    windows: &[EffortWindow<S>],
) -> Result<BalanceReport<S>> {
    require_valid(ladder, windows)?;
    let n = ladder.len();
    match chain.kind {
        ChainKind::NiLevels => {
            let targets = ni_targets(params, windows)?;
            let pi = &chain.stationary;
            let p = |i: usize, y: S| decision_probabilities(params, &ladder.level(i), y);
            let residuals = (1..n)
                .map(|i| {
                    (p(i, targets[i - 1]).p_up * pi[i - 1] - p(i + 1, targets[i]).p_down * pi[i])
                        .abs()
                })
                .collect();
            let l = ni_peak_level(windows);
            let literal = (l + 1..n)
                .map(|i| {
                    (p(i, S::zero()).p_up * pi[i - 1] - p(i + 1, S::zero()).p_up * pi[i - 1]).abs()
                })
                .collect();
            Ok(BalanceReport {
                residuals,
                literal_upper_residuals: literal,
                mixed_up: vec![],
                mixed_down: vec![],
            })
        }
        ChainKind::NgTruncated => {
            let q = chain.level_marginal();
            let mut up = vec![S::zero(); n];
            let mut down = vec![S::zero(); n];
            let mut above = vec![S::zero(); n];
            for (s, &m) in chain.states.iter().zip(&chain.stationary) {
                let w = &windows[s.level - 1];
                if s.attribute >= w.mu_bar {
                    let pr = decision_probabilities(params, &ladder.level(s.level), s.attribute);
                    up[s.level - 1] = up[s.level - 1] + m * pr.p_up;
                    down[s.level - 1] = down[s.level - 1] + m * pr.p_down;
                    above[s.level - 1] = above[s.level - 1] + m;
                }
            }
            let mut mixed_up = Vec::with_capacity(n);
            let mut mixed_down = Vec::with_capacity(n);
            for i in 1..=n {
                let k = i - 1;
                let at = decision_probabilities(params, &ladder.level(i), windows[k].mu_bar);
                if q[k] > S::zero() {
                    let f = above[k] / q[k];
                    mixed_up.push((S::one() - f) * at.p_up + up[k] / q[k]);
                    mixed_down.push((S::one() - f) * at.p_down + down[k] / q[k]);
                } else {
                    mixed_up.push(at.p_up);
                    mixed_down.push(at.p_down);
                }
            }
            let residuals = (0..n - 1)
                .map(|k| (mixed_up[k] * q[k] - mixed_down[k + 1] * q[k + 1]).abs())
                .collect();
            Ok(BalanceReport {
                residuals,
                literal_upper_residuals: vec![],
                mixed_up,
                mixed_down,
            })
        }
    }
}

/// Closed-form `u_hat` for an NI chain.
pub fn ni_long_term_utility<S: Scalar>(
    chain: &ChainModel<S>,
    ni_windows: &[EffortWindow<S>],
    params: &ModelParams<S>,
) -> S {
    let q = chain.level_marginal();
    let l = ni_peak_level(ni_windows);
    let benefit: S = q
        .iter()
        .enumerate()
        .map(|(k, &p)| S::from_usize(k + 1).unwrap() * p)
        .sum();
    let effort: S = (0..l).map(|k| ni_windows[k].mu_bar * q[k]).sum();
    params.reward() * benefit - ni_windows[0].unit_cost * effort
}

/// Closed-form `u_hat` for an NG chain.
pub fn ng_long_term_utility<S: Scalar>(
    chain: &ChainModel<S>,
    ng_windows: &[EffortWindow<S>],
    params: &ModelParams<S>,
) -> S {
    let q = chain.level_marginal();
    let benefit: S = q
        .iter()
        .enumerate()
        .map(|(k, &p)| S::from_usize(k + 1).unwrap() * p)
        .sum();
    let effort: S = chain
        .states
        .iter()
        .zip(&chain.stationary)
        .filter(|(s, _)| ng_windows[s.level - 1].contains(s.attribute))
        .map(|(s, &m)| (ng_windows[s.level - 1].mu_bar - s.attribute) * m)
        .sum();
    params.reward() * benefit - ng_windows[0].unit_cost * effort
}

/// `(u_hat NI, u_hat NG)`.
pub fn long_term_utilities<S: Scalar>(
    ni_chain: &ChainModel<S>,
    ng_chain: &ChainModel<S>,
    ni_windows: &[EffortWindow<S>],
    ng_windows: &[EffortWindow<S>],
    params: &ModelParams<S>,
) -> (S, S) {
    (
        ni_long_term_utility(ni_chain, ni_windows, params),
        ng_long_term_utility(ng_chain, ng_windows, params),
    )
}

/// `sum pi(i, x) u(i, x, a(i, x))` summed directly over the chain.
pub fn ergodic_utility<S: Scalar>(
    chain: &ChainModel<S>,
    windows: &[EffortWindow<S>],
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
) -> Result<S> {
    let mut total = S::zero();
    for (s, &m) in chain.states.iter().zip(&chain.stationary) {
        let w = &windows[s.level - 1];
        let (a, _) = best_response(params, w, s.attribute)?;
        total = total
            + m * crate::best_response::instantaneous_utility(
                params,
                &ladder.level(s.level),
                s.attribute,
                a,
                w.unit_cost,
            );
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayDirection {
    /// `lhs <= rhs` expected.
    Upper,
    /// `lhs >= rhs` expected.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck<S> {
    pub ng: bool,
    pub level: usize,
    pub lhs: S,
    pub rhs: S,
    pub direction: DecayDirection,
}

impl<S: Scalar> DecayCheck<S> {
    pub fn holds(&self, slack: S) -> bool {
        match self.direction {
            DecayDirection::Upper => self.lhs <= self.rhs + slack,
            DecayDirection::Lower => self.lhs + slack >= self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport<S> {
    /// 0 when no NI window reaches attribute 0 (the agent never acts).
    pub l_index: usize,
    pub sigma_ni: S,
    pub sigma_ng: S,
    pub decay_checks: Vec<DecayCheck<S>>,
    /// NG drop bound through the per-edge ratios
    /// `q_i <= prod_{k=i}^{I-1} p-_{k+1}(mu_bar_{k+1}) / p+_k(mu_bar_k) q_I`, for every `i`.
    pub ng_edge_checks: Vec<DecayCheck<S>>,
    /// `(x_hat NI, x_hat NG, gamma min_i mu_bar_i NG)`.
    pub attribute_bounds: (S, S, S),
    /// Right side of the step-size condition for NG to out-earn NI.
    pub utility_bound_delta_mu: S,
    pub delta_w_ng: S,
    pub ni_peak_at_l: bool,
    pub ng_peak_at_top: bool,
}

impl<S: Scalar> TheoremReport<S> {
    pub fn ng_decay_holds(&self, slack: S) -> bool {
        self.decay_checks
            .iter()
            .filter(|c| c.ng)
            .all(|c| c.holds(slack))
    }

    pub fn ng_edge_bounds_hold(&self, slack: S) -> bool {
        self.ng_edge_checks.iter().all(|c| c.holds(slack))
    }

    pub fn attribute_claims_hold(&self) -> bool {
        let (xni, xng, floor) = self.attribute_bounds;
        xni == S::zero() && xng >= floor
    }
}

fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best + 1
}

/// Evaluates the concentration, attribute and utility-step bounds.
pub fn theorem_bounds<S: Scalar>(
    params: &ModelParams<S>,
    ladder: &Ladder<S>,
    ni_chain: &ChainModel<S>,
    ng_chain: &ChainModel<S>,
    ni_windows: &[EffortWindow<S>],
    ng_windows: &[EffortWindow<S>],
) -> Result<TheoremReport<S>> {
    require_valid(ladder, ni_windows)?;
    require_valid(ladder, ng_windows)?;
    let n = ladder.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "bounds need at least two levels".into(),
        ));
    }
    let alpha = params.alpha();
    let one = S::one();
    let two = one + one;
    let sigma_ni = sigmoid(alpha * ni_windows[1].w_bar);
    let sigma_ng = sigmoid(alpha * ng_windows[1].w_bar);
    let l = ni_peak_level(ni_windows);
    let q_ni = ni_chain.level_marginal();
    let q_ng = ng_chain.level_marginal();

    let mut decay_checks = Vec::new();
    let rho_ng = (one - sigma_ng) / sigma_ng;
    for i in 2..=n {
        decay_checks.push(DecayCheck {
            ng: true,
            level: i,
            lhs: q_ng[i - 1],
            rhs: rho_ng.powi((n - i) as i32) * q_ng[n - 1],
            direction: DecayDirection::Upper,
        });
    }
    if l >= 1 {
        let rho_ni = (one - sigma_ni) / sigma_ni;
        for i in 2..=l {
            decay_checks.push(DecayCheck {
                ng: false,
                level: i,
                lhs: q_ni[i - 1],
                rhs: rho_ni.powi((l - i) as i32) * q_ni[l - 1],
                direction: DecayDirection::Lower,
            });
        }
        if l < n {
            let targets = ni_targets(params, ni_windows)?;
            let p_l = decision_probabilities(params, &ladder.level(l), targets[l - 1]).p_up;
            let p_next = decision_probabilities(params, &ladder.level(l + 1), S::zero()).p_down;
            let s = sigmoid(-alpha * ladder.thresholds()[l]);
            let ratio = s / (one - s);
            for i in l + 1..=n {
                decay_checks.push(DecayCheck {
                    ng: false,
                    level: i,
                    lhs: q_ni[i - 1],
                    rhs: p_l / p_next * ratio.powi((i - l - 1) as i32) * q_ni[l - 1],
                    direction: DecayDirection::Upper,
                });
            }
        }
    }

    let mut ng_edge_checks = Vec::with_capacity(n);
    let mut bound = q_ng[n - 1];
    for i in (1..n).rev() {
        let up = decision_probabilities(params, &ladder.level(i), ng_windows[i - 1].mu_bar).p_up;
        let down =
            decision_probabilities(params, &ladder.level(i + 1), ng_windows[i].mu_bar).p_down;
        bound = bound * down / up;
        ng_edge_checks.push(DecayCheck {
            ng: true,
            level: i,
            lhs: q_ng[i - 1],
            rhs: bound,
            direction: DecayDirection::Upper,
        });
    }
    ng_edge_checks.reverse();

    let floor = params.gamma()
        * ng_windows
            .iter()
            .map(|w| w.mu_bar)
            .fold(S::infinity(), S::min);
    let delta_w_ng = ng_windows
        .iter()
        .map(|w| w.w_bar - w.w_under)
        .fold(S::neg_infinity(), S::max);
    let (c_ng, c_ni) = (ng_windows[0].unit_cost, ni_windows[0].unit_cost);
    let utility_bound_delta_mu = if l == 0 {
        S::nan()
    } else {
        let s = sigma_ni;
        let k = two * s - one;
        let inner = k / (s * s) * ni_windows[l - 1].w_bar
            - ni_windows[1].w_under
            - c_ng / (c_ni * s) * delta_w_ng;
        let benefit = sigma_ng * k / (s * (two * sigma_ng - one)) - one;
        k / s * inner - params.reward() / (c_ni * s) * benefit
    };

    Ok(TheoremReport {
        l_index: l,
        sigma_ni,
        sigma_ng,
        decay_checks,
        ng_edge_checks,
        attribute_bounds: (ni_chain.mean_attribute(), ng_chain.mean_attribute(), floor),
        utility_bound_delta_mu,
        delta_w_ng,
        ni_peak_at_l: l >= 1 && argmax(&q_ni) == l,
        ng_peak_at_top: argmax(&q_ng) == n,
    })
}

/// Total-variation distance between two NG chains on their shared states.
pub fn total_variation<S: Scalar>(a: &ChainModel<S>, b: &ChainModel<S>) -> S {
    let key = |s: &ChainState<S>| (s.level, s.origin);
    type Key = (usize, Option<(usize, usize)>);
    let mut mass: HashMap<Key, (S, S)> = HashMap::new();
    for (s, &p) in a.states.iter().zip(&a.stationary) {
        mass.entry(key(s)).or_insert((S::zero(), S::zero())).0 = p;
    }
    for (s, &p) in b.states.iter().zip(&b.stationary) {
        mass.entry(key(s)).or_insert((S::zero(), S::zero())).1 = p;
    }
    let half = S::lit(0.5);
    half * mass.values().map(|&(x, y)| (x - y).abs()).sum::<S>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::best_response::{select_direction, ClassWindows, Restriction};
    use crate::model::Abstention;

    fn rows(m: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        m.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = rows(&[&[0.5, 0.25, 0.25], &[0.25, 0.5, 0.25], &[0.25, 0.25, 0.5]]);
        let pi = solve_stationary(&p).unwrap();
        assert!(pi.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn birth_death_product_form() {
        let up = [0.3, 0.5, 0.2, 0.4];
        let down = [0.1, 0.35, 0.25, 0.6];
        let n = 5;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            if i + 1 < n {
                m[i][i + 1] = up[i];
            }
            if i > 0 {
                m[i][i - 1] = down[i - 1];
            }
            m[i][i] = 1.0 - m[i].iter().sum::<f64>();
        }
        let refs: Vec<&[f64]> = m.iter().map(|r| r.as_slice()).collect();
        let pi = solve_stationary(&rows(&refs)).unwrap();
        let mut prod = vec![1.0];
        for i in 0..n - 1 {
            prod.push(prod[i] * up[i] / down[i]);
        }
        let z: f64 = prod.iter().sum();
        for (a, b) in pi.iter().zip(&prod) {
            assert!((a - b / z).abs() < 1e-12);
        }
        // Same chain forced through power iteration.
        let pw = power_iteration(&rows(&refs)).unwrap();
        for (a, b) in pw.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[allow(clippy::type_complexity)]
    fn setup(
        levels: usize,
        step: f64,
    ) -> (
        ModelParams<f64>,
        Ladder<f64>,
        Vec<EffortWindow<f64>>,
        Vec<EffortWindow<f64>>,
    ) {
        let p = ModelParams::scalar(
            4.0,
            0.9,
            1.0,
            0.8,
            0.75,
            Abstention::entropy(0.604).unwrap(),
        )
        .unwrap();
        let ladder = Ladder::evenly_spaced(levels, step).unwrap();
        let c_ng = select_direction(&p, Restriction::ImprovementOnly)
            .unwrap()
            .unit_cost;
        let c_ni = select_direction(&p, Restriction::GamingOnly)
            .unwrap()
            .unit_cost;
        let ng = ClassWindows::compute(&p, c_ng).unwrap().for_ladder(&ladder);
        let ni = ClassWindows::compute(&p, c_ni).unwrap().for_ladder(&ladder);
        (p, ladder, ng, ni)
    }

    #[test]
    fn two_level_ni_ratio() {
        let (p, ladder, _, ni) = setup(2, 1.5);
        let chain = build_ni_chain(&p, &ladder, &ni).unwrap();
        let t: Vec<f64> = ni
            .iter()
            .map(|w| best_response(&p, w, 0.0).unwrap().0)
            .collect();
        let up = decision_probabilities(&p, &ladder.level(1), t[0]).p_up;
        let down = decision_probabilities(&p, &ladder.level(2), t[1]).p_down;
        let pi = &chain.stationary;
        assert!((pi[1] / pi[0] - up / down).abs() < 1e-12);
    }

    #[test]
    fn ni_chain_regimes() {
        let (p, ladder, _, ni) = setup(10, 0.3);
        let chain = build_ni_chain(&p, &ladder, &ni).unwrap();
        let l = ni_peak_level(&ni);
        assert!((1..10).contains(&l));
        assert!(chain.residual() < 1e-12);
        assert!(chain.row_sum_error() < 1e-12);
        let ups: Vec<f64> = (l + 1..10)
            .map(|i| chain.transition[i - 1].last().unwrap().1)
            .collect();
        assert!(ups.windows(2).all(|w| w[1] < w[0]));
        let db = verify_detailed_balance(&chain, &p, &ladder, &ni).unwrap();
        assert!(db.max_residual() < 1e-12);
    }

    #[test]
    fn ng_chain_minimal_depth_and_support() {
        let (p, ladder, ng, _) = setup(2, 1.0);
        let chain = build_ng_chain(&p, &ladder, &ng, 1).unwrap();
        assert!(chain.len() <= 4);
        for s in &chain.states {
            assert_eq!(s.origin.unwrap().1, 1);
        }
        let floor = 0.9 * ng.iter().map(|w| w.mu_bar).fold(f64::INFINITY, f64::min);
        assert!(chain.states.iter().all(|s| s.attribute >= floor));
    }

    #[test]
    fn ng_chain_balance_and_depth_stability() {
        let w = {
            let (p, _, _, _) = setup(2, 1.0);
            ClassWindows::compute(&p, 0.8).unwrap()
        };
        let (p, _, _, _) = setup(2, 1.0);
        let design = crate::design::design_levels(1.0, 10.0, &w, 0.9)
            .unwrap()
            .unwrap();
        let chain = build_ng_chain(&p, &design.ladder, &design.ng_windows, 66).unwrap();
        assert!(chain.row_sum_error() < 1e-12);
        let db = verify_detailed_balance(&chain, &p, &design.ladder, &design.ng_windows).unwrap();
        assert!(db.max_residual() < 1e-10, "{:?}", db.residuals);
        let deeper = build_ng_chain(&p, &design.ladder, &design.ng_windows, 132).unwrap();
        assert!(total_variation(&chain, &deeper) < 1e-6);
    }

    #[test]
    fn non_compliant_ladder_rejected() {
        let (p, _, _, _) = setup(2, 1.0);
        let w = ClassWindows::compute(&p, 0.8).unwrap();
        let ladder = Ladder::new(vec![0.0, 8.0]).unwrap();
        let ws = w.for_ladder(&ladder);
        assert!(matches!(
            build_ng_chain(&p, &ladder, &ws, 10),
            Err(Error::NonCompliantLadder(_))
        ));
    }
}
