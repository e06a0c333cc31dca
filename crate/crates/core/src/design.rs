//! Incremental-threshold ladders: a checker for the three incentive
//! conditions and the forward/backward construction of the longest evenly
//! spaced ladder below a cap.

use crate::best_response::{ClassWindows, EffortWindow};
use crate::error::{invalid, Error, Result};
use crate::model::{BoundaryClass, Ladder};
use crate::scalar::Scalar;

/// A ladder together with its NG windows.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderDesign<S> {
    pub ladder: Ladder<S>,
    pub delta_mu: S,
    pub terminal_cap: S,
    pub ng_windows: Vec<EffortWindow<S>>,
}

impl<S: Scalar> LadderDesign<S> {
    /// Wraps an explicit ladder, deriving per-level windows from class windows.
    pub fn from_ladder(ladder: Ladder<S>, ng: &ClassWindows<S>) -> Self {
        let t = ladder.thresholds();
        let delta_mu = t[1] - t[0];
        let terminal_cap = *t.last().unwrap();
        let ng_windows = ng.for_ladder(&ladder);
        Self {
            ladder,
            delta_mu,
            terminal_cap,
            ng_windows,
        }
    }

    pub fn thresholds(&self) -> &[S] {
        self.ladder.thresholds()
    }

    pub fn len(&self) -> usize {
        self.ladder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ladder.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `mu_under_1 <= 0`.
    A,
    /// `mu_bar_{i-1} < mu_bar_i`.
    B,
    /// `gamma mu_bar_i >= max(mu_under_{i+1}, mu_under_i)`.
    C,
}

/// Signed slack of one inequality; satisfied when `value >= 0`
/// (strictly `> 0` for condition B).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack<S> {
    pub condition: Condition,
    pub level: usize,
    pub value: S,
}

impl<S: Scalar> Slack<S> {
    pub fn holds(&self) -> bool {
        match self.condition {
            Condition::B => self.value > S::zero(),
            _ => self.value >= S::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<S> {
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
    pub violations: Vec<Slack<S>>,
    pub slacks: Vec<Slack<S>>,
}

impl<S: Scalar> ConditionReport<S> {
    pub fn all(&self) -> bool {
        self.cond_a && self.cond_b && self.cond_c
    }
}

/// Checks incremental thresholding for a design.
pub fn check_incremental_thresholding<S: Scalar>(
    design: &LadderDesign<S>,
    gamma: S,
) -> Result<ConditionReport<S>> {
    if design.ng_windows.len() != design.len() {
        return Err(Error::InvalidInput(format!(
            "design has {} levels but {} windows",
            design.len(),
            design.ng_windows.len()
        )));
    }
    for (k, w) in design.ng_windows.iter().enumerate() {
        let expected = BoundaryClass::of(k + 1, design.len());
        if w.class != expected || w.level_index != k + 1 {
            return Err(Error::InvalidInput(format!(
                "window {} has class {:?}, expected {expected:?}",
                k + 1,
                w.class
            )));
        }
    }
    Ok(check_windows(&design.ng_windows, gamma))
}

/// Checks the conditions directly on per-level windows (level order).
pub fn check_windows<S: Scalar>(ws: &[EffortWindow<S>], gamma: S) -> ConditionReport<S> {
    let n = ws.len();
    let mut slacks = Vec::with_capacity(2 * n);
    slacks.push(Slack {
        condition: Condition::A,
        level: 1,
        value: -ws[0].mu_under,
    });
    for i in 1..n {
        slacks.push(Slack {
            condition: Condition::B,
            level: i + 1,
            value: ws[i].mu_bar - ws[i - 1].mu_bar,
        });
    }
    for i in 0..n {
        let target = gamma * ws[i].mu_bar;
        let need = if i + 1 < n {
            ws[i + 1].mu_under.max(ws[i].mu_under)
        } else {
            ws[i].mu_under
        };
        slacks.push(Slack {
            condition: Condition::C,
            level: i + 1,
            value: target - need,
        });
    }
    let violations: Vec<Slack<S>> = slacks.iter().copied().filter(|s| !s.holds()).collect();
    let ok = |c| !violations.iter().any(|v: &Slack<S>| v.condition == c);
    ConditionReport {
        cond_a: ok(Condition::A),
        cond_b: ok(Condition::B),
        cond_c: ok(Condition::C),
        violations,
        slacks,
    }
}

/// Longest evenly spaced ladder `0, dmu, 2 dmu, ...` with every threshold at
/// most `cap` that satisfies incremental thresholding, or `None`.
///
/// Forward pass: gate on the first pair, then extend intermediate levels while
/// the depreciated target of the last level still reaches the next window.
/// One tentative level is appended and the backward pass keeps the longest
/// prefix whose last level passes the terminal-window inequality.
pub fn design_levels<S: Scalar>(
    delta_mu: S,
    cap: S,
    windows: &ClassWindows<S>,
    gamma: S,
) -> Result<Option<LadderDesign<S>>> {
    if !(delta_mu > S::zero() && delta_mu.is_finite()) {
        return Err(invalid(
            "delta_mu",
            format!("must be positive, got {delta_mu}"),
        ));
    }
    if !(cap > delta_mu && cap.is_finite()) {
        return Err(invalid(
            "cap",
            format!("must exceed delta_mu ({cap} <= {delta_mu})"),
        ));
    }
    if !(gamma > S::zero() && gamma < S::one()) {
        return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    for w in [&windows.first, &windows.middle, &windows.terminal] {
        if !w.valid {
            return Err(Error::InvalidWindow {
                level: w.level_index,
            });
        }
    }
    let (wb1, wb2, wbi) = (
        windows.first.w_bar,
        windows.middle.w_bar,
        windows.terminal.w_bar,
    );
    let (wu1, wu2, wui) = (
        windows.first.w_under,
        windows.middle.w_under,
        windows.terminal.w_under,
    );
    if wu1 > S::zero() {
        return Ok(None);
    }
    // mu_k for 1-based k, by multiplication so long ladders do not drift.
    let mu = |k: usize| S::from_usize(k - 1).unwrap() * delta_mu;
    let cap_eps = cap + S::tolerance(1e-12) * cap;

    let mut i = 2usize;
    let gate = wb1 - wb2 < delta_mu && delta_mu <= gamma * wb1 - wu2;
    if gate {
        while mu(i) + delta_mu + delta_mu <= cap_eps
            && delta_mu <= (gamma - S::one()) * mu(i) + gamma * wb2 - wu2
        {
            i += 1;
        }
    }
    if mu(i) + delta_mu <= cap_eps {
        i += 1;
    }
    // Without the gate level 2 cannot be intermediate, so only j = 2 is admissible.
    let top = if gate { i } else { 2 };
    for j in (2..=top).rev() {
        let wk = if j - 1 == 1 { wb1 } else { wb2 };
        let (prev, this) = (mu(j - 1), mu(j));
        if prev + wk - wbi < this && this <= gamma * (prev + wk) - wui {
            let ladder = Ladder::new((1..=j).map(mu).collect())?;
            let ng_windows = windows.for_ladder(&ladder);
            return Ok(Some(LadderDesign {
                ladder,
                delta_mu,
                terminal_cap: cap,
                ng_windows,
            }));
        }
    }
    Ok(None)
}

/// Attribute level beyond which no ladder can keep an NG agent improving:
/// `max over classes of (gamma w_bar - w_under) / (1 - gamma)`.
pub fn incentive_ceiling<S: Scalar>(windows: &ClassWindows<S>, gamma: S) -> S {
    [&windows.first, &windows.middle, &windows.terminal]
        .iter()
        .map(|w| (gamma * w.w_bar - w.w_under) / (S::one() - gamma))
        .fold(S::neg_infinity(), S::max)
}
