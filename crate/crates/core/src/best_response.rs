//! Myopic best responses.
//!
//! The agent's effort collapses onto a single return-on-investment direction,
//! after which the optimal magnitude at level `i` is found by maximising the
//! threshold-free auxiliary function `G(i, z)` over `z >= x - mu_i`.

use crate::error::{Error, Result};
use crate::model::{raw_at_logit, sigmoid, BoundaryClass, Ladder, LevelSpec, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Restriction {
    Unrestricted,
    ImprovementOnly,
    GamingOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Improvement,
    Gaming,
}

/// The tie-broken ROI direction and the scalar unit cost along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionChoice<S> {
    /// 0-based index into `[improvement; gaming]`, length `2d`.
    pub dimension: usize,
    /// 0-based index within the chosen half.
    pub component: usize,
    pub action_kind: ActionKind,
    pub unit_cost: S,
}

/// Unidirectional effort vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector<S> {
    pub improve: Vec<S>,
    pub game: Vec<S>,
    pub scalar_magnitude: S,
}

impl<S: Scalar> DirectionChoice<S> {
    /// Spreads a scalar magnitude back onto the chosen coordinate.
    pub fn action(&self, params: &ModelParams<S>, magnitude: S) -> ActionVector<S> {
        let d = params.dim();
        let mut improve = vec![S::zero(); d];
        let mut game = vec![S::zero(); d];
        let entry = magnitude / params.theta()[self.component];
        match self.action_kind {
            ActionKind::Improvement => improve[self.component] = entry,
            ActionKind::Gaming => game[self.component] = entry,
        }
        ActionVector {
            improve,
            game,
            scalar_magnitude: magnitude,
        }
    }
}

/// Minimum-index maximiser of `theta_l / c_l` over the permitted half (or both).
pub fn select_direction<S: Scalar>(
    params: &ModelParams<S>,
    restriction: Restriction,
) -> Result<DirectionChoice<S>> {
    let d = params.dim();
    if d == 0 {
        return Err(Error::InvalidInput("no action dimensions".into()));
    }
    let halves: &[ActionKind] = match restriction {
        Restriction::Unrestricted => &[ActionKind::Improvement, ActionKind::Gaming],
        Restriction::ImprovementOnly => &[ActionKind::Improvement],
        Restriction::GamingOnly => &[ActionKind::Gaming],
    };
    let mut best: Option<(S, DirectionChoice<S>)> = None;
    for &kind in halves {
        let (costs, offset) = match kind {
            ActionKind::Improvement => (params.cost_improve(), 0),
            ActionKind::Gaming => (params.cost_game(), d),
        };
        for (k, (&theta, &c)) in params.theta().iter().zip(costs).enumerate() {
            let ratio = theta / c;
            if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                let choice = DirectionChoice {
                    dimension: offset + k,
                    component: k,
                    action_kind: kind,
                    unit_cost: c / theta,
                };
                best = Some((ratio, choice));
            }
        }
    }
    let (ratio, choice) = best.expect("non-empty direction set");
    if !(ratio > S::zero()) {
        return Err(Error::InvalidInput(
            "no direction has a positive weight".into(),
        ));
    }
    Ok(choice)
}

/// Benefit part of `G` and its `z`-derivative at logit `x = alpha z`.
#[inline]
fn benefit<S: Scalar>(params: &ModelParams<S>, class: BoundaryClass, z: S) -> (S, S) {
    let alpha = params.alpha();
    let r = params.reward();
    let x = alpha * z;
    let raw = raw_at_logit(params.abstention(), x);
    let (s, keep) = (raw.sigma, S::one() - raw.abstain);
    let q = sigmoid(-x);
    let hp = params.abstention().slope_at_logit(x);
    let (value, bracket) = match class {
        BoundaryClass::First => (keep * s, keep - hp * s),
        BoundaryClass::Middle => (keep * (s - q), S::lit(2.0) * keep - hp * (s - q)),
        BoundaryClass::Terminal => (-keep * q, keep + hp * q),
    };
    let sq = s * q;
    let slope = if sq > S::zero() {
        r * alpha * sq * bracket
    } else {
        S::zero()
    };
    (r * value, slope)
}

/// Auxiliary function `G(i, z)`.
pub fn evaluate_g<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    z: S,
    unit_cost: S,
) -> S {
    g_class(params, level.class, z, unit_cost)
}

#[inline]
pub fn g_class<S: Scalar>(params: &ModelParams<S>, class: BoundaryClass, z: S, unit_cost: S) -> S {
    benefit(params, class, z).0 - unit_cost * z
}

/// Analytic `dG/dz`.
#[inline]
pub fn g_derivative<S: Scalar>(
    params: &ModelParams<S>,
    class: BoundaryClass,
    z: S,
    unit_cost: S,
) -> S {
    benefit(params, class, z).1 - unit_cost
}

/// Grid resolution and root tolerance for the window search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSearch {
    /// Minimum number of grid points on the bracket.
    pub grid_points: usize,
    /// Points per unit of logit; keeps the grid fine for sharp classifiers.
    pub points_per_logit: f64,
    /// Bisection stopping width in `z`.
    pub tolerance: f64,
}

impl Default for WindowSearch {
    fn default() -> Self {
        Self {
            grid_points: 4000,
            points_per_logit: 16.0,
            tolerance: 1e-10,
        }
    }
}

/// Effort window of one level for one unit cost.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortWindow<S> {
    pub level_index: usize,
    pub class: BoundaryClass,
    pub mu: S,
    pub unit_cost: S,
    /// Sorted local maximisers of `G(i, .)`.
    pub local_maximizers: Vec<S>,
    /// `G` at each local maximiser.
    pub lm_values: Vec<S>,
    pub w_bar: S,
    pub w_under: S,
    pub mu_bar: S,
    pub mu_under: S,
    /// Whether `w_bar` is a global maximiser among the local ones.
    pub valid: bool,
    /// Number of disjoint attribute intervals with positive best response.
    pub effort_segments: usize,
}

impl<S: Scalar> EffortWindow<S> {
    /// The same window moved to another level of the same class.
    pub fn shifted(&self, level: &LevelSpec<S>) -> Self {
        assert_eq!(
            self.class, level.class,
            "windows only transfer within a boundary class"
        );
        Self {
            level_index: level.index,
            mu: level.mu,
            mu_bar: level.mu + self.w_bar,
            mu_under: level.mu + self.w_under,
            ..self.clone()
        }
    }

    /// `mu_under <= x < mu_bar`.
    pub fn contains(&self, x: S) -> bool {
        self.mu_under <= x && x < self.mu_bar
    }

    /// `G` at `w_bar`.
    pub fn g_max(&self) -> S {
        *self.lm_values.last().expect("non-empty")
    }
}

/// Locates local maximisers and the effort window with default resolution.
pub fn find_effort_window<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    unit_cost: S,
) -> Result<EffortWindow<S>> {
    find_effort_window_with(params, level, unit_cost, WindowSearch::default())
}

pub fn find_effort_window_with<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    unit_cost: S,
    search: WindowSearch,
) -> Result<EffortWindow<S>> {
    if !(unit_cost > S::zero() && unit_cost.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "unit cost must be positive, got {unit_cost}"
        )));
    }
    let class = level.class;
    let g = |z: S| g_class(params, class, z, unit_cost);
    let dg = |z: S| g_derivative(params, class, z, unit_cost);
    let tol = S::tolerance(search.tolerance);
    let half_c = unit_cost * S::lit(0.5);

    let mut span = S::lit(10.0).max(S::lit(10.0) / params.alpha());
    for _ in 0..64 {
        let tail = benefit(params, class, span)
            .1
            .abs()
            .max(benefit(params, class, -span).1.abs());
        if tail < half_c {
            break;
        }
        span = span * S::lit(2.0);
    }
    let want =
        (span.as_f64() * 2.0 * params.alpha().as_f64() * search.points_per_logit).ceil() as usize;
    let n = search.grid_points.max(want).max(16);
    let step = (span + span) / S::from_usize(n).unwrap();
    let grid: Vec<S> = (0..=n)
        .map(|k| -span + step * S::from_usize(k).unwrap())
        .collect();

    let mut lms: Vec<S> = Vec::new();
    if params.abstention().is_smooth() {
        let slopes: Vec<S> = grid.iter().map(|&z| dg(z)).collect();
        for k in 0..n {
            if slopes[k] > S::zero() && slopes[k + 1] <= S::zero() {
                lms.push(bisect(|z| dg(z) > S::zero(), grid[k], grid[k + 1], tol));
            }
        }
    } else {
        let values: Vec<S> = grid.iter().map(|&z| g(z)).collect();
        for k in 1..n {
            if values[k] > values[k - 1] && values[k] >= values[k + 1] {
                lms.push(golden_max(&g, grid[k - 1], grid[k + 1], tol));
            }
        }
    }
    if lms.is_empty() {
        return Err(Error::EmptyLocalMaximizers {
            level: level.index,
            unit_cost: unit_cost.as_f64(),
        });
    }
    lms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    lms.dedup_by(|a, b| (*a - *b).abs() <= tol * S::lit(10.0));
    let lm_values: Vec<S> = lms.iter().map(|&z| g(z)).collect();
    let w_bar = *lms.last().unwrap();
    let g_bar = *lm_values.last().unwrap();
    let slack = S::tolerance(1e-12) * S::one().max(g_bar.abs());
    let valid = lm_values.iter().all(|&v| v <= g_bar + slack);

    // Walk left from w_bar until G rises above G(w_bar); the tail G -> +inf
    // guarantees termination.
    let mut hi = w_bar;
    let mut lo = w_bar - step;
    let mut guard = 0usize;
    while g(lo) <= g_bar {
        hi = lo;
        lo = lo - step;
        guard += 1;
        if guard > 100 * n {
            return Err(Error::NotConverged {
                what: "window lower edge scan",
                iterations: guard,
                residual: 0.0,
            });
        }
    }
    let w_under = bisect(|z| g(z) > g_bar, lo, hi, tol);
    let w_under = if g(w_under) <= g_bar { w_under } else { hi };

    let effort_segments = count_effort_segments(&grid, &g);
    Ok(EffortWindow {
        level_index: level.index,
        class,
        mu: level.mu,
        unit_cost,
        local_maximizers: lms,
        lm_values,
        w_bar,
        w_under,
        mu_bar: level.mu + w_bar,
        mu_under: level.mu + w_under,
        valid,
        effort_segments,
    })
}

/// Bisection on a predicate that is true at `lo` and false at `hi`; returns
/// the right end of the final bracket.
fn bisect<S: Scalar>(pred: impl Fn(S) -> bool, mut lo: S, mut hi: S, tol: S) -> S {
    let two = S::lit(2.0);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = (lo + hi) / two;
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn golden_max<S: Scalar>(f: &impl Fn(S) -> S, mut a: S, mut b: S, tol: S) -> S {
    let ratio = (S::lit(5.0).sqrt() - S::one()) / S::lit(2.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    (a + b) / S::lit(2.0)
}

/// Runs of grid offsets `y` where `G(y)` is strictly below `max_{z >= y} G(z)`.
fn count_effort_segments<S: Scalar>(grid: &[S], g: &impl Fn(S) -> S) -> usize {
    let values: Vec<S> = grid.iter().map(|&z| g(z)).collect();
    let mut suffix = S::neg_infinity();
    let mut positive = vec![false; values.len()];
    for k in (0..values.len()).rev() {
        let slack = S::tolerance(1e-12) * S::one().max(suffix.abs());
        positive[k] = values[k] < suffix - slack;
        suffix = suffix.max(values[k]);
    }
    positive.windows(2).filter(|w| w[1] && !w[0]).count() + usize::from(positive[0])
}

/// Eq.-4 magnitude `(mu_bar - x) 1{mu_under <= x < mu_bar}`.
pub fn best_response_magnitude<S: Scalar>(window: &EffortWindow<S>, x: S) -> Result<S> {
    if !window.valid {
        return Err(Error::InvalidWindow {
            level: window.level_index,
        });
    }
    if !(x >= S::zero()) {
        return Err(Error::InvalidInput(format!(
            "attribute must be non-negative, got {x}"
        )));
    }
    Ok(if window.contains(x) {
        window.mu_bar - x
    } else {
        S::zero()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseRegime {
    /// Closed-form window response.
    Window,
    /// Direct argmax over the local maximisers (global-maximiser assumption fails).
    NonWindow,
}

/// Best response valid for any window.
///
/// The maximum of `G` over `[y, inf)` sits either at `y` or at a local
/// maximiser above it, so the candidates are enumerated exactly; ties go to the
/// largest `z`.
pub fn best_response<S: Scalar>(
    params: &ModelParams<S>,
    window: &EffortWindow<S>,
    x: S,
) -> Result<(S, ResponseRegime)> {
    if window.valid {
        return best_response_magnitude(window, x).map(|a| (a, ResponseRegime::Window));
    }
    if !(x >= S::zero()) {
        return Err(Error::InvalidInput(format!(
            "attribute must be non-negative, got {x}"
        )));
    }
    let y = x - window.mu;
    let mut best_z = y;
    let mut best_g = g_class(params, window.class, y, window.unit_cost);
    for (&z, &v) in window.local_maximizers.iter().zip(&window.lm_values) {
        if z > y && v >= best_g {
            best_z = z;
            best_g = v;
        }
    }
    Ok((best_z - y, ResponseRegime::NonWindow))
}

/// Eq.-2 expected utility `E[r i_{t+1}] - c a` at `y_hat = x + a`.
pub fn instantaneous_utility<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    x: S,
    a: S,
    unit_cost: S,
) -> S {
    let p = crate::model::decision_probabilities(params, level, x + a);
    let i = S::from_usize(level.index).unwrap();
    params.reward() * (i + p.p_up - p.p_down) - unit_cost * a
}

/// Promotion at least as likely as demotion at the window target.
pub fn check_prop2<S: Scalar>(
    window: &EffortWindow<S>,
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
) -> bool {
    let raw = crate::model::raw_decision(params, level, level.mu + window.w_bar);
    raw.p_plus >= raw.p_minus
}

/// Windows for the three boundary classes at one unit cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWindows<S> {
    pub first: EffortWindow<S>,
    pub middle: EffortWindow<S>,
    pub terminal: EffortWindow<S>,
}

impl<S: Scalar> ClassWindows<S> {
    pub fn compute(params: &ModelParams<S>, unit_cost: S) -> Result<Self> {
        Self::compute_with(params, unit_cost, WindowSearch::default())
    }

    pub fn compute_with(
        params: &ModelParams<S>,
        unit_cost: S,
        search: WindowSearch,
    ) -> Result<Self> {
        let at = |class| {
            find_effort_window_with(
                params,
                &LevelSpec::of_class(class, S::zero()),
                unit_cost,
                search,
            )
        };
        Ok(Self {
            first: at(BoundaryClass::First)?,
            middle: at(BoundaryClass::Middle)?,
            terminal: at(BoundaryClass::Terminal)?,
        })
    }

    pub fn get(&self, class: BoundaryClass) -> &EffortWindow<S> {
        match class {
            BoundaryClass::First => &self.first,
            BoundaryClass::Middle => &self.middle,
            BoundaryClass::Terminal => &self.terminal,
        }
    }

    pub fn all_valid(&self) -> bool {
        self.first.valid && self.middle.valid && self.terminal.valid
    }

    /// Per-level windows for a ladder.
    pub fn for_ladder(&self, ladder: &Ladder<S>) -> Vec<EffortWindow<S>> {
        ladder
            .levels()
            .map(|l| self.get(l.class).shifted(&l))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Abstention;

    fn params(c_plus: f64, c_minus: f64) -> ModelParams<f64> {
        ModelParams::scalar(
            4.0,
            0.9,
            1.0,
            c_plus,
            c_minus,
            Abstention::entropy(0.604).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn direction_examples() {
        let a = Abstention::entropy(0.5).unwrap();
        let p = ModelParams::new(
            4.0,
            0.9,
            1.0,
            vec![1.0, 1.0],
            vec![2.0, 4.0],
            vec![1.0, 3.0],
            a,
        )
        .unwrap();
        let u = select_direction(&p, Restriction::Unrestricted).unwrap();
        assert_eq!(
            (u.action_kind, u.component, u.dimension),
            (ActionKind::Gaming, 0, 2)
        );
        assert_eq!(u.unit_cost, 1.0);
        let i = select_direction(&p, Restriction::ImprovementOnly).unwrap();
        assert_eq!(
            (i.action_kind, i.component, i.unit_cost),
            (ActionKind::Improvement, 0, 2.0)
        );

        let p = ModelParams::new(
            4.0,
            0.9,
            1.0,
            vec![2.0, 1.0],
            vec![5.0, 3.0],
            vec![4.0, 2.0],
            a,
        )
        .unwrap();
        let g = select_direction(&p, Restriction::GamingOnly).unwrap();
        assert_eq!((g.component, g.unit_cost), (0, 2.0));
        let v = g.action(&p, 1.0);
        assert_eq!(v.game, vec![0.5, 0.0]);
        assert_eq!(v.improve, vec![0.0, 0.0]);
    }

    #[test]
    fn g_reference_values() {
        let p = params(0.8, 0.75);
        let mid = LevelSpec::of_class(BoundaryClass::Middle, 0.0);
        assert_eq!(evaluate_g(&p, &mid, 0.0, 0.8), 0.0);
        let first = LevelSpec::of_class(BoundaryClass::First, 0.0);
        assert!((evaluate_g(&p, &first, 0.0, 0.8) - 0.198).abs() < 1e-12);
        let term = LevelSpec::of_class(BoundaryClass::Terminal, 0.0);
        assert!((evaluate_g(&p, &term, 0.0, 0.8) + 0.198).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for kind in [
            crate::model::AbstentionKind::Entropy,
            crate::model::AbstentionKind::Polynomial,
        ] {
            let a = Abstention::new(kind, 0.604, 25.5).unwrap();
            let p = ModelParams::scalar(4.0, 0.9, 1.0, 0.8, 0.75, a).unwrap();
            for class in [
                BoundaryClass::First,
                BoundaryClass::Middle,
                BoundaryClass::Terminal,
            ] {
                for k in -40..=40 {
                    let z = k as f64 * 0.0731 + 0.013;
                    let h = 1e-6;
                    let fd = (g_class(&p, class, z + h, 0.8) - g_class(&p, class, z - h, 0.8))
                        / (2.0 * h);
                    let an = g_derivative(&p, class, z, 0.8);
                    assert!(
                        (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
                        "{kind:?} {class:?} z={z}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn middle_window_against_dense_grid() {
        let p = params(0.8, 0.75);
        let mid = LevelSpec::of_class(BoundaryClass::Middle, 0.0);
        let w = find_effort_window(&p, &mid, 0.75).unwrap();
        // G grows without bound to the left, so the oracle is the largest
        // discrete local maximum of the dense grid rather than its global argmax.
        let vals: Vec<f64> = (0..=1_000_000)
            .map(|k| evaluate_g(&p, &mid, -5.0 + k as f64 * 1e-5, 0.75))
            .collect();
        let arg = (1..1_000_000)
            .rev()
            .find(|&k| vals[k] > vals[k - 1] && vals[k] >= vals[k + 1])
            .map(|k| -5.0 + k as f64 * 1e-5)
            .unwrap();
        assert!(
            (w.w_bar - arg).abs() < 1e-4,
            "{} vs {arg}: {:?}",
            w.w_bar,
            w.local_maximizers
        );
        assert!(w.valid);
        assert!((evaluate_g(&p, &mid, w.w_under, 0.75) - w.g_max()).abs() < 1e-8);
        assert!(w.w_under <= 0.0 && 0.0 < w.w_bar);
        assert!(check_prop2(&w, &p, &mid));
        assert_eq!(w.effort_segments, 1);
    }

    #[test]
    fn prohibitive_cost_has_no_window() {
        let p = params(0.8, 0.75);
        for class in [
            BoundaryClass::First,
            BoundaryClass::Middle,
            BoundaryClass::Terminal,
        ] {
            let r = find_effort_window(&p, &LevelSpec::of_class(class, 0.0), 1e6);
            assert!(matches!(r, Err(Error::EmptyLocalMaximizers { .. })));
        }
    }

    #[test]
    fn magnitude_boundaries() {
        let p = params(0.8, 0.75);
        let level = LevelSpec {
            index: 2,
            mu: 3.0,
            class: BoundaryClass::Middle,
        };
        let w = find_effort_window(&p, &level, 0.8).unwrap();
        assert_eq!(best_response_magnitude(&w, w.mu_bar).unwrap(), 0.0);
        assert_eq!(
            best_response_magnitude(&w, (w.mu_under - 0.01).max(0.0)).unwrap(),
            0.0
        );
        let x = 0.5 * (w.mu_under.max(0.0) + w.mu_bar);
        assert!((best_response_magnitude(&w, x).unwrap() - (w.mu_bar - x)).abs() < 1e-15);
        assert!(best_response_magnitude(&w, -1.0).is_err());
        let mut broken = w.clone();
        broken.valid = false;
        assert!(best_response_magnitude(&broken, x).is_err());
        let (a, regime) = best_response(&p, &broken, x).unwrap();
        assert_eq!(regime, ResponseRegime::NonWindow);
        assert!((a - (w.mu_bar - x)).abs() < 1e-9);
    }

    #[test]
    fn utility_examples() {
        let p = params(0.8, 0.75);
        let mid = LevelSpec {
            index: 2,
            mu: 0.5,
            class: BoundaryClass::Middle,
        };
        assert!((instantaneous_utility(&p, &mid, 0.5, 0.0, 0.8) - 2.0).abs() < 1e-15);
        let first = LevelSpec {
            index: 1,
            mu: 0.0,
            class: BoundaryClass::First,
        };
        assert!((instantaneous_utility(&p, &first, 0.0, 0.0, 0.8) - 1.198).abs() < 1e-12);
    }

    #[test]
    fn shifted_window_moves_edges() {
        let p = params(0.8, 0.75);
        let cw = ClassWindows::compute(&p, 0.8).unwrap();
        let ladder = Ladder::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let ws = cw.for_ladder(&ladder);
        assert_eq!(ws.len(), 4);
        assert!((ws[2].mu_bar - (2.0 + cw.middle.w_bar)).abs() < 1e-15);
        assert_eq!(ws[3].class, BoundaryClass::Terminal);
    }

    #[test]
    fn generic_over_f32() {
        let a = Abstention::<f32>::entropy(0.604).unwrap();
        let p = ModelParams::<f32>::scalar(4.0, 0.9, 1.0, 0.8, 0.75, a).unwrap();
        let w =
            find_effort_window(&p, &LevelSpec::of_class(BoundaryClass::Middle, 0.0), 0.8).unwrap();
        assert!((w.w_bar - 0.70935).abs() < 1e-3);
    }
}
