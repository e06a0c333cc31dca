//! Classifier primitives: the logistic score, abstention functions and the
//! ternary promote/stay/demote decision with boundary folding.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    let one = S::one();
    if x >= S::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbstentionKind {
    /// Binary entropy normalised so that `h(1/2) = beta_tilde`.
    Entropy,
    /// `beta_tilde * (4 s (1 - s))^t`.
    Polynomial,
    /// `beta_tilde * (1 - 2|s - 1/2|)`. Not smooth at 1/2; use in experiments only.
    Absolute,
}

impl AbstentionKind {
    pub fn name(self) -> &'static str {
        match self {
            AbstentionKind::Entropy => "entropy",
            AbstentionKind::Polynomial => "polynomial",
            AbstentionKind::Absolute => "absolute",
        }
    }
}

/// Abstention probability as a function of the classifier score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abstention<S> {
    kind: AbstentionKind,
    beta_tilde: S,
    poly_degree: S,
}

impl<S: Scalar> Abstention<S> {
    pub fn new(kind: AbstentionKind, beta_tilde: S, poly_degree: S) -> Result<Self> {
        if !(beta_tilde > S::zero() && beta_tilde < S::one()) {
            return Err(invalid(
                "beta_tilde",
                format!("must lie in (0, 1), got {beta_tilde}"),
            ));
        }
        if kind == AbstentionKind::Polynomial
            && !(poly_degree > S::zero() && poly_degree.is_finite())
        {
            return Err(invalid(
                "poly_degree",
                format!("must be positive, got {poly_degree}"),
            ));
        }
        Ok(Self {
            kind,
            beta_tilde,
            poly_degree,
        })
    }

    pub fn entropy(beta_tilde: S) -> Result<Self> {
        Self::new(AbstentionKind::Entropy, beta_tilde, S::one())
    }

    pub fn polynomial(beta_tilde: S, degree: S) -> Result<Self> {
        Self::new(AbstentionKind::Polynomial, beta_tilde, degree)
    }

    pub fn absolute(beta_tilde: S) -> Result<Self> {
        Self::new(AbstentionKind::Absolute, beta_tilde, S::one())
    }

    pub fn kind(&self) -> AbstentionKind {
        self.kind
    }

    pub fn beta_tilde(&self) -> S {
        self.beta_tilde
    }

    pub fn poly_degree(&self) -> S {
        self.poly_degree
    }

    /// `h(sigma)`, rejecting scores outside `[0, 1]`.
    pub fn value(&self, sigma: S) -> Result<S> {
        if !(sigma >= S::zero() && sigma <= S::one()) {
            return Err(Error::InvalidInput(format!("score {sigma} outside [0, 1]")));
        }
        Ok(self.h(sigma))
    }

    /// Unchecked `h(sigma)`.
    ///
    /// The score is first mapped onto the upper half `u = max(s, 1 - s)`, where
    /// `1 - u` is exact, so `h(s)` and `h(1 - s)` agree bit for bit.
    #[inline]
    pub fn h(&self, sigma: S) -> S {
        let half = S::lit(0.5);
        let u = if sigma >= half {
            sigma
        } else {
            S::one() - sigma
        };
        self.h_upper(u)
    }

    #[inline]
    pub(crate) fn h_upper(&self, u: S) -> S {
        let v = S::one() - u;
        match self.kind {
            AbstentionKind::Entropy => {
                let xlnx = |p: S| if p > S::zero() { p * p.ln() } else { S::zero() };
                self.beta_tilde * (-(xlnx(u) + xlnx(v))) / S::LN_2()
            }
            AbstentionKind::Polynomial => {
                self.beta_tilde * (S::lit(4.0) * u * v).powf(self.poly_degree)
            }
            AbstentionKind::Absolute => self.beta_tilde * S::lit(2.0) * v,
        }
    }

    /// `dh/dsigma`. For the absolute kind this is the one-sided slope
    /// (zero exactly at 1/2).
    pub fn derivative(&self, sigma: S) -> S {
        let half = S::lit(0.5);
        let one = S::one();
        match self.kind {
            AbstentionKind::Entropy => {
                if sigma <= S::zero() || sigma >= one {
                    return if sigma <= S::zero() {
                        S::infinity()
                    } else {
                        S::neg_infinity()
                    };
                }
                self.beta_tilde * ((one - sigma).ln() - sigma.ln()) / S::LN_2()
            }
            AbstentionKind::Polynomial => {
                let t = self.poly_degree;
                let q = S::lit(4.0) * sigma * (one - sigma);
                if q <= S::zero() {
                    return if t < one {
                        S::infinity() * (half - sigma).signum()
                    } else if t == one {
                        self.beta_tilde * S::lit(4.0) * (one - S::lit(2.0) * sigma)
                    } else {
                        S::zero()
                    };
                }
                self.beta_tilde * t * q.powf(t - one) * S::lit(4.0) * (one - S::lit(2.0) * sigma)
            }
            AbstentionKind::Absolute => {
                if sigma < half {
                    S::lit(2.0) * self.beta_tilde
                } else if sigma > half {
                    -S::lit(2.0) * self.beta_tilde
                } else {
                    S::zero()
                }
            }
        }
    }

    /// `h'(sigmoid(x))` evaluated from the logit. For the entropy kind the
    /// logit form `-beta_tilde x / ln 2` avoids `ln(1 - s)` cancellation.
    #[inline]
    pub fn slope_at_logit(&self, x: S) -> S {
        match self.kind {
            AbstentionKind::Entropy => -self.beta_tilde * x / S::LN_2(),
            _ => self.derivative(sigmoid(x)),
        }
    }

    /// True for the kinds that are analytic in the score.
    pub fn is_smooth(&self) -> bool {
        self.kind != AbstentionKind::Absolute
    }
}

/// Free-function form of [`Abstention::value`].
pub fn abstention<S: Scalar>(spec: &Abstention<S>, sigma: S) -> Result<S> {
    spec.value(sigma)
}

/// Global model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    alpha: S,
    gamma: S,
    reward: S,
    theta: Vec<S>,
    cost_improve: Vec<S>,
    cost_game: Vec<S>,
    abstention: Abstention<S>,
}

impl<S: Scalar> ModelParams<S> {
    /// Validates every invariant, including `0 < c⁻ < c⁺` componentwise.
    pub fn new(
        alpha: S,
        gamma: S,
        reward: S,
        theta: Vec<S>,
        cost_improve: Vec<S>,
        cost_game: Vec<S>,
        abstention: Abstention<S>,
    ) -> Result<Self> {
        if !(alpha > S::zero() && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(gamma > S::zero() && gamma < S::one()) {
            return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
        }
        if !(reward > S::zero() && reward.is_finite()) {
            return Err(invalid(
                "reward_per_level",
                format!("must be positive, got {reward}"),
            ));
        }
        let d = theta.len();
        if d == 0 {
            return Err(invalid("theta", "needs at least one dimension"));
        }
        if cost_improve.len() != d || cost_game.len() != d {
            return Err(invalid(
                "cost",
                format!(
                    "cost vectors must match theta's length {d} (got {} and {})",
                    cost_improve.len(),
                    cost_game.len()
                ),
            ));
        }
        if theta.iter().any(|t| !(*t >= S::zero() && t.is_finite())) {
            return Err(invalid("theta", "entries must be finite and non-negative"));
        }
        if !theta.iter().any(|t| *t > S::zero()) {
            return Err(invalid("theta", "at least one entry must be positive"));
        }
        for (k, (&cp, &cm)) in cost_improve.iter().zip(&cost_game).enumerate() {
            if !(cm > S::zero() && cm.is_finite() && cp.is_finite()) {
                return Err(invalid(
                    "cost",
                    format!("component {k}: costs must be positive and finite"),
                ));
            }
            if !(cm < cp) {
                return Err(invalid(
                    "cost",
                    format!("component {k}: gaming must be cheaper than improvement (c- = {cm} >= c+ = {cp})"),
                ));
            }
        }
        Ok(Self {
            alpha,
            gamma,
            reward,
            theta,
            cost_improve,
            cost_game,
            abstention,
        })
    }

    /// One-dimensional model with unit weight.
    pub fn scalar(
        alpha: S,
        gamma: S,
        reward: S,
        cost_improve: S,
        cost_game: S,
        abstention: Abstention<S>,
    ) -> Result<Self> {
        Self::new(
            alpha,
            gamma,
            reward,
            vec![S::one()],
            vec![cost_improve],
            vec![cost_game],
            abstention,
        )
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }
    pub fn gamma(&self) -> S {
        self.gamma
    }
    pub fn reward(&self) -> S {
        self.reward
    }
    pub fn theta(&self) -> &[S] {
        &self.theta
    }
    pub fn cost_improve(&self) -> &[S] {
        &self.cost_improve
    }
    pub fn cost_game(&self) -> &[S] {
        &self.cost_game
    }
    pub fn abstention(&self) -> &Abstention<S> {
        &self.abstention
    }
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Copy with a different retention factor.
    pub fn with_gamma(&self, gamma: S) -> Result<Self> {
        Self::new(
            self.alpha,
            gamma,
            self.reward,
            self.theta.clone(),
            self.cost_improve.clone(),
            self.cost_game.clone(),
            self.abstention,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryClass {
    First,
    Middle,
    Terminal,
}

impl BoundaryClass {
    pub fn of(index: usize, levels: usize) -> Self {
        if index == 1 {
            BoundaryClass::First
        } else if index == levels {
            BoundaryClass::Terminal
        } else {
            BoundaryClass::Middle
        }
    }
}

/// One classifier rung. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec<S> {
    pub index: usize,
    pub mu: S,
    pub class: BoundaryClass,
}

impl<S: Scalar> LevelSpec<S> {
    /// A standalone level of the given class, used when only the class matters.
    pub fn of_class(class: BoundaryClass, mu: S) -> Self {
        let index = match class {
            BoundaryClass::First => 1,
            BoundaryClass::Middle => 2,
            BoundaryClass::Terminal => 3,
        };
        Self { index, mu, class }
    }
}

/// Sorted, strictly increasing thresholds `mu_1 < ... < mu_I`, `I >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder<S> {
    thresholds: Vec<S>,
}

impl<S: Scalar> Ladder<S> {
    pub fn new(thresholds: Vec<S>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(invalid(
                "thresholds",
                format!("need at least two levels, got {}", thresholds.len()),
            ));
        }
        if thresholds
            .iter()
            .any(|m| !(*m >= S::zero() && m.is_finite()))
        {
            return Err(invalid("thresholds", "must be finite and non-negative"));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("thresholds", "must be strictly increasing"));
        }
        Ok(Self { thresholds })
    }

    /// `levels` thresholds `0, step, 2 step, ...`.
    pub fn evenly_spaced(levels: usize, step: S) -> Result<Self> {
        Self::new(
            (0..levels)
                .map(|k| S::from_usize(k).unwrap() * step)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[S] {
        &self.thresholds
    }

    /// Level `index` (1-based).
    pub fn level(&self, index: usize) -> LevelSpec<S> {
        assert!(
            index >= 1 && index <= self.len(),
            "level {index} out of range"
        );
        LevelSpec {
            index,
            mu: self.thresholds[index - 1],
            class: BoundaryClass::of(index, self.len()),
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = LevelSpec<S>> + '_ {
        (1..=self.len()).map(move |i| self.level(i))
    }
}

/// Unfolded Eq.-1 probabilities at a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDecision<S> {
    pub sigma: S,
    pub abstain: S,
    pub p_plus: S,
    pub p_minus: S,
}

/// Level transition probabilities after folding at the boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbs<S> {
    pub p_up: S,
    pub p_stay: S,
    pub p_down: S,
}

impl<S: Scalar> TransitionProbs<S> {
    pub fn total(&self) -> S {
        self.p_up + self.p_stay + self.p_down
    }
}

/// Raw probabilities at logit `x = alpha (y_hat - mu)`.
///
/// `1 - sigma` is evaluated as `sigmoid(-x)` and the abstention from the
/// symmetric representative, so `raw(-x)` swaps `p_plus` and `p_minus` exactly.
#[inline]
pub fn raw_at_logit<S: Scalar>(abst: &Abstention<S>, x: S) -> RawDecision<S> {
    let s = sigmoid(x);
    let q = sigmoid(-x);
    let u = if s >= q { s } else { q };
    let h = abst.h_upper(u);
    let keep = S::one() - h;
    RawDecision {
        sigma: s,
        abstain: h,
        p_plus: keep * s,
        p_minus: keep * q,
    }
}

pub fn raw_decision<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    y_hat: S,
) -> RawDecision<S> {
    raw_at_logit(&params.abstention, params.alpha * (y_hat - level.mu))
}

/// Eq.-1 decision probabilities with the demotion folded into "stay" at the
/// first level and the promotion folded into "stay" at the terminal level.
pub fn decision_probabilities<S: Scalar>(
    params: &ModelParams<S>,
    level: &LevelSpec<S>,
    y_hat: S,
) -> TransitionProbs<S> {
    fold(level.class, raw_decision(params, level, y_hat))
}

#[inline]
pub fn fold<S: Scalar>(class: BoundaryClass, raw: RawDecision<S>) -> TransitionProbs<S> {
    match class {
        BoundaryClass::First => TransitionProbs {
            p_up: raw.p_plus,
            p_stay: raw.abstain + raw.p_minus,
            p_down: S::zero(),
        },
        BoundaryClass::Middle => TransitionProbs {
            p_up: raw.p_plus,
            p_stay: raw.abstain,
            p_down: raw.p_minus,
        },
        BoundaryClass::Terminal => TransitionProbs {
            p_up: S::zero(),
            p_stay: raw.abstain + raw.p_plus,
            p_down: raw.p_minus,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Promote,
    Stay,
    Demote,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Promote => "promote",
            Outcome::Stay => "stay",
            Outcome::Demote => "demote",
        }
    }

    /// Level after this outcome at `level`.
    pub fn apply(self, level: usize) -> usize {
        match self {
            Outcome::Promote => level + 1,
            Outcome::Stay => level,
            Outcome::Demote => level - 1,
        }
    }
}

/// Draws one outcome with a single uniform variate.
pub fn sample_decision<S: Scalar, R: Rng + ?Sized>(
    probs: &TransitionProbs<S>,
    rng: &mut R,
) -> Outcome {
    let u: f64 = rng.gen();
    let up = probs.p_up.as_f64();
    if u < up {
        Outcome::Promote
    } else if u < up + probs.p_stay.as_f64() {
        Outcome::Stay
    } else {
        Outcome::Demote
    }
}
