//! Learning automaton with the linear reward-inaction (L_R-I) scheme.

use rand::Rng;

use super::{ActionSet, ControllerState, ReservationController};
use crate::config::{ControllerKind, LaParams, NetworkConfig, ReservationVector, RewardScale};
use crate::error::{Error, Result};
use crate::kernel::Stream;
use crate::metrics::MetricsWindow;
use crate::numeric::{Real, Scalar};

fn check_distribution<T: Scalar>(p: &[T]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    let mut sum = T::zero();
    for &x in p {
        if x < T::zero() || x > T::one() {
            return Err(Error::InvalidDistribution(format!("component {x:?} outside [0,1]")));
        }
        sum = sum + x;
    }
    if sum.abs_diff(T::one()) > T::probability_tolerance() {
        return Err(Error::InvalidDistribution(format!("sums to {sum:?}")));
    }
    Ok(())
}

/// One L_R-I step: the chosen action moves toward 1 by `a·β` of its gap,
/// every other action shrinks by the factor `1 − a·β`.
pub fn la_update<T: Scalar>(p: &mut [T], chosen: usize, beta: T, a: T) -> Result<()> {
    check_distribution(p)?;
    if chosen >= p.len() {
        return Err(Error::InvalidArgument(format!("action {chosen} of {}", p.len())));
    }
    if !(a > T::zero() && a < T::one()) {
        return Err(Error::InvalidArgument(format!("learning rate {a:?} outside (0,1)")));
    }
    if beta < T::zero() || beta > T::one() {
        return Err(Error::InvalidArgument(format!("reward {beta:?} outside [0,1]")));
    }
    let step = a * beta;
    if step == T::zero() {
        return Ok(());
    }
    let mut others = T::zero();
    for (j, pj) in p.iter_mut().enumerate() {
        if j != chosen {
            *pj = *pj - step * *pj;
            others = others + *pj;
        }
    }
    // p_c + aβ(1 − p_c) equals 1 − Σ_{j≠c} p_j after the shrink; taking the
    // complement keeps rounding from accumulating in the total.
    p[chosen] = (T::one() - others).max_of(T::zero());
    Ok(())
}

/// Maps a window cost to a reward in [0,1]: `max(0, 1 − J / J_scale)`.
pub fn reward_from_cost<T: Scalar>(cost: T, j_scale: T) -> T {
    (T::one() - cost / j_scale).max_of(T::zero()).min_of(T::one())
}

/// Action probabilities of an automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningAutomaton<T> {
    probabilities: Vec<T>,
}

impl<T: Scalar> LearningAutomaton<T> {
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "automaton needs at least one action");
        let mut total = T::zero();
        for _ in 0..n {
            total = total + T::one();
        }
        LearningAutomaton { probabilities: vec![T::one() / total; n] }
    }

    pub fn from_probabilities(probabilities: Vec<T>) -> Result<Self> {
        check_distribution(&probabilities)?;
        Ok(LearningAutomaton { probabilities })
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    pub fn update(&mut self, chosen: usize, beta: T, a: T) -> Result<()> {
        la_update(&mut self.probabilities, chosen, beta, a)
    }

    pub fn most_likely(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

impl<T: Real> LearningAutomaton<T> {
    /// Draws an action index by inverting the cumulative distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::from_f64(rng.gen::<f64>());
        let mut acc = T::zero();
        for (i, &p) in self.probabilities.iter().enumerate() {
            acc = acc + p;
            if u < acc {
                return i;
            }
        }
        // rounding left the total just under u; fall back to the last action with mass
        self.probabilities.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
    }
}

/// Per-cell L_R-I reservation controller over an [`ActionSet`].
#[derive(Debug, Clone)]
pub struct LaController {
    actions: ActionSet,
    automaton: LearningAutomaton<f64>,
    params: LaParams,
    running_cost: Option<f64>,
    pending: Option<usize>,
    rng: Stream,
}

impl LaController {
    pub fn new(actions: ActionSet, params: LaParams, rng: Stream) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::EmptyLattice { channels: 0, stride: 0 });
        }
        Ok(LaController {
            automaton: LearningAutomaton::uniform(actions.len()),
            actions,
            params,
            running_cost: None,
            pending: None,
            rng,
        })
    }

    pub fn restore(&mut self, state: &ControllerState) -> Result<()> {
        match state {
            ControllerState::La { probabilities, running_cost } if probabilities.len() == self.actions.len() => {
                self.automaton = LearningAutomaton::from_probabilities(probabilities.clone())?;
                self.running_cost = *running_cost;
                Ok(())
            }
            _ => Err(Error::StateMismatch("not an automaton state for this action set".into())),
        }
    }

    pub fn automaton(&self) -> &LearningAutomaton<f64> {
        &self.automaton
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }
}

impl ReservationController for LaController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::La
    }

    fn decide(&mut self, _: &MetricsWindow, _: ReservationVector, _: &NetworkConfig) -> ReservationVector {
        let i = self.automaton.sample(&mut self.rng);
        self.pending = Some(i);
        self.actions.get(i)
    }

    fn notify_reward(&mut self, cost: f64) {
        if let Some(i) = self.pending.take() {
            let scale = match self.params.reward_scale {
                RewardScale::Fixed => self.params.j_scale,
                RewardScale::RunningMean => {
                    let prev = self.running_cost.unwrap_or(cost);
                    let d = self.params.scale_decay;
                    self.running_cost = Some(d * prev + (1.0 - d) * cost);
                    prev
                }
            };
            // a zero scale means every window so far was free; nothing to learn from
            let beta = if scale > 0.0 { reward_from_cost(cost, scale) } else { 0.0 };
            self.automaton
                .update(i, beta, self.params.learning_rate)
                .expect("automaton stays a distribution under L_R-I");
        }
    }

    fn state(&self) -> Option<ControllerState> {
        Some(ControllerState::La {
            probabilities: self.automaton.probabilities().to_vec(),
            running_cost: self.running_cost,
        })
    }
}
