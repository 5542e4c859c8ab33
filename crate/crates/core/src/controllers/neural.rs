//! Softmax policy network trained with REINFORCE and a moving-average baseline.

use rand::Rng;

use super::{ActionSet, ControllerState, CostWeights, Mlp, ReservationController};
use crate::config::{CallClass, ControllerKind, NetworkConfig, NeuralParams, ReservationVector};
use crate::error::{Error, Result};
use crate::kernel::Stream;
use crate::metrics::{class_loss_probability, mean_handoff_latency, system_load, MetricsWindow};

pub const FEATURE_COUNT: usize = 10;

/// Policy input: per-class loss probabilities, saturated latency, load, and
/// the current reservation as fractions of `C`. Every entry lies in [0,1].
pub fn features(
    window: &MetricsWindow,
    current: &ReservationVector,
    cfg: &NetworkConfig,
    weights: &CostWeights,
) -> [f64; FEATURE_COUNT] {
    let loss = |k| class_loss_probability(window, k).unwrap_or(0.0);
    let latency = mean_handoff_latency(window, cfg.signaling_delay)
        .map_or(0.0, |l| (l / weights.l_ref).min(1.0));
    let c = cfg.channels_per_cell as f64;
    let rv = current.as_array();
    [
        loss(CallClass::RtO),
        loss(CallClass::NrtO),
        loss(CallClass::RtH),
        loss(CallClass::NrtH),
        latency,
        system_load(cfg).clamp(0.0, 1.0),
        (rv[0] as f64 / c).min(1.0),
        (rv[1] as f64 / c).min(1.0),
        (rv[2] as f64 / c).min(1.0),
        (rv[3] as f64 / c).min(1.0),
    ]
}

fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct NeuralController {
    actions: ActionSet,
    network: Mlp<f64>,
    params: NeuralParams,
    weights: CostWeights,
    baseline: Option<f64>,
    pending: Option<([f64; FEATURE_COUNT], usize)>,
    rng: Stream,
}

impl NeuralController {
    pub fn new(actions: ActionSet, params: NeuralParams, weights: CostWeights, mut rng: Stream) -> Self {
        let network = Mlp::random_hidden(FEATURE_COUNT, params.hidden_units, actions.len(), params.init_scale, &mut rng);
        NeuralController { actions, network, params, weights, baseline: None, pending: None, rng }
    }

    pub fn restore(&mut self, state: &ControllerState) -> Result<()> {
        match state {
            ControllerState::Neural { network, baseline }
                if network.inputs == FEATURE_COUNT && network.outputs == self.actions.len() =>
            {
                self.network = network.clone();
                self.baseline = *baseline;
                Ok(())
            }
            _ => Err(Error::StateMismatch("not a policy network for this action set".into())),
        }
    }

    pub fn network(&self) -> &Mlp<f64> {
        &self.network
    }
}

impl ReservationController for NeuralController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Neural
    }

    fn decide(&mut self, window: &MetricsWindow, current: ReservationVector, cfg: &NetworkConfig) -> ReservationVector {
        let x = features(window, &current, cfg, &self.weights);
        let p = self.network.forward(&x).expect("network shape fixed at construction");
        let i = sample_index(&p, &mut self.rng);
        self.pending = Some((x, i));
        self.actions.get(i)
    }

    fn notify_reward(&mut self, cost: f64) {
        let Some((x, chosen)) = self.pending.take() else {
            return;
        };
        let reward = -cost;
        let baseline = self.baseline.unwrap_or(reward);
        let advantage = reward - baseline;
        let grad = self.network.gradient(&x, chosen, advantage).expect("network shape fixed at construction");
        self.network.ascend(&grad, self.params.learning_rate).expect("same shape");
        let decay = self.params.baseline_decay;
        self.baseline = Some(decay * baseline + (1.0 - decay) * reward);
    }

    fn state(&self) -> Option<ControllerState> {
        Some(ControllerState::Neural { network: self.network.clone(), baseline: self.baseline })
    }
}
