//! Closed-form teletraffic oracles.
//!
//! Everything here is generic over [`Scalar`], so the same code checks the
//! simulator in `f64` and reproduces hand-derived values exactly over
//! rationals.

use crate::config::{CallClass, HandoffMode, NetworkConfig, ReservationVector};
use crate::controllers::CostWeights;
use crate::error::{Error, Result};
use crate::numeric::Scalar;

fn check_load<T: Scalar>(rho: T) -> Result<()> {
    if rho >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("offered load must be ≥ 0, got {rho:?}")))
    }
}

/// Erlang-B blocking of `c` servers offered `rho` Erlangs.
///
/// Uses `B(c) = rho B(c-1) / (c + rho B(c-1))`, which never forms a factorial.
pub fn erlang_b<T: Scalar>(c: u32, rho: T) -> Result<T> {
    check_load(rho)?;
    let mut b = T::one();
    for n in 1..=c {
        let rb = rho * b;
        b = rb / (T::from_u32(n) + rb);
    }
    Ok(b)
}

/// Probability that an M/M/c/K system is full (`K` counts waiting room plus servers).
pub fn mmck_blocking<T: Scalar>(c: u32, k: u32, rho: T) -> Result<T> {
    check_load(rho)?;
    if c < 1 || k < c {
        return Err(Error::InvalidArgument(format!("need K ≥ c ≥ 1, got c={c} K={k}")));
    }
    if rho == T::zero() {
        return Ok(T::zero());
    }
    // Walk the birth-death chain downward from state K: p(n-1)/p(n) = min(n,c)/rho.
    let mut ratio = T::one();
    let mut total = T::one();
    for n in (1..=k).rev() {
        ratio = ratio * T::from_u32(n.min(c)) / rho;
        total = total + ratio;
    }
    Ok(T::one() / total)
}

/// Weighted blocking/dropping cost of a disjoint-pool reservation under pure
/// loss, plus the constant latency term `w_l · min(delta / l_ref, 1)`.
///
/// Classes offered no traffic contribute nothing. The reservation must use
/// every channel.
pub fn disjoint_cost<T: Scalar>(
    rv: &ReservationVector,
    channels: u32,
    loads: &[T; 4],
    weights: &CostWeights<T>,
    delta: T,
) -> Result<T> {
    if rv.total() != channels as u64 {
        return Err(Error::OutsideDomain(format!(
            "shared pool must be empty, reservation {rv} leaves {} of {channels} channels",
            channels as i64 - rv.total() as i64
        )));
    }
    let mut cost = weights.latency_term(delta);
    for class in CallClass::ALL {
        let rho = loads[class.index()];
        check_load(rho)?;
        if rho > T::zero() {
            cost = cost + weights.class_weight(class) * erlang_b(rv.pool(class), rho)?;
        }
    }
    Ok(cost)
}

/// Every reservation whose pools are multiples of `stride` and sum to `channels`.
/// Ordered lexicographically by `(noc, roc, nhc, rhc)`.
pub fn partition_lattice(channels: u32, stride: u32) -> Vec<ReservationVector> {
    let mut out = Vec::new();
    if stride == 0 {
        return out;
    }
    let steps: Vec<u32> = (0..=channels).step_by(stride as usize).collect();
    for &a in &steps {
        for &b in steps.iter().take_while(|&&b| a + b <= channels) {
            for &c in steps.iter().take_while(|&&c| a + b + c <= channels) {
                let d = channels - a - b - c;
                if d % stride == 0 {
                    out.push(ReservationVector::new(a, b, c, d));
                }
            }
        }
    }
    out
}

/// Exhaustive minimiser of [`disjoint_cost`] over [`partition_lattice`];
/// ties go to the lexicographically smallest vector.
pub fn brute_force_optimum<T: Scalar>(
    channels: u32,
    loads: &[T; 4],
    weights: &CostWeights<T>,
    delta: T,
    stride: u32,
) -> Result<(ReservationVector, T)> {
    let mut best: Option<(ReservationVector, T)> = None;
    for rv in partition_lattice(channels, stride) {
        let cost = disjoint_cost(&rv, channels, loads, weights, delta)?;
        // lattice is already in lexicographic order, so strict improvement keeps ties stable
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((rv, cost));
        }
    }
    best.ok_or(Error::EmptyLattice { channels, stride })
}

/// Rejects configurations the disjoint pure-loss model does not describe.
pub fn check_oracle_domain(cfg: &NetworkConfig) -> Result<()> {
    if cfg.handoff_mode != HandoffMode::Exogenous {
        return Err(Error::OutsideDomain("handoff mode must be exogenous".into()));
    }
    if !cfg.is_pure_loss() {
        return Err(Error::OutsideDomain("queues must be disabled (pure loss)".into()));
    }
    Ok(())
}

/// Analytic optimum for a configuration.
pub fn optimum_for_config(cfg: &NetworkConfig) -> Result<(ReservationVector, f64)> {
    check_oracle_domain(cfg)?;
    brute_force_optimum(
        cfg.channels_per_cell,
        &cfg.per_cell_offered_load(),
        &cfg.controller.weights,
        cfg.signaling_delay,
        cfg.action_stride(),
    )
}

/// Analytic cost of `rv` under a configuration.
pub fn cost_for_config(cfg: &NetworkConfig, rv: &ReservationVector) -> Result<f64> {
    check_oracle_domain(cfg)?;
    disjoint_cost(
        rv,
        cfg.channels_per_cell,
        &cfg.per_cell_offered_load(),
        &cfg.controller.weights,
        cfg.signaling_delay,
    )
}
