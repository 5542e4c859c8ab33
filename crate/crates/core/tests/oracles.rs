use cellres_core::analytic::{brute_force_optimum, disjoint_cost, erlang_b, mmck_blocking, partition_lattice};
use cellres_core::{CallClass, CostWeights, Exact, ReservationVector};
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i128>;

/// Erlang-B straight from its definition, `(ρ^c/c!) / Σ_{n≤c} ρ^n/n!`.
fn erlang_b_direct(c: u32, rho: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=c {
        term *= rho / n as f64;
        sum += term;
    }
    term / sum
}

fn erlang_b_direct_exact(c: u32, rho: Q) -> Q {
    let mut term = Q::from_integer(1);
    let mut sum = term;
    for n in 1..=c {
        term = term * rho / Q::from_integer(n as i128);
        sum += term;
    }
    term / sum
}

/// Stationary distribution of the M/M/c/K chain built upward from state 0.
fn mmck_direct(c: u32, k: u32, rho: f64) -> f64 {
    let mut p = vec![1.0];
    for n in 1..=k {
        let prev = p[n as usize - 1];
        p.push(prev * rho / n.min(c) as f64);
    }
    let total: f64 = p.iter().sum();
    p[k as usize] / total
}

fn unit_weights() -> CostWeights {
    CostWeights { w_b_rt: 1.0, w_b_nrt: 1.0, w_d_rt: 1.0, w_d_nrt: 1.0, w_l: 0.0, l_ref: 1.0 }
}

#[test]
fn erlang_b_matches_definition_exactly() {
    for c in 0..=8 {
        for (num, den) in [(1, 2), (1, 1), (3, 1), (7, 3), (10, 1)] {
            let rho = Q::new(num, den);
            assert_eq!(erlang_b(c, rho).unwrap(), erlang_b_direct_exact(c, rho), "c={c} rho={rho}");
        }
    }
}

#[test]
fn erlang_b_hand_values() {
    assert_eq!(erlang_b(1, Exact::from_integer(1)).unwrap(), Exact::new(1, 2));
    assert_eq!(erlang_b(2, Exact::from_integer(1)).unwrap(), Exact::new(1, 5));
    assert_eq!(erlang_b(2, Exact::from_integer(2)).unwrap(), Exact::new(2, 5));
    assert_eq!(erlang_b(0, Exact::new(3, 7)).unwrap(), Exact::from_integer(1));
    assert_eq!(erlang_b(5, Exact::from_integer(0)).unwrap(), Exact::from_integer(0));
    assert!(erlang_b(3, -1.0).is_err());
}

#[test]
fn erlang_b_large_c_is_finite_and_matches() {
    for rho in [5.0f64, 10.0, 40.0, 60.0, 120.0] {
        let b = erlang_b(60, rho).unwrap();
        assert!(b.is_finite() && (0.0..=1.0).contains(&b));
        assert!((b - erlang_b_direct(60, rho)).abs() < 1e-12 * b.max(1e-300).max(1.0));
    }
}

#[test]
fn mmck_hand_values() {
    assert_eq!(mmck_blocking(1, 2, Exact::from_integer(1)).unwrap(), Exact::new(1, 3));
    // with no waiting room it is Erlang-B
    for c in 1..=6 {
        let rho = Exact::new(5, 2);
        assert_eq!(mmck_blocking(c, c, rho).unwrap(), erlang_b(c, rho).unwrap());
    }
    assert!(mmck_blocking(2, 1, 1.0).is_err());
    assert!(mmck_blocking(0, 3, 1.0).is_err());
}

#[test]
fn mmck_matches_forward_chain_on_grid() {
    for c in 1..=8 {
        for k in c..=c + 10 {
            for &rho in &[0.1, 0.5, 1.0, 2.5, 7.0, 15.0] {
                let got = mmck_blocking(c, k, rho).unwrap();
                let want = mmck_direct(c, k, rho);
                assert!((got - want).abs() < 1e-12, "c={c} k={k} rho={rho}: {got} vs {want}");
                assert!(got <= erlang_b(c, rho).unwrap() + 1e-15);
            }
        }
    }
}

proptest! {
    #[test]
    fn erlang_b_decreases_with_servers(c in 0u32..80, rho in 0.01f64..100.0) {
        prop_assert!(erlang_b(c + 1, rho).unwrap() <= erlang_b(c, rho).unwrap());
    }

    #[test]
    fn erlang_b_increases_with_load(c in 1u32..80, rho in 0.01f64..100.0, extra in 0.0f64..10.0) {
        prop_assert!(erlang_b(c, rho).unwrap() <= erlang_b(c, rho + extra).unwrap() + 1e-15);
    }

    #[test]
    fn waiting_room_never_raises_blocking(c in 1u32..20, room in 0u32..20, rho in 0.01f64..40.0) {
        let k = c + room;
        prop_assert!(mmck_blocking(c, k + 1, rho).unwrap() <= mmck_blocking(c, k, rho).unwrap() + 1e-15);
        prop_assert!(mmck_blocking(c, k, rho).unwrap() <= erlang_b(c, rho).unwrap() + 1e-15);
    }
}

#[test]
fn toy_optimum_is_even_split() {
    let loads = [1.0, 1.0, 0.0, 0.0];
    let (rv, cost) = brute_force_optimum(4, &loads, &unit_weights(), 0.0, 1).unwrap();
    assert_eq!(rv, ReservationVector::new(2, 2, 0, 0));
    assert!((cost - 0.4).abs() < 1e-12);

    let exact_weights = CostWeights {
        w_b_rt: Exact::from_integer(1),
        w_b_nrt: Exact::from_integer(1),
        w_d_rt: Exact::from_integer(1),
        w_d_nrt: Exact::from_integer(1),
        w_l: Exact::from_integer(0),
        l_ref: Exact::from_integer(1),
    };
    let one = Exact::from_integer(1);
    let zero = Exact::from_integer(0);
    let (rv, cost) = brute_force_optimum(4, &[one, one, zero, zero], &exact_weights, zero, 1).unwrap();
    assert_eq!(rv, ReservationVector::new(2, 2, 0, 0));
    assert_eq!(cost, Exact::new(2, 5));
}

#[test]
fn lattice_sizes() {
    assert_eq!(partition_lattice(4, 1).len(), 35);
    assert_eq!(partition_lattice(60, 5).len(), 455);
    assert_eq!(partition_lattice(7, 2).len(), 0);
    assert!(partition_lattice(60, 5).windows(2).all(|w| w[0].as_array() < w[1].as_array()));
}

/// Re-enumerates every lattice point with nested loops and prices it with
/// the direct Erlang-B formula.
fn independent_minimum(c: u32, stride: u32, loads: &[f64; 4], w: &CostWeights, delta: f64) -> f64 {
    let weight = [w.w_b_rt, w.w_b_nrt, w.w_d_rt, w.w_d_nrt];
    let mut best = f64::INFINITY;
    let mut a = 0;
    while a <= c {
        let mut b = 0;
        while a + b <= c {
            let mut h = 0;
            while a + b + h <= c {
                let r = c - a - b - h;
                if r % stride == 0 {
                    // pool order (noc, roc, nhc, rhc) serves (NRT_O, RT_O, NRT_H, RT_H)
                    let pools = [b, a, r, h];
                    let mut cost = w.w_l * (delta / w.l_ref).min(1.0);
                    for k in 0..4 {
                        if loads[k] > 0.0 {
                            cost += weight[k] * erlang_b_direct(pools[k], loads[k]);
                        }
                    }
                    best = best.min(cost);
                }
                h += stride;
            }
            b += stride;
        }
        a += stride;
    }
    best
}

#[test]
fn default_lattice_optimum_beats_equal_split() {
    let loads = [12.0 * 10.0 / 15.0, 20.0 * 10.0 / 15.0, 5.0 * 10.0 / 15.0, 10.0 * 10.0 / 15.0];
    let w = CostWeights::default();
    let (rv, cost) = brute_force_optimum(60, &loads, &w, 0.1, 5).unwrap();
    let equal = disjoint_cost(&ReservationVector::equal_split(60), 60, &loads, &w, 0.1).unwrap();
    assert!(cost <= equal);
    assert_eq!(cost, disjoint_cost(&rv, 60, &loads, &w, 0.1).unwrap());
    assert!((cost - independent_minimum(60, 5, &loads, &w, 0.1)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_is_exhaustive(
        c in 1u32..=14,
        stride in 1u32..=3,
        loads in prop::array::uniform4(prop_oneof![Just(0.0), 0.05f64..8.0]),
        wb in 0.0f64..3.0,
        wd in 0.0f64..12.0,
    ) {
        let c = c - c % stride;
        prop_assume!(c > 0);
        let w = CostWeights { w_b_rt: wb, w_b_nrt: 1.0, w_d_rt: wd, w_d_nrt: 2.0, w_l: 0.5, l_ref: 1.0 };
        let (rv, cost) = brute_force_optimum(c, &loads, &w, 0.2, stride).unwrap();
        prop_assert_eq!(rv.total(), c as u64);
        prop_assert!(CallClass::ALL.iter().all(|&k| rv.pool(k) % stride == 0));
        let want = independent_minimum(c, stride, &loads, &w, 0.2);
        prop_assert!((cost - want).abs() < 1e-12, "{} vs {}", cost, want);
    }
}

#[test]
fn disjoint_cost_rejects_nonempty_shared_pool() {
    let w = unit_weights();
    assert!(disjoint_cost(&ReservationVector::new(1, 1, 1, 0), 4, &[1.0; 4], &w, 0.0).is_err());
    assert!(disjoint_cost(&ReservationVector::new(1, 1, 1, 1), 4, &[1.0, -1.0, 0.0, 0.0], &w, 0.0).is_err());
}
