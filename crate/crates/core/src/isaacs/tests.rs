use proptest::prelude::*;

use super::*;
use crate::game::{ControlGrid, FnGame};

fn grid(a: &[f64], b: &[f64]) -> ControlGrid {
    ControlGrid::scalar(a, b).unwrap()
}

/// `a ≡ 1`, `b = α - β`, constant `c` and `f` on the displayed grids.
fn game(c: f64, f: f64, controls: ControlGrid) -> GameSpec {
    FnGame::new()
        .sigma(|_, _, _, s| s[0] = 2f64.sqrt())
        .drift(|a, b, _, out| out[0] = a[0] - b[0])
        .cost(move |_, _, _| c)
        .running(move |_, _, _| f)
        .into_spec("t", 1, 1, controls, 0.5, 1.0, 4.0)
        .unwrap()
}

fn saddle(f: f64) -> GameSpec {
    game(0.0, f, grid(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]))
}

fn unit() -> Domain {
    Domain::interval(0.0, 1.0).unwrap()
}

/// `u = s·x²` at `x`.
fn quad(s: f64, x: f64) -> FieldDerivatives {
    FieldDerivatives::scalar(s * x * x, 2.0 * s * x, 2.0 * s)
}

#[test]
fn l_bar_second_derivative() {
    let spec = game(0.0, 0.0, grid(&[0.0], &[0.0]));
    let x = 0.4;
    let du = FieldDerivatives::scalar(-x * x / 2.0, -x, -1.0);
    assert!((bar_l_apply(&spec, 0, 0, &[x], &du) + 1.0).abs() < 1e-15);
}

#[test]
fn l_bar_gradient_term() {
    let spec = saddle(0.0);
    // α = 1 (index 2), β = -1 (index 0), u(x) = x.
    let du = FieldDerivatives::scalar(0.7, 1.0, 0.0);
    assert_eq!(bar_l_apply(&spec, 2, 0, &[0.7], &du), 2.0);
}

#[test]
fn l_bar_zeroth_order_term() {
    let spec = game(2.0, 0.0, grid(&[0.0], &[0.0]));
    assert_eq!(bar_l_apply(&spec, 0, 0, &[0.5], &FieldDerivatives::constant(3.0, 1)), -6.0);
}

#[test]
fn h_singleton_controls() {
    let spec = game(0.0, 1.0, grid(&[0.0], &[0.0]));
    let du = FieldDerivatives::scalar(-0.045, -0.3, -1.0);
    assert!(isaacs_h(&spec, &[0.3], &du).value.abs() < 1e-15);
}

#[test]
fn h_saddle_grid() {
    let r = isaacs_h(&saddle(0.0), &[0.3], &quad(-1.0, 0.3));
    assert!((r.value + 2.0).abs() < 1e-15);
    assert_eq!((r.alpha, r.beta), (0, 0));
}

#[test]
fn h_flat_gradient() {
    let du = FieldDerivatives::scalar(0.0, 0.0, -1.0);
    let r = isaacs_h(&saddle(1.0), &[0.5], &du);
    assert!(r.value.abs() < 1e-15);
    let lower = lower_isaacs_h(&saddle(1.0), &[0.5], &du);
    assert_eq!(lower.value, r.value);
}

#[test]
fn beta_selector_picks_least_index() {
    let spec = saddle(0.0);
    let j = select_beta(&spec, &unit(), 2, &[0.3], &quad(-1.0, 0.3), 0.1).unwrap();
    assert_eq!(j, 0);
    assert!((bar_hamiltonian(&spec, 2, 0, &[0.3], &quad(-1.0, 0.3)) + 3.2).abs() < 1e-14);
}

#[test]
fn beta_selector_outside_domain() {
    let spec = saddle(0.0);
    assert_eq!(select_beta(&spec, &unit(), 1, &[1.5], &quad(1.0, 1.5), 0.0).unwrap(), 0);
    assert_eq!(select_beta(&spec, &unit(), 1, &[1.0], &quad(1.0, 1.0), 0.0).unwrap(), 0);
}

#[test]
fn beta_selector_no_admissible() {
    let err = select_beta(&saddle(0.0), &unit(), 2, &[0.3], &quad(1.0, 0.3), 0.1).unwrap_err();
    match err {
        Error::NoAdmissibleIndex { player, best, .. } => {
            assert_eq!(player, "beta");
            assert!((best - 2.0).abs() < 1e-14);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn alpha_selector_mirror() {
    // u = x² at 0.3: the rows min over β are 2 + 0.6(α - 1) = 0.8, 1.4, 2.0,
    // so every α qualifies and the least index is 0.
    let spec = saddle(0.0);
    let du = quad(1.0, 0.3);
    let table = hamiltonian_table(&spec, &[0.3], &du);
    let mins: Vec<f64> = table.chunks(3).map(|r| argmin(r).1).collect();
    for (m, want) in mins.iter().zip([0.8, 1.4, 2.0]) {
        assert!((m - want).abs() < 1e-14);
    }
    assert_eq!(select_alpha(&spec, &unit(), &[0.3], &du, 0.1).unwrap(), 0);
    // With ε = -1.9 only α = 1 (index 2) still qualifies.
    assert_eq!(select_alpha(&spec, &unit(), &[0.3], &du, -1.9).unwrap(), 2);
}

#[test]
fn alpha_selector_singleton() {
    let spec = game(0.0, 1.0, grid(&[0.0], &[-1.0, 1.0]));
    let du = FieldDerivatives::scalar(0.0, 0.0, -1.0);
    assert_eq!(select_alpha(&spec, &unit(), &[0.5], &du, 1e-6).unwrap(), 0);
}

#[test]
fn alpha_selector_no_admissible() {
    let err = select_alpha(&saddle(0.0), &unit(), &[0.3], &quad(-1.0, 0.3), 0.1).unwrap_err();
    assert!(matches!(err, Error::NoAdmissibleIndex { player: "alpha", .. }));
    assert_eq!(select_alpha(&saddle(0.0), &unit(), &[-0.3], &quad(-1.0, 0.3), 0.1).unwrap(), 0);
}

fn brute_sup_inf(spec: &GameSpec, x: &[f64], du: &FieldDerivatives) -> f64 {
    let mut sup = f64::NEG_INFINITY;
    for i in 0..spec.controls.n_alpha() {
        let mut inf = f64::INFINITY;
        for j in 0..spec.controls.n_beta() {
            let a = crate::game::eval_diffusion(spec, i, j, spec.controls.base_param_index(), x).unwrap();
            let v = a.a[0] * du.hessian[0] + a.b[0] * du.gradient[0] - a.c * du.value + a.f;
            inf = inf.min(v);
        }
        sup = sup.max(inf);
    }
    sup
}

fn brute_inf_sup(spec: &GameSpec, x: &[f64], du: &FieldDerivatives) -> f64 {
    let mut inf = f64::INFINITY;
    for j in 0..spec.controls.n_beta() {
        let mut sup = f64::NEG_INFINITY;
        for i in 0..spec.controls.n_alpha() {
            sup = sup.max(bar_hamiltonian(spec, i, j, x, du));
        }
        inf = inf.min(sup);
    }
    inf
}

fn rich_game() -> GameSpec {
    FnGame::new()
        .sigma(|a, _, x, s| s[0] = (1.0 + 0.5 * (a[0] * x[0]).sin().abs()).sqrt())
        .drift(|a, b, x, out| out[0] = a[0] * x[0] - b[0] + a[0] * b[0])
        .cost(|a, b, _| 0.1 + (a[0] - b[0]).abs())
        .running(|a, b, x| x[0] * a[0] - b[0] * b[0])
        .into_spec(
            "rich",
            1,
            1,
            grid(&[-1.0, -0.25, 0.5, 2.0], &[-2.0, 0.0, 0.3, 1.0, 1.5]),
            0.5,
            1.0,
            10.0,
        )
        .unwrap()
}

proptest! {
    #[test]
    fn h_matches_brute_force(x in -1.0f64..1.0, v in -2.0f64..2.0, g in -3.0f64..3.0, h in -3.0f64..3.0) {
        let spec = rich_game();
        let du = FieldDerivatives::scalar(v, g, h);
        let r = isaacs_h(&spec, &[x], &du);
        prop_assert_eq!(r.value, brute_sup_inf(&spec, &[x], &du));
        prop_assert_eq!(bar_hamiltonian(&spec, r.alpha, r.beta, &[x], &du), r.value);
        prop_assert!(r.value <= brute_inf_sup(&spec, &[x], &du));
        prop_assert_eq!(lower_isaacs_h(&spec, &[x], &du).value, brute_inf_sup(&spec, &[x], &du));
    }

    #[test]
    fn h_monotone_in_hessian(x in -1.0f64..1.0, v in -2.0f64..2.0, g in -3.0f64..3.0, h in -3.0f64..3.0, dh in 0.0f64..2.0) {
        let spec = rich_game();
        let lo = isaacs_h(&spec, &[x], &FieldDerivatives::scalar(v, g, h)).value;
        let hi = isaacs_h(&spec, &[x], &FieldDerivatives::scalar(v, g, h + dh)).value;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn running_shift_shifts_h(g in -3.0f64..3.0, h in -3.0f64..3.0, s in -5.0f64..5.0) {
        let du = FieldDerivatives::scalar(0.1, g, h);
        let h0 = isaacs_h(&saddle(0.25), &[0.4], &du).value;
        let h1 = isaacs_h(&saddle(0.25 + s), &[0.4], &du).value;
        prop_assert!((h1 - (h0 + s)).abs() <= 1e-12 * (1.0 + h0.abs() + s.abs()));
    }

    #[test]
    fn selector_is_least_admissible(x in 0.01f64..0.99, v in -2.0f64..2.0, g in -3.0f64..3.0, h in -3.0f64..3.0, eps in 0.0f64..1.0, alpha in 0usize..4) {
        let spec = rich_game();
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let du = FieldDerivatives::scalar(v, g, h);
        match select_beta(&spec, &dom, alpha, &[x], &du, eps) {
            Ok(j) => {
                prop_assert!(bar_hamiltonian(&spec, alpha, j, &[x], &du) <= eps);
                for k in 0..j {
                    prop_assert!(bar_hamiltonian(&spec, alpha, k, &[x], &du) > eps);
                }
            }
            Err(_) => {
                for k in 0..spec.controls.n_beta() {
                    prop_assert!(bar_hamiltonian(&spec, alpha, k, &[x], &du) > eps);
                }
            }
        }
        if let Ok(i) = select_alpha(&spec, &dom, &[x], &du, eps) {
            let row = hamiltonian_table(&spec, &[x], &du);
            prop_assert!(argmin(&row[i * 5..(i + 1) * 5]).1 >= -eps);
        }
    }
}
