use proptest::prelude::*;

use super::*;

fn grid3() -> ControlGrid {
    ControlGrid::scalar(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn diffusion_of_scalar_sigma() {
    let spec = FnGame::new()
        .sigma(|_, _, _, s| s[0] = 2f64.sqrt())
        .into_spec("t", 1, 1, grid3(), 0.5, 1.0, 2.0)
        .unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let dif = eval_diffusion(&spec, i, j, 0, &[0.3]).unwrap();
            assert!(close(&dif.a, &[1.0], 1e-15));
        }
    }
}

#[test]
fn diffusion_of_identity_sigma() {
    let spec = FnGame::new()
        .sigma(|_, _, _, s| {
            s[0] = 1.0;
            s[3] = 1.0;
        })
        .into_spec("t", 2, 2, grid3(), 0.5, 1.0, 2.0)
        .unwrap();
    let dif = eval_diffusion(&spec, 0, 0, 0, &[0.0, 0.0]).unwrap();
    assert_eq!(dif.a, vec![0.5, 0.0, 0.0, 0.5]);
}

#[test]
fn diffusion_of_shear_sigma() {
    let spec = FnGame::new()
        .sigma(|_, _, _, s| s.copy_from_slice(&[1.0, 1.0, 0.0, 1.0]))
        .into_spec("t", 2, 2, grid3(), 0.1, 1.0, 2.0)
        .unwrap();
    let dif = eval_diffusion(&spec, 1, 2, 0, &[0.1, 0.2]).unwrap();
    assert_eq!(dif.a, vec![1.0, 0.5, 0.5, 0.5]);
}

#[test]
fn eval_diffusion_rejects_bad_indices() {
    let spec = builtin::bm1d().unwrap().spec;
    assert!(matches!(eval_diffusion(&spec, 3, 0, 0, &[0.5]), Err(Error::Usage(_))));
    assert!(matches!(eval_diffusion(&spec, 0, 3, 0, &[0.5]), Err(Error::Usage(_))));
    assert!(matches!(eval_diffusion(&spec, 0, 0, 9, &[0.5]), Err(Error::Usage(_))));
    assert!(matches!(eval_diffusion(&spec, 0, 0, 0, &[0.5, 0.1]), Err(Error::Usage(_))));
}

fn axes(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect()
}

fn identity_a_game(delta: f64) -> GameSpec {
    // σ = √2·I gives a = I.
    FnGame::new()
        .sigma(|_, _, _, s| {
            s[0] = 2f64.sqrt();
            s[3] = 2f64.sqrt();
        })
        .into_spec("id", 2, 2, grid3(), delta, 1.0, 2.0)
        .unwrap()
}

#[test]
fn ellipticity_identity() {
    let samples = vec![vec![0.0, 0.0], vec![0.3, -0.2]];
    let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]];
    let r = check_ellipticity(&identity_a_game(1.0), &samples, &dirs).unwrap();
    assert!(r.pass);
    assert!((r.min_quotient - 1.0).abs() < 1e-15 && (r.max_quotient - 1.0).abs() < 1e-15);
    assert!(check_ellipticity(&identity_a_game(0.5), &samples, &dirs).unwrap().pass);
}

#[test]
fn ellipticity_catches_weak_axis() {
    let spec = FnGame::new()
        .sigma(|_, _, _, s| {
            s[0] = 0.2f64.sqrt();
            s[3] = 2f64.sqrt();
        })
        .into_spec("weak", 2, 2, grid3(), 0.5, 1.0, 2.0)
        .unwrap();
    let r = check_ellipticity(&spec, &[vec![0.0, 0.0]], &axes(2)).unwrap();
    assert!(!r.pass);
    assert!((r.min_quotient - 0.1).abs() < 1e-15);
    let (_, _, _, _, dir) = r.violation.unwrap();
    assert_eq!(dir, 0);
}

#[test]
fn ellipticity_needs_samples() {
    assert!(check_ellipticity(&identity_a_game(1.0), &[], &axes(2)).is_err());
}

fn scaled_game(scales: &[f64], delta1: f64) -> GameSpec {
    let params = scales.iter().map(|&s| ParamPoint::scaled(s)).collect();
    let base = scales.iter().position(|&s| s == 1.0).unwrap();
    let controls = ControlGrid::new(vec![vec![0.0]], vec![vec![0.0]], params, base).unwrap();
    FnGame::new()
        .sigma(|_, _, _, s| s[0] = 1.0)
        .running(|_, _, x| 1.0 + x[0] * x[0])
        .into_spec("scaled", 1, 1, controls, 0.1, delta1, 10.0)
        .unwrap()
}

#[test]
fn factorization_base_only() {
    let r = check_factorization(&scaled_game(&[1.0], 1.0), &[vec![0.2], vec![0.7]]).unwrap();
    assert!(r.pass);
    assert_eq!(r.max_relative_defect, 0.0);
}

#[test]
fn factorization_time_change() {
    let r = check_factorization(&scaled_game(&[0.5, 1.0, 2.0], 0.5), &[vec![0.2], vec![0.7]]).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!((r.min_factor, r.max_factor), (0.5, 2.0));
}

#[test]
fn factorization_out_of_bounds() {
    let r = check_factorization(&scaled_game(&[1.0, 3.0], 0.5), &[vec![0.2]]).unwrap();
    assert!(!r.pass);
    assert_eq!(r.max_factor, 3.0);
}

/// `f` does not follow `r`: only `b` is scaled.
struct Mismatched;

impl Coefficients for Mismatched {
    fn sigma_base(&self, _: &[f64], _: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn drift_base(&self, _: &[f64], _: &[f64], _: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn cost_base(&self, _: &[f64], _: &[f64], _: &[f64]) -> f64 {
        0.0
    }
    fn running_base(&self, _: &[f64], _: &[f64], _: &[f64]) -> f64 {
        1.0
    }
    fn terminal(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn running(&self, a: &[f64], b: &[f64], _: &ParamPoint, x: &[f64]) -> f64 {
        self.running_base(a, b, x)
    }
}

#[test]
fn factorization_detects_unscaled_running_payoff() {
    let controls = ControlGrid::new(
        vec![vec![0.0]],
        vec![vec![0.0]],
        vec![ParamPoint::base(), ParamPoint::scaled(2.0)],
        0,
    )
    .unwrap();
    let spec = GameSpec::new("m", 1, 1, 0.5, 0.5, 2.0, controls, Arc::new(Mismatched)).unwrap();
    let r = check_factorization(&spec, &[vec![0.5]]).unwrap();
    assert!(!r.pass);
    assert!((r.max_relative_defect - 0.5).abs() < 1e-15);
}

#[test]
fn control_grid_rejects_duplicates_and_bad_base() {
    assert!(ControlGrid::scalar(&[0.0, 0.0], &[1.0]).is_err());
    assert!(ControlGrid::scalar(&[], &[1.0]).is_err());
    assert!(ControlGrid::new(vec![vec![0.0]], vec![vec![0.0]], vec![ParamPoint::base()], 1).is_err());
    assert!(ControlGrid::new(
        vec![vec![0.0]],
        vec![vec![0.0]],
        vec![ParamPoint::base(), ParamPoint::base()],
        0
    )
    .is_err());
}

#[test]
fn game_spec_validation() {
    let mk = |d, d1, delta, delta1, k0| FnGame::new().into_spec("v", d, d1, grid3(), delta, delta1, k0);
    assert!(mk(0, 1, 0.5, 1.0, 1.0).is_err());
    assert!(mk(2, 1, 0.5, 1.0, 1.0).is_err());
    assert!(mk(1, 9, 0.5, 1.0, 1.0).is_err());
    assert!(mk(1, 1, 0.0, 1.0, 1.0).is_err());
    assert!(mk(1, 1, 0.5, 1.5, 1.0).is_err());
    assert!(mk(1, 1, 0.5, 1.0, 0.0).is_err());
    assert!(mk(1, 1, 0.5, 1.0, 1.0).is_ok());
}

#[test]
fn rotation_preserves_diffusion() {
    let q = plane_rotation(2, 0.7);
    assert!(ParamPoint::rotated(1.0, q.clone()).orthogonality_defect(2) < 1e-15);
    let controls = ControlGrid::new(
        vec![vec![0.0]],
        vec![vec![0.0]],
        vec![ParamPoint::base(), ParamPoint::rotated(1.0, q), ParamPoint::scaled(2.0)],
        0,
    )
    .unwrap();
    let spec = FnGame::new()
        .sigma(|_, _, _, s| s.copy_from_slice(&[1.0, 0.3, -0.2, 0.9]))
        .into_spec("r", 2, 2, controls, 0.1, 0.5, 10.0)
        .unwrap();
    let x = [0.1, 0.1];
    let a0 = eval_diffusion(&spec, 0, 0, 0, &x).unwrap().a;
    let a1 = eval_diffusion(&spec, 0, 0, 1, &x).unwrap().a;
    let a2 = eval_diffusion(&spec, 0, 0, 2, &x).unwrap().a;
    assert!(close(&a0, &a1, 1e-15));
    assert!(close(&a2, &a0.iter().map(|v| 2.0 * v).collect::<Vec<_>>(), 1e-15));
}

#[test]
fn builtins_satisfy_structure() {
    for name in builtin::NAMES {
        let g = builtin::load(name).unwrap();
        let samples = g.domain.interior_samples(7);
        assert!(!samples.is_empty());
        let s = check_structure(&g.spec, &samples).unwrap();
        assert!(s.pass, "{name}: {s:?}");
        let e = check_ellipticity(&g.spec, &samples, &axes(g.spec.dim)).unwrap();
        assert!(e.pass, "{name}: {e:?}");
        let f = check_factorization(&g.spec, &samples).unwrap();
        assert!(f.pass, "{name}: {f:?}");
    }
    assert!(builtin::load("nope").is_err());
}

#[test]
fn bm1d_coefficients() {
    let g = builtin::bm1d().unwrap();
    let (mut a, mut b) = ([0.0], [0.0]);
    // α = 1 (index 2), β = -1 (index 0).
    let (c, f) = g.spec.bar_coefficients(2, 0, &[0.4], &mut a, &mut b);
    assert_eq!((a[0], b[0], c, f), (1.0, 2.0, 0.0, 1.0));
    assert_eq!(g.spec.terminal(&[1.0]), 0.0);
}

proptest! {
    #[test]
    fn diffusion_symmetric_psd(
        s in proptest::collection::vec(-2.0f64..2.0, 6),
        lam in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let sv = s.clone();
        let spec = FnGame::new()
            .sigma(move |_, _, _, out| out.copy_from_slice(&sv))
            .into_spec("p", 2, 3, grid3(), 0.01, 1.0, 100.0)
            .unwrap();
        let a = eval_diffusion(&spec, 0, 0, 0, &[0.0, 0.0]).unwrap().a;
        prop_assert!((a[1] - a[2]).abs() <= 1e-14 * (1.0 + a[1].abs()));
        let q = a[0] * lam[0] * lam[0] + 2.0 * a[1] * lam[0] * lam[1] + a[3] * lam[1] * lam[1];
        prop_assert!(q >= -1e-14);
    }

    #[test]
    fn base_factor_is_one(x in -1.0f64..1.0, i in 0usize..3, j in 0usize..3) {
        for name in builtin::NAMES {
            let g = builtin::load(name).unwrap();
            let mut pt = vec![0.0; g.spec.dim];
            pt[0] = x * 0.5;
            let (i, j) = (i % g.spec.controls.n_alpha(), j % g.spec.controls.n_beta());
            prop_assert_eq!(g.spec.factor(i, j, g.spec.base_param(), &pt), 1.0);
            for p in g.spec.controls.params() {
                prop_assert!(g.spec.cost(i, j, p, &pt) >= 0.0);
            }
        }
    }
}

#[test]
fn potential_game_of_bm1d() {
    use crate::fd::{solve, Lattice, SolveOptions};
    let g = builtin::bm1d().unwrap();
    let p = potential_game(&g.spec).unwrap();
    assert_eq!(p.controls.n_alpha(), 9);
    assert_eq!(p.controls.n_beta(), 1);
    assert_eq!(p.controls.params().len(), 1);
    assert_eq!(p.terminal(&[0.3]), 0.0);
    // Φ'' + 2|Φ'| + 1 = 0, Φ(0) = Φ(1) = 0, so Φ(1/2) = (e - 2)/4.
    let lat = std::sync::Arc::new(Lattice::new(g.domain.clone(), 1.0 / 1024.0).unwrap());
    let (phi, _) = solve(&p, lat, &SolveOptions::default()).unwrap();
    let expect = |x: f64| {
        let y = x.min(1.0 - x);
        (std::f64::consts::E - (1.0 - 2.0 * y).exp()) / 4.0 - y / 2.0
    };
    assert!(((phi.value_at(&[0.5]) - (std::f64::consts::E - 2.0) / 4.0)).abs() < 2e-3);
    for k in 1..20 {
        let x = k as f64 / 20.0;
        assert!((phi.value_at(&[x]) - expect(x)).abs() < 2e-3, "x = {x}");
        assert!(phi.value_at(&[x]) >= x * (1.0 - x) / 2.0 - 1e-9);
    }
}

#[test]
fn potential_game_drops_sign_of_running_payoff() {
    let spec = FnGame::new()
        .sigma(|_, _, _, s| s[0] = 1.0)
        .running(|a, _, _| a[0])
        .into_spec("signed", 1, 1, grid3(), 0.5, 1.0, 2.0)
        .unwrap();
    let p = potential_game(&spec).unwrap();
    for i in 0..9 {
        assert_eq!(p.running(i, 0, p.base_param(), &[0.1]), spec.running(i / 3, i % 3, spec.base_param(), &[0.1]).abs());
    }
}
