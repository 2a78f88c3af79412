use proptest::prelude::*;

use super::*;
use crate::game::{builtin, ControlGrid, FnGame};

#[test]
fn interval_membership() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    assert!(d.contains(&[0.5]));
    assert!(!d.contains(&[1.0]));
    assert!(!d.contains(&[0.0]));
    assert!(!d.contains(&[-0.1]));
}

#[test]
fn ball_membership() {
    let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
    assert!(!d.contains(&[0.6, 0.8]));
    assert!(d.contains(&[0.6, 0.79]));
    assert_eq!(d.diameter(), 2.0);
}

#[test]
fn box_signed_distance() {
    let d = Domain::cube(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
    assert_eq!(d.signed_distance(&[1.0, 0.5]), -0.5);
    assert_eq!(d.signed_distance(&[0.2, 0.5]), -0.2);
    assert_eq!(d.signed_distance(&[2.0, 0.5]), 0.0);
    assert!((d.signed_distance(&[3.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn degenerate_domains_rejected() {
    assert!(Domain::interval(1.0, 1.0).is_err());
    assert!(Domain::ball(vec![0.0], 0.0).is_err());
    assert!(Domain::cube(vec![0.0, 0.0], vec![1.0]).is_err());
    assert!(Domain::interval(0.0, 1.0).unwrap().shrink(0.5).is_err());
}

#[test]
fn crossing_interval() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let c = d.boundary_crossing(&[0.9], &[1.1]).unwrap();
    assert!((c.point[0] - 1.0).abs() < 1e-15);
    assert!((c.theta - 0.5).abs() < 1e-11);
    assert!(d.boundary_crossing(&[0.5], &[0.6]).is_none());
}

#[test]
fn crossing_ball() {
    let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
    let c = d.boundary_crossing(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
    assert!((c.point[0] - 1.0).abs() < 1e-11 && c.point[1].abs() < 1e-15);
    assert!((c.theta - 0.5).abs() < 1e-11);
}

#[test]
fn crossing_exactly_on_boundary() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let c = d.boundary_crossing(&[0.5], &[1.0]).unwrap();
    assert_eq!((c.point[0], c.theta), (1.0, 1.0));
}

#[test]
fn json_shape() {
    let d: Domain = serde_json::from_str(r#"{"kind":"interval","a":0.0,"b":1.0}"#).unwrap();
    assert_eq!(d, Domain::interval(0.0, 1.0).unwrap());
    let b: Domain = serde_json::from_str(r#"{"kind":"ball","center":[0,0],"radius":1}"#).unwrap();
    assert_eq!(b.dim(), 2);
    assert!(serde_json::from_str::<Domain>(r#"{"kind":"torus"}"#).is_err());
}

#[test]
fn subdomain_family_nests() {
    let fam = SubdomainFamily::dyadic(Domain::interval(0.0, 1.0).unwrap(), 2..=6).unwrap();
    let members = fam.members();
    assert_eq!(members[0], Domain::interval(0.25, 0.75).unwrap());
    let nodes: Vec<f64> = (1..256).map(|k| k as f64 / 256.0).collect();
    for w in members.windows(2) {
        for x in &nodes {
            if w[0].contains(&[*x]) {
                assert!(w[1].contains(&[*x]));
            }
        }
    }
    assert!(SubdomainFamily::new(Domain::interval(0.0, 1.0).unwrap(), vec![0.1, 0.2]).is_err());
    assert!(SubdomainFamily::new(Domain::interval(0.0, 1.0).unwrap(), vec![0.1, 0.0]).is_ok());
}

fn barrier_game(a: f64, drift: bool) -> crate::game::GameSpec {
    let s = (2.0 * a).sqrt();
    let mut g = FnGame::new().sigma(move |_, _, _, out| out[0] = s);
    if drift {
        g = g.drift(|al, be, _, out| out[0] = 0.5 * (al[0] - be[0])).cost(|al, _, _| al[0].abs());
    }
    g.into_spec(
        "bar",
        1,
        1,
        ControlGrid::scalar(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]).unwrap(),
        a.min(1.0),
        1.0,
        4.0,
    )
    .unwrap()
}

fn unit_samples() -> Vec<Vec<f64>> {
    (1..200).map(|k| vec![k as f64 / 200.0]).collect()
}

#[test]
fn barrier_pure_diffusion() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let bar = Barrier::quadratic(&dom, 1.0);
    let r = verify_barrier(&barrier_game(1.0, false), &bar, &dom, &unit_samples()).unwrap();
    assert!(r.pass);
    assert!((r.max_lg + 2.0).abs() < 1e-14);
}

#[test]
fn barrier_with_bounded_drift() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let bar = Barrier::quadratic(&dom, 1.0);
    let r = verify_barrier(&barrier_game(1.0, true), &bar, &dom, &unit_samples()).unwrap();
    assert!(r.pass);
    // Brute force: max of -2 + b(1 - 2x) - c·x(1 - x) over the grid.
    let mut brute = f64::NEG_INFINITY;
    for x in unit_samples() {
        for al in [-1.0f64, 0.0, 1.0] {
            for be in [-1.0f64, 0.0, 1.0] {
                let x = x[0];
                brute = brute.max(-2.0 + 0.5 * (al - be) * (1.0 - 2.0 * x) - al.abs() * x * (1.0 - x));
            }
        }
    }
    assert!((r.max_lg - brute).abs() < 1e-13);
    assert!(r.max_lg <= -1.0);
}

#[test]
fn barrier_too_weak() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let bar = Barrier::quadratic(&dom, 1.0);
    let r = verify_barrier(&barrier_game(0.25, false), &bar, &dom, &unit_samples()).unwrap();
    assert!(!r.pass);
    assert!((r.max_lg + 0.5).abs() < 1e-14);
}

#[test]
fn barrier_without_derivatives_is_usage_error() {
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let bar = Barrier::new(Arc::new(|x| x[0] * (1.0 - x[0])), None);
    let r = verify_barrier(&barrier_game(1.0, false), &bar, &dom, &unit_samples());
    assert!(matches!(r, Err(Error::Usage(_))));
}

#[test]
fn bm1d_half_drift_barrier() {
    let g = builtin::bm1d_with_drift_scale(0.5).unwrap();
    let bar = Barrier::quadratic(&g.domain, 1.0);
    let base = g.spec.base_only();
    assert!(verify_barrier(&base, &bar, &g.domain, &unit_samples()).unwrap().pass);
    // Under the slow time change p' = 1/2 the same G is no longer a barrier.
    assert!(!verify_barrier(&g.spec, &bar, &g.domain, &unit_samples()).unwrap().pass);
}

#[test]
fn ball_and_box_barrier_derivatives() {
    for dom in [
        Domain::ball(vec![0.1, -0.2], 1.0).unwrap(),
        Domain::cube(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
    ] {
        let bar = Barrier::quadratic(&dom, 1.0);
        for x in dom.interior_samples(5) {
            let du = bar.derivatives(&x).unwrap();
            assert!((du.value - bar.value(&x)).abs() < 1e-14);
            let h = 1e-5;
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (bar.value(&xp) - bar.value(&xm)) / (2.0 * h);
                assert!((fd - du.gradient[i]).abs() < 1e-8);
            }
        }
        for b in dom.boundary_samples(16) {
            assert!(bar.value(&b).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn crossing_lands_on_boundary(
        r in 0.0f64..0.99, t in 0.0f64..6.28, s in 0.02f64..2.0, u in 0.0f64..6.28,
    ) {
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let x0 = vec![r * t.cos(), r * t.sin()];
        let x1 = vec![x0[0] + s * u.cos(), x0[1] + s * u.sin()];
        match dom.boundary_crossing(&x0, &x1) {
            Some(c) => {
                prop_assert!(dom.signed_distance(&c.point).abs() <= 1e-10 * dom.diameter());
                prop_assert!((0.0..=1.0).contains(&c.theta));
            }
            None => prop_assert!(dom.contains(&x1)),
        }
    }

    #[test]
    fn box_crossing_lands_on_boundary(x in 0.01f64..0.99, y in 0.01f64..0.99, dx in -2.0f64..2.0, dy in -2.0f64..2.0) {
        let dom = Domain::cube(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        if let Some(c) = dom.boundary_crossing(&[x, y], &[x + dx, y + dy]) {
            prop_assert!(dom.signed_distance(&c.point).abs() <= 1e-10 * dom.diameter());
        }
    }

    #[test]
    fn signed_distance_sign_convention(x in -0.5f64..1.5) {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let sd = dom.signed_distance(&[x]);
        prop_assert_eq!(sd < 0.0, x > 0.0 && x < 1.0);
        prop_assert_eq!(dom.contains(&[x]), sd < 0.0);
    }
}
