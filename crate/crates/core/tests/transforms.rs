use ascribe_core::math::{apply, compose, invert};
use ascribe_core::{Transform, UnitQuat, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_transform() -> impl Strategy<Value = Transform> {
    (arb_vec(10.0), arb_vec(1.0), -3.0f64..3.0, 0.1f64..5.0).prop_filter_map(
        "degenerate axis",
        |(p, axis, angle, s)| {
            axis.normalized()
                .map(|a| Transform::new(p, UnitQuat::from_axis_angle(a, angle), s))
        },
    )
}

fn near(a: Vec3, b: Vec3, scale: f64) -> bool {
    a.distance(b) <= 1e-9 * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn compose_acts_as_sequential_application(a in arb_transform(), b in arb_transform(), p in arb_vec(10.0)) {
        let lhs = apply(&compose(&a, &b), p);
        let rhs = apply(&a, apply(&b, p));
        prop_assert!(near(lhs, rhs, rhs.norm()));
    }

    #[test]
    fn compose_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform(), p in arb_vec(5.0)) {
        let l = compose(&compose(&a, &b), &c);
        let r = compose(&a, &compose(&b, &c));
        prop_assert!((l.scale - r.scale).abs() < 1e-9 * l.scale);
        prop_assert!(near(apply(&l, p), apply(&r, p), apply(&l, p).norm()));
    }

    #[test]
    fn inverse_cancels(a in arb_transform(), p in arb_vec(10.0)) {
        let id = compose(&a, &invert(&a));
        prop_assert!(near(apply(&id, p), p, p.norm()));
        let id = compose(&invert(&a), &a);
        prop_assert!(near(apply(&id, p), p, p.norm()));
        prop_assert!((id.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_neutral(a in arb_transform(), p in arb_vec(10.0)) {
        let l = compose(&Transform::IDENTITY, &a);
        let r = compose(&a, &Transform::IDENTITY);
        prop_assert!(near(apply(&l, p), apply(&a, p), 10.0));
        prop_assert!(near(apply(&r, p), apply(&a, p), 10.0));
    }
}

#[test]
fn long_quaternion_chains_stay_unit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut q = UnitQuat::IDENTITY;
    for _ in 0..1_000_000 {
        let step = UnitQuat::from_components(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        q = q.mul(step);
        assert!((q.norm() - 1.0).abs() < 1e-12);
    }
}
