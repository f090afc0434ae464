use num_rational::Ratio;
use openorbit::orbits::project_to_curve;
use openorbit::transport::{chaotic_exponents, ChaoticParams, FrameRule};
use openorbit::zones::Regime;
use openorbit::{
    conductivity_asymptotics, make_anferms, resistance_asymptotics, sum_components, trace, PlaneSlice, Resistance,
    TraceOptions, TransportError, Vec3,
};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
        .prop_filter("nonzero", |v| v.norm() > 0.1)
}

fn coeff() -> impl Strategy<Value = f64> {
    -1.0..1.0f64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn energy_is_periodic_and_even(a in coeff(), b in coeff(), c in coeff(), p in vec3(),
                                   n in prop::array::uniform3(-3i64..4)) {
        let m = make_anferms(a, b, c).unwrap();
        let e = m.evaluate(&p);
        let shifted = m.evaluate(&(p + m.basis.lattice_vector(n)));
        prop_assert!((e - shifted).abs() < 1e-9 * m.amplitude_scale().max(1.0));
        prop_assert!((e - m.evaluate(&-p)).abs() < 1e-12 * m.amplitude_scale().max(1.0));
    }

    #[test]
    fn conductivity_frame_is_oriented(b in vec3(), eta in vec3()) {
        prop_assume!(b.normalize().cross(&eta.normalize()).norm() > 0.05);
        let t = conductivity_asymptotics(Regime::StableOpen, Some(eta), &b, None).unwrap();
        let f = t.frame;
        prop_assert_eq!(f.rule, FrameRule::OpenEta);
        prop_assert!((f.z - b.normalize()).norm() < 1e-12);
        prop_assert!(f.x.dot(&f.z).abs() < 1e-12 && f.y.dot(&f.z).abs() < 1e-12);
        prop_assert!((f.x.cross(&f.y) - f.z).norm() < 1e-12);
        let in_plane = (eta - f.z * f.z.dot(&eta)).normalize();
        prop_assert!((f.x - in_plane).norm() < 1e-12);
        prop_assert_eq!(t.exponents_in(&f), t.exponents);
        // rotation to the lab keeps the trace
        let own = t.evaluate(50.0);
        prop_assert!((t.evaluate_lab(50.0).trace() - own.trace()).abs() < 1e-9 * own.norm());
    }

    #[test]
    fn chaotic_exponents_are_symmetric(an in 1i64..12, gn in 1i64..12, d in 12i64..20) {
        let (alpha, gamma) = (Ratio::new(an, d), Ratio::new(gn, d));
        let e = chaotic_exponents(alpha, gamma);
        for i in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(e[i][k], e[k][i]);
            }
        }
        prop_assert_eq!(e[0][0] + e[1][1], Ratio::from_integer(-2));
        prop_assert_eq!(e[2][2], -gamma * 2);
        prop_assert_eq!(e[0][2] + e[1][2], -(gamma * 2) - 1);
    }

    #[test]
    fn trace_stays_on_the_curve(a in 0.6..1.0f64, b in -0.4..0.4f64, seed in vec3(), dir in vec3()) {
        let m = make_anferms(a, b, 0.0).unwrap();
        let level = 0.1 * a;
        let slice = PlaneSlice::new(&dir, dir.normalize().dot(&seed));
        let Some(p) = project_to_curve(&m, level, &slice, &seed) else { return Ok(()) };
        let opts = TraceOptions { max_arc: 200.0, ..TraceOptions::default() };
        let Ok(t) = trace(&m, level, &slice, &p, &opts) else { return Ok(()) };
        for q in &t.points {
            prop_assert!((m.evaluate(q) - level).abs() < 1e-8);
            prop_assert!((slice.b.dot(q) - slice.h).abs() < 1e-8);
        }
        prop_assert!(t.max_drift < 1e-8);
    }
}

#[test]
fn unsupported_inputs_are_rejected() {
    let b = Vec3::z();
    assert_eq!(
        conductivity_asymptotics(Regime::StableOpen, None, &b, None).unwrap_err(),
        TransportError::MissingEta
    );
    assert_eq!(
        conductivity_asymptotics(Regime::StableOpen, Some(Vec3::z()), &b, None).unwrap_err(),
        TransportError::DegenerateEta
    );
    assert_eq!(
        conductivity_asymptotics(Regime::Mixed, None, &b, None).unwrap_err(),
        TransportError::UnsupportedRegime(Regime::Mixed)
    );
    let bad = ChaoticParams {
        alpha: 1.0,
        gamma: 0.5,
        axis: None,
    };
    assert!(matches!(
        conductivity_asymptotics(Regime::ChaoticWandering, None, &b, Some(bad)),
        Err(TransportError::BadChaoticParams { .. })
    ));
    assert!(matches!(
        resistance_asymptotics(Regime::ChaoticWandering, None, &b).unwrap(),
        Resistance::PowerLawRange { .. }
    ));
}

#[test]
fn component_sum_takes_the_leading_exponent() {
    let b = Vec3::new(0.2, 0.1, 1.0);
    let closed = conductivity_asymptotics(Regime::AllClosed, None, &b, None).unwrap();
    let open = conductivity_asymptotics(Regime::StableOpen, Some(Vec3::x()), &b, None).unwrap();
    let sum = sum_components(&[open.clone(), closed.clone()], 1e4).unwrap();
    let (eo, ec) = (open.exponents_in(&sum.frame), closed.exponents_in(&sum.frame));
    for i in 0..3 {
        for k in 0..3 {
            assert_eq!(sum.exponents[i][k], eo[i][k].max(ec[i][k]));
        }
    }
    // open orbits dominate the in-plane component along the drift
    assert_eq!(sum.exponents[1][1], Ratio::from_integer(0));

    let other = conductivity_asymptotics(Regime::AllClosed, None, &Vec3::x(), None).unwrap();
    assert_eq!(
        sum_components(&[open, other], 1e4).unwrap_err(),
        TransportError::FrameMismatch
    );
    assert_eq!(sum_components(&[], 1e4).unwrap_err(), TransportError::FrameMismatch);
}
