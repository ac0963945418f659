use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use rotnum::flow::wrap_pi;
use rotnum::frame::FrameAt;
use rotnum::nms::{collar_turns, GraphNode, OrbitGraph};
use rotnum::orbit::DEFAULT_TRACE_TOL;
use rotnum::rotation::certificate_from_angles;
use rotnum::*;

type M2 = [[f64; 2]; 2];

fn mul(a: M2, b: M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn conj(q: M2, g: M2) -> M2 {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    mul(mul(g, q), gi)
}

fn classify(q: M2) -> OrbitClass {
    let m = Monodromy2::from_matrix(q, Convention::Backward).unwrap();
    classify_monodromy(&m, DEFAULT_TRACE_TOL).unwrap()
}

/// Unimodular matrices with bounded condition number.
fn sl2() -> impl Strategy<Value = M2> {
    (0.5f64..2.0, -1.0f64..1.0, -1.0f64..1.0, prop::bool::ANY).prop_map(|(a, b, c, flip)| {
        let a = if flip { -a } else { a };
        [[a, b], [c, (1.0 + b * c) / a]]
    })
}

fn sample_monodromy() -> impl Strategy<Value = (M2, OrbitKind)> {
    prop_oneof![
        (0.1f64..PI - 0.1).prop_map(|d| ([[d.cos(), -d.sin()], [d.sin(), d.cos()]], OrbitKind::Elliptic)),
        (0.1f64..3.0).prop_map(|mu| ([[(-mu).exp(), 0.0], [0.0, mu.exp()]], OrbitKind::Hyperbolic)),
        (0.2f64..2.0).prop_map(|k| ([[1.0, -k], [0.0, 1.0]], OrbitKind::PositiveParabolic)),
        (0.2f64..2.0).prop_map(|k| ([[1.0, k], [0.0, 1.0]], OrbitKind::NegativeParabolic)),
    ]
}

fn wiggly() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (
        0.5f64..4.0,
        0.05f64..3.0,
        prop::collection::vec((-1.5f64..1.5, 1u32..6), 1..4),
    )
        .prop_map(|(period, net, modes)| {
            let n = 300;
            let t: Vec<f64> = (0..=n).map(|i| period * i as f64 / n as f64).collect();
            let theta = t
                .iter()
                .map(|x| {
                    let u = x / period;
                    net * u + modes.iter().map(|(amp, k)| amp * (TAU * *k as f64 * u).sin()).sum::<f64>()
                })
                .collect();
            (t, theta, period)
        })
}

fn dag() -> impl Strategy<Value = OrbitGraph> {
    (1usize..9).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..4, n),
            prop::collection::vec((0..n, 0..n), 0..2 * n),
            Just(n),
        )
            .prop_map(|(idx, pairs, n)| OrbitGraph {
                nodes: (0..n)
                    .map(|i| GraphNode {
                        label: format!("o{i}"),
                        index: idx[i],
                    })
                    .collect(),
                edges: pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn classification_survives_conjugation((q, kind) in sample_monodromy(), g in sl2()) {
        let base = classify(q);
        prop_assert_eq!(base.kind, kind);
        let moved = classify(conj(q, g));
        prop_assert_eq!(moved.kind, kind);
        if matches!(kind, OrbitKind::Elliptic | OrbitKind::Hyperbolic) {
            prop_assert!((moved.parameter - base.parameter).abs() < 1e-6);
        }
    }

    #[test]
    fn inversion_is_stable((q, kind) in sample_monodromy()) {
        let m = Monodromy2::from_matrix(q, Convention::Backward).unwrap();
        let inv = classify_monodromy(&m.inverse(), DEFAULT_TRACE_TOL).unwrap();
        let base = classify(q);
        let expect = match kind {
            OrbitKind::PositiveParabolic => OrbitKind::NegativeParabolic,
            OrbitKind::NegativeParabolic => OrbitKind::PositiveParabolic,
            k => k,
        };
        prop_assert_eq!(inv.kind, expect);
        if matches!(kind, OrbitKind::Elliptic | OrbitKind::Hyperbolic) {
            prop_assert!((inv.parameter - base.parameter).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_round_trip(cols in prop::collection::vec(-2.0f64..2.0, 15), coef in prop::collection::vec(-3.0f64..3.0, 3)) {
        let mut m = DMatrix::from_column_slice(5, 3, &cols);
        // keep the columns comfortably independent
        for i in 0..3 {
            m[(i, i)] += 5.0;
        }
        let f = FrameAt::new(m, 1e-9).unwrap();
        let v = f.compose(coef[0], coef[1], coef[2]);
        let d = f.decompose_member(&v).unwrap();
        prop_assert!((d.a - coef[0]).abs() < 1e-10);
        prop_assert!((d.b - coef[1]).abs() < 1e-10);
        prop_assert!((d.c - coef[2]).abs() < 1e-10);
        let h = f.compose(coef[0], coef[1], 0.0);
        let jj = f.apply_j(&f.apply_j(&h).unwrap()).unwrap();
        prop_assert!((jj + &h).norm() < 1e-9 * h.norm().max(1.0));
        prop_assert!((f.omega(&f.a(), &f.b()).unwrap() - 1.0).abs() < 1e-12);
        let u = f.compose(coef[2], coef[0], coef[1]);
        prop_assert!((f.omega(&u, &v).unwrap() + f.omega(&v, &u).unwrap()).abs() < 1e-9);
        prop_assert!(f.omega(&f.w(), &v).unwrap().abs() < 1e-10);
    }

    #[test]
    fn off_span_vectors_are_rejected(cols in prop::collection::vec(-1.0f64..1.0, 12)) {
        let mut m = DMatrix::from_column_slice(4, 3, &cols);
        for i in 0..3 {
            m[(i, i)] += 4.0;
        }
        let f = FrameAt::new(m.clone(), 1e-9).unwrap();
        // generalized cross product of the three columns
        let cof = |i: usize| {
            let rows: Vec<usize> = (0..4).filter(|&r| r != i).collect();
            let minor = DMatrix::from_fn(3, 3, |r, c| m[(rows[r], c)]);
            if i.is_multiple_of(2) { minor.determinant() } else { -minor.determinant() }
        };
        let n = DVector::from_fn(4, |i, _| cof(i)).normalize();
        prop_assert!((m.transpose() * &n).norm() < 1e-12);
        prop_assert!(f.decompose_member(&n).is_err());
        prop_assert!((f.decompose(&n).residual - 1.0).abs() < 1e-9);
    }

    #[test]
    fn homotopy_is_monotone_with_fixed_ends((t, theta, period) in wiggly(), frac in 0.01f64..0.2) {
        let eps = frac * period;
        let at = |x: f64| {
            let i = t.partition_point(|v| *v <= x).clamp(1, t.len() - 1);
            let w = (x - t[i - 1]) / (t[i] - t[i - 1]);
            theta[i - 1] + w * (theta[i] - theta[i - 1])
        };
        prop_assume!(at(period - eps) - at(eps) > 1e-3);
        let cert = homotope_theta(&t, &theta, eps).unwrap();
        let last = cert.t.len() - 1;
        prop_assert!(cert.min_derivative > 0.0);
        prop_assert!(cert.psi1.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((cert.psi1[0] - cert.psi0[0]).abs() < 1e-9);
        prop_assert!((cert.psi1[last] - cert.psi0[last]).abs() < 1e-9);
        prop_assert!((cert.t[0] - eps).abs() < 1e-12 && (cert.t[last] - (period - eps)).abs() < 1e-12);
        let c = certificate_from_angles(&cert.t, &cert.psi1).unwrap();
        prop_assert_eq!(c.verdict, Verdict::Positive);
    }

    #[test]
    fn homotopy_rejects_non_increasing((t, theta, period) in wiggly()) {
        let eps = period / 10.0;
        let flipped: Vec<f64> = theta.iter().map(|x| -x).collect();
        let net = |v: &[f64]| {
            let lo = t.iter().position(|x| *x >= eps).unwrap();
            let hi = t.iter().rposition(|x| *x <= period - eps).unwrap();
            v[hi] - v[lo]
        };
        if net(&flipped) < -1e-2 {
            prop_assert!(matches!(homotope_theta(&t, &flipped, eps), Err(Error::Precondition(_))));
        }
        let last = t[t.len() - 1];
        prop_assert!(matches!(homotope_theta(&t, &theta, last / 2.0), Err(Error::Precondition(_))));
        prop_assert!(matches!(homotope_theta(&t, &theta, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn topological_order_is_valid(g in dag()) {
        let order = validate_orbit_graph(&g).unwrap();
        let mut pos = vec![usize::MAX; g.nodes.len()];
        for (k, &i) in order.iter().enumerate() {
            pos[i] = k;
        }
        prop_assert!(pos.iter().all(|&p| p != usize::MAX));
        for &(a, b) in &g.edges {
            prop_assert!(pos[a] < pos[b]);
        }
        prop_assert_eq!(validate_orbit_graph(&g).unwrap(), order);
    }

    #[test]
    fn planted_cycle_is_reported(g in dag(), len in 2usize..5) {
        let n = g.nodes.len();
        prop_assume!(n >= len);
        let mut g = g;
        for k in 0..len {
            g.edges.push((k, (k + 1) % len));
        }
        match validate_orbit_graph(&g) {
            Err(Error::Cycle(labels)) => {
                prop_assert!(labels.len() >= 3);
                prop_assert_eq!(labels.first(), labels.last());
            }
            other => prop_assert!(false, "expected cycle, got {:?}", other),
        }
    }

    #[test]
    fn collar_turns_cover_the_spread(f0 in prop::collection::vec(-5.0f64..5.0, 1..20), shift in prop::collection::vec(-20.0f64..20.0, 20)) {
        let f1: Vec<f64> = f0.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let turns = collar_turns(&f0, &f1).unwrap();
        let spread = f0.iter().zip(&f1).map(|(a, b)| b - a).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(turns >= 1);
        prop_assert!((turns - 1) as f64 * TAU >= spread - 1e-12);
    }

    #[test]
    fn wrap_pi_range(d in -1e3f64..1e3) {
        let w = wrap_pi(d);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        let k = ((d - w) / TAU).round();
        prop_assert!((d - w - k * TAU).abs() < 1e-9);
    }

    #[test]
    fn rendered_fields_reparse(c in prop::collection::vec(-5.0f64..5.0, 4), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let src = format!(
            "[{} * sin(x1) + x2^2; exp({} * x3) - cos(x1 * x2); ({}) / (2 + x1^2) - {}*sqrt(1 + x3^2)]",
            c[0], c[1], c[2], c[3]
        );
        let f = parse_field(&src, 3).unwrap();
        let g = parse_field(&f.render(), 3).unwrap();
        prop_assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        prop_assert_eq!(f.render(), g.render());
    }
}
