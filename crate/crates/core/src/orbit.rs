//! Closed-orbit refinement and classification of the monodromy.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{forward_tangent, Convention, Monodromy2, OrbitSeed, Scene, ORBIT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedOrbit {
    pub label: String,
    pub p: Vec<f64>,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "defect")]
    pub closure_defect: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest Newton correction accepted; a larger one means the seed is
    /// not near a closed orbit.
    pub max_correction: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tol: ORBIT_TOL,
            max_iter: 30,
            max_correction: 0.1,
        }
    }
}

pub fn refine_orbit(scene: &Scene, seed: &OrbitSeed) -> Result<ClosedOrbit> {
    refine_orbit_with(scene, seed, RefineOptions::default())
}

/// Newton iteration for `φ_T(q) = q` with `q` on the hyperplane through `p0`
/// normal to `W(p0)`, solving for `q` and `T` together. The linear systems are
/// solved in the least-squares sense, so neutral directions (continuous
/// families of closed orbits) do not stall the iteration.
pub fn refine_orbit_with(scene: &Scene, seed: &OrbitSeed, opts: RefineOptions) -> Result<ClosedOrbit> {
    let n = scene.dim();
    if seed.p0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: seed.p0.len(),
        });
    }
    let w0 = scene.frame.w.eval(&seed.p0)?;
    if w0.norm() < 1e-12 {
        return Err(Error::DegenerateReturn(format!(
            "W vanishes at the seed of `{}`",
            seed.label
        )));
    }
    let mut q = seed.p0.clone();
    let mut period = seed.t0;
    for _ in 0..=opts.max_iter {
        let (x_t, p_t) = forward_tangent(scene, &q, period)?;
        let gap = scene.wrapped_diff(&x_t, &q);
        let defect = gap.iter().map(|v| v * v).sum::<f64>().sqrt();
        if defect < opts.tol {
            return Ok(ClosedOrbit {
                label: seed.label.clone(),
                p: scene.wrap(&q),
                period,
                closure_defect: defect,
            });
        }
        let w_t = scene.frame.w.eval(&x_t)?;
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = p_t[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, n)] = w_t[i];
            jac[(n, i)] = w0[i];
            rhs[i] = -gap[i];
        }
        rhs[n] = -q.iter().zip(&seed.p0).zip(w0.iter()).map(|((a, b), w)| (a - b) * w).sum::<f64>();
        let svd = jac.svd(true, true);
        if svd.singular_values.max() < 1e-12 {
            return Err(Error::DegenerateReturn("return-map derivative vanishes".into()));
        }
        let tol = 1e-10 * svd.singular_values.max();
        let step = svd
            .solve(&rhs, tol)
            .map_err(|e| Error::DegenerateReturn(e.to_string()))?;
        let size = step.norm();
        if !size.is_finite() || size > opts.max_correction {
            return Err(Error::NoConvergence(format!(
                "orbit `{}`: Newton correction {size:.3e} exceeds {:.3e}; no closed orbit near the seed",
                seed.label, opts.max_correction
            )));
        }
        for i in 0..n {
            q[i] += step[i];
        }
        period += step[n];
        if !(period > 0.0) {
            return Err(Error::NoConvergence(format!("orbit `{}`: period collapsed", seed.label)));
        }
    }
    Err(Error::NoConvergence(format!(
        "orbit `{}`: no convergence in {} iterations",
        seed.label, opts.max_iter
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitKind {
    Elliptic,
    PositiveParabolic,
    NegativeParabolic,
    Hyperbolic,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitClass {
    pub kind: OrbitKind,
    /// Rotation angle (elliptic), log of the larger eigenvalue (hyperbolic),
    /// or shear magnitude (parabolic).
    pub parameter: f64,
    #[serde(rename = "trace")]
    pub trace_value: f64,
    pub convention: Convention,
}

pub const DEFAULT_TRACE_TOL: f64 = 1e-6;

pub fn classify_monodromy(m: &Monodromy2, tol_tr: f64) -> Result<OrbitClass> {
    let det = m.det();
    if (det.abs() - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { det });
    }
    let q = m.q;
    let tr = m.trace();
    let tau = tr.abs();
    let class = |kind, parameter| OrbitClass {
        kind,
        parameter,
        trace_value: tr,
        convention: m.convention,
    };
    if tau < 2.0 - tol_tr {
        return Ok(class(OrbitKind::Elliptic, (tr / 2.0).clamp(-1.0, 1.0).acos()));
    }
    if tau > 2.0 + tol_tr {
        return Ok(class(OrbitKind::Hyperbolic, (tau / 2.0).acosh()));
    }
    let sup_dist = |s: f64| {
        let e = [[q[0][0] - s, q[0][1]], [q[1][0], q[1][1] - s]];
        e.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()))
    };
    if sup_dist(1.0) <= tol_tr {
        return Ok(class(OrbitKind::Elliptic, 0.0));
    }
    if sup_dist(-1.0) <= tol_tr {
        return Ok(class(OrbitKind::Elliptic, std::f64::consts::PI));
    }
    // Q' = ±Q with trace near +2; N = Q' - I is nilpotent up to rounding.
    let s = if tr >= 0.0 { 1.0 } else { -1.0 };
    let nm = [[s * q[0][0] - 1.0, s * q[0][1]], [s * q[1][0], s * q[1][1] - 1.0]];
    let norm = nm.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let det_n = nm[0][0] * nm[1][1] - nm[0][1] * nm[1][0];
    if det_n.abs() > tol_tr.sqrt() * norm * norm {
        return Ok(class(OrbitKind::Ambiguous, f64::NAN));
    }
    // Orientation of (u, N u) fixes the sign of the normal form
    // [[1, k], [0, 1]] in any positively oriented basis: sign(k) = -sign det[u, Nu].
    let c0 = (nm[0][0], nm[1][0]);
    let c1 = (nm[0][1], nm[1][1]);
    // any u outside ker N will do; take the basis vector of the larger column
    let u = if c0.0.hypot(c0.1) >= c1.0.hypot(c1.1) {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let nu = (nm[0][0] * u.0 + nm[0][1] * u.1, nm[1][0] * u.0 + nm[1][1] * u.1);
    let orient = u.0 * nu.1 - u.1 * nu.0;
    if orient.abs() <= tol_tr * norm {
        return Ok(class(OrbitKind::Ambiguous, f64::NAN));
    }
    // positive parabolic: off-diagonal entry of the normal form has sign
    // opposite to the diagonal entries, i.e. k < 0 for Q' = [[1, k], [0, 1]]
    let kind = if orient > 0.0 {
        OrbitKind::PositiveParabolic
    } else {
        OrbitKind::NegativeParabolic
    };
    Ok(class(kind, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::monodromy;
    use crate::scenes::builtin_scene;
    use std::collections::BTreeMap;

    fn m(q: [[f64; 2]; 2]) -> Monodromy2 {
        Monodromy2::from_matrix(q, Convention::Backward).unwrap()
    }

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn rotation_is_elliptic() {
        let (c, s) = (1.0f64.cos(), 1.0f64.sin());
        let k = classify_monodromy(&m([[c, -s], [s, c]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(k.kind, OrbitKind::Elliptic);
        assert!((k.parameter - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_hyperbolic() {
        let e = std::f64::consts::E;
        let k = classify_monodromy(&m([[1.0 / e, 0.0], [0.0, e]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(k.kind, OrbitKind::Hyperbolic);
        assert!((k.parameter - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shear_signs() {
        let pos = classify_monodromy(&m([[1.0, -1.0], [0.0, 1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(pos.kind, OrbitKind::PositiveParabolic);
        let neg = classify_monodromy(&m([[1.0, 1.0], [0.0, 1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(neg.kind, OrbitKind::NegativeParabolic);
        let neg2 = classify_monodromy(&m([[-1.0, 1.0], [0.0, -1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(neg2.kind, OrbitKind::PositiveParabolic);
        let low = classify_monodromy(&m([[1.0, 0.0], [1.0, 1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(low.kind, OrbitKind::PositiveParabolic);
    }

    #[test]
    fn identity_is_elliptic_zero() {
        let k = classify_monodromy(&m([[1.0, 0.0], [0.0, 1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!((k.kind, k.parameter), (OrbitKind::Elliptic, 0.0));
        let k = classify_monodromy(&m([[-1.0, 0.0], [0.0, -1.0]]), DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(k.kind, OrbitKind::Elliptic);
        assert_eq!(k.parameter, std::f64::consts::PI);
    }

    #[test]
    fn unnormalized_rejected() {
        let bad = Monodromy2 {
            q: [[2.0, 0.0], [0.0, 2.0]],
            det_sign: 1,
            raw_det: 4.0,
            convention: Convention::Backward,
        };
        assert!(matches!(
            classify_monodromy(&bad, DEFAULT_TRACE_TOL),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn exact_seed_unchanged() {
        let s = builtin_scene("elliptic_model", &params(&[("delta", 1.3), ("T", 1.0)])).unwrap();
        let o = refine_orbit(&s, &s.orbits[0]).unwrap();
        assert_eq!(o.p, vec![0.0; 3]);
        assert_eq!(o.period, 1.0);
        assert!(o.closure_defect < 1e-12);
    }

    #[test]
    fn perturbed_seed_converges() {
        let s = builtin_scene("elliptic_model", &params(&[("delta", 1.3), ("T", 1.0)])).unwrap();
        let mut seed = s.orbits[0].clone();
        seed.p0 = vec![0.0, 1e-3, -1e-3];
        seed.t0 = 1.0005;
        let o = refine_orbit(&s, &seed).unwrap();
        assert!((o.period - 1.0).abs() < 1e-9, "{}", o.period);
        assert!(o.p[1].abs() < 1e-8 && o.p[2].abs() < 1e-8);
    }

    #[test]
    fn sol4_off_orbit_fails() {
        let s = builtin_scene("sol4_model", &params(&[("T", 1.0)])).unwrap();
        let mut seed = s.orbits[0].clone();
        seed.p0 = vec![0.0, 0.5, 0.3, 0.0];
        assert!(matches!(refine_orbit(&s, &seed), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn sol4_monodromy() {
        let s = builtin_scene("sol4_model", &params(&[("T", 1.0)])).unwrap();
        let o = refine_orbit(&s, &s.orbits[0]).unwrap();
        let q = monodromy(&s, &o).unwrap();
        let e = std::f64::consts::E;
        assert!((q.q[0][0] - 1.0 / e).abs() < 1e-8);
        assert!((q.q[1][1] - e).abs() < 1e-8);
        assert!((q.trace() - 2.0 * 1.0f64.cosh()).abs() < 1e-8);
        let k = classify_monodromy(&q, DEFAULT_TRACE_TOL).unwrap();
        assert_eq!(k.kind, OrbitKind::Hyperbolic);
    }

    #[test]
    fn parabolic_model_labels() {
        for (sign, kind) in [(1.0, OrbitKind::PositiveParabolic), (-1.0, OrbitKind::NegativeParabolic)] {
            let s = builtin_scene("parabolic_model", &params(&[("sign", sign)])).unwrap();
            let o = refine_orbit(&s, &s.orbits[0]).unwrap();
            let q = monodromy(&s, &o).unwrap();
            assert!((q.q[0][1] + sign).abs() < 1e-8);
            let k = classify_monodromy(&q, DEFAULT_TRACE_TOL).unwrap();
            assert_eq!(k.kind, kind);
            assert!((k.parameter - 1.0).abs() < 1e-8);
        }
    }
}
