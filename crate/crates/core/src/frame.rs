//! The framed distribution `E = <W, A, B>`: frame decomposition of tangent
//! vectors, the 2-form `omega` (with `omega(A, B) = 1`, `i_W omega = 0`) and
//! the complex structure `J` (`JW = 0`, `JA = B`, `JB = -A`).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{FieldExpr, Scalar};

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-7;
/// Frames whose smallest singular value falls below this are degenerate.
pub const MIN_SINGULAR_VALUE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FramedDistribution {
    pub w: FieldExpr,
    pub a: FieldExpr,
    pub b: FieldExpr,
    pub membership_tol: f64,
}

/// `v = a·A(p) + b·B(p) + c·W(p)` up to `residual`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameDecomposition {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub residual: f64,
}

impl FrameDecomposition {
    pub fn rho(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

impl FramedDistribution {
    pub fn new(w: FieldExpr, a: FieldExpr, b: FieldExpr) -> Result<Self> {
        let n = w.dim();
        for f in [&a, &b] {
            if f.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: f.dim(),
                });
            }
        }
        if n < 3 {
            return Err(Error::Dimension {
                expected: 3,
                found: n,
            });
        }
        Ok(FramedDistribution {
            w,
            a,
            b,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    /// Columns `[A(p), B(p), W(p)]`.
    pub fn frame_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let cols = [self.a.eval(p)?, self.b.eval(p)?, self.w.eval(p)?];
        Ok(DMatrix::from_columns(&cols))
    }

    /// Factor the frame at `p` for repeated decompositions there.
    pub fn at(&self, p: &[f64]) -> Result<FrameAt> {
        FrameAt::new(self.frame_matrix(p)?, self.membership_tol)
    }

    /// Frame coefficients of `v` at a point, over any scalar type.
    ///
    /// Solves the 3x3 normal equations; used where derivatives of the
    /// decomposition are needed (dual numbers flow straight through).
    pub fn decompose_generic<S: Scalar>(&self, p: &[S], v: &[S]) -> Result<[S; 3]> {
        let cols = [
            self.a.eval_generic(p)?,
            self.b.eval_generic(p)?,
            self.w.eval_generic(p)?,
        ];
        let dot = |x: &[S], y: &[S]| {
            x.iter()
                .zip(y)
                .fold(S::cst(0.0), |acc, (&u, &w)| acc + u * w)
        };
        // unit columns keep the Gram matrix well conditioned when |W| is large
        let norms = cols.clone().map(|c| dot(&c, &c).sqrt());
        if norms.iter().any(|n| !(n.value() > 0.0)) {
            return Err(Error::DegenerateFrame { sigma: 0.0 });
        }
        let cols: [Vec<S>; 3] = std::array::from_fn(|i| cols[i].iter().map(|&x| x / norms[i]).collect());
        let mut g = [[S::cst(0.0); 3]; 3];
        let mut rhs = [S::cst(0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = dot(&cols[i], &cols[j]);
            }
            rhs[i] = dot(&cols[i], v);
        }
        let x = solve3(g, rhs).ok_or(Error::DegenerateFrame { sigma: 0.0 })?;
        Ok(std::array::from_fn(|i| x[i] / norms[i]))
    }
}

fn det3<S: Scalar>(m: &[[S; 3]; 3]) -> S {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3<S: Scalar>(g: [[S; 3]; 3], rhs: [S; 3]) -> Option<[S; 3]> {
    let d = det3(&g);
    // squared volume of three unit vectors
    if !(d.value().abs() > MIN_SINGULAR_VALUE * MIN_SINGULAR_VALUE) {
        return None;
    }
    let mut out = [S::cst(0.0); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut m = g;
        for i in 0..3 {
            m[i][k] = rhs[i];
        }
        *slot = det3(&m) / d;
    }
    Some(out)
}

/// A frame evaluated and factored at one point.
#[derive(Debug, Clone)]
pub struct FrameAt {
    frame: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    pub sigma_min: f64,
    pub membership_tol: f64,
}

impl FrameAt {
    pub fn new(frame: DMatrix<f64>, membership_tol: f64) -> Result<Self> {
        let sv = frame.clone().svd(false, false).singular_values;
        let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(sigma_min > MIN_SINGULAR_VALUE) {
            return Err(Error::DegenerateFrame { sigma: sigma_min });
        }
        let qr = frame.clone().qr();
        Ok(FrameAt {
            q: qr.q(),
            r: qr.r(),
            frame,
            sigma_min,
            membership_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn a(&self) -> DVector<f64> {
        self.frame.column(0).into_owned()
    }

    pub fn b(&self) -> DVector<f64> {
        self.frame.column(1).into_owned()
    }

    pub fn w(&self) -> DVector<f64> {
        self.frame.column(2).into_owned()
    }

    /// Least-squares coefficients and the norm of the defect.
    pub fn decompose(&self, v: &DVector<f64>) -> FrameDecomposition {
        let qtv = self.q.transpose() * v;
        let coef = self
            .r
            .solve_upper_triangular(&qtv)
            .expect("R is invertible once the frame passed the singular value check");
        let residual = (v - &self.frame * &coef).norm();
        FrameDecomposition {
            a: coef[0],
            b: coef[1],
            c: coef[2],
            residual,
        }
    }

    /// Decompose, rejecting vectors outside the distribution.
    pub fn decompose_member(&self, v: &DVector<f64>) -> Result<FrameDecomposition> {
        let d = self.decompose(v);
        let tol = self.membership_tol * v.norm().max(1.0);
        if d.residual > tol {
            return Err(Error::Membership {
                residual: d.residual,
                tol,
            });
        }
        Ok(d)
    }

    pub fn compose(&self, a: f64, b: f64, c: f64) -> DVector<f64> {
        &self.frame * DVector::from_vec(vec![a, b, c])
    }

    pub fn omega(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let du = self.decompose_member(u)?;
        let dv = self.decompose_member(v)?;
        Ok(du.a * dv.b - du.b * dv.a)
    }

    pub fn apply_j(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.decompose_member(v)?;
        Ok(self.compose(-d.b, d.a, 0.0))
    }
}

/// Frame coefficients of `v` at `p`, with the distance of `v` to the span.
pub fn decompose_in_frame(v: &DVector<f64>, p: &[f64], e: &FramedDistribution) -> Result<FrameDecomposition> {
    Ok(e.at(p)?.decompose(v))
}

pub fn omega(u: &DVector<f64>, v: &DVector<f64>, p: &[f64], e: &FramedDistribution) -> Result<f64> {
    e.at(p)?.omega(u, v)
}

pub fn apply_j(v: &DVector<f64>, p: &[f64], e: &FramedDistribution) -> Result<DVector<f64>> {
    e.at(p)?.apply_j(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_field;
    use proptest::prelude::*;

    fn sol4_like() -> FramedDistribution {
        FramedDistribution::new(
            parse_field("[1; x2; -x3; 0]", 4).unwrap(),
            parse_field("[0; 1; 0; 0]", 4).unwrap(),
            parse_field("[0; 0; 1; x2]", 4).unwrap(),
        )
        .unwrap()
    }

    fn skew3() -> FramedDistribution {
        FramedDistribution::new(
            parse_field("[1; 0.3*x2; x1]", 3).unwrap(),
            parse_field("[cos(x3); sin(x3); 0.2]", 3).unwrap(),
            parse_field("[-sin(x3); cos(x3); x1]", 3).unwrap(),
        )
        .unwrap()
    }

    const P: [f64; 4] = [0.1, 0.7, -0.4, 0.25];

    #[test]
    fn frame_vectors_decompose_to_unit_coefficients() {
        let e = sol4_like();
        let f = e.at(&P).unwrap();
        let da = f.decompose(&f.a());
        assert!((da.a - 1.0).abs() < 1e-14 && da.b.abs() < 1e-14 && da.c.abs() < 1e-14);
        assert!(da.residual < 1e-14);
        let dw = f.decompose(&f.w());
        assert!(dw.a.abs() < 1e-14 && dw.b.abs() < 1e-14 && (dw.c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_vector_reports_full_residual() {
        let e = sol4_like();
        let f = e.at(&P).unwrap();
        // orthogonal complement of span{A, B, W} in R^4
        let m = e.frame_matrix(&P).unwrap();
        let full = nalgebra::DMatrix::<f64>::identity(4, 4) - &m * (m.transpose() * &m).try_inverse().unwrap() * m.transpose();
        let v = full.column(0).into_owned() * 3.0;
        let d = f.decompose(&v);
        assert!((d.residual - v.norm()).abs() < 1e-12);
        assert!(matches!(f.decompose_member(&v), Err(Error::Membership { .. })));
    }

    #[test]
    fn degenerate_frame_rejected() {
        let e = FramedDistribution::new(
            parse_field("[1; 0; 0]", 3).unwrap(),
            parse_field("[1; 0; 0]", 3).unwrap(),
            parse_field("[0; 1; 0]", 3).unwrap(),
        )
        .unwrap();
        assert!(matches!(e.at(&[0.0, 0.0, 0.0]), Err(Error::DegenerateFrame { .. })));
    }

    #[test]
    fn omega_and_j_on_frame() {
        let e = sol4_like();
        let f = e.at(&P).unwrap();
        assert!((f.omega(&f.a(), &f.b()).unwrap() - 1.0).abs() < 1e-14);
        let v = f.compose(0.3, -2.0, 5.0);
        assert!(f.omega(&f.w(), &v).unwrap().abs() < 1e-14);
        assert!((f.omega(&(f.a() + f.b()), &f.b()).unwrap() - 1.0).abs() < 1e-14);
        assert!((f.apply_j(&f.a()).unwrap() - f.b()).norm() < 1e-14);
        assert!(f.apply_j(&f.w()).unwrap().norm() < 1e-14);
        let jja = f.apply_j(&f.apply_j(&f.a()).unwrap()).unwrap();
        assert!((jja + f.a()).norm() < 1e-14);
    }

    #[test]
    fn generic_decomposition_agrees_with_qr() {
        let e = skew3();
        let p = [0.4, -0.3, 1.1];
        let f = e.at(&p).unwrap();
        let v = f.compose(0.7, -1.3, 0.4);
        let g = e.decompose_generic(&p, v.as_slice()).unwrap();
        assert!((g[0] - 0.7).abs() < 1e-12 && (g[1] + 1.3).abs() < 1e-12 && (g[2] - 0.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn omega_is_j_invariant(a1 in -5.0..5.0f64, b1 in -5.0..5.0f64, c1 in -5.0..5.0f64,
                                a2 in -5.0..5.0f64, b2 in -5.0..5.0f64, c2 in -5.0..5.0f64,
                                s in -1.0..1.0f64) {
            let e = skew3();
            let f = e.at(&[s, 0.5 * s, 2.0 * s]).unwrap();
            let x = f.compose(a1, b1, c1);
            let y = f.compose(a2, b2, c2);
            let lhs = f.omega(&f.apply_j(&x).unwrap(), &f.apply_j(&y).unwrap()).unwrap();
            let rhs = f.omega(&x, &y).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn omega_x_jx_is_nonnegative(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
            let e = skew3();
            let f = e.at(&[0.2, -0.1, 0.3]).unwrap();
            let x = f.compose(a, b, c);
            let q = f.omega(&x, &f.apply_j(&x).unwrap()).unwrap();
            prop_assert!(q >= -1e-12);
            prop_assert!((q - (a * a + b * b)).abs() < 1e-9 * (1.0 + q));
            // zero exactly on the W line
            let qw = f.omega(&f.compose(0.0, 0.0, c), &f.apply_j(&f.compose(0.0, 0.0, c)).unwrap()).unwrap();
            prop_assert!(qw.abs() < 1e-12);
        }

        #[test]
        fn decomposition_round_trips(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
            let e = sol4_like();
            let f = e.at(&P).unwrap();
            let d = f.decompose(&f.compose(a, b, c));
            prop_assert!((d.a - a).abs() < 1e-12 && (d.b - b).abs() < 1e-12 && (d.c - c).abs() < 1e-12);
            prop_assert!(d.residual < 1e-12);
        }
    }
}
