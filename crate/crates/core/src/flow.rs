//! Flow of `W`, its inverse tangent map, and the pulled-back candidate field.
//!
//! The state propagated along a trajectory is `(x, M)` with `x' = W(x)` and
//! `M' = -M·DW(x)`, `M(0) = I`, so that `M(t) = T_{φ_t(p)} φ_{-t}` maps
//! vectors at `φ_t(p)` back to `p`. The pulled-back field is `M(t)·L(φ_t(p))`,
//! decomposed in the frame at `p`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Dual, FieldExpr, Scalar, ScalarExpr};
use crate::frame::{FrameAt, FramedDistribution};
use crate::integrate::{fixed_step, Integrator, IntegratorOptions};
use crate::orbit::ClosedOrbit;
use crate::scenes::SceneSpec;

/// Below this the pulled-back field counts as tangent to `W`.
pub const RHO_MIN: f64 = 1e-8;
/// Default number of samples per trace before adaptive refinement.
pub const DEFAULT_SAMPLES: usize = 256;
const MAX_REFINEMENTS: usize = 6;
/// Step used by the finite-difference cross-check of the angle rate.
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSeed {
    pub label: String,
    pub p0: Vec<f64>,
    #[serde(rename = "T0")]
    pub t0: f64,
}

/// A framed distribution, a candidate field and seeded closed orbits, on a
/// single chart with optional periodic coordinates.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub frame: FramedDistribution,
    pub candidate: FieldExpr,
    /// `(coordinate index, period)`, zero-based.
    pub periodic: Vec<(usize, f64)>,
    /// Coordinates renormalized onto the unit sphere after every step.
    pub sphere: Option<Vec<usize>>,
    pub orbits: Vec<OrbitSeed>,
    pub integrator: IntegratorOptions,
    pub spec: SceneSpec,
}

/// Phase applied to the candidate before pulling back: `R(eta + tau·g(x))∘L`.
#[derive(Debug, Clone, Default)]
pub struct Phase {
    pub eta: f64,
    pub bump: Option<(ScalarExpr, f64)>,
}

impl Phase {
    pub fn constant(eta: f64) -> Self {
        Phase { eta, bump: None }
    }
}

impl Scene {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn orbit(&self, label: &str) -> Result<&OrbitSeed> {
        self.orbits
            .iter()
            .find(|o| o.label == label)
            .ok_or_else(|| Error::UnknownOrbit(label.to_string()))
    }

    /// Reduce periodic coordinates into `[0, period)`.
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for &(i, per) in &self.periodic {
            out[i] = out[i].rem_euclid(per);
            if out[i] >= per {
                out[i] = 0.0;
            }
        }
        out
    }

    /// `a - b` with periodic differences taken in `(-period/2, period/2]`.
    pub fn wrapped_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        for &(i, per) in &self.periodic {
            d[i] -= per * (d[i] / per).round();
        }
        d
    }

    pub fn wrapped_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.wrapped_diff(a, b).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn project(&self, x: &mut [f64]) -> f64 {
        let Some(idx) = &self.sphere else { return 0.0 };
        let r = idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
        if r > 0.0 {
            for &i in idx {
                x[i] /= r;
            }
        }
        (r - 1.0).abs()
    }

    /// Unit-angle representative of the phased candidate at `x`:
    /// `cos ψ·A + sin ψ·B + (c/ρ)·W` with `ψ = atan2(b, a) + phase`, together
    /// with `ρ = |(a, b)|` of the raw candidate.
    ///
    /// Positive rescalings of `L` leave `ψ` unchanged, so angle data derived
    /// from this representative does not see them.
    pub fn unit_candidate<S: Scalar>(&self, x: &[S], phase: &Phase) -> Result<(Vec<S>, S)> {
        let l = self.candidate.eval_generic(x)?;
        let [a, b, c] = self.frame.decompose_generic(x, &l)?;
        let rho = (a * a + b * b).sqrt();
        if !(rho.value() > RHO_MIN) {
            return Err(Error::TangentToW {
                rho: rho.value(),
                t: f64::NAN,
            });
        }
        let mut psi = b.atan2(a);
        if phase.eta != 0.0 {
            psi = psi + S::cst(phase.eta);
        }
        if let Some((g, tau)) = &phase.bump {
            psi = psi + S::cst(*tau) * g.eval_generic(x)?;
        }
        let (cs, sn, cr) = (psi.cos(), psi.sin(), c / rho);
        let fa = self.frame.a.eval_generic(x)?;
        let fb = self.frame.b.eval_generic(x)?;
        let fw = self.frame.w.eval_generic(x)?;
        let v = (0..x.len()).map(|i| fa[i] * cs + fb[i] * sn + fw[i] * cr).collect();
        Ok((v, rho))
    }

    fn point_rhs(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let w = self.frame.w.eval_generic(x)?;
        dx.copy_from_slice(&w);
        Ok(())
    }

    /// `(x, M)` with `M' = -M·DW`, row-major.
    fn variational_rhs(&self, y: &[f64], dy: &mut [f64], n: usize) -> Result<()> {
        let x = &y[..n];
        let w = self.frame.w.eval_generic(x)?;
        dy[..n].copy_from_slice(&w);
        let dw = self.frame.w.jacobian(x)?;
        let m = &y[n..];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[i * n + k] * dw[(k, j)];
                }
                dy[n + i * n + j] = -s;
            }
        }
        Ok(())
    }

    /// `(x, P)` with `P' = DW·P` (forward tangent map).
    fn forward_rhs(&self, y: &[f64], dy: &mut [f64], n: usize) -> Result<()> {
        let x = &y[..n];
        let w = self.frame.w.eval_generic(x)?;
        dy[..n].copy_from_slice(&w);
        let dw = self.frame.w.jacobian(x)?;
        let p = &y[n..];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dw[(i, k)] * p[k * n + j];
                }
                dy[n + i * n + j] = s;
            }
        }
        Ok(())
    }
}

fn identity_state(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut y = p.to_vec();
    y.extend(DMatrix::<f64>::identity(n, n).transpose().iter());
    y
}

fn state_matrix(y: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, &y[n..])
}

fn check_point(scene: &Scene, p: &[f64]) -> Result<()> {
    if p.len() != scene.dim() {
        return Err(Error::Dimension {
            expected: scene.dim(),
            found: p.len(),
        });
    }
    Ok(())
}

/// `φ_t(p)`, with periodic coordinates wrapped into their fundamental domain.
pub fn advance(scene: &Scene, p: &[f64], t: f64) -> Result<Vec<f64>> {
    check_point(scene, p)?;
    let mut y = p.to_vec();
    let mut it = Integrator::new(scene.integrator);
    it.run(
        |_, x, dx| scene.point_rhs(x, dx),
        |x| {
            scene.project(x);
        },
        0.0,
        &mut y,
        t,
    )?;
    Ok(scene.wrap(&y))
}

/// Unwrapped `φ_t(p)` and the inverse tangent map `M(t)`.
pub fn inverse_tangent(scene: &Scene, p: &[f64], t: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_point(scene, p)?;
    let n = p.len();
    let mut y = identity_state(p);
    let mut it = Integrator::new(scene.integrator);
    it.run(
        |_, y, dy| scene.variational_rhs(y, dy, n),
        |y| {
            scene.project(&mut y[..n]);
        },
        0.0,
        &mut y,
        t,
    )?;
    Ok((y[..n].to_vec(), state_matrix(&y, n)))
}

/// Unwrapped `φ_t(p)` and the forward tangent map `T_p φ_t`.
pub fn forward_tangent(scene: &Scene, p: &[f64], t: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_point(scene, p)?;
    let n = p.len();
    let mut y = identity_state(p);
    let mut it = Integrator::new(scene.integrator);
    it.run(
        |_, y, dy| scene.forward_rhs(y, dy, n),
        |y| {
            scene.project(&mut y[..n]);
        },
        0.0,
        &mut y,
        t,
    )?;
    Ok((y[..n].to_vec(), state_matrix(&y, n)))
}

/// Everything the trace records at one instant.
#[derive(Debug, Clone, Copy)]
struct Sample {
    /// Unit-candidate pullback coefficients.
    ua: f64,
    ub: f64,
    uc: f64,
    /// `ρ` of the raw candidate at `φ_t(p)`.
    scale: f64,
    theta_dot: f64,
    residual: f64,
}

struct Pullback<'a> {
    scene: &'a Scene,
    base: FrameAt,
    phase: &'a Phase,
    n: usize,
}

impl<'a> Pullback<'a> {
    fn new(scene: &'a Scene, p: &[f64], phase: &'a Phase) -> Result<Self> {
        check_point(scene, p)?;
        Ok(Pullback {
            scene,
            base: scene.frame.at(p)?,
            phase,
            n: p.len(),
        })
    }

    fn unit_pullback(&self, x: &[f64], m: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
        let (lu, scale) = self.scene.unit_candidate(x, self.phase)?;
        Ok((m * DVector::from_vec(lu), scale))
    }

    /// Evaluate the sample at state `y = (x, M)` and time `t`.
    fn sample(&self, y: &[f64], t: f64) -> Result<Sample> {
        let n = self.n;
        let x = &y[..n];
        let m = state_matrix(y, n);
        let (lu, scale) = self.scene.unit_candidate(x, self.phase).map_err(|e| at_time(e, t))?;
        let lu = DVector::from_vec(lu);
        let u = &m * &lu;
        let d = self.base.decompose(&u);
        let residual = d.residual / u.norm().max(1.0);
        if residual > self.base.membership_tol {
            return Err(Error::FlowNotPreserving { residual, t });
        }
        let rho_true = scale * d.rho();
        if !(rho_true > RHO_MIN) {
            return Err(Error::TangentToW { rho: rho_true, t });
        }
        // d/dt M·L_u(x) = M·(D L_u·W - DW·L_u)
        let w = self.scene.frame.w.eval(x)?;
        let seeded: Vec<Dual> = x.iter().zip(w.iter()).map(|(&a, &b)| Dual::new(a, b)).collect();
        let (lu_dual, _) = self.scene.unit_candidate(&seeded, self.phase)?;
        let dl_w = DVector::from_iterator(n, lu_dual.iter().map(|d| d.d));
        let (_, dw_l) = self.scene.frame.w.jvp(x, lu.as_slice())?;
        let du = &m * (dl_w - dw_l);
        let dd = self.base.decompose(&du);
        let theta_dot = (d.a * dd.b - d.b * dd.a) / (d.a * d.a + d.b * d.b);
        Ok(Sample {
            ua: d.a,
            ub: d.b,
            uc: d.c,
            scale,
            theta_dot,
            residual,
        })
    }

    fn angle_at(&self, y: &[f64]) -> Result<f64> {
        let n = self.n;
        let m = state_matrix(y, n);
        let (u, _) = self.unit_pullback(&y[..n], &m)?;
        let d = self.base.decompose(&u);
        Ok(d.b.atan2(d.a))
    }

    /// Centered difference of the angle using one short step each way.
    fn theta_dot_fd(&self, y: &[f64]) -> Result<f64> {
        let n = self.n;
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| self.scene.variational_rhs(y, dy, n);
        let fwd = fixed_step(rhs, 0.0, y, FD_STEP)?;
        let bwd = fixed_step(rhs, 0.0, y, -FD_STEP)?;
        let d = wrap_pi(self.angle_at(&fwd)? - self.angle_at(&bwd)?);
        Ok(d / (2.0 * FD_STEP))
    }
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::TangentToW { rho, .. } => Error::TangentToW { rho, t },
        other => other,
    }
}

/// Reduce an angle difference into `(-π, π]`.
pub fn wrap_pi(d: f64) -> f64 {
    let r = d - TAU * (d / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Time series of the pulled-back candidate along one trajectory.
#[derive(Debug, Clone)]
pub struct PullbackTrace {
    pub p: Vec<f64>,
    pub period: f64,
    pub times: Vec<f64>,
    /// `φ_t(p)`, periodic coordinates wrapped.
    pub points: Vec<Vec<f64>>,
    /// `M(t) = T_{φ_t(p)} φ_{-t}` at each sample.
    pub m: Vec<DMatrix<f64>>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
    /// Continuous lift with `theta[0]` in `[0, 2π)`.
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub lambda_t: f64,
    pub max_residual: f64,
    pub sphere_drift: f64,
    states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub samples: usize,
    pub max_refinements: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            samples: DEFAULT_SAMPLES,
            max_refinements: MAX_REFINEMENTS,
        }
    }
}

/// Pull back the phased candidate along `φ_t(p)` for `t ∈ [0, period]`.
///
/// The sample grid is doubled until every angle increment is below `π/2`.
pub fn pullback_trace(scene: &Scene, p: &[f64], period: f64, phase: &Phase) -> Result<PullbackTrace> {
    pullback_trace_with(scene, p, period, phase, TraceOptions::default())
}

pub fn pullback_trace_with(
    scene: &Scene,
    p: &[f64],
    period: f64,
    phase: &Phase,
    opts: TraceOptions,
) -> Result<PullbackTrace> {
    let pb = Pullback::new(scene, p, phase)?;
    let mut samples = opts.samples.max(2);
    for _ in 0..=opts.max_refinements {
        if let Some(trace) = try_trace(&pb, p, period, samples)? {
            return Ok(trace);
        }
        samples *= 2;
    }
    Err(Error::Unwrap {
        refinements: opts.max_refinements,
    })
}

fn try_trace(pb: &Pullback<'_>, p: &[f64], period: f64, samples: usize) -> Result<Option<PullbackTrace>> {
    let scene = pb.scene;
    let n = pb.n;
    let mut opts = scene.integrator;
    let dt = period / samples as f64;
    opts.max_step = opts.max_step.min(dt.abs().max(1e-12));
    let mut it = Integrator::new(opts);
    let mut y = identity_state(p);
    let mut drift = 0.0f64;
    let cap = samples + 1;
    let mut tr = PullbackTrace {
        p: p.to_vec(),
        period,
        times: Vec::with_capacity(cap),
        points: Vec::with_capacity(cap),
        m: Vec::with_capacity(cap),
        a: Vec::with_capacity(cap),
        b: Vec::with_capacity(cap),
        c: Vec::with_capacity(cap),
        rho: Vec::with_capacity(cap),
        theta: Vec::with_capacity(cap),
        theta_dot: Vec::with_capacity(cap),
        lambda_t: f64::NAN,
        max_residual: 0.0,
        sphere_drift: 0.0,
        states: Vec::with_capacity(cap),
    };
    let mut prev_t = 0.0;
    for i in 0..=samples {
        let t = if i == samples { period } else { i as f64 * dt };
        it.run(
            |_, y, dy| scene.variational_rhs(y, dy, n),
            |y| {
                drift = drift.max(scene.project(&mut y[..n]));
            },
            prev_t,
            &mut y,
            t,
        )?;
        prev_t = t;
        let s = pb.sample(&y, t)?;
        let raw = s.ub.atan2(s.ua);
        let theta = match tr.theta.last() {
            None => raw.rem_euclid(TAU).min(TAU.next_down()),
            Some(&prev) => {
                let step = wrap_pi(raw - prev);
                if step.abs() >= PI / 2.0 {
                    return Ok(None);
                }
                prev + step
            }
        };
        tr.times.push(t);
        tr.points.push(scene.wrap(&y[..n]));
        tr.m.push(state_matrix(&y, n));
        tr.a.push(s.scale * s.ua);
        tr.b.push(s.scale * s.ub);
        tr.c.push(s.scale * s.uc);
        tr.rho.push(s.scale * s.ua.hypot(s.ub));
        tr.theta.push(theta);
        tr.theta_dot.push(s.theta_dot);
        tr.max_residual = tr.max_residual.max(s.residual);
        tr.states.push(y.clone());
    }
    tr.sphere_drift = drift;
    let last = tr.m.last().expect("at least two samples");
    let x_t = &tr.states.last().expect("at least two samples")[..n];
    tr.lambda_t = lambda_from_inverse(scene, p, x_t, last)?;
    Ok(Some(tr))
}

impl PullbackTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `theta[last] - theta[0]`.
    pub fn rotation(&self) -> f64 {
        self.theta[self.theta.len() - 1] - self.theta[0]
    }

    /// Angle rate by centered finite differences of the lifted angle, one
    /// short integration step either side of every sample.
    pub fn theta_dot_fd(&self, scene: &Scene, phase: &Phase) -> Result<Vec<f64>> {
        let pb = Pullback::new(scene, &self.p, phase)?;
        self.states.iter().map(|y| pb.theta_dot_fd(y)).collect()
    }

    /// CSV with columns `t, x1..xn, a, b, c, rho, theta, theta_dot`.
    pub fn to_csv(&self, meta: &str) -> String {
        let n = self.p.len();
        let mut out = String::new();
        if !meta.is_empty() {
            let _ = writeln!(out, "# {meta}");
        }
        out.push('t');
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",a,b,c,rho,theta,theta_dot\n");
        for i in 0..self.len() {
            let mut row = vec![self.times[i]];
            row.extend(&self.points[i]);
            row.extend([self.a[i], self.b[i], self.c[i], self.rho[i], self.theta[i], self.theta_dot[i]]);
            let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Seventeen significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `ω` of the forward images of `A(p), B(p)`, read off at `x_s = φ_s(p)`.
fn lambda_from_inverse(scene: &Scene, p: &[f64], x_s: &[f64], m: &DMatrix<f64>) -> Result<f64> {
    let fwd = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Integration {
            t: f64::NAN,
            msg: "inverse tangent map is singular".into(),
        })?;
    let here = scene.frame.at(p)?;
    let there = scene.frame.at(x_s)?;
    there.omega(&(&fwd * here.a()), &(&fwd * here.b()))
}

/// Conformal factor `λ(p; s)` with `(φ_s^* ω)_p = λ(p; s) ω_p`.
pub fn compute_lambda(scene: &Scene, p: &[f64], s: f64) -> Result<f64> {
    let (x_s, m) = inverse_tangent(scene, p, s)?;
    lambda_from_inverse(scene, p, &x_s, &m)
}

/// Conformal factor of the pullback `T_{φ_s(p)} φ_{-s}` on `E`:
/// `ω_p(M(s)u, M(s)v) = μ ω_{φ_s(p)}(u, v)`. Equals `1/λ(p; s)`.
pub fn pullback_factor(scene: &Scene, p: &[f64], s: f64) -> Result<f64> {
    let (x_s, m) = inverse_tangent(scene, p, s)?;
    let here = scene.frame.at(p)?;
    let there = scene.frame.at(&x_s)?;
    here.omega(&(&m * there.a()), &(&m * there.b()))
}

/// Pulled-back candidate at a single time `t`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PullbackPoint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho: f64,
    pub theta_dot: f64,
}

impl PullbackPoint {
    /// `ρ²·θ̇ = ω_p(L̃, dL̃/dt)`.
    pub fn rho2_theta_dot(&self) -> f64 {
        self.rho * self.rho * self.theta_dot
    }
}

pub fn pullback_at(scene: &Scene, p: &[f64], t: f64, phase: &Phase) -> Result<PullbackPoint> {
    let pb = Pullback::new(scene, p, phase)?;
    let n = p.len();
    let mut y = identity_state(p);
    let mut it = Integrator::new(scene.integrator);
    it.run(
        |_, y, dy| scene.variational_rhs(y, dy, n),
        |y| {
            scene.project(&mut y[..n]);
        },
        0.0,
        &mut y,
        t,
    )?;
    let s = pb.sample(&y, t)?;
    Ok(PullbackPoint {
        a: s.scale * s.ua,
        b: s.scale * s.ub,
        c: s.scale * s.uc,
        rho: s.scale * s.ua.hypot(s.ub),
        theta_dot: s.theta_dot,
    })
}

/// Functional identity of the angle rate along a trajectory:
/// `ρ²θ̇(p; t+s) = μ(p; s)·ρ²θ̇(φ_s(p); t)` with `μ` the pullback factor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FunctionalCheck {
    pub s: f64,
    pub t: f64,
    pub lhs: f64,
    /// `ρ²θ̇(φ_s(p); t)`
    pub shifted: f64,
    pub pullback_factor: f64,
    pub lambda: f64,
    /// Relative residual with the pullback factor.
    pub residual: f64,
    /// Relative residual when the forward factor `λ(p; s)` is used instead.
    pub forward_factor_residual: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn functional_check(scene: &Scene, p: &[f64], s: f64, t: f64, phase: &Phase) -> Result<FunctionalCheck> {
    let lhs = pullback_at(scene, p, t + s, phase)?.rho2_theta_dot();
    let q = advance(scene, p, s)?;
    let shifted = pullback_at(scene, &q, t, phase)?.rho2_theta_dot();
    let mu = pullback_factor(scene, p, s)?;
    let lambda = compute_lambda(scene, p, s)?;
    Ok(FunctionalCheck {
        s,
        t,
        lhs,
        shifted,
        pullback_factor: mu,
        lambda,
        residual: rel(lhs, mu * shifted),
        forward_factor_residual: rel(lhs, lambda * shifted),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `T_p φ_{-T}`
    Backward,
    /// `T_p φ_T`
    Forward,
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Backward => "backward",
            Convention::Forward => "forward",
        })
    }
}

/// Induced action on `E_p / W_p` in the basis `([A(p)], [B(p)])`,
/// normalized to `|det| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monodromy2 {
    pub q: [[f64; 2]; 2],
    pub det_sign: i8,
    /// `|det|` before normalization.
    pub raw_det: f64,
    pub convention: Convention,
}

impl Monodromy2 {
    pub fn from_matrix(m: [[f64; 2]; 2], convention: Convention) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.abs() >= 1e-12) {
            return Err(Error::DegenerateMonodromy { det: det.abs() });
        }
        let s = det.abs().sqrt();
        Ok(Monodromy2 {
            q: [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]],
            det_sign: if det > 0.0 { 1 } else { -1 },
            raw_det: det.abs(),
            convention,
        })
    }

    pub fn trace(&self) -> f64 {
        self.q[0][0] + self.q[1][1]
    }

    pub fn det(&self) -> f64 {
        self.q[0][0] * self.q[1][1] - self.q[0][1] * self.q[1][0]
    }

    pub fn inverse(&self) -> Monodromy2 {
        let d = self.det();
        let q = self.q;
        Monodromy2 {
            q: [[q[1][1] / d, -q[0][1] / d], [-q[1][0] / d, q[0][0] / d]],
            det_sign: self.det_sign,
            raw_det: 1.0 / self.raw_det,
            convention: match self.convention {
                Convention::Backward => Convention::Forward,
                Convention::Forward => Convention::Backward,
            },
        }
    }
}

/// Default closure tolerance for orbits.
pub const ORBIT_TOL: f64 = 1e-8;

/// Monodromy of a closed orbit in the backward convention.
pub fn monodromy(scene: &Scene, orbit: &ClosedOrbit) -> Result<Monodromy2> {
    monodromy_with(scene, orbit, Convention::Backward)
}

pub fn monodromy_with(scene: &Scene, orbit: &ClosedOrbit, convention: Convention) -> Result<Monodromy2> {
    let (x_t, m) = inverse_tangent(scene, &orbit.p, orbit.period)?;
    let defect = scene.wrapped_distance(&x_t, &orbit.p);
    if defect > ORBIT_TOL.max(orbit.closure_defect * 10.0) {
        return Err(Error::ClosureDefect {
            defect,
            tol: ORBIT_TOL,
        });
    }
    let here = scene.frame.at(&orbit.p)?;
    let ia = here.decompose(&(&m * here.a()));
    let ib = here.decompose(&(&m * here.b()));
    let back = Monodromy2::from_matrix([[ia.a, ib.a], [ia.b, ib.b]], Convention::Backward)?;
    Ok(match convention {
        Convention::Backward => back,
        Convention::Forward => back.inverse(),
    })
}
