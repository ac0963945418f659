//! Rotation numbers of the pulled-back candidate, their dependence on the
//! initial phase, and sign certificates for the angle rate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fmt17, pullback_trace, Phase, PullbackTrace, Scene};
use crate::orbit::ClosedOrbit;

/// Rates with magnitude at or below this count as zero.
pub const THETA_DOT_MIN: f64 = 1e-9;
/// Strict threshold for "positive" maxrot decisions.
pub const THETA_POS: f64 = 0.05;
pub const DEFAULT_PHASE_SAMPLES: usize = 64;
const GOLDEN_TOL: f64 = 1e-6;
const GOLDEN_MAX_ITER: usize = 40;

/// Analytic angle rates next to their finite-difference cross-check.
#[derive(Debug, Clone)]
pub struct ThetaDotSeries {
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub max_discrepancy: f64,
}

pub fn theta_dot_series(trace: &PullbackTrace, scene: &Scene, phase: &Phase) -> Result<ThetaDotSeries> {
    if let Some((i, &rho)) = trace
        .rho
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r > crate::flow::RHO_MIN))
    {
        return Err(Error::TangentToW { rho, t: trace.times[i] });
    }
    let fd = trace.theta_dot_fd(scene, phase)?;
    let max_discrepancy = trace
        .theta_dot
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ThetaDotSeries {
        analytic: trace.theta_dot.clone(),
        finite_difference: fd,
        max_discrepancy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Negative,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationCertificate {
    pub verdict: Verdict,
    pub min_abs_theta_dot: f64,
    pub witness_time: f64,
}

/// Verdict from the sign of the angle rate along a trace.
pub fn generation_certificate(trace: &PullbackTrace) -> GenerationCertificate {
    certificate_from_rates(&trace.times, &trace.theta_dot)
}

pub fn certificate_from_rates(times: &[f64], rates: &[f64]) -> GenerationCertificate {
    let mut min_abs = f64::INFINITY;
    let mut witness = f64::NAN;
    let (mut all_pos, mut all_neg) = (true, true);
    for (&t, &r) in times.iter().zip(rates) {
        if r.abs() < min_abs {
            min_abs = r.abs();
            witness = t;
        }
        all_pos &= r > THETA_DOT_MIN;
        all_neg &= r < -THETA_DOT_MIN;
    }
    let verdict = if rates.is_empty() {
        Verdict::Fails
    } else if all_pos {
        Verdict::Positive
    } else if all_neg {
        Verdict::Negative
    } else {
        Verdict::Fails
    };
    GenerationCertificate {
        verdict,
        min_abs_theta_dot: min_abs,
        witness_time: witness,
    }
}

/// Certificate for sampled angle data, using forward differences.
pub fn certificate_from_angles(times: &[f64], angles: &[f64]) -> Result<GenerationCertificate> {
    if times.len() != angles.len() {
        return Err(Error::GridMismatch(times.len(), angles.len()));
    }
    let (t, r): (Vec<f64>, Vec<f64>) = times
        .windows(2)
        .zip(angles.windows(2))
        .map(|(t, a)| (t[0], (a[1] - a[0]) / (t[1] - t[0])))
        .unzip();
    Ok(certificate_from_rates(&t, &r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub samples: usize,
    pub min_rho: f64,
    pub min_abs_theta_dot: f64,
    /// `+1` or `-1` when the rate has constant sign, else `0`.
    pub theta_dot_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationResult {
    pub orbit: String,
    pub eta: f64,
    pub rot: f64,
    pub verdict: Verdict,
    pub summary: TraceSummary,
    pub lambda_t: f64,
}

pub fn summarize(trace: &PullbackTrace) -> (TraceSummary, Verdict) {
    let cert = generation_certificate(trace);
    let sign = match cert.verdict {
        Verdict::Positive => 1,
        Verdict::Negative => -1,
        Verdict::Fails => 0,
    };
    let summary = TraceSummary {
        samples: trace.len(),
        min_rho: trace.rho.iter().copied().fold(f64::INFINITY, f64::min),
        min_abs_theta_dot: cert.min_abs_theta_dot,
        theta_dot_sign: sign,
    };
    (summary, cert.verdict)
}

pub fn orbit_trace(scene: &Scene, orbit: &ClosedOrbit, phase: &Phase) -> Result<PullbackTrace> {
    pullback_trace(scene, &orbit.p, orbit.period, phase)
}

/// `θ(p; T) - θ(p; 0)` for `R(eta)∘L`.
pub fn rotation_number(scene: &Scene, orbit: &ClosedOrbit, eta: f64) -> Result<RotationResult> {
    let trace = orbit_trace(scene, orbit, &Phase::constant(eta))?;
    let (summary, verdict) = summarize(&trace);
    Ok(RotationResult {
        orbit: orbit.label.clone(),
        eta,
        rot: trace.rotation(),
        verdict,
        summary,
        lambda_t: trace.lambda_t,
    })
}

fn phi(scene: &Scene, orbit: &ClosedOrbit, eta: f64) -> Result<f64> {
    Ok(orbit_trace(scene, orbit, &Phase::constant(eta))?.rotation())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseProfile {
    pub orbit: String,
    pub etas: Vec<f64>,
    pub phis: Vec<f64>,
    pub maxrot: f64,
    pub argmax_eta: f64,
    pub refined: bool,
    /// `max |Φ(η + π) - Φ(η)|` over the checked wrap-around samples.
    pub wrap_residual: f64,
}

/// Evaluate `Φ` on an even grid of `[0, π)` and optionally refine the
/// maximum by golden-section search around the best grid point.
pub fn phase_profile(scene: &Scene, orbit: &ClosedOrbit, n_samples: usize, refine: bool) -> Result<PhaseProfile> {
    if n_samples == 0 {
        return Err(Error::Precondition("phase grid needs at least one sample".into()));
    }
    let h = PI / n_samples as f64;
    let etas: Vec<f64> = (0..n_samples).map(|i| i as f64 * h).collect();
    let phis = etas
        .par_iter()
        .map(|&eta| phi(scene, orbit, eta))
        .collect::<Result<Vec<f64>>>()?;
    let (k, &grid_max) = phis
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let wrap_checks = [0, k];
    let wrap_residual = wrap_checks
        .par_iter()
        .map(|&i| Ok((phi(scene, orbit, etas[i] + PI)? - phis[i]).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let (mut maxrot, mut argmax) = (grid_max, etas[k]);
    if refine && n_samples > 1 {
        let (eta, val) = golden_max(|eta| phi(scene, orbit, eta), etas[k] - h, etas[k] + h)?;
        if val > maxrot {
            maxrot = val;
            argmax = eta.rem_euclid(PI);
        }
    }
    Ok(PhaseProfile {
        orbit: orbit.label.clone(),
        etas,
        phis,
        maxrot,
        argmax_eta: argmax,
        refined: refine && n_samples > 1,
        wrap_residual,
    })
}

/// Golden-section maximization on `[lo, hi]`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..GOLDEN_MAX_ITER {
        if hi - lo < GOLDEN_TOL {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

impl PhaseProfile {
    pub fn min_phi(&self) -> f64 {
        self.phis.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |Φ(η) - Φ(0)|` over the grid.
    pub fn spread_from_zero(&self) -> f64 {
        self.phis.iter().map(|p| (p - self.phis[0]).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self, meta: &str) -> String {
        let mut out = String::new();
        if !meta.is_empty() {
            let _ = writeln!(out, "# {meta}");
        }
        out.push_str("eta,phi\n");
        for (e, p) in self.etas.iter().zip(&self.phis) {
            let _ = writeln!(out, "{},{}", fmt17(*e), fmt17(*p));
        }
        out
    }
}
