//! Rotation numbers of a candidate field along closed orbits of a flow that
//! preserves a framed rank-3 distribution `E = <W, A, B>`.
//!
//! The pipeline: parse the fields ([`expr`]), integrate the flow and its
//! inverse tangent map ([`flow`]), lift the angle of the pulled-back
//! candidate ([`rotation`]), refine and classify closed orbits ([`orbit`]),
//! and combine per-orbit results over an orbit graph ([`nms`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod flow;
pub mod frame;
pub mod integrate;
pub mod nms;
pub mod orbit;
pub mod rotation;
pub mod scenes;

pub use error::{Error, Result};
pub use expr::{parse_field, FieldExpr, ScalarExpr};
pub use flow::{
    advance, compute_lambda, monodromy, monodromy_with, pullback_at, pullback_factor, pullback_trace, Convention,
    Monodromy2, OrbitSeed, Phase, PullbackTrace, Scene,
};
pub use frame::{FrameDecomposition, FramedDistribution};
pub use nms::{collar_turns, decide_existence, homotope_theta, validate_orbit_graph, ExistenceReport, OrbitGraph};
pub use orbit::{classify_monodromy, refine_orbit, ClosedOrbit, OrbitClass, OrbitKind};
pub use rotation::{
    generation_certificate, phase_profile, rotation_number, theta_dot_series, GenerationCertificate, PhaseProfile,
    RotationResult, Verdict,
};
pub use scenes::{builtin_scene, load_scene, SceneSpec};
