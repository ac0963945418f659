//! Scene files and the built-in catalog of model flows.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::FieldExpr;
use crate::flow::{OrbitSeed, Scene, RHO_MIN};
use crate::frame::{FramedDistribution, DEFAULT_MEMBERSHIP_TOL};
use crate::integrate::IntegratorOptions;

/// Serialized form of a [`Scene`]. Parameters are available to every
/// expression as named constants; periodic indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub periodic: Vec<(usize, f64)>,
    #[serde(rename = "W")]
    pub w: String,
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "L")]
    pub l: String,
    #[serde(default)]
    pub orbits: Vec<OrbitSeed>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub oracle_notes: String,
    /// Coordinates constrained to the unit sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorOptions>,
}

impl SceneSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Scene {
    /// Parse every expression of `spec`; no numerical validation.
    pub fn from_spec(spec: SceneSpec) -> Result<Scene> {
        let n = spec.dim;
        let parse = |src: &str| FieldExpr::parse_with(src, n, &spec.params);
        let mut frame = FramedDistribution::new(parse(&spec.w)?, parse(&spec.a)?, parse(&spec.b)?)?;
        frame.membership_tol = spec.membership_tol.unwrap_or(DEFAULT_MEMBERSHIP_TOL);
        let candidate = parse(&spec.l)?;
        for &(i, per) in &spec.periodic {
            if i >= n || !(per > 0.0 && per.is_finite()) {
                return Err(Error::Validation {
                    check: "periodic coordinate".into(),
                    msg: format!("index {i} with period {per}"),
                });
            }
        }
        if let Some(idx) = &spec.sphere {
            if idx.iter().any(|&i| i >= n) || idx.len() < 2 {
                return Err(Error::Validation {
                    check: "sphere coordinates".into(),
                    msg: format!("{idx:?}"),
                });
            }
        }
        for o in &spec.orbits {
            if o.p0.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: o.p0.len(),
                });
            }
            if !(o.t0 > 0.0 && o.t0.is_finite()) {
                return Err(Error::Validation {
                    check: "orbit period".into(),
                    msg: format!("orbit `{}` has T0 = {}", o.label, o.t0),
                });
            }
        }
        Ok(Scene {
            name: spec.name.clone(),
            frame,
            candidate,
            periodic: spec.periodic.clone(),
            sphere: spec.sphere.clone(),
            orbits: spec.orbits.clone(),
            integrator: spec.integrator.unwrap_or_default(),
            spec,
        })
    }

    /// Same scene with the candidate field replaced.
    pub fn with_candidate(&self, l: &str) -> Result<Scene> {
        let mut spec = self.spec.clone();
        spec.l = l.to_string();
        Scene::from_spec(spec)
    }

    /// Same scene with the flow field replaced; orbit periods are kept.
    pub fn with_vector_field(&self, w: &str) -> Result<Scene> {
        let mut spec = self.spec.clone();
        spec.w = w.to_string();
        Scene::from_spec(spec)
    }
}

const VALIDATION_POINTS: usize = 20;
const VALIDATION_RADIUS: f64 = 1e-2;

/// Frame independence, candidate membership and `ρ > 0` at every orbit seed
/// and at random points near it.
pub fn validate_scene(scene: &Scene) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for seed in &scene.orbits {
        let mut points = vec![seed.p0.clone()];
        for _ in 0..VALIDATION_POINTS {
            let mut q: Vec<f64> = seed
                .p0
                .iter()
                .map(|x| x + rng.gen_range(-VALIDATION_RADIUS..VALIDATION_RADIUS))
                .collect();
            if let Some(idx) = &scene.sphere {
                let r = idx.iter().map(|&i| q[i] * q[i]).sum::<f64>().sqrt();
                for &i in idx {
                    q[i] /= r;
                }
            }
            points.push(q);
        }
        for q in &points {
            check_point(scene, q)?;
        }
    }
    Ok(())
}

fn check_point(scene: &Scene, q: &[f64]) -> Result<()> {
    let fail = |check: &str, msg: String| Error::Validation {
        check: check.into(),
        msg,
    };
    let at = match scene.frame.at(q) {
        Ok(at) => at,
        Err(Error::DegenerateFrame { sigma }) => {
            return Err(fail("frame degenerate", format!("smallest singular value {sigma:e} at {q:?}")))
        }
        Err(e) => return Err(e),
    };
    let l: DVector<f64> = scene.candidate.eval(q)?;
    let d = at.decompose(&l);
    if d.residual > at.membership_tol * l.norm().max(1.0) {
        return Err(fail(
            "L-membership",
            format!("residual {:e} at {q:?}", d.residual),
        ));
    }
    if !(d.rho() > RHO_MIN) {
        return Err(fail(
            "ρ = 0",
            format!("L tangent to W at {q:?} (ρ = {:e})", d.rho()),
        ));
    }
    Ok(())
}

/// Parse and validate a scene file.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path)?;
    load_scene_str(&text)
}

pub fn load_scene_str(text: &str) -> Result<Scene> {
    let scene = Scene::from_spec(SceneSpec::from_json(text)?)?;
    validate_scene(&scene)?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    std::fs::write(path, scene.spec.to_json()?)?;
    Ok(())
}

/// One catalog entry: name, parameters with defaults, and a summary.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub summary: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "sol4_model",
        params: &[("T", 1.0)],
        summary: "coords (s,x,y,z), s periodic T; W = d/ds + x d/dx - y d/dy; hyperbolic orbit `core`",
    },
    CatalogEntry {
        name: "elliptic_model",
        params: &[("delta", 1.3), ("T", 1.0)],
        summary: "coords (s,x,y), s periodic T; W rotates the (x,y) plane by delta per period; orbit `core`",
    },
    CatalogEntry {
        name: "parabolic_model",
        params: &[("c", 1.0), ("T", 1.0), ("sign", 1.0)],
        summary: "coords (s,x,y), s periodic T; W = d/ds + sign*(c/T) y d/dx; shear orbit `core`",
    },
    CatalogEntry {
        name: "nms_local",
        params: &[("eps1", 1.0), ("eps2", 1.0), ("eps3", 1.0)],
        summary: "coords (t,x,y,z), t periodic 2pi; linear normal form near a closed orbit; orbit `core`",
    },
    CatalogEntry {
        name: "suspension_s3s1",
        params: &[],
        summary: "S^3 x S^1 in R^5, source/sink suspension of a contact flow; orbits `source`, `sink`",
    },
    CatalogEntry {
        name: "reeb_s3",
        params: &[("kappa", 0.5)],
        summary: "coords (t,x,y), t periodic 2pi; two orbits with trivial monodromy; orbits `source`, `sink`",
    },
];

fn resolve_params(entry: &CatalogEntry, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> = entry.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            return Err(Error::Parameter(format!("`{}` has no parameter `{k}`", entry.name)));
        }
        if !v.is_finite() {
            return Err(Error::Parameter(format!("`{k}` must be finite")));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

fn positive(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = params[key];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Parameter(format!("`{key}` must be positive, got {v}")))
    }
}

fn seed(label: &str, p0: Vec<f64>, t0: f64) -> OrbitSeed {
    OrbitSeed {
        label: label.into(),
        p0,
        t0,
    }
}

/// Description of a built-in scene, with `params` overriding the defaults.
pub fn builtin_spec(name: &str, params: &BTreeMap<String, f64>) -> Result<SceneSpec> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownScene(name.to_string()))?;
    let p = resolve_params(entry, params)?;
    let spec = |dim, periodic, w: &str, a: &str, b: &str, l: &str, orbits, notes: &str| SceneSpec {
        name: name.to_string(),
        dim,
        periodic,
        w: w.into(),
        a: a.into(),
        b: b.into(),
        l: l.into(),
        orbits,
        params: p.clone(),
        oracle_notes: notes.into(),
        sphere: None,
        membership_tol: None,
        integrator: None,
    };
    Ok(match name {
        "sol4_model" => {
            let t = positive(&p, "T")?;
            spec(
                4,
                vec![(0, t)],
                "[1; x2; -x3; 0]",
                "[0; 1; 0; 0]",
                "[0; 0; 1; x2]",
                "[0; 1; 0; 0]",
                vec![seed("core", vec![0.0; 4], t)],
                "[W,A] = -A, [W,B] = B, [A,B] = d/dz; backward monodromy diag(e^-T, e^T)",
            )
        }
        "elliptic_model" => {
            let t = positive(&p, "T")?;
            spec(
                3,
                vec![(0, t)],
                "[1; -(delta/T)*x3; (delta/T)*x2]",
                "[0; 1; 0]",
                "[0; 0; 1]",
                "[0; 1; 0]",
                vec![seed("core", vec![0.0; 3], t)],
                "backward monodromy is rotation by -delta; theta(t) = theta(0) - delta*t/T",
            )
        }
        "parabolic_model" => {
            let t = positive(&p, "T")?;
            positive(&p, "c")?;
            if p["sign"].abs() != 1.0 {
                return Err(Error::Parameter("`sign` must be +1 or -1".into()));
            }
            spec(
                3,
                vec![(0, t)],
                "[1; sign*(c/T)*x3; 0]",
                "[0; 1; 0]",
                "[0; 0; 1]",
                "[0; 1; 0]",
                vec![seed("core", vec![0.0; 3], t)],
                "backward monodromy [[1, -sign*c], [0, 1]]",
            )
        }
        "nms_local" => {
            for k in ["eps1", "eps2", "eps3"] {
                if p[k] == 0.0 {
                    return Err(Error::Parameter(format!("`{k}` must be nonzero")));
                }
            }
            spec(
                4,
                vec![(0, TAU)],
                "[1; 2*eps1*x2; 2*eps2*x3; 4*eps3*x4]",
                "[0; 1; 0; 0]",
                "[0; 0; 1; 0]",
                "[0; cos(x1); sin(x1); 0]",
                vec![seed("core", vec![0.0; 4], TAU)],
                "lambda(p; s) = exp(2(eps1 + eps2)s); L turns once per period",
            )
        }
        "suspension_s3s1" => {
            let mut s = spec(
                5,
                vec![(4, TAU)],
                "[0.5*(1 - x1^2 + x2^2); -x1*x2; 0.5*(x2*x4 - x1*x3); -0.5*(x1*x4 + x2*x3); 1]",
                "[-x3; x4; x1; -x2; 0]",
                "[-x4; -x3; x2; x1; 0]",
                "[-cos(x5)*x3 - sin(x5)*x4; cos(x5)*x4 - sin(x5)*x3; cos(x5)*x1 + sin(x5)*x2; -cos(x5)*x2 + sin(x5)*x1; 0]",
                vec![
                    seed("source", vec![-1.0, 0.0, 0.0, 0.0, 0.0], TAU),
                    seed("sink", vec![1.0, 0.0, 0.0, 0.0, 0.0], TAU),
                ],
                "conformal linearization on the contact planes at both orbits; rot = 2pi for every phase",
            );
            s.sphere = Some(vec![0, 1, 2, 3]);
            s
        }
        "reeb_s3" => {
            positive(&p, "kappa")?;
            spec(
                3,
                vec![(0, TAU)],
                "[1; kappa*(x2^2 - x3^2 - 1)/2; kappa*x2*x3]",
                "[0; 1; 0]",
                "[0; 0; 1]",
                "[0; 1; 0]",
                vec![
                    seed("source", vec![0.0, 1.0, 0.0], TAU),
                    seed("sink", vec![0.0, -1.0, 0.0], TAU),
                ],
                "identity monodromy on both orbits; rot = 0 for constant L",
            )
        }
        _ => unreachable!("catalog entry without a builder"),
    })
}

pub fn builtin_scene(name: &str, params: &BTreeMap<String, f64>) -> Result<Scene> {
    Scene::from_spec(builtin_spec(name, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn every_builtin_validates() {
        for e in CATALOG {
            let s = builtin_scene(e.name, &none()).unwrap();
            validate_scene(&s).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_scene("nope", &none()), Err(Error::UnknownScene(_))));
    }

    #[test]
    fn bad_parameters() {
        let mut p = none();
        p.insert("T".into(), -1.0);
        assert!(matches!(builtin_scene("sol4_model", &p), Err(Error::Parameter(_))));
        let mut p = none();
        p.insert("bogus".into(), 1.0);
        assert!(matches!(builtin_scene("sol4_model", &p), Err(Error::Parameter(_))));
        let mut p = none();
        p.insert("sign".into(), 0.5);
        assert!(matches!(builtin_scene("parabolic_model", &p), Err(Error::Parameter(_))));
    }

    #[test]
    fn json_round_trip() {
        let spec = builtin_spec("sol4_model", &none()).unwrap();
        let text = spec.to_json().unwrap();
        assert_eq!(SceneSpec::from_json(&text).unwrap(), spec);
        load_scene_str(&text).unwrap();
    }

    #[test]
    fn dependent_frame_rejected() {
        let mut spec = builtin_spec("sol4_model", &none()).unwrap();
        spec.a = spec.w.clone();
        match load_scene_str(&spec.to_json().unwrap()) {
            Err(Error::Validation { check, .. }) => assert_eq!(check, "frame degenerate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn candidate_along_w_rejected() {
        let mut spec = builtin_spec("sol4_model", &none()).unwrap();
        spec.l = spec.w.clone();
        match load_scene_str(&spec.to_json().unwrap()) {
            Err(Error::Validation { check, .. }) => assert_eq!(check, "ρ = 0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn candidate_outside_distribution_rejected() {
        let mut spec = builtin_spec("sol4_model", &none()).unwrap();
        spec.l = "[0; 1; 0; 1]".into();
        match load_scene_str(&spec.to_json().unwrap()) {
            Err(Error::Validation { check, .. }) => assert_eq!(check, "L-membership"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn suspension_field_is_tangent_to_sphere() {
        let s = builtin_scene("suspension_s3s1", &none()).unwrap();
        let q = [0.6, 0.0, 0.0, 0.8, 1.0];
        let w = s.frame.w.eval(&q).unwrap();
        let radial: f64 = (0..4).map(|i| q[i] * w[i]).sum();
        assert!(radial.abs() < 1e-15);
    }
}
