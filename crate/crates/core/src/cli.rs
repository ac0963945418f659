//! Command-line front end. Exit codes: 0 success, 1 computational error,
//! 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::flow::{monodromy_with, pullback_trace, Convention, Phase, Scene};
use crate::nms::{decide_existence, homotope_theta, OrbitGraph};
use crate::orbit::{classify_monodromy, refine_orbit, ClosedOrbit, DEFAULT_TRACE_TOL};
use crate::rotation::{
    generation_certificate, phase_profile, rotation_number, theta_dot_series, DEFAULT_PHASE_SAMPLES, THETA_POS,
};
use crate::scenes::{builtin_spec, validate_scene, SceneSpec, CATALOG};

#[derive(Parser, Debug)]
#[command(name = "rotnum", version, about = "Rotation numbers of candidate fields along closed orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SceneArgs {
    /// Built-in scene name or path to a scene JSON file
    #[arg(long)]
    scene: String,
    /// Parameter override, `name=value`; repeatable
    #[arg(long = "param", value_name = "K=V", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    orbit: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the built-in scene catalog
    ListScenes,
    /// Write the pulled-back candidate along an orbit as CSV
    Trace {
        #[command(flatten)]
        target: OrbitArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotation number of R(eta)∘L along an orbit
    Rot {
        #[command(flatten)]
        target: OrbitArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
    },
    /// Classify the monodromy of an orbit
    Classify {
        #[command(flatten)]
        target: OrbitArgs,
        /// Report the forward map instead of the backward one
        #[arg(long)]
        forward: bool,
    },
    /// Maximize the rotation number over the initial phase
    Maxrot {
        #[command(flatten)]
        target: OrbitArgs,
        #[arg(long, default_value_t = DEFAULT_PHASE_SAMPLES)]
        samples: usize,
        #[arg(long)]
        no_refine: bool,
        /// Also write the (eta, phi) grid as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sign certificate for the angle rate along an orbit
    Certify {
        #[command(flatten)]
        target: OrbitArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eta: f64,
    },
    /// Existence decision over an orbit graph
    Decide {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = THETA_POS)]
        threshold: f64,
        /// JSON array of candidate field expressions to sweep
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Monotone homotopy of a sampled angle function
    Homotope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected K=V, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Run the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let threads = match std::env::var("ROTNUM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                let _ = writeln!(err, "error: ROTNUM_THREADS must be a non-negative integer, got `{v}`");
                return 2;
            }
        },
        Err(_) => 0,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn print_json<S: Serialize>(out: &mut dyn Write, v: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    writeln!(out, "{text}").map_err(Error::from)?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn resolve_scene(args: &SceneArgs) -> CliResult<Scene> {
    let given: BTreeMap<String, f64> = args.params.iter().cloned().collect();
    if CATALOG.iter().any(|e| e.name == args.scene) {
        let scene = Scene::from_spec(builtin_spec(&args.scene, &given)?)?;
        return Ok(scene);
    }
    let path = Path::new(&args.scene);
    if !path.exists() {
        return Err(Error::UnknownScene(args.scene.clone()).into());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut spec = SceneSpec::from_json(&text)?;
    for (k, v) in given {
        if !spec.params.contains_key(&k) {
            return Err(Error::Parameter(format!("scene file has no parameter `{k}`")).into());
        }
        spec.params.insert(k, v);
    }
    let scene = Scene::from_spec(spec)?;
    validate_scene(&scene)?;
    Ok(scene)
}

fn resolve_orbit(target: &OrbitArgs) -> CliResult<(Scene, ClosedOrbit)> {
    let scene = resolve_scene(&target.scene)?;
    let seed = scene.orbit(&target.orbit)?.clone();
    let orbit = refine_orbit(&scene, &seed)?;
    Ok((scene, orbit))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::ListScenes => {
            for e in CATALOG {
                let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                writeln!(out, "{}\t[{}]\t{}", e.name, params.join(", "), e.summary).map_err(Error::from)?;
            }
            Ok(())
        }
        Command::Trace { target, eta, out: path } => {
            let (scene, orbit) = resolve_orbit(&target)?;
            let tr = pullback_trace(&scene, &orbit.p, orbit.period, &Phase::constant(eta))?;
            let meta = format!(
                "rotnum trace scene={} orbit={} eta={} T={}",
                scene.name, orbit.label, eta, orbit.period
            );
            write_file(&path, &tr.to_csv(&meta))?;
            print_json(
                out,
                &json!({
                    "orbit": orbit.label,
                    "samples": tr.len(),
                    "rot": tr.rotation(),
                    "out": path.display().to_string(),
                }),
            )
        }
        Command::Rot { target, eta } => {
            let (scene, orbit) = resolve_orbit(&target)?;
            print_json(out, &rotation_number(&scene, &orbit, eta)?)
        }
        Command::Classify { target, forward } => {
            let (scene, orbit) = resolve_orbit(&target)?;
            let conv = if forward {
                Convention::Forward
            } else {
                Convention::Backward
            };
            let m = monodromy_with(&scene, &orbit, conv)?;
            let class = classify_monodromy(&m, DEFAULT_TRACE_TOL)?;
            print_json(
                out,
                &json!({
                    "label": orbit.label,
                    "p": orbit.p,
                    "T": orbit.period,
                    "defect": orbit.closure_defect,
                    "kind": class.kind,
                    "class": class.kind,
                    "parameter": class.parameter,
                    "trace": class.trace_value,
                    "convention": class.convention,
                    "Q": m.q,
                    "det_sign": m.det_sign,
                }),
            )
        }
        Command::Maxrot {
            target,
            samples,
            no_refine,
            csv,
        } => {
            if samples == 0 {
                return Err(Failure::Usage("--samples must be positive".into()));
            }
            let (scene, orbit) = resolve_orbit(&target)?;
            let prof = phase_profile(&scene, &orbit, samples, !no_refine)?;
            if let Some(path) = csv {
                let meta = format!("rotnum maxrot scene={} orbit={}", scene.name, orbit.label);
                write_file(&path, &prof.to_csv(&meta))?;
            }
            print_json(
                out,
                &json!({
                    "orbit": prof.orbit,
                    "samples": prof.etas.len(),
                    "maxrot": prof.maxrot,
                    "argmax_eta": prof.argmax_eta,
                    "refined": prof.refined,
                    "min_phi": prof.min_phi(),
                    "spread_from_zero": prof.spread_from_zero(),
                    "wrap_residual": prof.wrap_residual,
                }),
            )
        }
        Command::Certify { target, eta } => {
            let (scene, orbit) = resolve_orbit(&target)?;
            let phase = Phase::constant(eta);
            let tr = pullback_trace(&scene, &orbit.p, orbit.period, &phase)?;
            let cert = generation_certificate(&tr);
            let check = theta_dot_series(&tr, &scene, &phase)?;
            print_json(
                out,
                &json!({
                    "orbit": orbit.label,
                    "verdict": cert.verdict,
                    "min_abs_theta_dot": cert.min_abs_theta_dot,
                    "witness_time": cert.witness_time,
                    "fd_discrepancy": check.max_discrepancy,
                }),
            )
        }
        Command::Decide {
            scene,
            graph,
            threshold,
            candidates,
        } => {
            let scene = resolve_scene(&scene)?;
            let text = std::fs::read_to_string(&graph).map_err(|e| Error::Io(format!("{}: {e}", graph.display())))?;
            let g = OrbitGraph::from_json(&text)?;
            let cands: Vec<String> = match candidates {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(Error::from)?
                }
                None => Vec::new(),
            };
            print_json(out, &decide_existence(&scene, &g, threshold, &cands)?)
        }
        Command::Homotope { input, epsilon, out: path } => {
            let (t, theta) = read_angle_csv(&input)?;
            let cert = homotope_theta(&t, &theta, epsilon)?;
            let meta = format!("rotnum homotope epsilon={epsilon}");
            write_file(&path, &cert.to_csv(&meta))?;
            print_json(
                out,
                &json!({
                    "samples": cert.t.len(),
                    "epsilon": cert.epsilon,
                    "min_derivative": cert.min_derivative,
                    "net_change": cert.psi1[cert.psi1.len() - 1] - cert.psi1[0],
                    "out": path.display().to_string(),
                }),
            )
        }
    }
}

/// Columns `t` and `theta` of a CSV file; `#` lines are skipped.
fn read_angle_csv(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::from)?;
    let headers = rdr.headers().map_err(Error::from)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column `{name}`", path.display())))
    };
    let (it, ith) = (col("t")?, col("theta")?);
    let (mut t, mut theta) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let num = |i: usize| -> Result<f64, Error> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("{}: bad number in row {}", path.display(), row + 1)))
        };
        t.push(num(it)?);
        theta.push(num(ith)?);
    }
    Ok((t, theta))
}
