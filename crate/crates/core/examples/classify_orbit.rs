//! Refine a periodic orbit, compute its linearized return map on the
//! contact plane and classify it.
use rotnum::orbit::DEFAULT_TRACE_TOL;
use rotnum::{builtin_scene, classify_monodromy, monodromy_with, refine_orbit, Convention, OrbitSeed};

fn main() -> rotnum::Result<()> {
    let params = [("delta".to_string(), 0.8)].into_iter().collect();
    let scene = builtin_scene("elliptic_model", &params)?;
    let seed = OrbitSeed {
        p0: vec![0.0, 1e-7, -2e-7],
        ..scene.orbit("core")?.clone()
    };
    let orbit = refine_orbit(&scene, &seed)?;
    println!("refined p = {:?}, T = {}, defect = {:.1e}", orbit.p, orbit.period, orbit.closure_defect);

    for conv in [Convention::Backward, Convention::Forward] {
        let m = monodromy_with(&scene, &orbit, conv)?;
        let class = classify_monodromy(&m, DEFAULT_TRACE_TOL)?;
        println!("{conv:8} Q = {:?}  {:?} parameter = {:.6}", m.q, class.kind, class.parameter);
    }

    for name in ["sol4_model", "parabolic_model"] {
        let scene = builtin_scene(name, &Default::default())?;
        let orbit = refine_orbit(&scene, scene.orbit("core")?)?;
        let m = monodromy_with(&scene, &orbit, Convention::Backward)?;
        println!("{name:16} {:?}", classify_monodromy(&m, DEFAULT_TRACE_TOL)?.kind);
    }
    Ok(())
}
