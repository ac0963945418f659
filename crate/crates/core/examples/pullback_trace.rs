//! Pull the candidate field back along a closed orbit and write the trace.
use rotnum::flow::{pullback_trace, Phase};
use rotnum::{builtin_scene, refine_orbit};

fn main() -> rotnum::Result<()> {
    let scene = builtin_scene("suspension_s3s1", &Default::default())?;
    let orbit = refine_orbit(&scene, scene.orbit("sink")?)?;
    let trace = pullback_trace(&scene, &orbit.p, orbit.period, &Phase::constant(0.25))?;

    println!("samples        {}", trace.len());
    println!("theta(0)       {:.6}", trace.theta[0]);
    println!("theta(T)       {:.6}", trace.theta[trace.len() - 1]);
    println!("rotation       {:.6}", trace.rotation());
    println!("max residual   {:.1e}", trace.max_residual);
    println!("sphere drift   {:.1e}", trace.sphere_drift);

    let csv = trace.to_csv("suspension sink, eta = 0.25");
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
