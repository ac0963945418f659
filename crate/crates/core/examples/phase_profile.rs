//! Sweep the constant phase offset and locate the maximal rotation.
use rotnum::{builtin_scene, phase_profile, refine_orbit};

fn main() -> rotnum::Result<()> {
    let params = [("T".to_string(), 1.5)].into_iter().collect();
    let scene = builtin_scene("sol4_model", &params)?;
    let orbit = refine_orbit(&scene, scene.orbit("core")?)?;
    let prof = phase_profile(&scene, &orbit, 32, true)?;

    println!("maxrot           {:.9}", prof.maxrot);
    println!("argmax eta       {:.9}", prof.argmax_eta);
    println!("refined          {}", prof.refined);
    println!("min phi          {:.9}", prof.min_phi());
    println!("spread from 0    {:.9}", prof.spread_from_zero());
    for (eta, phi) in prof.etas.iter().zip(&prof.phis).step_by(4) {
        println!("  eta = {eta:.4}  phi = {phi:+.6}");
    }
    Ok(())
}
