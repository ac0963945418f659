//! Rotation numbers and sign certificates on a few built-in scenes.
use rotnum::{builtin_scene, generation_certificate, refine_orbit, rotation_number};
use rotnum::rotation::orbit_trace;
use rotnum::flow::Phase;

fn main() -> rotnum::Result<()> {
    for (name, label) in [
        ("sol4_model", "core"),
        ("elliptic_model", "core"),
        ("suspension_s3s1", "source"),
        ("reeb_s3", "sink"),
    ] {
        let scene = builtin_scene(name, &Default::default())?;
        let orbit = refine_orbit(&scene, scene.orbit(label)?)?;
        let r = rotation_number(&scene, &orbit, 0.0)?;
        let cert = generation_certificate(&orbit_trace(&scene, &orbit, &Phase::default())?);
        println!(
            "{name:16} {label:7} rot = {:+.9}  verdict = {:?}  min |theta'| = {:.3e}",
            r.rot, cert.verdict, cert.min_abs_theta_dot
        );
    }
    Ok(())
}
