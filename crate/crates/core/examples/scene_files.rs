//! Write a built-in scene to JSON, edit it, and load it back.
use rotnum::scenes::{builtin_spec, load_scene, CATALOG};
use rotnum::{classify_monodromy, monodromy, refine_orbit};

fn main() -> rotnum::Result<()> {
    for entry in CATALOG {
        println!("{:16} {}", entry.name, entry.summary);
    }

    let mut spec = builtin_spec("elliptic_model", &Default::default())?;
    spec.params.insert("delta".into(), 2.2);
    let dir = std::env::temp_dir().join("rotnum-scene-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("elliptic.json");
    std::fs::write(&path, spec.to_json()?)?;

    let scene = load_scene(&path)?;
    let orbit = refine_orbit(&scene, &scene.orbits[0])?;
    let class = classify_monodromy(&monodromy(&scene, &orbit)?, 1e-6)?;
    println!("{} -> {:?} with parameter {:.6}", path.display(), class.kind, class.parameter);
    Ok(())
}
