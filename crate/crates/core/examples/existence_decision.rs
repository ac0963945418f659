//! Decide the rotation condition over an orbit graph, with and without a
//! sweep over alternative candidate fields.
use rotnum::nms::OrbitGraph;
use rotnum::rotation::THETA_POS;
use rotnum::{builtin_scene, decide_existence, validate_orbit_graph};

const GRAPH: &str = r#"{
  "nodes": [{"label": "source", "index": 0}, {"label": "sink", "index": 1}],
  "edges": [[0, 1]]
}"#;

fn main() -> rotnum::Result<()> {
    let graph = OrbitGraph::from_json(GRAPH)?;
    println!("order = {:?}", validate_orbit_graph(&graph)?);

    for name in ["suspension_s3s1", "reeb_s3"] {
        let scene = builtin_scene(name, &Default::default())?;
        let report = decide_existence(&scene, &graph, THETA_POS, &[])?;
        println!("{name}: decision = {}", report.decision);
        for row in &report.rows {
            println!("  {:7} {:?} maxrot = {:+.6} pass = {}", row.label, row.class, row.maxrot, row.pass);
        }
    }

    let scene = builtin_scene("reeb_s3", &Default::default())?;
    let candidates = ["[0; 0; 1]".to_string(), "[0; cos(x1); sin(x1)]".to_string()];
    let report = decide_existence(&scene, &graph, THETA_POS, &candidates)?;
    for row in &report.sweep {
        println!("candidate {:24} decision = {}", row.candidate, row.decision);
    }
    println!("witness = {:?}", report.witness);
    Ok(())
}
