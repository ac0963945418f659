//! Orbit graphs of non-singular Morse-Smale flows, the existence decision
//! for positively generating plane fields, and the monotone angle homotopy.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fmt17, monodromy, Phase, Scene};
use crate::orbit::{classify_monodromy, refine_orbit, OrbitKind, DEFAULT_TRACE_TOL};
use crate::rotation::{orbit_trace, phase_profile, DEFAULT_PHASE_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    pub index: usize,
}

/// Edge `(i, j)`: the unstable manifold of node `i` meets the stable
/// manifold of node `j`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitGraph {
    pub nodes: Vec<GraphNode>,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

impl OrbitGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Topological order of the nodes, ties broken by handle index then label.
/// A cycle is reported as the labels along it, first label repeated last.
pub fn validate_orbit_graph(g: &OrbitGraph) -> Result<Vec<usize>> {
    let n = g.nodes.len();
    let mut seen = BTreeSet::new();
    for node in &g.nodes {
        if !seen.insert(node.label.as_str()) {
            return Err(Error::Graph(format!("duplicate label `{}`", node.label)));
        }
    }
    let mut succ = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(i, j) in &g.edges {
        if i >= n || j >= n {
            return Err(Error::Graph(format!("edge ({i}, {j}) references a missing node")));
        }
        succ[i].push(j);
        indeg[j] += 1;
    }
    let key = |i: usize| (g.nodes[i].index, g.nodes[i].label.clone(), i);
    let mut ready: BTreeSet<_> = (0..n).filter(|&i| indeg[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        let i = k.2;
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(key(j));
            }
        }
    }
    if order.len() < n {
        return Err(Error::Cycle(find_cycle(g, &succ)));
    }
    Ok(order)
}

fn find_cycle(g: &OrbitGraph, succ: &[Vec<usize>]) -> Vec<String> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = succ.len();
    let mut state = vec![0u8; n];
    let mut stack: Vec<usize> = Vec::new();
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        state[root] = 1;
        stack.push(root);
        while let Some(top) = frames.last_mut() {
            let v = top.0;
            if top.1 < succ[v].len() {
                let w = succ[v][top.1];
                top.1 += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push(w);
                        frames.push((w, 0));
                    }
                    1 => {
                        let start = stack.iter().position(|&x| x == w).expect("on stack");
                        let mut labels: Vec<String> =
                            stack[start..].iter().map(|&i| g.nodes[i].label.clone()).collect();
                        labels.push(g.nodes[w].label.clone());
                        return labels;
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
                frames.pop();
            }
        }
    }
    Vec::new()
}

/// `⌈max(f1 - f0) / 2π⌉ + 1`, at least one turn.
pub fn collar_turns(f0: &[f64], f1: &[f64]) -> Result<u64> {
    if f0.len() != f1.len() {
        return Err(Error::GridMismatch(f0.len(), f1.len()));
    }
    if f0.is_empty() {
        return Err(Error::Precondition("empty angle profile".into()));
    }
    let k = f0.iter().zip(f1).map(|(a, b)| b - a).fold(f64::NEG_INFINITY, f64::max);
    Ok((k / TAU).ceil().max(0.0) as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitRow {
    pub label: String,
    pub class: OrbitKind,
    pub maxrot: f64,
    pub argmax_eta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub candidate: String,
    pub decision: bool,
    pub rows: Vec<OrbitRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub scene: String,
    pub candidate: String,
    pub rows: Vec<OrbitRow>,
    pub attachment_order: Vec<String>,
    /// Turn counts for every node with incoming edges, keyed by label.
    pub collar_turns: BTreeMap<String, u64>,
    pub decision: bool,
    pub vacuous: bool,
    pub threshold: f64,
    /// Extra candidates tried when the scene's own field fails, in order,
    /// stopping at the first that passes every orbit.
    pub sweep: Vec<SweepRow>,
    /// First field (scene candidate or sweep entry) that passes every orbit.
    pub witness: Option<String>,
    pub note: String,
}

const NOTE: &str = "the decision certifies the listed candidate field only; \
failure does not rule out other fields in <A, B>";

struct Evaluated {
    rows: Vec<OrbitRow>,
    spreads: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

type OrbitOutcome = Result<(OrbitRow, (Vec<f64>, Vec<f64>))>;

fn evaluate(scene: &Scene, g: &OrbitGraph, threshold: f64) -> Result<Evaluated> {
    let per_orbit = g
        .nodes
        .par_iter()
        .map(|node| -> OrbitOutcome {
            let seed = scene.orbit(&node.label)?;
            let orbit = refine_orbit(scene, seed)?;
            let class = classify_monodromy(&monodromy(scene, &orbit)?, DEFAULT_TRACE_TOL)?;
            if class.kind == OrbitKind::Ambiguous {
                return Err(Error::AmbiguousOrbit(node.label.clone()));
            }
            let prof = phase_profile(scene, &orbit, DEFAULT_PHASE_SAMPLES, true)?;
            let tr = orbit_trace(scene, &orbit, &Phase::constant(prof.argmax_eta))?;
            let floor = tr.theta.iter().copied().fold(f64::INFINITY, f64::min);
            let f0 = vec![floor; tr.theta.len()];
            Ok((
                OrbitRow {
                    label: node.label.clone(),
                    class: class.kind,
                    maxrot: prof.maxrot,
                    argmax_eta: prof.argmax_eta,
                    pass: prof.maxrot > threshold,
                },
                (f0, tr.theta),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut spreads = BTreeMap::new();
    for (row, prof) in per_orbit {
        spreads.insert(row.label.clone(), prof);
        rows.push(row);
    }
    Ok(Evaluated { rows, spreads })
}

/// Decide whether the scene's candidate has `maxrot > threshold` on every
/// orbit of the graph; if not, try `candidates` in order.
pub fn decide_existence(
    scene: &Scene,
    g: &OrbitGraph,
    threshold: f64,
    candidates: &[String],
) -> Result<ExistenceReport> {
    let order = validate_orbit_graph(g)?;
    let ev = evaluate(scene, g, threshold)?;
    let decision = ev.rows.iter().all(|r| r.pass);
    let mut collar = BTreeMap::new();
    for &(_, j) in &g.edges {
        let label = &g.nodes[j].label;
        if !collar.contains_key(label) {
            let (f0, f1) = &ev.spreads[label];
            collar.insert(label.clone(), collar_turns(f0, f1)?);
        }
    }
    let mut sweep = Vec::new();
    let mut witness = decision.then(|| scene.spec.l.clone());
    if !decision {
        for c in candidates {
            let alt = scene.with_candidate(c)?;
            let ev = evaluate(&alt, g, threshold)?;
            let ok = ev.rows.iter().all(|r| r.pass);
            sweep.push(SweepRow {
                candidate: c.clone(),
                decision: ok,
                rows: ev.rows,
            });
            if ok {
                witness = Some(c.clone());
                break;
            }
        }
    }
    Ok(ExistenceReport {
        scene: scene.name.clone(),
        candidate: scene.spec.l.clone(),
        rows: ev.rows,
        attachment_order: order.iter().map(|&i| g.nodes[i].label.clone()).collect(),
        collar_turns: collar,
        decision,
        vacuous: g.nodes.is_empty(),
        threshold,
        sweep,
        witness,
        note: NOTE.into(),
    })
}

/// Weight of the linear ramp in the smooth step.
pub const RAMP_BLEND: f64 = 0.5;

/// `h(u) = (1 - β)(u - sin(2πu)/2π) + βu`: `h(0) = 0`, `h(1) = 1`,
/// `h' ≥ β > 0`.
pub fn smooth_step(u: f64) -> f64 {
    (1.0 - RAMP_BLEND) * (u - (TAU * u).sin() / TAU) + RAMP_BLEND * u
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyCertificate {
    pub t: Vec<f64>,
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    pub min_derivative: f64,
    pub epsilon: f64,
}

impl HomotopyCertificate {
    pub fn to_csv(&self, meta: &str) -> String {
        let mut out = String::new();
        if !meta.is_empty() {
            let _ = writeln!(out, "# {meta}");
        }
        out.push_str("t,psi0,psi1\n");
        for i in 0..self.t.len() {
            let _ = writeln!(out, "{},{},{}", fmt17(self.t[i]), fmt17(self.psi0[i]), fmt17(self.psi1[i]));
        }
        out
    }
}

fn interp(t: &[f64], y: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|&v| v <= x).clamp(1, t.len() - 1);
    let (t0, t1) = (t[k - 1], t[k]);
    if t1 == t0 {
        return y[k];
    }
    let w = (x - t0) / (t1 - t0);
    y[k - 1] + w * (y[k] - y[k - 1])
}

/// Replace the angle function on `[ε, T-ε]` by a strictly increasing one
/// with the same values at both ends.
pub fn homotope_theta(t: &[f64], theta: &[f64], epsilon: f64) -> Result<HomotopyCertificate> {
    if t.len() != theta.len() {
        return Err(Error::GridMismatch(t.len(), theta.len()));
    }
    if t.len() < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("time grid must be strictly increasing".into()));
    }
    let (start, end) = (t[0], t[t.len() - 1]);
    let span = end - start;
    if !(epsilon > 0.0) || epsilon >= span / 2.0 {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (0, T/2), got {epsilon} with T = {span}"
        )));
    }
    let (lo, hi) = (start + epsilon, end - epsilon);
    let (th_lo, th_hi) = (interp(t, theta, lo), interp(t, theta, hi));
    let delta = th_hi - th_lo;
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!(
            "net angle change on [ε, T-ε] must be positive, got {delta}"
        )));
    }
    let mut grid = vec![lo];
    let mut psi0 = vec![th_lo];
    // samples this close to an end add nothing but a rounding-level step
    let gap = 1e-9 * span;
    for (&ti, &yi) in t.iter().zip(theta) {
        if ti > lo + gap && ti < hi - gap {
            grid.push(ti);
            psi0.push(yi);
        }
    }
    grid.push(hi);
    psi0.push(th_hi);
    let width = hi - lo;
    let last = grid.len() - 1;
    let psi1: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(i, &ti)| match i {
            0 => th_lo,
            _ if i == last => th_hi,
            _ => smooth_step((ti - lo) / width) * delta + th_lo,
        })
        .collect();
    let min_derivative = grid
        .windows(2)
        .zip(psi1.windows(2))
        .map(|(g, p)| (p[1] - p[0]) / (g[1] - g[0]))
        .fold(f64::INFINITY, f64::min);
    if !(min_derivative > 0.0) {
        return Err(Error::Precondition(format!(
            "grid too coarse for a monotone homotopy (min slope {min_derivative})"
        )));
    }
    Ok(HomotopyCertificate {
        t: grid,
        psi0,
        psi1,
        min_derivative,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(nodes: &[(&str, usize)], edges: &[(usize, usize)]) -> OrbitGraph {
        OrbitGraph {
            nodes: nodes
                .iter()
                .map(|(l, i)| GraphNode {
                    label: l.to_string(),
                    index: *i,
                })
                .collect(),
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn two_node_order() {
        let g = graph(&[("sink", 2), ("src", 0)], &[(1, 0)]);
        assert_eq!(validate_orbit_graph(&g).unwrap(), vec![1, 0]);
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(validate_orbit_graph(&graph(&[("a", 0)], &[])).unwrap(), vec![0]);
        assert!(validate_orbit_graph(&OrbitGraph::default()).unwrap().is_empty());
    }

    #[test]
    fn cycle_is_named() {
        let g = graph(&[("a", 0), ("b", 1), ("c", 1)], &[(0, 1), (1, 2), (2, 0)]);
        match validate_orbit_graph(&g) {
            Err(Error::Cycle(c)) => {
                assert_eq!(c.len(), 4);
                assert_eq!(c.first(), c.last());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ties_break_by_index_then_label() {
        let g = graph(&[("b", 1), ("a", 1), ("z", 0)], &[]);
        assert_eq!(validate_orbit_graph(&g).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn bad_edges() {
        let g = graph(&[("a", 0)], &[(0, 3)]);
        assert!(matches!(validate_orbit_graph(&g), Err(Error::Graph(_))));
        let g = graph(&[("a", 0), ("a", 1)], &[]);
        assert!(matches!(validate_orbit_graph(&g), Err(Error::Graph(_))));
    }

    #[test]
    fn collar_examples() {
        let f0 = vec![0.0, 1.0, 2.0];
        assert_eq!(collar_turns(&f0, &f0).unwrap(), 1);
        assert_eq!(collar_turns(&[0.0, 0.0], &[7.0, 1.0]).unwrap(), 3);
        assert_eq!(collar_turns(&[1.0, 1.0], &[0.0, -2.0]).unwrap(), 1);
        assert!(matches!(collar_turns(&[0.0], &[0.0, 1.0]), Err(Error::GridMismatch(1, 2))));
    }

    #[test]
    fn smooth_step_ends() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert!((smooth_step(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn homotopy_of_linear_angle() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let c = homotope_theta(&t, &t, 0.05).unwrap();
        assert!(c.min_derivative > 0.0);
        assert!((c.psi1[0] - 0.05).abs() < 1e-12);
        assert!((c.psi1.last().unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn homotopy_preconditions() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let dec: Vec<f64> = t.iter().map(|x| -x).collect();
        assert!(matches!(homotope_theta(&t, &dec, 0.1), Err(Error::Precondition(_))));
        assert!(matches!(homotope_theta(&t, &t, 0.5), Err(Error::Precondition(_))));
    }
}
