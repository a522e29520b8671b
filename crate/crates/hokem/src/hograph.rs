//! The 26-node human-object graph: topology, neighborhood partitioning, and
//! the normalized adjacency stack consumed by the graph convolutions.
//!
//! Nodes 0..17 are the COCO-order human joints; nodes 17..26 are the object
//! keypoints in [`OBJECT_KEYPOINT_NAMES`] order. Edges come from three
//! families: the human skeleton, the object periphery cycle plus its star to
//! gravity, and cross connections from every object node to six designated
//! joints. Neighborhoods are split into root/centripetal/centrifugal subsets
//! by hop distance to a fixed center node.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{HokemError, Result};
use crate::geometry::OBJECT_KEYPOINT_NAMES;
use crate::tensor::Tensor;

pub const N_HUMAN: usize = 17;
pub const N_OBJECT: usize = 9;
pub const N_NODES: usize = N_HUMAN + N_OBJECT;
/// Number of neighborhood subsets (root / centripetal / centrifugal).
pub const K_SUBSETS: usize = 3;

/// COCO keypoint names, in index order.
pub const HUMAN_JOINT_NAMES: [&str; N_HUMAN] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Node indices by name.
pub mod nodes {
    pub const NOSE: usize = 0;
    pub const LEFT_EYE: usize = 1;
    pub const RIGHT_EYE: usize = 2;
    pub const LEFT_EAR: usize = 3;
    pub const RIGHT_EAR: usize = 4;
    pub const LEFT_SHOULDER: usize = 5;
    pub const RIGHT_SHOULDER: usize = 6;
    pub const LEFT_ELBOW: usize = 7;
    pub const RIGHT_ELBOW: usize = 8;
    pub const LEFT_WRIST: usize = 9;
    pub const RIGHT_WRIST: usize = 10;
    pub const LEFT_HIP: usize = 11;
    pub const RIGHT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const RIGHT_KNEE: usize = 14;
    pub const LEFT_ANKLE: usize = 15;
    pub const RIGHT_ANKLE: usize = 16;
    pub const OBJ_GRAVITY: usize = 17;
    pub const OBJ_TOP: usize = 18;
    pub const OBJ_LEFT: usize = 19;
    pub const OBJ_BOTTOM: usize = 20;
    pub const OBJ_RIGHT: usize = 21;
    pub const OBJ_INTER_TL: usize = 22;
    pub const OBJ_INTER_LB: usize = 23;
    pub const OBJ_INTER_BR: usize = 24;
    pub const OBJ_INTER_RT: usize = 25;
}

/// The 16-edge COCO skeleton: face (nose-eyes, eyes-ears), arms
/// (shoulder-elbow-wrist), legs (hip-knee-ankle), and the torso closure
/// (shoulder-shoulder, hip-hip, shoulder-hip on each side).
pub const HUMAN_SKELETON_EDGES: [(usize, usize); 16] = [
    (nodes::NOSE, nodes::LEFT_EYE),
    (nodes::NOSE, nodes::RIGHT_EYE),
    (nodes::LEFT_EYE, nodes::LEFT_EAR),
    (nodes::RIGHT_EYE, nodes::RIGHT_EAR),
    (nodes::LEFT_SHOULDER, nodes::LEFT_ELBOW),
    (nodes::LEFT_ELBOW, nodes::LEFT_WRIST),
    (nodes::RIGHT_SHOULDER, nodes::RIGHT_ELBOW),
    (nodes::RIGHT_ELBOW, nodes::RIGHT_WRIST),
    (nodes::LEFT_HIP, nodes::LEFT_KNEE),
    (nodes::LEFT_KNEE, nodes::LEFT_ANKLE),
    (nodes::RIGHT_HIP, nodes::RIGHT_KNEE),
    (nodes::RIGHT_KNEE, nodes::RIGHT_ANKLE),
    (nodes::LEFT_SHOULDER, nodes::RIGHT_SHOULDER),
    (nodes::LEFT_HIP, nodes::RIGHT_HIP),
    (nodes::LEFT_SHOULDER, nodes::LEFT_HIP),
    (nodes::RIGHT_SHOULDER, nodes::RIGHT_HIP),
];

/// Object periphery cycle, interleaving extremes and intermediates.
pub const OBJECT_CYCLE: [usize; 8] = [
    nodes::OBJ_TOP,
    nodes::OBJ_INTER_TL,
    nodes::OBJ_LEFT,
    nodes::OBJ_INTER_LB,
    nodes::OBJ_BOTTOM,
    nodes::OBJ_INTER_BR,
    nodes::OBJ_RIGHT,
    nodes::OBJ_INTER_RT,
];

/// Head, both wrists, both ankles, and the torso proxy.
pub const DEFAULT_CROSS_JOINTS: [&str; 6] = [
    "nose",
    "left_wrist",
    "right_wrist",
    "left_ankle",
    "right_ankle",
    "left_hip",
];

pub fn node_name(i: usize) -> &'static str {
    if i < N_HUMAN {
        HUMAN_JOINT_NAMES[i]
    } else {
        OBJECT_KEYPOINT_NAMES[i - N_HUMAN]
    }
}

pub fn node_index(name: &str) -> Option<usize> {
    HUMAN_JOINT_NAMES
        .iter()
        .position(|&n| n == name)
        .or_else(|| {
            OBJECT_KEYPOINT_NAMES
                .iter()
                .position(|&n| n == name)
                .map(|i| i + N_HUMAN)
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Human,
    Object,
    HumanObject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// The human joints every object node connects to.
    pub cross_joints: Vec<String>,
    /// Node whose hop distances define the neighborhood partition.
    pub center_node: String,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            cross_joints: DEFAULT_CROSS_JOINTS.iter().map(|s| s.to_string()).collect(),
            center_node: "gravity".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HOGraph {
    /// Undirected edges stored once with i < j.
    edges: Vec<(usize, usize, EdgeKind)>,
    center_node: usize,
}

impl HOGraph {
    pub fn node_count(&self) -> usize {
        N_NODES
    }

    pub fn edges(&self) -> &[(usize, usize, EdgeKind)] {
        &self.edges
    }

    pub fn center_node(&self) -> usize {
        self.center_node
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); N_NODES];
        for &(i, j, _) in &self.edges {
            lists[i].push(j);
            lists[j].push(i);
        }
        lists
    }

    pub fn adjacency_with_self_loops(&self) -> Tensor {
        let mut data = vec![0.0; N_NODES * N_NODES];
        for i in 0..N_NODES {
            data[i * N_NODES + i] = 1.0;
        }
        for &(i, j, _) in &self.edges {
            data[i * N_NODES + j] = 1.0;
            data[j * N_NODES + i] = 1.0;
        }
        Tensor::new(N_NODES, N_NODES, data)
    }

    /// Hop distance from each node to the center node.
    pub fn hop_distances(&self) -> Result<Vec<usize>> {
        hop_distances_from(N_NODES, &self.edge_pairs(), self.center_node)
    }

    fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    pub fn to_export(&self) -> GraphExport {
        let labels = partition_neighborhoods(self).expect("built graphs are connected");
        GraphExport {
            nodes: (0..N_NODES).map(|i| node_name(i).to_string()).collect(),
            center_node: node_name(self.center_node).to_string(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j, kind)| EdgeExport {
                    a: node_name(i).to_string(),
                    b: node_name(j).to_string(),
                    kind,
                })
                .collect(),
            partition_labels: labels
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|l| l.map(|v| v as i8).unwrap_or(-1))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_export(export: &GraphExport) -> Result<Self> {
        let expected: Vec<String> = (0..N_NODES).map(|i| node_name(i).to_string()).collect();
        if export.nodes != expected {
            return Err(HokemError::Schema {
                pointer: "/nodes".into(),
                message: "node list must be the canonical 26 names in order".into(),
            });
        }
        let center_node = node_index(&export.center_node).ok_or_else(|| HokemError::Schema {
            pointer: "/center_node".into(),
            message: format!("unknown node {:?}", export.center_node),
        })?;
        let mut edges = Vec::with_capacity(export.edges.len());
        for (idx, e) in export.edges.iter().enumerate() {
            let lookup = |name: &str, field: &str| {
                node_index(name).ok_or_else(|| HokemError::Schema {
                    pointer: format!("/edges/{idx}/{field}"),
                    message: format!("unknown node {name:?}"),
                })
            };
            let (i, j) = (lookup(&e.a, "a")?, lookup(&e.b, "b")?);
            edges.push((i.min(j), i.max(j), e.kind));
        }
        Ok(HOGraph { edges, center_node })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_export()).expect("graph export serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        HOGraph::from_export(&serde_json::from_str(json)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeExport {
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
}

/// Wire form of a graph: named nodes, labeled edges, and the partition label
/// matrix (-1 marks non-neighbors) for golden comparisons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<String>,
    pub center_node: String,
    pub edges: Vec<EdgeExport>,
    pub partition_labels: Vec<Vec<i8>>,
}

/// Builds the fixed topology: human skeleton, object cycle + star, and cross
/// edges from all nine object nodes to the configured joints.
pub fn build_graph(config: &GraphConfig) -> Result<HOGraph> {
    let mut cross = Vec::with_capacity(config.cross_joints.len());
    for name in &config.cross_joints {
        let idx = node_index(name).filter(|&i| i < N_HUMAN).ok_or_else(|| {
            HokemError::Config(format!(
                "cross-connection joint {name:?} is not a human joint"
            ))
        })?;
        if cross.contains(&idx) {
            return Err(HokemError::Config(format!(
                "cross-connection joint {name:?} repeats"
            )));
        }
        cross.push(idx);
    }
    let center_node = node_index(&config.center_node).ok_or_else(|| {
        HokemError::Config(format!("unknown center node {:?}", config.center_node))
    })?;

    let mut edges = Vec::new();
    for &(i, j) in &HUMAN_SKELETON_EDGES {
        edges.push((i.min(j), i.max(j), EdgeKind::Human));
    }
    for k in 0..OBJECT_CYCLE.len() {
        let (i, j) = (OBJECT_CYCLE[k], OBJECT_CYCLE[(k + 1) % OBJECT_CYCLE.len()]);
        edges.push((i.min(j), i.max(j), EdgeKind::Object));
    }
    for &p in &OBJECT_CYCLE {
        edges.push((nodes::OBJ_GRAVITY, p, EdgeKind::Object));
    }
    for obj in N_HUMAN..N_NODES {
        for &joint in &cross {
            edges.push((joint, obj, EdgeKind::HumanObject));
        }
    }
    Ok(HOGraph { edges, center_node })
}

fn hop_distances_from(n: usize, edges: &[(usize, usize)], center: usize) -> Result<Vec<usize>> {
    if center >= n {
        return Err(HokemError::Contract(format!(
            "center node {center} out of range 0..{n}"
        )));
    }
    let mut lists = vec![Vec::new(); n];
    for &(i, j) in edges {
        lists[i].push(j);
        lists[j].push(i);
    }
    let mut dist = vec![usize::MAX; n];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(v) = queue.pop_front() {
        for &w in &lists[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist.iter().any(|&d| d == usize::MAX) {
        return Err(HokemError::Contract(
            "graph must be connected for neighborhood partitioning".into(),
        ));
    }
    Ok(dist)
}

/// Subset labels over an arbitrary undirected graph: for each node, itself
/// and equal-distance neighbors get 0 (root), strictly closer neighbors 1
/// (centripetal), strictly farther neighbors 2 (centrifugal). `None` marks
/// pairs outside the closed neighborhood.
pub fn partition_from_edges(
    n: usize,
    edges: &[(usize, usize)],
    center: usize,
) -> Result<Vec<Vec<Option<u8>>>> {
    let dist = hop_distances_from(n, edges, center)?;
    let mut labels = vec![vec![None; n]; n];
    for (i, row) in labels.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(i, j) in edges {
        let label = |from: usize, to: usize| -> u8 {
            use std::cmp::Ordering::*;
            match dist[to].cmp(&dist[from]) {
                Equal => 0,
                Less => 1,
                Greater => 2,
            }
        };
        labels[i][j] = Some(label(i, j));
        labels[j][i] = Some(label(j, i));
    }
    Ok(labels)
}

pub fn partition_neighborhoods(g: &HOGraph) -> Result<Vec<Vec<Option<u8>>>> {
    partition_from_edges(N_NODES, &g.edge_pairs(), g.center_node)
}

/// Symmetric normalization `Λ^{-1/2} Ā Λ^{-1/2}` with `Λ_ii = Σ_j Ā_ij + β`.
/// Rows with no support stay all-zero; β keeps the scaling finite.
pub fn normalize_adjacency(a_bar: &Tensor, beta: f64) -> Result<Tensor> {
    let lambda = degree_terms(a_bar, beta)?;
    let n = a_bar.rows();
    let mut data = vec![0.0; n * a_bar.cols()];
    for i in 0..n {
        for j in 0..a_bar.cols() {
            let v = a_bar.at(i, j);
            if v != 0.0 {
                data[i * a_bar.cols() + j] = v / (lambda[i] * lambda[j]).sqrt();
            }
        }
    }
    Ok(Tensor::new(n, a_bar.cols(), data))
}

/// Row sums of `Ā` plus β; the diagonal of Λ.
pub fn degree_terms(a_bar: &Tensor, beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(HokemError::Config(format!(
            "adjacency normalization requires beta > 0, got {beta}"
        )));
    }
    Ok((0..a_bar.rows())
        .map(|i| a_bar.row(i).iter().sum::<f64>() + beta)
        .collect())
}

/// The `K_SUBSETS` normalized adjacency matrices of a graph, together with
/// the binary subset masks and degree terms they came from.
///
/// All subsets share the degree terms of the closed adjacency (Σ_k Ā_k).
/// Per-subset degrees would put Λ ≈ β at nodes whose subset row is empty
/// (the center has no centripetal neighbor, far leaves no centrifugal one),
/// inflating entries of adjacent rows by β^{-1/2}; shared degrees keep every
/// entry in [0, 1] and β-perturbations negligible.
#[derive(Clone, Debug)]
pub struct AdjacencyStack {
    a_bar: [Tensor; K_SUBSETS],
    a: [Tensor; K_SUBSETS],
    lambda: Vec<f64>,
    beta: f64,
}

impl AdjacencyStack {
    pub fn from_graph(g: &HOGraph, beta: f64) -> Result<Self> {
        let labels = partition_neighborhoods(g)?;
        let n = g.node_count();
        let mut a_bar: Vec<Tensor> = Vec::with_capacity(K_SUBSETS);
        for k in 0..K_SUBSETS as u8 {
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    if labels[i][j] == Some(k) {
                        data[i * n + j] = 1.0;
                    }
                }
            }
            a_bar.push(Tensor::new(n, n, data));
        }
        let lambda = degree_terms(&g.adjacency_with_self_loops(), beta)?;
        let a: Vec<Tensor> = a_bar
            .iter()
            .map(|m| {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if m.at(i, j) != 0.0 {
                            data[i * n + j] = m.at(i, j) / (lambda[i] * lambda[j]).sqrt();
                        }
                    }
                }
                Tensor::new(n, n, data)
            })
            .collect();
        Ok(AdjacencyStack {
            a_bar: a_bar.try_into().expect("three subsets"),
            a: a.try_into().expect("three subsets"),
            lambda,
            beta,
        })
    }

    pub fn a(&self, k: usize) -> &Tensor {
        &self.a[k]
    }

    pub fn a_bar(&self, k: usize) -> &Tensor {
        &self.a_bar[k]
    }

    /// Degree terms of the closed adjacency, shared by all subsets.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_graph() -> HOGraph {
        build_graph(&GraphConfig::default()).unwrap()
    }

    #[test]
    fn edge_family_counts() {
        let g = default_graph();
        let count = |kind| g.edges().iter().filter(|&&(_, _, k)| k == kind).count();
        assert_eq!(count(EdgeKind::Human), 16);
        assert_eq!(count(EdgeKind::Object), 16);
        assert_eq!(count(EdgeKind::HumanObject), 54);
        assert_eq!(g.node_count(), 26);
    }

    #[test]
    fn no_self_loops_or_duplicates() {
        let g = default_graph();
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, _) in g.edges() {
            assert_ne!(i, j);
            assert!(i < j, "edges stored with i < j");
            assert!(seen.insert((i, j)), "duplicate edge ({i},{j})");
        }
    }

    #[test]
    fn connected_from_node_zero() {
        let lists = default_graph().neighbor_lists();
        let mut seen = vec![false; N_NODES];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &w in &lists[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn cross_edges_touch_exactly_the_default_joints() {
        let g = default_graph();
        let mut joints: Vec<usize> = g
            .edges()
            .iter()
            .filter(|&&(_, _, k)| k == EdgeKind::HumanObject)
            .map(|&(i, _, _)| i)
            .collect();
        joints.sort_unstable();
        joints.dedup();
        assert_eq!(
            joints,
            vec![
                nodes::NOSE,
                nodes::LEFT_WRIST,
                nodes::RIGHT_WRIST,
                nodes::LEFT_HIP,
                nodes::LEFT_ANKLE,
                nodes::RIGHT_ANKLE
            ]
        );
    }

    #[test]
    fn bad_configs_rejected() {
        let mut config = GraphConfig::default();
        config.cross_joints[0] = "noze".into();
        assert!(matches!(build_graph(&config), Err(HokemError::Config(_))));

        let mut config = GraphConfig::default();
        config.cross_joints[1] = "nose".into();
        assert!(matches!(build_graph(&config), Err(HokemError::Config(_))));

        // Object keypoints are not human joints.
        let mut config = GraphConfig::default();
        config.cross_joints[2] = "gravity".into();
        assert!(matches!(build_graph(&config), Err(HokemError::Config(_))));

        let config = GraphConfig {
            center_node: "middle".into(),
            ..GraphConfig::default()
        };
        assert!(matches!(build_graph(&config), Err(HokemError::Config(_))));
    }

    #[test]
    fn three_node_path_partition() {
        // a - b - c with center b.
        let labels = partition_from_edges(3, &[(0, 1), (1, 2)], 1).unwrap();
        assert_eq!(labels[0][1], Some(1), "at a, b is closer");
        assert_eq!(labels[1][0], Some(2));
        assert_eq!(
            labels[1][2],
            Some(2),
            "at the center all neighbors are farther"
        );
        assert_eq!(labels[0][0], Some(0));
        assert_eq!(labels[0][2], None);
    }

    #[test]
    fn disconnected_graph_rejected() {
        assert!(matches!(
            partition_from_edges(4, &[(0, 1)], 0),
            Err(HokemError::Contract(_))
        ));
    }

    #[test]
    fn partition_completeness_on_default_graph() {
        let g = default_graph();
        let stack = AdjacencyStack::from_graph(&g, 0.001).unwrap();
        let sum = stack.a_bar(0).add(stack.a_bar(1)).add(stack.a_bar(2));
        assert_eq!(sum, g.adjacency_with_self_loops());
        for k in 0..K_SUBSETS {
            for &v in stack.a_bar(k).data() {
                assert!(v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn normalization_hand_values() {
        // Unit degrees leave the swap matrix unchanged in the small-beta limit.
        let swap = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let a = normalize_adjacency(&swap, 1e-13).unwrap();
        assert!((a.at(0, 1) - 1.0).abs() < 1e-12);
        assert!((a.at(0, 0)).abs() < 1e-12);

        // Path 0-1-2: entry (0,1) is 1/sqrt(1*2).
        let path = Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let a = normalize_adjacency(&path, 1e-13).unwrap();
        assert!((a.at(0, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-12);

        // An empty row stays zero without NaN.
        let hermit = Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let a = normalize_adjacency(&hermit, 0.001).unwrap();
        assert!(a.is_finite());
        assert_eq!(a.at(0, 0), 0.0);
        assert_eq!(a.at(0, 1), 0.0);

        assert!(matches!(
            normalize_adjacency(&swap, 0.0),
            Err(HokemError::Config(_))
        ));
        assert!(matches!(
            normalize_adjacency(&swap, -1.0),
            Err(HokemError::Config(_))
        ));
    }

    #[test]
    fn root_subset_is_symmetric_after_normalization() {
        let stack = AdjacencyStack::from_graph(&default_graph(), 0.001).unwrap();
        let a0 = stack.a(0);
        let a0_bar = stack.a_bar(0);
        for i in 0..N_NODES {
            for j in 0..N_NODES {
                assert_eq!(a0_bar.at(i, j), a0_bar.at(j, i));
                assert!((a0.at(i, j) - a0.at(j, i)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn beta_perturbation_is_small() {
        let g = default_graph();
        let lo = AdjacencyStack::from_graph(&g, 1e-6).unwrap();
        let hi = AdjacencyStack::from_graph(&g, 0.01).unwrap();
        for k in 0..K_SUBSETS {
            let max_delta = lo
                .a(k)
                .data()
                .iter()
                .zip(hi.a(k).data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_delta < 0.01, "subset {k} moved by {max_delta}");
        }
    }

    #[test]
    fn rebuilds_are_identical_and_round_trip_json() {
        let a = default_graph();
        let b = default_graph();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let restored = HOGraph::from_json(&a.to_json()).unwrap();
        assert_eq!(a, restored);
        let sa = AdjacencyStack::from_graph(&a, 0.001).unwrap();
        let sb = AdjacencyStack::from_graph(&restored, 0.001).unwrap();
        for k in 0..K_SUBSETS {
            assert_eq!(sa.a(k), sb.a(k));
        }
    }

    #[test]
    fn center_distances_follow_topology() {
        let g = default_graph();
        let dist = g.hop_distances().unwrap();
        assert_eq!(dist[nodes::OBJ_GRAVITY], 0);
        assert_eq!(dist[nodes::OBJ_TOP], 1);
        assert_eq!(
            dist[nodes::NOSE],
            1,
            "cross joints touch the object directly"
        );
        assert_eq!(dist[nodes::LEFT_EYE], 2);
        assert_eq!(dist[nodes::LEFT_EAR], 3);
        assert_eq!(dist[nodes::RIGHT_HIP], 2);
    }
}
