//! Scene to dense graph tensors.
//!
//! One node per entity and per component. Node order is depth-first: an
//! entity, then its info, trs, mesh and action components, then its child
//! entities. Features are zero-padded to the widest kind present.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use ndarray::Array2;

use crate::scene::{ComponentKind, EntityId, NodeKind, Scene, SceneError};
use crate::scene_io::{format_f64, EdgeKind, FlatEdge};
use crate::xform::{Form, TransformRepr, XformError};

/// Native feature width of a TRS component in `form`.
pub fn trs_width(form: Form) -> usize {
    match form {
        Form::Matrix => 16,
        f => f.arity() + 3,
    }
}

/// Flattened payload, followed by the scale side channel for every form
/// except `Matrix` (whose scale is already folded in).
pub fn trs_feature(repr: &TransformRepr) -> Vec<f64> {
    let mut v = repr.coeffs();
    if repr.form() != Form::Matrix {
        v.extend(repr.scale());
    }
    v
}

/// Inverse of [`trs_feature`].
pub fn trs_from_feature(form: Form, feature: &[f64]) -> Result<TransformRepr, XformError> {
    if feature.len() < trs_width(form) {
        return Err(XformError::Arity {
            form,
            expected: trs_width(form),
            got: feature.len(),
        });
    }
    let n = form.arity();
    let scale = if form == Form::Matrix {
        [1.0; 3]
    } else {
        [feature[n], feature[n + 1], feature[n + 2]]
    };
    TransformRepr::from_coeffs(form, &feature[..n], scale)
}

/// String-to-id table for node categories. Component nodes use the
/// pseudo-categories `@info`, `@trs`, `@mesh`, `@action`, which always take
/// ids 0..4.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryVocab {
    ids: BTreeMap<String, usize>,
    names: Vec<String>,
}

impl Default for CategoryVocab {
    fn default() -> Self {
        let mut v = CategoryVocab {
            ids: BTreeMap::new(),
            names: Vec::new(),
        };
        for k in ComponentKind::ALL {
            v.id(&component_category(k));
        }
        v
    }
}

impl CategoryVocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id for `name`, inserting it if new.
    pub fn id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.ids.get(name) {
            return i;
        }
        let i = self.names.len();
        self.ids.insert(name.to_string(), i);
        self.names.push(name.to_string());
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn component_category(kind: ComponentKind) -> String {
    format!("@{kind}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub owner: EntityId,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<FlatEdge>,
}

/// Nodes in export order and the undirected edge list.
pub fn node_table(scene: &Scene) -> NodeTable {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut entity_node: BTreeMap<EntityId, usize> = BTreeMap::new();
    for id in scene.depth_first() {
        let e = scene.entity(id).expect("entity in tree");
        let me = nodes.len();
        entity_node.insert(id, me);
        if let Some(p) = e.parent {
            edges.push(FlatEdge {
                src: entity_node[&p],
                dst: me,
                kind: EdgeKind::ParentChild,
            });
        }
        nodes.push(GraphNode {
            kind: NodeKind::Entity,
            owner: id,
            category: e.category.clone(),
        });
        for k in ComponentKind::ALL {
            if scene.has_component(id, k) {
                edges.push(FlatEdge {
                    src: me,
                    dst: nodes.len(),
                    kind: EdgeKind::EntityComponent,
                });
                nodes.push(GraphNode {
                    kind: k.node_kind(),
                    owner: id,
                    category: component_category(k),
                });
            }
        }
    }
    NodeTable { nodes, edges }
}

/// Native feature vector of one node, TRS in its stored form and mesh
/// features truncated to `mesh_width`.
pub fn node_feature(scene: &Scene, node: &GraphNode, mesh_width: usize) -> Vec<f64> {
    match node.kind {
        NodeKind::Entity => {
            let mut v = vec![0.0; NodeKind::ALL.len()];
            v[NodeKind::Entity.index()] = 1.0;
            v
        }
        NodeKind::Info => scene.info(node.owner).map(|i| i.as_features()).unwrap_or_default(),
        NodeKind::Trs => scene.trs(node.owner).map(|t| trs_feature(&t.repr)).unwrap_or_default(),
        NodeKind::Mesh => scene
            .mesh(node.owner)
            .map(|m| m.feature.iter().take(mesh_width).cloned().collect())
            .unwrap_or_default(),
        NodeKind::Action => scene.action(node.owner).map(|a| a.params.clone()).unwrap_or_default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportConfig {
    pub form: Form,
    /// Mesh features are truncated to this many leading values.
    pub mesh_width: usize,
}

/// Truncated mesh width used by tests and the desk-scale experiments.
pub const SMALL_MESH_WIDTH: usize = 64;

impl ExportConfig {
    pub fn new(form: Form) -> Self {
        ExportConfig {
            form,
            mesh_width: crate::scene::MESH_FEATURE_LEN,
        }
    }

    pub fn with_mesh_width(mut self, w: usize) -> Self {
        self.mesh_width = w;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensors {
    pub x: Array2<f64>,
    /// Symmetric 0/1 adjacency with zero diagonal.
    pub a: Array2<f64>,
    pub node_kinds: Vec<NodeKind>,
    pub node_owner: Vec<EntityId>,
    pub categories: Vec<usize>,
    pub edges: Vec<FlatEdge>,
    pub graph_label: Option<usize>,
}

impl GraphTensors {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn f(&self) -> usize {
        self.x.ncols()
    }

    /// Copy with features zero-padded (or truncated) to width `f`.
    pub fn with_width(&self, f: usize) -> GraphTensors {
        let mut x = Array2::zeros((self.n(), f));
        let w = f.min(self.f());
        for i in 0..self.n() {
            for j in 0..w {
                x[[i, j]] = self.x[[i, j]];
            }
        }
        GraphTensors { x, ..self.clone() }
    }

    /// Write `nodes.csv`, `edges.csv` (flat-export layout, with category ids
    /// in place of names) and the dense `features.csv` block (N rows of F).
    pub fn dump(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let to_io = |e: csv::Error| io::Error::other(e);
        let mut w = csv::Writer::from_path(dir.join("nodes.csv")).map_err(to_io)?;
        w.write_record(["node_id", "kind", "owner_entity", "category"]).map_err(to_io)?;
        for i in 0..self.n() {
            w.write_record([
                i.to_string(),
                self.node_kinds[i].name().to_string(),
                self.node_owner[i].to_string(),
                self.categories[i].to_string(),
            ])
            .map_err(to_io)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("edges.csv")).map_err(to_io)?;
        w.write_record(["src", "dst", "edge_kind"]).map_err(to_io)?;
        for e in &self.edges {
            w.write_record([e.src.to_string(), e.dst.to_string(), e.kind.name().to_string()])
                .map_err(to_io)?;
        }
        w.flush()?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(dir.join("features.csv"))
            .map_err(to_io)?;
        for row in self.x.rows() {
            w.write_record(row.iter().map(|v| format_f64(*v))).map_err(to_io)?;
        }
        w.flush()
    }
}

/// Export with every TRS component converted to `cfg.form` first.
pub fn export_tensors(scene: &Scene, cfg: &ExportConfig, vocab: &mut CategoryVocab) -> Result<GraphTensors, SceneError> {
    let scene = scene.convert_all(cfg.form)?;
    let table = node_table(&scene);
    let feats: Vec<Vec<f64>> = table
        .nodes
        .iter()
        .map(|n| node_feature(&scene, n, cfg.mesh_width))
        .collect();
    let n = table.nodes.len();
    let f = feats.iter().map(Vec::len).max().unwrap_or(0);
    let mut x = Array2::zeros((n, f));
    for (i, row) in feats.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    let mut a = Array2::zeros((n, n));
    for e in &table.edges {
        a[[e.src, e.dst]] = 1.0;
        a[[e.dst, e.src]] = 1.0;
    }
    Ok(GraphTensors {
        x,
        a,
        node_kinds: table.nodes.iter().map(|n| n.kind).collect(),
        node_owner: table.nodes.iter().map(|n| n.owner).collect(),
        categories: table.nodes.iter().map(|n| vocab.id(&n.category)).collect(),
        edges: table.edges,
        graph_label: None,
    })
}
