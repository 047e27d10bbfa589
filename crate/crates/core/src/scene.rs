//! Entity-component scenegraph.
//!
//! Entities form a single rooted tree. Each entity owns at most one
//! component of each kind (info, trs, mesh, action). Component payloads are
//! stored per kind, keyed by the owning entity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::xform::{vec_norm, vec_sub, Form, Mat4, TransformRepr, Vec3, XformError};

pub const MESH_FEATURE_LEN: usize = 1024;
const OCTANTS: usize = 8;
const RADIAL_BINS: usize = MESH_FEATURE_LEN / OCTANTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Node kinds of the exported graph, in one-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Entity,
    Info,
    Trs,
    Mesh,
    Action,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::Entity,
        NodeKind::Info,
        NodeKind::Trs,
        NodeKind::Mesh,
        NodeKind::Action,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Entity => "entity",
            NodeKind::Info => "info",
            NodeKind::Trs => "trs",
            NodeKind::Mesh => "mesh",
            NodeKind::Action => "action",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentKind {
    Info,
    Trs,
    Mesh,
    Action,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Info,
        ComponentKind::Trs,
        ComponentKind::Mesh,
        ComponentKind::Action,
    ];

    pub fn node_kind(self) -> NodeKind {
        match self {
            ComponentKind::Info => NodeKind::Info,
            ComponentKind::Trs => NodeKind::Trs,
            ComponentKind::Mesh => NodeKind::Mesh,
            ComponentKind::Action => NodeKind::Action,
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.node_kind().name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("scene already has a root ({0})")]
    RootExists(EntityId),
    #[error("scene has no root")]
    NoRoot,
    #[error("reparenting {child} under {parent} would create a cycle")]
    Cycle { child: EntityId, parent: EntityId },
    #[error("the root entity cannot be reparented")]
    ReparentRoot,
    #[error("entity {0} already has a {1} component")]
    DuplicateComponent(EntityId, ComponentKind),
    #[error("entity {0} has no {1} component")]
    MissingComponent(EntityId, ComponentKind),
    #[error("entity {target} is referenced by the action on {owner}")]
    Referenced { target: EntityId, owner: EntityId },
    #[error("unregistered action type {0:?}")]
    UnknownAction(String),
    #[error("action {action:?} on {owner} expects {expected} params, got {got}")]
    ActionArity {
        owner: EntityId,
        action: String,
        expected: usize,
        got: usize,
    },
    #[error("action {action:?} on {owner} expects {expected} refs, got {got}")]
    ActionRefs {
        owner: EntityId,
        action: String,
        expected: String,
        got: usize,
    },
    #[error("action on {owner} references missing entity {target}")]
    DanglingRef { owner: EntityId, target: EntityId },
    #[error("mesh feature on {0} has length {1}, expected {MESH_FEATURE_LEN}")]
    MeshLength(EntityId, usize),
    #[error("inverted bounds: min {min:?} exceeds max {max:?}")]
    InvertedBounds { min: Vec3, max: Vec3 },
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("singular world transform for entity {0}")]
    Singular(EntityId),
    #[error("transform of entity {0}: {1}")]
    Transform(EntityId, XformError),
}

pub type Result<T, E = SceneError> = std::result::Result<T, E>;

/// Scalar, string or numeric-list metadata value.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Str(String),
    Num(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub category: String,
    pub parent: Option<EntityId>,
    pub children: Vec<EntityId>,
}

/// Census of the owner's graph children: `[entity, trs, mesh, action]`,
/// counting child entities and the owner's own components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InfoComponent {
    pub counts: [usize; 4],
}

impl InfoComponent {
    pub fn as_features(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrsComponent {
    pub repr: TransformRepr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshFeatureComponent {
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDataComponent {
    pub action_type: String,
    pub params: Vec<f64>,
    pub refs: Vec<EntityId>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Info,
    Trs(TrsComponent),
    Mesh(MeshFeatureComponent),
    Action(ActionDataComponent),
}

impl Component {
    pub fn kind(&self) -> ComponentKind {
        match self {
            Component::Info => ComponentKind::Info,
            Component::Trs(_) => ComponentKind::Trs,
            Component::Mesh(_) => ComponentKind::Mesh,
            Component::Action(_) => ComponentKind::Action,
        }
    }
}

/// Registered action layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub params: usize,
    pub min_refs: usize,
    pub max_refs: usize,
}

/// `insert`: params `[min x,y,z, max x,y,z]`; refs `[tool]` (bounds in
/// world frame) or `[tool, target]` (bounds in the target's frame).
/// `proximity`: params `[max_distance]`; refs `[a, b]`, satisfied when the
/// world origins are within the distance.
pub fn action_layout(action_type: &str) -> Option<ActionLayout> {
    match action_type {
        "insert" => Some(ActionLayout {
            params: 6,
            min_refs: 1,
            max_refs: 2,
        }),
        "proximity" => Some(ActionLayout {
            params: 1,
            min_refs: 2,
            max_refs: 2,
        }),
        _ => None,
    }
}

/// Closed axis-aligned box test.
pub fn insert_action_check(pos: Vec3, min: Vec3, max: Vec3) -> Result<bool> {
    if (0..3).any(|i| min[i] > max[i]) {
        return Err(SceneError::InvertedBounds { min, max });
    }
    Ok((0..3).all(|i| min[i] <= pos[i] && pos[i] <= max[i]))
}

/// Outcome of one action evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub owner: EntityId,
    pub result: Result<bool>,
}

/// Deterministic 1024-wide descriptor of a point cloud: centered at the
/// centroid, scaled by the largest radius, binned by octant and radius
/// (8 × 128 bins), then L2-normalized.
pub fn mesh_feature_stub(cloud: &[Vec3]) -> Result<Vec<f64>> {
    if cloud.is_empty() {
        return Err(SceneError::EmptyCloud);
    }
    let n = cloud.len() as f64;
    let mut c = [0.0; 3];
    for p in cloud {
        for i in 0..3 {
            c[i] += p[i];
        }
    }
    let c = [c[0] / n, c[1] / n, c[2] / n];
    let centered: Vec<Vec3> = cloud.iter().map(|p| vec_sub(*p, c)).collect();
    let rmax = centered.iter().map(|p| vec_norm(*p)).fold(0.0, f64::max);
    let mut hist = vec![0.0; MESH_FEATURE_LEN];
    for p in &centered {
        let octant = (p[0] < 0.0) as usize | ((p[1] < 0.0) as usize) << 1 | ((p[2] < 0.0) as usize) << 2;
        let radial = if rmax > 0.0 {
            ((vec_norm(*p) / rmax * RADIAL_BINS as f64) as usize).min(RADIAL_BINS - 1)
        } else {
            0
        };
        hist[octant * RADIAL_BINS + radial] += 1.0;
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(hist.into_iter().map(|v| v / norm).collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub name: String,
    pub meta: BTreeMap<String, MetaValue>,
    entities: BTreeMap<EntityId, Entity>,
    root: Option<EntityId>,
    next_id: u64,
    info: BTreeSet<EntityId>,
    trs: BTreeMap<EntityId, TrsComponent>,
    mesh: BTreeMap<EntityId, MeshFeatureComponent>,
    action: BTreeMap<EntityId, ActionDataComponent>,
    info_cache: BTreeMap<EntityId, InfoComponent>,
    info_stale: bool,
}

impl Scene {
    pub fn new(name: impl Into<String>) -> Self {
        Scene {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn root(&self) -> Option<EntityId> {
        self.root
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    fn entity_mut(&mut self, id: EntityId) -> Result<&mut Entity> {
        self.entities.get_mut(&id).ok_or(SceneError::UnknownEntity(id))
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Class label stored under the `label` metadata key.
    pub fn label(&self) -> Option<&str> {
        match self.meta.get("label") {
            Some(MetaValue::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.meta.insert("label".into(), MetaValue::Str(label.into()));
    }

    /// Add an entity with the next free id. `parent = None` creates the root.
    pub fn add_entity(
        &mut self,
        name: impl Into<String>,
        category: impl Into<String>,
        parent: Option<EntityId>,
    ) -> Result<EntityId> {
        let id = EntityId(self.next_id);
        self.add_entity_with_id(id, name, category, parent)?;
        Ok(id)
    }

    pub fn add_entity_with_id(
        &mut self,
        id: EntityId,
        name: impl Into<String>,
        category: impl Into<String>,
        parent: Option<EntityId>,
    ) -> Result<()> {
        if self.entities.contains_key(&id) {
            return Err(SceneError::DuplicateId(id));
        }
        match parent {
            None => {
                if let Some(r) = self.root {
                    return Err(SceneError::RootExists(r));
                }
                self.root = Some(id);
            }
            Some(p) => self.entity_mut(p)?.children.push(id),
        }
        self.entities.insert(
            id,
            Entity {
                id,
                name: name.into(),
                category: category.into(),
                parent,
                children: Vec::new(),
            },
        );
        self.next_id = self.next_id.max(id.0 + 1);
        self.info_stale = true;
        Ok(())
    }

    pub fn add_component(&mut self, owner: EntityId, component: Component) -> Result<()> {
        if !self.contains(owner) {
            return Err(SceneError::UnknownEntity(owner));
        }
        let kind = component.kind();
        if self.has_component(owner, kind) {
            return Err(SceneError::DuplicateComponent(owner, kind));
        }
        match component {
            Component::Info => {
                self.info.insert(owner);
            }
            Component::Trs(c) => {
                self.trs.insert(owner, c);
            }
            Component::Mesh(c) => {
                self.mesh.insert(owner, c);
            }
            Component::Action(c) => {
                self.action.insert(owner, c);
            }
        }
        self.info_stale = true;
        Ok(())
    }

    pub fn remove_component(&mut self, owner: EntityId, kind: ComponentKind) -> Result<()> {
        let removed = match kind {
            ComponentKind::Info => self.info.remove(&owner),
            ComponentKind::Trs => self.trs.remove(&owner).is_some(),
            ComponentKind::Mesh => self.mesh.remove(&owner).is_some(),
            ComponentKind::Action => self.action.remove(&owner).is_some(),
        };
        if !removed {
            return Err(SceneError::MissingComponent(owner, kind));
        }
        self.info_stale = true;
        Ok(())
    }

    pub fn has_component(&self, owner: EntityId, kind: ComponentKind) -> bool {
        match kind {
            ComponentKind::Info => self.info.contains(&owner),
            ComponentKind::Trs => self.trs.contains_key(&owner),
            ComponentKind::Mesh => self.mesh.contains_key(&owner),
            ComponentKind::Action => self.action.contains_key(&owner),
        }
    }

    pub fn trs(&self, owner: EntityId) -> Option<&TrsComponent> {
        self.trs.get(&owner)
    }

    pub fn set_trs(&mut self, owner: EntityId, repr: TransformRepr) -> Result<()> {
        if !self.contains(owner) {
            return Err(SceneError::UnknownEntity(owner));
        }
        if self.trs.insert(owner, TrsComponent { repr }).is_none() {
            self.info_stale = true;
        }
        Ok(())
    }

    pub fn mesh(&self, owner: EntityId) -> Option<&MeshFeatureComponent> {
        self.mesh.get(&owner)
    }

    pub fn action(&self, owner: EntityId) -> Option<&ActionDataComponent> {
        self.action.get(&owner)
    }

    /// Current census for an info component, recomputed if mutations have
    /// happened since the last refresh.
    pub fn info(&self, owner: EntityId) -> Option<InfoComponent> {
        if !self.info.contains(&owner) {
            return None;
        }
        if !self.info_stale {
            if let Some(c) = self.info_cache.get(&owner) {
                return Some(*c);
            }
        }
        Some(self.census(owner))
    }

    pub fn info_is_stale(&self) -> bool {
        self.info_stale
    }

    pub fn refresh_info(&mut self) {
        let fresh: BTreeMap<_, _> = self.info.iter().map(|&id| (id, self.census(id))).collect();
        self.info_cache = fresh;
        self.info_stale = false;
    }

    fn census(&self, owner: EntityId) -> InfoComponent {
        let children = self.entities.get(&owner).map_or(0, |e| e.children.len());
        InfoComponent {
            counts: [
                children,
                self.trs.contains_key(&owner) as usize,
                self.mesh.contains_key(&owner) as usize,
                self.action.contains_key(&owner) as usize,
            ],
        }
    }

    pub fn is_ancestor(&self, ancestor: EntityId, mut node: EntityId) -> bool {
        while let Some(p) = self.entities.get(&node).and_then(|e| e.parent) {
            if p == ancestor {
                return true;
            }
            node = p;
        }
        false
    }

    pub fn reparent(&mut self, child: EntityId, new_parent: EntityId) -> Result<()> {
        if !self.contains(new_parent) {
            return Err(SceneError::UnknownEntity(new_parent));
        }
        let old = self.entity(child).ok_or(SceneError::UnknownEntity(child))?.parent;
        let Some(old) = old else {
            return Err(SceneError::ReparentRoot);
        };
        if child == new_parent || self.is_ancestor(child, new_parent) {
            return Err(SceneError::Cycle {
                child,
                parent: new_parent,
            });
        }
        self.entity_mut(old)?.children.retain(|c| *c != child);
        self.entity_mut(new_parent)?.children.push(child);
        self.entity_mut(child)?.parent = Some(new_parent);
        self.info_stale = true;
        Ok(())
    }

    /// Entities of the subtree at `id`, depth-first pre-order.
    pub fn subtree(&self, id: EntityId) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if let Some(e) = self.entities.get(&n) {
                out.push(n);
                stack.extend(e.children.iter().rev());
            }
        }
        out
    }

    /// Whole tree in depth-first document order.
    pub fn depth_first(&self) -> Vec<EntityId> {
        self.root.map(|r| self.subtree(r)).unwrap_or_default()
    }

    /// Remove an entity and its subtree with all owned components. Fails if
    /// an action outside the subtree references a removed entity.
    pub fn remove_entity(&mut self, id: EntityId) -> Result<()> {
        if !self.contains(id) {
            return Err(SceneError::UnknownEntity(id));
        }
        let doomed: BTreeSet<EntityId> = self.subtree(id).into_iter().collect();
        for (owner, a) in &self.action {
            if doomed.contains(owner) {
                continue;
            }
            if let Some(t) = a.refs.iter().find(|r| doomed.contains(r)) {
                return Err(SceneError::Referenced {
                    target: *t,
                    owner: *owner,
                });
            }
        }
        match self.entities[&id].parent {
            Some(p) => self.entity_mut(p)?.children.retain(|c| *c != id),
            None => self.root = None,
        }
        for d in &doomed {
            self.entities.remove(d);
            self.info.remove(d);
            self.trs.remove(d);
            self.mesh.remove(d);
            self.action.remove(d);
            self.info_cache.remove(d);
        }
        self.info_stale = true;
        Ok(())
    }

    /// Change an entity's category label.
    pub fn set_category(&mut self, id: EntityId, category: impl Into<String>) -> Result<()> {
        self.entity_mut(id)?.category = category.into();
        Ok(())
    }

    /// Product of ancestor TRS matrices from the root down to `id`.
    pub fn world_transform(&self, id: EntityId) -> Result<Mat4> {
        if !self.contains(id) {
            return Err(SceneError::UnknownEntity(id));
        }
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.entities[&cur].parent {
            chain.push(p);
            cur = p;
        }
        let mut world = Mat4::IDENTITY;
        for e in chain.into_iter().rev() {
            if let Some(t) = self.trs.get(&e) {
                let m = t.repr.to_matrix().map_err(|err| SceneError::Transform(e, err))?;
                world = world.mul(&m);
            }
        }
        Ok(world)
    }

    pub fn world_position(&self, id: EntityId) -> Result<Vec3> {
        Ok(self.world_transform(id)?.origin())
    }

    /// Evaluate every action of `action_type` under `subtree` (whole tree when
    /// `None`) in depth-first order, updating `satisfied`.
    pub fn run_action_system(&mut self, action_type: &str, subtree: Option<EntityId>) -> Result<Vec<ActionOutcome>> {
        if action_layout(action_type).is_none() {
            return Err(SceneError::UnknownAction(action_type.to_string()));
        }
        let order = match subtree {
            Some(s) if !self.contains(s) => return Err(SceneError::UnknownEntity(s)),
            Some(s) => self.subtree(s),
            None => self.depth_first(),
        };
        let mut outcomes = Vec::new();
        for owner in order {
            let Some(a) = self.action.get(&owner) else { continue };
            if a.action_type != action_type {
                continue;
            }
            let result = self.evaluate_action(owner, a);
            if let (Ok(sat), Some(a)) = (&result, self.action.get_mut(&owner)) {
                a.satisfied = *sat;
            }
            outcomes.push(ActionOutcome { owner, result });
        }
        Ok(outcomes)
    }

    fn evaluate_action(&self, owner: EntityId, a: &ActionDataComponent) -> Result<bool> {
        self.check_action(owner, a)?;
        match a.action_type.as_str() {
            "insert" => {
                let mut pos = self.world_position(a.refs[0])?;
                if let Some(&target) = a.refs.get(1) {
                    let inv = self
                        .world_transform(target)?
                        .inverse_affine()
                        .ok_or(SceneError::Singular(target))?;
                    pos = inv.apply_point(pos);
                }
                let p = &a.params;
                insert_action_check(pos, [p[0], p[1], p[2]], [p[3], p[4], p[5]])
            }
            "proximity" => {
                let d = vec_norm(vec_sub(self.world_position(a.refs[0])?, self.world_position(a.refs[1])?));
                Ok(d <= a.params[0])
            }
            other => Err(SceneError::UnknownAction(other.to_string())),
        }
    }

    fn check_action(&self, owner: EntityId, a: &ActionDataComponent) -> Result<()> {
        let layout = action_layout(&a.action_type).ok_or_else(|| SceneError::UnknownAction(a.action_type.clone()))?;
        if a.params.len() != layout.params {
            return Err(SceneError::ActionArity {
                owner,
                action: a.action_type.clone(),
                expected: layout.params,
                got: a.params.len(),
            });
        }
        if a.refs.len() < layout.min_refs || a.refs.len() > layout.max_refs {
            return Err(SceneError::ActionRefs {
                owner,
                action: a.action_type.clone(),
                expected: format!("{}..={}", layout.min_refs, layout.max_refs),
                got: a.refs.len(),
            });
        }
        if let Some(t) = a.refs.iter().find(|r| !self.contains(**r)) {
            return Err(SceneError::DanglingRef { owner, target: *t });
        }
        Ok(())
    }

    /// Full semantic validation: root present, transforms valid, mesh
    /// widths, action layouts and references.
    pub fn validate(&self) -> Result<()> {
        if self.root.is_none() {
            return Err(SceneError::NoRoot);
        }
        for id in self.depth_first() {
            if let Some(t) = self.trs.get(&id) {
                t.repr.validate().map_err(|e| SceneError::Transform(id, e))?;
            }
            if let Some(m) = self.mesh.get(&id) {
                if m.feature.len() != MESH_FEATURE_LEN {
                    return Err(SceneError::MeshLength(id, m.feature.len()));
                }
            }
            if let Some(a) = self.action.get(&id) {
                self.check_action(id, a)?;
            }
        }
        Ok(())
    }

    /// Copy of the scene with every TRS component converted to `form`.
    pub fn convert_all(&self, form: Form) -> Result<Scene> {
        let mut out = self.clone();
        for (id, t) in out.trs.iter_mut() {
            t.repr = t.repr.convert(form).map_err(|e| SceneError::Transform(*id, e))?;
        }
        Ok(out)
    }

    /// Census of every component kind in the scene.
    pub fn component_counts(&self) -> [usize; 4] {
        [self.info.len(), self.trs.len(), self.mesh.len(), self.action.len()]
    }
}

/// Sample `n` points on the surface of the axis-aligned unit cube.
pub fn sample_cube_surface(n: usize, rng: &mut impl rand::Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            let face = rng.gen_range(0..6);
            let (a, b): (f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let s = if face % 2 == 0 { 0.5 } else { -0.5 };
            match face / 2 {
                0 => [s, a, b],
                1 => [a, s, b],
                _ => [a, b, s],
            }
        })
        .collect()
}

/// Sample `n` points on the unit sphere.
pub fn sample_sphere_surface(n: usize, rng: &mut impl rand::Rng) -> Vec<Vec3> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| loop {
            let v: Vec3 = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            let r = vec_norm(v);
            if r > 1e-9 {
                break [v[0] / r, v[1] / r, v[2] / r];
            }
        })
        .collect()
}

/// Sample `n` points on a cylinder of radius 0.5 and height 1 (side only).
pub fn sample_cylinder_surface(n: usize, rng: &mut impl rand::Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            [0.5 * theta.cos(), 0.5 * theta.sin(), rng.gen_range(-0.5..0.5)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xform::{Mat4, Quaternion, RigidPose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn translated(t: Vec3) -> TransformRepr {
        TransformRepr::matrix(Mat4::translation(t))
    }

    fn insert_action(refs: Vec<EntityId>, lo: f64, hi: f64) -> Component {
        Component::Action(ActionDataComponent {
            action_type: "insert".into(),
            params: vec![lo, lo, lo, hi, hi, hi],
            refs,
            satisfied: false,
        })
    }

    #[test]
    fn add_root_then_child() {
        let mut s = Scene::new("s");
        let root = s.add_entity("root", "Root", None).unwrap();
        let child = s.add_entity("c", "Thing", Some(root)).unwrap();
        assert_eq!(s.entity(child).unwrap().parent, Some(root));
        assert_eq!(s.entity(root).unwrap().children, vec![child]);
        assert_eq!(s.add_entity("r2", "", None), Err(SceneError::RootExists(root)));
        assert!(s.add_entity("x", "", Some(EntityId(99))).is_err());
    }

    #[test]
    fn reparent_rules() {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        let a = s.add_entity("a", "", Some(r)).unwrap();
        let b = s.add_entity("b", "", Some(a)).unwrap();
        let c = s.add_entity("c", "", Some(r)).unwrap();
        assert_eq!(s.reparent(a, b), Err(SceneError::Cycle { child: a, parent: b }));
        assert_eq!(s.reparent(a, a), Err(SceneError::Cycle { child: a, parent: a }));
        assert_eq!(s.reparent(r, c), Err(SceneError::ReparentRoot));
        s.reparent(b, c).unwrap();
        assert_eq!(s.entity(c).unwrap().children, vec![b]);
        assert!(s.entity(a).unwrap().children.is_empty());
    }

    #[test]
    fn component_uniqueness() {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        s.add_component(r, Component::Trs(TrsComponent { repr: TransformRepr::identity() }))
            .unwrap();
        let err = s
            .add_component(r, Component::Trs(TrsComponent { repr: TransformRepr::identity() }))
            .unwrap_err();
        assert_eq!(err, SceneError::DuplicateComponent(r, ComponentKind::Trs));
        assert!(s.add_component(EntityId(7), Component::Info).is_err());
    }

    #[test]
    fn info_counts_refresh_lazily() {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        s.add_component(r, Component::Info).unwrap();
        s.refresh_info();
        assert_eq!(s.info(r).unwrap().counts, [0, 0, 0, 0]);
        s.add_entity("a", "", Some(r)).unwrap();
        s.set_trs(r, TransformRepr::identity()).unwrap();
        assert!(s.info_is_stale());
        assert_eq!(s.info(r).unwrap().counts, [1, 1, 0, 0]);
        s.refresh_info();
        assert!(!s.info_is_stale());
        assert_eq!(s.info(r).unwrap().counts, [1, 1, 0, 0]);
    }

    #[test]
    fn world_transform_chain() {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        let c = s.add_entity("c", "", Some(r)).unwrap();
        let g = s.add_entity("g", "", Some(c)).unwrap();
        assert_eq!(s.world_transform(g).unwrap(), Mat4::IDENTITY);
        s.set_trs(r, TransformRepr::identity()).unwrap();
        s.set_trs(c, translated([1.0, 0.0, 0.0])).unwrap();
        s.set_trs(g, translated([0.0, 1.0, 0.0])).unwrap();
        assert_eq!(s.world_position(g).unwrap(), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn world_transform_mixed_forms() {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        let c = s.add_entity("c", "", Some(r)).unwrap();
        let pose = RigidPose {
            rotation: Quaternion::new(0.8, 0.0, 0.6, 0.0),
            translation: [1.0, 2.0, 3.0],
            scale: [1.5; 3],
        };
        s.set_trs(r, TransformRepr::from_pose(&pose, Form::Matrix).unwrap()).unwrap();
        s.set_trs(c, translated([0.5, -1.0, 2.0])).unwrap();
        let reference = s.world_transform(c).unwrap();
        s.set_trs(r, TransformRepr::from_pose(&pose, Form::PgaMotor).unwrap()).unwrap();
        assert!(s.world_transform(c).unwrap().max_abs_diff(&reference) < 1e-9);
    }

    #[test]
    fn insert_check_cases() {
        let (lo, hi) = ([-1.0; 3], [1.0; 3]);
        assert!(insert_action_check([0.0; 3], lo, hi).unwrap());
        assert!(!insert_action_check([2.0, 0.0, 0.0], lo, hi).unwrap());
        assert!(insert_action_check([1.0, 0.0, 0.0], lo, hi).unwrap());
        assert!(insert_action_check([0.0; 3], hi, lo).is_err());
    }

    fn action_fixture() -> (Scene, EntityId, EntityId, EntityId) {
        let mut s = Scene::new("s");
        let r = s.add_entity("r", "", None).unwrap();
        let knee = s.add_entity("knee", "Knee", Some(r)).unwrap();
        let tool = s.add_entity("scalpel", "Scalpel", Some(r)).unwrap();
        s.set_trs(knee, translated([10.0, 0.0, 0.0])).unwrap();
        s.set_trs(tool, translated([10.5, 0.0, 0.0])).unwrap();
        s.add_component(knee, insert_action(vec![tool, knee], -1.0, 1.0)).unwrap();
        s.add_component(tool, insert_action(vec![tool], -1.0, 1.0)).unwrap();
        (s, r, knee, tool)
    }

    #[test]
    fn action_system_order_and_values() {
        let mut s = Scene::new("empty");
        s.add_entity("r", "", None).unwrap();
        assert!(s.run_action_system("insert", None).unwrap().is_empty());

        let (mut s, _, knee, tool) = action_fixture();
        let out = s.run_action_system("insert", None).unwrap();
        assert_eq!(
            out,
            vec![
                ActionOutcome { owner: knee, result: Ok(true) },
                ActionOutcome { owner: tool, result: Ok(false) },
            ]
        );
        assert!(s.action(knee).unwrap().satisfied);
        assert_eq!(s.run_action_system("insert", None).unwrap(), out);
        assert_eq!(s.run_action_system("insert", Some(tool)).unwrap().len(), 1);
        assert!(s.run_action_system("teleport", None).is_err());
    }

    #[test]
    fn action_errors_do_not_stop_traversal() {
        let (mut s, r, knee, _) = action_fixture();
        s.add_component(r, insert_action(vec![EntityId(42)], 0.0, 1.0)).unwrap();
        let out = s.run_action_system("insert", None).unwrap();
        assert_eq!(out.len(), 3);
        assert!(matches!(out[0].result, Err(SceneError::DanglingRef { .. })));
        assert_eq!(out[1], ActionOutcome { owner: knee, result: Ok(true) });
    }

    #[test]
    fn proximity_action() {
        let (mut s, r, knee, tool) = action_fixture();
        s.add_component(
            r,
            Component::Action(ActionDataComponent {
                action_type: "proximity".into(),
                params: vec![0.5],
                refs: vec![knee, tool],
                satisfied: false,
            }),
        )
        .unwrap();
        let out = s.run_action_system("proximity", None).unwrap();
        assert_eq!(out, vec![ActionOutcome { owner: r, result: Ok(true) }]);
    }

    #[test]
    fn remove_subtree_and_references() {
        let (mut s, _, knee, tool) = action_fixture();
        assert!(matches!(s.remove_entity(tool), Err(SceneError::Referenced { .. })));
        s.remove_component(knee, ComponentKind::Action).unwrap();
        s.remove_entity(tool).unwrap();
        assert!(!s.contains(tool));
        assert!(s.action(tool).is_none());
        s.validate().unwrap();
    }

    #[test]
    fn validate_catches_bad_payloads() {
        let (mut s, r, _, _) = action_fixture();
        s.validate().unwrap();
        s.add_component(r, Component::Mesh(MeshFeatureComponent { feature: vec![0.0; 3] }))
            .unwrap();
        assert_eq!(s.validate(), Err(SceneError::MeshLength(r, 3)));
    }

    #[test]
    fn mesh_stub_basics() {
        let f = mesh_feature_stub(&[[0.0; 3]]).unwrap();
        assert_eq!(f.len(), MESH_FEATURE_LEN);
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|v| *v == 0.0));
        assert!(mesh_feature_stub(&[]).is_err());
    }

    #[test]
    fn mesh_stub_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // dyadic grid keeps centering exact
        let cloud: Vec<Vec3> = (0..500)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    *c = rand::Rng::gen_range(&mut rng, -64i32..64) as f64 / 64.0;
                }
                p
            })
            .collect();
        let moved: Vec<Vec3> = cloud.iter().map(|p| [p[0] + 3.0, p[1] - 2.0, p[2] + 5.0]).collect();
        assert_eq!(mesh_feature_stub(&cloud).unwrap(), mesh_feature_stub(&moved).unwrap());
    }

    #[test]
    fn mesh_stub_separates_primitives() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cube = mesh_feature_stub(&sample_cube_surface(2000, &mut rng)).unwrap();
        let sphere = mesh_feature_stub(&sample_sphere_surface(2000, &mut rng)).unwrap();
        let cos: f64 = cube.iter().zip(&sphere).map(|(a, b)| a * b).sum();
        assert!(cos < 0.99, "cosine {cos}");
        let norm: f64 = cube.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        #[derive(Debug, Clone)]
        enum Op {
            Add(usize),
            Reparent(usize, usize),
            Remove(usize),
            Toggle(usize, usize),
        }

        fn op() -> impl Strategy<Value = Op> {
            prop_oneof![
                3 => any::<usize>().prop_map(Op::Add),
                2 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Reparent(a, b)),
                1 => any::<usize>().prop_map(Op::Remove),
                3 => (any::<usize>(), 0usize..4).prop_map(|(a, k)| Op::Toggle(a, k)),
            ]
        }

        fn component(kind: usize) -> Component {
            match kind {
                0 => Component::Info,
                1 => Component::Trs(TrsComponent { repr: TransformRepr::identity() }),
                2 => Component::Mesh(MeshFeatureComponent { feature: vec![0.0; MESH_FEATURE_LEN] }),
                _ => Component::Action(ActionDataComponent {
                    action_type: "insert".into(),
                    params: vec![0.0; 6],
                    refs: vec![],
                    satisfied: false,
                }),
            }
        }

        proptest! {
            #[test]
            fn mutation_fuzz_matches_oracle(ops in prop::collection::vec(op(), 1..80)) {
                let mut s = Scene::new("fuzz");
                let root = s.add_entity("root", "", None).unwrap();
                let mut parent: BTreeMap<EntityId, Option<EntityId>> = BTreeMap::new();
                let mut comps: BTreeSet<(EntityId, usize)> = BTreeSet::new();
                parent.insert(root, None);
                for op in ops {
                    let ids: Vec<EntityId> = parent.keys().cloned().collect();
                    let pick = |i: usize| ids[i % ids.len()];
                    match op {
                        Op::Add(p) => {
                            let p = pick(p);
                            let id = s.add_entity("n", "", Some(p)).unwrap();
                            parent.insert(id, Some(p));
                        }
                        Op::Reparent(c, p) => {
                            let (c, p) = (pick(c), pick(p));
                            let mut walk = Some(p);
                            let mut cyclic = false;
                            while let Some(w) = walk {
                                if w == c { cyclic = true; }
                                walk = parent[&w];
                            }
                            let ok = s.reparent(c, p).is_ok();
                            prop_assert_eq!(ok, !cyclic && parent[&c].is_some());
                            if ok { parent.insert(c, Some(p)); }
                        }
                        Op::Remove(i) => {
                            let v = pick(i);
                            if v == root { continue; }
                            s.remove_entity(v).unwrap();
                            let doomed: Vec<EntityId> = parent.keys().cloned().filter(|&e| {
                                let mut w = Some(e);
                                while let Some(x) = w {
                                    if x == v { return true; }
                                    w = parent[&x];
                                }
                                false
                            }).collect();
                            for d in doomed {
                                parent.remove(&d);
                                comps.retain(|(o, _)| *o != d);
                            }
                        }
                        Op::Toggle(i, k) => {
                            let owner = pick(i);
                            let kind = ComponentKind::ALL[k];
                            if comps.remove(&(owner, k)) {
                                s.remove_component(owner, kind).unwrap();
                            } else {
                                s.add_component(owner, component(k)).unwrap();
                                comps.insert((owner, k));
                            }
                        }
                    }
                    // tree matches the oracle parent map
                    prop_assert_eq!(s.len(), parent.len());
                    for (id, p) in &parent {
                        prop_assert_eq!(s.entity(*id).unwrap().parent, *p);
                    }
                    prop_assert_eq!(s.depth_first().len(), parent.len());
                    // info census matches brute force
                    for (id, _) in comps.iter().filter(|(_, k)| *k == 0) {
                        let kids = parent.values().filter(|p| **p == Some(*id)).count();
                        let has = |k| comps.contains(&(*id, k)) as usize;
                        prop_assert_eq!(s.info(*id).unwrap().counts, [kids, has(1), has(2), has(3)]);
                    }
                }
            }
        }
    }
}
