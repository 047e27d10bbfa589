//! Procedural scenes: two room templates, noise augmentation and the
//! cube-stack generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::scene::{
    mesh_feature_stub, sample_cube_surface, sample_cylinder_surface, sample_sphere_surface, ActionDataComponent,
    Component, EntityId, MeshFeatureComponent, Scene,
};
use crate::xform::{vec_norm, Form, Mat4, Quaternion, RigidPose, TransformRepr, Vec3};

const CLOUD_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Cube,
    Sphere,
    Cylinder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionBlueprint {
    pub action_type: &'static str,
    pub params: Vec<f64>,
    /// Slots of the referenced entities.
    pub refs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityBlueprint {
    pub name: &'static str,
    pub category: &'static str,
    pub parent: Option<usize>,
    pub translation: Vec3,
    pub yaw_deg: f64,
    pub scale: f64,
    pub primitive: Primitive,
    /// Extent of the sampled mesh cloud.
    pub size: Vec3,
    /// May be dropped by [`gen_or_dataset`].
    pub optional: bool,
    /// Placement may be jittered by [`gen_or_dataset`].
    pub movable: bool,
    pub action: Option<ActionBlueprint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTemplate {
    pub name: &'static str,
    pub label: &'static str,
    pub entities: Vec<EntityBlueprint>,
}

#[allow(clippy::too_many_arguments)]
fn bp(
    name: &'static str,
    category: &'static str,
    parent: Option<usize>,
    translation: Vec3,
    yaw_deg: f64,
    primitive: Primitive,
    size: Vec3,
    optional: bool,
    movable: bool,
) -> EntityBlueprint {
    EntityBlueprint {
        name,
        category,
        parent,
        translation,
        yaw_deg,
        scale: 1.0,
        primitive,
        size,
        optional,
        movable,
        action: None,
    }
}

/// Surgical operating room. The scalpel carries an `insert` action whose
/// bounds live in the knee's frame.
pub fn operating_room() -> SceneTemplate {
    use Primitive::*;
    let mut entities = vec![
        bp("operating_room", "OperatingRoom", None, [0.0; 3], 0.0, Cube, [8.0, 8.0, 3.0], false, false),
        bp("table", "OperatingTable", Some(0), [0.0, 0.0, 0.8], 0.0, Cube, [2.0, 0.8, 0.1], false, false),
        bp("patient", "Patient", Some(1), [0.0, 0.0, 0.2], 0.0, Cylinder, [1.8, 0.5, 0.3], false, false),
        bp("knee", "Knee", Some(2), [0.4, 0.0, 0.1], 0.0, Sphere, [0.15, 0.15, 0.15], false, false),
        bp("tray", "InstrumentTray", Some(0), [1.2, 0.8, 0.9], 0.0, Cube, [0.5, 0.3, 0.05], false, true),
        bp("scalpel", "Scalpel", Some(0), [0.45, 0.02, 1.15], 30.0, Cylinder, [0.15, 0.01, 0.01], false, false),
        bp("lamp", "SurgicalLamp", Some(0), [0.0, 0.0, 2.5], 0.0, Sphere, [0.6, 0.6, 0.2], false, true),
        bp("monitor", "Monitor", Some(0), [-1.5, 1.0, 1.5], 45.0, Cube, [0.6, 0.05, 0.4], true, true),
        bp("anesthesia", "AnesthesiaMachine", Some(0), [-1.2, -0.8, 0.7], 0.0, Cube, [0.6, 0.6, 1.4], true, true),
        bp("iv_stand", "IVStand", Some(0), [0.8, -1.0, 1.0], 0.0, Cylinder, [0.1, 0.1, 2.0], true, true),
        bp("surgeon", "Surgeon", Some(0), [0.5, 0.8, 0.9], 180.0, Cylinder, [0.4, 0.4, 1.8], true, true),
        bp("nurse", "Nurse", Some(0), [1.5, 0.2, 0.9], 90.0, Cylinder, [0.4, 0.4, 1.7], true, true),
    ];
    entities[5].action = Some(ActionBlueprint {
        action_type: "insert",
        params: vec![-0.1, -0.1, -0.1, 0.1, 0.1, 0.1],
        refs: vec![5, 3],
    });
    SceneTemplate {
        name: "operating_room",
        label: "operating_room",
        entities,
    }
}

pub fn living_room() -> SceneTemplate {
    use Primitive::*;
    let entities = vec![
        bp("living_room", "LivingRoom", None, [0.0; 3], 0.0, Cube, [6.0, 5.0, 2.6], false, false),
        bp("sofa", "Sofa", Some(0), [0.0, -2.0, 0.4], 0.0, Cube, [2.2, 0.9, 0.8], false, true),
        bp("tv_stand", "TVStand", Some(0), [0.0, 2.0, 0.3], 180.0, Cube, [1.6, 0.4, 0.6], false, true),
        bp("tv", "TV", Some(2), [0.0, 0.0, 0.6], 0.0, Cube, [1.2, 0.05, 0.7], false, false),
        bp("coffee_table", "CoffeeTable", Some(0), [0.0, 0.0, 0.25], 0.0, Cube, [1.0, 0.6, 0.05], false, true),
        bp("remote", "Remote", Some(4), [0.2, 0.1, 0.05], 20.0, Cube, [0.15, 0.05, 0.02], false, false),
        bp("armchair", "Armchair", Some(0), [1.8, -1.0, 0.4], -60.0, Cube, [0.9, 0.9, 0.8], true, true),
        bp("floor_lamp", "FloorLamp", Some(0), [-2.0, -2.0, 0.8], 0.0, Cylinder, [0.3, 0.3, 1.6], true, true),
        bp("rug", "Rug", Some(0), [0.0, 0.0, 0.01], 0.0, Cube, [2.5, 1.8, 0.01], true, true),
        bp("bookshelf", "Bookshelf", Some(0), [-2.5, 1.0, 1.0], 90.0, Cube, [1.0, 0.3, 2.0], true, true),
        bp("plant", "Plant", Some(0), [2.5, 2.0, 0.5], 0.0, Sphere, [0.5, 0.5, 1.0], true, true),
        bp("side_table", "SideTable", Some(0), [-1.5, -2.0, 0.3], 0.0, Cube, [0.5, 0.5, 0.6], true, true),
    ];
    SceneTemplate {
        name: "living_room",
        label: "living_room",
        entities,
    }
}

fn yaw_quat(deg: f64) -> Quaternion {
    let half = deg.to_radians() / 2.0;
    Quaternion::new(half.cos(), 0.0, 0.0, half.sin())
}

fn mesh_for(b: &EntityBlueprint, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let unit = match b.primitive {
        Primitive::Cube => sample_cube_surface(CLOUD_POINTS, rng),
        Primitive::Sphere => sample_sphere_surface(CLOUD_POINTS, rng),
        Primitive::Cylinder => sample_cylinder_surface(CLOUD_POINTS, rng),
    };
    let cloud: Vec<Vec3> = unit
        .iter()
        .map(|p| [p[0] * b.size[0], p[1] * b.size[1], p[2] * b.size[2]])
        .collect();
    mesh_feature_stub(&cloud).expect("non-empty cloud")
}

fn build(template: &SceneTemplate, blueprints: &[(usize, EntityBlueprint)], seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::new(template.name);
    scene.set_label(template.label);
    let mut slot_id: Vec<Option<EntityId>> = vec![None; template.entities.len()];
    for (slot, b) in blueprints {
        let parent = b.parent.map(|p| slot_id[p].expect("parent instantiated before child"));
        let id = scene.add_entity(b.name, b.category, parent).expect("valid blueprint");
        slot_id[*slot] = Some(id);
        let pose = RigidPose {
            rotation: yaw_quat(b.yaw_deg),
            translation: b.translation,
            scale: [b.scale; 3],
        };
        scene
            .set_trs(id, TransformRepr::from_pose(&pose, Form::Matrix).expect("rigid pose"))
            .expect("entity exists");
        let feature = mesh_for(b, &mut rng);
        scene
            .add_component(id, Component::Mesh(MeshFeatureComponent { feature }))
            .expect("fresh entity");
    }
    for (slot, b) in blueprints {
        let id = slot_id[*slot].expect("instantiated");
        if !scene.entity(id).expect("exists").children.is_empty() {
            scene.add_component(id, Component::Info).expect("fresh entity");
        }
        if let Some(a) = &b.action {
            let refs: Vec<EntityId> = a.refs.iter().filter_map(|r| slot_id[*r]).collect();
            scene
                .add_component(
                    id,
                    Component::Action(ActionDataComponent {
                        action_type: a.action_type.to_string(),
                        params: a.params.clone(),
                        refs,
                        satisfied: false,
                    }),
                )
                .expect("fresh entity");
        }
    }
    for kind in ["insert", "proximity"] {
        scene.run_action_system(kind, None).expect("registered action");
    }
    scene.refresh_info();
    scene
}

/// Deterministic instantiation; `seed` drives mesh-cloud sampling.
pub fn instantiate(template: &SceneTemplate, seed: u64) -> Scene {
    let all: Vec<(usize, EntityBlueprint)> = template.entities.iter().cloned().enumerate().collect();
    build(template, &all, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationConfig {
    pub seed: u64,
    /// Translation noise σ as a fraction of the scene diameter.
    pub translation_sigma: f64,
    pub rotation_max_deg: f64,
    pub mesh_sigma: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            seed: 0,
            translation_sigma: 0.05,
            rotation_max_deg: 5.0,
            mesh_sigma: 0.01,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.translation_sigma >= 0.0) || !(self.mesh_sigma >= 0.0) {
            return Err("noise σ must be non-negative".into());
        }
        if !(0.0..180.0).contains(&self.rotation_max_deg) {
            return Err(format!("rotation angle {} outside [0, 180)", self.rotation_max_deg));
        }
        Ok(())
    }
}

/// Diagonal of the bounding box of all entity world origins.
pub fn scene_diameter(scene: &Scene) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for id in scene.depth_first() {
        if let Ok(p) = scene.world_position(id) {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
    }
    if lo[0].is_finite() {
        vec_norm([hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]])
    } else {
        0.0
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = vec_norm(v);
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Perturb every TRS (Gaussian translation, small rotation composed on the
/// parent side) and jitter mesh features. Topology, categories and actions
/// are untouched; each TRS keeps its representation form.
pub fn augment(scene: &Scene, cfg: &AugmentationConfig) -> Result<Scene, String> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = scene.clone();
    let t_sigma = cfg.translation_sigma * scene_diameter(scene);
    let move_trs = t_sigma > 0.0 || cfg.rotation_max_deg > 0.0;
    let t_noise = Normal::new(0.0, t_sigma).map_err(|e| e.to_string())?;
    let m_noise = Normal::new(0.0, cfg.mesh_sigma).map_err(|e| e.to_string())?;
    for id in scene.depth_first() {
        if let (true, Some(trs)) = (move_trs, scene.trs(id)) {
            let form = trs.repr.form();
            let mut pose = trs.repr.to_pose().map_err(|e| e.to_string())?;
            for i in 0..3 {
                pose.translation[i] += t_noise.sample(&mut rng);
            }
            let axis = random_unit_vector(&mut rng);
            let angle = rng.gen_range(0.0..=cfg.rotation_max_deg).to_radians();
            let (s, c) = (angle / 2.0).sin_cos();
            let dq = Quaternion::new(c, s * axis[0], s * axis[1], s * axis[2]);
            let q = dq.mul(&pose.rotation);
            pose.rotation = q.scale(1.0 / q.norm()).canonical();
            let repr = TransformRepr::from_pose(&pose, form).map_err(|e| e.to_string())?;
            out.set_trs(id, repr).map_err(|e| e.to_string())?;
        }
        if let (true, Some(mesh)) = (cfg.mesh_sigma > 0.0, scene.mesh(id)) {
            let feature: Vec<f64> = mesh.feature.iter().map(|v| v + m_noise.sample(&mut rng)).collect();
            out.remove_component(id, crate::scene::ComponentKind::Mesh)
                .map_err(|e| e.to_string())?;
            out.add_component(id, Component::Mesh(MeshFeatureComponent { feature }))
                .map_err(|e| e.to_string())?;
        }
    }
    out.refresh_info();
    Ok(out)
}

/// `n_per_class` augmentations of each template, alternating classes.
/// Labels: 0 = operating room, 1 = living room.
pub fn gen_classification_dataset(n_per_class: usize, cfg: &AugmentationConfig) -> Result<Vec<(Scene, usize)>, String> {
    let bases = [instantiate(&operating_room(), cfg.seed), instantiate(&living_room(), cfg.seed)];
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for (label, base) in bases.iter().enumerate() {
            let c = AugmentationConfig {
                seed: cfg.seed ^ ((2 * i + label) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                ..*cfg
            };
            out.push((augment(base, &c)?, label));
        }
    }
    Ok(out)
}

/// `n` operating rooms with a random subset of optional props and jittered
/// placements. Scene `i` uses seed `seed ^ i`.
pub fn gen_or_dataset(n: usize, seed: u64) -> Vec<Scene> {
    let template = operating_room();
    (0..n)
        .map(|i| {
            let s = seed ^ i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut chosen = Vec::new();
            for (slot, b) in template.entities.iter().enumerate() {
                if b.optional && !rng.gen_bool(0.7) {
                    continue;
                }
                let mut b = b.clone();
                if b.movable {
                    b.translation[0] += rng.gen_range(-0.3..0.3);
                    b.translation[1] += rng.gen_range(-0.3..0.3);
                    b.yaw_deg += rng.gen_range(-45.0..45.0);
                }
                chosen.push((slot, b));
            }
            let mut scene = build(&template, &chosen, s);
            scene.name = format!("operating_room_{i}");
            scene
        })
        .collect()
}

/// Unit cubes stacked in columns on a ground grid. Returns the scene and the
/// `(upper, lower)` pairs of cubes resting directly on one another.
///
/// Columns sit 2 units apart with up to ±0.2 horizontal offset per column
/// and ±0.1 per cube, so only cubes of one column overlap horizontally.
pub fn gen_cube_stack(n_cubes: usize, seed: u64) -> Result<(Scene, Vec<(EntityId, EntityId)>), String> {
    if n_cubes < 2 {
        return Err(format!("need at least 2 cubes, got {n_cubes}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heights = Vec::new();
    let mut left = n_cubes;
    while left > 0 {
        let h = rng.gen_range(1..=8usize).min(left);
        heights.push(h);
        left -= h;
    }
    let side = (heights.len() as f64).sqrt().ceil() as usize;
    let mut cells: Vec<usize> = (0..side * side).collect();
    cells.shuffle(&mut rng);

    let mut scene = Scene::new("cube_stack");
    let root = scene.add_entity("ground", "Ground", None).map_err(|e| e.to_string())?;
    scene.set_trs(root, TransformRepr::identity()).map_err(|e| e.to_string())?;
    scene.add_component(root, Component::Info).map_err(|e| e.to_string())?;
    let mut edges = Vec::new();
    let mut k = 0;
    for (col, &h) in heights.iter().enumerate() {
        let cell = cells[col];
        let cx = 2.0 * (cell % side) as f64 + rng.gen_range(-0.2..0.2);
        let cy = 2.0 * (cell / side) as f64 + rng.gen_range(-0.2..0.2);
        let mut below: Option<EntityId> = None;
        for level in 0..h {
            let yaw = rng.gen_range(0..4);
            let (c, s) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][yaw];
            let mut m = Mat4::IDENTITY;
            m.0[0] = c;
            m.0[1] = -s;
            m.0[4] = s;
            m.0[5] = c;
            m.0[3] = cx + rng.gen_range(-0.1..0.1);
            m.0[7] = cy + rng.gen_range(-0.1..0.1);
            m.0[11] = level as f64 + 0.5;
            let id = scene
                .add_entity(format!("cube_{k}"), "Cube", Some(root))
                .map_err(|e| e.to_string())?;
            scene.set_trs(id, TransformRepr::matrix(m)).map_err(|e| e.to_string())?;
            if let Some(b) = below {
                edges.push((id, b));
            }
            below = Some(id);
            k += 1;
        }
    }
    scene.refresh_info();
    Ok((scene, edges))
}

/// Random rigid pose with uniform scale, for tests and fuzzing.
pub fn random_pose(rng: &mut impl Rng, max_translation: f64) -> RigidPose {
    let q = loop {
        let q = Quaternion::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if q.norm() > 1e-6 {
            break q;
        }
    };
    RigidPose {
        rotation: q.scale(1.0 / q.norm()).canonical(),
        translation: [
            rng.gen_range(-max_translation..max_translation),
            rng.gen_range(-max_translation..max_translation),
            rng.gen_range(-max_translation..max_translation),
        ],
        scale: [rng.gen_range(0.5..2.0); 3],
    }
}

/// Random scene for format and export fuzzing: a random tree with random
/// forms, optional mesh/info components and occasional actions.
pub fn random_scene(rng: &mut impl Rng, max_entities: usize) -> Scene {
    let n = rng.gen_range(1..=max_entities.max(1));
    let mut scene = Scene::new(format!("random_{}", rng.gen::<u16>()));
    if rng.gen_bool(0.5) {
        scene.set_label(["a", "b \"quoted\"", "c\\d"][rng.gen_range(0..3)]);
    }
    let mut ids = Vec::new();
    for i in 0..n {
        let parent = if i == 0 { None } else { Some(ids[rng.gen_range(0..i)]) };
        let cat = ["Table", "Lamp", "", "Chair", "Knee"][rng.gen_range(0..5)];
        let id = scene.add_entity(format!("e{i}"), cat, parent).expect("valid parent");
        ids.push(id);
        if rng.gen_bool(0.8) {
            let form = Form::ALL[rng.gen_range(0..Form::ALL.len())];
            let mut pose = random_pose(rng, 10.0);
            if rng.gen_bool(0.2) {
                pose.translation = [0.0, -0.0, 1.0];
                pose.rotation = Quaternion::IDENTITY;
            }
            scene
                .set_trs(id, TransformRepr::from_pose(&pose, form).expect("rigid"))
                .expect("exists");
        }
        if rng.gen_bool(0.3) {
            let feature = (0..crate::scene::MESH_FEATURE_LEN)
                .map(|j| if j % 7 == 0 { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            scene
                .add_component(id, Component::Mesh(MeshFeatureComponent { feature }))
                .expect("fresh");
        }
        if rng.gen_bool(0.3) {
            scene.add_component(id, Component::Info).expect("fresh");
        }
    }
    for &id in &ids {
        if rng.gen_bool(0.15) {
            let tool = ids[rng.gen_range(0..n)];
            let (action_type, params, refs) = if rng.gen_bool(0.5) {
                ("insert", vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0], vec![tool])
            } else {
                ("proximity", vec![rng.gen_range(0.0..5.0)], vec![tool, ids[rng.gen_range(0..n)]])
            };
            scene
                .add_component(
                    id,
                    Component::Action(ActionDataComponent {
                        action_type: action_type.into(),
                        params,
                        refs,
                        satisfied: rng.gen_bool(0.5),
                    }),
                )
                .expect("fresh");
        }
    }
    scene.refresh_info();
    scene
}
