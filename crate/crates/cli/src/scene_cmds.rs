//! `convert`, `validate`, `scene-gen` and `export`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use unisg_core::datasets::{augment, gen_cube_stack, instantiate, living_room, operating_room, AugmentationConfig};
use unisg_core::graph_export::{export_tensors, CategoryVocab, ExportConfig};
use unisg_core::scene::{EntityId, Scene, SceneError};
use unisg_core::scene_io::{export_flat, parse, serialize, SceneDocument};
use unisg_core::xform::{vec_sub, Form, TransformRepr, Vec3};

use crate::config::RunConfig;
use crate::error::CliError;

/// Agreement tolerance for `validate`.
pub const APPLY_TOL: f64 = 1e-9;

pub fn parse_form(s: &str) -> Result<Form, CliError> {
    s.parse()
        .map_err(|_| CliError::validation(format!("unknown form {s:?}; expected one of {}", form_names())))
}

fn form_names() -> String {
    Form::ALL.map(Form::name).join(", ")
}

pub fn read_scene(path: &Path) -> Result<SceneDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(&path.display().to_string(), e))
}

/// `<path>.config`, the effective config written beside a file output.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config");
    PathBuf::from(s)
}

/// Entity names from the root down, joined with `/`.
pub fn entity_path(scene: &Scene, id: EntityId) -> String {
    let mut names = Vec::new();
    let mut cur = Some(id);
    while let Some(e) = cur.and_then(|c| scene.entity(c)) {
        names.push(e.name.as_str());
        cur = e.parent;
    }
    names.reverse();
    names.join("/")
}

fn describe(scene: &Scene, id: EntityId) -> String {
    format!("{} (id {id})", entity_path(scene, id))
}

fn scene_error(scene: &Scene, e: SceneError) -> CliError {
    match e {
        SceneError::Transform(id, x) => CliError::conversion(format!("{}: {x}", describe(scene, id))),
        other => CliError::validation(other.to_string()),
    }
}

// ---------------------------------------------------------------- convert

pub fn convert(input: &Path, to: &str, output: &Path) -> Result<String, CliError> {
    let form = parse_form(to)?;
    let doc = read_scene(input)?;
    let scene = &doc.scene;
    let mut failures = Vec::new();
    for id in scene.depth_first() {
        if let Some(t) = scene.trs(id) {
            if let Err(e) = t.repr.convert(form) {
                failures.push(format!("  {}: {e}", describe(scene, id)));
            }
        }
    }
    if !failures.is_empty() {
        return Err(CliError::conversion(format!(
            "{} transform(s) cannot be converted to {form}:\n{}",
            failures.len(),
            failures.join("\n")
        )));
    }
    let converted = scene.convert_all(form).map_err(|e| scene_error(scene, e))?;
    let out = SceneDocument {
        format_version: doc.format_version,
        scene: converted,
    };
    write_file(output, &serialize(&out))?;
    let echo = format!("input = {}\nto = {form}\noutput = {}\n", input.display(), output.display());
    write_file(&sidecar(output), &echo)?;
    Ok(format!("converted {} entities to {form}", out.scene.len()))
}

// ---------------------------------------------------------------- validate

/// Origin and the corners of the cube `[-1, 1]^3`.
fn probe_points() -> Vec<Vec3> {
    let mut pts = vec![[0.0; 3]];
    for i in 0..8 {
        pts.push([0, 1, 2].map(|b| if i >> b & 1 == 1 { 1.0 } else { -1.0 }));
    }
    pts
}

fn inf_norm(v: Vec3) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn uniform(s: Vec3) -> bool {
    s[0] == s[1] && s[1] == s[2]
}

/// Largest disagreement between `repr` applied directly and through each
/// other form, relative to `max(1, |p|)`. Forms that cannot hold the
/// scale are skipped.
pub fn apply_agreement(repr: &TransformRepr) -> Result<(f64, Vec<Form>), String> {
    let pose = repr.to_pose().map_err(|e| e.to_string())?;
    let rigid = uniform(pose.scale);
    let forms: Vec<Form> = Form::ALL.into_iter().filter(|&f| rigid || f == Form::Matrix).collect();
    let mut reprs = Vec::with_capacity(forms.len());
    for &f in &forms {
        reprs.push(repr.convert(f).map_err(|e| format!("to {f}: {e}"))?);
    }
    let mut worst = 0.0f64;
    for p in probe_points() {
        let reference = repr.apply(p).map_err(|e| e.to_string())?;
        for r in &reprs {
            let q = r.apply(p).map_err(|e| format!("{}: {e}", r.form()))?;
            let dev = inf_norm(vec_sub(q, reference)) / inf_norm(reference).max(1.0);
            worst = worst.max(if dev.is_nan() { f64::INFINITY } else { dev });
        }
    }
    Ok((worst, forms))
}

pub struct ValidationReport {
    pub transforms: usize,
    pub max_deviation: f64,
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in &self.issues {
            let _ = writeln!(s, "{i}");
        }
        let _ = writeln!(
            s,
            "checked {} transforms, max deviation {:e} (tolerance {APPLY_TOL:e})",
            self.transforms, self.max_deviation
        );
        s.push_str(if self.ok() { "ok\n" } else { "FAILED\n" });
        s
    }
}

pub fn validate_scene(scene: &Scene) -> ValidationReport {
    let mut issues = Vec::new();
    let mut worst = 0.0f64;
    let mut transforms = 0;
    for id in scene.depth_first() {
        let who = describe(scene, id);
        if let Some(t) = scene.trs(id) {
            transforms += 1;
            if let Err(e) = t.repr.validate() {
                issues.push(format!("{who}: invalid {} transform: {e}", t.repr.form()));
            }
            match apply_agreement(&t.repr) {
                Ok((dev, forms)) => {
                    worst = worst.max(dev);
                    if dev > APPLY_TOL {
                        issues.push(format!("{who}: forms disagree by {dev:e}"));
                    }
                    if forms.len() < Form::ALL.len() {
                        eprintln!("note: {who}: non-uniform scale, checked matrix form only");
                    }
                }
                Err(e) => issues.push(format!("{who}: conversion failed: {e}")),
            }
        }
        if let Some(info) = scene.info(id) {
            let e = scene.entity(id).expect("listed entity exists");
            let expected = [
                e.children.len(),
                scene.trs(id).is_some() as usize,
                scene.mesh(id).is_some() as usize,
                scene.action(id).is_some() as usize,
            ];
            if info.counts != expected {
                issues.push(format!("{who}: info census {:?}, expected {expected:?}", info.counts));
            }
        }
    }
    if scene.info_is_stale() {
        issues.push("info census is stale".into());
    }
    if !scene.is_empty() {
        if let Err(e) = scene.validate() {
            let msg = match &e {
                SceneError::Transform(id, x) => format!("{}: {x}", describe(scene, *id)),
                SceneError::DanglingRef { owner, .. }
                | SceneError::ActionArity { owner, .. }
                | SceneError::ActionRefs { owner, .. } => format!("{}: {e}", describe(scene, *owner)),
                SceneError::MeshLength(id, _) => format!("{}: {e}", describe(scene, *id)),
                _ => e.to_string(),
            };
            if !issues.contains(&msg) {
                issues.push(msg);
            }
        }
    }
    ValidationReport {
        transforms,
        max_deviation: worst,
        issues,
    }
}

pub fn validate(input: &Path) -> Result<String, CliError> {
    let doc = read_scene(input)?;
    let report = validate_scene(&doc.scene);
    if report.ok() {
        Ok(report.render())
    } else {
        Err(CliError::validation(report.render()))
    }
}

// ---------------------------------------------------------------- scene-gen

pub fn scene_gen(cfg: &RunConfig) -> Result<String, CliError> {
    let out = cfg.out.as_deref().ok_or_else(|| CliError::validation("scene-gen needs --output"))?;
    let template = cfg.template.as_deref().ok_or_else(|| CliError::validation("scene-gen needs --template"))?;
    let mut extra = String::new();
    let scene = match template {
        "or" | "operating_room" | "living_room" => {
            let t = if template == "living_room" { living_room() } else { operating_room() };
            let base = instantiate(&t, cfg.seed);
            if cfg.augment {
                augment(&base, &augmentation(cfg)).map_err(CliError::validation)?
            } else {
                base
            }
        }
        "cube_stack" => {
            let (scene, pairs) = gen_cube_stack(cfg.n_cubes, cfg.seed).map_err(CliError::validation)?;
            let mut csv = String::from("upper,lower\n");
            for (u, l) in &pairs {
                let _ = writeln!(csv, "{u},{l}");
            }
            let mut path = out.as_os_str().to_owned();
            path.push(".edges.csv");
            write_file(Path::new(&path), &csv)?;
            extra = format!(", {} on-top pairs", pairs.len());
            scene
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown template {other:?}; expected or, living_room or cube_stack"
            )))
        }
    };
    write_file(out, &serialize(&SceneDocument::new(scene.clone())))?;
    write_file(&sidecar(out), &cfg.to_text())?;
    Ok(format!("wrote {} entities{extra}", scene.len()))
}

pub fn augmentation(cfg: &RunConfig) -> AugmentationConfig {
    AugmentationConfig {
        seed: cfg.seed,
        translation_sigma: cfg.translation_sigma,
        rotation_max_deg: cfg.rotation_max_deg,
        mesh_sigma: cfg.mesh_sigma,
    }
}

// ---------------------------------------------------------------- export

pub fn export(input: &Path, form: &str, mesh_width: Option<usize>, out_dir: &Path) -> Result<String, CliError> {
    let form = parse_form(form)?;
    let doc = read_scene(input)?;
    let mut cfg = ExportConfig::new(form);
    if let Some(w) = mesh_width {
        cfg = cfg.with_mesh_width(w);
    }
    let converted = doc.scene.convert_all(form).map_err(|e| scene_error(&doc.scene, e))?;
    let mut vocab = CategoryVocab::new();
    let tensors = export_tensors(&converted, &cfg, &mut vocab).map_err(|e| scene_error(&converted, e))?;
    let io = |e| CliError::io(&out_dir.display().to_string(), e);
    tensors.dump(&out_dir.join("tensors")).map_err(io)?;
    let flat = SceneDocument {
        format_version: doc.format_version,
        scene: converted,
    };
    export_flat(&flat).write_dir(&out_dir.join("flat")).map_err(io)?;
    let mut csv = String::from("id,category\n");
    for i in 0..vocab.len() {
        let _ = writeln!(csv, "{i},{}", vocab.name(i).unwrap_or_default());
    }
    write_file(&out_dir.join("categories.csv"), &csv)?;
    let echo = format!(
        "input = {}\nform = {form}\nmesh_width = {}\nout_dir = {}\n",
        input.display(),
        cfg.mesh_width,
        out_dir.display()
    );
    write_file(&out_dir.join("config.txt"), &echo)?;
    Ok(format!("exported {} nodes with {} features", tensors.n(), tensors.f()))
}
