use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use unisg_core::scene::Scene;
use unisg_core::scene_io::{serialize, SceneDocument};
use unisg_core::xform::{Form, Quaternion, RigidPose, TransformRepr};

fn unisg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unisg"))
        .args(args)
        .current_dir(cwd)
        .env_remove("UNISG_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `room` with a child `arm` posed as `form`, scaled by `scale`.
fn two_entity_scene(form: Form, scale: [f64; 3]) -> String {
    let mut s = Scene::new("fixture");
    let room = s.add_entity("room", "Room", None).unwrap();
    let arm = s.add_entity("arm", "Arm", Some(room)).unwrap();
    let pose = RigidPose {
        rotation: Quaternion::new(0.6, 0.8, 0.0, 0.0),
        translation: [0.5, 1.0, -2.0],
        scale,
    };
    s.set_trs(arm, TransformRepr::from_pose(&pose, form).unwrap()).unwrap();
    serialize(&SceneDocument::new(s))
}

#[test]
fn generated_scene_validates_and_survives_a_motor_round_trip() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&unisg(&["scene-gen", "--template", "or", "--seed", "4", "--output", "or.unisg"], d)), 0);
    assert!(read(&d.join("or.unisg.config")).contains("seed = 4"));
    let v = unisg(&["validate", "--input", "or.unisg"], d);
    assert_eq!(code(&v), 0, "{}", stderr(&v));
    assert!(stdout(&v).contains("max deviation"));

    assert_eq!(code(&unisg(&["convert", "--input", "or.unisg", "--to", "pga_motor", "--output", "m.unisg"], d)), 0);
    assert_eq!(code(&unisg(&["convert", "--input", "m.unisg", "--to", "matrix", "--output", "back.unisg"], d)), 0);
    assert_eq!(code(&unisg(&["validate", "--input", "back.unisg"], d)), 0);
}

#[test]
fn converting_to_the_current_form_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.unisg"), two_entity_scene(Form::DualQuat, [1.0; 3])).unwrap();
    assert_eq!(code(&unisg(&["convert", "--input", "a.unisg", "--to", "dual_quat", "--output", "b.unisg"], d)), 0);
    assert_eq!(read(&d.join("a.unisg")), read(&d.join("b.unisg")));
}

#[test]
fn corrupted_rotor_fails_validation_naming_the_entity() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let text = two_entity_scene(Form::PgaMotor, [1.0; 3]);
    let at = text.find("coeffs = [0.6").expect("arm motor starts with its scalar part");
    let corrupted = format!("{}coeffs = [0.9{}", &text[..at], &text[at + "coeffs = [0.6".len()..]);
    std::fs::write(d.join("bad.unisg"), corrupted).unwrap();
    let o = unisg(&["validate", "--input", "bad.unisg"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("room/arm"), "{}", stderr(&o));
}

#[test]
fn non_uniform_scale_cannot_become_a_motor() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.unisg"), two_entity_scene(Form::Matrix, [1.0, 2.0, 3.0])).unwrap();
    assert_eq!(code(&unisg(&["validate", "--input", "s.unisg"], d)), 0);
    let o = unisg(&["convert", "--input", "s.unisg", "--to", "cga_motor", "--output", "out.unisg"], d);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("room/arm"), "{}", stderr(&o));
    assert!(!d.join("out.unisg").exists());
}

#[test]
fn parse_errors_exit_2_with_a_position() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("broken.unisg"), "unisg 1\nscene \"s\" {\n  entity \"r\" {\n    id = 0\n").unwrap();
    for args in [
        vec!["validate", "--input", "broken.unisg"],
        vec!["convert", "--input", "broken.unisg", "--to", "matrix", "--output", "x.unisg"],
        vec!["export", "--input", "broken.unisg", "--out-dir", "x"],
    ] {
        let o = unisg(&args, d);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(stderr(&o).contains("line "), "{}", stderr(&o));
    }
}

#[test]
fn empty_scene_validates() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("e.unisg"), serialize(&SceneDocument::new(Scene::new("empty")))).unwrap();
    let o = unisg(&["validate", "--input", "e.unisg"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn export_writes_tensors_and_flat_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&unisg(&["scene-gen", "--template", "living_room", "--output", "lr.unisg"], d)), 0);
    let o = unisg(&["export", "--input", "lr.unisg", "--form", "quat_t", "--mesh-width", "16", "--out-dir", "ex"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["tensors/nodes.csv", "tensors/edges.csv", "tensors/features.csv", "flat/nodes.csv", "categories.csv", "config.txt"] {
        assert!(d.join("ex").join(f).exists(), "{f}");
    }
    assert!(read(&d.join("ex/config.txt")).contains("form = quat_t"));
}

#[test]
fn cube_stack_writes_its_relations() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = unisg(&["scene-gen", "--template", "cube_stack", "--n-cubes", "30", "--seed", "2", "--output", "c.unisg"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let edges = read(&d.join("c.unisg.edges.csv"));
    assert_eq!(edges.lines().next(), Some("upper,lower"));
    assert!(edges.lines().count() > 1);
}

#[test]
fn classify_defaults_reach_full_accuracy() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = unisg(&["experiment", "--task", "classify", "--out", "run"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = read(&d.join("run/summary.csv"));
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..4], ["classify", "matrix", "0", "20"]);
    assert_eq!((row[5], row[7]), ("1", "1"), "{summary}");
    assert!(d.join("run/model_matrix.bin").exists());
}

#[test]
fn form_all_writes_five_files_with_equal_row_counts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = unisg(
        &["experiment", "--task", "classify", "--form", "all", "--epochs", "2", "--n-per-class", "6", "--out", "all"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut counts = Vec::new();
    for form in ["matrix", "angle_axis_t", "dual_quat", "pga_motor", "cga_motor"] {
        counts.push(read(&d.join(format!("all/metrics_{form}.csv"))).lines().count());
    }
    assert!(counts.iter().all(|&c| c == counts[0] && c == 1 + 2 * 3), "{counts:?}");
}

#[test]
fn same_seed_gives_identical_metrics() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        let o = unisg(
            &["experiment", "--task", "generate", "--epochs", "3", "--n-scenes", "8", "--seed", "5", "--out", out],
            d,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["metrics_matrix.csv", "generated_matrix.csv", "summary.csv"] {
        assert_eq!(read(&d.join("a").join(f)), read(&d.join("b").join(f)), "{f}");
    }
    assert_eq!(std::fs::read(d.join("a/model_matrix.bin")).unwrap(), std::fs::read(d.join("b/model_matrix.bin")).unwrap());
}

#[test]
fn repeats_write_per_run_and_mean_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = unisg(
        &["experiment", "--task", "linkpred", "--n-cubes", "60", "--epochs", "4", "--repeats", "3", "--out", "lp"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["metrics_matrix_run0.csv", "metrics_matrix_run2.csv", "metrics_matrix_mean.csv", "model_matrix_run1.bin"] {
        assert!(d.join("lp").join(f).exists(), "{f}");
    }
    let mean = read(&d.join("lp/metrics_matrix_mean.csv"));
    assert_eq!(mean.lines().count(), 1 + 5 + 1);
    assert!(mean.lines().last().unwrap().starts_with("4,test,,"));
}

#[test]
fn divergence_exits_4_with_the_epoch() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = unisg(&["experiment", "--task", "linkpred", "--n-cubes", "60", "--epochs", "5", "--lr", "1e250", "--out", "nan"], d);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("at epoch"), "{}", stderr(&o));
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.txt"), "# run settings\nepochs = 1\nn_per_class = 4\nseed = 11\n").unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut args = vec!["experiment", "--task", "classify", "--out", "o"];
        args.extend_from_slice(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_unisg"));
        cmd.args(&args).current_dir(d).env_remove("UNISG_SEED");
        if let Some(v) = env {
            cmd.env("UNISG_SEED", v);
        }
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read(&d.join("o/config.txt"))
    };
    let echoed = run(&["--config", "cfg.txt", "--n-per-class", "5"], Some("99"));
    assert!(echoed.contains("seed = 11") && echoed.contains("epochs = 1") && echoed.contains("n_per_class = 5"));
    let echoed = run(&["--config", "cfg.txt", "--seed", "3"], Some("99"));
    assert!(echoed.contains("seed = 3"));
    let echoed = run(&["--epochs", "1", "--n-per-class", "4"], Some("99"));
    assert!(echoed.contains("seed = 99"));
    let echoed = run(&["--epochs", "1", "--n-per-class", "4"], None);
    assert!(echoed.contains("seed = 0"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.txt"), "epochs = 1\nlearning_rate = 0.1\n").unwrap();
    let o = unisg(&["experiment", "--task", "classify", "--config", "cfg.txt", "--out", "o"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_1() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&unisg(&["experiment", "--task", "dance", "--out", "o"], d)), 1);
    assert_eq!(code(&unisg(&["convert", "-i", "x"], d)), 1);
    assert_eq!(code(&unisg(&["--help"], d)), 0);
}
