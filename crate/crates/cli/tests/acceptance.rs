//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unisg_core::datasets::{gen_classification_dataset, gen_cube_stack, gen_or_dataset, random_pose, random_scene, AugmentationConfig};
use unisg_core::graph_export::{export_tensors, CategoryVocab, ExportConfig, SMALL_MESH_WIDTH};
use unisg_core::scene::{EntityId, Scene};
use unisg_core::scene_io::{parse, serialize, SceneDocument};
use unisg_core::xform::{
    t_from_translator, translator_from_t, Algebra, Form, Quaternion, RigidPose, TransformRepr, Vec3,
};
use unisg_nn::gradcheck::{model_checks, op_checks};
use unisg_nn::train::{
    entity_graph, generate_scene, prepare_graphs, train_cgvae, train_classifier, train_linkpred, CgvaeTrainConfig,
    ClassifierTrainConfig, LinkPredTrainConfig,
};

type Outcome = Result<String, String>;

const COMPARED_FORMS: [Form; 5] = [Form::Matrix, Form::AngleAxisT, Form::DualQuat, Form::PgaMotor, Form::CgaMotor];

fn max_diff(a: Vec3, b: Vec3) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

fn conversion_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let chain = [Form::AngleAxisT, Form::QuatT, Form::DualQuat, Form::PgaMotor, Form::CgaMotor, Form::Matrix];
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, 10.0);
        let m0 = TransformRepr::from_pose(&pose, Form::Matrix).map_err(|e| e.to_string())?;
        let mut r = m0.clone();
        for f in chain {
            r = r.convert(f).map_err(|e| format!("to {f}: {e}"))?;
        }
        for _ in 0..100 {
            let p = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let a = m0.apply(p).map_err(|e| e.to_string())?;
            let b = r.apply(p).map_err(|e| e.to_string())?;
            worst = worst.max(max_diff(a, b));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max error {worst:.3e}, {secs:.2} s");
    if worst < 1e-9 && secs < 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bits3(v: Vec3) -> [u64; 3] {
    v.map(f64::to_bits)
}

fn bits4(q: Quaternion) -> [u64; 4] {
    q.to_array().map(f64::to_bits)
}

/// Scale the coefficients of `repr` by `alpha` and compare the extracted pose
/// with the unscaled one bit for bit.
fn scaled_motor_matches(repr: &TransformRepr, alpha: f64) -> Result<(bool, f64), String> {
    let base = repr.to_pose().map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = repr.coeffs().iter().map(|c| alpha * c).collect();
    let back = TransformRepr::from_coeffs(repr.form(), &scaled, repr.scale())
        .and_then(|r| r.to_pose())
        .map_err(|e| format!("alpha {alpha}: {e}"))?;
    let dev = max_diff(base.translation, back.translation).max(
        (0..4)
            .map(|i| (base.rotation.to_array()[i] - back.rotation.to_array()[i]).abs())
            .fold(0.0, f64::max),
    );
    Ok((bits3(base.translation) == bits3(back.translation) && bits4(base.rotation) == bits4(back.rotation), dev))
}

fn scale_invariance() -> Outcome {
    let alphas = [-3.0, 0.5, 2.0, 10.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dyadic_quats = [
        Quaternion::new(1.0, 0.0, 0.0, 0.0),
        Quaternion::new(0.0, 1.0, 0.0, 0.0),
        Quaternion::new(0.5, 0.5, 0.5, 0.5),
        Quaternion::new(0.5, -0.5, 0.5, -0.5),
        Quaternion::new(0.0, 0.0, 0.0, 1.0),
    ];
    let mut report = Vec::new();
    let mut all_exact = true;
    for alpha in alphas {
        let (mut cases, mut mismatches, mut dyadic_mismatches) = (0, 0, 0);
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let dyadic = k % 10 == 0;
            let (t, q) = if dyadic {
                let t = [0; 3].map(|_| rng.gen_range(-64i32..64) as f64 / 8.0);
                (t, dyadic_quats[k / 10 % dyadic_quats.len()])
            } else {
                let p = random_pose(&mut rng, 10.0);
                (p.translation, p.rotation)
            };
            for algebra in [Algebra::Pga, Algebra::Cga] {
                let tr = translator_from_t(t, algebra);
                let base = t_from_translator(&tr).map_err(|e| e.to_string())?;
                let back = t_from_translator(&tr.scale(alpha)).map_err(|e| format!("alpha {alpha}: {e}"))?;
                cases += 1;
                worst = worst.max(max_diff(base, back));
                if bits3(base) != bits3(back) {
                    mismatches += 1;
                    dyadic_mismatches += usize::from(dyadic);
                }
            }
            let pose = RigidPose {
                rotation: q,
                translation: t,
                scale: [1.0; 3],
            };
            for form in [Form::PgaMotor, Form::CgaMotor] {
                let repr = TransformRepr::from_pose(&pose, form).map_err(|e| e.to_string())?;
                let (exact, dev) = scaled_motor_matches(&repr, alpha)?;
                cases += 1;
                worst = worst.max(dev);
                if !exact {
                    mismatches += 1;
                    dyadic_mismatches += usize::from(dyadic);
                }
            }
        }
        all_exact &= mismatches == 0;
        report.push(format!(
            "alpha {alpha}: {mismatches}/{cases} inexact ({dyadic_mismatches} dyadic), max dev {worst:.1e}"
        ));
    }
    let msg = report.join("; ");
    if all_exact {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn classification() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut runs = 0;
    for rep in 0..10u64 {
        let aug = AugmentationConfig {
            seed: 100 + rep,
            ..Default::default()
        };
        let data = gen_classification_dataset(50, &aug)?;
        let scenes: Vec<(Scene, Option<usize>)> = data.into_iter().map(|(s, l)| (s, Some(l))).collect();
        for form in COMPARED_FORMS {
            let cfg = ExportConfig::new(form).with_mesh_width(SMALL_MESH_WIDTH);
            let (graphs, _) = prepare_graphs(&scenes, &cfg).map_err(|e| e.to_string())?;
            let tcfg = ClassifierTrainConfig {
                seed: rep,
                ..Default::default()
            };
            let (_, report) = train_classifier(&graphs, &tcfg).map_err(|e| e.to_string())?;
            let last = report.last();
            runs += 1;
            if last.train_acc != 1.0 || last.test_acc != 1.0 {
                failures.push(format!("{form} rep {rep}: train {:.3} test {:.3}", last.train_acc, last.test_acc));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("{}/{runs} runs at accuracy 1.0, {secs:.1} s", runs - failures.len());
    if failures.is_empty() && secs < 120.0 {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", failures.join(", ")))
    }
}

fn cgvae() -> Outcome {
    let scenes: Vec<(Scene, Option<usize>)> = gen_or_dataset(100, 4).into_iter().map(|s| (s, None)).collect();
    let cfg = ExportConfig::new(Form::Matrix).with_mesh_width(SMALL_MESH_WIDTH);
    let (graphs, vocab) = prepare_graphs(&scenes, &cfg).map_err(|e| e.to_string())?;
    let (model, report) = train_cgvae(&graphs, vocab.len(), &CgvaeTrainConfig::default()).map_err(|e| e.to_string())?;
    let losses = report.losses();
    let finite = losses.iter().all(|l| l.is_finite());
    let (first, last) = (losses[0], losses[100]);
    let g = generate_scene(&model, &graphs[0].categories, 9).map_err(|e| e.to_string())?;
    let symmetric = g.a == g.a.t();
    let zero_diag = (0..g.a.nrows()).all(|i| g.a[[i, i]] == 0.0);
    let msg = format!(
        "loss {first:.4} -> {last:.4} (ratio {:.3}), finite {finite}, generated {} edges, symmetric {symmetric}, zero diagonal {zero_diag}",
        last / first,
        g.a.sum() / 2.0
    );
    if finite && last < 0.5 * first && symmetric && zero_diag {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn on_top_oracle(scene: &Scene) -> Result<BTreeSet<(EntityId, EntityId)>, String> {
    let mut cubes = Vec::new();
    for e in scene.entities().filter(|e| e.category == "Cube") {
        cubes.push((e.id, scene.world_position(e.id).map_err(|e| e.to_string())?));
    }
    let mut out = BTreeSet::new();
    for (i, pi) in &cubes {
        for (j, pj) in &cubes {
            let resting = (pi[2] - (pj[2] + 1.0)).abs() < 1e-6;
            if resting && (pi[0] - pj[0]).abs() < 1.0 && (pi[1] - pj[1]).abs() < 1.0 {
                out.insert((*i, *j));
            }
        }
    }
    Ok(out)
}

fn link_prediction() -> Outcome {
    let (small, edges) = gen_cube_stack(200, 5)?;
    let got: BTreeSet<_> = edges.iter().copied().collect();
    let oracle_ok = got.len() == edges.len() && on_top_oracle(&small)? == got;

    let (scene, rel) = gen_cube_stack(1000, 6)?;
    let data = entity_graph(&scene, "Cube", Form::Matrix, &rel).map_err(|e| e.to_string())?;
    let (_, report) = train_linkpred(&data, &LinkPredTrainConfig::default()).map_err(|e| e.to_string())?;
    let (l0, l15) = (report.losses[0], report.losses[15]);
    let msg = format!(
        "AUC {:.4} on {}+{} held-out pairs, loss epoch 0 {l0:.4} epoch 15 {l15:.4}, generator matches oracle {oracle_ok}",
        report.auc,
        report.test_pos.len(),
        report.test_neg.len()
    );
    if report.auc > 0.9 && l15 < l0 && oracle_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gradient_checks() -> Outcome {
    let mut checks = op_checks(11).map_err(|e| e.to_string())?;
    checks.extend(model_checks(12).map_err(|e| e.to_string())?);
    let worst = checks
        .iter()
        .max_by(|a, b| a.1.max_rel_error.total_cmp(&b.1.max_rel_error))
        .expect("non-empty");
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, r)| !(r.max_rel_error < 1e-4))
        .map(|(n, r)| format!("{n} {:.2e}", r.max_rel_error))
        .collect();
    let msg = format!("{} checks, worst {} at {:.2e}", checks.len(), worst.0, worst.1.max_rel_error);
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; failing: {}", bad.join(", ")))
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

fn scene_format() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut texts = Vec::new();
    for i in 0..1000 {
        let doc = SceneDocument::new(random_scene(&mut rng, 12));
        let text = serialize(&doc);
        let back = parse(&text).map_err(|e| format!("scene {i}: {e}"))?;
        if back != doc {
            return Err(format!("scene {i}: parsed document differs"));
        }
        if serialize(&back) != text {
            return Err(format!("scene {i}: serialization not idempotent"));
        }
        texts.push(text);
    }
    let alphabet: Vec<u8> = (b' '..=b'~').chain([b'\n', b'\t']).collect();
    let (mut trials, mut accepted, mut far) = (0, 0, Vec::new());
    while trials < 5000 {
        let text = &texts[rng.gen_range(0..texts.len())];
        let at = rng.gen_range(0..text.len());
        let c = alphabet[rng.gen_range(0..alphabet.len())];
        if text.as_bytes()[at] == c {
            continue;
        }
        let mut bytes = text.clone().into_bytes();
        bytes[at] = c;
        let corrupted = String::from_utf8(bytes).expect("ascii");
        trials += 1;
        match parse(&corrupted) {
            Ok(_) => accepted += 1,
            Err(e) => {
                let line = line_of(&corrupted, at);
                if !e.positions().iter().any(|p| p.line.abs_diff(line) <= 1) && far.len() < 5 {
                    far.push(format!("corrupted line {line} ({:?}), error: {e}", c as char));
                } else if !e.positions().iter().any(|p| p.line.abs_diff(line) <= 1) {
                    far.push(String::new());
                }
            }
        }
    }
    let msg = format!(
        "1000 round trips idempotent; {trials} corruptions: {accepted} accepted, {} rejected, {} reported off-line",
        trials - accepted,
        far.len()
    );
    if far.is_empty() {
        Ok(msg)
    } else {
        let examples: Vec<&String> = far.iter().filter(|s| !s.is_empty()).collect();
        Err(format!("{msg}; e.g. {examples:?}"))
    }
}

fn export_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let scene = random_scene(&mut rng, 15);
        let reference = {
            let mut vocab = CategoryVocab::new();
            export_tensors(&scene, &ExportConfig::new(Form::Matrix), &mut vocab).map_err(|e| e.to_string())?
        };
        let ref_world: Vec<_> = scene
            .depth_first()
            .into_iter()
            .map(|id| scene.world_transform(id).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        for form in Form::ALL {
            let mut vocab = CategoryVocab::new();
            let t = export_tensors(&scene, &ExportConfig::new(form), &mut vocab).map_err(|e| e.to_string())?;
            if t.a != reference.a || t.node_kinds != reference.node_kinds || t.categories != reference.categories {
                return Err(format!("scene {i}: {form} export differs structurally"));
            }
            let converted = scene.convert_all(form).map_err(|e| e.to_string())?;
            for (id, m) in scene.depth_first().into_iter().zip(&ref_world) {
                let w = converted.world_transform(id).map_err(|e| e.to_string())?;
                worst = worst.max(w.max_abs_diff(m));
            }
        }
    }
    let msg = format!("A, kinds, categories identical across 6 forms on 100 scenes; world transform max diff {worst:.2e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("conversion chain", conversion_chain),
        ("scale-invariant extraction", scale_invariance),
        ("graph classification", classification),
        ("cgvae training and generation", cgvae),
        ("link prediction", link_prediction),
        ("gradient checks", gradient_checks),
        ("scene format", scene_format),
        ("export form invariance", export_invariance),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {name}: {status} ({detail}) [{:.1} s]", i + 1, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
