use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unisg_core::datasets::{gen_classification_dataset, gen_cube_stack, AugmentationConfig};
use unisg_core::graph_export::{ExportConfig, SMALL_MESH_WIDTH};
use unisg_core::scene::Scene;
use unisg_core::xform::Form;
use unisg_nn::optim::Adam;
use unisg_nn::params::Params;
use unisg_nn::train::{
    auc, entity_graph, metrics_csv, prepare_graphs, train_classifier, train_linkpred, ClassifierTrainConfig,
    LinkPredTrainConfig, METRICS_HEADER,
};
use unisg_nn::NnError;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn checkpoint_bytes_round_trip(
        shapes in prop::collection::vec((1usize..5, 1usize..5), 1..5),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::new();
        for (i, (r, c)) in shapes.iter().enumerate() {
            p.glorot(&format!("w{i}"), *r, *c, &mut rng);
        }
        let back = Params::from_bytes(&p.to_bytes()).unwrap();
        prop_assert_eq!(back.len(), p.len());
        for i in 0..p.len() {
            prop_assert_eq!(back.name(i), p.name(i));
            prop_assert_eq!(back.value(i), p.value(i));
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(
        pos in prop::collection::vec(-10.0f64..10.0, 1..20),
        neg in prop::collection::vec(-10.0f64..10.0, 1..20),
    ) {
        let a = auc(&pos, &neg);
        let f = |v: &Vec<f64>| v.iter().map(|x| 3.0 * x + 1.0).collect::<Vec<_>>();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((auc(&f(&pos), &f(&neg)) - a).abs() < 1e-12);
        prop_assert!((auc(&neg, &pos) - (1.0 - a)).abs() < 1e-12);
    }
}

#[test]
fn adam_rejects_nan_gradients_without_touching_parameters() {
    let mut p = Params::new();
    p.add("w", Array2::ones((2, 2)));
    let mut opt = Adam::new(&p, 0.1);
    let g = vec![Array2::from_elem((2, 2), f64::NAN)];
    assert!(matches!(opt.step(&mut p, &g), Err(NnError::NonFinite(_))));
    assert_eq!(p.value(0), &Array2::ones((2, 2)));
}

#[test]
fn classifier_metrics_have_two_rows_per_epoch() {
    let data = gen_classification_dataset(10, &AugmentationConfig::default()).unwrap();
    let scenes: Vec<(Scene, Option<usize>)> = data.into_iter().map(|(s, l)| (s, Some(l))).collect();
    let cfg = ExportConfig::new(Form::DualQuat).with_mesh_width(SMALL_MESH_WIDTH);
    let (graphs, _) = prepare_graphs(&scenes, &cfg).unwrap();
    let tcfg = ClassifierTrainConfig {
        epochs: 3,
        ..Default::default()
    };
    let (_, report) = train_classifier(&graphs, &tcfg).unwrap();
    let csv = metrics_csv(&report.rows());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[1].starts_with("0,train,"));
    assert!(lines[2].starts_with("0,test,"));
}

#[test]
fn linkpred_learns_on_a_small_stack() {
    let (scene, rel) = gen_cube_stack(150, 3).unwrap();
    let data = entity_graph(&scene, "Cube", Form::PgaMotor, &rel).unwrap();
    let cfg = LinkPredTrainConfig {
        epochs: 40,
        ..Default::default()
    };
    let (_, report) = train_linkpred(&data, &cfg).unwrap();
    assert_eq!(report.losses.len(), 41);
    assert!(report.losses[40] < report.losses[0]);
    assert!(report.auc > 0.6, "auc {}", report.auc);
}

#[test]
fn divergence_reports_the_epoch() {
    let (scene, rel) = gen_cube_stack(60, 2).unwrap();
    let data = entity_graph(&scene, "Cube", Form::Matrix, &rel).unwrap();
    let cfg = LinkPredTrainConfig {
        epochs: 10,
        lr: 1e250,
        ..Default::default()
    };
    match train_linkpred(&data, &cfg) {
        Err(NnError::Diverged { epoch, .. }) => assert!((1..=10).contains(&epoch)),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.1.auc)),
    }
}
