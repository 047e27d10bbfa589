//! Training loops, evaluation, and dataset preparation.
//!
//! Every loss curve has `epochs + 1` entries: index 0 is the untrained model
//! evaluated on the training data, index `k` is the mean loss over the
//! optimisation steps of epoch `k`.

use std::collections::HashSet;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unisg_core::graph_export::{export_tensors, trs_feature, CategoryVocab, ExportConfig};
use unisg_core::scene::{EntityId, Scene};
use unisg_core::xform::Form;

use crate::graph::{gcn_norm, GraphInput};
use crate::models::*;
use crate::optim::Adam;
use crate::tape::Tape;
use crate::NnError;

fn check_finite(what: &str, epoch: usize, v: f64) -> Result<f64, NnError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NnError::Diverged {
            what: what.to_string(),
            epoch,
        })
    }
}

/// Attach the epoch to an optimiser failure.
fn at_epoch(e: NnError, epoch: usize) -> NnError {
    match e {
        NnError::NonFinite(what) => NnError::Diverged { what, epoch },
        other => other,
    }
}

/// One metrics row: `epoch,split,loss,accuracy_or_auc`; absent values are
/// left empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: Option<f64>,
    pub score: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,split,loss,accuracy_or_auc";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.split, cell(r.loss), cell(r.score));
    }
    s
}

/// Export every scene with `cfg`, sharing one category vocabulary.
pub fn prepare_graphs(scenes: &[(Scene, Option<usize>)], cfg: &ExportConfig) -> Result<(Vec<GraphInput>, CategoryVocab), NnError> {
    let mut vocab = CategoryVocab::new();
    let mut out = Vec::with_capacity(scenes.len());
    for (scene, label) in scenes {
        let mut t = export_tensors(scene, cfg, &mut vocab).map_err(|e| NnError::Data(e.to_string()))?;
        t.graph_label = *label;
        out.push(GraphInput::from_tensors(&t));
    }
    let width = out.iter().map(|g| g.f()).max().unwrap_or(0);
    for g in &mut out {
        if g.f() < width {
            let mut x = Array2::zeros((g.n(), width));
            x.slice_mut(ndarray::s![.., ..g.f()]).assign(&g.x);
            g.x = x;
        }
    }
    Ok((out, vocab))
}

// ---------------------------------------------------------------- classification

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub hidden: usize,
    pub attention: bool,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 1e-3,
            seed: 0,
            train_fraction: 0.7,
            hidden: HIDDEN,
            attention: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierReport {
    pub history: Vec<ClassifierEpoch>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl ClassifierReport {
    pub fn last(&self) -> &ClassifierEpoch {
        self.history.last().expect("history includes epoch 0")
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::with_capacity(2 * self.history.len());
        for e in &self.history {
            rows.push(MetricRow {
                epoch: e.epoch,
                split: "train",
                loss: Some(e.train_loss),
                score: Some(e.train_acc),
            });
            rows.push(MetricRow {
                epoch: e.epoch,
                split: "test",
                loss: Some(e.test_loss),
                score: Some(e.test_acc),
            });
        }
        rows
    }
}

/// Seeded split that keeps the class proportions of `labels`.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn eval_classifier(m: &SageClassifier, graphs: &[GraphInput], idx: &[usize]) -> Result<(f64, f64), NnError> {
    if idx.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut loss, mut correct) = (0.0, 0);
    for &i in idx {
        let g = &graphs[i];
        let label = g.label.expect("checked by caller");
        let mut t = Tape::new();
        let logits = m.logits(&mut t, g)?;
        let row: Vec<f64> = t.value(logits).iter().copied().collect();
        if argmax(&row) == label {
            correct += 1;
        }
        let l = t.cross_entropy(logits, &[label])?;
        loss += t.scalar(l);
    }
    Ok((loss / idx.len() as f64, correct as f64 / idx.len() as f64))
}

pub fn train_classifier(graphs: &[GraphInput], cfg: &ClassifierTrainConfig) -> Result<(SageClassifier, ClassifierReport), NnError> {
    let labels: Vec<usize> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| g.label.ok_or_else(|| NnError::Data(format!("graph {i} has no label"))))
        .collect::<Result<_, _>>()?;
    let classes: HashSet<usize> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(NnError::Data(format!("need at least two classes, found {}", classes.len())));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(NnError::Data(format!("train fraction {} outside (0, 1)", cfg.train_fraction)));
    }
    let in_dim = graphs[0].f();
    if let Some(i) = graphs.iter().position(|g| g.f() != in_dim) {
        return Err(NnError::Data(format!("graph {i} has feature width {}, expected {in_dim}", graphs[i].f())));
    }
    let n_classes = classes.iter().max().expect("non-empty") + 1;
    let (train_idx, test_idx) = stratified_split(&labels, cfg.train_fraction, cfg.seed);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut mcfg = ClassifierConfig::new(in_dim, n_classes);
    mcfg.hidden = cfg.hidden;
    mcfg.attention = cfg.attention;
    let mut model = SageClassifier::new(mcfg, &mut rng);
    let mut opt = Adam::new(&model.params, cfg.lr);

    let record = |m: &SageClassifier, epoch: usize, train_loss: Option<f64>| -> Result<ClassifierEpoch, NnError> {
        let (tl, ta) = eval_classifier(m, graphs, &train_idx)?;
        let (vl, va) = eval_classifier(m, graphs, &test_idx)?;
        Ok(ClassifierEpoch {
            epoch,
            train_loss: check_finite("classifier loss", epoch, train_loss.unwrap_or(tl))?,
            train_acc: ta,
            test_loss: vl,
            test_acc: va,
        })
    };
    let mut history = vec![record(&model, 0, None)?];
    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &i in &order {
            let mut t = Tape::new();
            let l = model.loss(&mut t, &graphs[i], labels[i])?;
            sum += check_finite("classifier loss", epoch, t.scalar(l))?;
            let g = t.backward(l).for_params(&model.params);
            opt.step(&mut model.params, &g).map_err(|e| at_epoch(e, epoch))?;
        }
        history.push(record(&model, epoch, Some(sum / order.len() as f64))?);
    }
    Ok((
        model,
        ClassifierReport {
            history,
            train_idx,
            test_idx,
        },
    ))
}

// ---------------------------------------------------------------- cgvae

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgvaeTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub beta: f64,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for CgvaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            seed: 0,
            beta: 1.0,
            hidden: HIDDEN,
            latent: LATENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgvaeReport {
    /// Mean loss parts per epoch, index 0 before training.
    pub history: Vec<CgvaeLoss>,
}

impl CgvaeReport {
    pub fn losses(&self) -> Vec<f64> {
        self.history.iter().map(|p| p.total).collect()
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        self.history
            .iter()
            .enumerate()
            .map(|(epoch, p)| MetricRow {
                epoch,
                split: "train",
                loss: Some(p.total),
                score: None,
            })
            .collect()
    }

    /// Per-epoch loss terms: `epoch,loss,feature,adjacency,kl`.
    pub fn parts_csv(&self) -> String {
        let mut s = String::from("epoch,loss,feature,adjacency,kl\n");
        for (i, p) in self.history.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{},{}", p.total, p.feature, p.adjacency, p.kl);
        }
        s
    }
}

fn mean_parts(parts: &[CgvaeLoss]) -> CgvaeLoss {
    let n = parts.len().max(1) as f64;
    let sum = |f: fn(&CgvaeLoss) -> f64| parts.iter().map(f).sum::<f64>() / n;
    CgvaeLoss {
        total: sum(|p| p.total),
        feature: sum(|p| p.feature),
        adjacency: sum(|p| p.adjacency),
        kl: sum(|p| p.kl),
    }
}

pub fn train_cgvae(graphs: &[GraphInput], n_categories: usize, cfg: &CgvaeTrainConfig) -> Result<(Cgvae, CgvaeReport), NnError> {
    let Some(first) = graphs.first() else {
        return Err(NnError::Data("empty dataset".into()));
    };
    let in_dim = first.f();
    for (i, g) in graphs.iter().enumerate() {
        if g.f() != in_dim {
            return Err(NnError::Data(format!("graph {i} has feature width {}, expected {in_dim}", g.f())));
        }
        if let Some(c) = g.categories.iter().find(|&&c| c >= n_categories) {
            return Err(NnError::Data(format!("graph {i} uses category {c} outside vocabulary of {n_categories}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mcfg = CgvaeConfig::new(in_dim, n_categories);
    mcfg.beta = cfg.beta;
    mcfg.hidden = cfg.hidden;
    mcfg.latent = cfg.latent;
    let mut model = Cgvae::new(mcfg, &mut rng);
    let mut opt = Adam::new(&model.params, cfg.lr);

    let mut initial = Vec::with_capacity(graphs.len());
    for g in graphs {
        let mut t = Tape::new();
        initial.push(model.loss(&mut t, g, &mut rng)?.parts);
    }
    let mut history = vec![mean_parts(&initial)];
    check_finite("cgvae loss", 0, history[0].total)?;
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut parts = Vec::with_capacity(graphs.len());
        for &i in &order {
            let mut t = Tape::new();
            let out = model.loss(&mut t, &graphs[i], &mut rng)?;
            check_finite("cgvae loss", epoch, out.parts.total)?;
            parts.push(out.parts);
            let g = t.backward(out.loss).for_params(&model.params);
            opt.step(&mut model.params, &g).map_err(|e| at_epoch(e, epoch))?;
        }
        history.push(mean_parts(&parts));
    }
    Ok((model, CgvaeReport { history }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedGraph {
    pub x: Array2<f64>,
    /// Symmetric 0/1 adjacency with a zero diagonal.
    pub a: Array2<f64>,
    pub categories: Vec<usize>,
}

/// Sample a graph with the given node categories from the prior.
pub fn generate_scene(model: &Cgvae, categories: &[usize], seed: u64) -> Result<GeneratedGraph, NnError> {
    if let Some(c) = categories.iter().find(|&&c| c >= model.cfg.n_categories) {
        return Err(NnError::Data(format!("category {c} outside vocabulary of {}", model.cfg.n_categories)));
    }
    let n = categories.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tape::new();
    let z = t.constant(standard_normal(&mut rng, n, model.cfg.latent));
    let table = t.constant(model.params.value(model.params.find("embedding").expect("cgvae has embedding")).clone());
    let e = t.lookup_rows(table, categories)?;
    let (xf, probs) = model.decode(&mut t, z, e)?;
    let p = t.value(probs);
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j && (p[[i, j]] > 0.5 || p[[j, i]] > 0.5) {
                a[[i, j]] = 1.0;
            }
        }
    }
    Ok(GeneratedGraph {
        x: t.value(xf).clone(),
        a,
        categories: categories.to_vec(),
    })
}

// ---------------------------------------------------------------- link prediction

#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredData {
    /// Column z-scored node features.
    pub x: Array2<f64>,
    /// Undirected edges `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub ids: Vec<EntityId>,
}

/// Column z-score; constant columns become zero.
pub fn zscore(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    let n = x.nrows().max(1) as f64;
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 1e-12 { (v - mean) / sd } else { 0.0 });
    }
    out
}

/// Graph over the entities of `scene` with category `category`, one node per
/// entity in depth-first order, features from their TRS in `form`.
pub fn entity_graph(scene: &Scene, category: &str, form: Form, relations: &[(EntityId, EntityId)]) -> Result<LinkPredData, NnError> {
    let ids: Vec<EntityId> = scene
        .depth_first()
        .into_iter()
        .filter(|&id| scene.entity(id).is_some_and(|e| e.category == category))
        .collect();
    let pos: std::collections::HashMap<EntityId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut rows = Vec::with_capacity(ids.len());
    for &id in &ids {
        let trs = scene.trs(id).ok_or_else(|| NnError::Data(format!("entity {id} has no trs")))?;
        let repr = trs.repr.convert(form).map_err(|e| NnError::Data(format!("entity {id}: {e}")))?;
        rows.push(trs_feature(&repr));
    }
    let width = rows.first().map_or(0, |r| r.len());
    let x = Array2::from_shape_vec((ids.len(), width), rows.concat()).expect("uniform width");
    let mut edges = Vec::with_capacity(relations.len());
    for (u, v) in relations {
        let (Some(&i), Some(&j)) = (pos.get(u), pos.get(v)) else {
            return Err(NnError::Data(format!("relation ({u}, {v}) references a node outside the graph")));
        };
        if i != j {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(LinkPredData { x: zscore(&x), edges, ids })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPredTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub holdout: f64,
    pub hidden: usize,
    pub latent: usize,
    /// Fraction of training edges left out of the propagation graph each
    /// epoch while still being supervised.
    pub edge_dropout: f64,
}

impl Default for LinkPredTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 3e-2,
            seed: 0,
            holdout: 0.1,
            hidden: HIDDEN,
            latent: LATENT,
            edge_dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredReport {
    pub losses: Vec<f64>,
    pub auc: f64,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl LinkPredReport {
    /// Training loss per epoch, then the held-out AUC at the final epoch.
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows: Vec<MetricRow> = self
            .losses
            .iter()
            .enumerate()
            .map(|(epoch, &l)| MetricRow {
                epoch,
                split: "train",
                loss: Some(l),
                score: None,
            })
            .collect();
        rows.push(MetricRow {
            epoch: self.losses.len() - 1,
            split: "test",
            loss: None,
            score: Some(self.auc),
        });
        rows
    }
}

/// Area under the ROC curve; ties count one half.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn train_linkpred(data: &LinkPredData, cfg: &LinkPredTrainConfig) -> Result<(GraphAutoEncoder, LinkPredReport), NnError> {
    let n = data.x.nrows();
    if data.edges.len() < 2 {
        return Err(NnError::Data(format!("need at least 2 edges, found {}", data.edges.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = data.edges.clone();
    edges.shuffle(&mut rng);
    let k = ((edges.len() as f64 * cfg.holdout).round() as usize).clamp(1, edges.len() - 1);
    let test_pos: Vec<(usize, usize)> = edges[..k].to_vec();
    let train_pos = &edges[k..];

    let edge_set: HashSet<(usize, usize)> = data.edges.iter().copied().collect();
    let non_edges = n * (n - 1) / 2 - edge_set.len();
    if non_edges < k {
        return Err(NnError::Data(format!("only {non_edges} non-edges for {k} negatives")));
    }
    let mut neg_set = HashSet::new();
    let mut test_neg = Vec::with_capacity(k);
    while test_neg.len() < k {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let pair = (i.min(j), i.max(j));
        if i != j && !edge_set.contains(&pair) && neg_set.insert(pair) {
            test_neg.push(pair);
        }
    }

    let mut target = Array2::zeros((n, n));
    for &(i, j) in train_pos {
        target[[i, j]] = 1.0;
        target[[j, i]] = 1.0;
    }
    let mut weight = crate::models::off_diagonal_mask(n);
    for &(i, j) in test_pos.iter().chain(&test_neg) {
        weight[[i, j]] = 0.0;
        weight[[j, i]] = 0.0;
    }
    let pos_entries = 2.0 * train_pos.len() as f64;
    let neg_entries = weight.sum() - pos_entries;
    let pos_weight = neg_entries / pos_entries;
    for &(i, j) in train_pos {
        weight[[i, j]] = pos_weight;
        weight[[j, i]] = pos_weight;
    }
    let a_norm = gcn_norm(&target);

    let mcfg = LinkPredConfig {
        in_dim: data.x.ncols(),
        hidden: cfg.hidden,
        latent: cfg.latent,
    };
    let mut model = GraphAutoEncoder::new(mcfg, &mut rng);
    let mut opt = Adam::new(&model.params, cfg.lr);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    {
        let mut t = Tape::new();
        let l = model.loss(&mut t, &data.x, &a_norm, &target, &weight)?;
        losses.push(check_finite("link prediction loss", 0, t.scalar(l))?);
    }
    if !(0.0..1.0).contains(&cfg.edge_dropout) {
        return Err(NnError::Data(format!("edge dropout {} outside [0, 1)", cfg.edge_dropout)));
    }
    for epoch in 1..=cfg.epochs {
        let a_epoch = if cfg.edge_dropout > 0.0 {
            let mut a = Array2::zeros((n, n));
            for &(i, j) in train_pos {
                if !rng.gen_bool(cfg.edge_dropout) {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
            gcn_norm(&a)
        } else {
            a_norm.clone()
        };
        let mut t = Tape::new();
        let l = model.loss(&mut t, &data.x, &a_epoch, &target, &weight)?;
        losses.push(check_finite("link prediction loss", epoch, t.scalar(l))?);
        let g = t.backward(l).for_params(&model.params);
        opt.step(&mut model.params, &g)?;
    }

    let mut t = Tape::new();
    let x = t.constant(data.x.clone());
    let a = t.constant(a_norm);
    let z = model.encode(&mut t, x, a)?;
    let zv = t.value(z);
    let score = |&(i, j): &(usize, usize)| zv.row(i).dot(&zv.row(j));
    let pos: Vec<f64> = test_pos.iter().map(score).collect();
    let neg: Vec<f64> = test_neg.iter().map(score).collect();
    let report = LinkPredReport {
        losses,
        auc: auc(&pos, &neg),
        test_pos,
        test_neg,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use unisg_core::datasets::{gen_classification_dataset, gen_cube_stack, gen_or_dataset, AugmentationConfig};
    use unisg_core::graph_export::SMALL_MESH_WIDTH;

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[2.0, 3.0], &[0.0, 1.0]), 1.0);
        assert_eq!(auc(&[0.0], &[1.0]), 0.0);
        assert_eq!(auc(&[1.0], &[1.0]), 0.5);
    }

    #[test]
    fn stratified_split_is_seeded_and_balanced() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let (a, b) = stratified_split(&labels, 0.7, 9);
        assert_eq!((a.len(), b.len()), (14, 6));
        assert_eq!(a.iter().filter(|&&i| labels[i] == 0).count(), 7);
        assert_eq!(stratified_split(&labels, 0.7, 9), (a, b));
    }

    #[test]
    fn single_class_is_rejected() {
        let cfg = AugmentationConfig::default();
        let data = gen_classification_dataset(3, &cfg).unwrap();
        let scenes: Vec<_> = data.into_iter().filter(|(_, l)| *l == 0).map(|(s, l)| (s, Some(l))).collect();
        let (graphs, _) = prepare_graphs(&scenes, &ExportConfig::new(Form::Matrix).with_mesh_width(8)).unwrap();
        let err = train_classifier(&graphs, &ClassifierTrainConfig::default()).err().unwrap();
        assert!(err.to_string().contains("two classes"), "{err}");
    }

    #[test]
    fn classifier_training_is_deterministic() {
        let data = gen_classification_dataset(4, &AugmentationConfig::default()).unwrap();
        let scenes: Vec<_> = data.into_iter().map(|(s, l)| (s, Some(l))).collect();
        let (graphs, _) = prepare_graphs(&scenes, &ExportConfig::new(Form::DualQuat).with_mesh_width(8)).unwrap();
        let cfg = ClassifierTrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let (_, a) = train_classifier(&graphs, &cfg).unwrap();
        let (_, b) = train_classifier(&graphs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 3);
    }

    #[test]
    fn generated_adjacency_is_symmetric() {
        let scenes: Vec<_> = gen_or_dataset(3, 1).into_iter().map(|s| (s, None)).collect();
        let (graphs, vocab) = prepare_graphs(&scenes, &ExportConfig::new(Form::Matrix).with_mesh_width(SMALL_MESH_WIDTH)).unwrap();
        let cfg = CgvaeTrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let (model, report) = train_cgvae(&graphs, vocab.len(), &cfg).unwrap();
        assert_eq!(report.history.len(), 3);
        let g = generate_scene(&model, &graphs[0].categories, 5).unwrap();
        assert_eq!(g.a, g.a.t());
        assert!((0..g.a.nrows()).all(|i| g.a[[i, i]] == 0.0));
        assert!(generate_scene(&model, &[vocab.len()], 0).is_err());
    }

    #[test]
    fn linkpred_split_is_disjoint() {
        let (scene, rel) = gen_cube_stack(60, 3).unwrap();
        let data = entity_graph(&scene, "Cube", Form::Matrix, &rel).unwrap();
        assert_eq!(data.ids.len(), 60);
        let cfg = LinkPredTrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let (_, r) = train_linkpred(&data, &cfg).unwrap();
        let edges: HashSet<_> = data.edges.iter().copied().collect();
        assert!(r.test_neg.iter().all(|p| !edges.contains(p)));
        assert!(r.test_pos.iter().all(|p| edges.contains(p)));
        assert_eq!(r.test_pos.len(), r.test_neg.len());
        assert_eq!(r.losses.len(), 4);
    }

    #[test]
    fn zscore_columns() {
        let x = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let z = zscore(&x);
        assert_eq!(z, ndarray::array![[-1.0, 0.0], [1.0, 0.0]]);
    }
}
