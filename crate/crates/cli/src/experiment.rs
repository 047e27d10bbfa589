//! `experiment --task classify|generate|linkpred`.

use std::fmt::Write as _;

use unisg_core::datasets::{gen_classification_dataset, gen_cube_stack, gen_or_dataset};
use unisg_core::graph_export::{ExportConfig, SMALL_MESH_WIDTH};
use unisg_core::scene::Scene;
use unisg_core::xform::Form;
use unisg_nn::train::{
    entity_graph, generate_scene, metrics_csv, prepare_graphs, train_cgvae, train_classifier, train_linkpred,
    CgvaeTrainConfig, ClassifierTrainConfig, LinkPredTrainConfig, MetricRow,
};
use unisg_nn::NnError;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::scene_cmds::{augmentation, parse_form, write_file};

/// Forms compared by `--form all`.
pub const COMPARED_FORMS: [Form; 5] = [Form::Matrix, Form::AngleAxisT, Form::DualQuat, Form::PgaMotor, Form::CgaMotor];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify,
    Generate,
    Linkpred,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task, CliError> {
        match s {
            "classify" => Ok(Task::Classify),
            "generate" => Ok(Task::Generate),
            "linkpred" => Ok(Task::Linkpred),
            _ => Err(CliError::validation(format!(
                "unknown task {s:?}; expected classify, generate or linkpred"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Generate => "generate",
            Task::Linkpred => "linkpred",
        }
    }
}

/// `all`, a single form, or a comma-separated list.
pub fn parse_forms(s: &str) -> Result<Vec<Form>, CliError> {
    if s == "all" {
        return Ok(COMPARED_FORMS.to_vec());
    }
    let mut forms = Vec::new();
    for part in s.split(',').map(str::trim) {
        let f = parse_form(part)?;
        if !forms.contains(&f) {
            forms.push(f);
        }
    }
    Ok(forms)
}

struct FormRun {
    form: Form,
    rows: Vec<MetricRow>,
    checkpoint: Vec<u8>,
    summary: Summary,
    /// Generated sample for the `generate` task.
    sample: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Summary {
    epochs: usize,
    train_loss: Option<f64>,
    train_score: Option<f64>,
    test_loss: Option<f64>,
    test_score: Option<f64>,
}

fn nn_error(form: Form, run: usize, e: NnError) -> CliError {
    match e {
        NnError::Diverged { .. } => CliError::training(format!("{form} run {run}: training diverged: {e}")),
        other => CliError::validation(format!("{form} run {run}: {other}")),
    }
}

fn check(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.repeats == 0 {
        return Err(CliError::validation("repeats must be at least 1"));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(CliError::validation(format!("train_fraction {} outside (0, 1)", cfg.train_fraction)));
    }
    if let Some(lr) = cfg.lr {
        if !(lr > 0.0) {
            return Err(CliError::validation(format!("lr {lr} must be positive")));
        }
    }
    if cfg.hidden == 0 || cfg.latent == 0 {
        return Err(CliError::validation("hidden and latent widths must be positive"));
    }
    Ok(())
}

fn run_classify(cfg: &RunConfig, forms: &[Form], run: usize, seed: u64) -> Result<Vec<FormRun>, CliError> {
    let mut aug = augmentation(cfg);
    aug.seed = seed;
    let data = gen_classification_dataset(cfg.n_per_class, &aug).map_err(CliError::validation)?;
    let scenes: Vec<(Scene, Option<usize>)> = data.into_iter().map(|(s, l)| (s, Some(l))).collect();
    let defaults = ClassifierTrainConfig::default();
    let tcfg = ClassifierTrainConfig {
        epochs: cfg.epochs.unwrap_or(defaults.epochs),
        lr: cfg.lr.unwrap_or(defaults.lr),
        seed,
        train_fraction: cfg.train_fraction,
        hidden: cfg.hidden,
        attention: cfg.attention,
    };
    let mut out = Vec::new();
    for &form in forms {
        let ecfg = ExportConfig::new(form).with_mesh_width(cfg.mesh_width.unwrap_or(SMALL_MESH_WIDTH));
        let (graphs, _) = prepare_graphs(&scenes, &ecfg).map_err(|e| nn_error(form, run, e))?;
        let (model, report) = train_classifier(&graphs, &tcfg).map_err(|e| nn_error(form, run, e))?;
        let last = report.last();
        out.push(FormRun {
            form,
            rows: report.rows(),
            checkpoint: model.params.to_bytes(),
            summary: Summary {
                epochs: last.epoch,
                train_loss: Some(last.train_loss),
                train_score: Some(last.train_acc),
                test_loss: Some(last.test_loss),
                test_score: Some(last.test_acc),
            },
            sample: None,
        });
    }
    Ok(out)
}

fn run_generate(cfg: &RunConfig, forms: &[Form], run: usize, seed: u64) -> Result<Vec<FormRun>, CliError> {
    let scenes: Vec<(Scene, Option<usize>)> = gen_or_dataset(cfg.n_scenes, seed).into_iter().map(|s| (s, None)).collect();
    if scenes.is_empty() {
        return Err(CliError::validation("n_scenes must be at least 1"));
    }
    let defaults = CgvaeTrainConfig::default();
    let tcfg = CgvaeTrainConfig {
        epochs: cfg.epochs.unwrap_or(defaults.epochs),
        lr: cfg.lr.unwrap_or(defaults.lr),
        seed,
        beta: cfg.beta,
        hidden: cfg.hidden,
        latent: cfg.latent,
    };
    let mut out = Vec::new();
    for &form in forms {
        let ecfg = ExportConfig::new(form).with_mesh_width(cfg.mesh_width.unwrap_or(SMALL_MESH_WIDTH));
        let (graphs, vocab) = prepare_graphs(&scenes, &ecfg).map_err(|e| nn_error(form, run, e))?;
        let (model, report) = train_cgvae(&graphs, vocab.len(), &tcfg).map_err(|e| nn_error(form, run, e))?;
        let g = generate_scene(&model, &graphs[0].categories, seed).map_err(|e| nn_error(form, run, e))?;
        let name = |c: usize| vocab.name(c).unwrap_or("?").to_string();
        let mut sample = String::from("src,dst,src_category,dst_category\n");
        for i in 0..g.a.nrows() {
            for j in i + 1..g.a.ncols() {
                if g.a[[i, j]] > 0.0 {
                    let _ = writeln!(sample, "{i},{j},{},{}", name(g.categories[i]), name(g.categories[j]));
                }
            }
        }
        out.push(FormRun {
            form,
            rows: report.rows(),
            checkpoint: model.params.to_bytes(),
            summary: Summary {
                epochs: tcfg.epochs,
                train_loss: report.losses().last().copied(),
                ..Default::default()
            },
            sample: Some(sample),
        });
    }
    Ok(out)
}

fn run_linkpred(cfg: &RunConfig, forms: &[Form], run: usize, seed: u64) -> Result<Vec<FormRun>, CliError> {
    let (scene, relations) = gen_cube_stack(cfg.n_cubes, seed).map_err(CliError::validation)?;
    let defaults = LinkPredTrainConfig::default();
    let tcfg = LinkPredTrainConfig {
        epochs: cfg.epochs.unwrap_or(defaults.epochs),
        lr: cfg.lr.unwrap_or(defaults.lr),
        seed,
        holdout: cfg.holdout,
        hidden: cfg.hidden,
        latent: cfg.latent,
        edge_dropout: cfg.edge_dropout,
    };
    let mut out = Vec::new();
    for &form in forms {
        let data = entity_graph(&scene, "Cube", form, &relations).map_err(|e| nn_error(form, run, e))?;
        let (model, report) = train_linkpred(&data, &tcfg).map_err(|e| nn_error(form, run, e))?;
        out.push(FormRun {
            form,
            rows: report.rows(),
            checkpoint: model.params.to_bytes(),
            summary: Summary {
                epochs: tcfg.epochs,
                train_loss: report.losses.last().copied(),
                test_score: Some(report.auc),
                ..Default::default()
            },
            sample: None,
        });
    }
    Ok(out)
}

fn run_once(task: Task, cfg: &RunConfig, forms: &[Form], run: usize) -> Result<Vec<FormRun>, CliError> {
    let seed = cfg.seed.wrapping_add(run as u64);
    match task {
        Task::Classify => run_classify(cfg, forms, run, seed),
        Task::Generate => run_generate(cfg, forms, run, seed),
        Task::Linkpred => run_linkpred(cfg, forms, run, seed),
    }
}

/// Element-wise mean of runs that share one row layout.
fn mean_rows(runs: &[&[MetricRow]]) -> Vec<MetricRow> {
    let n = runs.len() as f64;
    let mean = |vals: Vec<Option<f64>>| -> Option<f64> {
        let vals: Option<Vec<f64>> = vals.into_iter().collect();
        vals.map(|v| v.iter().sum::<f64>() / n)
    };
    (0..runs[0].len())
        .map(|i| MetricRow {
            loss: mean(runs.iter().map(|r| r[i].loss).collect()),
            score: mean(runs.iter().map(|r| r[i].score).collect()),
            ..runs[0][i]
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_opt(label: &str, v: Option<f64>) -> String {
    v.map(|v| format!(" {label} {v:.4}")).unwrap_or_default()
}

pub fn experiment(task_name: &str, cfg: &RunConfig) -> Result<String, CliError> {
    let task = Task::parse(task_name)?;
    check(cfg)?;
    let forms = parse_forms(&cfg.form)?;
    let out = cfg.out.as_deref().ok_or_else(|| CliError::validation("experiment needs --out"))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(&out.display().to_string(), e))?;
    write_file(&out.join("config.txt"), &format!("# task = {}\n{}", task.name(), cfg.to_text()))?;

    // One worker per repeat; results are written in run order afterwards.
    let results: Vec<Result<Vec<FormRun>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.repeats)
            .map(|run| s.spawn({
                let forms = &forms;
                move || run_once(task, cfg, forms, run)
            }))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }

    let multi = cfg.repeats > 1;
    let suffix = |run: usize| if multi { format!("_run{run}") } else { String::new() };
    let mut summary = String::from("task,form,run,epochs,train_loss,train_score,test_loss,test_score\n");
    let mut lines = String::new();
    for (run, results) in runs.iter().enumerate() {
        for r in results {
            let tag = format!("{}{}", r.form, suffix(run));
            write_file(&out.join(format!("metrics_{tag}.csv")), &metrics_csv(&r.rows))?;
            std::fs::write(out.join(format!("model_{tag}.bin")), &r.checkpoint)
                .map_err(|e| CliError::io("checkpoint", e))?;
            if let Some(sample) = &r.sample {
                write_file(&out.join(format!("generated_{tag}.csv")), sample)?;
            }
            let m = &r.summary;
            let _ = writeln!(
                summary,
                "{},{},{run},{},{},{},{},{}",
                task.name(),
                r.form,
                m.epochs,
                cell(m.train_loss),
                cell(m.train_score),
                cell(m.test_loss),
                cell(m.test_score)
            );
            let (train_label, test_label) = match task {
                Task::Classify => ("train acc", "test acc"),
                _ => ("", "test auc"),
            };
            let _ = writeln!(
                lines,
                "{} {} run {run}: epochs {}{}{}{}",
                task.name(),
                r.form,
                m.epochs,
                fmt_opt("train loss", m.train_loss),
                if train_label.is_empty() { String::new() } else { fmt_opt(train_label, m.train_score) },
                fmt_opt(test_label, m.test_score)
            );
        }
    }
    if multi {
        for (i, form) in forms.iter().enumerate() {
            let per_run: Vec<&[MetricRow]> = runs.iter().map(|r| r[i].rows.as_slice()).collect();
            write_file(&out.join(format!("metrics_{form}_mean.csv")), &metrics_csv(&mean_rows(&per_run)))?;
        }
    }
    write_file(&out.join("summary.csv"), &summary)?;
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_lists() {
        assert_eq!(parse_forms("all").unwrap().len(), 5);
        assert_eq!(parse_forms("matrix, pga_motor,matrix").unwrap(), vec![Form::Matrix, Form::PgaMotor]);
        assert!(parse_forms("quaternion").is_err());
    }

    #[test]
    fn mean_of_runs() {
        let row = |loss, score| MetricRow {
            epoch: 0,
            split: "train",
            loss: Some(loss),
            score,
        };
        let a = [row(1.0, Some(0.5))];
        let b = [row(3.0, None)];
        let m = mean_rows(&[&a, &b]);
        assert_eq!(m[0].loss, Some(2.0));
        assert_eq!(m[0].score, None);
    }
}
