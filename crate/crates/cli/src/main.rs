//! `unisg`: convert, validate, generate and export scenes, and run the
//! classification, generation and link-prediction experiments.
//!
//! Exit codes: 0 ok, 1 validation, 2 parse, 3 conversion, 4 training.

mod config;
mod error;
mod experiment;
mod scene_cmds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "unisg", version, about = "Scenegraph conversion, validation and learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert every transform in a scene file to one form.
    Convert {
        #[arg(long)]
        input: PathBuf,
        /// Target form: matrix, angle_axis_t, quat_t, dual_quat, pga_motor, cga_motor.
        #[arg(long)]
        to: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check transforms, scene invariants and info censuses.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Instantiate a template (or, living_room) or a cube stack.
    SceneGen {
        #[command(flatten)]
        common: Common,
        /// or, living_room or cube_stack.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Apply seeded pose and mesh noise to template scenes.
        #[arg(long)]
        augment: Option<bool>,
        #[command(flatten)]
        aug: AugFlags,
        #[arg(long)]
        n_cubes: Option<usize>,
    },
    /// Write graph tensors and the flat node/edge export.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "matrix")]
        form: String,
        /// Leading mesh feature values kept per node (default: all).
        #[arg(long)]
        mesh_width: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train one task and write per-epoch metrics.
    Experiment {
        /// classify, generate or linkpred.
        #[arg(long)]
        task: String,
        #[command(flatten)]
        common: Common,
        /// A form, a comma-separated list, or `all`.
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Independent runs with seeds seed, seed+1, ...
        #[arg(long)]
        repeats: Option<usize>,
        /// Scenes per class for classify.
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Scenes for generate.
        #[arg(long)]
        n_scenes: Option<usize>,
        /// Cubes for linkpred.
        #[arg(long)]
        n_cubes: Option<usize>,
        #[arg(long)]
        mesh_width: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        latent: Option<usize>,
        #[arg(long)]
        attention: Option<bool>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        edge_dropout: Option<f64>,
        #[command(flatten)]
        aug: AugFlags,
    },
}

#[derive(Args)]
struct Common {
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Falls back to the config file, then UNISG_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AugFlags {
    /// Translation noise as a fraction of the scene diameter.
    #[arg(long)]
    translation_sigma: Option<f64>,
    #[arg(long)]
    rotation_max_deg: Option<f64>,
    #[arg(long)]
    mesh_sigma: Option<f64>,
}

/// Collects flag overrides as `(key, value)` pairs.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn put<T: ToString>(&mut self, key: &'static str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn aug(&mut self, a: AugFlags) -> &mut Self {
        self.put("translation_sigma", a.translation_sigma)
            .put("rotation_max_deg", a.rotation_max_deg)
            .put("mesh_sigma", a.mesh_sigma)
    }
}

fn effective(common: Common, flags: Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for (k, v) in flags.0 {
        cfg.set(k, &v)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Convert { input, to, output } => scene_cmds::convert(&input, &to, &output),
        Command::Validate { input } => scene_cmds::validate(&input),
        Command::SceneGen {
            common,
            template,
            output,
            augment,
            aug,
            n_cubes,
        } => {
            let mut o = Overrides::default();
            o.put("template", template)
                .put("out", output.map(|p| p.display().to_string()))
                .put("augment", augment)
                .put("n_cubes", n_cubes)
                .aug(aug);
            scene_cmds::scene_gen(&effective(common, o)?)
        }
        Command::Export {
            input,
            form,
            mesh_width,
            out_dir,
        } => scene_cmds::export(&input, &form, mesh_width, &out_dir),
        Command::Experiment {
            task,
            common,
            form,
            epochs,
            lr,
            out,
            repeats,
            n_per_class,
            n_scenes,
            n_cubes,
            mesh_width,
            hidden,
            latent,
            attention,
            train_fraction,
            beta,
            holdout,
            edge_dropout,
            aug,
        } => {
            let mut o = Overrides::default();
            o.put("form", form)
                .put("epochs", epochs)
                .put("lr", lr)
                .put("out", out.map(|p| p.display().to_string()))
                .put("repeats", repeats)
                .put("n_per_class", n_per_class)
                .put("n_scenes", n_scenes)
                .put("n_cubes", n_cubes)
                .put("mesh_width", mesh_width)
                .put("hidden", hidden)
                .put("latent", latent)
                .put("attention", attention)
                .put("train_fraction", train_fraction)
                .put("beta", beta)
                .put("holdout", holdout)
                .put("edge_dropout", edge_dropout)
                .aug(aug);
            experiment::experiment(&task, &effective(common, o)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            if !report.is_empty() && !report.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message.trim_end());
            ExitCode::from(e.code)
        }
    }
}
