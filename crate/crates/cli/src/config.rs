//! Effective run configuration: defaults, then `UNISG_SEED`, then a
//! `key = value` config file, then command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub const SEED_ENV: &str = "UNISG_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// `matrix`, a comma-separated list of forms, or `all`.
    pub form: String,
    /// `None` means the per-task default.
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub out: Option<PathBuf>,
    /// Scene template for `scene-gen`.
    pub template: Option<String>,
    pub repeats: usize,
    pub n_per_class: usize,
    pub n_scenes: usize,
    pub n_cubes: usize,
    pub mesh_width: Option<usize>,
    pub hidden: usize,
    pub latent: usize,
    pub attention: bool,
    pub train_fraction: f64,
    pub beta: f64,
    pub holdout: f64,
    pub edge_dropout: f64,
    pub augment: bool,
    pub translation_sigma: f64,
    pub rotation_max_deg: f64,
    pub mesh_sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let aug = unisg_core::datasets::AugmentationConfig::default();
        let lp = unisg_nn::train::LinkPredTrainConfig::default();
        let cls = unisg_nn::train::ClassifierTrainConfig::default();
        RunConfig {
            seed: 0,
            form: "matrix".into(),
            epochs: None,
            lr: None,
            out: None,
            template: None,
            repeats: 1,
            n_per_class: 50,
            n_scenes: 100,
            n_cubes: 1000,
            mesh_width: None,
            hidden: unisg_nn::models::HIDDEN,
            latent: unisg_nn::models::LATENT,
            attention: cls.attention,
            train_fraction: cls.train_fraction,
            beta: 1.0,
            holdout: lp.holdout,
            edge_dropout: lp.edge_dropout,
            augment: false,
            translation_sigma: aug.translation_sigma,
            rotation_max_deg: aug.rotation_max_deg,
            mesh_sigma: aug.mesh_sigma,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::validation(format!("invalid value {value:?} for {key}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn auto<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_else(|| "auto".into())
}

impl RunConfig {
    /// Defaults with the seed taken from `UNISG_SEED` when set.
    pub fn from_env() -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = parse_value(SEED_ENV, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "form" => self.form = value.to_string(),
            "epochs" => self.epochs = parse_auto(key, value)?,
            "lr" => self.lr = parse_auto(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "template" => self.template = Some(value.to_string()),
            "repeats" => self.repeats = parse_value(key, value)?,
            "n_per_class" => self.n_per_class = parse_value(key, value)?,
            "n_scenes" => self.n_scenes = parse_value(key, value)?,
            "n_cubes" => self.n_cubes = parse_value(key, value)?,
            "mesh_width" => self.mesh_width = parse_auto(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "latent" => self.latent = parse_value(key, value)?,
            "attention" => self.attention = parse_value(key, value)?,
            "train_fraction" => self.train_fraction = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "holdout" => self.holdout = parse_value(key, value)?,
            "edge_dropout" => self.edge_dropout = parse_value(key, value)?,
            "augment" => self.augment = parse_value(key, value)?,
            "translation_sigma" => self.translation_sigma = parse_value(key, value)?,
            "rotation_max_deg" => self.rotation_max_deg = parse_value(key, value)?,
            "mesh_sigma" => self.mesh_sigma = parse_value(key, value)?,
            _ => return Err(CliError::validation(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a config file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::validation(format!("{origin}:{}: expected key = value", i + 1)));
            };
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::validation(format!("{origin}:{}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `key = value` lines that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("seed", self.seed.to_string());
        put("form", self.form.clone());
        put("epochs", auto(&self.epochs));
        put("lr", auto(&self.lr));
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        if let Some(t) = &self.template {
            put("template", t.clone());
        }
        put("repeats", self.repeats.to_string());
        put("n_per_class", self.n_per_class.to_string());
        put("n_scenes", self.n_scenes.to_string());
        put("n_cubes", self.n_cubes.to_string());
        put("mesh_width", auto(&self.mesh_width));
        put("hidden", self.hidden.to_string());
        put("latent", self.latent.to_string());
        put("attention", self.attention.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("beta", self.beta.to_string());
        put("holdout", self.holdout.to_string());
        put("edge_dropout", self.edge_dropout.to_string());
        put("augment", self.augment.to_string());
        put("translation_sigma", self.translation_sigma.to_string());
        put("rotation_max_deg", self.rotation_max_deg.to_string());
        put("mesh_sigma", self.mesh_sigma.to_string());
        s
    }
}
