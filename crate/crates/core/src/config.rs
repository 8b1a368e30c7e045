//! Flat `key = value` run configuration.
//!
//! Precedence, lowest to highest: built-in defaults, the config file,
//! command-line flags. Keys use the flag spellings with `-` or `_`
//! interchangeable (`beta-s`, `beta_s`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::objective::ClLoss;
use crate::perturb::PerturbMode;
use crate::trainer::TrainConfig;

pub fn parse_perturb_mode(s: &str) -> Result<PerturbMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "cp" | "collaborative" => Ok(PerturbMode::Collaborative),
        "rp" | "random" => Ok(PerturbMode::Random),
        other => Err(Error::Config(format!("unknown perturbation mode '{other}' (expected cp or rp)"))),
    }
}

pub fn perturb_mode_name(m: PerturbMode) -> &'static str {
    match m {
        PerturbMode::Collaborative => "cp",
        PerturbMode::Random => "rp",
    }
}

pub fn parse_cl_loss(s: &str) -> Result<ClLoss> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "ac" | "ac_infonce" => Ok(ClLoss::AcInfoNce),
        "infonce" => Ok(ClLoss::InfoNce),
        other => Err(Error::Config(format!("unknown contrastive loss '{other}' (expected ac or infonce)"))),
    }
}

pub fn cl_loss_name(l: ClLoss) -> &'static str {
    match l {
        ClLoss::AcInfoNce => "ac",
        ClLoss::InfoNce => "infonce",
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("'{key}': cannot parse '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("'{key}': expected true or false, got '{value}'"))),
    }
}

/// Set one field from its textual form.
pub fn apply_setting(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let k = normalize_key(key);
    match k.as_str() {
        "seed" => cfg.seed = number(&k, value)?,
        "beta_s" => cfg.thresholds.beta_s = number(&k, value)?,
        "beta_r" => cfg.thresholds.beta_r = number(&k, value)?,
        "sigma" => cfg.thresholds.sigma = number(&k, value)?,
        "lambda1" => cfg.weights.lambda1 = number(&k, value)?,
        "lambda2" => cfg.weights.lambda2 = number(&k, value)?,
        "lambda3" => cfg.weights.lambda3 = number(&k, value)?,
        "lambda_reg" => cfg.weights.lambda_reg = number(&k, value)?,
        "tau" => cfg.weights.tau = number(&k, value)?,
        "epsilon" => cfg.epsilon = number(&k, value)?,
        "layers" => cfg.layers = number(&k, value)?,
        "dim" => cfg.dim = number(&k, value)?,
        "batch" => cfg.batch_size = number(&k, value)?,
        "lr" => cfg.learning_rate = number(&k, value)?,
        "adam_beta1" => cfg.adam.beta1 = number(&k, value)?,
        "adam_beta2" => cfg.adam.beta2 = number(&k, value)?,
        "adam_eps" => cfg.adam.eps = number(&k, value)?,
        "epochs" => cfg.max_epochs = number(&k, value)?,
        "patience" => cfg.patience = number(&k, value)?,
        "ablation" => cfg.ablation = value.parse()?,
        "perturb" => cfg.perturb_mode = parse_perturb_mode(value)?,
        "cl_loss" => cfg.cl_loss = parse_cl_loss(value)?,
        "validation" => cfg.validation = boolean(&k, value)?,
        "validation_fraction" => cfg.validation_fraction = number(&k, value)?,
        _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
    }
    Ok(())
}

/// Parse `key = value` lines; `#` starts a comment line.
pub fn parse_settings(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected 'key = value', got '{line}'", origin.display(), n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config_file(path: &Path, cfg: &mut TrainConfig) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    for (k, v) in parse_settings(&text, path)? {
        apply_setting(cfg, &k, &v)?;
    }
    Ok(())
}

/// Every field in canonical order, in the config-file syntax.
pub fn render_config(cfg: &TrainConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("seed", cfg.seed.to_string());
    put("beta_s", cfg.thresholds.beta_s.to_string());
    put("beta_r", cfg.thresholds.beta_r.to_string());
    put("sigma", cfg.thresholds.sigma.to_string());
    put("lambda1", cfg.weights.lambda1.to_string());
    put("lambda2", cfg.weights.lambda2.to_string());
    put("lambda3", cfg.weights.lambda3.to_string());
    put("lambda_reg", cfg.weights.lambda_reg.to_string());
    put("tau", cfg.weights.tau.to_string());
    put("epsilon", cfg.epsilon.to_string());
    put("layers", cfg.layers.to_string());
    put("dim", cfg.dim.to_string());
    put("batch", cfg.batch_size.to_string());
    put("lr", cfg.learning_rate.to_string());
    put("adam_beta1", cfg.adam.beta1.to_string());
    put("adam_beta2", cfg.adam.beta2.to_string());
    put("adam_eps", cfg.adam.eps.to_string());
    put("epochs", cfg.max_epochs.to_string());
    put("patience", cfg.patience.to_string());
    put("ablation", cfg.ablation.to_string());
    put("perturb", perturb_mode_name(cfg.perturb_mode).to_string());
    put("cl_loss", cl_loss_name(cfg.cl_loss).to_string());
    put("validation", cfg.validation.to_string());
    put("validation_fraction", cfg.validation_fraction.to_string());
    s
}

/// 40 hex digits of SHA-256 over the canonical rendering.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let digest = Sha256::digest(render_config(cfg).as_bytes());
    digest.iter().take(20).map(|b| format!("{b:02x}")).collect()
}

/// What a run was asked to do, written before any training starts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: TrainConfig,
    pub inputs: Vec<(String, PathBuf)>,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn hash(&self) -> String {
        config_hash(&self.config)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("command = {}\nconfig_hash = {}\nout = {}\n", self.command, self.hash(), self.out.display());
        for (name, path) in &self.inputs {
            let _ = writeln!(s, "{name} = {}", path.display());
        }
        s.push_str(&render_config(&self.config));
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
