use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::arch::{ArchConfig, Conditioning};
use crate::data::parse_key_values;
use crate::error::{Error, Result};
use crate::losses::{CbiganHyper, VarganHyper};
use crate::nn::Rule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// BEGAN backbone with the auxiliary regressor.
    Vargan,
    /// Conditional BiGAN baseline.
    Cbigan,
    /// Unconditional BEGAN: same backbone, generator sees only noise.
    Began,
    /// Independently trained landmark regressor used for evaluation.
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vargan => "vargan",
            Method::Cbigan => "cbigan",
            Method::Began => "began",
            Method::Oracle => "oracle",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vargan" => Ok(Method::Vargan),
            "cbigan" => Ok(Method::Cbigan),
            "began" => Ok(Method::Began),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub method: Method,
    pub arch: ArchConfig,
    pub vargan: VarganHyper,
    pub cbigan: CbiganHyper,
    pub batch: usize,
    pub steps: u64,
    pub seed: u64,
    /// Share of genuine pairs in the regressor's training loss.
    pub real_mix: f64,
    pub opt_g: Rule,
    pub opt_d: Rule,
    /// Regressor (VAR+GAN) or encoder (cBiGAN) optimizer.
    pub opt_r: Rule,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub data: PathBuf,
}

impl TrainerConfig {
    /// Desk-scale defaults for `method`.
    pub fn desk(method: Method) -> Self {
        let mut arch = ArchConfig::desk();
        if method == Method::Began {
            arch.conditioning = Conditioning::None;
        }
        Self {
            method,
            arch,
            vargan: VarganHyper::default(),
            cbigan: CbiganHyper::default(),
            batch: 16,
            steps: 2000,
            seed: 0,
            real_mix: 0.5,
            opt_g: Rule::adam_default(),
            opt_d: Rule::adam_default(),
            opt_r: match method {
                Method::Vargan => Rule::nesterov_default(),
                Method::Oracle => Rule::Adam {
                    lr: 1e-3,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                _ => Rule::adam_default(),
            },
            checkpoint_every: 0,
            data: PathBuf::from("data"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.vargan.validate()?;
        self.cbigan.validate()?;
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.real_mix) {
            return Err(Error::InvalidConfig(format!("real_mix {} outside [0, 1]", self.real_mix)));
        }
        let unconditional = self.arch.conditioning == Conditioning::None;
        if unconditional != (self.method == Method::Began) {
            return Err(Error::InvalidConfig(format!(
                "method {} requires conditioning {}",
                self.method,
                if self.method == Method::Began { "none" } else { "concat" }
            )));
        }
        for rule in [self.opt_g, self.opt_d, self.opt_r] {
            let ok = match rule {
                Rule::Adam { lr, beta1, beta2, eps } => {
                    lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
                }
                Rule::Nesterov { lr, momentum } => lr > 0.0 && (0.0..1.0).contains(&momentum),
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("invalid optimizer settings {rule:?}")));
            }
        }
        Ok(())
    }

    /// Every setting that shapes the networks or the update rule; run
    /// length, cadence and paths are excluded so a checkpoint can be resumed
    /// with a different step budget.
    fn model_entries(&self) -> Vec<(String, String)> {
        let a = &self.arch;
        let mut e = vec![
            ("method".into(), self.method.to_string()),
            ("image_size".into(), a.image_size.to_string()),
            ("image_channels".into(), a.image_channels.to_string()),
            ("latent_dim".into(), a.latent_dim.to_string()),
            ("landmarks".into(), a.landmarks.to_string()),
            ("seed_size".into(), a.seed_size.to_string()),
            ("decoder_channels".into(), a.decoder_channels.to_string()),
            (
                "encoder_channels".into(),
                a.encoder_channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("hidden_dim".into(), a.hidden_dim.to_string()),
            ("regressor_channels".into(), a.regressor_channels.to_string()),
            ("regressor_hidden".into(), a.regressor_hidden.to_string()),
            ("generator_sigmoid".into(), a.generator_sigmoid.to_string()),
            ("gamma".into(), format!("{:?}", self.vargan.gamma)),
            ("adv_weight".into(), format!("{:?}", self.vargan.adv_weight)),
            ("reg_weight".into(), format!("{:?}", self.vargan.reg_weight)),
            ("lambda_k".into(), format!("{:?}", self.vargan.lambda_k)),
            ("eps_log".into(), format!("{:?}", self.vargan.eps_log)),
            ("theta".into(), format!("{:?}", self.cbigan.theta)),
            ("real_mix".into(), format!("{:?}", self.real_mix)),
            ("batch".into(), self.batch.to_string()),
            ("seed".into(), self.seed.to_string()),
        ];
        for (prefix, rule) in [("g", self.opt_g), ("d", self.opt_d), ("r", self.opt_r)] {
            e.push((format!("{prefix}_optimizer"), rule_name(rule).into()));
            match rule {
                Rule::Adam { lr, beta1, beta2, eps } => {
                    e.push((format!("{prefix}_lr"), format!("{lr:?}")));
                    e.push((format!("{prefix}_beta1"), format!("{beta1:?}")));
                    e.push((format!("{prefix}_beta2"), format!("{beta2:?}")));
                    e.push((format!("{prefix}_eps"), format!("{eps:?}")));
                }
                Rule::Nesterov { lr, momentum } => {
                    e.push((format!("{prefix}_lr"), format!("{lr:?}")));
                    e.push((format!("{prefix}_momentum"), format!("{momentum:?}")));
                }
            }
        }
        e
    }

    /// Hex SHA-256 of the model-defining entries.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        for (k, v) in self.model_entries() {
            let _ = writeln!(text, "{k}={v}");
        }
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Full `key=value` rendering, parseable by [`TrainerConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut text = String::new();
        for (k, v) in self.model_entries() {
            let _ = writeln!(text, "{k}={v}");
        }
        let _ = writeln!(text, "steps={}", self.steps);
        let _ = writeln!(text, "checkpoint_every={}", self.checkpoint_every);
        let _ = writeln!(text, "data={}", self.data.display());
        text
    }

    /// Applies `key=value` overrides on top of the desk defaults of the
    /// method named in the text (or `fallback` when absent).
    pub fn from_kv(text: &str, fallback: Method) -> Result<Self> {
        let kv = parse_key_values(text).map_err(Error::InvalidConfig)?;
        let method = match kv.iter().rev().find(|(k, _)| k == "method") {
            Some((_, v)) => v.parse()?,
            None => fallback,
        };
        let mut cfg = Self::desk(method);
        for (k, v) in &kv {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{v}`")))
        }
        let a = &mut self.arch;
        match key {
            "method" => {
                let m: Method = value.parse()?;
                if m != self.method {
                    return Err(Error::InvalidConfig(format!(
                        "method changed from {} to {m} after defaults were chosen",
                        self.method
                    )));
                }
            }
            "image_size" => a.image_size = num(key, value)?,
            "image_channels" => a.image_channels = num(key, value)?,
            "latent_dim" => a.latent_dim = num(key, value)?,
            "landmarks" => a.landmarks = num(key, value)?,
            "seed_size" => a.seed_size = num(key, value)?,
            "decoder_channels" => a.decoder_channels = num(key, value)?,
            "encoder_channels" => {
                a.encoder_channels = value
                    .split(',')
                    .map(|c| num(key, c.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "hidden_dim" => a.hidden_dim = num(key, value)?,
            "regressor_channels" => a.regressor_channels = num(key, value)?,
            "regressor_hidden" => a.regressor_hidden = num(key, value)?,
            "generator_sigmoid" => a.generator_sigmoid = num(key, value)?,
            "gamma" => self.vargan.gamma = num(key, value)?,
            "adv_weight" => self.vargan.adv_weight = num(key, value)?,
            "reg_weight" => self.vargan.reg_weight = num(key, value)?,
            "lambda_k" => self.vargan.lambda_k = num(key, value)?,
            "eps_log" => {
                self.vargan.eps_log = num(key, value)?;
                self.cbigan.eps_log = self.vargan.eps_log;
            }
            "theta" => self.cbigan.theta = num(key, value)?,
            "real_mix" => self.real_mix = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "data" => self.data = PathBuf::from(value),
            _ => {
                let Some((prefix, field)) = key.split_once('_') else {
                    return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
                };
                let rule = match prefix {
                    "g" => &mut self.opt_g,
                    "d" => &mut self.opt_d,
                    "r" => &mut self.opt_r,
                    _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
                };
                set_rule_field(rule, key, field, value)?;
            }
        }
        Ok(())
    }
}

fn rule_name(rule: Rule) -> &'static str {
    match rule {
        Rule::Adam { .. } => "adam",
        Rule::Nesterov { .. } => "nesterov",
    }
}

fn set_rule_field(rule: &mut Rule, key: &str, field: &str, value: &str) -> Result<()> {
    let bad = || Error::InvalidConfig(format!("`{key}`: invalid value `{value}`"));
    if field == "optimizer" {
        *rule = match (value, *rule) {
            ("adam", Rule::Adam { .. }) | ("nesterov", Rule::Nesterov { .. }) => *rule,
            ("adam", _) => Rule::adam_default(),
            ("nesterov", _) => Rule::nesterov_default(),
            _ => return Err(bad()),
        };
        return Ok(());
    }
    let v: f64 = value.parse().map_err(|_| bad())?;
    match (rule, field) {
        (Rule::Adam { lr, .. } | Rule::Nesterov { lr, .. }, "lr") => *lr = v,
        (Rule::Adam { beta1, .. }, "beta1") => *beta1 = v,
        (Rule::Adam { beta2, .. }, "beta2") => *beta2 = v,
        (Rule::Adam { eps, .. }, "eps") => *eps = v,
        (Rule::Nesterov { momentum, .. }, "momentum") => *momentum = v,
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown key `{key}` for the configured optimizer"
            )))
        }
    }
    Ok(())
}
