//! Experiment configuration: TOML sections `model`, `ladder`, `run` and the
//! optional `stationary`, `rl` and `sweep`.

use std::path::PathBuf;

use multistage::{Abstention, AbstentionKind, ActionMask, ModelParams, PolicyKind, RlConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    pub alpha: f64,
    pub gamma: f64,
    pub reward: f64,
    pub theta: Vec<f64>,
    pub cost_improve: Vec<f64>,
    pub cost_game: Vec<f64>,
    pub abstention: String,
    pub beta_tilde: f64,
    pub degree: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LadderSpec {
    /// Explicit thresholds.
    Explicit(Vec<f64>),
    /// Longest compliant ladder with step `delta_mu` and last threshold at most `cap`.
    Designed { delta_mu: f64, cap: f64 },
    /// `levels` thresholds with step `cap / levels`.
    Even { levels: usize, cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub policy: String,
    pub rho: Option<f64>,
    pub trials: usize,
    pub horizon: usize,
    pub window: usize,
    /// Average over `[burn_in, horizon)` instead of the final window.
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub x0: f64,
    pub trajectory: bool,
    /// Not hashed: the same experiment written elsewhere is the same experiment.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySection {
    pub depth: usize,
    pub depth_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RlSection {
    pub dx: f64,
    pub n_x: usize,
    pub da: f64,
    pub n_a: usize,
    pub episodes: usize,
    pub horizon: usize,
    pub discount: f64,
    pub ucb_coefficient: f64,
    pub seeds: usize,
    pub selection_window: usize,
    pub learning_rate_exponent: f64,
    pub mask: String,
    pub eval_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub ladder: LadderSpec,
    pub run: RunSection,
    pub stationary: StationarySection,
    pub rl: RlSection,
    #[serde(skip)]
    pub sweep: Option<Sweep>,
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        let m = &self.model;
        let kind = match m.abstention.as_str() {
            "entropy" => AbstentionKind::Entropy,
            "polynomial" => AbstentionKind::Polynomial,
            "absolute" => AbstentionKind::Absolute,
            other => {
                return Err(CliError::Config(format!(
                    "model.abstention: unknown kind {other:?}"
                )))
            }
        };
        let abst =
            Abstention::new(kind, m.beta_tilde, m.degree.unwrap_or(1.0)).map_err(model_error)?;
        ModelParams::new(
            m.alpha,
            m.gamma,
            m.reward,
            m.theta.clone(),
            m.cost_improve.clone(),
            m.cost_game.clone(),
            abst,
        )
        .map_err(model_error)
    }

    pub fn policy(&self) -> Result<PolicyKind, CliError> {
        match (self.run.policy.as_str(), self.run.rho) {
            ("ng", None) => Ok(PolicyKind::NoGaming),
            ("ni", None) => Ok(PolicyKind::NoImprovement),
            ("zero", None) => Ok(PolicyKind::Zero),
            ("mix", Some(rho)) => {
                PolicyKind::mix(rho).map_err(|e| CliError::Config(format!("run.rho: {e}")))
            }
            ("mix", None) => Err(CliError::Config(
                "run.rho: required for policy \"mix\"".into(),
            )),
            (p, Some(_)) if ["ng", "ni", "zero"].contains(&p) => Err(CliError::Config(format!(
                "run.rho: only valid with policy \"mix\", not {p:?}"
            ))),
            (p, _) => Err(CliError::Config(format!(
                "run.policy: unknown policy {p:?} (ng, ni, mix, zero)"
            ))),
        }
    }

    pub fn rl_config(&self) -> RlConfig<f64> {
        let r = &self.rl;
        RlConfig {
            dx: r.dx,
            n_x: r.n_x,
            da: r.da,
            n_a: r.n_a,
            episodes: r.episodes,
            horizon: r.horizon,
            discount: r.discount,
            ucb_coefficient: r.ucb_coefficient,
            seeds: r.seeds,
            selection_window: r.selection_window,
            learning_rate_exponent: r.learning_rate_exponent,
        }
    }

    pub fn rl_mask(&self) -> ActionMask {
        match self.rl.mask.as_str() {
            "improve" => ActionMask::ImprovementOnly,
            "game" => ActionMask::GamingOnly,
            _ => ActionMask::Both,
        }
    }

    /// SHA-256 of the resolved configuration (sweep excluded; each sweep
    /// point resolves to its own configuration).
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

/// Maps a parameter error onto its config key.
fn model_error(e: multistage::Error) -> CliError {
    match e {
        multistage::Error::InvalidParameter { name, reason } => {
            let key = match name {
                "reward_per_level" => "reward",
                "poly_degree" => "degree",
                "cost" => "cost_game",
                other => other,
            };
            CliError::Config(format!("model.{key}: {reason}"))
        }
        other => CliError::Config(format!("model: {other}")),
    }
}

/// Typed reader over one TOML section that remembers which keys were used.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str) -> Result<Self, CliError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(CliError::Config(format!("{name}: expected a table"))),
        };
        Ok(Self {
            name,
            table,
            used: Vec::new(),
        })
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn f64_opt(&mut self, key: &'static str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(CliError::Config(format!(
                "{}: expected a number",
                self.path(key)
            ))),
        }
    }

    fn f64_req(&mut self, key: &'static str) -> Result<f64, CliError> {
        self.f64_opt(key)?
            .ok_or_else(|| CliError::Config(format!("{}: missing required key", self.path(key))))
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn int_opt(&mut self, key: &'static str) -> Result<Option<u64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(CliError::Config(format!(
                "{}: expected a non-negative integer",
                self.path(key)
            ))),
        }
    }

    fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize, CliError> {
        Ok(self.int_opt(key)?.map_or(default, |v| v as usize))
    }

    fn bool_or(&mut self, key: &'static str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(CliError::Config(format!(
                "{}: expected true or false",
                self.path(key)
            ))),
        }
    }

    fn str_opt(&mut self, key: &'static str) -> Result<Option<String>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(CliError::Config(format!(
                "{}: expected a string",
                self.path(key)
            ))),
        }
    }

    /// A number or an array of numbers.
    fn vec_opt(&mut self, key: &'static str) -> Result<Option<Vec<f64>>, CliError> {
        let path = self.path(key);
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(vec![*x])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(k, v)| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(CliError::Config(format!("{path}[{k}]: expected a number"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(CliError::Config(format!(
                "{path}: expected a number or an array of numbers"
            ))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(t) = self.table {
            let mut unknown: Vec<&String> = t
                .keys()
                .filter(|k| !self.used.contains(&k.as_str()))
                .collect();
            unknown.sort();
            if let Some(k) = unknown.first() {
                return Err(CliError::Config(format!("{}.{k}: unknown key", self.name)));
            }
        }
        Ok(())
    }
}

pub const SECTIONS: [&str; 6] = ["model", "ladder", "run", "stationary", "rl", "sweep"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("syntax: {}", e.message())))?;
    resolve(&table)
}

/// Validates a parsed TOML table.
pub fn resolve(root: &Table) -> Result<ExperimentConfig, CliError> {
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(CliError::Config(format!("{k}: unknown section")));
    }
    for required in ["model", "ladder"] {
        if !root.contains_key(required) {
            return Err(CliError::Config(format!(
                "{required}: missing required section"
            )));
        }
    }

    let mut m = Section::new(root, "model")?;
    let abstention = m.str_opt("abstention")?.unwrap_or_else(|| "entropy".into());
    let degree = m.f64_opt("degree")?;
    if degree.is_some() != (abstention == "polynomial") {
        return Err(CliError::Config(if degree.is_some() {
            "model.degree: only valid with abstention = \"polynomial\"".into()
        } else {
            "model.degree: required for abstention = \"polynomial\"".into()
        }));
    }
    let model = ModelSection {
        alpha: m.f64_req("alpha")?,
        gamma: m.f64_req("gamma")?,
        reward: m.f64_or("reward", 1.0)?,
        theta: m.vec_opt("theta")?.unwrap_or_else(|| vec![1.0]),
        cost_improve: m
            .vec_opt("cost_improve")?
            .ok_or_else(|| CliError::Config("model.cost_improve: missing required key".into()))?,
        cost_game: m
            .vec_opt("cost_game")?
            .ok_or_else(|| CliError::Config("model.cost_game: missing required key".into()))?,
        abstention,
        beta_tilde: m.f64_req("beta_tilde")?,
        degree,
    };
    m.finish()?;

    let mut l = Section::new(root, "ladder")?;
    let modes = ["thresholds", "delta_mu", "levels"]
        .iter()
        .filter(|k| l.has(k))
        .count();
    if modes != 1 {
        return Err(CliError::Config(
            "ladder: give exactly one of thresholds, delta_mu (with cap) or levels (with cap)"
                .into(),
        ));
    }
    let ladder = if let Some(t) = l.vec_opt("thresholds")? {
        if l.has("cap") {
            return Err(CliError::Config(
                "ladder.cap: not used with explicit thresholds".into(),
            ));
        }
        LadderSpec::Explicit(t)
    } else if let Some(delta_mu) = l.f64_opt("delta_mu")? {
        LadderSpec::Designed {
            delta_mu,
            cap: l.f64_req("cap")?,
        }
    } else {
        let levels = l.int_opt("levels")?.unwrap_or(0) as usize;
        if levels < 2 {
            return Err(CliError::Config("ladder.levels: need at least 2".into()));
        }
        LadderSpec::Even {
            levels,
            cap: l.f64_req("cap")?,
        }
    };
    l.finish()?;

    let mut r = Section::new(root, "run")?;
    let run = RunSection {
        policy: r.str_opt("policy")?.unwrap_or_else(|| "ng".into()),
        rho: r.f64_opt("rho")?,
        trials: r.usize_or("trials", 30)?,
        horizon: r.usize_or("horizon", 10_000)?,
        window: r.usize_or("window", 2_000)?,
        burn_in: r.int_opt("burn_in")?.map(|v| v as usize),
        seed: r.int_opt("seed")?.unwrap_or(0),
        x0: r.f64_or("x0", 0.0)?,
        trajectory: r.bool_or("trajectory", false)?,
        output_dir: PathBuf::from(r.str_opt("output_dir")?.unwrap_or_else(|| "out".into())),
    };
    r.finish()?;
    if run.trials == 0 {
        return Err(CliError::Config("run.trials: must be positive".into()));
    }
    if run.window == 0 || run.window > run.horizon {
        return Err(CliError::Config(format!(
            "run.window: must lie in [1, horizon = {}], got {}",
            run.horizon, run.window
        )));
    }
    if let Some(b) = run.burn_in {
        if b >= run.horizon {
            return Err(CliError::Config(format!(
                "run.burn_in: must be below horizon = {}",
                run.horizon
            )));
        }
    }
    if !(run.x0 >= 0.0 && run.x0.is_finite()) {
        return Err(CliError::Config(format!(
            "run.x0: must be non-negative, got {}",
            run.x0
        )));
    }

    let mut s = Section::new(root, "stationary")?;
    let default_depth = ((1e-3f64).ln() / model.gamma.ln()).ceil().max(1.0);
    let stationary = StationarySection {
        depth: s.usize_or(
            "depth",
            if default_depth.is_finite() {
                default_depth as usize
            } else {
                60
            },
        )?,
        depth_check: s.bool_or("depth_check", true)?,
    };
    s.finish()?;
    if stationary.depth == 0 {
        return Err(CliError::Config(
            "stationary.depth: must be positive".into(),
        ));
    }

    let mut q = Section::new(root, "rl")?;
    let d = RlConfig::<f64>::default();
    let rl = RlSection {
        dx: q.f64_or("dx", d.dx)?,
        n_x: q.usize_or("n_x", d.n_x)?,
        da: q.f64_or("da", d.da)?,
        n_a: q.usize_or("n_a", d.n_a)?,
        episodes: q.usize_or("episodes", d.episodes)?,
        horizon: q.usize_or("horizon", d.horizon)?,
        discount: q.f64_or("discount", d.discount)?,
        ucb_coefficient: q.f64_or("ucb_coefficient", d.ucb_coefficient)?,
        seeds: q.usize_or("seeds", d.seeds)?,
        selection_window: q.usize_or("selection_window", d.selection_window)?,
        learning_rate_exponent: q.f64_or("learning_rate_exponent", d.learning_rate_exponent)?,
        mask: q.str_opt("mask")?.unwrap_or_else(|| "both".into()),
        eval_horizon: q.usize_or("eval_horizon", 2500)?,
    };
    q.finish()?;
    if !["both", "improve", "game"].contains(&rl.mask.as_str()) {
        return Err(CliError::Config(format!(
            "rl.mask: expected both, improve or game, got {:?}",
            rl.mask
        )));
    }

    let mut w = Section::new(root, "sweep")?;
    let sweep = match (w.str_opt("key")?, w.raw("values")) {
        (None, None) => None,
        (Some(key), Some(Value::Array(values))) if !values.is_empty() => Some(Sweep {
            key,
            values: values.clone(),
        }),
        (Some(_), _) => {
            return Err(CliError::Config(
                "sweep.values: expected a non-empty array".into(),
            ))
        }
        (None, Some(_)) => return Err(CliError::Config("sweep.key: missing required key".into())),
    };
    w.finish()?;

    let cfg = ExperimentConfig {
        model,
        ladder,
        run,
        stationary,
        rl,
        sweep,
    };
    cfg.params()?;
    cfg.policy()?;
    cfg.rl_config()
        .validate()
        .map_err(|e| CliError::Config(format!("rl: {e}")))?;
    Ok(cfg)
}

/// Sets `section.key` in a TOML table, e.g. from `--sweep` or a flag.
pub fn set_key(root: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("{path}: expected section.key")))?;
    if !SECTIONS.contains(&section) || section == "sweep" {
        return Err(CliError::Config(format!("{path}: unknown section")));
    }
    let entry = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let table = entry
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("{section}: expected a table")))?;
    if section == "ladder" && ["thresholds", "delta_mu", "levels"].contains(&key) {
        // Switching ladder mode replaces the previous one.
        for other in ["thresholds", "delta_mu", "levels"] {
            if other != key {
                table.remove(other);
            }
        }
    }
    table.insert(key.to_string(), value);
    Ok(())
}

/// Parses a command-line scalar: integer, float, boolean, else string.
pub fn parse_value(text: &str) -> Value {
    let t = text.trim();
    if let Ok(i) = t.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(x) = t.parse::<f64>() {
        Value::Float(x)
    } else if let Ok(b) = t.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(t.to_string())
    }
}

/// `KEY=V1,V2,...`.
pub fn parse_sweep_flag(flag: &str) -> Result<Sweep, CliError> {
    let (key, vals) = flag
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--sweep {flag:?}: expected KEY=V1,V2,...")))?;
    let values: Vec<Value> = vals
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_value)
        .collect();
    if values.is_empty() {
        return Err(CliError::Config(format!("--sweep {flag:?}: no values")));
    }
    Ok(Sweep {
        key: key.trim().to_string(),
        values,
    })
}

pub fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
alpha = 4.0
gamma = 0.9
cost_improve = 0.8
cost_game = 0.75
beta_tilde = 0.604

[ladder]
levels = 10
cap = 3.0
"#;

    fn err(text: &str) -> String {
        match parse_config(text) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn reference_parses_with_defaults() {
        let cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.model.reward, 1.0);
        assert_eq!(cfg.run.horizon, 10_000);
        assert_eq!(cfg.run.policy, "ng");
        assert_eq!(
            cfg.ladder,
            LadderSpec::Even {
                levels: 10,
                cap: 3.0
            }
        );
        assert_eq!(cfg.stationary.depth, 66);
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn cheaper_improvement_rejected() {
        let m = err(&BASE.replace("cost_game = 0.75", "cost_game = 0.8"));
        assert!(m.starts_with("model.cost_game"), "{m}");
    }

    #[test]
    fn ladder_modes_are_exclusive() {
        let m = err(&BASE.replace("levels = 10", "levels = 10\ndelta_mu = 0.3"));
        assert!(m.starts_with("ladder:"), "{m}");
        let m = err(&BASE.replace("levels = 10\ncap = 3.0", ""));
        assert!(m.starts_with("ladder:"), "{m}");
    }

    #[test]
    fn errors_carry_key_paths() {
        assert!(err(&BASE.replace("alpha = 4.0", "alpha = 4.0\nalhpa = 1"))
            .starts_with("model.alhpa: unknown key"));
        assert!(err(&BASE.replace("alpha = 4.0\n", "")).starts_with("model.alpha: missing"));
        assert!(err(&BASE.replace("gamma = 0.9", "gamma = \"x\""))
            .starts_with("model.gamma: expected a number"));
        assert!(err(&BASE.replace("gamma = 0.9", "gamma = 1.5")).starts_with("model.gamma"));
        assert!(
            err(&format!("{BASE}\n[run]\nwindow = 20\nhorizon = 10\n")).starts_with("run.window")
        );
        assert!(err(&format!("{BASE}\n[run]\npolicy = \"mix\"\n")).starts_with("run.rho"));
        assert!(err(&format!("{BASE}\n[rl]\nmask = \"all\"\n")).starts_with("rl.mask"));
        assert!(err(&format!("{BASE}\n[extra]\nx = 1\n")).starts_with("extra: unknown section"));
        assert!(err("[model\n").starts_with("syntax"));
    }

    #[test]
    fn polynomial_degree_gate() {
        let poly = BASE.replace(
            "beta_tilde = 0.604",
            "beta_tilde = 0.604\nabstention = \"polynomial\"",
        );
        assert!(err(&poly).starts_with("model.degree: required"));
        assert!(parse_config(&poly.replace("abstention", "degree = 2.0\nabstention")).is_ok());
        assert!(
            err(&BASE.replace("beta_tilde = 0.604", "beta_tilde = 0.604\ndegree = 2.0"))
                .starts_with("model.degree")
        );
    }

    #[test]
    fn set_key_switches_ladder_mode() {
        let mut root: Table = BASE.parse().unwrap();
        set_key(
            &mut root,
            "ladder.thresholds",
            Value::Array(vec![Value::Float(0.0), Value::Float(1.0)]),
        )
        .unwrap();
        root["ladder"].as_table_mut().unwrap().remove("cap");
        let cfg = resolve(&root).unwrap();
        assert_eq!(cfg.ladder, LadderSpec::Explicit(vec![0.0, 1.0]));
        assert!(set_key(&mut root, "nothing", Value::Integer(1)).is_err());
    }

    #[test]
    fn sweep_flag_values() {
        let s = parse_sweep_flag("run.rho=0,0.5,1").unwrap();
        assert_eq!(s.key, "run.rho");
        assert_eq!(
            s.values,
            vec![Value::Integer(0), Value::Float(0.5), Value::Integer(1)]
        );
        assert!(parse_sweep_flag("run.rho").is_err());
        assert!(parse_sweep_flag("run.rho=").is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = parse_config(&format!("{BASE}\n[run]\noutput_dir = \"a\"\n")).unwrap();
        let b = parse_config(&format!("{BASE}\n[run]\noutput_dir = \"b\"\n")).unwrap();
        let c = parse_config(&format!("{BASE}\n[run]\nseed = 3\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
