use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AdamConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Mlm,
    #[serde(alias = "classification")]
    Cls,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlm" => Ok(Objective::Mlm),
            "cls" | "classification" => Ok(Objective::Cls),
            other => Err(format!("unknown objective `{other}` (expected mlm or cls)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    Random,
    FromCheckpoint(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Everything that drives one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub objective: Objective,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fraction of eligible pieces selected per batch (MLM only).
    pub mask_rate: f64,
    pub init: InitSource,
    pub optimizer: OptimizerKind,
    pub adam: AdamConfig,
    /// Stop after this many optimizer steps, if set.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl TrainPlan {
    /// Published settings: 3 epochs, Adam with lr 1e-5 and epsilon 1e-8.
    /// The batch size of 8 is not given for the transformers and follows the
    /// common fine-tuning default.
    pub fn paper(objective: Objective) -> Self {
        TrainPlan {
            objective,
            epochs: 3,
            batch_size: 8,
            seed: 0,
            mask_rate: 0.15,
            init: InitSource::Random,
            optimizer: OptimizerKind::Adam,
            adam: AdamConfig::default(),
            max_steps: None,
        }
    }

    /// Settings that make the small desk-scale models learn in minutes.
    pub fn desk(objective: Objective) -> Self {
        TrainPlan {
            epochs: 10,
            adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
            ..Self::paper(objective)
        }
    }

    /// Published BLSTM baseline settings: SGD, lr 0.1, batch 32.
    pub fn blstm() -> Self {
        TrainPlan {
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerKind::Sgd,
            adam: AdamConfig { lr: 0.1, ..AdamConfig::default() },
            ..Self::paper(Objective::Cls)
        }
    }

    pub fn preset(name: &str, objective: Objective) -> Result<Self, TrainError> {
        match name {
            "paper" => Ok(Self::paper(objective)),
            "desk" => Ok(Self::desk(objective)),
            "blstm" => Ok(Self::blstm()),
            other => Err(TrainError::InvalidPlan(format!("unknown preset `{other}`"))),
        }
    }

    pub fn lr(&self) -> f64 {
        self.adam.lr
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::InvalidPlan(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.objective == Objective::Mlm && !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return fail(format!("mask_rate {} outside (0, 1)", self.mask_rate));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.adam.lr));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return fail("Adam betas must lie in [0, 1)".into());
        }
        if self.adam.epsilon <= 0.0 {
            return fail("Adam epsilon must be positive".into());
        }
        if self.max_steps == Some(0) {
            return fail("max_steps must be at least 1".into());
        }
        Ok(())
    }

    /// Reads a plan from a JSON or TOML document. A `preset` key selects the
    /// base plan (default `desk`); every other key overrides a field.
    pub fn from_document(text: &str, toml_syntax: bool) -> Result<Self, TrainError> {
        Self::from_value(parse_document(text, toml_syntax)?)
    }

    /// Same as [`TrainPlan::from_document`] for an already parsed table.
    pub fn from_value(doc: serde_json::Value) -> Result<Self, TrainError> {
        let serde_json::Value::Object(mut fields) = doc else {
            return Err(TrainError::InvalidPlan("plan must be a key-value table".into()));
        };
        let objective = match fields.get("objective") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| TrainError::InvalidPlan(e.to_string()))?,
            None => Objective::Cls,
        };
        let preset = match fields.remove("preset") {
            Some(serde_json::Value::String(s)) => s,
            Some(other) => return Err(TrainError::InvalidPlan(format!("preset must be a string, got {other}"))),
            None => "desk".into(),
        };
        let mut base = serde_json::to_value(Self::preset(&preset, objective)?).expect("plan serializes");
        merge(&mut base, serde_json::Value::Object(fields));
        let plan: TrainPlan = serde_json::from_value(base).map_err(|e| TrainError::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Loads a plan file; `.toml` files use TOML syntax, anything else JSON.
    pub fn from_file(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document(&text, path.extension().is_some_and(|e| e == "toml"))
    }
}

/// Parses JSON, or TOML when `toml_syntax` is set, into a JSON value.
pub fn parse_document(text: &str, toml_syntax: bool) -> Result<serde_json::Value, TrainError> {
    if toml_syntax {
        let v: toml::Value = toml::from_str(text).map_err(|e| TrainError::InvalidPlan(e.to_string()))?;
        serde_json::to_value(v).map_err(|e| TrainError::InvalidPlan(e.to_string()))
    } else {
        serde_json::from_str(text).map_err(|e| TrainError::InvalidPlan(e.to_string()))
    }
}

/// Recursively overlays `over` onto `base`; tables merge, anything else replaces.
pub fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
