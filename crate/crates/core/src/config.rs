//! Tagged model descriptions, shared by configuration files and the command line.
//!
//! A model is a tag plus a flat parameter object, e.g. `{"tag": "power-law",
//! "params": {"c0": 1, "alpha": 1.5}}`; inline it reads `power-law:c0=1,alpha=1.5`.
//! List-valued parameters are written with `;` separators inline
//! (`custom:values=1;0.5;0.25`).

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{Result, TrawlError};
use crate::seeds::{MixingLaw, SeedModel, Volatility};
use crate::trawl::{TailRule, TrawlSequence};

/// A tag with its parameter object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub tag: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TrawlError::Config(msg.into()))
}

impl ModelSpec {
    pub fn new(tag: &str) -> Self {
        Self { tag: tag.to_string(), params: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Parses `tag` or `tag:key=value,key=value`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let (tag, rest) = match s.split_once(':') {
            Some((t, r)) => (t.trim(), Some(r)),
            None => (s.trim(), None),
        };
        if tag.is_empty() {
            return config_err(format!("missing tag in '{s}'"));
        }
        let mut spec = Self::new(tag);
        for item in rest.into_iter().flat_map(|r| r.split(',')).filter(|i| !i.trim().is_empty()) {
            let Some((k, v)) = item.split_once('=') else {
                return config_err(format!("expected key=value, got '{item}'"));
            };
            let (k, v) = (k.trim(), v.trim());
            if spec.params.contains_key(k) {
                return config_err(format!("parameter '{k}' given twice"));
            }
            spec.params.insert(k.to_string(), inline_value(v)?);
        }
        Ok(spec)
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(v) => config_err(format!("{}: parameter '{key}' must be a number, got {v}", self.tag)),
        }
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| TrawlError::Config(format!("{}: missing parameter '{key}'", self.tag)))
    }

    fn string(&self, key: &str) -> Result<Option<&str>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => config_err(format!("{}: parameter '{key}' must be a string, got {v}", self.tag)),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return config_err(format!("{}: unknown parameter '{k}'", self.tag));
            }
        }
        Ok(())
    }
}

fn inline_value(v: &str) -> Result<Value> {
    if v.contains(';') {
        let items: Result<Vec<Value>> = v.split(';').map(|x| inline_value(x.trim())).collect();
        return Ok(Value::Array(items?));
    }
    if let Ok(i) = v.parse::<i64>() {
        return Ok(Value::from(i));
    }
    match v.parse::<f64>() {
        Ok(x) => {
            Number::from_f64(x).map(Value::Number).ok_or_else(|| TrawlError::Config(format!("non-finite number '{v}'")))
        }
        Err(_) => Ok(Value::String(v.to_string())),
    }
}

/// Builds a seed from its tag: `line {variance}`, `bm`, `poisson`,
/// `mixed-poisson {mixing=exponential, rate | mixing=constant, value}`, `bernoulli`,
/// `gbm`, `diffusion {volatility=constant|linear|exponential, …, grid_step}`.
pub fn build_seed(spec: &ModelSpec) -> Result<SeedModel> {
    let seed = match spec.tag.as_str() {
        "line" => {
            spec.only(&["variance"])?;
            SeedModel::random_line(spec.number("variance")?.unwrap_or(1.0))?
        }
        "bm" => {
            spec.only(&[])?;
            SeedModel::Brownian
        }
        "poisson" => {
            spec.only(&[])?;
            SeedModel::Poisson
        }
        "bernoulli" => {
            spec.only(&[])?;
            SeedModel::Bernoulli
        }
        "gbm" => {
            spec.only(&[])?;
            SeedModel::GeomBrownian
        }
        "mixed-poisson" => {
            spec.only(&["mixing", "rate", "value"])?;
            let mixing = match spec.string("mixing")?.unwrap_or("exponential") {
                "exponential" => MixingLaw::exponential(spec.number("rate")?.unwrap_or(1.0))?,
                "constant" => MixingLaw::constant(spec.require("value")?)?,
                other => return config_err(format!("mixed-poisson: unknown mixing law '{other}'")),
            };
            SeedModel::mixed_poisson(mixing)?
        }
        "diffusion" => {
            spec.only(&["volatility", "sigma", "intercept", "slope", "scale", "rate", "grid_step"])?;
            let vol = match spec.string("volatility")?.unwrap_or("constant") {
                "constant" => Volatility::Constant { sigma: spec.number("sigma")?.unwrap_or(1.0) },
                "linear" => Volatility::Linear { intercept: spec.require("intercept")?, slope: spec.require("slope")? },
                "exponential" => Volatility::Exponential { scale: spec.require("scale")?, rate: spec.require("rate")? },
                other => return config_err(format!("diffusion: unknown volatility '{other}'")),
            };
            SeedModel::diffusion(vol, spec.number("grid_step")?)?
        }
        other => return config_err(format!("unknown seed tag '{other}'")),
    };
    Ok(seed)
}

/// Builds a trawl from its tag: `power-law {c0, alpha}`, `geometric {a}`,
/// `custom {values, tail = zero | none | power-law with tail_c0, tail_alpha}`.
/// A custom trawl without an explicit tail is zero past its listed values.
pub fn build_trawl(spec: &ModelSpec) -> Result<TrawlSequence> {
    match spec.tag.as_str() {
        "power-law" => {
            spec.only(&["c0", "alpha"])?;
            TrawlSequence::power_law(spec.number("c0")?.unwrap_or(1.0), spec.require("alpha")?)
        }
        "geometric" => {
            spec.only(&["a"])?;
            TrawlSequence::geometric(spec.require("a")?)
        }
        "custom" => {
            spec.only(&["values", "tail", "tail_c0", "tail_alpha"])?;
            let values = match spec.params.get("values") {
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| TrawlError::Config(format!("custom: bad value {v}"))))
                    .collect::<Result<Vec<f64>>>()?,
                Some(Value::Number(n)) => vec![n.as_f64().unwrap_or(f64::NAN)],
                Some(v) => return config_err(format!("custom: values must be a list, got {v}")),
                None => return config_err("custom: missing parameter 'values'"),
            };
            let tail = match spec.string("tail")?.unwrap_or("zero") {
                "zero" => Some(TailRule::Zero),
                "none" => None,
                "power-law" => Some(TailRule::PowerLaw {
                    c0: spec.number("tail_c0")?.unwrap_or(1.0),
                    alpha: spec.require("tail_alpha")?,
                }),
                other => return config_err(format!("custom: unknown tail rule '{other}'")),
            };
            TrawlSequence::custom(values, tail)
        }
        other => config_err(format!("unknown trawl tag '{other}'")),
    }
}
