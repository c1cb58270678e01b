use std::path::Path;

use num_rational::BigRational;
use serde_json::{Map, Value};

use super::{build_spec, ModelError, Region, TransitionKernel, WalkSpec, DEFAULT_EPS, DISPLACEMENTS};
use crate::queueing::{self, AlternatingParams, BatchGeometricParams, FalseInitParams, PairedParams};
use crate::scalar::{parse_rational, Scalar};

/// What a model file describes.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ModelSource {
    Walk(WalkSpec<BigRational>),
    /// The batch-arrival model is not nearest-neighbour and has no `WalkSpec`.
    BatchGeometric(BatchGeometricParams<BigRational>),
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSource, ModelError> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<WalkSpec<BigRational>, ModelError> {
    match load_model(path)? {
        ModelSource::Walk(spec) => Ok(spec),
        ModelSource::BatchGeometric(_) => {
            Err(ModelError::Parse("batch_geometric is not a nearest-neighbour walk".into()))
        }
    }
}

pub fn save_spec<S: Scalar>(spec: &WalkSpec<S>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, spec_to_json(spec))?;
    Ok(())
}

pub fn spec_to_json<S: Scalar>(spec: &WalkSpec<S>) -> String {
    let mut top = Map::new();
    for (name, region) in REGIONS {
        let mut kernel = Map::new();
        for (k, l, v) in spec.kernel(region).entries() {
            if !v.is_zero() {
                kernel.insert(format!("{k},{l}"), Value::String(v.to_string()));
            }
        }
        top.insert(name.to_string(), Value::Object(kernel));
    }
    serde_json::to_string_pretty(&Value::Object(top)).unwrap_or_default() + "\n"
}

/// Accepts a path to a model file, inline JSON, or `name[:key=value,...]`.
pub fn resolve_model(arg: &str) -> Result<ModelSource, ModelError> {
    let trimmed = arg.trim();
    if Path::new(trimmed).is_file() {
        return load_model(trimmed);
    }
    if trimmed.starts_with('{') {
        return parse_model(trimmed);
    }
    let (name, rest) = trimmed.split_once(':').unwrap_or((trimmed, ""));
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ModelError::Parse(format!("no model file or shorthand named {arg:?}")));
    }
    let mut obj = Map::new();
    obj.insert("model".into(), Value::String(name.into()));
    for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| ModelError::Parse(format!("expected key=value, got {pair:?}")))?;
        obj.insert(k.trim().into(), Value::String(v.trim().into()));
    }
    from_value(&Value::Object(obj))
}

pub fn parse_model(text: &str) -> Result<ModelSource, ModelError> {
    if text.trim().is_empty() {
        return Err(ModelError::Parse("empty model file".into()));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    from_value(&value)
}

const REGIONS: [(&str, Region); 4] = [
    ("interior", Region::Interior),
    ("horizontal", Region::Horizontal),
    ("vertical", Region::Vertical),
    ("origin", Region::Origin),
];

fn from_value(value: &Value) -> Result<ModelSource, ModelError> {
    let obj = value.as_object().ok_or_else(|| ModelError::Parse("top level must be an object".into()))?;
    if let Some(name) = obj.get("model") {
        let name = name.as_str().ok_or_else(|| ModelError::Parse("\"model\" must be a string".into()))?;
        return from_builder(name, obj);
    }
    for key in obj.keys() {
        if !REGIONS.iter().any(|(n, _)| n == key) {
            return Err(ModelError::Parse(format!("unknown key {key:?}")));
        }
    }
    let mut kernels = Vec::with_capacity(4);
    for (name, _) in REGIONS {
        let k = obj.get(name).ok_or_else(|| ModelError::Parse(format!("missing {name:?} kernel")))?;
        kernels.push(kernel_from_value(k)?);
    }
    let mut it = kernels.into_iter();
    let mut next = || it.next().unwrap_or_else(TransitionKernel::zero);
    let spec = build_spec(next(), next(), next(), next(), DEFAULT_EPS)?;
    Ok(ModelSource::Walk(spec))
}

fn kernel_from_value(value: &Value) -> Result<TransitionKernel<BigRational>, ModelError> {
    let obj = value.as_object().ok_or_else(|| ModelError::Parse("kernel must be an object".into()))?;
    let mut kernel = TransitionKernel::zero();
    for (key, v) in obj {
        let (k, l) = parse_key(key)?;
        kernel.set(k, l, number(v)?);
    }
    Ok(kernel)
}

fn parse_key(key: &str) -> Result<(i32, i32), ModelError> {
    let bad = || ModelError::Parse(format!("bad displacement key {key:?}"));
    let (k, l) = key.split_once(',').ok_or_else(bad)?;
    let k: i32 = k.trim().parse().map_err(|_| bad())?;
    let l: i32 = l.trim().parse().map_err(|_| bad())?;
    if DISPLACEMENTS.contains(&(k, l)) {
        Ok((k, l))
    } else {
        Err(bad())
    }
}

fn number(v: &Value) -> Result<BigRational, ModelError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(ModelError::Parse(format!("expected a number, got {other}"))),
    };
    parse_rational(&text).map_err(ModelError::Parse)
}

fn param(obj: &Map<String, Value>, key: &str) -> Result<BigRational, ModelError> {
    let v = obj.get(key).ok_or_else(|| ModelError::Parse(format!("missing parameter {key:?}")))?;
    number(v)
}

fn from_builder(name: &str, obj: &Map<String, Value>) -> Result<ModelSource, ModelError> {
    let invalid = |e: queueing::QueueingError| ModelError::InvalidModel(e.to_string());
    let spec = match name {
        "alternating_service" => queueing::alternating_service(&AlternatingParams {
            a: param(obj, "a")?,
            lambda1: param(obj, "lambda1")?,
            lambda2: param(obj, "lambda2")?,
        }),
        "work_conserving" => queueing::work_conserving(&AlternatingParams {
            a: param(obj, "a")?,
            lambda1: param(obj, "lambda1")?,
            lambda2: param(obj, "lambda2")?,
        }),
        "simultaneous_arrivals" => queueing::simultaneous_arrivals(&param(obj, "a")?, &param(obj, "lambda")?),
        "paired_service" => queueing::paired_service(&PairedParams {
            a0: param(obj, "a0")?,
            a1: param(obj, "a1")?,
            a2: param(obj, "a2")?,
            lambda1: param(obj, "lambda1")?,
            lambda2: param(obj, "lambda2")?,
        }),
        "false_initiation" => queueing::false_initiation(&FalseInitParams {
            a: param(obj, "a")?,
            b: param(obj, "b")?,
            lambda1: param(obj, "lambda1")?,
            lambda2: param(obj, "lambda2")?,
        }),
        "extended_neighbors" => {
            let interior = obj
                .get("interior")
                .ok_or_else(|| ModelError::Parse("extended_neighbors needs an \"interior\" kernel".into()))?;
            queueing::extended_neighbors(&kernel_from_value(interior)?)
        }
        "fig2" => queueing::fig2_spec(),
        "batch_geometric" => {
            let params = BatchGeometricParams {
                a: param(obj, "a")?,
                lambda1: param(obj, "lambda1")?,
                lambda2: param(obj, "lambda2")?,
            };
            params.validate().map_err(invalid)?;
            return Ok(ModelSource::BatchGeometric(params));
        }
        other => return Err(ModelError::Parse(format!("unknown model {other:?}"))),
    };
    spec.map(ModelSource::Walk).map_err(invalid)
}
