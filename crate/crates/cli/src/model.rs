//! JSON model files.

use std::fs;
use std::path::Path;

use brs::bound::MixtureModel;
use brs::oracle::Scenario;
use brs::tiling::TilingModel;
use brs::DistributionSpec;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::CliError;

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed JSON in {}: {e}", path.display())))
}

fn decode<T: DeserializeOwned>(value: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
}

/// `{"components": [{"count": 100, "family": "uniform", "params": {"b": 1}}]}`.
pub fn load_mixture(path: &Path) -> Result<MixtureModel, CliError> {
    let model: MixtureModel = decode(read_json(path)?, "mixture model")?;
    model.validate()?;
    Ok(model)
}

/// A bare `{"family", "params"}` object, or a mixture with one component.
pub fn load_distribution(path: &Path) -> Result<DistributionSpec, CliError> {
    let value = read_json(path)?;
    distribution_from(value)
}

fn distribution_from(value: Value) -> Result<DistributionSpec, CliError> {
    let dist = if value.get("components").is_some() {
        let model: MixtureModel = decode(value, "mixture model")?;
        match model.components.as_slice() {
            [only] => only.dist.clone(),
            _ => return Err(CliError::Usage("expected a single-component model".into())),
        }
    } else {
        decode(value, "distribution")?
    };
    dist.validate()?;
    Ok(dist)
}

/// A mixture model, optionally with `"kind"`, `"n"` and `"p"`:
///
/// - `{"kind": "iid", "n": 100, "family": "uniform", "params": {"b": 1}}`
/// - `{"kind": "fully_dependent", "n": 3, "family": ..., "params": ...}`
/// - `{"kind": "alternating_blocks", "n": 100, "p": 0.25}`
/// - `{"kind": "mixture", "components": [...]}` (or no `kind` at all)
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let mut value = read_json(path)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("scenario must be a JSON object".into()))?;
    let kind = match obj.remove("kind") {
        None => "mixture".to_string(),
        Some(Value::String(k)) => k,
        Some(other) => return Err(CliError::Usage(format!("invalid scenario kind {other}"))),
    };
    let n = match obj.remove("n") {
        None => None,
        Some(v) => Some(decode::<usize>(v, "scenario n")?),
    };
    let p = match obj.remove("p") {
        None => None,
        Some(v) => Some(decode::<f64>(v, "scenario p")?),
    };
    let need_n = || n.ok_or_else(|| CliError::Usage(format!("scenario kind {kind:?} needs \"n\"")));
    let scenario = match kind.as_str() {
        "iid" => Scenario::Iid {
            dist: distribution_from(value)?,
            n: need_n()?,
        },
        "fully_dependent" => Scenario::FullyDependent {
            dist: distribution_from(value)?,
            n: need_n()?,
        },
        "alternating_blocks" => Scenario::AlternatingBlocks {
            p: p.ok_or_else(|| CliError::Usage("alternating_blocks needs \"p\"".into()))?,
            n: need_n()?,
        },
        "mixture" => Scenario::Mixture(decode(value, "mixture model")?),
        other => return Err(CliError::Usage(format!("unknown scenario kind {other:?}"))),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// `{"n_rect": 300, "n_ellipse": 150, "target_area": 1.0}`.
pub fn load_tiling(path: &Path) -> Result<TilingModel, CliError> {
    let model: TilingModel = decode(read_json(path)?, "tiling model")?;
    model.validate()?;
    Ok(model)
}
