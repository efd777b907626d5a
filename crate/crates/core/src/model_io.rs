//! Versioned JSON envelopes for trained models.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ModelIoError {
    #[error("malformed model document: {0}")]
    Parse(String),
    #[error("model document is missing field `{0}`")]
    MissingField(&'static str),
    #[error("unsupported model version {0} (this build reads version {MODEL_VERSION})")]
    UnsupportedVersion(String),
    #[error("expected a `{expected}` model, found `{found}`")]
    WrongFormat { expected: String, found: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub fn to_document<T: Serialize>(format: &str, model: &T) -> String {
    let mut value = serde_json::to_value(model).expect("model serializes to JSON");
    let obj = value
        .as_object_mut()
        .expect("model serializes to an object");
    obj.insert("format".into(), Value::from(format));
    obj.insert("version".into(), Value::from(MODEL_VERSION));
    serde_json::to_string_pretty(&value).expect("JSON value prints")
}

pub fn from_document<T: DeserializeOwned>(format: &str, text: &str) -> Result<T, ModelIoError> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| ModelIoError::Parse(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ModelIoError::Parse("top level is not an object".into()))?;
    let version = obj
        .remove("version")
        .ok_or(ModelIoError::MissingField("version"))?;
    if version.as_u64() != Some(MODEL_VERSION) {
        return Err(ModelIoError::UnsupportedVersion(version.to_string()));
    }
    let found = obj
        .remove("format")
        .ok_or(ModelIoError::MissingField("format"))?;
    if found.as_str() != Some(format) {
        return Err(ModelIoError::WrongFormat {
            expected: format.into(),
            found: found.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| ModelIoError::Parse(e.to_string()))
}
