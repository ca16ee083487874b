use serde_yaml::Value;
use thiserror::Error;

use super::PlatformDesc;
use crate::constraints::{envelope, get, scalar_string, yaml_documents, ConstraintError};
use crate::model::{Expr, ModelError, Scope};

/// Reserved metadata names overriding the cost of non-call guard actions.
pub const ERROR_MESSAGE_META: &str = "__error_message";
pub const ASSIGN_EMPTY_META: &str = "__assign_empty";

pub const KIND_SDK: &str = "SDK";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdkError {
    #[error(transparent)]
    Envelope(#[from] ConstraintError),
    #[error("document {doc}: kind `{found}` is not `SDK`")]
    NotSdk { doc: usize, found: String },
    #[error("document {doc}: field `{field}`: {reason}")]
    Malformed {
        doc: usize,
        field: String,
        reason: String,
    },
    #[error("`{meta}` lists unknown pattern `{pattern}`")]
    UnknownPattern { meta: String, pattern: String },
    #[error("`{meta}`: {field} evaluates to {value}")]
    NegativeCost {
        meta: String,
        field: &'static str,
        value: i64,
    },
    #[error("`{meta}`: {field}: {source}")]
    Eval {
        meta: String,
        field: &'static str,
        source: ModelError,
    },
}

/// Function metadata with costs kept symbolic until grounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdkFunctionMeta {
    pub name: String,
    pub available_patterns: Vec<String>,
    pub elementsize: Expr,
    pub internalsize: Expr,
    pub runtime: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedMeta {
    pub name: String,
    pub available_patterns: Vec<String>,
    pub elementsize: u64,
    pub internalsize: u64,
    pub runtime: u64,
}

pub fn parse_sdk_meta(text: &str) -> Result<Vec<SdkFunctionMeta>, SdkError> {
    let docs = yaml_documents(text).map_err(ConstraintError::Yaml)?;
    let mut out = Vec::new();
    for (i, v) in docs.iter().enumerate() {
        let doc = i + 1;
        let env = envelope(doc, v)?;
        if env.kind != KIND_SDK {
            return Err(SdkError::NotSdk {
                doc,
                found: env.kind,
            });
        }
        let malformed = |field: &str, reason: String| SdkError::Malformed {
            doc,
            field: field.to_string(),
            reason,
        };
        let spec = get(v, "spec").ok_or_else(|| malformed("spec", "missing".into()))?;
        let patterns = match get(spec, "available patterns") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Sequence(items)) => items
                .iter()
                .map(|p| {
                    p.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| malformed("available patterns", "expected names".into()))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(malformed("available patterns", "expected a list".into())),
        };
        let expr = |field: &str| -> Result<Expr, SdkError> {
            let raw = get(spec, field).ok_or_else(|| malformed(field, "missing".into()))?;
            let text = scalar_string(raw).ok_or_else(|| malformed(field, "expected a scalar".into()))?;
            Expr::parse(&text).map_err(|e| malformed(field, e.to_string()))
        };
        out.push(SdkFunctionMeta {
            name: env.name,
            available_patterns: patterns,
            elementsize: expr("elementsize")?,
            internalsize: expr("internalsize")?,
            runtime: expr("runtime")?,
        });
    }
    Ok(out)
}

impl SdkFunctionMeta {
    pub fn check_patterns(&self, platform: &PlatformDesc) -> Result<(), SdkError> {
        match self
            .available_patterns
            .iter()
            .find(|p| !platform.patterns.contains_key(*p))
        {
            Some(p) => Err(SdkError::UnknownPattern {
                meta: self.name.clone(),
                pattern: p.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn ground(&self, scope: &dyn Scope) -> Result<GroundedMeta, SdkError> {
        let eval = |field: &'static str, e: &Expr| -> Result<u64, SdkError> {
            let v = e.eval_int(scope).map_err(|source| SdkError::Eval {
                meta: self.name.clone(),
                field,
                source,
            })?;
            u64::try_from(v).map_err(|_| SdkError::NegativeCost {
                meta: self.name.clone(),
                field,
                value: v,
            })
        };
        Ok(GroundedMeta {
            name: self.name.clone(),
            available_patterns: self.available_patterns.clone(),
            elementsize: eval("elementsize", &self.elementsize)?,
            internalsize: eval("internalsize", &self.internalsize)?,
            runtime: eval("runtime", &self.runtime)?,
        })
    }
}
