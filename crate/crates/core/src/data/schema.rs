use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Binary,
    /// Cardinality is the length of the column's label list.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            labels: Vec::new(),
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Binary,
            labels: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Number of encoded columns this variable occupies.
    pub fn encoded_width(&self) -> usize {
        match self.kind {
            VariableKind::Categorical => self.labels.len(),
            _ => 1,
        }
    }

    pub fn cardinality(&self) -> Option<usize> {
        (self.kind == VariableKind::Categorical).then_some(self.labels.len())
    }

    pub(crate) fn check_value(&self, v: f64) -> std::result::Result<(), String> {
        match self.kind {
            VariableKind::Continuous if !v.is_finite() => Err(format!("non-finite value {v}")),
            VariableKind::Continuous => Ok(()),
            VariableKind::Binary if v == 0.0 || v == 1.0 => Ok(()),
            VariableKind::Binary => Err(format!("binary value must be 0 or 1, got {v}")),
            VariableKind::Categorical => {
                if v >= 0.0 && v.fract() == 0.0 && (v as usize) < self.labels.len() {
                    Ok(())
                } else {
                    Err(format!(
                        "category index {v} outside 0..{}",
                        self.labels.len()
                    ))
                }
            }
        }
    }
}

pub fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let mut names = HashSet::new();
    for col in schema {
        if !names.insert(col.name.as_str()) {
            return Err(Error::Schema(format!("duplicate column name '{}'", col.name)));
        }
        match col.kind {
            VariableKind::Categorical => {
                if col.labels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical column '{}' needs at least 2 labels",
                        col.name
                    )));
                }
                let unique: HashSet<_> = col.labels.iter().collect();
                if unique.len() != col.labels.len() {
                    return Err(Error::Schema(format!(
                        "categorical column '{}' has duplicate labels",
                        col.name
                    )));
                }
            }
            _ if !col.labels.is_empty() => {
                return Err(Error::Schema(format!(
                    "only categorical columns take labels ('{}')",
                    col.name
                )));
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rules() {
        assert!(validate_schema(&[ColumnSchema::continuous("a"), ColumnSchema::binary("a")]).is_err());
        assert!(validate_schema(&[ColumnSchema::categorical("c", &["x"])]).is_err());
        assert!(validate_schema(&[ColumnSchema::categorical("c", &["x", "x"])]).is_err());
        assert!(validate_schema(&[ColumnSchema::categorical("c", &["x", "y"])]).is_ok());
    }

    #[test]
    fn json_sidecar_shape() {
        let json = r#"[{"name":"t","kind":"continuous"},{"name":"b","kind":"categorical","labels":["x","y"]}]"#;
        let schema: Vec<ColumnSchema> = serde_json::from_str(json).unwrap();
        assert_eq!(schema[1].cardinality(), Some(2));
        assert_eq!(serde_json::to_string(&schema).unwrap(), json);
    }
}
