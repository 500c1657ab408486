use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Label,
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    /// Label column only: the cell value that denotes the positive class.
    /// Without it, label cells must read as 0/1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
    /// Group column: the closed set of allowed group labels. Categorical
    /// feature: a fixed level set. Inferred from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
            positive: None,
            levels: None,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Continuous, ColumnRole::Feature)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Feature)
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Label)
    }

    pub fn group(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Group)
    }
}

/// Column roles and kinds for a tabular file. Read from a JSON sidecar,
/// never inferred: the label and protected-group columns must be explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: FeatureSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |role| self.columns.iter().filter(|c| c.role == role).count();
        if count(ColumnRole::Label) != 1 {
            return Err(Error::InvalidSchema(
                "exactly one column must have role `label`".into(),
            ));
        }
        if count(ColumnRole::Group) != 1 {
            return Err(Error::InvalidSchema(
                "exactly one column must have role `group`".into(),
            ));
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSchema(format!("duplicate column `{}`", w[0])));
        }
        for c in &self.columns {
            if let Some(levels) = &c.levels {
                if levels.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "column `{}` declares an empty level set",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Label)
            .expect("validated schema has a label column")
    }

    pub fn group_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Group)
            .expect("validated schema has a group column")
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.role == ColumnRole::Feature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_missing_or_duplicate_roles() {
        let no_group = FeatureSchema::new(vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::label("y"),
        ]);
        assert!(matches!(no_group, Err(Error::InvalidSchema(_))));

        let two_labels = FeatureSchema::new(vec![
            ColumnSpec::label("y"),
            ColumnSpec::label("y2"),
            ColumnSpec::group("g"),
        ]);
        assert!(matches!(two_labels, Err(Error::InvalidSchema(_))));
    }

    #[test]
    fn parses_json_sidecar() {
        let json = r#"{"columns": [
            {"name": "age", "kind": "continuous", "role": "feature"},
            {"name": "sex", "kind": "categorical", "role": "group", "levels": ["F", "M"]},
            {"name": "income", "kind": "categorical", "role": "label", "positive": ">50K"}
        ]}"#;
        let schema: FeatureSchema = serde_json::from_str(json).unwrap();
        schema.validate().unwrap();
        assert_eq!(schema.label_column().positive.as_deref(), Some(">50K"));
        assert_eq!(schema.feature_columns().count(), 1);
    }
}
