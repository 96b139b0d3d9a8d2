//! JSON schema for space definitions.
//!
//! ```json
//! {
//!   "name": "kossowski",
//!   "dim": 2,
//!   "alpha": 1.0,
//!   "domain": [[-1, 1], [-1, 1]],
//!   "metric": [["1", "0"], ["0", "-x2"]],
//!   "fields": {"rho": ["0", "1"]},
//!   "sigma": "x2"
//! }
//! ```
//!
//! Expressions are written in the grammar of [`crate::expr`] over the
//! coordinates x1..xm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::SpaceDescriptor;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::metric::{coordinate_names, MetricField, VectorField};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    pub name: String,
    pub dim: usize,
    pub alpha: f64,
    pub domain: Vec<[f64; 2]>,
    pub metric: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl SpaceFile {
    /// Parse a JSON document.
    pub fn from_json(text: &str) -> Result<SpaceFile> {
        serde_json::from_str(text).map_err(|e| Error::Schema {
            detail: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema types serialize")
    }

    /// Validate and build the runtime descriptor.
    pub fn to_descriptor(&self) -> Result<SpaceDescriptor> {
        if self.dim < 2 {
            return Err(Error::Schema {
                detail: format!("dim must be >= 2, got {}", self.dim),
            });
        }
        if self.metric.len() != self.dim || self.metric.iter().any(|r| r.len() != self.dim) {
            return Err(Error::Schema {
                detail: "metric must be a dim x dim array of expressions".to_string(),
            });
        }
        if self.domain.len() != self.dim {
            return Err(Error::Schema {
                detail: "domain must list one [lo, hi] pair per coordinate".to_string(),
            });
        }
        let names = coordinate_names(self.dim);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let entries: Vec<Vec<Expression>> = self
            .metric
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| Expression::parse(s, &refs))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let sigma = self
            .sigma
            .as_ref()
            .map(|s| Expression::parse(s, &refs))
            .transpose()?;
        let metric = MetricField::new(self.alpha, entries, self.domain.clone(), sigma.clone())?;
        let mut fields = BTreeMap::new();
        for (name, comps) in &self.fields {
            if comps.len() != self.dim {
                return Err(Error::Schema {
                    detail: format!("field `{name}` must have {} components", self.dim),
                });
            }
            let parsed = comps
                .iter()
                .map(|s| Expression::parse(s, &refs))
                .collect::<Result<Vec<_>>>()?;
            fields.insert(name.clone(), VectorField::new(parsed)?);
        }
        Ok(SpaceDescriptor {
            name: self.name.clone(),
            metric,
            fields,
            sigma,
            notes: self.notes.clone(),
        })
    }

    /// Serialize a descriptor back to the file schema.
    pub fn from_descriptor(desc: &SpaceDescriptor) -> SpaceFile {
        let dim = desc.metric.dim();
        let metric = (0..dim)
            .map(|a| (0..dim).map(|b| desc.metric.entry(a, b).to_string()).collect())
            .collect();
        let fields = desc
            .fields
            .iter()
            .map(|(name, field)| {
                (
                    name.clone(),
                    field.components().iter().map(|c| c.to_string()).collect(),
                )
            })
            .collect();
        SpaceFile {
            name: desc.name.clone(),
            dim,
            alpha: desc.metric.alpha(),
            domain: desc.metric.domain().to_vec(),
            metric,
            fields,
            sigma: desc.sigma.as_ref().map(|s| s.to_string()),
            notes: desc.notes.clone(),
        }
    }
}
