// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Task-state metadata: field schemas, state vectors and per-field ranges.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Storage class of a metadata field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldWidth {
    /// 4-byte integer.
    Numeric,
    /// 1-byte flag, values restricted to 0 or 1.
    Binary,
}

impl FieldWidth {
    pub fn bytes(self) -> usize {
        match self {
            FieldWidth::Numeric => 4,
            FieldWidth::Binary => 1,
        }
    }

    pub fn from_bytes(b: usize) -> Option<Self> {
        match b {
            4 => Some(FieldWidth::Numeric),
            1 => Some(FieldWidth::Binary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub width: FieldWidth,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("field `{0}` is malformed, expected name:width")]
    BadField(String),
    #[error("field `{name}` has unsupported width {width} (must be 1 or 4)")]
    BadWidth { name: String, width: String },
    #[error("duplicate field `{0}`")]
    Duplicate(String),
}

/// Ordered, named metadata fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FieldSchema {
    fields: Vec<FieldSpec>,
}

impl FieldSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self, SchemaError> {
        for (i, f) in fields.iter().enumerate() {
            if f.name.is_empty() || f.name.contains([',', ':', ' ']) {
                return Err(SchemaError::BadField(f.name.clone()));
            }
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::Duplicate(f.name.clone()));
            }
        }
        Ok(FieldSchema { fields })
    }

    pub fn numeric(names: &[&str]) -> Self {
        Self::new(
            names
                .iter()
                .map(|n| FieldSpec { name: n.to_string(), width: FieldWidth::Numeric })
                .collect(),
        )
        .expect("valid field names")
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Σ s_i over the fields.
    pub fn row_bytes(&self) -> usize {
        self.fields.iter().map(|f| f.width.bytes()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

impl fmt::Display for FieldSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, spec) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", spec.name, spec.width.bytes())?;
        }
        Ok(())
    }
}

/// Parses `name:width,name:width,...`; the empty string is the empty schema.
impl FromStr for FieldSchema {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(FieldSchema::default());
        }
        let mut fields = Vec::new();
        for part in s.split(',') {
            let (name, width) =
                part.split_once(':').ok_or_else(|| SchemaError::BadField(part.to_string()))?;
            let w = width
                .parse::<usize>()
                .ok()
                .and_then(FieldWidth::from_bytes)
                .ok_or_else(|| SchemaError::BadWidth { name: name.to_string(), width: width.to_string() })?;
            fields.push(FieldSpec { name: name.to_string(), width: w });
        }
        FieldSchema::new(fields)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("binary field `{name}` holds {value}")]
    NotBinary { name: String, value: u32 },
}

/// A point in metadata space, aligned to a [`FieldSchema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector {
    schema: Arc<FieldSchema>,
    values: Vec<u32>,
}

impl StateVector {
    pub fn new(schema: Arc<FieldSchema>, values: Vec<u32>) -> Result<Self, StateError> {
        if values.len() != schema.len() {
            return Err(StateError::Arity { expected: schema.len(), got: values.len() });
        }
        for (spec, &v) in schema.fields().iter().zip(&values) {
            if spec.width == FieldWidth::Binary && v > 1 {
                return Err(StateError::NotBinary { name: spec.name.clone(), value: v });
            }
        }
        Ok(StateVector { schema, values })
    }

    pub fn schema(&self) -> &Arc<FieldSchema> {
        &self.schema
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.schema.index_of(name).map(|i| self.values[i])
    }

    /// Field-by-field pairs of (name, value).
    pub fn fields(&self) -> impl Iterator<Item = (&str, u32)> {
        self.schema.fields().iter().map(|f| f.name.as_str()).zip(self.values.iter().copied())
    }

    pub fn conforms_to(&self, schema: &FieldSchema) -> bool {
        self.schema.as_ref() == schema
    }
}

/// Closed integer interval per field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetadataRange {
    bounds: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("range for field {field} has min {min} > max {max}")]
pub struct InvertedRange {
    pub field: usize,
    pub min: u32,
    pub max: u32,
}

impl MetadataRange {
    pub fn new(bounds: Vec<(u32, u32)>) -> Result<Self, InvertedRange> {
        for (field, &(min, max)) in bounds.iter().enumerate() {
            if min > max {
                return Err(InvertedRange { field, min, max });
            }
        }
        Ok(MetadataRange { bounds })
    }

    pub fn point(values: &[u32]) -> Self {
        MetadataRange { bounds: values.iter().map(|&v| (v, v)).collect() }
    }

    pub fn bounds(&self) -> &[(u32, u32)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn contains(&self, values: &[u32]) -> bool {
        self.bounds.len() == values.len()
            && self.bounds.iter().zip(values).all(|(&(lo, hi), &v)| lo <= v && v <= hi)
    }

    /// Extends each interval to include `values`.
    pub fn widen(&mut self, values: &[u32]) {
        debug_assert_eq!(self.bounds.len(), values.len());
        for (b, &v) in self.bounds.iter_mut().zip(values) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }

    pub fn union(&mut self, other: &MetadataRange) {
        debug_assert_eq!(self.bounds.len(), other.bounds.len());
        for (b, o) in self.bounds.iter_mut().zip(&other.bounds) {
            b.0 = b.0.min(o.0);
            b.1 = b.1.max(o.1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_text_round_trip() {
        let s: FieldSchema = "steps:4,holding:1".parse().unwrap();
        assert_eq!(s.row_bytes(), 5);
        assert_eq!(s.to_string(), "steps:4,holding:1");
        assert_eq!("".parse::<FieldSchema>().unwrap().len(), 0);
        assert!("steps:2".parse::<FieldSchema>().is_err());
        assert!("a:4,a:4".parse::<FieldSchema>().is_err());
    }

    #[test]
    fn binary_fields_reject_large_values() {
        let s = Arc::new("flag:1".parse::<FieldSchema>().unwrap());
        assert!(StateVector::new(s.clone(), vec![1]).is_ok());
        assert!(StateVector::new(s, vec![2]).is_err());
    }

    #[test]
    fn range_contains_is_closed() {
        let r = MetadataRange::new(vec![(0, 80), (1, 1)]).unwrap();
        assert!(r.contains(&[80, 1]));
        assert!(r.contains(&[0, 1]));
        assert!(!r.contains(&[99, 1]));
        assert!(!r.contains(&[5, 0]));
        assert!(MetadataRange::new(vec![(3, 2)]).is_err());
    }
}
