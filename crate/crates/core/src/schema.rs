//! Feature context, instances and training datasets.
//!
//! Every feature carries the context the contextual kernel needs: bounds for
//! continuous features, a period for cyclic ones and an ordered category list
//! for categorical ones. Categorical values are stored as indices into that
//! list, so an [`Instance`] is always a plain vector of reals.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum FeatureKind {
    Continuous { min: f64, max: f64 },
    Cyclic { period: f64 },
    Categorical { categories: Vec<String> },
}

/// A fully resolved feature: every field its kind needs is present and valid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSchema {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: FeatureKind,
}

impl FeatureSchema {
    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Result<Self> {
        Self::new(name, FeatureKind::Continuous { min, max })
    }

    pub fn cyclic(name: impl Into<String>, period: f64) -> Result<Self> {
        Self::new(name, FeatureKind::Cyclic { period })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let categories = categories.into_iter().map(Into::into).collect();
        Self::new(name, FeatureKind::Categorical { categories })
    }

    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Result<Self> {
        let schema = FeatureSchema {
            name: name.into(),
            kind,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidSchema {
                feature: self.name.clone(),
                reason,
            })
        };
        if self.name.is_empty() {
            return fail("feature name is empty".to_string());
        }
        match &self.kind {
            FeatureKind::Continuous { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return fail("bounds must be finite".to_string());
                }
                if min >= max {
                    return fail(format!("min < max violated ({min} >= {max})"));
                }
            }
            FeatureKind::Cyclic { period } => {
                if !period.is_finite() || *period <= 0.0 {
                    return fail(format!("period must be > 0, got {period}"));
                }
            }
            FeatureKind::Categorical { categories } => {
                if categories.len() < 2 {
                    return fail("at least two categories are required".to_string());
                }
                for (i, c) in categories.iter().enumerate() {
                    if categories[..i].contains(c) {
                        return fail(format!("duplicate category `{c}`"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { categories } => categories.iter().position(|c| c == label),
            _ => None,
        }
    }

    pub fn category_label(&self, index: f64) -> Option<&str> {
        match &self.kind {
            FeatureKind::Categorical { categories } if index >= 0.0 => {
                categories.get(index as usize).map(String::as_str)
            }
            _ => None,
        }
    }

    /// Maps a raw value onto the feature's unit scale.
    ///
    /// Continuous values are min-max scaled and may leave `[0, 1]` when the
    /// raw value is out of bounds. Cyclic values wrap into `[0, 1)`.
    /// Categorical indices pass through unchanged.
    pub fn normalize(&self, value: f64) -> f64 {
        match &self.kind {
            FeatureKind::Continuous { min, max } => (value - min) / (max - min),
            FeatureKind::Cyclic { period } => wrap(value, *period) / period,
            FeatureKind::Categorical { .. } => value,
        }
    }

    /// Inverse of [`normalize`](Self::normalize); cyclic values come back in `[0, period)`.
    pub fn denormalize(&self, value: f64) -> f64 {
        match &self.kind {
            FeatureKind::Continuous { min, max } => min + value * (max - min),
            FeatureKind::Cyclic { period } => value * period,
            FeatureKind::Categorical { .. } => value,
        }
    }

    /// Whether a raw value lies inside the feature's declared domain.
    ///
    /// Continuous features use `[min, max]`; cyclic features use `[0, period)`.
    pub fn in_bounds(&self, value: f64) -> bool {
        match &self.kind {
            FeatureKind::Continuous { min, max } => value >= *min && value <= *max,
            FeatureKind::Cyclic { period } => value >= 0.0 && value < *period,
            FeatureKind::Categorical { categories } => {
                value >= 0.0 && libm::trunc(value) == value && (value as usize) < categories.len()
            }
        }
    }

    /// Width of the raw value range mapped onto one normalized unit.
    pub fn scale(&self) -> f64 {
        match &self.kind {
            FeatureKind::Continuous { min, max } => max - min,
            FeatureKind::Cyclic { period } => *period,
            FeatureKind::Categorical { .. } => 1.0,
        }
    }
}

/// `value mod period` in `[0, period)`.
pub(crate) fn wrap(value: f64, period: f64) -> f64 {
    let r = libm::fmod(value, period);
    let r = if r < 0.0 { r + period } else { r };
    // fmod of a tiny negative number can round up to exactly `period`.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Kind of a declared (not yet resolved) feature.
#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    /// Missing bounds are taken from the training data.
    Continuous {
        min: Option<f64>,
        max: Option<f64>,
    },
    Cyclic {
        period: f64,
    },
    Categorical {
        categories: Vec<String>,
    },
}

/// A feature as declared in a schema file, before bounds are resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDecl {
    pub name: String,
    pub kind: DeclKind,
}

impl FeatureDecl {
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DeclKind::Continuous { min, max } => {
                let fail = |reason: String| {
                    Err(Error::InvalidSchema {
                        feature: self.name.clone(),
                        reason,
                    })
                };
                if self.name.is_empty() {
                    return fail("feature name is empty".to_string());
                }
                for b in [min, max].into_iter().flatten() {
                    if !b.is_finite() {
                        return fail("bounds must be finite".to_string());
                    }
                }
                if let (Some(lo), Some(hi)) = (min, max) {
                    if lo >= hi {
                        return fail(format!("min < max violated ({lo} >= {hi})"));
                    }
                }
                Ok(())
            }
            _ => self.resolve(&[]).map(|_| ()),
        }
    }

    /// Resolves missing continuous bounds from a training column.
    ///
    /// A constant column with no declared bounds gets a unit-width interval
    /// centred on its value.
    pub fn resolve(&self, column: &[f64]) -> Result<FeatureSchema> {
        let kind = match &self.kind {
            DeclKind::Continuous { min, max } => {
                let (lo, hi) = column_range(column.iter().copied());
                let min = min.unwrap_or(lo);
                let max = max.unwrap_or(hi);
                let (min, max) = if min == max && !column.is_empty() {
                    (min - 0.5, max + 0.5)
                } else {
                    (min, max)
                };
                FeatureKind::Continuous { min, max }
            }
            DeclKind::Cyclic { period } => FeatureKind::Cyclic { period: *period },
            DeclKind::Categorical { categories } => FeatureKind::Categorical {
                categories: categories.clone(),
            },
        };
        FeatureSchema::new(self.name.clone(), kind)
    }
}

impl From<FeatureSchema> for FeatureDecl {
    fn from(schema: FeatureSchema) -> Self {
        let kind = match schema.kind {
            FeatureKind::Continuous { min, max } => DeclKind::Continuous {
                min: Some(min),
                max: Some(max),
            },
            FeatureKind::Cyclic { period } => DeclKind::Cyclic { period },
            FeatureKind::Categorical { categories } => DeclKind::Categorical { categories },
        };
        FeatureDecl {
            name: schema.name,
            kind,
        }
    }
}

fn column_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// One point in feature space, in schema order.
///
/// Continuous and cyclic entries are raw values; categorical entries are
/// indices into the schema's category list.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Instance {
    pub values: Vec<f64>,
}

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Instance { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self, schema: &[FeatureSchema]) -> Result<()> {
        if self.values.len() != schema.len() {
            return Err(Error::InvalidData(format!(
                "instance has {} values, schema has {} features",
                self.values.len(),
                schema.len()
            )));
        }
        for (v, feature) in self.values.iter().zip(schema) {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value for feature `{}`",
                    feature.name
                )));
            }
            if feature.is_categorical() && !feature.in_bounds(*v) {
                return Err(Error::InvalidData(format!(
                    "category index {v} out of range for feature `{}`",
                    feature.name
                )));
            }
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Instance {
    fn from(values: Vec<f64>) -> Self {
        Instance { values }
    }
}

impl core::ops::Index<usize> for Instance {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Training statistics of one feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "lowercase"))]
pub enum FeatureStats {
    /// Sample mean and standard deviation (n - 1 denominator) of raw values.
    Numeric { mean: f64, std: f64 },
    /// Relative frequency of each category, in schema order.
    Categorical { frequencies: Vec<(String, f64)> },
}

impl FeatureStats {
    pub fn std(&self) -> Option<f64> {
        match self {
            FeatureStats::Numeric { std, .. } => Some(*std),
            FeatureStats::Categorical { .. } => None,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            FeatureStats::Numeric { mean, .. } => Some(*mean),
            FeatureStats::Categorical { .. } => None,
        }
    }
}

/// Training instances with targets and per-feature statistics. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    instances: Vec<Instance>,
    targets: Vec<f64>,
    stats: Vec<FeatureStats>,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        instances: Vec<Instance>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if schema.is_empty() {
            return Err(Error::InvalidData("schema has no features".to_string()));
        }
        for (i, feature) in schema.iter().enumerate() {
            feature.validate()?;
            if schema[..i].iter().any(|f| f.name == feature.name) {
                return Err(Error::InvalidSchema {
                    feature: feature.name.clone(),
                    reason: "duplicate feature name".to_string(),
                });
            }
        }
        if instances.len() != targets.len() {
            return Err(Error::InvalidData(format!(
                "{} instances but {} targets",
                instances.len(),
                targets.len()
            )));
        }
        if instances.len() < 2 {
            return Err(Error::InvalidData(format!(
                "fewer than 2 rows ({})",
                instances.len()
            )));
        }
        for (row, instance) in instances.iter().enumerate() {
            instance
                .validate(&schema)
                .map_err(|e| Error::InvalidData(format!("row {row}: {e}")))?;
        }
        if let Some(row) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidData(format!("row {row}: non-finite target")));
        }
        let stats = compute_stats(&schema, &instances);
        Ok(Dataset {
            schema,
            instances,
            targets,
            stats,
        })
    }

    /// Builds a dataset from declarations, filling missing bounds from the data.
    pub fn from_decls(
        decls: &[FeatureDecl],
        instances: Vec<Instance>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let mut schema = Vec::with_capacity(decls.len());
        for (f, decl) in decls.iter().enumerate() {
            let column: Vec<f64> = instances
                .iter()
                .filter_map(|x| x.values.get(f).copied())
                .collect();
            schema.push(decl.resolve(&column)?);
        }
        Dataset::new(schema, instances, targets)
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn stats(&self) -> &[FeatureStats] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    /// Minimum and maximum of a feature over the training instances.
    pub fn column_range(&self, feature: usize) -> (f64, f64) {
        column_range(self.instances.iter().map(|x| x.values[feature]))
    }

    /// The same rows with one feature removed; statistics are recomputed.
    pub fn without_feature(&self, name: &str) -> Result<Dataset> {
        let drop = self
            .feature_index(name)
            .ok_or_else(|| Error::InvalidData(format!("unknown feature `{name}`")))?;
        let schema = self
            .schema
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop)
            .map(|(_, f)| f.clone())
            .collect();
        let instances = self
            .instances
            .iter()
            .map(|x| {
                let mut values = x.values.clone();
                values.remove(drop);
                Instance::new(values)
            })
            .collect();
        Dataset::new(schema, instances, self.targets.clone())
    }
}

fn compute_stats(schema: &[FeatureSchema], instances: &[Instance]) -> Vec<FeatureStats> {
    let n = instances.len() as f64;
    schema
        .iter()
        .enumerate()
        .map(|(f, feature)| match &feature.kind {
            FeatureKind::Categorical { categories } => {
                let mut counts = alloc::vec![0usize; categories.len()];
                for x in instances {
                    counts[x.values[f] as usize] += 1;
                }
                let frequencies = categories
                    .iter()
                    .zip(counts)
                    .map(|(label, c)| (label.clone(), c as f64 / n))
                    .collect();
                FeatureStats::Categorical { frequencies }
            }
            _ => {
                let mean = instances.iter().map(|x| x.values[f]).sum::<f64>() / n;
                let ss = instances
                    .iter()
                    .map(|x| {
                        let d = x.values[f] - mean;
                        d * d
                    })
                    .sum::<f64>();
                FeatureStats::Numeric {
                    mean,
                    std: libm::sqrt(ss / (n - 1.0)),
                }
            }
        })
        .collect()
}
