//! Schema JSON, dataset CSV and the experiment output formats.
//!
//! Floats are written in Rust's shortest round-trip form, so every finite
//! value read back from a CSV or JSON output is bit-identical to the value
//! written.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chilli_core::evaluation::{
    ComparisonRun, FeatureSpread, InstanceComparison, SweepRow, QUARTILE_CONVENTION,
};
use chilli_core::schema::{DeclKind, FeatureDecl};
use chilli_core::{
    Dataset, Explanation, FeatureKind, FeatureSchema, Instance, Method, PerturbationSet,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(cell: &str) -> std::result::Result<f64, String> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| format!("`{cell}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{cell}` is not finite"))
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- schema

#[derive(Deserialize)]
#[serde(untagged)]
enum Label {
    Text(String),
    Number(serde_json::Number),
}

impl Label {
    fn into_string(self) -> String {
        match self {
            Label::Text(s) => s,
            Label::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeature {
    name: String,
    kind: String,
    min: Option<f64>,
    max: Option<f64>,
    period: Option<f64>,
    categories: Option<Vec<Label>>,
}

impl RawFeature {
    fn into_decl(self) -> std::result::Result<FeatureDecl, String> {
        let present: Vec<&str> = [
            ("min", self.min.is_some()),
            ("max", self.max.is_some()),
            ("period", self.period.is_some()),
            ("categories", self.categories.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.then_some(k))
        .collect();
        let allowed: &[&str] = match self.kind.as_str() {
            "continuous" => &["min", "max"],
            "cyclic" => &["period"],
            "categorical" => &["categories"],
            other => return Err(format!("unknown kind `{other}`")),
        };
        if let Some(field) = present.iter().find(|f| !allowed.contains(f)) {
            return Err(format!(
                "`{field}` is not allowed on a {} feature",
                self.kind
            ));
        }
        let kind = match self.kind.as_str() {
            "continuous" => DeclKind::Continuous {
                min: self.min,
                max: self.max,
            },
            "cyclic" => DeclKind::Cyclic {
                period: self.period.ok_or("cyclic feature needs `period`")?,
            },
            _ => DeclKind::Categorical {
                categories: self
                    .categories
                    .ok_or("categorical feature needs `categories`")?
                    .into_iter()
                    .map(Label::into_string)
                    .collect(),
            },
        };
        Ok(FeatureDecl {
            name: self.name,
            kind,
        })
    }
}

/// Parses a schema document: a JSON array of
/// `{name, kind, min?, max?, period?, categories?}` objects.
pub fn parse_schema(text: &str) -> chilli_core::Result<Vec<FeatureDecl>> {
    let raw: Vec<RawFeature> = serde_json::from_str(text)
        .map_err(|e| chilli_core::Error::InvalidData(format!("schema JSON: {e}")))?;
    let mut decls: Vec<FeatureDecl> = Vec::with_capacity(raw.len());
    for r in raw {
        let name = r.name.clone();
        let decl = r
            .into_decl()
            .map_err(|reason| chilli_core::Error::InvalidSchema {
                feature: name.clone(),
                reason,
            })?;
        decl.validate()?;
        if decls.iter().any(|d| d.name == decl.name) {
            return Err(chilli_core::Error::InvalidSchema {
                feature: name,
                reason: "duplicate feature name".to_string(),
            });
        }
        decls.push(decl);
    }
    if decls.is_empty() {
        return Err(chilli_core::Error::InvalidData(
            "schema has no features".to_string(),
        ));
    }
    Ok(decls)
}

/// Loads a schema file. Continuous bounds may be left out and are then
/// resolved from the training data by [`load_dataset`].
pub fn load_schema(path: &Path) -> Result<Vec<FeatureDecl>> {
    let text = read_to_string(path)?;
    parse_schema(&text).map_err(|e| match e {
        chilli_core::Error::InvalidData(msg) => Error::format(path, msg),
        other => Error::Core(other),
    })
}

pub fn schema_to_json(schema: &[FeatureSchema]) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schema serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- dataset

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn column_indices(path: &Path, headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::format(path, format!("missing column `{name}`")))
        })
        .collect()
}

/// Parses one cell of a schema feature: a number, or a category label.
fn parse_cell(cell: &str, feature: &FeatureSchema) -> std::result::Result<f64, String> {
    if cell.is_empty() {
        return Err("missing value".to_string());
    }
    match &feature.kind {
        FeatureKind::Categorical { .. } => feature
            .category_index(cell)
            .map(|i| i as f64)
            .ok_or_else(|| format!("category `{cell}` is not declared")),
        _ => parse_f64(cell),
    }
}

fn parse_decl_cell(cell: &str, decl: &FeatureDecl) -> std::result::Result<f64, String> {
    match &decl.kind {
        DeclKind::Categorical { categories } => {
            if cell.is_empty() {
                return Err("missing value".to_string());
            }
            categories
                .iter()
                .position(|c| c == cell)
                .map(|i| i as f64)
                .ok_or_else(|| format!("category `{cell}` is not declared"))
        }
        _ if cell.is_empty() => Err("missing value".to_string()),
        _ => parse_f64(cell),
    }
}

/// Reads a dataset CSV. Columns are matched by header name; extra columns
/// are ignored. Missing values are rejected.
pub fn read_dataset<R: Read>(
    reader: R,
    path: &Path,
    decls: &[FeatureDecl],
    target_column: &str,
) -> Result<Dataset> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let mut names: Vec<&str> = decls.iter().map(|d| d.name.as_str()).collect();
    names.push(target_column);
    let cols = column_indices(path, &headers, &names)?;

    let mut instances = Vec::new();
    let mut targets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let at = |col: usize, msg: String| {
            Error::format(path, format!("line {line}, column `{}`: {msg}", names[col]))
        };
        let mut values = Vec::with_capacity(decls.len());
        for (f, decl) in decls.iter().enumerate() {
            let cell = record.get(cols[f]).unwrap_or("");
            values.push(parse_decl_cell(cell, decl).map_err(|m| at(f, m))?);
        }
        let cell = record.get(cols[decls.len()]).unwrap_or("");
        let target = if cell.is_empty() {
            Err("missing value".to_string())
        } else {
            parse_f64(cell)
        };
        targets.push(target.map_err(|m| at(decls.len(), m))?);
        instances.push(Instance::new(values));
    }
    Ok(Dataset::from_decls(decls, instances, targets)?)
}

pub fn load_dataset(path: &Path, decls: &[FeatureDecl], target_column: &str) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), path, decls, target_column)
}

fn cell_text(v: f64, feature: &FeatureSchema) -> String {
    match feature.category_label(v) {
        Some(label) if feature.is_categorical() => label.to_string(),
        _ => fmt_f64(v),
    }
}

/// Writes a dataset in the same CSV layout [`load_dataset`] reads.
pub fn dataset_to_csv(dataset: &Dataset, target_column: &str) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = dataset.schema().iter().map(|f| f.name.as_str()).collect();
    header.push(target_column);
    w.write_record(&header).map_err(csv_err)?;
    for (x, y) in dataset.instances().iter().zip(dataset.targets()) {
        let mut row: Vec<String> = x
            .values
            .iter()
            .zip(dataset.schema())
            .map(|(v, f)| cell_text(*v, f))
            .collect();
        row.push(fmt_f64(*y));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("CSV buffer: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Usage(format!("CSV encoding: {e}"))
}

/// Writes instances under a schema header, categoricals as labels.
pub fn instances_to_csv<W: Write>(
    out: W,
    schema: &[FeatureSchema],
    instances: &[Instance],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.iter().map(|f| f.name.as_str()))?;
    for x in instances {
        w.write_record(x.values.iter().zip(schema).map(|(v, f)| cell_text(*v, f)))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- perturbations

/// One row per perturbation: feature columns, then `prediction` and `weight`.
pub fn perturbations_to_csv(set: &PerturbationSet, schema: &[FeatureSchema]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = schema.iter().map(|f| f.name.as_str()).collect();
    header.extend(["prediction", "weight"]);
    w.write_record(&header).map_err(csv_err)?;
    for ((z, y), wt) in set
        .perturbations
        .iter()
        .zip(&set.predictions)
        .zip(&set.weights)
    {
        let mut row: Vec<String> = z
            .values
            .iter()
            .zip(schema)
            .map(|(v, f)| cell_text(*v, f))
            .collect();
        row.push(fmt_f64(*y));
        row.push(fmt_f64(*wt));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("CSV buffer: {e}")))
}

/// Perturbations, predictions and weights read back from [`perturbations_to_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRows {
    pub perturbations: Vec<Instance>,
    pub predictions: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn read_perturbations<R: Read>(
    reader: R,
    path: &Path,
    schema: &[FeatureSchema],
) -> Result<PerturbationRows> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let mut names: Vec<&str> = schema.iter().map(|f| f.name.as_str()).collect();
    names.extend(["prediction", "weight"]);
    let cols = column_indices(path, &headers, &names)?;
    let mut rows = PerturbationRows {
        perturbations: vec![],
        predictions: vec![],
        weights: vec![],
    };
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let cell = |c: usize| record.get(cols[c]).unwrap_or("");
        let bad = |c: usize, m: String| Error::format(path, format!("column `{}`: {m}", names[c]));
        let values = schema
            .iter()
            .enumerate()
            .map(|(f, feature)| parse_cell(cell(f), feature).map_err(|m| bad(f, m)))
            .collect::<Result<Vec<f64>>>()?;
        let d = schema.len();
        rows.perturbations.push(Instance::new(values));
        rows.predictions
            .push(parse_f64(cell(d)).map_err(|m| bad(d, m))?);
        rows.weights
            .push(parse_f64(cell(d + 1)).map_err(|m| bad(d + 1, m))?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- explanation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionDoc {
    pub feature: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessDoc {
    pub rmse: f64,
    pub mae: f64,
    pub weighted_rmse: f64,
    pub n_perturbations: usize,
    pub out_of_bounds_count: usize,
}

/// The JSON form of one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub instance: usize,
    pub method: Method,
    pub seed: u64,
    pub sigma: f64,
    pub kernel: chilli_core::proximity::Kernel,
    pub lambda: f64,
    pub intercept: f64,
    pub contributions: Vec<ContributionDoc>,
    pub local_prediction: f64,
    pub model_prediction: f64,
    pub faithfulness: FaithfulnessDoc,
    /// Features LIME held at the instance's value (zero training spread).
    pub constant_features: Vec<String>,
}

impl ExplanationDoc {
    pub fn new(
        instance: usize,
        explanation: &Explanation,
        set: &PerturbationSet,
        model_prediction: f64,
        constant_features: Vec<String>,
    ) -> Self {
        let f = &explanation.faithfulness;
        ExplanationDoc {
            instance,
            method: set.method,
            seed: set.seed,
            sigma: set.proximity.sigma,
            kernel: set.proximity.kernel,
            lambda: explanation.surrogate.ridge_lambda,
            intercept: explanation.surrogate.intercept,
            contributions: explanation
                .contributions
                .iter()
                .map(|c| ContributionDoc {
                    feature: c.feature.clone(),
                    coefficient: c.coefficient,
                })
                .collect(),
            local_prediction: explanation.local_prediction,
            model_prediction,
            faithfulness: FaithfulnessDoc {
                rmse: f.rmse,
                mae: f.mae,
                weighted_rmse: f.weighted_rmse,
                n_perturbations: f.n_perturbations,
                out_of_bounds_count: f.out_of_bounds_count,
            },
            constant_features,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::format(path, e))
}

// ---------------------------------------------------------------- comparison

const COMPARISON_COLUMNS: [&str; 8] = [
    "instance_id",
    "model_prediction",
    "lime_error",
    "chilli_error",
    "lime_local_prediction",
    "chilli_local_prediction",
    "lime_out_of_bounds",
    "chilli_out_of_bounds",
];

/// Per-instance comparison table (coefficients are in the JSON form only).
pub fn comparison_to_csv(run: &ComparisonRun) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARISON_COLUMNS).map_err(csv_err)?;
    for r in &run.instances {
        w.write_record([
            r.instance_id.to_string(),
            fmt_f64(r.model_prediction),
            fmt_f64(r.lime_error),
            fmt_f64(r.chilli_error),
            fmt_f64(r.lime_local_prediction),
            fmt_f64(r.chilli_local_prediction),
            r.lime_out_of_bounds.to_string(),
            r.chilli_out_of_bounds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("CSV buffer: {e}")))
}

/// Reads [`comparison_to_csv`] output. Coefficient vectors come back empty.
pub fn read_comparison_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<InstanceComparison>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let cols = column_indices(path, &headers, &COMPARISON_COLUMNS)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let cell = |c: usize| record.get(cols[c]).unwrap_or("");
        let num = |c: usize| {
            parse_f64(cell(c))
                .map_err(|m| Error::format(path, format!("`{}`: {m}", COMPARISON_COLUMNS[c])))
        };
        let int = |c: usize| {
            cell(c).parse::<usize>().map_err(|_| {
                Error::format(
                    path,
                    format!("`{}`: `{}` is not a count", COMPARISON_COLUMNS[c], cell(c)),
                )
            })
        };
        out.push(InstanceComparison {
            instance_id: int(0)?,
            model_prediction: num(1)?,
            lime_error: num(2)?,
            chilli_error: num(3)?,
            lime_local_prediction: num(4)?,
            chilli_local_prediction: num(5)?,
            lime_out_of_bounds: int(6)?,
            chilli_out_of_bounds: int(7)?,
            lime_coefficients: vec![],
            chilli_coefficients: vec![],
        });
    }
    Ok(out)
}

/// Coefficient quartiles for both methods of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadDoc {
    pub quartile_convention: String,
    pub methods: [Method; 2],
    pub lime: Vec<FeatureSpread>,
    pub chilli: Vec<FeatureSpread>,
}

impl SpreadDoc {
    pub fn from_run(run: &ComparisonRun) -> Result<Self> {
        Ok(SpreadDoc {
            quartile_convention: QUARTILE_CONVENTION.to_string(),
            methods: run.methods,
            lime: run.lime_spread()?,
            chilli: run.chilli_spread()?,
        })
    }
}

// ---------------------------------------------------------------- sweep

pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "method", "mae", "rmse"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.sigma),
            r.method.to_string(),
            fmt_f64(r.mae),
            fmt_f64(r.rmse),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Usage(format!("CSV buffer: {e}")))
}

pub fn read_sweep_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let cols = column_indices(path, &headers, &["sigma", "method", "mae", "rmse"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let cell = |c: usize| record.get(cols[c]).unwrap_or("");
        let num = |c: usize| parse_f64(cell(c)).map_err(|m| Error::format(path, m));
        out.push(SweepRow {
            sigma: num(0)?,
            method: cell(1).parse().map_err(Error::Core)?,
            mae: num(2)?,
            rmse: num(3)?,
        });
    }
    Ok(out)
}
