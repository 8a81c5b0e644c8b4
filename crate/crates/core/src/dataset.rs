//! Column-typed tabular data.
//!
//! A [`Dataset`] holds numeric and categorical feature columns plus a numeric
//! response. Categorical columns are stored as level indices into a per-column
//! level table, with levels numbered in order of first appearance.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature values of one column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, codes: Vec<u32>, levels: Vec<String>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical { codes, levels },
        }
    }

    /// Builds a categorical column from raw labels, numbering levels by first appearance.
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Self {
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut levels = Vec::new();
        let codes = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *index.entry(l).or_insert_with(|| {
                    levels.push(l.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column::categorical(name, codes, levels)
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnData::Numeric(_))
    }

    pub fn kind(&self) -> FeatureKind {
        match &self.data {
            ColumnData::Numeric(_) => FeatureKind::Numeric,
            ColumnData::Categorical { levels, .. } => FeatureKind::Categorical {
                levels: levels.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Names and types of the feature columns a model was trained on.
///
/// Rows handed to a model are encoded against the schema: numeric features
/// carry their value, categorical features carry the training level index as
/// `f64`. A label that was never seen in training is encoded as `-1.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    pub response: String,
}

/// Encoding used for a categorical label absent from the training level table.
pub const UNSEEN_LEVEL: f64 = -1.0;

impl Schema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn categorical_names(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Categorical { .. }))
            .map(|f| f.name.clone())
            .collect()
    }

    /// Encodes every row of `ds` against this schema, matching columns by name.
    pub fn encode_dataset(&self, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
        let mut encoded = vec![Vec::with_capacity(self.len()); ds.n_rows()];
        for spec in &self.features {
            let col = ds
                .columns()
                .iter()
                .find(|c| c.name == spec.name)
                .ok_or_else(|| Error::Schema {
                    column: spec.name.clone(),
                    message: "column not present".into(),
                })?;
            match (&spec.kind, &col.data) {
                (FeatureKind::Numeric, ColumnData::Numeric(values)) => {
                    for (row, v) in encoded.iter_mut().zip(values) {
                        row.push(*v);
                    }
                }
                (FeatureKind::Categorical { levels }, ColumnData::Categorical { codes, levels: own }) => {
                    let map: Vec<f64> = own
                        .iter()
                        .map(|l| {
                            levels
                                .iter()
                                .position(|t| t == l)
                                .map_or(UNSEEN_LEVEL, |p| p as f64)
                        })
                        .collect();
                    for (row, c) in encoded.iter_mut().zip(codes) {
                        row.push(map[*c as usize]);
                    }
                }
                (FeatureKind::Numeric, _) => {
                    return Err(Error::Schema {
                        column: spec.name.clone(),
                        message: "expected a numeric column".into(),
                    })
                }
                (FeatureKind::Categorical { .. }, _) => {
                    return Err(Error::Schema {
                        column: spec.name.clone(),
                        message: "expected a categorical column".into(),
                    })
                }
            }
        }
        Ok(encoded)
    }

    /// Reads a feature CSV (response column optional) and encodes it against this schema.
    pub fn encode_csv(&self, path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let table = RawTable::read(file)?;
        let cats = self.categorical_names();
        let columns = table.typed_columns(&cats, None)?;
        let n = table.rows.len();
        let ds = Dataset {
            columns,
            response: vec![0.0; n],
            response_name: self.response.clone(),
        };
        self.encode_dataset(&ds)
    }
}

/// Indices of the numeric columns used as regressors in leaf models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearFeatureSet(Vec<usize>);

impl LinearFeatureSet {
    /// Checks the indices against `ds`: strictly increasing, numeric, non-empty.
    pub fn new(indices: Vec<usize>, ds: &Dataset) -> Result<Self> {
        Self::validate(&indices, |i| {
            ds.columns.get(i).map(|c| (c.name.as_str(), c.is_numeric()))
        })?;
        Ok(LinearFeatureSet(indices))
    }

    pub fn for_schema(indices: Vec<usize>, schema: &Schema) -> Result<Self> {
        Self::validate(&indices, |i| {
            schema
                .features
                .get(i)
                .map(|f| (f.name.as_str(), f.kind == FeatureKind::Numeric))
        })?;
        Ok(LinearFeatureSet(indices))
    }

    /// Every numeric column of `ds`.
    pub fn all_numeric(ds: &Dataset) -> Result<Self> {
        let idx: Vec<usize> = (0..ds.n_features()).filter(|&i| ds.is_numeric(i)).collect();
        Self::new(idx, ds)
    }

    /// Resolves column names to indices.
    pub fn from_names<S: AsRef<str>>(names: &[S], ds: &Dataset) -> Result<Self> {
        let mut idx = names
            .iter()
            .map(|n| {
                ds.column_index(n.as_ref())
                    .ok_or_else(|| Error::MissingColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        Self::new(idx, ds)
    }

    fn validate<'a>(indices: &[usize], lookup: impl Fn(usize) -> Option<(&'a str, bool)>) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::Config("linear feature set must not be empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("linear feature indices must be strictly increasing".into()));
        }
        for &i in indices {
            match lookup(i) {
                None => return Err(Error::Config(format!("linear feature index {i} out of range"))),
                Some((name, false)) => {
                    return Err(Error::Config(format!("linear feature '{name}' is not numeric")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes the selected features of an encoded row followed by the constant 1.
    pub fn augment_into(&self, row: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.0.len() + 1);
        for (o, &i) in out.iter_mut().zip(&self.0) {
            *o = row[i];
        }
        out[self.0.len()] = 1.0;
    }

    /// Selected features of an encoded row, without the trailing constant.
    pub fn select(&self, row: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| row[i]).collect()
    }
}

/// A run of rows sharing one feature value, as a range into a sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctBlock {
    pub value: f64,
    pub span: Range<usize>,
}

/// Immutable feature table plus response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    response: Vec<f64>,
    response_name: String,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, response_name: impl Into<String>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        for col in &columns {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "column '{}' has {} entries, response has {n}",
                    col.name,
                    col.len()
                )));
            }
            if let ColumnData::Categorical { codes, levels } = &col.data {
                if levels.is_empty() && n > 0 {
                    return Err(Error::Config(format!("column '{}' has no levels", col.name)));
                }
                if codes.iter().any(|&c| c as usize >= levels.len()) {
                    return Err(Error::Config(format!(
                        "column '{}' has a level index out of range",
                        col.name
                    )));
                }
            }
            if let ColumnData::Numeric(v) = &col.data {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config(format!("column '{}' has non-finite values", col.name)));
                }
            }
        }
        if response.iter().any(|y| !y.is_finite()) {
            return Err(Error::Config("response has non-finite values".into()));
        }
        Ok(Dataset {
            columns,
            response,
            response_name: response_name.into(),
        })
    }

    /// Loads a CSV with a header row. Columns listed in `categorical` are
    /// encoded as levels; all others, and the response, must parse as reals.
    pub fn load_csv<S: AsRef<str>>(path: impl AsRef<Path>, response: &str, categorical: &[S]) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, response, categorical)
    }

    pub fn read_csv<R: Read, S: AsRef<str>>(reader: R, response: &str, categorical: &[S]) -> Result<Self> {
        let table = RawTable::read(reader)?;
        let resp_idx = table
            .header
            .iter()
            .position(|h| h == response)
            .ok_or_else(|| Error::MissingColumn(response.to_string()))?;
        if categorical.iter().any(|c| c.as_ref() == response) {
            return Err(Error::Config("response column must be numeric".into()));
        }
        for c in categorical {
            if !table.header.iter().any(|h| h == c.as_ref()) {
                return Err(Error::MissingColumn(c.as_ref().to_string()));
            }
        }
        let response_values = table.numeric_column(resp_idx)?;
        let cats: Vec<String> = categorical.iter().map(|c| c.as_ref().to_string()).collect();
        let columns = table.typed_columns(&cats, Some(resp_idx))?;
        Dataset::new(columns, response, response_values)
    }

    /// Writes the dataset as CSV: features in column order, response last.
    /// Reals are printed in shortest round-trip form, so reloading is bit-exact.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.response_name);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for row in 0..self.n_rows() {
            record.clear();
            for col in &self.columns {
                record.push(match &col.data {
                    ColumnData::Numeric(v) => format!("{}", v[row]),
                    ColumnData::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
                });
            }
            record.push(format!("{}", self.response[row]));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, feature: usize) -> &Column {
        &self.columns[feature]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn is_numeric(&self, feature: usize) -> bool {
        self.columns[feature].is_numeric()
    }

    /// Numeric values of a feature. Panics on a categorical feature.
    pub fn numeric(&self, feature: usize) -> &[f64] {
        match &self.columns[feature].data {
            ColumnData::Numeric(v) => v,
            ColumnData::Categorical { .. } => {
                panic!("feature {feature} ('{}') is categorical", self.columns[feature].name)
            }
        }
    }

    /// Level indices of a feature. Panics on a numeric feature.
    pub fn codes(&self, feature: usize) -> &[u32] {
        match &self.columns[feature].data {
            ColumnData::Categorical { codes, .. } => codes,
            ColumnData::Numeric(_) => {
                panic!("feature {feature} ('{}') is numeric", self.columns[feature].name)
            }
        }
    }

    /// Encoded value of one cell (level index for categoricals).
    pub fn value(&self, feature: usize, row: usize) -> f64 {
        match &self.columns[feature].data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row] as f64,
        }
    }

    /// Encoded feature row, in the layout expected by tree and forest prediction.
    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_features()).map(|f| self.value(f, row)).collect()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            features: self
                .columns
                .iter()
                .map(|c| FeatureSpec {
                    name: c.name.clone(),
                    kind: c.kind(),
                })
                .collect(),
            response: self.response_name.clone(),
        }
    }

    /// `rows` ordered by ascending feature value; ties keep ascending row index.
    pub fn sorted_order(&self, feature: usize, rows: &[usize]) -> Vec<usize> {
        let values = self.numeric(feature);
        let mut order = rows.to_vec();
        order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        order
    }

    /// Selected numeric features of `row` followed by a trailing 1.
    pub fn linear_row(&self, row: usize, lin: &LinearFeatureSet) -> Vec<f64> {
        let mut out = vec![0.0; lin.len() + 1];
        self.linear_row_into(row, lin, &mut out);
        out
    }

    pub fn linear_row_into(&self, row: usize, lin: &LinearFeatureSet, out: &mut [f64]) {
        for (o, &f) in out.iter_mut().zip(lin.indices()) {
            *o = self.numeric(f)[row];
        }
        out[lin.len()] = 1.0;
    }

    /// Splits a sorted order into runs of equal feature value.
    pub fn group_distinct(&self, feature: usize, order: &[usize]) -> Vec<DistinctBlock> {
        let values = self.numeric(feature);
        let mut blocks: Vec<DistinctBlock> = Vec::new();
        for (pos, &row) in order.iter().enumerate() {
            let v = values[row];
            match blocks.last_mut() {
                Some(b) if b.value == v => b.span.end = pos + 1,
                _ => blocks.push(DistinctBlock {
                    value: v,
                    span: pos..pos + 1,
                }),
            }
        }
        blocks
    }

    /// A copy restricted to `rows` (in the given order, repeats allowed).
    /// Categorical level tables are kept intact.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                data: match &c.data {
                    ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
                    ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                        levels: levels.clone(),
                    },
                },
            })
            .collect();
        Dataset {
            columns,
            response: rows.iter().map(|&r| self.response[r]).collect(),
            response_name: self.response_name.clone(),
        }
    }

    /// Same features, different response.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.columns.clone(), self.response_name.clone(), response)
    }
}

/// Header plus unparsed cells.
struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl RawTable {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Load {
                row: i + 1,
                column: String::new(),
                message: e.to_string(),
            })?;
            let cells: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
            for (cell, name) in cells.iter().zip(&header) {
                if cell.is_empty() {
                    return Err(Error::Load {
                        row: i + 1,
                        column: name.clone(),
                        message: "missing value".into(),
                    });
                }
            }
            rows.push(cells);
        }
        Ok(RawTable { header, rows })
    }

    fn numeric_column(&self, idx: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = &r[idx];
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Load {
                        row: i + 1,
                        column: self.header[idx].clone(),
                        message: format!("cannot parse '{cell}' as a real number"),
                    })
            })
            .collect()
    }

    fn typed_columns(&self, categorical: &[String], skip: Option<usize>) -> Result<Vec<Column>> {
        let mut columns = Vec::new();
        for (idx, name) in self.header.iter().enumerate() {
            if Some(idx) == skip {
                continue;
            }
            if categorical.iter().any(|c| c == name) {
                let labels: Vec<&str> = self.rows.iter().map(|r| r[idx].as_str()).collect();
                columns.push(Column::from_labels(name.clone(), &labels));
            } else {
                columns.push(Column::numeric(name.clone(), self.numeric_column(idx)?));
            }
        }
        Ok(columns)
    }
}
