//! Labeled datasets: CSV/ARFF ingestion, standardization, stratified folds
//! and a synthetic blob generator used throughout the tests.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} instances",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            class_names,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Sub-dataset holding the given instances, in order. Class names are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Writes the dataset as CSV with the label in the last column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = self.feature_names.clone();
        header.push("class".into());
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for (row, &label) in self.features.row_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.class_names[label].clone());
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Name(String),
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Interns class labels in first-appearance order.
#[derive(Default)]
struct ClassIndex {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl ClassIndex {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.lookup.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), i);
        i
    }
}

fn parse_number(path: &Path, line: usize, col: usize, cell: &str) -> Result<f64> {
    let cell = cell.trim();
    if cell == "?" {
        return Err(Error::Parse {
            path: path.into(),
            line,
            msg: format!("missing value in column {}", col + 1),
        });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.into(),
            line,
            msg: format!("non-numeric value `{cell}` in column {}", col + 1),
        }),
    }
}

/// Loads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("{other:?}"),
            },
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.into(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "need at least one feature column and a label column".into(),
        });
    }
    let label_idx = match label_column {
        LabelColumn::Last => header.len() - 1,
        LabelColumn::Name(name) => header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("no column named `{name}`"),
            }
        })?,
    };

    let mut classes = ClassIndex::default();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            line,
            msg: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                labels.push(classes.intern(cell));
            } else {
                values.push(parse_number(path, line, c, cell)?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    let n = header.len() - 1;
    let features = Matrix::new(labels.len(), n, values)?;
    let mut d = Dataset::new(dataset_name(path), features, labels, classes.names)?;
    d.feature_names = header
        .into_iter()
        .enumerate()
        .filter(|&(c, _)| c != label_idx)
        .map(|(_, h)| h)
        .collect();
    Ok(d)
}

enum ArffAttr {
    Numeric(String),
    Nominal(String, Vec<String>),
}

/// Loads the numeric-attributes-plus-nominal-class subset of ARFF.
///
/// The class attribute is the attribute named `class` if present, otherwise
/// the last nominal attribute.
pub fn load_arff(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };

    let mut attrs: Vec<ArffAttr> = Vec::new();
    let mut relation = None;
    let mut in_data = false;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            let cells: Vec<String> = line
                .split(',')
                .map(|c| c.trim().trim_matches(|q| q == '\'' || q == '"').to_string())
                .collect();
            rows.push((line_no, cells));
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = Some(line[9..].trim().trim_matches(|q| q == '\'' || q == '"').to_string());
        } else if lower.starts_with("@attribute") {
            let rest = line[10..].trim();
            let (name, ty) = split_attribute(rest)
                .ok_or_else(|| perr(line_no, format!("malformed attribute `{rest}`")))?;
            let ty_lower = ty.to_ascii_lowercase();
            if ty.starts_with('{') {
                let inner = ty
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| perr(line_no, format!("unterminated nominal list `{ty}`")))?;
                let values = inner
                    .split(',')
                    .map(|v| v.trim().trim_matches(|q| q == '\'' || q == '"').to_string())
                    .collect();
                attrs.push(ArffAttr::Nominal(name, values));
            } else if matches!(ty_lower.as_str(), "numeric" | "real" | "integer") {
                attrs.push(ArffAttr::Numeric(name));
            } else {
                return Err(perr(
                    line_no,
                    format!("unsupported attribute type `{ty}` for `{name}`"),
                ));
            }
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(perr(line_no, format!("unexpected line `{line}`")));
        }
    }

    let nominal: Vec<usize> = attrs
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, ArffAttr::Nominal(..)))
        .map(|(i, _)| i)
        .collect();
    let class_idx = nominal
        .iter()
        .copied()
        .find(|&i| matches!(&attrs[i], ArffAttr::Nominal(n, _) if n.eq_ignore_ascii_case("class")))
        .or_else(|| nominal.last().copied())
        .ok_or_else(|| perr(0, "no nominal class attribute".into()))?;
    if nominal.len() > 1 {
        let other = nominal.iter().find(|&&i| i != class_idx).unwrap();
        let name = match &attrs[*other] {
            ArffAttr::Nominal(n, _) | ArffAttr::Numeric(n) => n.clone(),
        };
        return Err(perr(
            0,
            format!("unsupported attribute type: nominal feature `{name}`"),
        ));
    }
    let class_values = match &attrs[class_idx] {
        ArffAttr::Nominal(_, v) => v.clone(),
        ArffAttr::Numeric(_) => unreachable!(),
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line_no, cells) in &rows {
        if cells.len() != attrs.len() {
            return Err(perr(
                *line_no,
                format!("expected {} values, found {}", attrs.len(), cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            if c == class_idx {
                let l = class_values.iter().position(|v| v == cell).ok_or_else(|| {
                    perr(*line_no, format!("class value `{cell}` not declared"))
                })?;
                labels.push(l);
            } else {
                values.push(parse_number(path, *line_no, c, cell)?);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    let features = Matrix::new(labels.len(), attrs.len() - 1, values)?;
    let name = relation.unwrap_or_else(|| dataset_name(path));
    let mut d = Dataset::new(name, features, labels, class_values)?;
    d.feature_names = attrs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != class_idx)
        .map(|(_, a)| match a {
            ArffAttr::Numeric(n) | ArffAttr::Nominal(n, _) => n.clone(),
        })
        .collect();
    Ok(d)
}

fn split_attribute(rest: &str) -> Option<(String, String)> {
    let rest = rest.trim();
    if let Some(q) = rest.chars().next().filter(|&c| c == '\'' || c == '"') {
        let end = rest[1..].find(q)? + 1;
        let name = rest[1..end].to_string();
        let ty = rest[end + 1..].trim().to_string();
        return (!ty.is_empty()).then_some((name, ty));
    }
    let split = rest.find(char::is_whitespace)?;
    let name = rest[..split].to_string();
    let ty = rest[split..].trim().to_string();
    (!ty.is_empty()).then_some((name, ty))
}

/// Loads `.arff` files with [`load_arff`] and anything else with [`load_csv`].
pub fn load_any(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let is_arff = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("arff"));
    if is_arff {
        load_arff(path)
    } else {
        load_csv(path, label_column)
    }
}

/// Reads the feature columns of a file to be classified.
///
/// CSV rows (after the header) may hold `n_features` values or
/// `n_features + 1` with a trailing label, which is ignored. ARFF files are
/// loaded as usual and must have `n_features` non-class attributes.
pub fn load_features(path: impl AsRef<Path>, n_features: usize) -> Result<Matrix> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff")) {
        let d = load_arff(path)?;
        if d.n_features() != n_features {
            return Err(Error::Arity {
                expected: n_features,
                got: d.n_features(),
            });
        }
        return Ok(d.features);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            line,
            msg: e.to_string(),
        })?;
        if record.len() != n_features && record.len() != n_features + 1 {
            return Err(Error::Arity {
                expected: n_features,
                got: record.len(),
            });
        }
        for (c, cell) in record.iter().take(n_features).enumerate() {
            values.push(parse_number(path, line, c, cell)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Matrix::new(rows, n_features, values)
}

/// Per-feature affine transform fitted by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant column.
    pub stdevs: Vec<f64>,
}

const CONSTANT_COLUMN_TOL: f64 = 1e-12;

impl Standardizer {
    pub fn fit(features: &Matrix) -> Standardizer {
        let n = features.rows() as f64;
        let cols = features.cols();
        let mut means = vec![0.0; cols];
        for row in features.row_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; cols];
        for row in features.row_iter() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stdevs = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > CONSTANT_COLUMN_TOL {
                    sd
                } else {
                    0.0
                }
            })
            .collect();
        Standardizer { means, stdevs }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stdevs))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..x.rows() {
            let z = self.apply(x.row(i));
            out.row_mut(i).copy_from_slice(&z);
        }
        out
    }
}

/// Rescales every feature to zero mean and unit population variance.
pub fn standardize(d: &Dataset) -> Result<(Dataset, Standardizer)> {
    if d.len() < 2 {
        return Err(Error::InvalidArgument(
            "standardization needs at least two instances".into(),
        ));
    }
    let s = Standardizer::fit(&d.features);
    let mut out = d.clone();
    out.features = s.apply_matrix(&d.features);
    Ok((out, s))
}

/// Assignment of every instance to one of `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` instance indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified fold assignment.
///
/// Each class is shuffled and dealt round-robin into the folds; the dealing
/// position carries over from one class to the next so overall fold sizes
/// also differ by at most one.
pub fn stratified_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 folds, got {k}")));
    }
    if k > d.len() {
        return Err(Error::InvalidArgument(format!(
            "{k} folds requested for {} instances",
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut assignments = vec![0; d.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Isotropic Gaussian classes; class `c` is centred at `c` on the first axis.
pub fn make_gaussian_blobs(
    n_per_class: usize,
    n_features: usize,
    class_count: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || n_features == 0 || class_count == 0 {
        return Err(Error::InvalidArgument("blob counts must be at least 1".into()));
    }
    let noise = Normal::new(0.0, spread.abs())
        .map_err(|e| Error::InvalidArgument(format!("spread {spread}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * class_count;
    let mut data = Vec::with_capacity(n * n_features);
    let mut labels = Vec::with_capacity(n);
    for c in 0..class_count {
        for _ in 0..n_per_class {
            for f in 0..n_features {
                let centre = if f == 0 { c as f64 } else { 0.0 };
                data.push(centre + noise.sample(&mut rng));
            }
            labels.push(c);
        }
    }
    let names = (0..class_count).map(|c| format!("c{c}")).collect();
    Dataset::new(
        format!("blobs-{class_count}x{n_features}"),
        Matrix::new(n, n_features, data)?,
        labels,
        names,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn features_with_or_without_label() {
        let f = write_tmp("a,b,class\n1,2,x\n3,4\n", ".csv");
        let m = load_features(f.path(), 2).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let g = write_tmp("a,b\n1,2\n", ".csv");
        match load_features(g.path(), 4) {
            Err(Error::Arity { expected, got }) => assert_eq!((expected, got), (4, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_features(f.path(), 1), Err(Error::Arity { expected: 1, .. })));
    }

    #[test]
    fn csv_labels_in_first_appearance_order() {
        let f = write_tmp("x,y,label\n1,2,a\n3,4,b\n5,6,a\n", ".csv");
        let d = load_csv(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.class_names, vec!["a", "b"]);
        assert_eq!(d.feature_names, vec!["x", "y"]);
    }

    #[test]
    fn csv_single_feature_and_named_label() {
        let f = write_tmp("cls,v\nu,1.5\nw,2.5\n", ".csv");
        let d = load_csv(f.path(), &LabelColumn::Name("cls".into())).unwrap();
        assert_eq!(d.features, Matrix::from_rows(&[[1.5], [2.5]]).unwrap());
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("x,y\n1,a\nz,b\n", ".csv");
        match load_csv(f.path(), &LabelColumn::Last) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("column 1"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = write_tmp("x,y\n", ".csv");
        assert!(matches!(
            load_csv(empty.path(), &LabelColumn::Last),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            load_csv("/definitely/not/here.csv", &LabelColumn::Last),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn iris_shape() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iris.csv");
        let d = load_csv(path, &LabelColumn::Last).unwrap();
        assert_eq!((d.len(), d.n_features(), d.n_classes()), (150, 4, 3));
    }

    const ARFF: &str = "% comment\n@RELATION toy\n@attribute a numeric\n@Attribute 'b b' REAL\n@attribute class {p,q}\n@DATA\n1.0,2.0,p\n% mid comment\n3,4,q\n";

    #[test]
    fn arff_minimal() {
        let f = write_tmp(ARFF, ".arff");
        let d = load_arff(f.path()).unwrap();
        assert_eq!((d.len(), d.n_features(), d.n_classes()), (2, 2, 2));
        assert_eq!(d.name, "toy");
        assert_eq!(d.labels, vec![0, 1]);
        assert_eq!(d.feature_names, vec!["a", "b b"]);
    }

    #[test]
    fn arff_rejects_string_attribute() {
        let f = write_tmp(
            "@relation t\n@attribute s string\n@attribute class {p,q}\n@data\nfoo,p\n",
            ".arff",
        );
        match load_arff(f.path()) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("unsupported attribute type")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arff_wrong_arity_names_line() {
        let f = write_tmp(
            "@relation t\n@attribute a numeric\n@attribute class {p,q}\n@data\n1,p\n1,2,q\n",
            ".arff",
        );
        match load_arff(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arff_rejects_missing_values() {
        let f = write_tmp(
            "@relation t\n@attribute a numeric\n@attribute class {p,q}\n@data\n?,p\n",
            ".arff",
        );
        assert!(matches!(load_arff(f.path()), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn standardize_population_convention() {
        let d = Dataset::new(
            "s",
            Matrix::from_rows(&[[1.0, 7.0], [3.0, 7.0]]).unwrap(),
            vec![0, 0],
            vec!["a".into()],
        )
        .unwrap();
        let (z, rec) = standardize(&d).unwrap();
        assert_eq!(z.features.column(0), vec![-1.0, 1.0]);
        assert_eq!(z.features.column(1), vec![0.0, 0.0]);
        assert_eq!(rec.apply(d.features.row(1)), z.features.row(1).to_vec());
    }

    #[test]
    fn folds_single_class() {
        let d = Dataset::new("one", Matrix::zeros(10, 1), vec![0; 10], vec!["a".into()]).unwrap();
        let plan = stratified_folds(&d, 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        assert!(stratified_folds(&d, 11, 1).is_err());
        assert!(stratified_folds(&d, 1, 1).is_err());
    }

    #[test]
    fn folds_iris_five_per_class() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iris.csv");
        let d = load_csv(path, &LabelColumn::Last).unwrap();
        let plan = stratified_folds(&d, 10, 3).unwrap();
        for f in 0..10 {
            let (_, test) = plan.split(f);
            let sub = d.subset(&test);
            assert_eq!(sub.class_counts(), vec![5, 5, 5]);
        }
        assert_eq!(plan, stratified_folds(&d, 10, 3).unwrap());
    }

    #[test]
    fn blobs_are_reproducible() {
        let a = make_gaussian_blobs(20, 3, 2, 0.5, 42).unwrap();
        let b = make_gaussian_blobs(20, 3, 2, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), vec![20, 20]);
    }

    #[test]
    fn blobs_with_zero_spread_are_point_masses() {
        let d = make_gaussian_blobs(5, 2, 2, 0.0, 1).unwrap();
        // leave-one-out 1-NN: every point's nearest other point shares its label
        for i in 0..d.len() {
            let nearest = (0..d.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    crate::linalg::sq_dist(d.features.row(i), d.features.row(a))
                        .total_cmp(&crate::linalg::sq_dist(d.features.row(i), d.features.row(b)))
                })
                .unwrap();
            assert_eq!(d.labels[nearest], d.labels[i]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn folds_are_stratified(
                counts in proptest::collection::vec(1usize..30, 1..5),
                k in 2usize..11,
                seed in any::<u64>(),
            ) {
                let labels: Vec<usize> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
                    .collect();
                prop_assume!(labels.len() >= k);
                let names = (0..counts.len()).map(|c| c.to_string()).collect();
                let d = Dataset::new("p", Matrix::zeros(labels.len(), 1), labels, names).unwrap();
                let plan = stratified_folds(&d, k, seed).unwrap();
                prop_assert!(plan.fold_sizes().iter().all(|&s| s > 0));
                for c in 0..counts.len() {
                    let mut per_fold = vec![0usize; k];
                    for (i, &a) in plan.assignments.iter().enumerate() {
                        if d.labels[i] == c {
                            per_fold[a] += 1;
                        }
                    }
                    let lo = per_fold.iter().min().unwrap();
                    let hi = per_fold.iter().max().unwrap();
                    prop_assert!(hi - lo <= 1);
                }
            }

            #[test]
            fn csv_round_trip(seed in any::<u64>(), n in 1usize..12, cols in 1usize..4) {
                let mut d = make_gaussian_blobs(n, cols, 3, 2.5, seed).unwrap();
                d.name = "rt".into();
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("rt.csv");
                d.write_csv(&path).unwrap();
                let back = load_csv(&path, &LabelColumn::Last).unwrap();
                prop_assert_eq!(&back.features, &d.features);
                prop_assert_eq!(&back.labels, &d.labels);
                prop_assert_eq!(&back.class_names, &d.class_names);
            }
        }
    }
}
