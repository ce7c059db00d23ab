//! On-disk formats: dataset and annotation CSVs, confusion JSON, integrated-label CSV.
//!
//! Every CSV starts with a `# <kind> schema_version=1 key=value ...` line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::PosteriorLabels;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::simulator::{Annotation, AnnotationSet, ConfusionEnsemble, Dataset, MixtureSpec, Provenance, Split};

pub const SCHEMA_VERSION: u32 = 1;

fn format_err(kind: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        kind,
        message: message.into(),
    }
}

fn header_line(kind: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("# {kind} schema_version={SCHEMA_VERSION}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push('\n');
    line
}

/// Parses `# kind schema_version=1 a=b ...`; values run to the next space except
/// for the final key, which takes the rest of the line.
fn parse_header(kind: &'static str, text: &str) -> Result<BTreeMap<String, String>> {
    let first = text.lines().next().unwrap_or_default();
    let rest = first
        .strip_prefix("# ")
        .and_then(|r| r.strip_prefix(kind))
        .ok_or_else(|| format_err(kind, format!("missing '# {kind}' header line")))?;
    let mut map = BTreeMap::new();
    let mut remaining = rest.trim();
    while !remaining.is_empty() {
        let (key, after) = remaining
            .split_once('=')
            .ok_or_else(|| format_err(kind, format!("bad header field near {remaining:?}")))?;
        let value_end = if key == "generator" { after.len() } else { after.find(' ').unwrap_or(after.len()) };
        map.insert(key.trim().to_string(), after[..value_end].to_string());
        remaining = after[value_end..].trim();
    }
    match map.get("schema_version").map(String::as_str) {
        Some(v) if v == SCHEMA_VERSION.to_string() => Ok(map),
        other => Err(format_err(kind, format!("unsupported schema_version {other:?}"))),
    }
}

fn header_usize(kind: &'static str, map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    map.get(key)
        .ok_or_else(|| format_err(kind, format!("header lacks {key}")))?
        .parse()
        .map_err(|_| format_err(kind, format!("header field {key} is not an integer")))
}

fn body_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_f64(kind: &'static str, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| format_err(kind, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(format_err(kind, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_usize(kind: &'static str, s: &str) -> Result<usize> {
    s.parse().map_err(|_| format_err(kind, format!("not an index: {s:?}")))
}

pub fn dataset_to_string(ds: &Dataset) -> Result<String> {
    let generator = match &ds.generator {
        Some(g) => serde_json::to_string(g)?,
        None => "null".into(),
    };
    let seed = ds.generator.as_ref().map(|g| g.seed.to_string()).unwrap_or_else(|| "none".into());
    let mut out = header_line(
        "dataset",
        &[
            ("D", ds.dim().to_string()),
            ("K", ds.num_classes.to_string()),
            ("N", ds.num_items().to_string()),
            ("soft_labels", ds.soft_labels.is_some().to_string()),
            ("seed", seed),
            ("generator", generator),
        ],
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["item_id".to_string(), "split".into(), "label".into()];
    header.extend((0..ds.dim()).map(|d| format!("x_{d}")));
    if ds.soft_labels.is_some() {
        header.extend((0..ds.num_classes).map(|k| format!("f_{k}")));
    }
    w.write_record(&header)?;
    for n in 0..ds.num_items() {
        let mut rec = vec![n.to_string(), ds.splits[n].as_str().into(), ds.labels[n].to_string()];
        rec.extend((0..ds.dim()).map(|d| ds.features[(d, n)].to_string()));
        if let Some(f) = &ds.soft_labels {
            rec.extend((0..ds.num_classes).map(|k| f[(k, n)].to_string()));
        }
        w.write_record(&rec)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"));
    Ok(out)
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    const KIND: &str = "dataset";
    let h = parse_header(KIND, text)?;
    let (d, k, n) = (header_usize(KIND, &h, "D")?, header_usize(KIND, &h, "K")?, header_usize(KIND, &h, "N")?);
    let soft = h.get("soft_labels").map(String::as_str) == Some("true");
    let generator: Option<MixtureSpec> = match h.get("generator") {
        Some(g) => serde_json::from_str(g).map_err(|e| format_err(KIND, format!("generator: {e}")))?,
        None => None,
    };
    let width = 3 + d + if soft { k } else { 0 };
    let mut features = DenseMatrix::zeros(d, n);
    let mut f = soft.then(|| DenseMatrix::zeros(k, n));
    let mut labels = vec![0; n];
    let mut splits = vec![Split::Train; n];
    let mut seen = vec![false; n];
    for rec in body_reader(text).records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(format_err(KIND, format!("row has {} fields, expected {width}", rec.len())));
        }
        let item = parse_usize(KIND, &rec[0])?;
        if item >= n || seen[item] {
            return Err(format_err(KIND, format!("item id {item} out of range or repeated")));
        }
        seen[item] = true;
        splits[item] = Split::parse(&rec[1]).ok_or_else(|| format_err(KIND, format!("unknown split {:?}", &rec[1])))?;
        labels[item] = parse_usize(KIND, &rec[2])?;
        for r in 0..d {
            features[(r, item)] = parse_f64(KIND, &rec[3 + r])?;
        }
        if let Some(f) = f.as_mut() {
            for r in 0..k {
                f[(r, item)] = parse_f64(KIND, &rec[3 + d + r])?;
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(format_err(KIND, "fewer rows than N"));
    }
    let mut ds = Dataset::new(features, labels, f, splits, k)?;
    ds.generator = generator;
    Ok(ds)
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_string(ds)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_str(&std::fs::read_to_string(path)?)
}

pub fn annotations_to_string(a: &AnnotationSet) -> Result<String> {
    let mut out = header_line(
        "annotations",
        &[
            ("items", a.num_items().to_string()),
            ("annotators", a.num_annotators().to_string()),
            ("classes", a.num_classes().to_string()),
        ],
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item_id", "annotator_id", "label"])?;
    for t in a.triples() {
        w.write_record([t.item.to_string(), t.annotator.to_string(), t.label.to_string()])?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"));
    Ok(out)
}

pub fn annotations_from_str(text: &str) -> Result<AnnotationSet> {
    const KIND: &str = "annotations";
    let h = parse_header(KIND, text)?;
    let n = header_usize(KIND, &h, "items")?;
    let m = header_usize(KIND, &h, "annotators")?;
    let k = header_usize(KIND, &h, "classes")?;
    let mut triples = Vec::new();
    for rec in body_reader(text).records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(format_err(KIND, format!("row has {} fields, expected 3", rec.len())));
        }
        triples.push(Annotation {
            item: parse_usize(KIND, &rec[0])?,
            annotator: parse_usize(KIND, &rec[1])?,
            label: parse_usize(KIND, &rec[2])?,
        });
    }
    AnnotationSet::new(n, m, k, triples)
}

pub fn write_annotations(a: &AnnotationSet, path: &Path) -> Result<()> {
    std::fs::write(path, annotations_to_string(a)?)?;
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<AnnotationSet> {
    annotations_from_str(&std::fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct ConfusionEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    /// Row-major `K × K`.
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ConfusionFile {
    schema_version: u32,
    classes: usize,
    confusions: Vec<ConfusionEntry>,
}

/// Confusion matrices with optional provenance tags (absent for estimates).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionRecords {
    pub matrices: Vec<DenseMatrix>,
    pub provenance: Vec<Option<Provenance>>,
}

impl From<&ConfusionEnsemble> for ConfusionRecords {
    fn from(e: &ConfusionEnsemble) -> Self {
        ConfusionRecords {
            matrices: e.matrices.clone(),
            provenance: e.provenance.iter().copied().map(Some).collect(),
        }
    }
}

impl ConfusionRecords {
    pub fn estimated(matrices: &[DenseMatrix]) -> Self {
        ConfusionRecords {
            matrices: matrices.to_vec(),
            provenance: vec![None; matrices.len()],
        }
    }

    /// The ensemble, when every matrix carries a provenance tag.
    pub fn to_ensemble(&self) -> Result<ConfusionEnsemble> {
        let tags = self
            .provenance
            .iter()
            .map(|p| p.ok_or_else(|| format_err("confusion", "matrix without provenance tag")))
            .collect::<Result<Vec<_>>>()?;
        ConfusionEnsemble::new(self.matrices.clone(), tags)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ConfusionFile {
            schema_version: SCHEMA_VERSION,
            classes: self.matrices.first().map(DenseMatrix::rows).unwrap_or(0),
            confusions: self
                .matrices
                .iter()
                .zip(&self.provenance)
                .map(|(m, p)| ConfusionEntry {
                    provenance: *p,
                    matrix: (0..m.rows()).map(|r| m.row(r).to_vec()).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        const KIND: &str = "confusion";
        let file: ConfusionFile = serde_json::from_str(text).map_err(|e| format_err(KIND, e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(format_err(KIND, format!("unsupported schema_version {}", file.schema_version)));
        }
        let mut matrices = Vec::new();
        let mut provenance = Vec::new();
        for entry in file.confusions {
            let m = DenseMatrix::from_rows(&entry.matrix)?;
            if m.shape() != (file.classes, file.classes) {
                return Err(format_err(KIND, format!("matrix is {:?}, expected {}x{}", m.shape(), file.classes, file.classes)));
            }
            if !m.is_finite() {
                return Err(format_err(KIND, "non-finite entry"));
            }
            matrices.push(m);
            provenance.push(entry.provenance);
        }
        if matrices.is_empty() {
            return Err(format_err(KIND, "no matrices"));
        }
        Ok(ConfusionRecords { matrices, provenance })
    }
}

pub fn write_confusions(records: &ConfusionRecords, path: &Path) -> Result<()> {
    std::fs::write(path, records.to_json()?)?;
    Ok(())
}

pub fn read_confusions(path: &Path) -> Result<ConfusionRecords> {
    ConfusionRecords::from_json(&std::fs::read_to_string(path)?)
}

pub fn labels_to_string(labels: &PosteriorLabels) -> Result<String> {
    let k = labels.num_classes();
    let mut out = header_line("labels", &[("K", k.to_string()), ("N", labels.num_items().to_string())]);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["item_id".to_string(), "hard_label".into()];
    header.extend((0..k).map(|j| format!("q_{j}")));
    w.write_record(&header)?;
    for (n, hard) in labels.hard_labels().into_iter().enumerate() {
        let mut rec = vec![n.to_string(), hard.to_string()];
        rec.extend((0..k).map(|j| labels.q[(j, n)].to_string()));
        w.write_record(&rec)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_labels(labels: &PosteriorLabels, path: &Path) -> Result<()> {
    std::fs::write(path, labels_to_string(labels)?)?;
    Ok(())
}

/// Plain numeric CSV (one matrix row per line); `#` lines and a non-numeric
/// header row are skipped.
pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    const KIND: &str = "matrix";
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        rows.push(rec.iter().map(|f| parse_f64(KIND, f)).collect::<Result<Vec<f64>>>()?);
    }
    if rows.is_empty() {
        return Err(format_err(KIND, "no numeric rows"));
    }
    DenseMatrix::from_rows(&rows)
}
