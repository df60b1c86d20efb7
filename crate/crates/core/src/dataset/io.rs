use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttrLabels, Case, CaseSet, SplitTag};
use crate::checklist::{Attribute, N_ATTRIBUTES};
use crate::{Error, Result};

pub const METADATA_HEADER: [&str; 9] = [
    "case_id",
    "pigment_network",
    "streaks",
    "pigmentation",
    "regression",
    "dots_globules",
    "bwv",
    "vascular",
    "melanoma",
];

const DEFAULT_MAPPING: &str = include_str!("../../data/default_mapping.json");

/// Column -> category -> positivity. Categories compare case-insensitively
/// after trimming.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMapping(BTreeMap<String, BTreeMap<String, u8>>);

impl Default for LabelMapping {
    fn default() -> Self {
        Self::from_json(DEFAULT_MAPPING).expect("shipped mapping is valid")
    }
}

impl LabelMapping {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, BTreeMap<String, u8>> = serde_json::from_str(text)?;
        let mut out = BTreeMap::new();
        for (column, table) in raw {
            let mut norm = BTreeMap::new();
            for (category, value) in table {
                if value > 1 {
                    return Err(Error::Config(format!(
                        "mapping `{column}`/`{category}` must be 0 or 1, got {value}"
                    )));
                }
                norm.insert(normalize(&category), value);
            }
            out.insert(column, norm);
        }
        for a in Attribute::ALL {
            if !out.contains_key(a.column()) {
                return Err(Error::Schema {
                    column: format!("{} (in mapping)", a.column()),
                });
            }
        }
        Ok(LabelMapping(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::util::read_to_string(path)?)
    }

    pub fn lookup(&self, column: &str, category: &str) -> Option<u8> {
        self.0.get(column)?.get(&normalize(category)).copied()
    }

    /// A category string that maps to `value`; prefers `absent` for 0.
    pub fn canonical_category(&self, column: &str, value: u8) -> Option<&str> {
        let table = self.0.get(column)?;
        if value == 0 && table.get("absent") == Some(&0) {
            return Some("absent");
        }
        table
            .iter()
            .find(|(_, &v)| v == value)
            .map(|(k, _)| k.as_str())
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Read the metadata CSV. Feature vectors are left empty.
pub fn parse_metadata(path: &Path, mapping: &LabelMapping) -> Result<CaseSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_metadata_from_reader(file, mapping)
}

pub fn parse_metadata_from_reader(reader: impl Read, mapping: &LabelMapping) -> Result<CaseSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            column: name.to_string(),
        })
    };
    let id_col = col("case_id")?;
    let attr_cols: Vec<usize> = Attribute::ALL
        .iter()
        .map(|a| col(a.column()))
        .collect::<Result<_>>()?;
    let mel_col = col("melanoma")?;

    let mut cases = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let mut attr_labels: AttrLabels = [0; N_ATTRIBUTES];
        for (slot, (a, &c)) in attr_labels.iter_mut().zip(Attribute::ALL.iter().zip(&attr_cols)) {
            let value = record.get(c).unwrap_or("");
            *slot = mapping.lookup(a.column(), value).ok_or_else(|| Error::Mapping {
                row,
                column: a.column().to_string(),
                value: value.to_string(),
            })?;
        }
        let mel_raw = record.get(mel_col).unwrap_or("");
        let mel_label = match mel_raw {
            "0" => 0,
            "1" => 1,
            other => mapping.lookup("melanoma", other).ok_or_else(|| Error::Mapping {
                row,
                column: "melanoma".to_string(),
                value: other.to_string(),
            })?,
        };
        cases.push(Case::new(record.get(id_col).unwrap_or(""), attr_labels, mel_label));
    }
    CaseSet::new(cases, SplitTag::Unsplit)
}

/// Emit a metadata CSV using one canonical category per label value.
pub fn write_metadata(caseset: &CaseSet, mapping: &LabelMapping, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METADATA_HEADER)?;
    for c in caseset.cases() {
        let mut row = vec![c.id.clone()];
        for a in Attribute::ALL {
            let label = c.attr_labels[a.index()];
            let cat = mapping.canonical_category(a.column(), label).ok_or_else(|| {
                Error::Config(format!("mapping has no category for {}={label}", a.column()))
            })?;
            row.push(cat.to_string());
        }
        row.push(c.mel_label.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<metadata writer>", e))?;
    Ok(())
}

/// Attach `derm`/`clin` feature rows to every case of `caseset`.
///
/// Rows for ids not present in `caseset` are ignored. If `caseset` already
/// carries features, the file must agree on their dimension.
pub fn load_features(path: &Path, caseset: CaseSet) -> Result<CaseSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_features_from_reader(file, caseset)
}

pub fn load_features_from_reader(reader: impl Read, caseset: CaseSet) -> Result<CaseSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("case_id") {
        return Err(Error::Schema {
            column: "case_id".into(),
        });
    }
    if headers.get(1) != Some("modality") {
        return Err(Error::Schema {
            column: "modality".into(),
        });
    }
    let d = headers.len().saturating_sub(2);
    if d == 0 {
        return Err(Error::Schema { column: "f0".into() });
    }
    if let Some(existing) = caseset.feature_dim() {
        if existing != d {
            return Err(Error::Dimension(format!(
                "feature file has d={d} but cases already carry d={existing}"
            )));
        }
    }

    let mut rows: HashMap<(String, bool), Vec<f64>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 2 {
            return Err(Error::Dimension(format!(
                "line {line}: expected {d} feature values, found {}",
                record.len().saturating_sub(2)
            )));
        }
        let is_derm = match &record[1] {
            "derm" => true,
            "clin" => false,
            other => {
                return Err(Error::Format {
                    source_name: "feature file".into(),
                    line,
                    message: format!("unknown modality `{other}`"),
                })
            }
        };
        let values = record
            .iter()
            .skip(2)
            .map(|t| {
                t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Format {
                    source_name: "feature file".into(),
                    line,
                    message: format!("`{t}` is not a finite number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.insert((record[0].to_string(), is_derm), values).is_some() {
            return Err(Error::Format {
                source_name: "feature file".into(),
                line,
                message: format!("duplicate `{}` row for `{}`", &record[1], &record[0]),
            });
        }
    }

    let tag = caseset.split_tag();
    let mut cases = caseset.into_cases();
    for case in &mut cases {
        for (is_derm, modality) in [(true, "derm"), (false, "clin")] {
            let v = rows.remove(&(case.id.clone(), is_derm)).ok_or_else(|| {
                Error::IncompleteFeatures {
                    case_id: case.id.clone(),
                    modality: modality.into(),
                }
            })?;
            if is_derm {
                case.derm_features = v;
            } else {
                case.clin_features = v;
            }
        }
    }
    CaseSet::new(cases, tag)
}

pub fn write_features(caseset: &CaseSet, writer: impl Write) -> Result<()> {
    let d = caseset
        .feature_dim()
        .ok_or_else(|| Error::Config("case set has no features to write".into()))?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["case_id".to_string(), "modality".to_string()];
    header.extend((0..d).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for c in caseset.cases() {
        for (name, v) in [("derm", &c.derm_features), ("clin", &c.clin_features)] {
            let mut row = vec![c.id.clone(), name.to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<feature writer>", e))?;
    Ok(())
}
