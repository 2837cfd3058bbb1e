use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::table::{FlowTable, LabelColumn, Provenance};
use crate::error::{Error, Result};

/// Identifier columns that leak flow identity rather than behavior.
pub const IDENTIFIER_COLUMNS: &[&str] = &[
    "flow id",
    "flow_id",
    "src ip",
    "source ip",
    "src_ip",
    "dst ip",
    "destination ip",
    "dst_ip",
    "timestamp",
    "date",
    "time",
];

/// Lowercase, alphanumerics only: `"Src IP"`, `"src_ip"` and `"SrcIP"` collide.
pub fn normalize_column_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Known public datasets; each fixes a drop-list and the normal label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetPreset {
    Dnp3,
    Iec104,
    Generic,
}

impl DatasetPreset {
    pub fn drop_columns(self) -> Vec<String> {
        match self {
            DatasetPreset::Dnp3 | DatasetPreset::Iec104 => {
                IDENTIFIER_COLUMNS.iter().map(|s| s.to_string()).collect()
            }
            DatasetPreset::Generic => Vec::new(),
        }
    }

    pub fn normal_label(self) -> &'static str {
        "NORMAL"
    }
}

impl std::str::FromStr for DatasetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize_column_name(s).as_str() {
            "dnp3" => Ok(DatasetPreset::Dnp3),
            "iec104" | "iec608705104" => Ok(DatasetPreset::Iec104),
            "generic" | "none" => Ok(DatasetPreset::Generic),
            _ => Err(Error::Config(format!("unknown dataset preset `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub label_column: String,
    /// Matched after [`normalize_column_name`].
    pub drop_columns: Vec<String>,
    /// Reuse categorical encodings from an earlier load; unseen categories are
    /// appended after the known ones. When present, only these columns are
    /// treated as categorical.
    pub encodings: Option<BTreeMap<String, Vec<String>>>,
    /// Accept files without the label column (prediction input).
    pub label_optional: bool,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            ..Self::default()
        }
    }

    pub fn drop(mut self, cols: Vec<String>) -> Self {
        self.drop_columns = cols;
        self
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok()
}

/// Reads comma-separated text with a header row.
///
/// Numeric cells are parsed as `f64`; empty cells become NaN (removed by
/// [`clean`](crate::data::clean)). A feature column with any non-numeric cell
/// is label-encoded: distinct strings map to `0, 1, 2, ...` in order of first
/// appearance.
pub fn parse_csv(text: &str, source: &str, opts: &CsvOptions) -> Result<FlowTable> {
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(source.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();

    let label_idx = header
        .iter()
        .position(|h| *h == opts.label_column)
        .or_else(|| {
            let want = normalize_column_name(&opts.label_column);
            header.iter().position(|h| normalize_column_name(h) == want)
        });
    if label_idx.is_none() && !opts.label_optional {
        return Err(Error::MissingLabelColumn(opts.label_column.clone()));
    }
    let drop: Vec<String> = opts.drop_columns.iter().map(|c| normalize_column_name(c)).collect();
    let mut dropped = Vec::new();
    let mut keep = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if Some(i) == label_idx {
            continue;
        }
        if drop.contains(&normalize_column_name(h)) {
            dropped.push(h.clone());
        } else {
            keep.push(i);
        }
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        cells.push(keep.iter().map(|&i| rec[i].to_string()).collect());
        labels.push(label_idx.map_or_else(String::new, |i| rec[i].trim().to_string()));
    }
    if cells.is_empty() {
        return Err(Error::EmptyDataset(format!("{source}: no data rows")));
    }

    let names: Vec<String> = keep.iter().map(|&i| header[i].clone()).collect();
    let mut rows = vec![Vec::with_capacity(names.len()); cells.len()];
    let mut encodings = BTreeMap::new();
    for (col, name) in names.iter().enumerate() {
        let categorical = match &opts.encodings {
            Some(known) => known.contains_key(name),
            None => cells.iter().any(|r| parse_cell(&r[col]).is_none()),
        };
        if categorical {
            let mut order: Vec<String> = opts
                .encodings
                .as_ref()
                .and_then(|k| k.get(name).cloned())
                .unwrap_or_default();
            let mut index: HashMap<String, usize> =
                order.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
            for (r, row) in cells.iter().enumerate() {
                let v = row[col].trim();
                let code = if v.is_empty() {
                    f64::NAN
                } else {
                    let next = index.len();
                    let k = *index.entry(v.to_string()).or_insert_with(|| {
                        order.push(v.to_string());
                        next
                    });
                    k as f64
                };
                rows[r].push(code);
            }
            encodings.insert(name.clone(), order);
        } else {
            for (r, row) in cells.iter().enumerate() {
                rows[r].push(parse_cell(&row[col]).unwrap_or(f64::NAN));
            }
        }
    }

    let mut table = FlowTable::new(names, rows, LabelColumn::Raw(labels))?;
    let mut prov = Provenance {
        source: Some(source.to_string()),
        ..Provenance::default()
    };
    prov.steps.push(format!(
        "loaded {} rows x {} features from {source}",
        table.len(),
        table.n_features()
    ));
    if !dropped.is_empty() {
        prov.steps.push(format!("dropped identifier columns {dropped:?}"));
    }
    for (col, order) in &encodings {
        prov.steps.push(format!("label-encoded `{col}` ({} categories)", order.len()));
    }
    prov.dropped_columns = dropped;
    prov.encodings = encodings;
    table.provenance = prov;
    Ok(table)
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<FlowTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, &path.display().to_string(), opts)
}

/// Features followed by a `label` column, values in shortest round-trip form.
pub fn table_to_csv(table: &FlowTable) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = table.feature_names().iter().map(String::as_str).collect();
    header.push("label");
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in table.rows().iter().enumerate() {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        match table.labels() {
            LabelColumn::Binary(l) => out.push_str(&l[i].to_string()),
            LabelColumn::Raw(l) => out.push_str(&l[i]),
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(table: &FlowTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(table_to_csv(table).as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> CsvOptions {
        CsvOptions::new("label")
    }

    #[test]
    fn numeric_passthrough() {
        let t = parse_csv("a,b,label\n1,2.5,x\n3,4,y\n-1,0,x\n", "t", &opts()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows()[1], vec![3.0, 4.0]);
        assert_eq!(t.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(
            t.labels(),
            &LabelColumn::Raw(vec!["x".into(), "y".into(), "x".into()])
        );
    }

    #[test]
    fn text_columns_are_encoded_in_first_appearance_order() {
        let t = parse_csv("proto,n,label\ntcp,1,a\nudp,2,a\ntcp,3,b\n", "t", &opts()).unwrap();
        let col: Vec<f64> = t.rows().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 1.0, 0.0]);
        assert_eq!(t.provenance.encodings["proto"], vec!["tcp", "udp"]);
    }

    #[test]
    fn known_encodings_are_reused() {
        let mut o = opts();
        o.encodings = Some(BTreeMap::from([(
            "proto".to_string(),
            vec!["udp".to_string(), "tcp".to_string()],
        )]));
        let t = parse_csv("proto,label\ntcp,a\nicmp,a\nudp,a\n", "t", &o).unwrap();
        let col: Vec<f64> = t.rows().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn ragged_row_cites_line() {
        let err = parse_csv("a,b,label\n1,2,x\n1,x\n", "f.csv", &opts()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_and_empty_file() {
        assert!(matches!(
            parse_csv("a,b\n1,2\n", "t", &opts()),
            Err(Error::MissingLabelColumn(c)) if c == "label"
        ));
        assert!(matches!(parse_csv("", "t", &opts()), Err(Error::EmptyFile(_))));
        assert!(matches!(parse_csv("a,label\n", "t", &opts()), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn identifier_columns_are_dropped() {
        let o = opts().drop(DatasetPreset::Dnp3.drop_columns());
        let t = parse_csv(
            "Flow ID,Src IP,Timestamp,Dst Port,Label\nf1,10.0.0.1,t0,20000,NORMAL\n",
            "t",
            &CsvOptions { label_column: "Label".into(), ..o },
        )
        .unwrap();
        assert_eq!(t.feature_names(), &["Dst Port".to_string()]);
        assert_eq!(t.provenance.dropped_columns.len(), 3);
    }

    #[test]
    fn empty_cells_become_nan() {
        let t = parse_csv("a,label\n,x\n2,y\n", "t", &opts()).unwrap();
        assert!(t.rows()[0][0].is_nan());
    }

    #[test]
    fn csv_round_trip_text() {
        let t = parse_csv("a,label\n0.1,x\n2,y\n", "t", &opts()).unwrap();
        assert_eq!(table_to_csv(&t), "a,label\n0.1,x\n2,y\n");
    }
}
