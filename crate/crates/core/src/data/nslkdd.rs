//! Helpers for the NSL-KDD intrusion-detection files (`KDDTrain+.txt`,
//! `KDDTest+.txt`): headerless CSV with 41 features, the attack label and a
//! difficulty score.

use std::collections::BTreeSet;
use std::path::Path;

use super::{parse_records, AnomalyValues, Column, LabelSpec, Schema, Table, UnknownCategory};
use crate::{Error, Result};

pub const FEATURES: [&str; 41] = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
];

pub const CATEGORICAL: [&str; 3] = ["protocol_type", "service", "flag"];

pub const LABEL: &str = "label";

/// Attack names of the denial-of-service family.
pub const DOS_ATTACKS: [&str; 11] = [
    "apache2", "back", "land", "mailbomb", "neptune", "pod", "processtable", "smurf",
    "teardrop", "udpstorm", "worm",
];

pub fn header() -> Vec<String> {
    FEATURES
        .iter()
        .copied()
        .chain([LABEL, "difficulty"])
        .map(str::to_owned)
        .collect()
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    rdr.records().map(|r| r.map_err(Error::from)).collect()
}

/// Fit a schema on a training file: numeric ranges from observed min/max,
/// categories in sorted order of appearance. Columns that are constant on
/// the training file carry no information and would make scaling undefined,
/// so they are left out.
pub fn fit_schema(train_path: &Path) -> Result<Schema> {
    let records = read_records(train_path)?;
    if records.is_empty() {
        return Err(Error::Empty(format!("{}", train_path.display())));
    }
    let mut columns = Vec::new();
    for (j, &name) in FEATURES.iter().enumerate() {
        let cell = |r: usize| {
            records[r].get(j).ok_or_else(|| Error::Parse {
                row: r + 1,
                column: name.to_owned(),
                message: "short row".into(),
            })
        };
        if CATEGORICAL.contains(&name) {
            let mut cats = BTreeSet::new();
            for r in 0..records.len() {
                cats.insert(cell(r)?.to_owned());
            }
            columns.push(Column::Categorical { name: name.into(), categories: cats.into_iter().collect() });
        } else {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for r in 0..records.len() {
                let raw = cell(r)?;
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: name.to_owned(),
                    message: format!("`{raw}` is not a number"),
                })?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo < hi {
                columns.push(Column::Numeric { name: name.into(), min: lo, max: hi });
            }
        }
    }
    let mut schema = Schema::new(
        columns,
        LabelSpec {
            name: LABEL.into(),
            normal_value: "normal".into(),
            anomaly_values: AnomalyValues::default(),
        },
    )?;
    // The test file has services and flags never seen in training.
    schema.unknown_category = UnknownCategory::ZeroBlock;
    Ok(schema)
}

/// Read a headerless NSL-KDD file under `schema`.
pub fn load(path: &Path, schema: &Schema) -> Result<Table> {
    let records = read_records(path)?;
    parse_records(&header(), records.into_iter().map(Ok), schema)
}

pub fn is_dos(label: &str) -> bool {
    DOS_ATTACKS.contains(&label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const ROWS: &str = "\
0,tcp,http,SF,181,5450,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,0.00,0.00,0.00,0.00,1.00,0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal,21
0,udp,private,SF,105,146,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,0.00,0.00,0.00,0.00,1.00,0.00,0.00,255,254,1.00,0.01,0.00,0.00,0.00,0.00,0.00,0.00,normal,21
2,tcp,private,S0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,123,6,1.00,1.00,0.00,0.00,0.05,0.07,0.00,255,26,0.10,0.05,0.00,0.00,1.00,1.00,0.00,0.00,neptune,19
";

    #[test]
    fn fit_and_load() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(ROWS.as_bytes()).unwrap();
        let schema = fit_schema(f.path()).unwrap();
        let names: Vec<&str> = schema.columns.iter().map(|c| c.name()).collect();
        assert!(names.contains(&"src_bytes"));
        assert!(!names.contains(&"num_outbound_cmds"));
        let t = load(f.path(), &schema).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.labels[2], "neptune");
        assert!(is_dos(&t.labels[2]));
        let d = super::super::encode(&t, &schema, "kdd").unwrap();
        assert_eq!(d.labels, vec![1.0, 1.0, -1.0]);
        assert_eq!(d.dim(), schema.encoded_dim());
    }

    #[test]
    fn header_shape() {
        assert_eq!(header().len(), 43);
    }
}
