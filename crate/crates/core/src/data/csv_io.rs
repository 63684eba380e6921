//! One row per (sample, attribute):
//! `sample_id,attribute_id,label,t0,t1,…,t{T−1}`.
//!
//! The label cell is empty for unlabeled data. Values are written with
//! Rust's shortest round-trip formatting, so `save` then `load` is exact.

use std::fs::File;
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::dataset::TimeSeriesDataset;
use super::error::{DataError, Result};

const FIXED_COLUMNS: [&str; 3] = ["sample_id", "attribute_id", "label"];

/// Declared shape of a CSV file. Rows may appear in any order; every
/// (sample, attribute) cell must appear exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvLayout {
    pub samples: usize,
    pub attributes: usize,
    pub steps: usize,
}

impl CsvLayout {
    pub fn of(dataset: &TimeSeriesDataset) -> Self {
        Self { samples: dataset.n_samples(), attributes: dataset.n_attributes(), steps: dataset.steps() }
    }
}

fn step_column(t: usize) -> String {
    format!("t{t}")
}

pub fn save_csv(dataset: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dataset.steps()).map(step_column));
    w.write_record(&header).map_err(csv_io)?;
    let labels = dataset.labels();
    for n in 0..dataset.n_samples() {
        let label = labels.map(|l| l[n].to_string()).unwrap_or_default();
        for a in 0..dataset.n_attributes() {
            let mut row = vec![n.to_string(), a.to_string(), label.clone()];
            row.extend((0..dataset.steps()).map(|t| format!("{:?}", dataset.data()[[n, a, t]])));
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>, layout: CsvLayout) -> Result<TimeSeriesDataset> {
    let file = File::open(path)?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = r.headers().map_err(csv_io)?.clone();

    let position = |name: &str| -> Result<usize> {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| DataError::Parse {
            row: 0,
            column: name.to_string(),
            message: "missing column".into(),
        })
    };
    let sample_col = position("sample_id")?;
    let attr_col = position("attribute_id")?;
    let label_col = position("label")?;
    let declared_steps = header.iter().filter(|h| is_step_column(h.trim())).count();
    if declared_steps != layout.steps {
        return Err(DataError::Layout(format!("header declares {declared_steps} time steps, layout expects {}", layout.steps)));
    }
    let step_cols: Vec<usize> = (0..layout.steps).map(|t| position(&step_column(t))).collect::<Result<_>>()?;

    let mut data = Array3::<f64>::zeros((layout.samples, layout.attributes, layout.steps));
    let mut seen = vec![false; layout.samples * layout.attributes];
    let mut labels: Vec<Option<usize>> = vec![None; layout.samples];

    for (i, record) in r.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_io)?;
        if record.len() != header.len() {
            return Err(DataError::Parse {
                row,
                column: String::new(),
                message: format!("ragged row: {} cells, header has {}", record.len(), header.len()),
            });
        }
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        let int = |c: usize| -> Result<usize> {
            cell(c).parse().map_err(|e: std::num::ParseIntError| DataError::Parse {
                row,
                column: header[c].to_string(),
                message: e.to_string(),
            })
        };
        let n = int(sample_col)?;
        let a = int(attr_col)?;
        if n >= layout.samples || a >= layout.attributes {
            return Err(DataError::Layout(format!("row {row}: cell ({n}, {a}) outside declared {}×{}", layout.samples, layout.attributes)));
        }
        let slot = &mut seen[n * layout.attributes + a];
        if *slot {
            return Err(DataError::Layout(format!("row {row}: duplicate cell ({n}, {a})")));
        }
        *slot = true;

        let label = if cell(label_col).is_empty() { None } else { Some(int(label_col)?) };
        match (labels[n], label) {
            (Some(prev), Some(l)) if prev != l => {
                return Err(DataError::Parse { row, column: "label".into(), message: format!("sample {n} labelled {prev} and {l}") })
            }
            (None, Some(l)) => labels[n] = Some(l),
            _ => {}
        }

        for (t, &c) in step_cols.iter().enumerate() {
            data[[n, a, t]] = cell(c).parse().map_err(|e: std::num::ParseFloatError| DataError::Parse {
                row,
                column: header[c].to_string(),
                message: e.to_string(),
            })?;
        }
    }

    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(DataError::Layout(format!(
            "cell (sample {}, attribute {}) missing",
            missing / layout.attributes,
            missing % layout.attributes
        )));
    }
    let labels = if labels.iter().all(Option::is_some) {
        Some(labels.into_iter().flatten().collect())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(DataError::Layout("labels present for some samples only".into()));
    };
    TimeSeriesDataset::new(data, labels)
}

fn is_step_column(name: &str) -> bool {
    name.strip_prefix('t').is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

fn csv_io(e: csv::Error) -> DataError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DataError::Io(io),
        other => DataError::Parse { row: 0, column: String::new(), message: format!("{other:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn random(labels: bool) -> TimeSeriesDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = Array3::from_shape_simple_fn((4, 2, 8), || rng.random::<f64>() * 1e3 - 500.0);
        TimeSeriesDataset::new(data, labels.then(|| vec![0, 1, 1, 0])).unwrap()
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const LAYOUT: CsvLayout = CsvLayout { samples: 1, attributes: 1, steps: 2 };

    #[test]
    fn round_trip_is_exact() {
        for labels in [true, false] {
            let d = random(labels);
            let f = tempfile::NamedTempFile::new().unwrap();
            save_csv(&d, f.path()).unwrap();
            assert_eq!(load_csv(f.path(), CsvLayout::of(&d)).unwrap(), d);
        }
    }

    #[test]
    fn missing_column_is_named() {
        let f = write("sample_id,label,t0,t1\n0,,1,2\n");
        match load_csv(f.path(), LAYOUT) {
            Err(DataError::Parse { column, .. }) => assert_eq!(column, "attribute_id"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_count_mismatch_is_layout_error() {
        let f = write("sample_id,attribute_id,label,t0,t1,t2\n0,0,,1,2,3\n");
        assert!(matches!(load_csv(f.path(), LAYOUT), Err(DataError::Layout(_))));
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let f = write("sample_id,attribute_id,label,t0,t1\n0,0,,1\n");
        assert!(matches!(load_csv(f.path(), LAYOUT), Err(DataError::Parse { row: 1, .. })));
        let f = write("sample_id,attribute_id,label,t0,t1\n0,0,,1,abc\n");
        match load_csv(f.path(), LAYOUT) {
            Err(DataError::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (1, "t1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_cell_is_layout_error() {
        let f = write("sample_id,attribute_id,label,t0,t1\n0,0,,1,2\n");
        let layout = CsvLayout { samples: 2, ..LAYOUT };
        assert!(matches!(load_csv(f.path(), layout), Err(DataError::Layout(_))));
    }
}
