//! Plaintext binary datasets: CSV ingestion, power-of-two padding and
//! selection decoding.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}, column `{column}`: expected 0 or 1, found `{value}`")]
    BadCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("input is empty")]
    Empty,
    #[error("header needs at least one feature column and a class column")]
    NoFeatures,
    #[error("dataset has no data rows")]
    NoRows,
    #[error("mask has {found} entries but the dataset has {expected} features")]
    MaskLength { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary dataset `(D, F, C)`: `n` samples, `k` features, one class bit each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    class_name: String,
    rows: Vec<Vec<bool>>,
    classes: Vec<bool>,
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        class_name: impl Into<String>,
        rows: Vec<Vec<bool>>,
        classes: Vec<bool>,
    ) -> Result<Self, DatasetError> {
        if names.is_empty() {
            return Err(DatasetError::NoFeatures);
        }
        if rows.is_empty() {
            return Err(DatasetError::NoRows);
        }
        if classes.len() != rows.len() {
            return Err(DatasetError::Ragged {
                line: 0,
                expected: rows.len(),
                found: classes.len(),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(DatasetError::Ragged {
                    line: i as u64 + 2,
                    expected: names.len() + 1,
                    found: r.len() + 1,
                });
            }
        }
        Ok(Dataset {
            names,
            class_name: class_name.into(),
            rows,
            classes,
        })
    }

    /// Builds a dataset from 0/1 literals with default names `f1..fk`, `C`.
    pub fn from_bits(rows: &[&[u8]], classes: &[u8]) -> Result<Self, DatasetError> {
        let k = rows.first().map_or(0, |r| r.len());
        Dataset::new(
            (1..=k).map(|j| format!("f{j}")).collect(),
            "C",
            rows.iter()
                .map(|r| r.iter().map(|&v| v != 0).collect())
                .collect(),
            classes.iter().map(|&v| v != 0).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn feature(&self, i: usize, j: usize) -> bool {
        self.rows[i][j]
    }

    pub fn class(&self, i: usize) -> bool {
        self.classes[i]
    }

    pub fn classes(&self) -> &[bool] {
        &self.classes
    }

    /// Keeps only the columns whose mask bit is set, in original order.
    ///
    /// # Panics
    /// If the mask length differs from `k` or selects nothing.
    pub fn project(&self, mask: &[bool]) -> Dataset {
        assert_eq!(mask.len(), self.k());
        let keep: Vec<usize> = (0..self.k()).filter(|&j| mask[j]).collect();
        assert!(!keep.is_empty(), "projection must keep at least one column");
        Dataset {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            class_name: self.class_name.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
            classes: self.classes.clone(),
        }
    }

    /// Parses CSV text: header of feature names then the class name, each
    /// data cell exactly `0` or `1`. LF and CRLF line endings are accepted.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(DatasetError::Empty),
            Some(h) => h?,
        };
        if header.len() < 2 {
            return Err(DatasetError::NoFeatures);
        }
        let width = header.len();
        let header: Vec<String> = header.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut classes = Vec::new();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != width {
                return Err(DatasetError::Ragged {
                    line,
                    expected: width,
                    found: rec.len(),
                });
            }
            let mut row = Vec::with_capacity(width - 1);
            for (j, cell) in rec.iter().enumerate() {
                let v = match cell {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(DatasetError::BadCell {
                            line,
                            column: header[j].clone(),
                            value: other.to_string(),
                        })
                    }
                };
                if j + 1 == width {
                    classes.push(v);
                } else {
                    row.push(v);
                }
            }
            rows.push(row);
        }
        let class_name = header[width - 1].clone();
        let names = header[..width - 1].to_vec();
        Dataset::new(names, class_name, rows, classes)
    }

    pub fn load_csv(path: &Path) -> Result<Self, DatasetError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(&self.class_name);
        w.write_record(&header)?;
        for (r, &c) in self.rows.iter().zip(&self.classes) {
            let cells = r
                .iter()
                .chain(std::iter::once(&c))
                .map(|&v| if v { "1" } else { "0" });
            w.write_record(cells)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dataset padded with dummy rows to a power-of-two length.
///
/// Dummy rows carry all-zero features, class 0 and validity 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedDataset {
    base: Dataset,
    n_pad: usize,
    validity: Vec<bool>,
}

impl PaddedDataset {
    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    pub fn n_pad(&self) -> usize {
        self.n_pad
    }

    pub fn validity(&self) -> &[bool] {
        &self.validity
    }

    /// Width of stability suffixes and labels: `⌈log₂ n_pad⌉`.
    pub fn suffix_bits(&self) -> usize {
        suffix_bits(self.n_pad)
    }

    pub fn feature(&self, i: usize, j: usize) -> bool {
        i < self.base.n() && self.base.feature(i, j)
    }

    pub fn class(&self, i: usize) -> bool {
        i < self.base.n() && self.base.class(i)
    }
}

/// `⌈log₂ m⌉` for a power of two `m ≥ 1`.
pub fn suffix_bits(m: usize) -> usize {
    debug_assert!(m.is_power_of_two());
    m.trailing_zeros() as usize
}

pub fn pad(ds: &Dataset) -> PaddedDataset {
    let n_pad = ds.n().next_power_of_two();
    let validity = (0..n_pad).map(|i| i < ds.n()).collect();
    PaddedDataset {
        base: ds.clone(),
        n_pad,
        validity,
    }
}

/// Names of the features whose mask bit is set, in column order.
pub fn decode_selection(mask: &[bool], ds: &Dataset) -> Result<Vec<String>, DatasetError> {
    if mask.len() != ds.k() {
        return Err(DatasetError::MaskLength {
            expected: ds.k(),
            found: mask.len(),
        });
    }
    Ok(mask
        .iter()
        .zip(ds.names())
        .filter(|(&m, _)| m)
        .map(|(_, name)| name.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn loads_table2() {
        let ds = Dataset::read_csv(fixtures::TABLE2_CSV.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.k()), (8, 5));
        assert_eq!(ds.row(0), &[true, false, true, true, true]);
        assert!(!ds.class(0));
        assert_eq!(ds, fixtures::table2());
    }

    #[test]
    fn minimal_file() {
        let ds = Dataset::read_csv("f1,C\n0,1\n".as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.k()), (1, 1));
        assert!(ds.class(0));
    }

    #[test]
    fn crlf_accepted() {
        let ds = Dataset::read_csv("a,b,C\r\n0,1,1\r\n1,1,0\r\n".as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.k()), (2, 2));
        assert_eq!(ds.names(), &["a", "b"]);
        assert_eq!(ds.class_name(), "C");
    }

    #[test]
    fn rejects_out_of_domain_cell() {
        let err = Dataset::read_csv("f1,f2,C\n0,1,0\n1,2,1\n".as_bytes()).unwrap_err();
        match err {
            DatasetError::BadCell {
                line,
                column,
                value,
            } => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "f2", "2"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(matches!(
            Dataset::read_csv("f1,f2,C\n0,1\n".as_bytes()),
            Err(DatasetError::Ragged {
                line: 2,
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            Dataset::read_csv("".as_bytes()),
            Err(DatasetError::Empty)
        ));
        assert!(matches!(
            Dataset::read_csv("f1,C\n".as_bytes()),
            Err(DatasetError::NoRows)
        ));
        assert!(matches!(
            Dataset::read_csv("C\n1\n".as_bytes()),
            Err(DatasetError::NoFeatures)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ds = fixtures::table2();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn pad_examples() {
        let row: &[u8] = &[1];
        for (n, n_pad, dummies) in [(5, 8, 3), (8, 8, 0), (9, 16, 7), (1, 1, 0)] {
            let rows = vec![row; n];
            let ds = Dataset::from_bits(&rows, &vec![1; n]).unwrap();
            let p = pad(&ds);
            assert_eq!(p.n_pad(), n_pad);
            assert_eq!(p.validity().iter().filter(|&&v| !v).count(), dummies);
            for i in n..n_pad {
                assert!(!p.feature(i, 0) && !p.class(i));
            }
        }
        let ds = Dataset::from_bits(&[row; 5], &[1; 5]).unwrap();
        assert_eq!(
            pad(&ds).validity(),
            &[true, true, true, true, true, false, false, false]
        );
    }

    #[test]
    fn decode_examples() {
        let ds = fixtures::table2();
        let sel = decode_selection(&[false, false, false, true, true], &ds).unwrap();
        assert_eq!(sel, ["f4", "f5"]);
        assert!(decode_selection(&[false; 5], &ds).unwrap().is_empty());
        assert_eq!(decode_selection(&[true; 5], &ds).unwrap().len(), 5);
        assert!(matches!(
            decode_selection(&[true; 4], &ds),
            Err(DatasetError::MaskLength {
                expected: 5,
                found: 4
            })
        ));
    }

    proptest! {
        #[test]
        fn padding_bounds(n in 1usize..2000) {
            let row: &[u8] = &[0];
            let ds = Dataset::from_bits(&vec![row; n], &vec![0; n]).unwrap();
            let p = pad(&ds);
            prop_assert!(p.n_pad().is_power_of_two());
            prop_assert!(p.n_pad() / 2 < n && n <= p.n_pad());
            prop_assert_eq!(p.validity().iter().filter(|&&v| v).count(), n);
            prop_assert_eq!(1usize << p.suffix_bits(), p.n_pad());
        }

        #[test]
        fn decode_length_is_popcount(mask in proptest::collection::vec(any::<bool>(), 5)) {
            let ds = fixtures::table2();
            let sel = decode_selection(&mask, &ds).unwrap();
            prop_assert_eq!(sel.len(), mask.iter().filter(|&&b| b).count());
        }

        #[test]
        fn padding_preserves_real_rows(bits in proptest::collection::vec(any::<bool>(), 3..40)) {
            let k = 3;
            let n = bits.len() / k;
            prop_assume!(n >= 1);
            let rows: Vec<Vec<bool>> = bits.chunks(k).take(n).map(|c| c.to_vec()).collect();
            let classes: Vec<bool> = rows.iter().map(|r| r[0]).collect();
            let ds = Dataset::new(vec!["a".into(), "b".into(), "c".into()], "C", rows, classes).unwrap();
            let p = pad(&ds);
            for i in 0..n {
                for j in 0..k {
                    prop_assert_eq!(p.feature(i, j), ds.feature(i, j));
                }
                prop_assert_eq!(p.class(i), ds.class(i));
            }
        }
    }
}
