use std::fmt::Write as _;
use std::path::Path;

use super::stats::{kmeans2, spearman, KMeans, Spearman};
use crate::{Error, Result};

/// Named numeric columns per subject, read from a tab-separated file whose
/// header row starts with the subject column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl FeatureTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header row"))?;
        let columns: Vec<String> = header.split('\t').skip(1).map(|c| c.trim().to_string()).collect();
        if columns.is_empty() {
            return Err(Error::parse(path, 1, "header has no value columns"));
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != columns.len() + 1 {
                return Err(Error::parse(path, n + 1, format!("expected {} fields, got {}", columns.len() + 1, f.len())));
            }
            let values = f[1..]
                .iter()
                .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::parse(path, n + 1, format!("non-numeric value in `{line}`")))?;
            rows.push((f[0].trim().to_string(), values));
        }
        Ok(FeatureTable { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::parse(&text, path)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|(_, v)| v[i]).collect())
    }
}

/// Rank correlations of every `rows` column against every `cols` column.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `None` where a column is constant
    pub cells: Vec<Vec<Option<Spearman>>>,
}

impl CorrelationMatrix {
    /// `r/p` per cell, `*` marking significance, `NA` when undefined.
    pub fn render(&self) -> String {
        let mut out = format!("metric\t{}\n", self.cols.join("\t"));
        for (name, row) in self.rows.iter().zip(&self.cells) {
            out.push_str(name);
            for cell in row {
                match cell {
                    Some(s) => write!(out, "\t{:.4}/{:.4}{}", s.r, s.p, if s.significant { "*" } else { "" }).unwrap(),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlate(table: &FeatureTable, rows: &[String], cols: &[String]) -> Result<CorrelationMatrix> {
    let mut cells = Vec::new();
    for r in rows {
        let x = table.column(r)?;
        let mut line = Vec::new();
        for c in cols {
            let y = table.column(c)?;
            line.push(match spearman(&x, &y) {
                Ok(s) => Some(s),
                Err(Error::Stats(msg)) if msg.contains("constant") => None,
                Err(e) => return Err(e),
            });
        }
        cells.push(line);
    }
    Ok(CorrelationMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        cells,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub subjects: Vec<String>,
    /// true for the anomalous cluster
    pub anomalous: Vec<bool>,
    pub kmeans: KMeans,
}

impl Classification {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for ((s, a), c) in self.subjects.iter().zip(&self.anomalous).zip(&self.kmeans.labels) {
            writeln!(out, "{s}\t{}\t{c}", if *a { "anomalous" } else { "normal" }).unwrap();
        }
        out
    }
}

/// Splits subjects in two by the given columns. The smaller cluster is the
/// anomalous one; on a tie, the one whose center lies farther from the origin.
pub fn classify(table: &FeatureTable, columns: &[String], seed: u64) -> Result<Classification> {
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let points: Vec<Vec<f64>> = (0..table.rows.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let km = kmeans2(&points, seed)?;
    let size1 = km.labels.iter().filter(|l| **l == 1).count();
    let size0 = km.labels.len() - size1;
    let norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>();
    let odd = match size0.cmp(&size1) {
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Equal => usize::from(norm(&km.centers[1]) > norm(&km.centers[0])),
    };
    Ok(Classification {
        subjects: table.rows.iter().map(|(s, _)| s.clone()).collect(),
        anomalous: km.labels.iter().map(|l| *l == odd).collect(),
        kmeans: km,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "subject\tRMC\tchurn\tflat\na\t1\t10\t5\nb\t2\t20\t5\nc\t3\t30\t5\nd\t100\t31\t5\n";

    #[test]
    fn parse_and_correlate() {
        let t = FeatureTable::parse(TABLE, Path::new("t")).unwrap();
        assert_eq!(t.columns, ["RMC", "churn", "flat"]);
        let m = correlate(&t, &["RMC".into()], &["churn".into(), "flat".into()]).unwrap();
        assert_eq!(m.cells[0][0].unwrap().r, 1.0);
        assert!(m.cells[0][1].is_none());
        assert!(m.render().starts_with("metric\tchurn\tflat\nRMC\t1.0000/"));
        assert!(FeatureTable::parse("subject\tx\na\tq\n", Path::new("t")).is_err());
    }

    #[test]
    fn outlier_is_anomalous() {
        let t = FeatureTable::parse(TABLE, Path::new("t")).unwrap();
        let c = classify(&t, &["RMC".into()], 3).unwrap();
        assert_eq!(c.anomalous, [false, false, false, true]);
        assert!(c.render().ends_with("d\tanomalous\t") || c.render().contains("d\tanomalous\t"));
    }
}
