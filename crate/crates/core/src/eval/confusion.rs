use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::binary::BinaryMapping;
use super::Result;
use crate::learn::ClassLabel;

/// Counts indexed `[predicted][actual]`; column totals are class sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<ClassLabel>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<ClassLabel>) -> Self {
        let k = classes.len();
        Self { classes, counts: vec![vec![0; k]; k] }
    }

    /// Builds from class-index pairs `(predicted, actual)`.
    pub fn from_indices(classes: Vec<ClassLabel>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(classes);
        for (p, a) in pairs {
            m.counts[p][a] += 1;
        }
        m
    }

    /// Builds from labels; the class list is the sorted union of both sides.
    pub fn from_labels(pairs: &[(ClassLabel, ClassLabel)]) -> Self {
        let mut classes: Vec<ClassLabel> = pairs.iter().flat_map(|&(p, a)| [p, a]).collect();
        classes.sort_by_key(|c| c.code());
        classes.dedup();
        let idx = |c: ClassLabel| classes.iter().position(|&x| x == c).unwrap();
        let ix: Vec<(usize, usize)> = pairs.iter().map(|&(p, a)| (idx(p), idx(a))).collect();
        Self::from_indices(classes.clone(), ix)
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes);
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|k| self.counts[k][k]).sum()
    }

    pub fn column_totals(&self) -> Vec<usize> {
        (0..self.classes.len()).map(|a| self.counts.iter().map(|r| r[a]).sum()).collect()
    }

    pub fn row_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// `1 - diagonal / column total`; classes without instances report 0.
    pub fn per_class_error(&self) -> Vec<f64> {
        self.column_totals()
            .iter()
            .enumerate()
            .map(|(k, &t)| if t == 0 { 0.0 } else { 1.0 - self.counts[k][k] as f64 / t as f64 })
            .collect()
    }

    /// Overall misclassification rate.
    pub fn error(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            1.0 - self.correct() as f64 / t as f64
        }
    }

    /// Collapses six-class emotion counts into negative / positive.
    pub fn collapse_binary(&self, mapping: &BinaryMapping) -> Result<ConfusionMatrix> {
        let mut out = ConfusionMatrix::new(BinaryMapping::classes().to_vec());
        let slot = |c: ClassLabel| -> Result<usize> {
            let v = mapping.map(c)?;
            Ok(BinaryMapping::classes().iter().position(|&x| x == v).unwrap())
        };
        for (p, row) in self.counts.iter().enumerate() {
            for (a, &n) in row.iter().enumerate() {
                if n > 0 {
                    out.counts[slot(self.classes[p])?][slot(self.classes[a])?] += n;
                }
            }
        }
        Ok(out)
    }

    /// Rows are actual classes, columns predicted, with per-class error.
    pub fn render(&self) -> String {
        let names: Vec<String> = self.classes.iter().map(|c| c.to_string()).collect();
        let width = names.iter().map(String::len).max().unwrap_or(4).max(8);
        let mut s = String::new();
        let _ = write!(s, "{:>width$}", "real\\pred");
        for n in &names {
            let _ = write!(s, " {n:>width$}");
        }
        let _ = writeln!(s, " {:>10}", "error(%)");
        let errors = self.per_class_error();
        for (a, name) in names.iter().enumerate() {
            let _ = write!(s, "{name:>width$}");
            for p in 0..names.len() {
                let _ = write!(s, " {:>width$}", self.counts[p][a]);
            }
            let _ = writeln!(s, " {:>10.1}", 100.0 * errors[a]);
        }
        let _ = writeln!(s, "{:>width$} {:>10.1}", "average", 100.0 * self.error());
        s
    }
}
