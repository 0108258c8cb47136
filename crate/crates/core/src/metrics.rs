//! Confusion matrix, per-class precision/recall/F1 and their averages.

use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::LabelMap;
use crate::{ClassId, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("class id {id} out of range for {classes} classes")]
    OutOfRange { id: ClassId, classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("matrices have different sizes")]
    Shape,
}

/// `counts[i][j]` = files of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, MetricsError> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(MetricsError::Shape);
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: ClassId, predicted: ClassId) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn accumulate(&mut self, truth: ClassId, predicted: ClassId) -> Result<(), MetricsError> {
        for id in [truth, predicted] {
            if id >= self.classes {
                return Err(MetricsError::OutOfRange {
                    id,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    /// Add the counts of a matrix accumulated elsewhere.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.classes != self.classes {
            return Err(MetricsError::Shape);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Samples whose true class is `i`.
    pub fn row_sum(&self, i: ClassId) -> u64 {
        (0..self.classes).map(|j| self.get(i, j)).sum()
    }

    /// Samples predicted as `j`.
    pub fn column_sum(&self, j: ClassId) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    /// Dense grid with the class names as header row and first column.
    pub fn to_tsv(&self, labels: &LabelMap) -> String {
        let name = |i: ClassId| labels.name(i).map_or_else(|| i.to_string(), str::to_string);
        let mut out = String::from("truth\\predicted");
        for j in 0..self.classes {
            let _ = write!(out, "\t{}", name(j));
        }
        out.push('\n');
        for i in 0..self.classes {
            out.push_str(&name(i));
            for j in 0..self.classes {
                let _ = write!(out, "\t{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores<T> {
    pub class: ClassId,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport<T> {
    pub per_class: Vec<ClassScores<T>>,
    pub micro: Averages<T>,
    pub macro_avg: Averages<T>,
    pub accuracy: T,
    pub total: u64,
}

/// Which classes enter the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MacroScope {
    #[default]
    AllClasses,
    /// Only classes with at least one true sample.
    Supported,
}

/// `num / den`, or zero when `den` is zero.
fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::of_count(num) / T::of_count(den)
    }
}

fn f1<T: Scalar>(p: T, r: T) -> T {
    if p == r {
        p
    } else if p + r == T::zero() {
        T::zero()
    } else {
        T::of(2.0) * p * r / (p + r)
    }
}

pub fn report<T: Scalar>(matrix: &ConfusionMatrix) -> Result<EvaluationReport<T>, MetricsError> {
    report_with(matrix, MacroScope::AllClasses)
}

pub fn report_with<T: Scalar>(
    matrix: &ConfusionMatrix,
    scope: MacroScope,
) -> Result<EvaluationReport<T>, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let per_class: Vec<ClassScores<T>> = (0..matrix.classes())
        .map(|i| {
            let tp = matrix.get(i, i);
            let precision = ratio(tp, matrix.column_sum(i));
            let recall = ratio(tp, matrix.row_sum(i));
            ClassScores {
                class: i,
                precision,
                recall,
                f1: f1(precision, recall),
                support: matrix.row_sum(i),
            }
        })
        .collect();

    let included: Vec<&ClassScores<T>> = per_class
        .iter()
        .filter(|c| scope == MacroScope::AllClasses || c.support > 0)
        .collect();
    let n = T::of_count(included.len() as u64);
    let mean = |f: fn(&ClassScores<T>) -> T| -> T {
        if included.is_empty() {
            T::zero()
        } else {
            included.iter().map(|c| f(c)).sum::<T>() / n
        }
    };
    let macro_avg = Averages {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
    };

    // sum TP / sum (TP + FP): every prediction is a TP or an FP of its class
    let trace = matrix.trace();
    let predicted: u64 = (0..matrix.classes()).map(|j| matrix.column_sum(j)).sum();
    let actual: u64 = (0..matrix.classes()).map(|i| matrix.row_sum(i)).sum();
    let micro_p: T = ratio(trace, predicted);
    let micro_r: T = ratio(trace, actual);
    let micro = Averages {
        precision: micro_p,
        recall: micro_r,
        f1: f1(micro_p, micro_r),
    };

    Ok(EvaluationReport {
        per_class,
        micro,
        macro_avg,
        accuracy: ratio(trace, total),
        total,
    })
}

impl<T: Scalar> EvaluationReport<T> {
    /// Per-class rows by descending support, then class id.
    pub fn by_support(&self) -> Vec<&ClassScores<T>> {
        let mut rows: Vec<_> = self.per_class.iter().collect();
        rows.sort_by(|a, b| b.support.cmp(&a.support).then(a.class.cmp(&b.class)));
        rows
    }

    /// Aligned table for humans.
    pub fn to_table(&self, labels: &LabelMap) -> String {
        let name = |i: ClassId| {
            labels
                .name(i)
                .map_or_else(|| i.to_string(), |n| format!(".{n}"))
        };
        let width = self
            .per_class
            .iter()
            .map(|c| name(c.class).len())
            .chain([11])
            .max()
            .unwrap_or(11);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}",
            "class", "precision", "recall", "f1", "support"
        );
        for c in self.by_support() {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}",
                name(c.class),
                c.precision.to_f64_lossy(),
                c.recall.to_f64_lossy(),
                c.f1.to_f64_lossy(),
                c.support
            );
        }
        for (label, avg) in [("micro avg", &self.micro), ("macro avg", &self.macro_avg)] {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}",
                label,
                avg.precision.to_f64_lossy(),
                avg.recall.to_f64_lossy(),
                avg.f1.to_f64_lossy(),
                self.total
            );
        }
        let _ = writeln!(out, "accuracy {:.4}", self.accuracy.to_f64_lossy());
        out
    }

    /// Tab-separated dump with full precision.
    pub fn to_tsv(&self, labels: &LabelMap) -> String {
        let name = |i: ClassId| labels.name(i).map_or_else(|| i.to_string(), str::to_string);
        let mut out = String::from("class\tprecision\trecall\tf1\tsupport\n");
        for c in self.by_support() {
            let _ = writeln!(
                out,
                "{}\t{:?}\t{:?}\t{:?}\t{}",
                name(c.class),
                c.precision.to_f64_lossy(),
                c.recall.to_f64_lossy(),
                c.f1.to_f64_lossy(),
                c.support
            );
        }
        for (label, avg) in [("@micro", &self.micro), ("@macro", &self.macro_avg)] {
            let _ = writeln!(
                out,
                "{label}\t{:?}\t{:?}\t{:?}\t{}",
                avg.precision.to_f64_lossy(),
                avg.recall.to_f64_lossy(),
                avg.f1.to_f64_lossy(),
                self.total
            );
        }
        let _ = writeln!(out, "@accuracy\t{:?}", self.accuracy.to_f64_lossy());
        out
    }
}
